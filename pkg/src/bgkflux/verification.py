"""Invariant checks over a shipped configuration matrix, with seeded random pairs."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .bgk import BgkConfig, bgk_run, relax_step
from .experiments import Check, check_ge, check_le
from .kinetic_analysis import NONNEG_TOL, compare_plus, defect_mass, defect_measure
from .model import (Coefficient, Grid, KineticDensity, MacroField, build_velocity, chi,
                    kinetic_flux)
from .reference import FvConfig, eo_flux, fv_run, riemann_profile, shock_speed
from .transport import (CharParams, char_backward, char_forward, jacobian, pwc_mass,
                        transport_apply, transport_exact_pwc)

COEFFICIENTS = ((1.0, 1.0), (1.0, 2.0), (2.0, 1.0))
RIEMANN_DATA = ((1.0, 0.0), (0.0, 1.0), (0.8, 0.2))
N_PAIRS = 16


@dataclass(frozen=True)
class SuiteSettings:
    n_x: int = 128
    n_xi: int = 16
    half_width: float = 1.5
    eps: float = 0.05
    t_final: float = 0.25

    def grid(self) -> Grid:
        return Grid(-self.half_width, self.half_width, self.n_x, self.n_xi)

    def bgk(self) -> BgkConfig:
        return BgkConfig(self.eps, "strang", None, self.t_final, 8)


def _random_steps(rng: np.random.Generator, grid: Grid, n_pieces: int = 4,
                  support: float = 0.8) -> np.ndarray:
    """Piecewise-constant u in [0, 1] with random jumps inside [-support, support]."""
    cuts = np.sort(rng.uniform(-support, support, n_pieces - 1))
    vals = rng.uniform(0.0, 1.0, n_pieces)
    return vals[np.searchsorted(cuts, grid.x)]


def characteristic_checks(rng: np.random.Generator) -> list[Check]:
    P = lambda kl, kr, a: CharParams(Coefficient(kl, kr), a)
    hand = [
        (char_forward(1.0, 2.0, P(1, 1, 1.0)), 3.0),
        (char_forward(-1.0, 3.0, P(1, 2, 1.0)), 4.0),
        (char_forward(1.0, 3.0, P(1, 2, -1.0)), -2.5),
        (char_backward(4.0, 3.0, P(1, 2, 1.0)), -1.0),
        (char_backward(3.0, 2.0, P(1, 1, 1.0)), 1.0),
        (char_backward(0.7, 5.0, P(1, 2, 0.0)), 0.7),
        (jacobian(3.0, 2.0, P(1, 2, 1.0)), 0.5),
        (jacobian(3.0, -5.0, P(1, 2, 1.0)), 1.0),
        (jacobian(3.0, -2.0, P(1, 2, -1.0)), 2.0),
    ]
    err_hand = max(abs(a - b) for a, b in hand)
    semi, inv = 0.0, 0.0
    n = 10_000
    for kl, kr in COEFFICIENTS + ((-1.0, -2.0), (0.5, 3.0)):
        c = Coefficient(kl, kr)
        x = rng.uniform(-3, 3, n)
        for a in rng.uniform(-1, 1, 8):
            p = CharParams(c, float(a))
            for s1, t1 in zip(rng.uniform(0, 2, 4), rng.uniform(0, 2, 4)):
                lhs = char_forward(char_forward(x, s1, p), t1, p)
                rhs = char_forward(x, s1 + t1, p)
                semi = max(semi, float(np.abs(lhs - rhs).max()))
                y = char_forward(x, t1, p)
                back = char_backward(y, t1, p)
                ok = np.abs(y) > 1e-9  # images on the fan boundary are excluded
                inv = max(inv, float(np.abs(back - x)[ok].max()))
    return [
        check_le("characteristics_hand_examples", "explicit characteristics", err_hand, 1e-12),
        check_le("characteristics_semigroup", "explicit characteristics", semi, 1e-12),
        check_le("characteristics_inverse", "backward characteristics", inv, 1e-12),
    ]


def transport_checks(rng: np.random.Generator, settings: SuiteSettings,
                     use_jacobian: bool) -> list[Check]:
    vel = build_velocity("burgers")
    g = settings.grid()
    mass_err, lp_excess, oracle_mass = 0.0, -np.inf, 0.0
    for kl, kr in COEFFICIENTS:
        c = Coefficient(kl, kr)
        for _ in range(N_PAIRS // 4):
            # compact support keeps boundary flux out of the balance
            prof = _random_steps(rng, g) * (np.abs(g.x) < 0.8)
            vals = np.repeat(prof[:, None], g.n_xi, axis=1)
            vals *= rng.uniform(0, 1, g.n_xi)[None, :]
            f = KineticDensity(vals, g)
            out = transport_apply(f, 0.3, c, vel, use_jacobian=use_jacobian)
            row_in = g.dx * vals.sum(axis=0)
            row_out = g.dx * out.values.sum(axis=0)
            mass_err = max(mass_err, float(np.abs(row_out - row_in).max()))
            for p in (1, 2, np.inf):
                n_in = np.linalg.norm(vals, ord=p, axis=0) * (g.dx ** (1 / p) if p != np.inf else 1)
                n_out = np.linalg.norm(out.values, ord=p, axis=0) * (g.dx ** (1 / p) if p != np.inf else 1)
                lp_excess = max(lp_excess, float((n_out - c.M_k * n_in).max()))
            # exact oracle conserves mass
            prof = [(-0.6, 1.0), (-0.2, 0.3), (0.1, 0.0)]
            for a in (-0.8, 0.5):
                img = transport_exact_pwc(prof, 0.4, CharParams(c, a))
                oracle_mass = max(oracle_mass, abs(pwc_mass(img) - pwc_mass(prof)))
    return [
        check_le("transport_mass_conservation", "balance law of the linear transport",
                 mass_err, 1e-12),
        check_le("transport_exact_oracle_mass", "balance law of the linear transport",
                 oracle_mass, 1e-12),
        check_le("transport_lp_bound", "well-posedness in L1_xi Lp_x", lp_excess, 1e-10,
                 "max of ||T f||_p - M_k ||f||_p over p in {1, 2, inf}"),
    ]


def bgk_checks(rng: np.random.Generator, settings: SuiteSettings,
               use_jacobian: bool) -> list[Check]:
    vel = build_velocity("burgers")
    g = settings.grid()
    cfg = settings.bgk()
    checks: list[Check] = []
    tol = None
    for kl, kr in COEFFICIENTS:
        c = Coefficient(kl, kr)
        tag = f"k=({kl:g},{kr:g})"
        # constant equilibria
        steady = 0.0
        for val in (0.0, 0.3, 0.5, 1.0):
            tr = bgk_run(MacroField(np.full(g.n_x, val), g), cfg, c, vel, strict=False,
                         use_jacobian=use_jacobian)
            steady = max(steady, float(np.abs(tr.f[-1] - chi(val, g)).max()))
        checks.append(check_le(f"constant_equilibria_steady[{tag}]",
                               "constant equilibria are steady", steady, 1e-12))
        # invariant region, mass balance, defect on Riemann data
        excursion, mass_bal, dmin, dmass_excess = 0.0, 0.0, np.inf, -np.inf
        for ul, ur in RIEMANN_DATA:
            u0 = MacroField.riemann(ul, ur, g)
            tr = bgk_run(u0, cfg, c, vel, strict=False, use_jacobian=use_jacobian)
            tol = 10 * (g.dx + tr.dt)
            excursion = max(excursion, -tr.f_min, tr.f_max - 1, -tr.u_min, tr.u_max - 1)
            inflow = (kl * kinetic_flux(ul, g, vel) - kr * kinetic_flux(ur, g, vel)) * cfg.t_final
            mass_bal = max(mass_bal, abs(g.dx * (tr.u[-1].sum() - tr.u[0].sum()) - inflow))
            m = defect_measure(tr, check=False)
            dmin = min(dmin, m.min_value)
            dmass_excess = max(dmass_excess, defect_mass(m) - u0.l1() - tol)
        checks += [
            check_le(f"invariant_region[{tag}]", "invariant region 0 <= f <= 1",
                     max(excursion, 0.0), 1e-12),
            check_le(f"bgk_mass_balance[{tag}]", "conservation up to boundary flux",
                     mass_bal, 1e-9),
            check_ge(f"defect_nonnegative[{tag}]", "nonnegative collision defect",
                     dmin, -NONNEG_TOL),
            check_le(f"defect_mass_bound[{tag}]", "uniform defect-mass estimate",
                     dmass_excess, 0.0, "defect mass - ||u0||_1 - 10 (dx + dt)"),
        ]
        # random pairs: positive-part contraction, comparison, averaged L1 comparison
        contr, strict_contr, order, cmp_excess = -np.inf, -np.inf, -np.inf, -np.inf
        M = max(abs(kl), abs(kr)) * vel.max_speed
        R = 0.5
        for _ in range(N_PAIRS):
            window = np.abs(g.x) < 0.8
            u0, v0 = _random_steps(rng, g) * window, _random_steps(rng, g) * window
            w0 = np.minimum(1.0, u0 + rng.uniform(0, 0.5) * (u0 < 1))  # w0 >= u0
            tu = bgk_run(MacroField(u0, g), cfg, c, vel, strict=False, use_jacobian=use_jacobian)
            tv = bgk_run(MacroField(v0, g), cfg, c, vel, strict=False, use_jacobian=use_jacobian)
            tw = bgk_run(MacroField(w0, g), cfg, c, vel, strict=False, use_jacobian=use_jacobian)
            tol = 10 * (g.dx + tu.dt)
            lhs = g.dx * g.dxi * np.maximum(tu.f[-1] - tv.f[-1], 0).sum()
            rhs = g.dx * g.dxi * np.maximum(tu.f[0] - tv.f[0], 0).sum()
            contr = max(contr, float(lhs - c.M_k * rhs - tol))
            strict_contr = max(strict_contr, float(lhs - rhs))
            order = max(order, float((tu.u - tw.u).max() - tol))
            l, r = compare_plus(tu, tv, R, M)
            cmp_excess = max(cmp_excess, l - r - 10 * (g.dx + tu.dt + cfg.eps))
        checks += [
            check_le(f"positive_part_contraction[{tag}]", "contraction of positive parts",
                     contr, 0.0, "max over pairs of lhs - M_k rhs - 10 (dx + dt)"),
            check_le(f"positive_part_contraction_unit_factor[{tag}]",
                     "contraction of positive parts", strict_contr, 1e-12,
                     "compactly supported pairs: max of lhs - rhs"),
            check_le(f"comparison_ordered[{tag}]", "comparison principle",
                     order, 0.0, "max over pairs of max(u - w) - 10 (dx + dt)"),
            check_le(f"averaged_l1_comparison[{tag}]", "time-averaged L1 comparison",
                     cmp_excess, 0.0, "max over pairs of lhs - rhs - 10 (dx + dt + eps)"),
        ]
    return checks


def collision_checks(rng: np.random.Generator) -> list[Check]:
    g = Grid(-1, 1, 8, 16)
    moment_err, dissip = 0.0, -np.inf
    for _ in range(N_PAIRS):
        f = KineticDensity(rng.uniform(0, 1, (g.n_x, g.n_xi)), g)
        h = KineticDensity(rng.uniform(0, 1, (g.n_x, g.n_xi)), g)
        out = relax_step(f, rng.uniform(0.01, 2.0), 1.0)
        moment_err = max(moment_err, float(np.abs(out.moments() - f.moments()).max()))
        qf = chi(f.moments(), g) - f.values
        qh = chi(h.moments(), g) - h.values
        s = g.dxi * ((f.values > h.values) * (qf - qh)).sum(axis=1)
        dissip = max(dissip, float(s.max()))
    return [
        check_le("relaxation_preserves_moment", "collision conserves u", moment_err, 1e-14),
        check_le("collision_dissipation", "monotonicity of the collision operator",
                 dissip, 1e-12),
    ]


def model_checks(rng: np.random.Generator) -> list[Check]:
    worst_id, worst_mono, worst_l1 = 0.0, 0.0, 0.0
    for n_xi in (1, 2, 7, 16, 64):
        g = Grid(-1, 1, 2, n_xi)
        u = rng.uniform(0, 1, 200)
        v = rng.uniform(0, 1, 200)
        cu, cv = chi(u, g), chi(v, g)
        worst_id = max(worst_id, float(np.abs(g.dxi * cu.sum(axis=1) - u).max()))
        lo, hi = np.minimum(u, v), np.maximum(u, v)
        worst_mono = max(worst_mono, float((chi(lo, g) - chi(hi, g)).max()))
        worst_l1 = max(worst_l1, float(np.abs(g.dxi * np.abs(cu - cv).sum(axis=1)
                                              - np.abs(u - v)).max()))
    vel = build_velocity("burgers")
    scan = np.linspace(0, 1, 1001)
    return [
        check_le("moment_of_chi_identity", "equilibrium function", worst_id, 1e-14),
        check_le("chi_monotone", "equilibrium function", worst_mono, 0.0),
        check_le("chi_l1_identity", "L1 identity for equilibria", worst_l1, 1e-14),
        check_ge("flux_nonnegative", "A >= 0 on [0, 1]", float(vel.A(scan).min()),
                 -vel.quadrature_tol),
    ]


def reference_checks(rng: np.random.Generator) -> list[Check]:
    vel = build_velocity("burgers")
    s = np.linspace(0, 1, 21)
    ul, ur = np.meshgrid(s, s, indexing="ij")
    cons, mono = 0.0, -np.inf
    for k in (-2.0, -1.0, -0.5, 0.5, 1.0, 2.0):
        cons = max(cons, float(np.abs(eo_flux(k, s, s, vel) - k * vel.A(s)).max()))
        F = eo_flux(k, ul, ur, vel)
        # nondecreasing in u_l, nonincreasing in u_r
        mono = max(mono, float(-np.diff(F, axis=0).min()), float(np.diff(F, axis=1).max()))
    g = Grid(-1.5, 1.5, 96, 4)
    fv_contr, fv_mass = -np.inf, 0.0
    for _ in range(N_PAIRS // 2):
        kl, kr = COEFFICIENTS[rng.integers(len(COEFFICIENTS))]
        c = Coefficient(kl, kr)
        u0 = _random_steps(rng, g)
        w0 = np.minimum(1.0, u0 + rng.uniform(0, 0.4))
        tu = fv_run(MacroField(u0, g), FvConfig(), c, vel, 0.25, n_snapshots=4)
        tw = fv_run(MacroField(w0, g), FvConfig(), c, vel, 0.25, n_snapshots=4)
        d0 = g.dx * np.abs(w0 - u0).sum()
        # ordered data: the L1 distance changes only through the boundary fluxes
        budget = d0 - (tw.boundary_outflow[-1] - tu.boundary_outflow[-1])
        fv_contr = max(fv_contr, float(g.dx * np.abs(tw.u[-1] - tu.u[-1]).sum() - budget))
        mass_change = g.dx * (tu.u[-1].sum() - tu.u[0].sum())
        fv_mass = max(fv_mass, abs(mass_change + tu.boundary_outflow[-1]))
    rh, selfsim = 0.0, 0.0
    for _ in range(N_PAIRS):
        a, b = np.sort(rng.uniform(0, 1, 2))
        k = float(rng.uniform(0.5, 2))
        sp = shock_speed(a, b, k, vel)
        rh = max(rh, abs(sp * (b - a) - k * (vel.A(b) - vel.A(a))))
        s_pts = rng.uniform(-2, 2, 50)
        t1, t2 = rng.uniform(0.1, 2, 2)
        for l, r in ((a, b), (b, a)):
            v1 = riemann_profile(l, r, k, vel, s_pts * t1, t1)
            v2 = riemann_profile(l, r, k, vel, s_pts * t2, t2)
            selfsim = max(selfsim, float(np.abs(v1 - v2).max()))
    return [
        check_le("eo_flux_consistency", "monotone approximation", cons, 1e-14),
        check_le("eo_flux_monotone", "monotone approximation", mono, 1e-14),
        check_le("fv_l1_contraction", "monotone approximation", fv_contr, 1e-12),
        check_le("fv_conservation", "monotone approximation", fv_mass, 1e-12),
        check_le("riemann_rankine_hugoniot", "exact Riemann solution", rh, 1e-14),
        check_le("riemann_self_similar", "exact Riemann solution", selfsim, 1e-14),
    ]


def verify_suite(seed: int = 0, use_jacobian: bool = True,
                 settings: SuiteSettings | None = None) -> list[Check]:
    """Run every invariant check; ``use_jacobian=False`` is the mutation canary."""
    settings = settings or SuiteSettings()
    rng = np.random.default_rng(seed)
    checks = []
    checks += model_checks(rng)
    checks += characteristic_checks(rng)
    checks += transport_checks(rng, settings, use_jacobian)
    checks += collision_checks(rng)
    checks += bgk_checks(rng, settings, use_jacobian)
    checks += reference_checks(rng)
    return checks
