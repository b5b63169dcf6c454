"""Entropy-structure diagnostics of BGK trajectories.

* the collision defect ``m(xi) = (1/eps) int_0^xi (chi_u - f)`` and its
  total mass,
* the interface atom that turns ``m`` into the measures ``m_+`` / ``m_-``
  of the kinetic formulation with discontinuous coefficient,
* residuals of that kinetic formulation against a fixed family of
  separable test functions,
* the time-averaged L1 comparison quantity between two solutions.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Literal, Sequence

import numpy as np
from numpy.polynomial import Polynomial, legendre

from .model import Coefficient, Grid, VelocityModel, chi

Sign = Literal["plus", "minus"]
NONNEG_TOL = 1e-9


class DefectIntegrityError(RuntimeError):
    """The defect measure is negative beyond tolerance."""


class DomainTooSmall(ValueError):
    pass


# ---------------------------------------------------------------------------
# defect measure
# ---------------------------------------------------------------------------

@dataclass(eq=False)
class DefectMeasure:
    """Defect density sampled on xi-faces.

    ``cumulative[k, i, j]`` is ``m`` at snapshot k, x-cell i, xi-face j.
    ``interval[k]`` (when available) is its exact time integral over
    ``(times[k-1], times[k]]`` taken from the collision sub-steps.
    """

    cumulative: np.ndarray
    eps: float
    times: np.ndarray
    grid: Grid
    interval: np.ndarray | None = None

    @property
    def min_value(self) -> float:
        vals = [self.cumulative.min()]
        if self.interval is not None:
            vals.append(self.interval.min())
        return float(min(vals))

    @property
    def boundary_max(self) -> float:
        """Largest |m| at xi=0 and xi=1."""
        c = self.cumulative
        return float(max(np.abs(c[..., 0]).max(), np.abs(c[..., -1]).max()))


def _cumulate(q: np.ndarray, dxi: float) -> np.ndarray:
    zeros = np.zeros(q.shape[:-1] + (1,))
    return np.concatenate([zeros, np.cumsum(q, axis=-1) * dxi], axis=-1)


def defect_measure(traj, eps: float | None = None, check: bool = True) -> DefectMeasure:
    """Defect measure of a BGK trajectory.

    Raises
    ------
    DefectIntegrityError
        If ``check`` and the measure drops below -1e-9 anywhere.
    """
    eps = traj.cfg.eps if eps is None else eps
    g = traj.grid
    q = (chi(traj.u, g) - traj.f) / eps
    m = DefectMeasure(_cumulate(q, g.dxi), eps, traj.times, g,
                      _cumulate(traj.collision, g.dxi))
    if check and m.min_value < -NONNEG_TOL:
        raise DefectIntegrityError(
            f"defect measure reaches {m.min_value:.3e} < -{NONNEG_TOL:g} "
            f"(k_left={traj.coeff.k_left}, k_right={traj.coeff.k_right})")
    return m


def defect_mass(m: DefectMeasure) -> float:
    """Total mass ``int_0^T int int m dxi dx dt``.

    Uses the exact per-interval time integrals when present, otherwise the
    trapezoid rule over snapshots.  In xi, m is piecewise linear between
    faces, so the trapezoid rule on faces is exact.
    """
    g = m.grid

    def xi_int(c):
        return g.dxi * (c[..., 1:-1].sum(axis=-1) + 0.5 * (c[..., 0] + c[..., -1]))

    if m.interval is not None:
        return g.dx * float(xi_int(m.interval).sum())
    per_t = g.dx * xi_int(m.cumulative).sum(axis=-1)
    return float(np.trapezoid(per_t, m.times))


# ---------------------------------------------------------------------------
# interface correction
# ---------------------------------------------------------------------------

@dataclass(eq=False)
class InterfaceAtom:
    """A measure ``m + G(xi) dt delta(x=0)``; G stored as ``c A(xi) + d`` on [0, 1]."""

    base: DefectMeasure
    sign: Sign
    coeff_A: float
    offset: float
    profile: np.ndarray  # G on the xi-faces
    convention: str
    nonnegative: bool

    def G(self, xi):
        xi = np.asarray(xi, dtype=float)
        inside = (xi >= 0) & (xi <= 1)
        return np.where(inside, self.coeff_A * self._A(xi) + self.offset, 0.0)

    _A: Callable = None  # set by interface_correction


def interface_correction(m: DefectMeasure, coeff: Coefficient, vel: VelocityModel,
                         sign: Sign, convention: str = "display") -> InterfaceAtom:
    """Add the interface atom that converts ``m`` into ``m_+`` or ``m_-``.

    With the velocity truncated to [0, 1], the integrand
    ``a [(kL-kR)^+ sgn_+ - (kL-kR)^- sgn_-]`` reduces to ``(kL-kR)^+ a``.

    ``convention="display"`` integrates it from xi to +infinity for the plus
    case and from -infinity to xi for the minus case, giving
    ``(kL-kR)^+ (A(1) - A(xi))`` and ``(kL-kR)^+ A(xi)``.  ``"weak"`` uses
    the profile whose xi-derivative equals the integrand in both cases
    (the one the weak formulation pairs against), i.e. ``(kL-kR)^+ (A(xi) - A(1))``
    for plus.  Negative profiles are flagged through ``nonnegative``, not
    rejected.
    """
    if sign not in ("plus", "minus"):
        raise ValueError(f"sign must be 'plus' or 'minus', got {sign!r}")
    if convention not in ("display", "weak"):
        raise ValueError(f"unknown convention {convention!r}")
    jump = max(coeff.k_left - coeff.k_right, 0.0)
    A1 = float(vel.A(1.0))
    if sign == "minus":
        c, d = jump, 0.0
    elif convention == "display":
        c, d = -jump, jump * A1
    else:
        c, d = jump, -jump * A1
    faces = m.grid.xi_faces
    profile = c * vel.A(faces) + d
    atom = InterfaceAtom(m, sign, c, d, profile, convention,
                         bool(profile.min() >= -vel.quadrature_tol))
    atom._A = vel.A
    return atom


# ---------------------------------------------------------------------------
# test functions
# ---------------------------------------------------------------------------

_GL_NODES, _GL_WEIGHTS = legendre.leggauss(6)
_GL8_NODES, _GL8_WEIGHTS = legendre.leggauss(8)
_GL9_NODES, _GL9_WEIGHTS = legendre.leggauss(9)


class Profile1D:
    """A compactly supported smooth function of one variable."""

    support: tuple[float, float]

    def __call__(self, s):
        raise NotImplementedError

    def deriv(self, s):
        raise NotImplementedError

    @property
    def kinks(self) -> tuple[float, ...]:
        """Points where the profile is not smooth."""
        return tuple(self.support)

    def integral(self, lo, hi):
        """Vectorised integral over [lo, hi] (composite Gauss, 6 nodes)."""
        lo = np.asarray(lo, dtype=float)
        hi = np.asarray(hi, dtype=float)
        half = 0.5 * (hi - lo)
        mid = 0.5 * (hi + lo)
        pts = mid[..., None] + half[..., None] * _GL_NODES
        return half * (self(pts) * _GL_WEIGHTS).sum(axis=-1)


class Bump(Profile1D):
    """``(1 - ((s - c)/r)^2)^4`` on ``|s - c| < r``; integrals are exact."""

    _p = Polynomial([1.0, 0.0, -1.0]) ** 4
    _dp = _p.deriv()
    _ip = _p.integ(lbnd=-1.0)

    def __init__(self, center: float, radius: float):
        self.center, self.radius = float(center), float(radius)
        self.support = (center - radius, center + radius)

    def _y(self, s):
        return (np.asarray(s, dtype=float) - self.center) / self.radius

    def __call__(self, s):
        y = self._y(s)
        return np.where(np.abs(y) < 1, self._p(y), 0.0)

    def deriv(self, s):
        y = self._y(s)
        return np.where(np.abs(y) < 1, self._dp(y) / self.radius, 0.0)

    def primitive(self, s):
        return self.radius * self._ip(np.clip(self._y(s), -1.0, 1.0))

    def integral(self, lo, hi):
        return self.primitive(hi) - self.primitive(lo)

    def __repr__(self):
        return f"Bump({self.center:g}, {self.radius:g})"


_rho = Polynomial([0, 0, 0, 1.0]) * Polynomial([1.0, -1.0]) ** 3 * 140.0
_W = _rho.integ(lbnd=0.0)


def cutoff(s, eta: float):
    """``omega_eta(s) = int_0^|s| rho_eta``: 0 at s=0, 1 for |s| >= eta.

    ``rho(r) = 140 r^3 (1 - r)^3`` on (0, 1) has unit mass.
    """
    r = np.clip(np.abs(np.asarray(s, dtype=float)) / eta, 0.0, 1.0)
    return _W(r)


def cutoff_deriv(s, eta: float):
    s = np.asarray(s, dtype=float)
    r = np.abs(s) / eta
    return np.where(r < 1, np.sign(s) * _rho(np.clip(r, 0, 1)) / eta, 0.0)


class CutProfile(Profile1D):
    """``base(s) * omega_eta(s)``: the base profile cut off near s=0."""

    def __init__(self, base: Profile1D, eta: float):
        self.base, self.eta = base, float(eta)
        self.support = base.support

    def __call__(self, s):
        return self.base(s) * cutoff(s, self.eta)

    def deriv(self, s):
        return self.base.deriv(s) * cutoff(s, self.eta) + self.base(s) * cutoff_deriv(s, self.eta)

    def integral(self, lo, hi):
        # split at the kinks of the product; each piece is a polynomial of
        # degree <= 15, integrated exactly by 8-point Gauss
        lo = np.asarray(lo, dtype=float)
        hi = np.asarray(hi, dtype=float)
        kinks = np.array(self.kinks)
        edges = np.concatenate([lo[..., None], np.clip(kinks, lo[..., None], hi[..., None]),
                                hi[..., None]], axis=-1)
        a, b = edges[..., :-1], edges[..., 1:]
        half, mid = 0.5 * (b - a), 0.5 * (b + a)
        pts = mid[..., None] + half[..., None] * _GL8_NODES
        return (half * (self(pts) * _GL8_WEIGHTS).sum(axis=-1)).sum(axis=-1)

    @property
    def kinks(self) -> tuple[float, ...]:
        return tuple(sorted({-self.eta, 0.0, self.eta, *self.base.kinks}))

    def __repr__(self):
        return f"Cut({self.base!r}, eta={self.eta:g})"


@dataclass(frozen=True)
class TestFunction:
    """Separable test function ``theta(t) phi(x) mu(xi)``."""

    __test__ = False  # not a pytest class

    test_id: str
    theta: Profile1D
    phi: Profile1D
    mu: Profile1D


@dataclass(frozen=True)
class TestFunctionFamily:
    __test__ = False

    members: tuple[TestFunction, ...]
    version: str = "v1"

    def __iter__(self):
        return iter(self.members)

    def __len__(self):
        return len(self.members)

    @classmethod
    def standard(cls, T: float, dx: float, length: float = 1.0) -> "TestFunctionFamily":
        """The versioned family: 3 time x 2 space x 2 xi bumps, plus cut variants.

        Space profiles: one straddling x=0 and one supported in x<0.  The
        second xi profile reaches below xi=0, which exercises the
        closed-form terms of the truncated xi domain.  Cut variants multiply
        the first member by ``omega_eta`` in t or in x, for eta in
        {dx, 4 dx}.
        """
        thetas = {"t0": Bump(0.0, T), "t1": Bump(0.4 * T, 0.3 * T),
                  "t2": Bump(0.7 * T, 0.25 * T)}
        phis = {"xs": Bump(0.0, 0.75 * length), "xl": Bump(-length, 0.5 * length)}
        mus = {"m0": Bump(0.5, 0.45), "m1": Bump(0.35, 0.6)}
        members = [TestFunction(f"{ti}-{xi_}-{mi}", th, ph, mu)
                   for ti, th in thetas.items()
                   for xi_, ph in phis.items()
                   for mi, mu in mus.items()]
        base = members[0]
        for tag, eta in (("1dx", dx), ("4dx", 4 * dx)):
            members.append(TestFunction(f"{base.test_id}-cutt-{tag}",
                                        CutProfile(base.theta, eta), base.phi, base.mu))
            members.append(TestFunction(f"{base.test_id}-cutx-{tag}",
                                        base.theta, CutProfile(base.phi, eta), base.mu))
        return cls(tuple(members))


# ---------------------------------------------------------------------------
# kinetic residual
# ---------------------------------------------------------------------------

class _XiTables:
    """Primitives of mu and a*mu in xi, tabulated finely on [0, 1]."""

    def __init__(self, mu: Profile1D, vel: VelocityModel, n: int = 4096):
        s = np.linspace(0.0, 1.0, n + 1)
        self.s = s
        self.mu_tab = np.concatenate([[0.0], np.cumsum(mu.integral(s[:-1], s[1:]))])
        lo, hi = s[:-1], s[1:]
        half, mid = 0.5 * (hi - lo), 0.5 * (hi + lo)
        pts = mid[:, None] + half[:, None] * _GL_NODES
        panel = half * (vel.a(pts) * mu(pts) * _GL_WEIGHTS).sum(axis=1)
        self.amu_tab = np.concatenate([[0.0], np.cumsum(panel)])
        self.mu = mu
        self.below = mu.integral(min(mu.support[0], 0.0), 0.0)
        self.total = mu.integral(*mu.support)
        self.amu_total = self.amu_tab[-1]

    def int_mu(self, u):
        """``int_0^u mu``; u above 1 continues with mu itself."""
        u = np.asarray(u, dtype=float)
        inside = np.interp(np.clip(u, 0.0, 1.0), self.s, self.mu_tab)
        extra = np.where(u > 1, self.mu.integral(np.ones_like(u), np.maximum(u, 1.0)), 0.0)
        return inside + extra

    def int_amu(self, u):
        return np.interp(np.clip(u, 0.0, 1.0), self.s, self.amu_tab)


def _hat_weights(fn: Callable, times: np.ndarray, kinks=()) -> np.ndarray:
    """``int fn(t) hat_k(t) dt`` for the piecewise-linear hat basis on ``times``.

    Pairing a snapshot sequence with these weights integrates ``fn`` against
    its linear-in-time interpolant, which stays accurate when ``fn`` varies
    on scales shorter than the snapshot spacing.  Splitting at ``kinks``
    (where ``fn`` is not smooth) makes the rule exact for the polynomial
    pieces of the test profiles.
    """
    inner = [k for k in kinks if times[0] < k < times[-1]]
    pts = np.union1d(times, inner)
    owner = np.clip(np.searchsorted(times, pts[:-1], side="right") - 1, 0, len(times) - 2)
    lo, hi = pts[:-1], pts[1:]
    t = (0.5 * (lo + hi))[:, None] + (0.5 * (hi - lo))[:, None] * _GL9_NODES
    w = (0.5 * (hi - lo))[:, None] * _GL9_WEIGHTS * fn(t)
    t0 = times[owner][:, None]
    frac = (t - t0) / (times[owner + 1] - times[owner])[:, None]
    out = np.zeros(len(times))
    np.add.at(out, owner, (w * (1.0 - frac)).sum(axis=1))
    np.add.at(out, owner + 1, (w * frac).sum(axis=1))
    return out


def _pairing_m(mu: Profile1D, cum: np.ndarray, grid: Grid) -> np.ndarray:
    """``int mu'(xi) m(xi) dxi`` for m piecewise linear between xi-faces."""
    faces = grid.xi_faces
    mu_f = mu(faces)
    cell = mu.integral(faces[:-1], faces[1:])
    slopes = np.diff(cum, axis=-1) / grid.dxi
    return mu_f[-1] * cum[..., -1] - mu_f[0] * cum[..., 0] - (slopes * cell).sum(axis=-1)


def kinetic_residual(traj, m_pm: InterfaceAtom, tests: TestFunctionFamily | Sequence[TestFunction],
                     sign: Sign, u0=None) -> list[float]:
    """Residual of the kinetic formulation for each test function.

    Evaluates ``interior + initial - interface - <dm_sign, d_xi psi>``
    where the interior term pairs ``h = sgn_sign(u - xi)`` with
    ``d_t psi + k a d_x psi``.  The parts of ``h`` that do not depend on u
    (coming from xi outside [0, 1]) are integrated in closed form.  Time
    integrals pair theta and theta' with the linear-in-time interpolant of
    the snapshots (the defect uses its
    exact interval integrals when present); x-integrals treat u as constant
    per cell, so flux terms use exact face differences of ``phi``.
    """
    if sign not in ("plus", "minus"):
        raise ValueError(f"sign must be 'plus' or 'minus', got {sign!r}")
    g = traj.grid
    coeff, vel = traj.coeff, traj.vel
    times, U = traj.times, traj.u
    u0 = U[0] if u0 is None else np.asarray(u0, dtype=float)
    T = float(times[-1])
    kx = coeff(g.x)
    jump = coeff.k_left - coeff.k_right
    jump_sign = max(jump, 0.0) if sign == "plus" else max(-jump, 0.0)
    m = m_pm.base

    out = []
    for tf in tests:
        tab = _XiTables(tf.mu, vel)
        w_th = _hat_weights(tf.theta, times, tf.theta.kinks)
        w_dth = _hat_weights(tf.theta.deriv, times, tf.theta.kinks)
        Theta = float(tf.theta.integral(0.0, T))
        Phi = tf.phi.integral(g.x_faces[:-1], g.x_faces[1:])
        dPhi = np.diff(tf.phi(g.x_faces))
        phi0 = float(tf.phi(0.0))

        Hu = tab.int_mu(U)                   # (n_t, n_x)
        Hau = tab.int_amu(U)
        interior = float(w_dth @ (Hu @ Phi) + w_th @ (Hau @ (kx * dPhi)))
        initial = float(tf.theta(0.0)) * float(tab.int_mu(u0) @ Phi)
        # u-independent parts: the t-derivative and initial pieces cancel
        # exactly since theta(T) = 0; the flux piece survives for minus
        if sign == "minus":
            interior += -tab.amu_total * Theta * jump * phi0

        interface = jump_sign * Theta * phi0 * tab.amu_total

        if m.interval is not None:
            # increments weighted by the interval mean of theta
            pair = _pairing_m(tf.mu, m.interval[1:], g) @ Phi
            mean_th = tf.theta.integral(times[:-1], times[1:]) / np.diff(times)
            m_term = float(mean_th @ pair)
        else:
            pair = _pairing_m(tf.mu, m.cumulative, g) @ Phi
            m_term = float(w_th @ pair)
        # atom: G = c A + d on [0, 1]
        mu0, mu1 = float(tf.mu(0.0)), float(tf.mu(1.0))
        A0, A1 = float(vel.A(0.0)), float(vel.A(1.0))
        int_dmu_A = mu1 * A1 - mu0 * A0 - tab.amu_total
        atom = Theta * phi0 * (m_pm.coeff_A * int_dmu_A + m_pm.offset * (mu1 - mu0))

        out.append(interior + initial - interface - m_term - atom)
    return out


# ---------------------------------------------------------------------------
# comparison
# ---------------------------------------------------------------------------

def compare_plus(u_traj, v_traj, R: float, M: float, T: float | None = None,
                 margin: float | None = None) -> tuple[float, float]:
    """Both sides of the time-averaged L1 comparison inequality.

    ``lhs = (1/T) int_0^T int_{|x|<R} (u - v)^+``,
    ``rhs = int_{|x|<R+MT} (u0 - v0)^+``.
    """
    g = u_traj.grid
    if not np.allclose(u_traj.times, v_traj.times):
        raise ValueError("trajectories must share snapshot times")
    T = float(u_traj.times[-1]) if T is None else T
    margin = 4 * g.dx if margin is None else margin
    reach = R + M * T
    if reach > g.x_max - margin or -reach < g.x_min + margin:
        raise DomainTooSmall(f"R + M T = {reach:.4g} exceeds the domain "
                             f"[{g.x_min:.4g}, {g.x_max:.4g}] minus margin {margin:.3g}")
    inner = np.abs(g.x) < R
    diff = np.maximum(u_traj.u - v_traj.u, 0.0)[:, inner].sum(axis=1) * g.dx
    lhs = float(np.trapezoid(diff, u_traj.times)) / T
    outer = np.abs(g.x) < reach
    rhs = g.dx * float(np.maximum(u_traj.u[0] - v_traj.u[0], 0.0)[outer].sum())
    return lhs, rhs


# ---------------------------------------------------------------------------
# reports
# ---------------------------------------------------------------------------

def write_residuals_csv(path, rows: Sequence[tuple[str, str, float]]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["test_id", "sign", "residual"])
        for test_id, sign, r in rows:
            w.writerow([test_id, sign, repr(float(r))])


def write_defect_csv(path, m: DefectMeasure) -> None:
    """Snapshot-wise defect totals: t, x, mass of m over xi."""
    g = m.grid
    c = m.cumulative
    per = g.dxi * (c[..., 1:-1].sum(axis=-1) + 0.5 * (c[..., 0] + c[..., -1]))
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "x", "m_xi_integral", "m_min"])
        for k, t in enumerate(m.times):
            for i, x in enumerate(g.x):
                w.writerow([repr(float(t)), repr(float(x)), repr(float(per[k, i])),
                            repr(float(c[k, i].min()))])
