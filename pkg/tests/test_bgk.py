import numpy as np
import pytest
from scipy.integrate import solve_ivp

from bgkflux.bgk import (BgkConfig, InvariantViolation, NonContraction, bgk_run, bgk_step,
                         equilibrium_distance, picard_solve, relax_step)
from bgkflux.model import Coefficient, Grid, KineticDensity, MacroField, build_velocity, chi

VEL = build_velocity("burgers")


def _grid(n_x=64, n_xi=8, half=2.0):
    return Grid(-half, half, n_x, n_xi)


def test_config_validation():
    with pytest.raises(ValueError):
        BgkConfig(eps=0.0)
    with pytest.raises(ValueError):
        BgkConfig(eps=0.1, splitting="rk4")
    with pytest.raises(ValueError):
        BgkConfig(eps=0.1, dt=2.0, t_final=1.0)


def test_step_size_divides_horizon_and_respects_cone():
    g = _grid(100)
    cfg = BgkConfig(eps=1.0, t_final=0.3)
    dt = cfg.step_size(g, Coefficient(1, 2), VEL)
    assert dt * 2 * VEL.max_speed <= g.dx + 1e-15
    assert abs(round(0.3 / dt) * dt - 0.3) < 1e-12


def test_relax_step_matches_ode_solver():
    g = _grid(6, 5)
    rng = np.random.default_rng(2)
    f = KineticDensity(rng.uniform(0, 1, (g.n_x, g.n_xi)), g)
    eq = chi(f.moments(), g)
    eps, dt = 0.3, 0.7

    # chi(u) is constant along the flow because u is invariant
    sol = solve_ivp(lambda t, y: (eq.ravel() - y) / eps, (0, dt), f.values.ravel(),
                    rtol=1e-11, atol=1e-13)
    out = relax_step(f, dt, eps)
    np.testing.assert_allclose(out.values.ravel(), sol.y[:, -1], atol=1e-9)
    np.testing.assert_allclose(out.moments(), f.moments(), atol=1e-14)


def test_relax_step_small_ratio_is_accurate():
    g = _grid(2, 4)
    f = KineticDensity(np.full((2, 4), 0.25), g)
    out = relax_step(f, 1e-12, 1.0)
    expected = f.values + 1e-12 * (chi(f.moments(), g) - f.values)
    np.testing.assert_allclose(out.values, expected, rtol=0, atol=1e-24)


def test_constant_equilibria_are_steady_for_constant_coefficient():
    g = _grid()
    for c in (0.0, 0.3, 1.0):
        cfg = BgkConfig(eps=0.05, t_final=0.5, n_snapshots=4)
        traj = bgk_run(MacroField(np.full(g.n_x, c), g), cfg, Coefficient(1.5, 1.5), VEL)
        np.testing.assert_allclose(traj.f[-1], chi(np.full(g.n_x, c), g), atol=1e-13)


def test_constant_state_moves_when_coefficient_jumps():
    # the rescaling J in the interface fan makes constants non-stationary
    g = _grid()
    u0 = MacroField(np.full(g.n_x, 0.5), g)
    traj = bgk_run(u0, BgkConfig(eps=0.05, t_final=0.5, n_snapshots=4), Coefficient(1, 2),
                   VEL, strict=False)
    assert np.abs(traj.u[-1] - 0.5).max() > 0.05


def test_strict_mode_raises_on_overshoot():
    g = _grid()
    u0 = MacroField(np.full(g.n_x, 0.9), g)
    cfg = BgkConfig(eps=0.05, t_final=0.5, n_snapshots=4)
    with pytest.raises(InvariantViolation, match="k_left=2"):
        bgk_run(u0, cfg, Coefficient(2, 1), VEL)
    traj = bgk_run(u0, cfg, Coefficient(2, 1), VEL, strict=False)
    assert traj.violations and traj.f_max > 1 + 1e-3 and not traj.invariant_region_ok


def test_invariant_region_and_mass_for_constant_coefficient():
    g = _grid(128, 16, 3.0)
    u0 = MacroField.riemann(1.0, 0.0, g)
    traj = bgk_run(u0, BgkConfig(eps=0.02, t_final=0.5, n_snapshots=8), Coefficient(1, 1),
                   VEL)
    assert traj.f_min >= -1e-12 and traj.f_max <= 1 + 1e-12
    # boundary fluxes are A(1) = A(0) = 0 for this datum
    np.testing.assert_allclose(traj.u.sum(axis=1) * g.dx, u0.values.sum() * g.dx, atol=1e-11)


def test_collision_increments_carry_no_mass():
    g = _grid(64, 16)
    u0 = MacroField.riemann(0.2, 0.9, g)
    traj = bgk_run(u0, BgkConfig(eps=0.03, t_final=0.3, n_snapshots=5), Coefficient(1, 1), VEL)
    assert traj.collision.shape == traj.f.shape
    np.testing.assert_allclose(traj.collision.sum(axis=2), 0.0, atol=1e-12)


def test_snapshots_bracket_horizon_and_step_matches_run():
    g = _grid(32, 8)
    u0 = MacroField.riemann(1.0, 0.0, g)
    cfg = BgkConfig(eps=0.1, t_final=0.25, dt=0.25 / 16, n_snapshots=None)
    traj = bgk_run(u0, cfg, Coefficient(1, 2), VEL, strict=False)
    assert traj.times[0] == 0 and traj.times[-1] == pytest.approx(0.25)
    assert len(traj.times) == 17
    f = KineticDensity(chi(u0.values, g), g)
    for _ in range(16):
        f = bgk_step(f, cfg, Coefficient(1, 2), VEL)
    np.testing.assert_allclose(f.values, traj.f[-1], atol=1e-13)


def test_l1_contraction_for_constant_coefficient():
    g = _grid(128, 16)
    rng = np.random.default_rng(5)
    mask = np.abs(g.x) < 0.8
    u = MacroField(rng.uniform(0, 1, g.n_x) * mask, g)
    v = MacroField(rng.uniform(0, 1, g.n_x) * mask, g)
    cfg = BgkConfig(eps=0.05, t_final=0.4, n_snapshots=8)
    tu = bgk_run(u, cfg, Coefficient(1, 1), VEL)
    tv = bgk_run(v, cfg, Coefficient(1, 1), VEL)
    d = np.abs(tu.f - tv.f).sum(axis=(1, 2))
    assert np.all(np.diff(d) <= 1e-11)


def test_lie_and_strang_agree_to_first_order():
    g = _grid(64, 8)
    # equilibrium Riemann data stays in equilibrium under free transport, so start off it
    u0 = MacroField.riemann(1.0, 0.0, g)
    f0 = KineticDensity(np.where(np.abs(g.x) < 1, 0.5, 0.0)[:, None] * np.ones(g.n_xi), g)
    kw = dict(eps=0.05, t_final=0.25, n_snapshots=1)
    diffs = []
    for n in (32, 64, 128):
        a = bgk_run(u0, BgkConfig(splitting="lie", dt=0.25 / n, **kw), Coefficient(1, 1), VEL,
                    f0=f0)
        b = bgk_run(u0, BgkConfig(splitting="strang", dt=0.25 / n, **kw), Coefficient(1, 1),
                    VEL, f0=f0)
        diffs.append(g.dx * np.abs(a.u[-1] - b.u[-1]).sum())
    assert diffs[2] < diffs[1] < diffs[0]
    assert diffs[0] > 1e-6


def test_small_eps_drives_towards_equilibrium():
    g = _grid(128, 16)
    u0 = MacroField.riemann(1.0, 0.0, g)
    f0 = KineticDensity(np.full((g.n_x, g.n_xi), 0.5), g)
    dists = []
    for eps in (0.1, 0.01):
        traj = bgk_run(u0, BgkConfig(eps=eps, t_final=0.5, n_snapshots=2), Coefficient(1, 1),
                       VEL, f0=f0)
        dists.append(equilibrium_distance(traj.density(-1)))
    assert dists[1] < 0.3 * dists[0]
    assert equilibrium_distance(KineticDensity(chi(u0.values, g), g)) == 0.0


@pytest.mark.parametrize("coeff", [Coefficient(1, 1), Coefficient(1, 2)])
def test_picard_fixed_point_agrees_with_split_solver(coeff):
    g = Grid(-2, 2, 32, 16)
    u0 = MacroField.riemann(1.0, 0.0, g)
    res = picard_solve(u0, 1.0, 1e-10, coeff, VEL, eps=1.0, n_time=32)
    assert res.ratios and max(res.ratios) <= 1 - np.exp(-1.0)
    traj = bgk_run(u0, BgkConfig(eps=1.0, t_final=1.0, dt=1 / 256, n_snapshots=1), coeff, VEL,
                   strict=False)
    diff = g.dx * g.dxi * np.abs(res.f.values - traj.f[-1]).sum()
    assert diff <= 0.64


def test_picard_reproduces_constant_equilibrium():
    g = Grid(-1, 1, 8, 4)
    u0 = MacroField(np.full(g.n_x, 0.4), g)
    res = picard_solve(u0, 0.5, 1e-13, Coefficient(1, 1), VEL, eps=1.0, n_time=8)
    np.testing.assert_allclose(res.history, chi(np.full((9, g.n_x), 0.4), g), atol=1e-12)


def test_picard_guards():
    g = Grid(-1, 1, 8, 4)
    u0 = MacroField.riemann(1.0, 0.0, g)
    with pytest.raises(ValueError):
        picard_solve(u0, 3.0, 1e-6, Coefficient(1, 1), VEL, eps=1.0)
    with pytest.raises(NonContraction):
        picard_solve(u0, 1.0, 1e-14, Coefficient(1, 1), VEL, eps=1.0, n_time=4,
                     ratio_slack=-0.9)
