import csv

import numpy as np
import pytest
from scipy.integrate import quad

from bgkflux.bgk import BgkConfig, bgk_run
from bgkflux.kinetic_analysis import (Bump, CutProfile, DefectIntegrityError, DomainTooSmall,
                                      TestFunctionFamily, _hat_weights, compare_plus, cutoff,
                                      cutoff_deriv, defect_mass, defect_measure,
                                      interface_correction, kinetic_residual,
                                      write_defect_csv, write_residuals_csv)
from bgkflux.model import Coefficient, Grid, MacroField, build_velocity

VEL = build_velocity("burgers")


def _run(coeff, u0_fn, n_x=128, n_xi=16, eps=0.05, T=0.25, snaps=16, strict=True):
    g = Grid(-2, 2, n_x, n_xi)
    u0 = MacroField(u0_fn(g.x), g)
    return bgk_run(u0, BgkConfig(eps=eps, t_final=T, n_snapshots=snaps), coeff, VEL,
                   strict=strict)


def test_cutoff_shape():
    s = np.linspace(-1, 1, 2001)
    w = cutoff(s, 0.2)
    assert cutoff(0.0, 0.2) == 0.0
    np.testing.assert_allclose(w[np.abs(s) >= 0.2], 1.0, atol=1e-14)
    assert np.all(np.diff(w[s >= 0]) >= -1e-15)
    h = 1e-6
    fd = (cutoff(s + h, 0.2) - cutoff(s - h, 0.2)) / (2 * h)
    np.testing.assert_allclose(cutoff_deriv(s, 0.2), fd, atol=1e-6)


@pytest.mark.parametrize("prof", [Bump(0.3, 0.5), CutProfile(Bump(0.0, 0.75), 0.05),
                                  CutProfile(Bump(0.0, 1.0), 0.01)])
def test_profile_integrals_match_quadrature(prof):
    for lo, hi in ((-1.0, 1.0), (-0.2, 0.03), (0.001, 0.4)):
        ref, _ = quad(prof, lo, hi, limit=400, points=[0.0] if lo < 0 < hi else None,
                      epsabs=1e-14)
        assert abs(float(prof.integral(lo, hi)) - ref) <= 1e-10


def test_bump_support_and_derivative():
    b = Bump(0.5, 0.25)
    assert b(0.25) == 0.0 and b(0.8) == 0.0 and b(0.5) == 1.0
    s = np.linspace(0, 1, 401)
    h = 1e-6
    np.testing.assert_allclose(b.deriv(s), (b(s + h) - b(s - h)) / (2 * h), atol=1e-6)


def test_hat_weights_integrate_piecewise_linear_data_exactly():
    times = np.array([0.0, 0.1, 0.15, 0.4, 0.5])
    vals = np.array([1.0, -2.0, 0.5, 3.0, 0.0])
    fn = Bump(0.2, 0.3)
    w = _hat_weights(fn, times)
    pts = list(times[1:-1])
    ref, _ = quad(lambda t: fn(t) * np.interp(t, times, vals), 0, 0.5, points=pts,
                  epsabs=1e-14)
    assert abs(w @ vals - ref) <= 1e-10


def test_standard_family_composition():
    fam = TestFunctionFamily.standard(0.5, 0.01)
    assert len(fam) == 16 and fam.version == "v1"
    ids = [t.test_id for t in fam]
    assert len(set(ids)) == 16
    assert sum("cutx" in i for i in ids) == 2 and sum("cutt" in i for i in ids) == 2


def test_defect_nonnegative_for_constant_coefficient():
    traj = _run(Coefficient(1, 1), lambda x: np.where(x < 0, 1.0, 0.0) * (np.abs(x) < 1))
    m = defect_measure(traj)
    assert m.min_value >= -1e-12
    assert m.boundary_max <= 1e-10   # both xi-ends carry zero collision mass
    assert defect_mass(m) >= 0


def test_defect_goes_negative_when_coefficient_drops():
    traj = _run(Coefficient(2, 1), lambda x: np.full_like(x, 0.9), strict=False)
    with pytest.raises(DefectIntegrityError, match="k_left=2"):
        defect_measure(traj)
    assert defect_measure(traj, check=False).min_value < -1e-3


def test_defect_mass_interval_and_trapezoid_agree_on_fine_snapshots():
    traj = _run(Coefficient(1, 1), lambda x: np.where(x > 0, 1.0, 0.0) * (np.abs(x) < 1),
                snaps=None)
    m = defect_measure(traj)
    exact = defect_mass(m)
    m.interval = None
    assert abs(defect_mass(m) - exact) <= 0.05 * exact


def test_interface_correction_profiles():
    traj = _run(Coefficient(2, 1), lambda x: np.full_like(x, 0.5), n_x=32, strict=False)
    m = defect_measure(traj, check=False)
    xi = m.grid.xi_faces
    minus = interface_correction(m, Coefficient(2, 1), VEL, "minus")
    np.testing.assert_allclose(minus.profile, VEL.A(xi), atol=1e-14)
    disp = interface_correction(m, Coefficient(2, 1), VEL, "plus", "display")
    np.testing.assert_allclose(disp.profile, VEL.A(1.0) - VEL.A(xi), atol=1e-14)
    assert not disp.nonnegative
    weak = interface_correction(m, Coefficient(2, 1), VEL, "plus", "weak")
    np.testing.assert_allclose(weak.profile, VEL.A(xi) - VEL.A(1.0), atol=1e-14)
    assert weak.nonnegative
    none = interface_correction(m, Coefficient(1, 2), VEL, "plus", "weak")
    assert np.all(none.profile == 0) and none.G(0.5) == 0
    with pytest.raises(ValueError):
        interface_correction(m, Coefficient(2, 1), VEL, "both")


@pytest.mark.parametrize("c", [0.0, 0.35, 1.0])
def test_residual_vanishes_on_constant_equilibrium(c):
    traj = _run(Coefficient(1, 1), lambda x: np.full_like(x, c), n_x=64)
    m = defect_measure(traj)
    fam = TestFunctionFamily.standard(traj.t_final, traj.grid.dx)
    for sign in ("plus", "minus"):
        atom = interface_correction(m, traj.coeff, VEL, sign, "weak")
        res = kinetic_residual(traj, atom, fam, sign)
        assert max(abs(r) for r in res) <= 1e-9


def test_plus_and_minus_residuals_coincide_with_weak_atom():
    # sgn_+ - sgn_- = 1, and the weak atoms differ by the matching constant
    traj = _run(Coefficient(1, 2), lambda x: np.where(x < 0, 1.0, 0.0), strict=False)
    m = defect_measure(traj, check=False)
    fam = TestFunctionFamily.standard(traj.t_final, traj.grid.dx)
    plus = kinetic_residual(traj, interface_correction(m, traj.coeff, VEL, "plus", "weak"),
                            fam, "plus")
    minus = kinetic_residual(traj, interface_correction(m, traj.coeff, VEL, "minus", "weak"),
                             fam, "minus")
    np.testing.assert_allclose(plus, minus, atol=1e-10)


def test_residual_shrinks_under_refinement():
    fam = TestFunctionFamily.standard(0.25, 4 / 64)
    worst = []
    for n, eps in ((64, 0.04), (128, 0.02), (256, 0.01)):
        traj = _run(Coefficient(1, 1), lambda x: np.where(x < 0, 1.0, 0.0), n_x=n, eps=eps,
                    snaps=None)
        m = defect_measure(traj)
        atom = interface_correction(m, traj.coeff, VEL, "minus", "weak")
        worst.append(max(abs(r) for r in kinetic_residual(traj, atom, fam, "minus")))
    assert worst[2] < worst[1] < worst[0]


def test_compare_plus_ordered_data_and_guards():
    g = Grid(-3, 3, 192, 16)
    u0 = MacroField(np.where(np.abs(g.x) < 1, 0.8, 0.1), g)
    v0 = MacroField(np.where(np.abs(g.x) < 1, 0.5, 0.1), g)
    cfg = BgkConfig(eps=0.05, t_final=0.5, n_snapshots=8)
    for coeff in (Coefficient(1, 1), Coefficient(1, 2)):
        tu = bgk_run(u0, cfg, coeff, VEL, strict=False)
        tv = bgk_run(v0, cfg, coeff, VEL, strict=False)
        lhs, rhs = compare_plus(tu, tv, 0.5, coeff.M_k)
        assert 0 <= lhs <= rhs
        assert rhs == pytest.approx(0.6, abs=1e-12)
        assert compare_plus(tv, tu, 0.5, coeff.M_k)[0] <= 1e-12
    with pytest.raises(DomainTooSmall):
        compare_plus(tu, tv, 2.5, 2.0)


def test_csv_writers(tmp_path):
    write_residuals_csv(tmp_path / "r.csv", [("t0-xs-m0", "plus", 1.5e-3)])
    rows = list(csv.reader(open(tmp_path / "r.csv")))
    assert rows == [["test_id", "sign", "residual"], ["t0-xs-m0", "plus", "0.0015"]]
    traj = _run(Coefficient(1, 1), lambda x: np.where(x < 0, 1.0, 0.0), n_x=8, n_xi=4, snaps=2)
    write_defect_csv(tmp_path / "d.csv", defect_measure(traj))
    rows = list(csv.reader(open(tmp_path / "d.csv")))
    assert rows[0] == ["t", "x", "m_xi_integral", "m_min"] and len(rows) == 1 + 3 * 8
