import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import quad

from bgkflux.model import (Coefficient, Grid, HypothesisViolation, KineticDensity, MacroField,
                           build_velocity, chi, kinetic_flux, load_velocity_table, moment)


def test_coefficient_ratios():
    c = Coefficient(1.0, 2.0)
    assert c.M_k == 2.0
    assert c.alpha(-1.0) == 2.0 and c.alpha(1.0) == 1.0
    assert c.beta(1.0) == 0.5 and c.beta(-1.0) == 1.0
    assert c(-0.1) == 1.0 and c(0.1) == 2.0


@pytest.mark.parametrize("kl,kr", [(1.0, -1.0), (0.0, 1.0), (-2.0, 0.0)])
def test_coefficient_rejects_sign_change(kl, kr):
    with pytest.raises(ValueError, match="positive"):
        Coefficient(kl, kr)


def test_burgers_closed_form():
    vel = build_velocity("burgers")
    assert vel.a(0.25) == pytest.approx(0.5, abs=1e-15)
    assert vel.A(0.5) == pytest.approx(0.25, abs=1e-15)
    assert vel.A(0.0) == 0.0 and abs(vel.A(1.0)) <= vel.quadrature_tol
    scan = np.linspace(0, 1, 1000)
    assert vel.A(scan).min() >= -vel.quadrature_tol


def test_burgers_primitive_matches_quadrature():
    vel = build_velocity("burgers")
    for u in np.linspace(0, 1, 11):
        ref, _ = quad(lambda s: 1 - 2 * s, 0, u)
        assert abs(vel.A(u) - ref) <= vel.quadrature_tol


def test_two_point_table_matches_burgers(tmp_path):
    vel_table = build_velocity([(0.0, 1.0), (1.0, -1.0)])
    burgers = build_velocity("burgers")
    u = np.linspace(0, 1, 101)
    assert np.abs(vel_table.A(u) - burgers.A(u)).max() <= vel_table.quadrature_tol
    path = tmp_path / "a.csv"
    path.write_text("xi,a\n0,1\n0.5,0\n1,-1\n")
    assert load_velocity_table(path) == [(0.0, 1.0), (0.5, 0.0), (1.0, -1.0)]
    vel_file = build_velocity(str(path))
    assert np.abs(vel_file.A(u) - burgers.A(u)).max() <= 1e-8


def test_table_violating_zero_mean_is_rejected():
    with pytest.raises(HypothesisViolation, match="integral"):
        build_velocity([(0.0, 1.0), (1.0, -0.5)])


def test_table_with_negative_primitive_is_rejected():
    # a = -1 then +1: zero mean but A < 0 on (0, 1)
    with pytest.raises(HypothesisViolation):
        build_velocity([(0.0, -1.0), (0.5, 0.0), (1.0, 1.0)])


def test_grid_puts_face_at_origin():
    g = Grid(-1.3, 2.0, 33, 8)
    assert np.any(np.isclose(g.x_faces, 0.0, atol=1e-14))
    assert g.dx == pytest.approx(3.3 / 33)
    assert g.x_faces[g.n_left] == pytest.approx(0.0, abs=1e-14)


def test_chi_examples():
    g4, g2 = Grid(-1, 1, 2, 4), Grid(-1, 1, 2, 2)
    np.testing.assert_allclose(chi(0.5, g4), [1, 1, 0, 0])
    np.testing.assert_allclose(chi(0.3, g2), [0.6, 0.0])
    np.testing.assert_allclose(chi(0.0, g4), 0.0)


def test_moment_examples():
    g = Grid(-1, 1, 2, 4)
    f = KineticDensity(np.vstack([chi(0.5, g), np.full(4, 0.5)]), g)
    assert moment(f, 0) == pytest.approx(0.5, abs=1e-15)
    assert moment(f, 1) == pytest.approx(0.5, abs=1e-15)
    g2 = Grid(-1, 1, 2, 2)
    assert moment(KineticDensity(np.vstack([chi(0.3, g2)] * 2), g2), 0) == pytest.approx(0.3)


@settings(max_examples=200, deadline=None)
@given(u=st.floats(0, 1), v=st.floats(0, 1), n_xi=st.integers(1, 64))
def test_chi_moment_monotone_and_l1_identity(u, v, n_xi):
    g = Grid(-1, 1, 2, n_xi)
    cu, cv = chi(u, g), chi(v, g)
    assert abs(g.dxi * cu.sum() - u) <= 1e-14
    if u <= v:
        assert np.all(cu <= cv)
    assert abs(g.dxi * np.abs(cu - cv).sum() - abs(u - v)) <= 1e-14


def test_kinetic_flux_is_exact_on_cell_faces():
    vel = build_velocity("burgers")
    g = Grid(-1, 1, 2, 8)
    for u in g.xi_faces:
        assert kinetic_flux(u, g, vel) == pytest.approx(vel.A(u), abs=1e-15)


def test_macrofield_riemann_and_l1():
    g = Grid(-2, 2, 16, 4)
    u = MacroField.riemann(1.0, 0.0, g)
    assert u.l1() == pytest.approx(2.0)
    with pytest.raises(ValueError):
        MacroField(np.zeros(3), g)
