import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import solve_ivp

from bgkflux.model import Coefficient, Grid, KineticDensity, build_velocity
from bgkflux.transport import (CharParams, cell_average_operator, char_backward, char_forward,
                               evaluate_pwc, jacobian, pwc_mass, transport_apply,
                               transport_exact_pwc)

VEL = build_velocity("burgers")


def P(kl, kr, a):
    return CharParams(Coefficient(kl, kr), a)


def ode_characteristic(x0, elapsed, kl, kr, a):
    """Independent oracle: integrate dX/dt = k(X) a with an event at X = 0."""
    def rhs(_, y):
        return [(kl if y[0] < 0 else kr) * a]

    def hit(_, y):
        return y[0]
    hit.terminal = True
    if x0 == 0 or a == 0:
        return x0 + elapsed * (kr if a > 0 else kl) * a if x0 == 0 else x0
    sol = solve_ivp(rhs, (0, elapsed), [x0], events=hit, rtol=1e-12, atol=1e-14)
    if sol.status == 1:  # crossed the interface
        t0 = sol.t_events[0][0]
        k_after = kr if a > 0 else kl
        return k_after * a * (elapsed - t0)
    return sol.y[0, -1]


@pytest.mark.parametrize("x,elapsed,p,expected", [
    (1.0, 2.0, P(1, 1, 1.0), 3.0),
    (-1.0, 3.0, P(1, 2, 1.0), 4.0),
    (1.0, 3.0, P(1, 2, -1.0), -2.5),
])
def test_char_forward_examples(x, elapsed, p, expected):
    assert abs(char_forward(x, elapsed, p) - expected) <= 1e-12


@pytest.mark.parametrize("x,elapsed,p,expected", [
    (4.0, 3.0, P(1, 2, 1.0), -1.0),
    (3.0, 2.0, P(1, 1, 1.0), 1.0),
    (0.7, 5.0, P(1, 2, 0.0), 0.7),
])
def test_char_backward_examples(x, elapsed, p, expected):
    assert abs(char_backward(x, elapsed, p) - expected) <= 1e-12


@pytest.mark.parametrize("t,x,p,expected", [
    (3.0, 2.0, P(1, 2, 1.0), 0.5),
    (3.0, -5.0, P(1, 2, 1.0), 1.0),
    (3.0, -2.0, P(1, 2, -1.0), 2.0),
])
def test_jacobian_examples(t, x, p, expected):
    assert jacobian(t, x, p) == expected


def test_negative_elapsed_rejected():
    with pytest.raises(ValueError):
        char_forward(0.0, -1.0, P(1, 1, 1.0))
    with pytest.raises(ValueError):
        jacobian(-1.0, 0.0, P(1, 1, 1.0))


@settings(max_examples=60, deadline=None)
@given(x=st.floats(-3, 3), t=st.floats(0, 2), a=st.floats(-1, 1),
       k=st.sampled_from([(1.0, 2.0), (2.0, 1.0), (0.5, 3.0), (-1.0, -2.0)]))
def test_forward_matches_ode_oracle(x, t, a, k):
    kl, kr = k
    if kl < 0:  # the ODE with (k, a) equals the one with (-k, -a)
        kl, kr, a_ode = -kl, -kr, -a
    else:
        a_ode = a
    expected = ode_characteristic(x, t, kl, kr, a_ode)
    assert abs(char_forward(x, t, P(*k, a)) - expected) <= 1e-8


@settings(max_examples=100, deadline=None)
@given(x=st.floats(-3, 3), s=st.floats(0, 2), t=st.floats(0, 2), a=st.floats(-1, 1),
       k=st.sampled_from([(1.0, 1.0), (1.0, 2.0), (2.0, 1.0), (-1.0, -3.0)]))
def test_semigroup_and_inverse(x, s, t, a, k):
    p = P(*k, a)
    assert abs(char_forward(char_forward(x, s, p), t, p) - char_forward(x, s + t, p)) <= 1e-12
    y = char_forward(x, t, p)
    if abs(y) > 1e-9:
        assert abs(char_backward(y, t, p) - x) <= 1e-12


def test_jacobian_is_derivative_of_backward_map():
    # J(t, x) = d foot / dx away from the fan boundaries
    for k in ((1.0, 2.0), (2.0, 1.0)):
        for a in (0.7, -0.6):
            p = P(*k, a)
            x = np.linspace(-2.9, 2.9, 301)
            h = 1e-6
            deriv = (char_backward(x + h, 1.3, p) - char_backward(x - h, 1.3, p)) / (2 * h)
            edges = np.array([0.0, 1.3 * k[1] * a, 1.3 * k[0] * a])
            ok = np.abs(x[:, None] - edges[None, :]).min(axis=1) > 1e-3
            np.testing.assert_allclose(deriv[ok], jacobian(1.3, x, p)[ok], atol=1e-6)


def test_exact_pwc_examples():
    p = P(1, 2, 1.0)
    img = transport_exact_pwc([(-2.0, 1.0), (-1.0, 0.0)], 3.0, p)
    xs = np.linspace(-3, 6, 901)
    vals = evaluate_pwc(img, xs)
    inside = (xs > 2 + 1e-9) & (xs < 4 - 1e-9)
    assert np.all(vals[inside] == 0.5)
    assert np.all(vals[(xs < 2 - 1e-9) | (xs > 4 + 1e-9)] == 0.0)
    assert pwc_mass(img) == pytest.approx(1.0, abs=1e-14)
    # constant coefficient: plain shift
    img = transport_exact_pwc([(0.0, 3.0), (1.0, 0.0)], 0.5, P(2, 2, 1.0))
    np.testing.assert_array_equal(evaluate_pwc(img, [0.99, 1.01, 1.99, 2.01]), [0, 3, 3, 0])
    assert transport_exact_pwc([], 1.0, p) == []
    with pytest.raises(ValueError):
        transport_exact_pwc([(1.0, 1.0), (0.0, 0.0)], 1.0, p)


def test_transport_apply_shift_and_zero_row():
    g = Grid(-2, 2, 400, 4)
    vals = np.zeros((g.n_x, g.n_xi))
    vals[(g.x > 0) & (g.x < 1)] = 1.0
    f = KineticDensity(vals, g)
    out = transport_apply(f, 0.5, Coefficient(1, 1), VEL)
    # row j has speed a(xi_j); its image is the exact shift up to one cell of smearing
    for j, a in enumerate(VEL.a(g.xi)):
        exact = ((g.x > 0.5 * a) & (g.x < 1 + 0.5 * a)).astype(float)
        assert g.dx * np.abs(out.values[:, j] - exact).sum() <= 2 * g.dx
    # an odd xi grid puts a cell centre on the zero of a: that row must not move
    g3 = Grid(-2, 2, 40, 3)
    v3 = build_velocity([(0.0, 1.0), (0.5, 0.0), (1.0, -1.0)])
    assert v3.a(g3.xi)[1] == pytest.approx(0.0)
    rnd = np.random.default_rng(1).uniform(0, 1, (g3.n_x, g3.n_xi))
    out = transport_apply(KineticDensity(rnd, g3), 0.7, Coefficient(1, 2), v3)
    np.testing.assert_array_equal(out.values[:, 1], rnd[:, 1])


def test_transport_apply_interface_example():
    # indicator of [-2, -1], k = (1, 2), a = 1, elapsed 3 -> 0.5 on [2, 4]
    g = Grid(-6, 6, 1200, 1)
    c = Coefficient(1, 2)
    x = g.x
    row = ((x > -2) & (x < -1)).astype(float)
    M = cell_average_operator(g, 3.0, c, 1.0)
    out = M @ row
    exact = 0.5 * ((x > 2) & (x < 4))
    assert g.dx * np.abs(out - exact).sum() <= 2 * g.dx
    assert g.dx * out.sum() == pytest.approx(1.0, abs=1e-12)


def test_transport_apply_equals_cell_average_operator():
    g = Grid(-2, 2, 64, 8)
    rng = np.random.default_rng(3)
    vals = rng.uniform(0, 1, (g.n_x, g.n_xi))
    for k in ((1.0, 2.0), (2.0, 1.0), (-1.0, -0.5)):
        c = Coefficient(*k)
        out = transport_apply(KineticDensity(vals, g), 0.37, c, VEL)
        for j, a in enumerate(VEL.a(g.xi)):
            M = cell_average_operator(g, 0.37, c, a)
            np.testing.assert_allclose(out.values[:, j], M @ vals[:, j], atol=1e-12)


def test_transport_conserves_mass_of_compact_rows():
    g = Grid(-2, 2, 256, 16)
    rng = np.random.default_rng(0)
    vals = rng.uniform(0, 1, (g.n_x, g.n_xi)) * (np.abs(g.x) < 0.8)[:, None]
    for k in ((1.0, 2.0), (2.0, 1.0)):
        out = transport_apply(KineticDensity(vals, g), 0.4, Coefficient(*k), VEL)
        np.testing.assert_allclose(out.values.sum(axis=0), vals.sum(axis=0), rtol=0, atol=1e-11)


def test_dropping_jacobian_breaks_conservation():
    g = Grid(-2, 2, 256, 16)
    vals = np.ones((g.n_x, g.n_xi)) * (np.abs(g.x) < 0.8)[:, None]
    out = transport_apply(KineticDensity(vals, g), 0.4, Coefficient(1, 2), VEL,
                          use_jacobian=False)
    assert np.abs(out.values.sum(axis=0) - vals.sum(axis=0)).max() * g.dx > 1e-3


def test_constant_state_develops_fan_with_jump_ratio():
    # exact solution of transport from constant data is J * c: not steady when k jumps
    g = Grid(-2, 2, 400, 1)
    c = Coefficient(1.0, 2.0)
    M = cell_average_operator(g, 0.5, c, 1.0)
    out = M @ np.ones(g.n_x)
    inner = (g.x > 0.05) & (g.x < 0.95)   # fan [0, t kR a) = [0, 1)
    np.testing.assert_allclose(out[inner], 0.5, atol=1e-12)
    np.testing.assert_allclose(out[(g.x < -0.05) & (g.x > -1.5)], 1.0, atol=1e-12)
