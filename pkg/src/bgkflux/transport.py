"""Exact solution operator of the linear transport ``f_t + (k(x) a f)_x = 0``.

Characteristics refract at x=0; the solution is ``J * f0(foot)`` where the
Jacobian weight ``J`` is ``k_L/k_R`` or ``k_R/k_L`` inside the fan of
characteristics that crossed the interface.  Equivalently ``w = k f`` is
constant along characteristics.  On the grid, x-values are cell averages
and the operator is the exact remap of piecewise-constant rows.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .model import Coefficient, KineticDensity, VelocityModel


@dataclass(frozen=True)
class CharParams:
    coeff: Coefficient
    a_val: float

    def __post_init__(self):
        if not np.isfinite(self.a_val):
            raise ValueError("a_val must be finite")


def _pos(s):
    return np.maximum(s, 0.0)


def _neg(s):
    return np.maximum(-s, 0.0)


def _normalized(k_left, k_right, a):
    # k -> -k, a -> -a leaves k*a unchanged; reduce to positive k
    if k_left < 0:
        return -k_left, -k_right, -np.asarray(a, dtype=float)
    return k_left, k_right, np.asarray(a, dtype=float)


def _forward(x, tau, kL, kR, a):
    kL, kR, a = _normalized(kL, kR, a)
    x = np.asarray(x, dtype=float)
    alpha = np.where(x < 0, kR / kL, 1.0)
    beta = np.where(x > 0, kL / kR, 1.0)
    fwd_pos = _pos(alpha * x + tau * kR * a) - _neg(x + tau * kL * a)
    fwd_neg = _pos(x + tau * kR * a) - _neg(beta * x + tau * kL * a)
    return np.where(a >= 0, fwd_pos, fwd_neg)


def _backward(x, tau, kL, kR, a):
    kL, kR, a = _normalized(kL, kR, a)
    x = np.asarray(x, dtype=float)
    alpha = np.where(x < 0, kR / kL, 1.0)
    beta = np.where(x > 0, kL / kR, 1.0)
    bwd_pos = _pos(x - tau * kR * a) - _neg(beta * x - tau * kL * a)
    bwd_neg = _pos(alpha * x - tau * kR * a) - _neg(x - tau * kL * a)
    return np.where(a >= 0, bwd_pos, bwd_neg)


def char_forward(x, elapsed: float, p: CharParams):
    """Position after ``elapsed`` time of the characteristic started at ``x``.

    At x=0 both ratio factors are taken as 1.
    """
    if elapsed < 0:
        raise ValueError("elapsed must be >= 0")
    out = _forward(x, elapsed, p.coeff.k_left, p.coeff.k_right, p.a_val)
    return float(out) if np.ndim(out) == 0 else out


def char_backward(x, elapsed: float, p: CharParams):
    """Foot of the characteristic through ``x``, traced back by ``elapsed``."""
    if elapsed < 0:
        raise ValueError("elapsed must be >= 0")
    out = _backward(x, elapsed, p.coeff.k_left, p.coeff.k_right, p.a_val)
    return float(out) if np.ndim(out) == 0 else out


def _jacobian(t, x, kL, kR, a):
    kL, kR, a = _normalized(kL, kR, a)
    x = np.asarray(x, dtype=float)
    # fan regions are left-closed: [0, t kR a) and [t kL a, 0)
    fan_pos = (x >= 0) & (x < t * kR * a)
    fan_neg = (x >= t * kL * a) & (x < 0)
    return np.where(a > 0, np.where(fan_pos, kL / kR, 1.0),
                    np.where(fan_neg, kR / kL, 1.0))


def jacobian(t: float, x, p: CharParams):
    """Jacobian weight J(t, x) of the explicit solution formula."""
    if t < 0:
        raise ValueError("t must be >= 0")
    out = _jacobian(t, x, p.coeff.k_left, p.coeff.k_right, p.a_val)
    return float(out) if np.ndim(out) == 0 else out


def transport_apply(f: KineticDensity, elapsed: float, coeff: Coefficient,
                    vel: VelocityModel, use_jacobian: bool = True) -> KineticDensity:
    """Exact transport of x-cell averages (conservative semi-Lagrangian remap).

    Each xi-row is read as piecewise constant in x.  The characteristic
    flow preserves mass between characteristics, and ``J`` is exactly the
    derivative of the backward map, so the new average of cell
    ``[x_{i-1/2}, x_{i+1/2}]`` is the old mass between the feet of its two
    faces divided by dx.  This equals ``J * f0(foot)`` integrated over the
    cell, is exactly conservative up to boundary flux, monotone and
    L1-contractive.  Beyond the domain the boundary cells are extended as
    constants.

    ``use_jacobian=False`` replaces the foot-interval mass by the foot-interval
    mean (J dropped); it exists only as a deliberate-bug canary for the
    verification suite.
    """
    if elapsed < 0:
        raise ValueError("elapsed must be >= 0")
    if elapsed == 0:
        return f
    g = f.grid
    a = vel.a(g.xi)
    feet = _backward(g.x_faces[:, None], elapsed, coeff.k_left, coeff.k_right, a[None, :])
    mass = cumulative_mass(feet, g.x_min, g.dx, f.values)
    if use_jacobian:
        out = np.diff(mass, axis=0) / g.dx
    else:
        out = np.diff(mass, axis=0) / np.diff(feet, axis=0)
    still = a == 0
    if np.any(still):
        out[:, still] = f.values[:, still]
    return f.with_values(out)


def cumulative_mass(pts: np.ndarray, x_min: float, dx: float, vals: np.ndarray) -> np.ndarray:
    """``int_{x_min}^{pts} v`` for the column-wise piecewise-constant ``vals``.

    ``pts`` has shape (p, m); column j is integrated against column j of
    ``vals`` (shape (n, m)).  Outside the grid the boundary cells extend as
    constants, so points left of ``x_min`` get negative mass.
    """
    n = vals.shape[0]
    cum = np.vstack([np.zeros((1, vals.shape[1])), np.cumsum(vals, axis=0) * dx])
    i = np.clip(np.floor((pts - x_min) / dx).astype(np.int64), 0, n - 1)
    cols = np.arange(vals.shape[1])[None, :]
    return cum[i, cols] + (pts - (x_min + i * dx)) * vals[i, cols]


# ---------------------------------------------------------------------------
# exact piecewise-constant push-forward (oracle path)
# ---------------------------------------------------------------------------

Profile = list[tuple[float, float]]


def transport_exact_pwc(breakpoints: Sequence[tuple[float, float]], elapsed: float,
                        p: CharParams) -> Profile:
    """Exact push-forward of a piecewise-constant profile.

    A profile is a list of ``(x_k, v_k)``: the value is ``v_k`` on
    ``[x_k, x_{k+1})``, 0 left of the first breakpoint and the last value
    to the right of the last one.  Plateaus are split at the interface and
    at the start point of the characteristic that reaches x=0 at time
    ``elapsed``, so that each image plateau lies in a region of constant J.
    """
    bp = [(float(x), float(v)) for x, v in breakpoints]
    xs = np.array([b[0] for b in bp])
    if np.any(np.diff(xs) < 0):
        raise ValueError("breakpoints must be sorted by x")
    if not bp or elapsed == 0:
        return bp
    kL, kR, a = _normalized(p.coeff.k_left, p.coeff.k_right, p.a_val)
    a = float(a)
    if a == 0:
        return bp
    cross = -elapsed * kL * a if a > 0 else -elapsed * kR * a
    cuts = sorted({0.0, cross})

    def value_at(x):
        k = np.searchsorted(xs, x, side="right") - 1
        return 0.0 if k < 0 else bp[k][1]

    pts = dict(bp)
    for c in cuts:
        if c not in pts:
            pts[c] = value_at(c)
    src = sorted(pts.items())

    out: Profile = []
    for idx, (x, v) in enumerate(src):
        # region of the plateau [x, next) decides its Jacobian
        nxt = src[idx + 1][0] if idx + 1 < len(src) else x + 1.0
        mid = 0.5 * (x + nxt)
        if a > 0:
            J = kL / kR if cross < mid < 0 else 1.0
        else:
            J = kR / kL if 0 < mid < cross else 1.0
        out.append((float(_forward(x, elapsed, kL, kR, a)), v * J))
    return out


def evaluate_pwc(breakpoints: Sequence[tuple[float, float]], x) -> np.ndarray:
    if not len(breakpoints):
        return np.zeros_like(np.asarray(x, dtype=float))
    xs = np.array([b[0] for b in breakpoints])
    vs = np.concatenate([[0.0], [b[1] for b in breakpoints]])
    return vs[np.searchsorted(xs, x, side="right")]


def pwc_mass(breakpoints: Sequence[tuple[float, float]]) -> float:
    """Integral of a profile whose last value is 0 (compact support)."""
    if len(breakpoints) and breakpoints[-1][1] != 0:
        raise ValueError("profile must end with value 0 to have finite mass")
    return float(sum((breakpoints[i + 1][0] - breakpoints[i][0]) * breakpoints[i][1]
                     for i in range(len(breakpoints) - 1)))


def cell_average_operator(grid, elapsed: float, coeff: Coefficient, a_val: float) -> np.ndarray:
    """Matrix of the exact transport acting on cell averages of one xi-row.

    Each cell is treated as a plateau, pushed forward exactly and averaged
    back onto the grid.  Cells beyond the domain carry the boundary value
    (constant extension).  The operator conserves mass up to boundary flux
    and is an L1 contraction.
    """
    n = grid.n_x
    faces = grid.x_faces
    kL, kR, a = _normalized(coeff.k_left, coeff.k_right, a_val)
    a = float(a)
    reach = elapsed * max(kL, kR) * abs(a) + 2 * grid.dx
    # ghost plateaus replicate the boundary cells
    src_faces = np.concatenate([[faces[0] - reach], faces, [faces[-1] + reach]])
    basis = np.zeros((n + 2, n))
    basis[1:-1] = np.eye(n)
    basis[0, 0] = 1.0
    basis[-1, -1] = 1.0
    if a == 0 or elapsed == 0:
        img = src_faces
        weights = np.ones(n + 2)[:, None] * basis
    else:
        cross = -elapsed * kL * a if a > 0 else -elapsed * kR * a
        extra = [c for c in (0.0, cross) if src_faces[0] < c < src_faces[-1]]
        all_faces = np.union1d(src_faces, extra)
        owner = np.clip(np.searchsorted(src_faces, all_faces[:-1], side="right") - 1,
                        0, n + 1)
        mids = 0.5 * (all_faces[:-1] + all_faces[1:])
        if a > 0:
            J = np.where((mids > cross) & (mids < 0), kL / kR, 1.0)
        else:
            J = np.where((mids > 0) & (mids < cross), kR / kL, 1.0)
        img = _forward(all_faces, elapsed, kL, kR, a)
        weights = J[:, None] * basis[owner]
    # cumulative integral at image breakpoints, evaluated at grid faces
    lengths = np.diff(img)
    cum = np.vstack([np.zeros((1, n)), np.cumsum(lengths[:, None] * weights, axis=0)])
    at_faces = np.stack([np.interp(faces, img, cum[:, c]) for c in range(n)], axis=1)
    return np.diff(at_faces, axis=0) / grid.dx
