"""Ground-truth entropy solutions.

A monotone finite-volume scheme run on the regularized coefficient, and
the exact Riemann solution for a constant coefficient and strictly
concave flux.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numpy as np

from .model import Coefficient, Grid, MacroField, VelocityModel

INVARIANT_TOL = 1e-12


class IntegrityError(RuntimeError):
    pass


@dataclass(frozen=True)
class RegularizedCoefficient:
    """Piecewise-linear monotone regularization of k over [-width, width]."""

    base: Coefficient
    width: float

    def __post_init__(self):
        if not self.width > 0:
            raise ValueError("width must be positive")

    def __call__(self, x):
        return regularize_k(self.base, self.width, x)


def regularize_k(coeff: Coefficient, width: float, x):
    if not width > 0:
        raise ValueError("width must be positive")
    kL, kR = coeff.k_left, coeff.k_right
    x = np.asarray(x, dtype=float)
    mid = (kR - kL) / (2 * width) * x + 0.5 * (kR + kL)
    out = np.where(x < -width, kL, np.where(x > width, kR, mid))
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class FvConfig:
    cfl: float = 0.9
    flux_kind: Literal["engquist_osher", "godunov"] = "engquist_osher"
    width_ratio: float = 2.0

    def __post_init__(self):
        if not 0 < self.cfl <= 1:
            raise ValueError(f"cfl must lie in (0, 1], got {self.cfl}")
        if self.flux_kind not in ("engquist_osher", "godunov"):
            raise ValueError(f"unknown flux_kind {self.flux_kind!r}")
        if self.width_ratio < 1:
            raise ValueError("width_ratio must be >= 1")


def eo_flux(k_face, u_l, u_r, vel: VelocityModel):
    """Engquist-Osher flux for ``q(u) = k_face A(u)``.

    ``q+(u_l) + q-(u_r)`` with the split taken on the sign of ``k_face a``.
    """
    k = np.asarray(k_face, dtype=float)
    pos = np.where(k >= 0, k * vel.A_plus(u_l), k * vel.A_minus(u_l))
    neg = np.where(k >= 0, k * vel.A_minus(u_r), k * vel.A_plus(u_r))
    out = pos + neg
    return float(out) if np.ndim(out) == 0 else out


def godunov_flux(k_face, u_l, u_r, vel: VelocityModel):
    """Godunov flux for ``q(u) = k_face A(u)``: min of q over [u_l, u_r] if
    u_l <= u_r, max over [u_r, u_l] otherwise.  Extrema of A occur at the
    endpoints or at zeros of a."""
    k = np.broadcast_to(np.asarray(k_face, dtype=float), np.broadcast(k_face, u_l, u_r).shape)
    ul = np.broadcast_to(np.asarray(u_l, dtype=float), k.shape)
    ur = np.broadcast_to(np.asarray(u_r, dtype=float), k.shape)
    lo, hi = np.minimum(ul, ur), np.maximum(ul, ur)
    ql, qr = k * vel.A(ul), k * vel.A(ur)
    zeros = vel.xi_nodes[vel.a_nodes == 0.0]
    cand_min = np.minimum(ql, qr)
    cand_max = np.maximum(ql, qr)
    for z in zeros:
        inside = (z > lo) & (z < hi)
        qz = k * float(vel.A(z))
        cand_min = np.where(inside, np.minimum(cand_min, qz), cand_min)
        cand_max = np.where(inside, np.maximum(cand_max, qz), cand_max)
    out = np.where(ul <= ur, cand_min, cand_max)
    return float(out) if out.ndim == 0 else out


@dataclass(eq=False)
class MacroTrajectory:
    times: np.ndarray
    u: np.ndarray
    grid: Grid
    boundary_outflow: np.ndarray  # cumulative dt*(F_right - F_left) at each snapshot

    def macro(self, k: int) -> MacroField:
        return MacroField(self.u[k], self.grid)


def fv_run(u0: MacroField, cfg: FvConfig, coeff: Coefficient, vel: VelocityModel,
           t_final: float, snapshot_times=None, n_snapshots: int = 32) -> MacroTrajectory:
    """Explicit conservative monotone scheme for ``u_t + (k_eps(x) A(u))_x = 0``.

    The interface coefficient is the regularized ``k`` evaluated at cell
    faces with width ``cfg.width_ratio * dx``.  Boundaries use constant
    extension.  The step is ``cfg.cfl * dx / max|k a|``, shortened to land
    on every snapshot time.
    """
    g = u0.grid
    u = u0.values.copy()
    if np.any(u < -INVARIANT_TOL) or np.any(u > 1 + INVARIANT_TOL):
        raise ValueError("initial datum must satisfy 0 <= u0 <= 1")
    if snapshot_times is None:
        snapshot_times = np.linspace(0.0, t_final, n_snapshots + 1)
    snapshot_times = np.asarray(snapshot_times, dtype=float)
    width = cfg.width_ratio * g.dx
    k_faces = regularize_k(coeff, width, g.x_faces)
    flux = eo_flux if cfg.flux_kind == "engquist_osher" else godunov_flux
    speed = max(abs(coeff.k_left), abs(coeff.k_right)) * vel.max_speed
    dt_max = cfg.cfl * g.dx / speed if speed > 0 else np.inf

    out = np.empty((len(snapshot_times), g.n_x))
    outflow = np.zeros(len(snapshot_times))
    t, acc = 0.0, 0.0
    for s, t_snap in enumerate(snapshot_times):
        while t < t_snap - 1e-14:
            dt = min(dt_max, t_snap - t)
            ext = np.concatenate([[u[0]], u, [u[-1]]])
            F = flux(k_faces, ext[:-1], ext[1:], vel)
            u = u - dt / g.dx * np.diff(F)
            acc += dt * (F[-1] - F[0])
            t += dt
            if u.min() < -INVARIANT_TOL or u.max() > 1 + INVARIANT_TOL:
                raise IntegrityError(f"fv_run left [0, 1] at t={t:.6g}: "
                                     f"u in [{u.min():.3g}, {u.max():.3g}]")
        out[s] = u
        outflow[s] = acc
    return MacroTrajectory(snapshot_times, out, g, outflow)


def riemann_exact(u_l: float, u_r: float, k: float, vel: VelocityModel, x_over_t):
    """Entropy solution of the Riemann problem for ``u_t + (k A(u))_x = 0``.

    Requires ``k > 0`` and a strictly concave ``A``.  ``u_l < u_r`` gives a
    shock moving at the Rankine-Hugoniot speed; ``u_l > u_r`` a rarefaction
    ``u = a^{-1}(x / (k t))`` clamped between the states.
    """
    if not k > 0:
        raise ValueError("riemann_exact needs k > 0")
    if not vel.is_strictly_concave:
        raise ValueError(f"velocity model {vel.name!r} has no strictly concave flux")
    s = np.asarray(x_over_t, dtype=float)
    if u_l == u_r:
        out = np.full_like(s, u_l)
    elif u_l < u_r:
        speed = shock_speed(u_l, u_r, k, vel)
        out = np.where(s < speed, u_l, u_r)
    else:
        out = np.clip(vel.a_inverse(s / k), u_r, u_l)
    return float(out) if out.ndim == 0 else out


def shock_speed(u_l: float, u_r: float, k: float, vel: VelocityModel) -> float:
    return float(k * (vel.A(u_r) - vel.A(u_l)) / (u_r - u_l))


def riemann_profile(u_l: float, u_r: float, k: float, vel: VelocityModel, x, t: float):
    """Point values of the Riemann solution at time ``t`` (initial data at t=0)."""
    x = np.asarray(x, dtype=float)
    if t <= 0:
        return np.where(x < 0, u_l, u_r).astype(float)
    return np.asarray(riemann_exact(u_l, u_r, k, vel, x / t), dtype=float)


def box_average(values: np.ndarray, factor: int) -> np.ndarray:
    """Average consecutive groups of ``factor`` cells along the last axis."""
    v = np.asarray(values)
    return v.reshape(v.shape[:-1] + (v.shape[-1] // factor, factor)).mean(axis=-1)
