"""Problem data for the BGK model with a two-valued coefficient.

Houses the discontinuous coefficient ``k``, the kinetic velocity ``a`` with
its primitive flux ``A``, the tensor (x, xi) grid, and the equilibrium /
moment algebra every solver in the package shares.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence, Union

import numpy as np


class HypothesisViolation(ValueError):
    """A velocity model does not satisfy ``A >= 0`` on [0, 1] and ``A(1) = 0``."""


# ---------------------------------------------------------------------------
# Coefficient
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Coefficient:
    """Two-valued coefficient ``k = k_left`` on x<0, ``k_right`` on x>0."""

    k_left: float
    k_right: float

    def __post_init__(self):
        if not (np.isfinite(self.k_left) and np.isfinite(self.k_right)):
            raise ValueError("coefficient values must be finite")
        if self.k_left * self.k_right <= 0:
            raise ValueError(
                f"k_left * k_right must be positive, got "
                f"k_left={self.k_left}, k_right={self.k_right}"
            )

    @property
    def M_k(self) -> float:
        r = self.k_left / self.k_right
        return max(r, 1.0 / r)

    @property
    def is_continuous(self) -> bool:
        return self.k_left == self.k_right

    def __call__(self, x):
        """k(x); the value at x=0 is taken from the right."""
        x = np.asarray(x, dtype=float)
        return np.where(x < 0, self.k_left, self.k_right)

    def alpha(self, x):
        x = np.asarray(x, dtype=float)
        return np.where(x < 0, self.k_right / self.k_left, 1.0)

    def beta(self, x):
        x = np.asarray(x, dtype=float)
        return np.where(x > 0, self.k_left / self.k_right, 1.0)


# ---------------------------------------------------------------------------
# Velocity model
# ---------------------------------------------------------------------------

def _insert_zero_crossings(xi: np.ndarray, a: np.ndarray):
    out_x, out_a = [xi[0]], [a[0]]
    for i in range(len(xi) - 1):
        a0, a1 = a[i], a[i + 1]
        if a0 * a1 < 0:
            z = xi[i] + (xi[i + 1] - xi[i]) * a0 / (a0 - a1)
            out_x.append(z)
            out_a.append(0.0)
        out_x.append(xi[i + 1])
        out_a.append(a1)
    return np.array(out_x), np.array(out_a)


@dataclass(frozen=True, eq=False)
class VelocityModel:
    """Kinetic velocity ``a`` on [0, 1], piecewise linear between nodes.

    ``A(u)`` is the exact integral of the interpolant from 0 to ``u``,
    clamped so that A vanishes outside [0, 1].  Zero crossings of ``a`` are
    inserted as nodes, which makes the split integrals ``A_plus`` (positive
    part of ``a``) and ``A_minus`` exact as well.
    """

    name: str
    xi_nodes: np.ndarray
    a_nodes: np.ndarray
    quadrature_tol: float
    closed_form: bool = False
    _cum: np.ndarray = field(init=False, repr=False)
    _cum_plus: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        xi, a = _insert_zero_crossings(np.asarray(self.xi_nodes, float),
                                       np.asarray(self.a_nodes, float))
        object.__setattr__(self, "xi_nodes", xi)
        object.__setattr__(self, "a_nodes", a)
        h = np.diff(xi)
        seg = 0.5 * h * (a[:-1] + a[1:])
        seg_plus = 0.5 * h * (np.maximum(a[:-1], 0) + np.maximum(a[1:], 0))
        object.__setattr__(self, "_cum", np.concatenate([[0.0], np.cumsum(seg)]))
        object.__setattr__(self, "_cum_plus",
                           np.concatenate([[0.0], np.cumsum(seg_plus)]))

    def a(self, xi):
        if self.closed_form and self.name == "burgers":
            return 1.0 - 2.0 * np.asarray(xi, dtype=float)
        return np.interp(xi, self.xi_nodes, self.a_nodes)

    def _integrate(self, u, cum, positive_part):
        u = np.clip(np.asarray(u, dtype=float), 0.0, 1.0)
        xi, a = self.xi_nodes, self.a_nodes
        k = np.clip(np.searchsorted(xi, u, side="right") - 1, 0, len(xi) - 2)
        au = np.interp(u, xi, a)
        ak = a[k]
        if positive_part:
            au, ak = np.maximum(au, 0), np.maximum(ak, 0)
        return cum[k] + 0.5 * (u - xi[k]) * (ak + au)

    def A(self, u):
        if self.closed_form and self.name == "burgers":
            uc = np.clip(np.asarray(u, dtype=float), 0.0, 1.0)
            return uc * (1.0 - uc)
        return self._integrate(u, self._cum, False)

    def A_plus(self, u):
        """Integral of max(a, 0) from 0 to u (clamped to [0, 1])."""
        return self._integrate(u, self._cum_plus, True)

    def A_minus(self, u):
        """Integral of min(a, 0) from 0 to u; ``A = A_plus + A_minus``."""
        return self.A(u) - self.A_plus(u)

    @property
    def max_speed(self) -> float:
        return float(np.max(np.abs(self.a_nodes)))

    @property
    def is_strictly_concave(self) -> bool:
        """A strictly concave on [0, 1] iff a strictly decreasing there."""
        return bool(np.all(np.diff(self.a_nodes) < 0))

    def a_inverse(self, s):
        """Inverse of ``a`` for a strictly decreasing velocity, clipped to [0, 1]."""
        if not self.is_strictly_concave:
            raise ValueError(f"velocity model {self.name!r} is not strictly decreasing")
        return np.interp(s, self.a_nodes[::-1], self.xi_nodes[::-1])

    def critical_points(self, lo: float, hi: float) -> np.ndarray:
        """Zeros of ``a`` strictly inside (lo, hi): interior extrema of A."""
        z = self.xi_nodes[(self.a_nodes == 0.0)]
        return z[(z > lo) & (z < hi)]

    def validate(self, n_scan: int = 1001) -> None:
        """Raise :class:`HypothesisViolation` if ``A`` leaves the admissible set."""
        A1 = float(self.A(1.0))
        if abs(A1) > self.quadrature_tol:
            raise HypothesisViolation(
                f"{self.name}: integral of a over [0,1] is {A1:.3e}, not zero "
                f"(failing sample point u=1.0)"
            )
        u = np.union1d(np.linspace(0.0, 1.0, n_scan), self.xi_nodes)
        Au = self.A(u)
        bad = np.nonzero(Au < -self.quadrature_tol)[0]
        if bad.size:
            i = bad[np.argmin(Au[bad])]
            raise HypothesisViolation(
                f"{self.name}: A(u) = {Au[i]:.3e} < 0 at failing sample point u={u[i]:.6g}"
            )


def load_velocity_table(path: Union[str, Path]) -> list[tuple[float, float]]:
    """Read a two-column ``xi,a`` CSV with a header row."""
    rows = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        next(reader)
        for line in reader:
            if not line or not "".join(line).strip():
                continue
            rows.append((float(line[0]), float(line[1])))
    return rows


VelocitySpec = Union[str, Path, Sequence[Sequence[float]]]


def build_velocity(spec: VelocitySpec, quadrature_tol: float | None = None) -> VelocityModel:
    """Build and validate a velocity model.

    Parameters
    ----------
    spec : "burgers", a path to a ``xi,a`` CSV, or a sequence of (xi, a) pairs
        ``"burgers"`` means ``a(xi) = 1 - 2 xi`` and ``A(u) = u (1 - u)``.
        Tables must be strictly increasing in xi and cover [0, 1]; they are
        interpolated linearly.
    quadrature_tol : float, optional
        Defaults to 1e-12 for closed-form models and 1e-8 for tables.

    Raises
    ------
    HypothesisViolation
        If ``A < 0`` somewhere on [0, 1] or ``A(1) != 0``.
    """
    if isinstance(spec, str) and spec == "burgers":
        tol = 1e-12 if quadrature_tol is None else quadrature_tol
        model = VelocityModel("burgers", np.array([0.0, 1.0]), np.array([1.0, -1.0]),
                              tol, closed_form=True)
        model.validate()
        return model

    if isinstance(spec, (str, Path)):
        name = Path(spec).stem
        table = load_velocity_table(spec)
    else:
        name = "table"
        table = [tuple(p) for p in spec]
    arr = np.asarray(table, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 2 or len(arr) < 2:
        raise ValueError("velocity table needs at least two (xi, a) rows")
    xi, a = arr[:, 0], arr[:, 1]
    if np.any(np.diff(xi) <= 0):
        raise ValueError("velocity table xi column must be strictly increasing")
    if xi[0] > 0.0 or xi[-1] < 1.0:
        raise ValueError(f"velocity table must cover [0, 1], got [{xi[0]}, {xi[-1]}]")
    # restrict to [0, 1]
    inner = (xi > 0.0) & (xi < 1.0)
    xs = np.concatenate([[0.0], xi[inner], [1.0]])
    as_ = np.concatenate([[np.interp(0.0, xi, a)], a[inner], [np.interp(1.0, xi, a)]])
    tol = 1e-8 if quadrature_tol is None else quadrature_tol
    model = VelocityModel(name, xs, as_, tol)
    model.validate()
    return model


# ---------------------------------------------------------------------------
# Grid and fields
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Grid:
    """Uniform tensor grid: x cells with a face at x=0, xi cells on [0, 1].

    ``x_min``/``x_max`` are shifted (keeping ``dx``) so that x=0 falls on a
    cell face.
    """

    x_min: float
    x_max: float
    n_x: int
    n_xi: int

    def __post_init__(self):
        if not self.x_min < 0 < self.x_max:
            raise ValueError(f"need x_min < 0 < x_max, got [{self.x_min}, {self.x_max}]")
        if self.n_x < 2 or self.n_xi < 1:
            raise ValueError("need n_x >= 2 and n_xi >= 1")
        dx = (self.x_max - self.x_min) / self.n_x
        n_left = int(np.clip(round(-self.x_min / dx), 1, self.n_x - 1))
        object.__setattr__(self, "x_min", -n_left * dx)
        object.__setattr__(self, "x_max", (self.n_x - n_left) * dx)

    @property
    def dx(self) -> float:
        return (self.x_max - self.x_min) / self.n_x

    @property
    def dxi(self) -> float:
        return 1.0 / self.n_xi

    @property
    def n_left(self) -> int:
        """Number of cells left of x=0."""
        return int(round(-self.x_min / self.dx))

    @property
    def x(self) -> np.ndarray:
        return self.x_min + (np.arange(self.n_x) + 0.5) * self.dx

    @property
    def x_faces(self) -> np.ndarray:
        return self.x_min + np.arange(self.n_x + 1) * self.dx

    @property
    def xi(self) -> np.ndarray:
        return (np.arange(self.n_xi) + 0.5) * self.dxi

    @property
    def xi_faces(self) -> np.ndarray:
        return np.arange(self.n_xi + 1) * self.dxi


@dataclass(frozen=True, eq=False)
class KineticDensity:
    """f on the grid as cell averages in both x and xi."""

    values: np.ndarray
    grid: Grid

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != (self.grid.n_x, self.grid.n_xi):
            raise ValueError(f"values shape {v.shape} does not match grid "
                             f"({self.grid.n_x}, {self.grid.n_xi})")
        object.__setattr__(self, "values", v)

    def moments(self) -> np.ndarray:
        return self.grid.dxi * self.values.sum(axis=1)

    def with_values(self, values) -> "KineticDensity":
        return KineticDensity(values, self.grid)


@dataclass(frozen=True, eq=False)
class MacroField:
    """The macroscopic unknown u as x-cell averages."""

    values: np.ndarray
    grid: Grid

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != (self.grid.n_x,):
            raise ValueError(f"values shape {v.shape} does not match n_x={self.grid.n_x}")
        object.__setattr__(self, "values", v)

    def l1(self) -> float:
        return self.grid.dx * float(np.abs(self.values).sum())

    @classmethod
    def riemann(cls, u_left: float, u_right: float, grid: Grid, x0: float = 0.0):
        return cls(np.where(grid.x < x0, u_left, u_right), grid)

    @classmethod
    def from_function(cls, fn, grid: Grid):
        return cls(np.asarray(fn(grid.x), dtype=float) * np.ones(grid.n_x), grid)


# ---------------------------------------------------------------------------
# Equilibrium and moments
# ---------------------------------------------------------------------------

def chi(u, grid: Grid) -> np.ndarray:
    """Cell averages of the equilibrium function chi_u over the xi cells.

    Entry j is ``|[xi_{j-1/2}, xi_{j+1/2}] cap [0, u]| / dxi``.  A scalar
    ``u`` gives a column of length ``n_xi``; an array of shape ``s`` gives
    shape ``s + (n_xi,)``.  On the truncated xi domain a negative ``u``
    yields zeros and ``u > 1`` saturates at ones.
    """
    u = np.asarray(u, dtype=float)
    lo = grid.xi_faces[:-1]
    return np.clip(u[..., None] - lo, 0.0, grid.dxi) / grid.dxi


def moment(f: KineticDensity, i: int | None = None):
    """``dxi * sum_j f[i, j]``; all cells when ``i`` is None."""
    if i is None:
        return f.moments()
    return f.grid.dxi * float(f.values[i].sum())


def equilibrium(u: MacroField) -> KineticDensity:
    return KineticDensity(chi(u.values, u.grid), u.grid)


def kinetic_flux(u, grid: Grid, vel: VelocityModel):
    """Flux ``dxi * sum_j a(xi_j) chi(u)_j`` carried by an equilibrium on the xi grid.

    This is the discrete counterpart of ``A(u)``; it differs from it by the
    midpoint-rule error on the xi cell that contains ``u``.
    """
    return grid.dxi * (chi(u, grid) * vel.a(grid.xi)).sum(axis=-1)
