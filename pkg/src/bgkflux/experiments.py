"""Experiment harness: configuration, BGK-vs-reference runs, ladders, verification.

Configuration files are flat ``key = value`` text with dotted section
prefixes, for example::

    coefficient.k_left = 1
    coefficient.k_right = 2
    initial.kind = riemann
    initial.u_left = 1
    initial.u_right = 0
    grid.n_x = 256
    bgk.eps = 0.02

Blank lines and ``#`` comments are ignored.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path
from typing import Any, Callable, Optional

import numpy as np

from .bgk import BgkConfig, Trajectory, bgk_run, equilibrium_distance
from .kinetic_analysis import (NONNEG_TOL, TestFunctionFamily, compare_plus, defect_mass,
                               defect_measure, interface_correction, kinetic_residual,
                               write_defect_csv, write_residuals_csv)
from .model import (Coefficient, Grid, KineticDensity, MacroField, VelocityModel,
                    build_velocity, chi, kinetic_flux)
from .reference import FvConfig, box_average, fv_run, riemann_profile

REFERENCE_REFINEMENT = 4


class ConfigError(ValueError):
    pass


# key in file -> (attribute, converter)
_KEYS: dict[str, tuple[str, Callable]] = {
    "coefficient.k_left": ("k_left", float),
    "coefficient.k_right": ("k_right", float),
    "velocity.kind": ("velocity", str),
    "velocity.table": ("velocity_table", str),
    "initial.kind": ("initial_kind", str),
    "initial.u_left": ("u_left", float),
    "initial.u_right": ("u_right", float),
    "initial.value": ("u_value", float),
    "initial.half_width": ("half_width", float),
    "initial.table": ("initial_table", str),
    "initial.f0": ("f0_kind", str),
    "grid.n_x": ("n_x", int),
    "grid.n_xi": ("n_xi", int),
    "grid.x_min": ("x_min", float),
    "grid.x_max": ("x_max", float),
    "bgk.eps": ("eps", float),
    "bgk.dt": ("dt", float),
    "bgk.splitting": ("splitting", str),
    "bgk.t_final": ("t_final", float),
    "reference.cfl": ("cfl", float),
    "reference.flux_kind": ("flux_kind", str),
    "reference.width_ratio": ("width_ratio", float),
    "outputs.directory": ("out_dir", str),
    "outputs.snapshots": ("n_snapshots", int),
    "seed": ("seed", int),
}
_ATTR_TO_KEY = {attr: key for key, (attr, _) in _KEYS.items()}


@dataclass(frozen=True)
class ExperimentConfig:
    k_left: float = 1.0
    k_right: float = 1.0
    velocity: str = "burgers"
    velocity_table: Optional[str] = None
    initial_kind: str = "riemann"          # riemann | constant | plateau | table
    u_left: float = 1.0
    u_right: float = 0.0
    u_value: float = 0.5
    half_width: float = 1.0
    initial_table: Optional[str] = None
    f0_kind: str = "equilibrium"           # equilibrium | flat
    n_x: int = 256
    n_xi: int = 32
    x_min: float = -2.0
    x_max: float = 2.0
    eps: float = 0.02
    dt: Optional[float] = None
    splitting: str = "strang"
    t_final: float = 0.5
    cfl: float = 0.9
    flux_kind: str = "engquist_osher"
    width_ratio: float = 2.0
    out_dir: str = "out"
    n_snapshots: int = 32
    seed: int = 0

    def __post_init__(self):
        self.validate()

    def _fail(self, attr: str, msg: str):
        raise ConfigError(f"{_ATTR_TO_KEY.get(attr, attr)}: {msg}")

    def validate(self) -> None:
        if not self.k_left * self.k_right > 0:
            self._fail("k_left", f"k_left * k_right must be > 0 "
                                 f"(got {self.k_left}, {self.k_right})")
        if self.velocity not in ("burgers", "table"):
            self._fail("velocity", f"unknown velocity kind {self.velocity!r}")
        if self.velocity == "table" and not self.velocity_table:
            self._fail("velocity_table", "required when velocity.kind = table")
        if self.initial_kind not in ("riemann", "constant", "plateau", "table"):
            self._fail("initial_kind", f"unknown initial kind {self.initial_kind!r}")
        if self.initial_kind == "table" and not self.initial_table:
            self._fail("initial_table", "required when initial.kind = table")
        for attr in ("u_left", "u_right", "u_value"):
            v = getattr(self, attr)
            if not 0 <= v <= 1:
                self._fail(attr, f"must lie in [0, 1], got {v}")
        if self.f0_kind not in ("equilibrium", "flat"):
            self._fail("f0_kind", f"unknown f0 kind {self.f0_kind!r}")
        if self.n_x < 2:
            self._fail("n_x", "must be >= 2")
        if self.n_xi < 1:
            self._fail("n_xi", "must be >= 1")
        if not self.x_min < 0 < self.x_max:
            self._fail("x_min", f"need x_min < 0 < x_max, got [{self.x_min}, {self.x_max}]")
        if not self.eps > 0:
            self._fail("eps", "must be positive")
        if self.dt is not None and not 0 < self.dt <= self.t_final:
            self._fail("dt", "must lie in (0, t_final]")
        if self.splitting not in ("lie", "strang"):
            self._fail("splitting", f"unknown splitting {self.splitting!r}")
        if not self.t_final > 0:
            self._fail("t_final", "must be positive")
        if not 0 < self.cfl <= 1:
            self._fail("cfl", "must lie in (0, 1]")
        if self.flux_kind not in ("engquist_osher", "godunov"):
            self._fail("flux_kind", f"unknown flux kind {self.flux_kind!r}")
        if self.width_ratio < 1:
            self._fail("width_ratio", "must be >= 1")
        if self.n_snapshots < 1:
            self._fail("n_snapshots", "must be >= 1")
        # cone condition keeps the domain of dependence inside the grid
        dx = (self.x_max - self.x_min) / self.n_x
        need = self.max_speed() * self.t_final + 4 * dx
        if not (-self.x_min > need and self.x_max > need):
            self._fail("x_min", f"domain [{self.x_min}, {self.x_max}] violates the cone "
                                f"condition |x_min|, x_max > M t_final + 4 dx = {need:.4g}")

    def max_speed(self) -> float:
        if self.velocity == "burgers":
            amax = 1.0
        else:
            amax = self.build_velocity().max_speed
        return max(abs(self.k_left), abs(self.k_right)) * amax

    # -- builders ---------------------------------------------------------
    def coefficient(self) -> Coefficient:
        return Coefficient(self.k_left, self.k_right)

    def build_velocity(self) -> VelocityModel:
        return build_velocity("burgers" if self.velocity == "burgers" else self.velocity_table)

    def grid(self) -> Grid:
        return Grid(self.x_min, self.x_max, self.n_x, self.n_xi)

    def bgk_config(self) -> BgkConfig:
        return BgkConfig(self.eps, self.splitting, self.dt, self.t_final, self.n_snapshots)

    def fv_config(self) -> FvConfig:
        return FvConfig(self.cfl, self.flux_kind, self.width_ratio)

    def initial(self, grid: Grid) -> MacroField:
        return MacroField(initial_cell_averages(self, grid.x_faces), grid)

    def initial_density(self, u0: MacroField) -> KineticDensity:
        g = u0.grid
        if self.f0_kind == "equilibrium":
            return KineticDensity(chi(u0.values, g), g)
        return KineticDensity(np.repeat(u0.values[:, None], g.n_xi, axis=1), g)

    def to_mapping(self) -> dict[str, Any]:
        return {_ATTR_TO_KEY[k]: v for k, v in asdict(self).items() if v is not None}


def initial_cell_averages(cfg: ExperimentConfig, faces: np.ndarray, sub: int = 64) -> np.ndarray:
    """Cell averages of the configured initial datum on cells bounded by ``faces``."""
    kind = cfg.initial_kind
    lo, hi = faces[:-1], faces[1:]
    if kind == "constant":
        return np.full(len(lo), cfg.u_value)
    if kind == "riemann":
        # x=0 is always a face, so cells are never cut
        return np.where(0.5 * (lo + hi) < 0, cfg.u_left, cfg.u_right).astype(float)
    if kind == "plateau":
        w = cfg.half_width
        overlap = np.clip(np.minimum(hi, w) - np.maximum(lo, -w), 0.0, None)
        return cfg.u_value * overlap / (hi - lo)
    xs, us = _load_initial_table(cfg.initial_table)
    pts = lo[:, None] + (hi - lo)[:, None] * (np.arange(sub) + 0.5) / sub
    return np.interp(pts, xs, us).mean(axis=1)


def _load_initial_table(path) -> tuple[np.ndarray, np.ndarray]:
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    xs, us = data[:, 0], data[:, 1]
    if np.any(np.diff(xs) <= 0):
        raise ConfigError(f"initial.table: x column of {path} must be strictly increasing")
    if np.any(us < 0) or np.any(us > 1):
        raise ConfigError(f"initial.table: u values in {path} must lie in [0, 1]")
    return xs, us


def parse_config(text: str, base: ExperimentConfig | None = None) -> ExperimentConfig:
    values: dict[str, Any] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, val = (s.strip() for s in line.split("=", 1))
        if key not in _KEYS:
            raise ConfigError(f"{key}: unknown configuration key (line {lineno})")
        attr, conv = _KEYS[key]
        try:
            values[attr] = None if val.lower() in ("", "none", "auto") else conv(val)
        except ValueError as exc:
            raise ConfigError(f"{key}: cannot parse {val!r} ({exc})") from None
    return replace(base or ExperimentConfig(), **values)


def load_config(path) -> ExperimentConfig:
    cfg = parse_config(Path(path).read_text())
    # relative table paths resolve against the config file
    root = Path(path).resolve().parent
    updates = {}
    for attr in ("velocity_table", "initial_table"):
        p = getattr(cfg, attr)
        if p and not Path(p).is_absolute():
            updates[attr] = str(root / p)
    return replace(cfg, **updates) if updates else cfg


def format_config(cfg: ExperimentConfig) -> str:
    return "".join(f"{k} = {v}\n" for k, v in cfg.to_mapping().items())


# ---------------------------------------------------------------------------
# reports
# ---------------------------------------------------------------------------

@dataclass
class Check:
    name: str
    anchor: str
    value: float
    bound: float
    passed: bool
    detail: str = ""

    def as_dict(self) -> dict:
        return {"name": self.name, "anchor": self.anchor, "value": _num(self.value),
                "bound": _num(self.bound), "pass": bool(self.passed), "detail": self.detail}


def _num(v):
    v = float(v)
    return v if math.isfinite(v) else str(v)


def check_le(name: str, anchor: str, value: float, bound: float, detail: str = "") -> Check:
    return Check(name, anchor, float(value), float(bound), bool(value <= bound), detail)


def check_ge(name: str, anchor: str, value: float, bound: float, detail: str = "") -> Check:
    return Check(name, anchor, float(value), float(bound), bool(value >= bound), detail)


def write_report(path, command: str, checks: list[Check], metrics: dict | None = None,
                 config: ExperimentConfig | None = None) -> dict:
    report = {
        "command": command,
        "all_pass": all(c.passed for c in checks),
        "checks": [c.as_dict() for c in checks],
        "metrics": {k: _jsonable(v) for k, v in (metrics or {}).items()},
    }
    if config is not None:
        report["config"] = config.to_mapping()
    if path is not None:
        Path(path).write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    return report


def _jsonable(v):
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    if isinstance(v, (float, np.floating, int, np.integer)) and not isinstance(v, bool):
        return _num(v) if isinstance(v, (float, np.floating)) else int(v)
    return v


def write_macro_csv(path, times: np.ndarray, x: np.ndarray, u: np.ndarray) -> None:
    tt = np.repeat(times, len(x))
    xx = np.tile(x, len(times))
    np.savetxt(path, np.column_stack([tt, xx, u.ravel()]), delimiter=",",
               header="t,x,u", comments="", fmt="%.17g")


def write_kinetic_csv(path, traj: Trajectory) -> None:
    g = traj.grid
    nt, nx, nxi = traj.f.shape
    tt = np.repeat(traj.times, nx * nxi)
    xx = np.tile(np.repeat(g.x, nxi), nt)
    ss = np.tile(g.xi, nt * nx)
    np.savetxt(path, np.column_stack([tt, xx, ss, traj.f.ravel()]), delimiter=",",
               header="t,x,xi,f", comments="", fmt="%.17g")


def write_table_csv(path, rows: list[dict]) -> None:
    if not rows:
        return
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(rows[0]))
        w.writeheader()
        for r in rows:
            w.writerow({k: repr(float(v)) if isinstance(v, (float, np.floating)) else v
                        for k, v in r.items()})


# ---------------------------------------------------------------------------
# single experiment
# ---------------------------------------------------------------------------

def reference_solution(cfg: ExperimentConfig, grid: Grid, times: np.ndarray,
                       vel: VelocityModel) -> tuple[np.ndarray, str]:
    """Reference u on ``grid`` at ``times``: analytic or fine-grid finite volumes.

    Continuous k with Riemann data and a strictly concave flux uses the
    exact Riemann solution (cell averages by sub-sampling).  Otherwise the
    monotone scheme runs at 4x resolution and is box-averaged down.
    """
    coeff = cfg.coefficient()
    if (coeff.is_continuous and cfg.initial_kind == "riemann" and coeff.k_left > 0
            and vel.is_strictly_concave and cfg.f0_kind == "equilibrium"):
        sub = 64
        pts = (grid.x_faces[:-1, None]
               + grid.dx * (np.arange(sub) + 0.5)[None, :] / sub)
        out = np.stack([riemann_profile(cfg.u_left, cfg.u_right, coeff.k_left, vel, pts, t)
                        .mean(axis=1) for t in times])
        return out, "riemann_exact"
    fine = Grid(grid.x_min, grid.x_max, REFERENCE_REFINEMENT * grid.n_x, grid.n_xi)
    u0 = MacroField(initial_cell_averages(cfg, fine.x_faces), fine)
    tr = fv_run(u0, cfg.fv_config(), coeff, vel, float(times[-1]), snapshot_times=times)
    return box_average(tr.u, REFERENCE_REFINEMENT), "fv_run_4x"


def l1_q_error(u: np.ndarray, u_ref: np.ndarray, times: np.ndarray, dx: float) -> float:
    """Time-averaged ``(1/T) int_0^T ||u - u_ref||_{L1} dt`` (trapezoid over snapshots)."""
    per_t = dx * np.abs(u - u_ref).sum(axis=1)
    return float(np.trapezoid(per_t, times)) / float(times[-1] - times[0])


def boundary_mass_rate(cfg: ExperimentConfig, vel: VelocityModel) -> float:
    """Net kinetic inflow rate through the domain ends for equilibrium data
    constant near the ends."""
    g = cfg.grid()
    u = initial_cell_averages(cfg, g.x_faces)
    return (cfg.k_left * float(kinetic_flux(u[0], g, vel))
            - cfg.k_right * float(kinetic_flux(u[-1], g, vel)))


@dataclass
class RunResult:
    traj: Trajectory
    u_ref: np.ndarray
    reference_kind: str
    metrics: dict
    checks: list[Check]
    residuals: list[tuple[str, str, float]]


def run_experiment(cfg: ExperimentConfig, out_dir=None, index: int = 0,
                   residuals: bool = True, write_kinetic: bool = True,
                   tests: TestFunctionFamily | None = None) -> RunResult:
    """BGK run plus reference, diagnostics and (optionally) report files.

    ``tests`` defaults to the standard family built on this run's grid.
    """
    coeff, vel, grid = cfg.coefficient(), cfg.build_velocity(), cfg.grid()
    u0 = cfg.initial(grid)
    f0 = cfg.initial_density(u0)
    traj = bgk_run(u0, cfg.bgk_config(), coeff, vel, f0=f0, strict=False)
    u_ref, ref_kind = reference_solution(cfg, grid, traj.times, vel)
    m = defect_measure(traj, check=False)
    mass0 = u0.l1()
    tol = 10 * (grid.dx + traj.dt)

    metrics = {
        "dx": grid.dx, "dt": traj.dt, "eps": cfg.eps,
        "l1_error": l1_q_error(traj.u, u_ref, traj.times, grid.dx),
        "reference": ref_kind,
        "equilibrium_distance_final": equilibrium_distance(traj.density(-1)),
        "defect_mass": defect_mass(m),
        "defect_min": m.min_value,
        "u0_l1": mass0,
        "f_min": traj.f_min, "f_max": traj.f_max,
        "u_min": traj.u_min, "u_max": traj.u_max,
    }
    mid = int(np.argmin(np.abs(traj.times - 0.5 * cfg.t_final)))
    metrics["u_mid_at_interface"] = float(0.5 * (traj.u[mid, grid.n_left - 1]
                                                 + traj.u[mid, grid.n_left]))
    expected = boundary_mass_rate(cfg, vel) * cfg.t_final
    drift = abs(grid.dx * (traj.u[-1].sum() - traj.u[0].sum()) - expected)
    metrics["mass_balance_error"] = drift

    excursion = max(-traj.f_min, traj.f_max - 1, -traj.u_min, traj.u_max - 1, 0.0)
    checks = [
        check_le("invariant_region", "invariant region 0 <= f <= 1", excursion, 1e-12,
                 f"f in [{traj.f_min:.6g}, {traj.f_max:.6g}]"),
        check_ge("defect_nonnegative", "nonnegative collision defect", m.min_value, -NONNEG_TOL),
        check_le("defect_mass_bound", "uniform defect-mass estimate",
                 metrics["defect_mass"], mass0 + tol),
        check_le("mass_balance", "conservation up to boundary flux", drift, 1e-9),
    ]

    res_rows: list[tuple[str, str, float]] = []
    if residuals:
        fam = tests or TestFunctionFamily.standard(cfg.t_final, grid.dx,
                                                   length=_test_length(grid))
        for sign in ("plus", "minus"):
            atom = interface_correction(m, coeff, vel, sign, convention="weak")
            for tf, r in zip(fam, kinetic_residual(traj, atom, fam, sign)):
                res_rows.append((tf.test_id, sign, r))
        metrics["residual_max"] = max(abs(r) for _, _, r in res_rows)

    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        write_macro_csv(out / f"macro_{index}.csv", traj.times, grid.x, traj.u)
        if write_kinetic:
            write_kinetic_csv(out / f"kinetic_{index}.csv", traj)
        write_defect_csv(out / "defect.csv", m)
        if residuals:
            write_residuals_csv(out / "residuals.csv", res_rows)
        write_report(out / "report.json", "run", checks, metrics, cfg)
    return RunResult(traj, u_ref, ref_kind, metrics, checks, res_rows)


def _test_length(grid: Grid) -> float:
    """Space scale of the test family: fits comfortably inside the domain."""
    return min(1.0, 0.5 * min(-grid.x_min, grid.x_max))


# ---------------------------------------------------------------------------
# ladders
# ---------------------------------------------------------------------------

def loglog_slope(h, e) -> float:
    h, e = np.asarray(h, dtype=float), np.asarray(e, dtype=float)
    return float(np.polyfit(np.log(h), np.log(e), 1)[0])


def converge_eps(cfg: ExperimentConfig, eps_ladder, out_dir=None) -> tuple[list[dict], list[Check]]:
    """Fixed grid, decreasing eps: error, equilibrium distance and defect mass per rung."""
    ladder = [float(e) for e in eps_ladder]
    if len(ladder) < 4 or any(b >= a for a, b in zip(ladder, ladder[1:])):
        raise ConfigError("eps ladder must be strictly decreasing with at least 4 entries")
    rows = []
    for i, eps in enumerate(ladder):
        r = run_experiment(replace(cfg, eps=eps), residuals=False)
        mt = r.metrics
        rows.append({"eps": eps, "dx": mt["dx"], "dt": mt["dt"], "l1_error": mt["l1_error"],
                     "equilibrium_distance": mt["equilibrium_distance_final"],
                     "defect_mass": mt["defect_mass"],
                     "defect_bound": mt["u0_l1"] + 10 * (mt["dx"] + mt["dt"]),
                     "u0_l1": mt["u0_l1"]})
        if out_dir is not None:
            Path(out_dir).mkdir(parents=True, exist_ok=True)
            write_macro_csv(Path(out_dir) / f"macro_{i}.csv", r.traj.times, r.traj.grid.x,
                            r.traj.u)
    eq_slope = loglog_slope([r["eps"] for r in rows], [r["equilibrium_distance"] for r in rows])
    err = [r["l1_error"] for r in rows]
    worst_rise = max(b / a - 1.0 for a, b in zip(err, err[1:])) if err[0] > 0 else 0.0
    checks = [
        check_ge("equilibrium_distance_slope", "distance to equilibrium is O(eps)",
                 eq_slope, 0.8),
        check_le("l1_error_monotone", "relaxation limit (convergence in eps)",
                 worst_rise, 0.05, "largest relative increase between rungs"),
    ]
    for r in rows:
        checks.append(check_le(f"defect_mass_bound[eps={r['eps']:g}]",
                               "uniform defect-mass estimate", r["defect_mass"],
                               r["defect_bound"]))
    if out_dir is not None:
        write_table_csv(Path(out_dir) / "converge_eps.csv", rows)
        write_report(Path(out_dir) / "report.json", "converge-eps", checks,
                     {"equilibrium_distance_slope": eq_slope,
                      "l1_error_slope": loglog_slope(ladder, np.maximum(err, 1e-300))}, cfg)
    return rows, checks


def converge_grid(cfg: ExperimentConfig, levels: int = 3, out_dir=None
                  ) -> tuple[list[dict], list[Check]]:
    """Simultaneous refinement of dx, dt and eps (each halved per level).

    The test family (including the cut-off widths ``eta``) is built once on
    the coarsest grid and held fixed.  The residual constant
    ``C = max|residual| / (dx + dt + eps)`` is fixed at the coarsest level;
    every finer level must stay within it.
    """
    if levels < 2:
        raise ConfigError("converge-grid needs at least 2 levels")
    g0 = cfg.grid()
    fam = TestFunctionFamily.standard(cfg.t_final, g0.dx, length=_test_length(g0))
    rows, prev_u = [], None
    for lev in range(levels):
        c = replace(cfg, n_x=cfg.n_x * 2 ** lev, eps=cfg.eps / 2 ** lev,
                    dt=None if cfg.dt is None else cfg.dt / 2 ** lev,
                    n_snapshots=cfg.n_snapshots * 2 ** lev)
        r = run_experiment(c, residuals=True, tests=fam)
        scale = r.metrics["dx"] + r.metrics["dt"] + c.eps
        row = {"level": lev, "n_x": c.n_x, "eps": c.eps, "dx": r.metrics["dx"],
               "dt": r.metrics["dt"], "scale": scale, "l1_error": r.metrics["l1_error"],
               "residual_max": r.metrics["residual_max"]}
        if prev_u is not None:
            # Cauchy difference against the previous level, on the coarse grid
            row["cauchy_l1"] = (r.traj.grid.dx * 2) * float(
                np.abs(box_average(r.traj.u[-1], 2) - prev_u).sum())
        else:
            row["cauchy_l1"] = float("nan")
        prev_u = r.traj.u[-1]
        rows.append(row)
        if out_dir is not None:
            Path(out_dir).mkdir(parents=True, exist_ok=True)
            write_macro_csv(Path(out_dir) / f"macro_{lev}.csv", r.traj.times,
                            r.traj.grid.x, r.traj.u)
            write_residuals_csv(Path(out_dir) / f"residuals_{lev}.csv", r.residuals)
    C = rows[0]["residual_max"] / rows[0]["scale"]
    checks = [check_le(f"kinetic_residual[level={r['level']}]",
                       "kinetic formulation with interface term",
                       r["residual_max"], C * r["scale"], f"C={C:.4g} from the coarsest level")
              for r in rows[1:]]
    if out_dir is not None:
        write_table_csv(Path(out_dir) / "converge_grid.csv", rows)
        write_report(Path(out_dir) / "report.json", "converge-grid", checks, {"C": C}, cfg)
    return rows, checks
