"""Parameter sweeps over the crack model and the table rows they produce."""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .direct_imaging import QuadratureGrid, chernoff_di_detail, fim_di_detail
from .errors import ConfigError, SingularInformation, SurfaceLimitsError
from .hypothesis import chernoff_ms, embed_states, qcb, qcb_fidelity_bound
from .modesort import ModeBasis, fim_ms, fim_ms_contributions, scene_probabilities
from .qfim import crb, qfim_reduced, reparametrize
from .scenes import CRACK_PARAMS, DEFAULT_KZR, crack, crack_jacobian, flat_surface

TASKS = ("crb", "chernoff", "fim-modes")
VARIABLES = ("delta_x", "delta_z")
_VAR_ALIASES = {"dx": "delta_x", "dz": "delta_z", "delta_x": "delta_x", "delta_z": "delta_z"}

STATUS_OK = "ok"


@dataclass(frozen=True)
class SweepSpec:
    variable: str
    lo: float
    hi: float
    points: int
    fixed: float
    task: str = "crb"
    scale: str = "linear"
    kzr: float = DEFAULT_KZR
    max_order: int = 10
    quad_tol: float = 1e-10

    def __post_init__(self):
        var = _VAR_ALIASES.get(str(self.variable))
        if var is None:
            raise ConfigError(f"sweep variable must be one of dx, dz; got {self.variable!r}")
        object.__setattr__(self, "variable", var)
        if self.task not in TASKS:
            raise ConfigError(f"task must be one of {TASKS}; got {self.task!r}")
        if self.scale not in ("linear", "log"):
            raise ConfigError(f"scale must be linear or log; got {self.scale!r}")
        if not (isinstance(self.points, int) and self.points >= 2):
            raise ConfigError("points must be an integer >= 2")
        if not all(math.isfinite(v) for v in (self.lo, self.hi, self.fixed)):
            raise ConfigError("range and fixed value must be finite")
        if not self.lo < self.hi:
            raise ConfigError(f"need lo < hi; got [{self.lo}, {self.hi}]")
        if self.lo < 0 or self.fixed < 0:
            raise ConfigError("crack width and depth must be non-negative")
        if self.scale == "log" and self.lo <= 0:
            raise ConfigError("log scale needs lo > 0")
        if not self.kzr > 0:
            raise ConfigError("kzr must be positive")
        if self.max_order < 0:
            raise ConfigError("modes max order must be non-negative")
        if not self.quad_tol > 0:
            raise ConfigError("quad_tol must be positive")

    def values(self) -> np.ndarray:
        if self.scale == "log":
            return np.geomspace(self.lo, self.hi, self.points)
        return np.linspace(self.lo, self.hi, self.points)

    def points_dxdz(self) -> list[tuple[float, float]]:
        if self.variable == "delta_x":
            return [(float(v), float(self.fixed)) for v in self.values()]
        return [(float(self.fixed), float(v)) for v in self.values()]


@dataclass
class ResultRow:
    delta_x: float
    delta_z: float
    outputs: dict[str, float] = field(default_factory=dict)
    errors: dict[str, float] = field(default_factory=dict)
    status: str = STATUS_OK

    def as_dict(self, columns: list[str]) -> dict:
        out = {"dx": self.delta_x, "dz": self.delta_z}
        for c in columns:
            out[c] = self.outputs.get(c, self.errors.get(c, math.nan))
        out["status"] = self.status
        return out


def _crb_diag(info) -> tuple[float, float]:
    c = crb(info)
    return float(c[0, 0]), float(c[1, 1])


def crb_row(dx, dz, kzr, basis, grid) -> ResultRow:
    row = ResultRow(dx, dz)
    sc = crack(dx, dz, kzr)
    jac = crack_jacobian()
    params = list(CRACK_PARAMS)
    notes = []
    h = reparametrize(qfim_reduced(sc, params), jac)
    j_ms = fim_ms(sc, basis, params, jacobian=jac)
    di = fim_di_detail(sc, params, grid, jacobian=jac)
    for tag, info in (("q", h), ("ms", j_ms), ("di", di.fisher)):
        try:
            row.outputs[f"crb_{tag}_dx"], row.outputs[f"crb_{tag}_dz"] = _crb_diag(info)
        except SingularInformation:
            row.outputs[f"crb_{tag}_dx"] = row.outputs[f"crb_{tag}_dz"] = math.nan
            notes.append(f"singular_{tag}")
    row.errors["err_di"] = di.error
    if notes:
        row.status = ";".join(notes)
    return row


def chernoff_row(dx, dz, kzr, basis, grid) -> ResultRow:
    row = ResultRow(dx, dz)
    xi_q, s_q = qcb(embed_states(dx, dz, kzr))
    xi_ms, _ = chernoff_ms(dx, dz, kzr, basis)
    di = chernoff_di_detail(flat_surface(dx, kzr), crack(dx, dz, kzr), grid)
    row.outputs.update(xi_q=xi_q, s_q=s_q, xi_ms=xi_ms, xi_di=di.xi,
                       fid_bound=qcb_fidelity_bound(dx, dz, kzr))
    row.errors["err_di"] = di.error
    return row


def mode_columns(basis: ModeBasis) -> list[str]:
    cols = []
    for m in basis.modes:
        cols += [f"p_{m.j}_{m.l}", f"fim_dx_{m.j}_{m.l}", f"fim_dz_{m.j}_{m.l}"]
    return cols


def mode_contributions(dx, dz, kzr, basis):
    """Per-mode (probability, width FIM, depth FIM), in basis order."""
    sc = crack(dx, dz, kzr)
    jac = crack_jacobian().matrix
    contrib = fim_ms_contributions(sc, basis, list(CRACK_PARAMS))
    probs = scene_probabilities(sc, basis)
    out = []
    for m in basis.modes:
        f = jac @ contrib[m] @ jac.T
        out.append((m, float(probs[m.j, m.l]), float(f[0, 0]), float(f[1, 1]), float(f[0, 1])))
    return out


def modes_row(dx, dz, kzr, basis, grid) -> ResultRow:
    row = ResultRow(dx, dz)
    for m, p, fx, fz, _ in mode_contributions(dx, dz, kzr, basis):
        row.outputs[f"p_{m.j}_{m.l}"] = p
        row.outputs[f"fim_dx_{m.j}_{m.l}"] = fx
        row.outputs[f"fim_dz_{m.j}_{m.l}"] = fz
    return row


_ROW_FUNCS = {"crb": crb_row, "chernoff": chernoff_row, "fim-modes": modes_row}


def task_columns(task: str, basis: ModeBasis) -> list[str]:
    if task == "crb":
        return [f"crb_{t}_{p}" for t in ("q", "ms", "di") for p in ("dx", "dz")] + ["err_di"]
    if task == "chernoff":
        return ["xi_q", "s_q", "xi_ms", "xi_di", "fid_bound", "err_di"]
    return mode_columns(basis)


def _eval_point(args) -> ResultRow:
    task, dx, dz, kzr, max_order, quad_tol = args
    basis = ModeBasis(max_order)
    grid = QuadratureGrid(target_tol=quad_tol)
    try:
        return _ROW_FUNCS[task](dx, dz, kzr, basis, grid)
    except (SurfaceLimitsError, ValueError, np.linalg.LinAlgError) as exc:
        return ResultRow(dx, dz, status=f"error:{type(exc).__name__}")


def run_sweep(spec: SweepSpec, workers: int = 1) -> list[ResultRow]:
    """Evaluate every grid point; failures become sentinel rows (NaN outputs)."""
    if not isinstance(spec, SweepSpec):
        raise ConfigError("run_sweep expects a SweepSpec")
    jobs = [(spec.task, dx, dz, spec.kzr, spec.max_order, spec.quad_tol) for dx, dz in spec.points_dxdz()]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_eval_point, jobs))  # map keeps input order
    return [_eval_point(j) for j in jobs]


def point_table(task: str, dx: float, dz: float, kzr: float, max_order: int, quad_tol: float) -> ResultRow:
    return _eval_point((task, dx, dz, kzr, max_order, quad_tol))
