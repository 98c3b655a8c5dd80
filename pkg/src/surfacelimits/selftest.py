"""Quick invariant checks run by ``surfacelimits selftest``."""

from __future__ import annotations

import numpy as np

from .direct_imaging import chernoff_di, fim_di, intensity, QuadratureGrid
from .hypothesis import embed_states, fidelity_matrix, fidelity_trace_norm, qcb, qcb_fidelity_bound
from .modesort import ModeBasis, fim_ms
from .psf_gram import Axis, ParamIndex, PointSource, Scene
from .qfim import qfim_embedding_oracle, qfim_general, qfim_reduced, reparametrize
from .scenes import CRACK_PARAMS, crack, crack_jacobian, flat_surface


def _rel(a, b):
    return float(np.linalg.norm(a - b) / max(np.linalg.norm(b), 1e-300))


def _single_source():
    sc = Scene([PointSource(0.3, -0.1, 0.2)])
    h = qfim_reduced(sc, sc.all_params()).matrix
    return abs(h[0, 0] - 2.0) < 1e-9 and abs(h[2, 2] - 1.0) < 1e-9, "H = diag(%s)" % ", ".join(f"{v:.12g}" for v in np.diag(h))


def _routes():
    rng = np.random.default_rng(7)
    worst = 0.0
    for kzr in (10.0, 100.0, 1000.0):
        sc = Scene([PointSource(*rng.uniform(-2, 2, 3)) for _ in range(3)], kzr)
        ps = sc.all_params()
        a = qfim_reduced(sc, ps).matrix
        worst = max(worst, _rel(qfim_general(sc, ps).matrix, a), _rel(qfim_embedding_oracle(sc, ps).matrix, a))
    return worst < 1e-8, f"max relative difference {worst:.2e}"


def _separation():
    vals = []
    for d in (0.1, 1.0, 4.0):
        sc = Scene([PointSource(-d / 2), PointSource(d / 2)])
        f = qfim_embedding_oracle(sc, [ParamIndex(0, Axis.X), ParamIndex(1, Axis.X)]).matrix
        b = np.array([-1.0, 1.0])  # separation d = x2 - x1, centroid fixed
        vals.append(float(0.25 * b @ f @ b))
    return max(abs(v - 0.5) for v in vals) < 1e-6, "separation QFI " + ", ".join(f"{v:.12g}" for v in vals)


def _ordering():
    sc = crack(0.7, 0.4)
    jac = crack_jacobian()
    h = reparametrize(qfim_reduced(sc, list(CRACK_PARAMS)), jac).matrix
    ms = fim_ms(sc, ModeBasis(), list(CRACK_PARAMS), jacobian=jac).matrix
    di = fim_di(sc, list(CRACK_PARAMS), jacobian=jac).matrix
    lo = min(np.linalg.eigvalsh(h - ms).min(), np.linalg.eigvalsh(h - di).min())
    return lo > -1e-8, f"min eigenvalue of H - J = {lo:.2e}"


def _normalization():
    grid = QuadratureGrid()
    sc = crack(1.0, 2.0)
    r = grid.radius_for(sc)
    xs, ws = grid.nodes(r, 32)
    total = float((intensity(sc, xs[:, None], xs[None, :]) * ws[:, None] * ws[None, :]).sum())
    return abs(total - 1.0) < 1e-9, f"integral {total!r}"


def _chernoff_chain():
    dx, dz = 0.8, 0.5
    pair = embed_states(dx, dz)
    xi_q, _ = qcb(pair)
    f_direct = fidelity_matrix(pair.rho0.matrix, pair.rho1.matrix)
    f_tn = fidelity_trace_norm(dx, dz)
    xi_di, _ = chernoff_di(flat_surface(dx), crack(dx, dz))
    xi_back, _ = chernoff_di(crack(dx, dz), flat_surface(dx))
    ok = (abs(f_direct - f_tn) < 1e-9 and xi_q <= qcb_fidelity_bound(dx, dz) + 1e-9
          and 0 <= xi_di <= xi_q + 1e-9 and abs(xi_di - xi_back) < 1e-9)
    return ok, f"xi_q={xi_q:.6g} xi_di={xi_di:.6g} F={f_tn:.12f}"


CHECKS = [
    ("single-source QFIM", _single_source),
    ("three QFIM routes agree", _routes),
    ("two-source separation QFI", _separation),
    ("QFIM dominates MS and DI", _ordering),
    ("intensity normalization", _normalization),
    ("Chernoff and fidelity chain", _chernoff_chain),
]


def run_selftest(verbose: bool = False) -> bool:
    ok_all = True
    for name, fn in CHECKS:
        try:
            ok, detail = fn()
        except Exception as exc:  # report and continue
            ok, detail = False, f"{type(exc).__name__}: {exc}"
        ok_all &= bool(ok)
        line = f"[{'PASS' if ok else 'FAIL'}] {name}"
        print(line + (f"  ({detail})" if verbose or not ok else ""))
    return ok_all
