"""Crack-versus-flat hypothesis testing: QCB, fidelity bound and MS Chernoff."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .linalg import ZERO_EIG, golden_section, hermitize, psd_eigh, sqrtm_psd
from .modesort import ModeBasis, scene_probabilities
from .psf_gram import PointSource, gram_of_states, overlap_psi_psi
from .scenes import DEFAULT_KZR, crack, flat_surface

LABELS = ("L", "R", "C", "Z")
S_TOL = 1e-8


def _hypothesis_sources(delta_x: float, delta_z: float):
    return (
        PointSource(-delta_x / 2, 0.0, 0.0),
        PointSource(delta_x / 2, 0.0, 0.0),
        PointSource(0.0, 0.0, 0.0),
        PointSource(0.0, 0.0, -delta_z),
    )


def _check_inputs(delta_x: float, delta_z: float) -> None:
    if delta_x < 0 or delta_z < 0:
        raise ValueError("crack width and depth must be non-negative")


@dataclass(frozen=True)
class EmbeddedState:
    matrix: np.ndarray
    source_labels: tuple[str, ...]

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError("density matrix must be square")
        if np.abs(m - m.conj().T).max() > 1e-12:
            raise ValueError("density matrix is not Hermitian")
        if abs(np.trace(m).real - 1.0) > 1e-12:
            raise ValueError(f"density matrix trace {np.trace(m).real} != 1")
        if np.linalg.eigvalsh(m).min() < -1e-10:
            raise ValueError("density matrix is not PSD")
        object.__setattr__(self, "matrix", hermitize(m))


@dataclass(frozen=True)
class HypothesisPair:
    rho0: EmbeddedState
    rho1: EmbeddedState
    labels: tuple[str, ...] = LABELS

    def __post_init__(self):
        if self.rho0.matrix.shape != self.rho1.matrix.shape:
            raise ValueError("states must share one embedding")


@dataclass(frozen=True)
class OverlapTriple:
    alpha: complex  # <L|C>
    beta: complex  # <L|Z>
    gamma: complex  # <C|Z>
    alpha4: complex  # <L|R>


def overlap_triple(delta_x: float, delta_z: float, kzr: float = DEFAULT_KZR) -> OverlapTriple:
    lft, rgt, ctr, flr = _hypothesis_sources(delta_x, delta_z)
    return OverlapTriple(
        alpha=overlap_psi_psi(lft, ctr, kzr),
        beta=overlap_psi_psi(lft, flr, kzr),
        gamma=overlap_psi_psi(ctr, flr, kzr),
        alpha4=overlap_psi_psi(lft, rgt, kzr),
    )


def embed_states(delta_x: float, delta_z: float, kzr: float = DEFAULT_KZR) -> HypothesisPair:
    """Flat (L, R, C) and crack (L, R, Z) states in the span of all four PSFs."""
    _check_inputs(delta_x, delta_z)
    g = gram_of_states(_hypothesis_sources(delta_x, delta_z), kzr)
    a = sqrtm_psd(g)
    vl, vr, vc, vz = a.T
    def mix(*vs):
        return hermitize(sum(np.outer(v, v.conj()) for v in vs) / 3.0)
    rho0, rho1 = mix(vl, vr, vc), mix(vl, vr, vz)
    # renormalize the trace against eigenvalue clamping in sqrt(G)
    rho0 /= np.trace(rho0).real
    rho1 /= np.trace(rho1).real
    return HypothesisPair(
        EmbeddedState(rho0, ("L", "R", "C")),
        EmbeddedState(rho1, ("L", "R", "Z")),
    )


class _ChernoffObjective:
    """s -> Tr[rho0^s rho1^(1-s)] written as 1 - sum of nonnegative terms.

    With rho0 = sum l_i |u_i><u_i|, rho1 = sum m_j |v_j><v_j| and
    w_ij = |<u_i|v_j>|^2 (doubly stochastic on the full space),

        1 - Tr = sum_ij w_ij (s l_i + (1-s) m_j - l_i^s m_j^(1-s))

    and every summand is >= 0 by the weighted AM-GM inequality, so small
    exponents are not lost to cancellation. 0^s is 0 for every s, which
    makes the s = 0 value Tr[Pi_0 rho1] with Pi_0 the support projector.
    """

    def __init__(self, rho0: np.ndarray, rho1: np.ndarray, floor: float = ZERO_EIG):
        l, u = psd_eigh(rho0)
        m, v = psd_eigh(rho1)
        self.l = np.where(l < floor, 0.0, l)
        self.m = np.where(m < floor, 0.0, m)
        self.w = np.abs(u.conj().T @ v) ** 2

    def deficit(self, s: float) -> float:
        return _amgm_deficit(self.l[:, None], self.m[None, :], s, self.w)

    def __call__(self, s: float) -> float:
        return 1.0 - self.deficit(s)


def _amgm_deficit(p, q, s, weight=1.0) -> float:
    """sum weight * (s p + (1-s) q - p^s q^(1-s)), evaluated without cancellation."""
    p, q = np.broadcast_arrays(np.asarray(p, float), np.asarray(q, float))
    both = (p > 0) & (q > 0)
    lin = s * p + (1 - s) * q
    # for both > 0: q * [1 + s r - (1+r)^s] with r = p/q - 1
    safe_q = np.where(both, q, 1.0)
    r = np.where(both, (p - q) / safe_q, 0.0)
    core = safe_q * _one_plus_sr_minus_pow(r, s)
    terms = np.where(both, core, lin)
    return float((np.broadcast_to(weight, terms.shape) * terms).sum())


def _one_plus_sr_minus_pow(r, s):
    """1 + s r - (1 + r)^s, accurate for small r."""
    r = np.asarray(r, dtype=float)
    small = np.abs(r) < 1e-3
    rs = np.where(small, r, 0.0)
    # series: -sum_{n>=2} C(s, n) r^n
    c2 = s * (s - 1) / 2
    c3 = c2 * (s - 2) / 3
    c4 = c3 * (s - 3) / 4
    c5 = c4 * (s - 4) / 5
    series = -(c2 * rs**2 + c3 * rs**3 + c4 * rs**4 + c5 * rs**5)
    with np.errstate(invalid="ignore", divide="ignore"):
        direct = 1 + s * r - np.exp(s * np.log1p(np.where(small, 0.0, r)))
    return np.where(small, series, direct)


def chernoff_from_deficit(deficit, tol: float = S_TOL):
    """Maximize -log(1 - deficit(s)) over s in [0, 1]; returns (xi, s*)."""
    s_star, neg = golden_section(lambda s: -deficit(s), 0.0, 1.0, tol)
    d = -neg
    return float(-math.log1p(-d)) if d < 1 else math.inf, float(s_star)


def qcb_objective(pair: HypothesisPair) -> _ChernoffObjective:
    return _ChernoffObjective(pair.rho0.matrix, pair.rho1.matrix)


def qcb(pair: HypothesisPair):
    """Quantum Chernoff exponent -log min_s Tr[rho0^s rho1^(1-s)] and the minimizer."""
    obj = qcb_objective(pair)
    xi, s_star = chernoff_from_deficit(obj.deficit)
    return max(xi, 0.0), s_star


def fidelity_matrix(rho0: np.ndarray, rho1: np.ndarray, floor: float = ZERO_EIG) -> float:
    """Tr sqrt(sqrt(rho0) rho1 sqrt(rho0)), computed as ||sqrt(rho0) sqrt(rho1)||_1.

    Eigenvalues below ``floor`` are zeroed before the square roots; a
    round-off eigenvalue of 1e-17 would otherwise add ~3e-9 to F.
    """
    def root(m):
        w, u = psd_eigh(m)
        w = np.where(w < floor, 0.0, w)
        return (u * np.sqrt(w)) @ u.conj().T
    return float(np.linalg.svd(root(rho0) @ root(rho1), compute_uv=False).sum())


def trace_norm_2x2(a: np.ndarray) -> float:
    """||A||_1 = sqrt(Tr A^+ A + 2 |det A|) for a 2 x 2 matrix."""
    fro2 = float((np.abs(a) ** 2).sum())
    return math.sqrt(fro2 + 2.0 * abs(np.linalg.det(a)))


def parity_blocks(delta_x: float, delta_z: float, kzr: float = DEFAULT_KZR):
    """The weighted-overlap matrix in the parity ensemble, as (M1, M2)."""
    ov = overlap_triple(delta_x, delta_z, kzr)
    a4 = ov.alpha4.real
    m1 = (1.0 - a4) / 3.0
    m2 = np.array([[1.0 + a4, math.sqrt(2.0) * ov.beta],
                   [math.sqrt(2.0) * ov.alpha.conjugate(), ov.gamma]]) / 3.0
    return m1, m2


def fidelity_trace_norm(delta_x: float, delta_z: float, kzr: float = DEFAULT_KZR) -> float:
    """Fidelity of flat and crack states as the trace norm of the overlap matrix.

    Rows of M index the flat ensemble {+, -, C}, columns the crack ensemble
    {+, -, Z}, with M_jk = sqrt(p_j q_k) <psi_j|phi_k>. Parity splits M
    into a 1 x 1 block for |-> and a 2 x 2 block for {|+>, C/Z}.
    """
    _check_inputs(delta_x, delta_z)
    m1, m2 = parity_blocks(delta_x, delta_z, kzr)
    return min(abs(m1) + trace_norm_2x2(m2), 1.0)


def fidelity_ensemble(delta_x: float, delta_z: float, kzr: float = DEFAULT_KZR) -> float:
    """Same fidelity from the source ensemble {L, R, C} vs {L, R, Z}."""
    srcs = _hypothesis_sources(delta_x, delta_z)
    g = gram_of_states(srcs, kzr)
    m = g[np.ix_([0, 1, 2], [0, 1, 3])] / 3.0
    return float(np.linalg.svd(m, compute_uv=False).sum())


def qcb_fidelity_bound(delta_x: float, delta_z: float, kzr: float = DEFAULT_KZR) -> float:
    """-2 log F, an upper bound on the quantum Chernoff exponent."""
    f = fidelity_trace_norm(delta_x, delta_z, kzr)
    return max(-2.0 * math.log(f), 0.0)


def ms_channel_pair(delta_x: float, delta_z: float, kzr: float, basis: ModeBasis):
    """Flat and crack channel distributions (remainder appended last)."""
    p0 = scene_probabilities(flat_surface(delta_x, kzr), basis)[basis.mask]
    p1 = scene_probabilities(crack(delta_x, delta_z, kzr), basis)[basis.mask]
    p0 = np.append(p0, max(1.0 - p0.sum(), 0.0))
    p1 = np.append(p1, max(1.0 - p1.sum(), 0.0))
    return p0, p1


def classical_chernoff(p0, p1, tol: float = S_TOL):
    """Chernoff information of two discrete distributions; returns (xi, s*)."""
    p0, p1 = np.asarray(p0, float), np.asarray(p1, float)
    xi, s_star = chernoff_from_deficit(lambda s: _amgm_deficit(p0, p1, s), tol)
    return max(xi, 0.0), s_star


def chernoff_ms(delta_x: float, delta_z: float, kzr: float = DEFAULT_KZR, basis: ModeBasis | None = None):
    """Chernoff exponent of Hermite-Gaussian mode sorting, flat vs crack."""
    _check_inputs(delta_x, delta_z)
    basis = basis or ModeBasis()
    return classical_chernoff(*ms_channel_pair(delta_x, delta_z, kzr, basis))
