"""Hermite-Gaussian mode sorting: channel probabilities, gradients and FIM.

The mode phi_{j,l} = g_j(x) g_l(y) exp(-(x^2+y^2)/2)/sqrt(pi) with
g_n = H_n / sqrt(2^n n!) overlaps a displaced source as

    <phi_jl|psi> = K * E[g_j(X)] * E[g_l(Y)]
    K = 2i/(dz+2i) * exp(-i*kzr*dz) * exp(-i(dx^2+dy^2) / (2(dz+2i)))

where X, Y are complex Gaussians with means mu = -i*d/(dz+2i) and common
variance s = (dz+i)/(dz+2i). Derivatives go through the moment identities
dE[x^n]/dmu = n E[x^(n-1)] and dE[x^n]/ds = n(n-1)/2 E[x^(n-2)].
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np
from numpy.polynomial import hermite

from .psf_gram import Axis, ParamIndex, PointSource, Scene
from .qfim import FisherMatrix, Jacobian, reparametrize

DEFAULT_MAX_ORDER = 10
ZERO_PROB = 1e-15


@dataclass(frozen=True, order=True)
class ModeIndex:
    j: int
    l: int

    def __post_init__(self):
        if self.j < 0 or self.l < 0:
            raise ValueError("mode orders must be non-negative")

    @property
    def label(self) -> str:
        return f"{self.j},{self.l}"


def hermite_coefficients(max_order: int) -> np.ndarray:
    """Monomial coefficients of normalized Hermite polynomials.

    Row n holds c[n, k] with H_n(x)/sqrt(2^n n!) = sum_k c[n, k] x^k.
    """
    c = np.zeros((max_order + 1, max_order + 1))
    for n in range(max_order + 1):
        unit = np.zeros(n + 1)
        unit[n] = 1.0
        c[n, : n + 1] = hermite.herm2poly(unit) / math.sqrt(2.0**n * math.factorial(n))
    return c


@dataclass(frozen=True)
class ModeBasis:
    """All modes with j + l <= max_order."""

    max_order: int = DEFAULT_MAX_ORDER
    coeffs: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.max_order < 0:
            raise ValueError("max_order must be non-negative")
        object.__setattr__(self, "coeffs", hermite_coefficients(self.max_order))
        err = np.abs(self.gram_1d() - np.eye(self.max_order + 1)).max()
        if err > 1e-10:
            raise ArithmeticError(f"Hermite basis not orthonormal (error {err:.2e})")

    @cached_property
    def modes(self) -> tuple[ModeIndex, ...]:
        n = self.max_order
        return tuple(ModeIndex(j, t - j) for t in range(n + 1) for j in range(t, -1, -1))

    @cached_property
    def mask(self) -> np.ndarray:
        """(J+1, J+1) boolean mask of included (j, l)."""
        idx = np.arange(self.max_order + 1)
        return idx[:, None] + idx[None, :] <= self.max_order

    def gram_1d(self, n_nodes: int | None = None) -> np.ndarray:
        """1-D mode Gram matrix by Gauss-Hermite quadrature (exact for these degrees)."""
        n_nodes = n_nodes or self.max_order + 2
        x, w = hermite.hermgauss(n_nodes)
        vals = np.polynomial.polynomial.polyvander(x, self.max_order) @ self.coeffs.T
        return (vals * (w / math.sqrt(math.pi))[:, None]).T @ vals

    def gram_2d(self) -> np.ndarray:
        """Gram matrix over the 2-D mode list (separable product of the 1-D one)."""
        g = self.gram_1d()
        js = np.array([m.j for m in self.modes])
        ls = np.array([m.l for m in self.modes])
        return g[js][:, js] * g[ls][:, ls]


def gaussian_moments(mu: complex, var: complex, order: int) -> np.ndarray:
    """E[x^n], n = 0..order, via E[x^(n+1)] = mu E[x^n] + n var E[x^(n-1)]."""
    m = np.zeros(order + 1, dtype=complex)
    m[0] = 1.0
    if order >= 1:
        m[1] = mu
    for n in range(1, order):
        m[n + 1] = mu * m[n] + n * var * m[n - 1]
    return m


def gaussian_moments_binomial(mu: complex, var: complex, order: int) -> np.ndarray:
    """Same moments from the centralized expansion x = mu + sigma Z."""
    m = np.zeros(order + 1, dtype=complex)
    for n in range(order + 1):
        total = 0j
        for k in range(0, n + 1, 2):
            # E[Z^k] = (k-1)!! ; sigma^k = var^(k/2)
            ez = math.factorial(k) / (2 ** (k // 2) * math.factorial(k // 2))
            total += math.comb(n, k) * mu ** (n - k) * var ** (k // 2) * ez
        m[n] = total
    return m


def _source_params(src: PointSource):
    w = src.dz + 2j
    mu_x = -1j * src.dx / w
    mu_y = -1j * src.dy / w
    var = (src.dz + 1j) / w
    return w, mu_x, mu_y, var


def _poly_expectations(coeffs: np.ndarray, mu: complex, var: complex):
    """E[g_n], dE[g_n]/dmu and dE[g_n]/dvar for n = 0..J."""
    order = coeffs.shape[0] - 1
    mom = gaussian_moments(mu, var, order)
    n = np.arange(order + 1)
    dmu = np.zeros_like(mom)
    dmu[1:] = n[1:] * mom[:-1]
    dvar = np.zeros_like(mom)
    dvar[2:] = 0.5 * n[2:] * (n[2:] - 1) * mom[:-2]
    return coeffs @ mom, coeffs @ dmu, coeffs @ dvar


def source_amplitudes(src: PointSource, basis: ModeBasis, kzr: float):
    """Mode amplitudes of one source and their displacement gradients.

    Returns (amp, grad): amp[j, l] = <phi_jl|psi> and grad[a, j, l] its
    derivative along axis a. Entries outside ``basis.mask`` are not modes
    of the basis but are computed anyway.
    """
    w, mu_x, mu_y, var = _source_params(src)
    r2 = src.dx**2 + src.dy**2
    k = 2j / w * np.exp(-1j * kzr * src.dz - 1j * r2 / (2 * w))
    ex, ex_mu, ex_var = _poly_expectations(basis.coeffs, mu_x, var)
    ey, ey_mu, ey_var = _poly_expectations(basis.coeffs, mu_y, var)

    dlogk = np.array([
        -1j * src.dx / w,
        -1j * src.dy / w,
        -1.0 / w - 1j * kzr + 1j * r2 / (2 * w**2),
    ])
    dmu_dd = -1j / w  # d mu_x / d dx, d mu_y / d dy
    dvar_dz = 1j / w**2
    dmux_dz = 1j * src.dx / w**2
    dmuy_dz = 1j * src.dy / w**2

    exy = np.outer(ex, ey)
    amp = k * exy
    grad = np.empty((3,) + amp.shape, dtype=complex)
    grad[0] = amp * dlogk[0] + k * np.outer(ex_mu * dmu_dd, ey)
    grad[1] = amp * dlogk[1] + k * np.outer(ex, ey_mu * dmu_dd)
    dex_dz = ex_mu * dmux_dz + ex_var * dvar_dz
    dey_dz = ey_mu * dmuy_dz + ey_var * dvar_dz
    grad[2] = amp * dlogk[2] + k * (np.outer(dex_dz, ey) + np.outer(ex, dey_dz))
    return amp, grad


def _check_mode(mode: ModeIndex, basis: ModeBasis | None) -> ModeBasis:
    if basis is None or mode.j > basis.max_order or mode.l > basis.max_order:
        basis = ModeBasis(max(mode.j, mode.l))
    return basis


def channel_overlap(mode: ModeIndex, src: PointSource, kzr: float, basis: ModeBasis | None = None) -> complex:
    """<phi_jl | psi_src>."""
    basis = _check_mode(mode, basis)
    amp, _ = source_amplitudes(src, basis, kzr)
    return complex(amp[mode.j, mode.l])


def channel_prob(mode: ModeIndex, src: PointSource, kzr: float = 100.0, basis: ModeBasis | None = None) -> float:
    """|<phi_jl|psi_src>|^2; independent of kzr."""
    basis = _check_mode(mode, basis)
    _, mu_x, mu_y, var = _source_params(src)
    ex, _, _ = _poly_expectations(basis.coeffs, mu_x, var)
    ey, _, _ = _poly_expectations(basis.coeffs, mu_y, var)
    pref = 4.0 / (4.0 + src.dz**2) * math.exp(-2.0 * (src.dx**2 + src.dy**2) / (4.0 + src.dz**2))
    return float(pref * abs(ex[mode.j]) ** 2 * abs(ey[mode.l]) ** 2)


def channel_prob_grad(mode: ModeIndex, src: PointSource, kzr: float, axis, basis: ModeBasis | None = None) -> float:
    """d |<phi_jl|psi_src>|^2 / d(displacement along axis)."""
    basis = _check_mode(mode, basis)
    a = Axis.parse(axis)
    amp, grad = source_amplitudes(src, basis, kzr)
    return float(2.0 * (amp[mode.j, mode.l].conjugate() * grad[a, mode.j, mode.l]).real)


@dataclass
class ChannelTable:
    probs: dict[ModeIndex, float]
    remainder: float

    def total(self) -> float:
        return sum(self.probs.values()) + self.remainder

    def __getitem__(self, key) -> float:
        if not isinstance(key, ModeIndex):
            key = ModeIndex(*key)
        return self.probs[key]


def _scene_arrays(scene: Scene, basis: ModeBasis):
    amps, grads = zip(*(source_amplitudes(s, basis, scene.kzr) for s in scene.sources))
    return np.array(amps), np.array(grads)  # (V, J+1, J+1), (V, 3, J+1, J+1)


def scene_probabilities(scene: Scene, basis: ModeBasis) -> np.ndarray:
    """(J+1, J+1) array of P_jl; entries outside the basis mask are zero."""
    amps, _ = _scene_arrays(scene, basis)
    return np.where(basis.mask, (np.abs(amps) ** 2).mean(axis=0), 0.0)


def scene_channel_table(scene: Scene, basis: ModeBasis | None = None) -> ChannelTable:
    basis = basis or ModeBasis()
    p = scene_probabilities(scene, basis)
    probs = {m: float(p[m.j, m.l]) for m in basis.modes}
    remainder = 1.0 - sum(probs.values())
    if remainder < 0:
        if remainder < -1e-12:
            warnings.warn(f"channel probabilities exceed one by {-remainder:.3e}; remainder clamped")
        remainder = 0.0
    return ChannelTable(probs, remainder)


def _channel_terms(scene: Scene, basis: ModeBasis, params: Sequence[ParamIndex]):
    """Probabilities, parameter gradients and zero-channel limits per (j, l)."""
    for p in params:
        p.validate(scene.n_sources)
    n = scene.n_sources
    amps, grads = _scene_arrays(scene, basis)
    prob = (np.abs(amps) ** 2).mean(axis=0)
    # dP/dtheta_(v,a) = (2/V) Re(conj(A_v) dA_v/da)
    dprob = np.array([
        2.0 / n * (amps[p.source].conj() * grads[p.source, p.axis]).real for p in params
    ])
    # (dP)^2/P as P -> 0 with P quadratic: (4/V) Re(conj(dA_a) dA_b), same source only
    m = len(params)
    limit = np.zeros((m, m) + prob.shape)
    for i, a in enumerate(params):
        for j, b in enumerate(params):
            if a.source == b.source:
                limit[i, j] = 4.0 / n * (grads[a.source, a.axis].conj() * grads[b.source, b.axis]).real
    return prob, dprob, limit


def fim_ms_contributions(
    scene: Scene,
    basis: ModeBasis | None = None,
    params: Sequence[ParamIndex] | None = None,
    include_remainder: bool = False,
) -> dict:
    """Per-channel FIM matrices in the source-displacement parameters.

    Keys are ModeIndex objects, plus ``"remainder"`` when requested.
    """
    basis = basis or ModeBasis()
    params = list(params) if params is not None else scene.all_params()
    prob, dprob, limit = _channel_terms(scene, basis, params)
    out = {}
    for mode in basis.modes:
        pj = prob[mode.j, mode.l]
        d = dprob[:, mode.j, mode.l]
        if pj >= ZERO_PROB:
            out[mode] = np.outer(d, d) / pj
        else:
            out[mode] = limit[:, :, mode.j, mode.l]
    if include_remainder:
        pr = 1.0 - prob[basis.mask].sum()
        dr = -dprob[:, basis.mask].sum(axis=1)
        out["remainder"] = np.outer(dr, dr) / pr if pr >= ZERO_PROB else np.zeros((len(params),) * 2)
    return out


def fim_ms(
    scene: Scene,
    basis: ModeBasis | None = None,
    params: Sequence[ParamIndex] | None = None,
    jacobian: Jacobian | None = None,
    include_remainder: bool = False,
    rate: float = 1.0,
) -> FisherMatrix:
    """Poisson-counting FIM of Hermite-Gaussian mode sorting."""
    params = list(params) if params is not None else scene.all_params()
    contrib = fim_ms_contributions(scene, basis, params, include_remainder)
    total = rate * sum(contrib.values())
    f = FisherMatrix([p.label for p in params], total)
    return reparametrize(f, jacobian) if jacobian is not None else f
