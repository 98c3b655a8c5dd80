"""Gaussian PSF overlaps and the block Gram matrix of an incoherent scene.

Coordinates are normalized: transverse lengths in units of sqrt(z_R/k) and
axial lengths in units of z_R. A source displaced by (dx, dy, dz) has the
image-plane amplitude

    psi(x, y) = (1/sqrt(pi)) * i/(dz + i)
                * exp(-i((x+dx)^2 + (y+dy)^2) / (2(dz + i)) - i*kzr*dz)

All overlaps are derived from the single closed form

    <psi_v|psi_u> = f(D) = 2i/(2i - Dz) * exp(i(Dx^2 + Dy^2)/(2(Dz - 2i)) + i*kzr*Dz)

with D = theta_v - theta_u. Since f depends only on the difference,
tangent overlaps are plain partial derivatives of f:

    <d_a psi_v|psi_u>       =  d_a f
    <psi_v|d_b psi_u>       = -d_b f
    <d_a psi_v|d_b psi_u>   = -d_a d_b f
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import DegenerateScene

COINCIDENCE_TOL = 1e-9


class Axis(enum.IntEnum):
    X = 0
    Y = 1
    Z = 2

    @classmethod
    def parse(cls, value) -> "Axis":
        if isinstance(value, Axis):
            return value
        if isinstance(value, str):
            return cls[value.strip().upper()]
        return cls(int(value))


@dataclass(frozen=True)
class PointSource:
    dx: float = 0.0
    dy: float = 0.0
    dz: float = 0.0

    def __post_init__(self):
        for name in ("dx", "dy", "dz"):
            value = float(getattr(self, name))
            if not math.isfinite(value):
                raise ValueError(f"PointSource.{name} must be finite, got {value}")
            object.__setattr__(self, name, value)

    def as_array(self) -> np.ndarray:
        return np.array([self.dx, self.dy, self.dz])

    def shifted(self, axis, step: float) -> "PointSource":
        coords = self.as_array()
        coords[Axis.parse(axis)] += step
        return PointSource(*coords)


@dataclass(frozen=True)
class Scene:
    """Equal-intensity incoherent ensemble of point sources."""

    sources: tuple[PointSource, ...]
    kzr: float = 100.0

    def __post_init__(self):
        srcs = tuple(s if isinstance(s, PointSource) else PointSource(*s) for s in self.sources)
        if not srcs:
            raise ValueError("a scene needs at least one source")
        if not (self.kzr > 0 and math.isfinite(self.kzr)):
            raise ValueError(f"kzr must be positive and finite, got {self.kzr}")
        object.__setattr__(self, "sources", srcs)
        object.__setattr__(self, "kzr", float(self.kzr))

    @property
    def n_sources(self) -> int:
        return len(self.sources)

    def coords(self) -> np.ndarray:
        """(V, 3) array of source displacements."""
        return np.array([s.as_array() for s in self.sources])

    def with_kzr(self, kzr: float) -> "Scene":
        return Scene(self.sources, kzr)

    def is_degenerate(self, tol: float = COINCIDENCE_TOL) -> bool:
        c = self.coords()
        diff = np.abs(c[:, None, :] - c[None, :, :]).max(axis=-1)
        np.fill_diagonal(diff, np.inf)
        return bool((diff < tol).any())

    def all_params(self) -> list["ParamIndex"]:
        return [ParamIndex(v, a) for v in range(self.n_sources) for a in Axis]


@dataclass(frozen=True, order=True)
class ParamIndex:
    """Displacement of one source along one axis."""

    source: int
    axis: Axis = field(default=Axis.X)

    def __post_init__(self):
        object.__setattr__(self, "axis", Axis.parse(self.axis))
        if self.source < 0:
            raise ValueError("source index must be non-negative")

    @property
    def label(self) -> str:
        return f"d{self.axis.name.lower()}{self.source + 1}"

    def validate(self, n_sources: int) -> None:
        if not 0 <= self.source < n_sources:
            raise IndexError(f"source {self.source} out of range for {n_sources} sources")


def _overlap_parts(dx, dy, dz, kzr):
    """Base overlap f with its first and second log-derivatives in (Dx, Dy, Dz).

    Returns f, g (first derivatives of log f, shape (3,) + broadcast shape)
    and h (second derivatives of log f, shape (3, 3) + broadcast shape).
    """
    dx, dy, dz = np.broadcast_arrays(*(np.asarray(t, dtype=float) for t in (dx, dy, dz)))
    w = dz - 2j
    s = dx**2 + dy**2
    f = -2j / w * np.exp(1j * s / (2 * w) + 1j * kzr * dz)

    g = np.empty((3,) + f.shape, dtype=complex)
    g[0] = 1j * dx / w
    g[1] = 1j * dy / w
    g[2] = -1.0 / w - 1j * s / (2 * w**2) + 1j * kzr

    h = np.zeros((3, 3) + f.shape, dtype=complex)
    h[0, 0] = h[1, 1] = 1j / w
    h[0, 2] = h[2, 0] = -1j * dx / w**2
    h[1, 2] = h[2, 1] = -1j * dy / w**2
    h[2, 2] = 1.0 / w**2 + 1j * s / w**3
    return f, g, h


def _delta(v: PointSource, u: PointSource):
    return v.dx - u.dx, v.dy - u.dy, v.dz - u.dz


def overlap_psi_psi(v: PointSource, u: PointSource, kzr: float) -> complex:
    """<psi_v|psi_u>."""
    f, _, _ = _overlap_parts(*_delta(v, u), kzr)
    return complex(f)


def overlap_dpsi_psi(v: PointSource, axis, u: PointSource, kzr: float) -> complex:
    """<d psi_v / d theta_v^axis | psi_u>."""
    a = Axis.parse(axis)
    f, g, _ = _overlap_parts(*_delta(v, u), kzr)
    return complex(f * g[a])


def overlap_psi_dpsi(v: PointSource, u: PointSource, axis, kzr: float) -> complex:
    """<psi_v | d psi_u / d theta_u^axis>."""
    b = Axis.parse(axis)
    f, g, _ = _overlap_parts(*_delta(v, u), kzr)
    return complex(-f * g[b])


def overlap_dpsi_dpsi(v: PointSource, axis_a, u: PointSource, axis_b, kzr: float) -> complex:
    """<d psi_v / d theta_v^a | d psi_u / d theta_u^b>."""
    a, b = Axis.parse(axis_a), Axis.parse(axis_b)
    f, g, h = _overlap_parts(*_delta(v, u), kzr)
    return complex(-f * (h[a, b] + g[a] * g[b]))


@dataclass(frozen=True)
class BlockGram:
    """Gram matrix in the basis {psi_v} + {d_x psi_v} + {d_y psi_v} + {d_z psi_v}.

    Tangent rows are axis-major: index ``axis * V + v`` inside the tangent
    block, so ``full[V + axis*V + v]`` is the tangent of source v along axis.
    """

    delta: np.ndarray  # (V, V)
    gamma: np.ndarray  # (V, 3V), <psi_v | d psi_u>
    tau: np.ndarray  # (3V, 3V)

    @property
    def n_sources(self) -> int:
        return self.delta.shape[0]

    @property
    def full(self) -> np.ndarray:
        return np.block([[self.delta, self.gamma], [self.gamma.conj().T, self.tau]])

    def tangent_index(self, p: ParamIndex) -> int:
        """Row of ``p`` inside the tangent block."""
        return int(p.axis) * self.n_sources + p.source

    def horizontal(self) -> "BlockGram":
        """Gram after replacing each tangent by its part orthogonal to its own PSF.

        |d psi_v> -> |d psi_v> - |psi_v><psi_v|d psi_v>. Because <psi_v|d psi_v>
        is imaginary for normalized states, d rho is unchanged, so every
        information quantity is too. The lift strips the O(kzr) phase
        component of the axial tangents and keeps the Gram O(1).
        """
        n = self.n_sources
        owner = np.tile(np.arange(n), 3)
        c = self.gamma[owner, np.arange(3 * n)]  # <psi_v|d psi_v> per tangent
        t = np.zeros((n, 3 * n), dtype=complex)
        t[owner, np.arange(3 * n)] = -c
        # new tangents = old tangents + psi-block combination t
        gamma = self.gamma + self.delta @ t
        tau = (self.tau + self.gamma.conj().T @ t + t.conj().T @ self.gamma
               + t.conj().T @ self.delta @ t)
        return BlockGram(self.delta, gamma, 0.5 * (tau + tau.conj().T))


def assemble_gram(scene: Scene, check_degenerate: bool = True) -> BlockGram:
    """Block Gram matrix of a scene from the closed-form overlaps."""
    if check_degenerate and scene.is_degenerate():
        raise DegenerateScene("two sources coincide; the PSF overlap matrix is singular")
    c = scene.coords()
    n = len(c)
    d = c[:, None, :] - c[None, :, :]  # d[v, u] = theta_v - theta_u
    f, g, h = _overlap_parts(d[..., 0], d[..., 1], d[..., 2], scene.kzr)

    delta = f.copy()
    np.fill_diagonal(delta, 1.0)

    # gamma[v, b*V + u] = <psi_v | d_b psi_u> = -f g_b
    gamma = np.empty((n, 3 * n), dtype=complex)
    tau = np.empty((3 * n, 3 * n), dtype=complex)
    for b in range(3):
        gamma[:, b * n:(b + 1) * n] = -f * g[b]
        for a in range(3):
            tau[a * n:(a + 1) * n, b * n:(b + 1) * n] = -f * (h[a, b] + g[a] * g[b])

    # remove round-off asymmetry so the assembled matrix is exactly Hermitian
    delta = 0.5 * (delta + delta.conj().T)
    tau = 0.5 * (tau + tau.conj().T)
    return BlockGram(delta=delta, gamma=gamma, tau=tau)


def gram_of_states(sources: Sequence[PointSource], kzr: float) -> np.ndarray:
    """Plain Gram matrix <psi_i|psi_j> of a list of sources (no tangents)."""
    c = np.array([s.as_array() for s in sources])
    d = c[:, None, :] - c[None, :, :]
    f, _, _ = _overlap_parts(d[..., 0], d[..., 1], d[..., 2], kzr)
    np.fill_diagonal(f, 1.0)
    return 0.5 * (f + f.conj().T)
