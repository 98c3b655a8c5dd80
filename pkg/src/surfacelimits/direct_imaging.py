"""Direct imaging: image-plane intensity, its Fisher information and Chernoff exponent."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.special import erfc

from .errors import QuadratureFailure
from .hypothesis import S_TOL, _one_plus_sr_minus_pow, chernoff_from_deficit
from .psf_gram import Axis, ParamIndex, Scene
from .qfim import FisherMatrix, Jacobian, reparametrize

DEFAULT_HALF_WIDTH = 8.0
DEFAULT_TOL = 1e-10
TAIL_TOL = 1e-10
TINY = 1e-300
GL_ORDER = 16


@dataclass(frozen=True)
class QuadratureGrid:
    """Tensor-product composite Gauss-Legendre rule on [-R, R]^2.

    ``half_width=None`` picks R per scene so that every source's tail mass
    stays below 1e-10 (never smaller than 8). The rule is refined globally,
    doubling the panel count, until successive results agree to
    ``target_tol`` relative to the result.
    """

    half_width: float | None = None
    target_tol: float = DEFAULT_TOL
    order: int = GL_ORDER
    min_panels: int = 8
    max_panels: int = 64

    def __post_init__(self):
        if self.half_width is not None and self.half_width <= 0:
            raise ValueError("half_width must be positive")
        if not self.target_tol > 0:
            raise ValueError("target_tol must be positive")
        if self.min_panels < 1 or self.max_panels < self.min_panels:
            raise ValueError("need 1 <= min_panels <= max_panels")

    def radius_for(self, *scenes: Scene) -> float:
        if self.half_width is not None:
            return self.half_width
        reach = 0.0
        for sc in scenes:
            c = sc.coords()
            width = np.sqrt(1.0 + c[:, 2] ** 2)
            reach = max(reach, float((np.abs(c[:, :2]).max(axis=1) + 6.5 * width).max()))
        return max(DEFAULT_HALF_WIDTH, reach)

    def nodes(self, radius: float, panels: int):
        """1-D nodes and weights of the composite rule with ``panels`` panels."""
        x, w = np.polynomial.legendre.leggauss(self.order)
        edges = np.linspace(-radius, radius, panels + 1)
        half = 0.5 * np.diff(edges)
        mid = 0.5 * (edges[1:] + edges[:-1])
        xs = (mid[:, None] + half[:, None] * x[None, :]).ravel()
        ws = (half[:, None] * w[None, :]).ravel()
        return xs, ws

    def levels(self):
        n = self.min_panels
        while n <= self.max_panels:
            yield n
            n *= 2


def tail_mass(scene: Scene, radius: float) -> float:
    """Largest single-source probability outside [-R, R]^2 (union bound)."""
    c = scene.coords()
    sig = np.sqrt(1.0 + c[:, 2] ** 2)  # exp(-u^2/s): erfc argument scale sqrt(s)
    tails = []
    for k in range(2):
        lo = 0.5 * erfc((radius + c[:, k]) / sig)
        hi = 0.5 * erfc((radius - c[:, k]) / sig)
        tails.append(lo + hi)
    return float((tails[0] + tails[1]).max())


def _widths(scene: Scene):
    c = scene.coords()
    return c, 1.0 + c[:, 2] ** 2


def source_intensities(scene: Scene, x, y) -> np.ndarray:
    """|psi_v(x, y)|^2 stacked along a leading source axis."""
    c, s = _widths(scene)
    x, y = np.asarray(x, float), np.asarray(y, float)
    shape = (-1,) + (1,) * np.broadcast(x, y).ndim
    cx, cy, s = c[:, 0].reshape(shape), c[:, 1].reshape(shape), s.reshape(shape)
    r2 = (x + cx) ** 2 + (y + cy) ** 2
    return np.exp(-r2 / s) / (math.pi * s)


def intensity(scene: Scene, x, y):
    """P(x, y) = (1/V) sum_v |psi_v(x, y)|^2."""
    out = source_intensities(scene, x, y).mean(axis=0)
    return float(out) if out.ndim == 0 else out


def intensity_grad(scene: Scene, params: Sequence[ParamIndex], x, y) -> np.ndarray:
    """dP/d theta_a for each parameter, from the Gaussian closed form."""
    c, s = _widths(scene)
    ind = source_intensities(scene, x, y)
    n = scene.n_sources
    out = []
    for p in params:
        p.validate(n)
        v = p.source
        iv = ind[v]
        if p.axis == Axis.Z:
            r2 = (x + c[v, 0]) ** 2 + (y + c[v, 1]) ** 2
            ds = 2.0 * c[v, 2]
            g = iv * (r2 / s[v] ** 2 - 1.0 / s[v]) * ds
        else:
            u = x if p.axis == Axis.X else y
            g = iv * (-2.0 * (u + c[v, int(p.axis)]) / s[v])
        out.append(g / n)
    return np.array(out)


def _mesh(grid: QuadratureGrid, radius: float, panels: int):
    xs, ws = grid.nodes(radius, panels)
    return xs[:, None], xs[None, :], ws[:, None] * ws[None, :]


def _fim_on(scene, params, grid, radius, panels):
    x, y, w = _mesh(grid, radius, panels)
    p = intensity(scene, x, y)
    dp = intensity_grad(scene, params, x, y)
    keep = p > TINY
    wp = np.where(keep, w / np.where(keep, p, 1.0), 0.0)
    flat = dp.reshape(len(params), -1)
    return (flat * wp.ravel()) @ flat.T


def _check_cover(grid: QuadratureGrid, radius: float, *scenes: Scene) -> None:
    for sc in scenes:
        t = tail_mass(sc, radius)
        if t > TAIL_TOL:
            raise QuadratureFailure(f"tail mass {t:.2e} outside [-{radius}, {radius}]^2 exceeds {TAIL_TOL:.0e}")


def _refine(evaluate, grid: QuadratureGrid):
    """Run ``evaluate(panels)`` on successive levels until converged."""
    prev = None
    for panels in grid.levels():
        cur = evaluate(panels)
        if prev is not None:
            err = float(np.max(np.abs(cur - prev)))
            scale = float(np.max(np.abs(cur)))
            if err <= grid.target_tol * max(scale, 1e-300) or err == 0.0:
                return cur, err
        prev = cur
    raise QuadratureFailure(
        f"no convergence to {grid.target_tol:.1e} with {grid.max_panels} panels per axis"
    )


@dataclass
class DiFisher:
    fisher: FisherMatrix
    error: float
    radius: float


def fim_di_detail(scene: Scene, params: Sequence[ParamIndex], grid: QuadratureGrid | None = None,
                  jacobian: Jacobian | None = None) -> DiFisher:
    grid = grid or QuadratureGrid()
    params = list(params)
    if not params:
        raise ValueError("at least one parameter is required")
    radius = grid.radius_for(scene)
    _check_cover(grid, radius, scene)
    m, err = _refine(lambda n: _fim_on(scene, params, grid, radius, n), grid)
    f = FisherMatrix([p.label for p in params], m)
    if jacobian is not None:
        f = reparametrize(f, jacobian)
        err *= float(np.abs(jacobian.matrix).sum(axis=1).max()) ** 2
    return DiFisher(f, err, radius)


def fim_di(scene: Scene, params: Sequence[ParamIndex], grid: QuadratureGrid | None = None,
           jacobian: Jacobian | None = None) -> FisherMatrix:
    """Classical Fisher information of the image-plane intensity, per photon."""
    return fim_di_detail(scene, params, grid, jacobian).fisher


def _log_ratio(scene0: Scene, scene1: Scene, x, y):
    """Per-source log(I1_v / I0_v), accurate when the sources nearly coincide."""
    c0, s0 = _widths(scene0)
    c1, s1 = _widths(scene1)
    shape = (-1,) + (1,) * np.broadcast(x, y).ndim
    r0 = (x + c0[:, 0].reshape(shape)) ** 2 + (y + c0[:, 1].reshape(shape)) ** 2
    # r1^2 - r0^2 = d (2u0 + d) per axis, with d the coordinate change
    d = (c1 - c0)[:, :2]
    dr = ((x + c0[:, 0].reshape(shape)) * 2 + d[:, 0].reshape(shape)) * d[:, 0].reshape(shape)
    dr = dr + ((y + c0[:, 1].reshape(shape)) * 2 + d[:, 1].reshape(shape)) * d[:, 1].reshape(shape)
    s0r, s1r = s0.reshape(shape), s1.reshape(shape)
    ds = ((c1[:, 2] - c0[:, 2]) * (c1[:, 2] + c0[:, 2])).reshape(shape)  # s1 - s0
    # -r1/s1 + r0/s0 = -(r0 + dr)/s1 + r0/s0 = r0 (s1 - s0)/(s0 s1) - dr/s1
    return -np.log1p(ds / s0r) + r0 * (ds / (s0r * s1r)) - dr / s1r


def _densities_and_gap(scene0: Scene, scene1: Scene, x, y):
    """P0 and P1 - P0, the latter without subtracting two nearly equal numbers."""
    i0 = source_intensities(scene0, x, y)
    p0 = i0.mean(axis=0)
    if scene0.n_sources == scene1.n_sources:
        lr = _log_ratio(scene0, scene1, x, y)
        small = np.abs(lr) < 1.0
        # expm1 where the two densities are close; plain difference elsewhere
        near = i0 * np.expm1(np.where(small, lr, 0.0))
        far = source_intensities(scene1, x, y) - i0
        gap = np.where(small, near, far).mean(axis=0)
    else:
        gap = intensity(scene1, x, y) - p0
    return p0, gap


def _deficit_on(p0, gap, w, s):
    """Quadrature of s P0 + (1-s) P1 - P0^s P1^(1-s)."""
    p1 = p0 + gap
    keep = (p0 > TINY) | (p1 > TINY)
    both = (p0 > TINY) & (p1 > TINY)
    r = np.where(both, gap / np.where(both, p0, 1.0), 0.0)
    core = np.where(both, p0 * _one_plus_sr_minus_pow(r, 1.0 - s), s * p0 + (1 - s) * p1)
    return float((np.where(keep, core, 0.0) * w).sum())


@dataclass
class DiChernoff:
    xi: float
    s_star: float
    error: float


def chernoff_di_detail(scene0: Scene, scene1: Scene, grid: QuadratureGrid | None = None) -> DiChernoff:
    grid = grid or QuadratureGrid()
    radius = grid.radius_for(scene0, scene1)
    _check_cover(grid, radius, scene0, scene1)

    cache = {}

    def fields(panels):
        if panels not in cache:
            x, y, w = _mesh(grid, radius, panels)
            cache[panels] = (*_densities_and_gap(scene0, scene1, x, y), w)
        return cache[panels]

    def at_half(panels):
        p0, gap, w = fields(panels)
        return np.array(_deficit_on(p0, gap, w, 0.5))

    _, _ = _refine(at_half, grid)
    panels = max(k for k in cache)
    p0, gap, w = fields(panels)
    if not np.any(gap):
        return DiChernoff(0.0, 0.5, 0.0)
    xi, s_star = chernoff_from_deficit(lambda s: _deficit_on(p0, gap, w, s), S_TOL)
    coarse = fields(panels // 2) if panels // 2 in cache else fields(panels)
    d_coarse = _deficit_on(*coarse, s_star)
    d_fine = _deficit_on(p0, gap, w, s_star)
    err = abs(d_fine - d_coarse) / max(1.0 - d_fine, 1e-300)
    return DiChernoff(max(xi, 0.0), s_star, err)


def chernoff_di(scene0: Scene, scene1: Scene, grid: QuadratureGrid | None = None):
    """Direct-imaging Chernoff exponent -log min_s int P0^s P1^(1-s); returns (xi, s*)."""
    res = chernoff_di_detail(scene0, scene1, grid)
    return res.xi, res.s_star
