"""Independent reference computations used by the tests.

Nothing here calls into the closed-form overlap code: PSFs are sampled on a
grid and integrated directly, and derivatives come from central differences.
"""

import numpy as np


def psf(x, y, src, kzr):
    """Sampled Gaussian PSF amplitude of a source displaced by ``src``."""
    dx, dy, dz = src
    q = dz + 1j
    return (1 / np.sqrt(np.pi)) * 1j / q * np.exp(-1j * ((x + dx) ** 2 + (y + dy) ** 2) / (2 * q) - 1j * kzr * dz)


def grid(half=12.0, n=1201):
    xs = np.linspace(-half, half, n)
    h = xs[1] - xs[0]
    return xs[:, None], xs[None, :], h * h


def overlap_quadrature(v, u, kzr, half=12.0, n=1201):
    """<psi_v|psi_u> by trapezoid sums (spectrally accurate for Gaussians)."""
    x, y, w = grid(half, n)
    return complex((psf(x, y, v, kzr).conj() * psf(x, y, u, kzr)).sum() * w)


def central_diff(f, x0, h):
    return (f(x0 + h) - f(x0 - h)) / (2 * h)


def mixed_diff(f, h):
    """d^2 f / ds dt at (0, 0) for f(s, t)."""
    return (f(h, h) - f(h, -h) - f(-h, h) + f(-h, -h)) / (4 * h * h)


def hermite_mode(j, l, x, y):
    """Normalized HG_jl at the waist by the three-term recurrence."""
    def h1(n, t):
        prev, cur = np.zeros_like(t), np.pi ** -0.25 * np.exp(-t * t / 2)
        for k in range(n):
            prev, cur = cur, np.sqrt(2.0 / (k + 1)) * t * cur - np.sqrt(k / (k + 1)) * prev
        return cur
    return h1(j, x) * h1(l, y)


def pure_state_qfi(src, kzr, a, b, h=1e-5):
    """4 Re(<d_a psi|d_b psi> - <d_a psi|psi><psi|d_b psi>) with sampled derivatives."""
    x, y, w = grid(10.0, 801)
    def d(axis):
        e = np.zeros(3); e[axis] = h
        return (psf(x, y, np.add(src, e), kzr) - psf(x, y, np.subtract(src, e), kzr)) / (2 * h)
    p = psf(x, y, src, kzr)
    da, db = d(a), d(b)
    ip = lambda f, g: (f.conj() * g).sum() * w
    return 4 * (ip(da, db) - ip(da, p) * ip(p, db)).real
