"""Hermitian matrix helpers and a golden-section minimizer."""

from __future__ import annotations

import math

import numpy as np

CLAMP_TOL = 1e-10
ZERO_EIG = 1e-12

_INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


def hermitize(m: np.ndarray) -> np.ndarray:
    return 0.5 * (m + m.conj().T)


def psd_eigh(m: np.ndarray, clamp: float = CLAMP_TOL):
    """Eigendecomposition of a PSD Hermitian matrix.

    Eigenvalues in [-clamp, 0) are set to zero; anything more negative
    raises, since the input was supposed to be PSD.
    """
    w, u = np.linalg.eigh(hermitize(m))
    scale = max(1.0, float(np.abs(w).max(initial=0.0)))
    if w.min(initial=0.0) < -clamp * scale:
        raise np.linalg.LinAlgError(f"matrix is not PSD: smallest eigenvalue {w.min():.3e}")
    return np.clip(w, 0.0, None), u


def sqrtm_psd(m: np.ndarray, clamp: float = CLAMP_TOL) -> np.ndarray:
    """Principal square root of a PSD Hermitian matrix."""
    w, u = psd_eigh(m, clamp)
    return (u * np.sqrt(w)) @ u.conj().T


def lyapunov_eig(a: np.ndarray, c: np.ndarray) -> np.ndarray:
    """Solve X A + A X = C for Hermitian positive-definite A.

    In the eigenbasis of A the equation is diagonal:
    X~_ij = C~_ij / (lambda_i + lambda_j).
    """
    w, u = np.linalg.eigh(hermitize(a))
    ct = u.conj().T @ c @ u
    xt = ct / (w[:, None] + w[None, :])
    return u @ xt @ u.conj().T


def golden_section(f, lo: float = 0.0, hi: float = 1.0, tol: float = 1e-8):
    """Minimize a unimodal scalar function on [lo, hi].

    Returns (x_min, f_min). Both endpoints are compared against the
    interior bracket so a minimum sitting on the boundary is exact.
    """
    a, b = lo, hi
    c = b - _INV_PHI * (b - a)
    d = a + _INV_PHI * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - _INV_PHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INV_PHI * (b - a)
            fd = f(d)
    x, fx = (c, fc) if fc <= fd else (d, fd)
    for end in (lo, hi):
        fe = f(end)
        if fe < fx:
            x, fx = end, fe
    return x, fx
