"""Finite-difference weights and periodic differentiation operators."""

from __future__ import annotations

from math import factorial

import numpy as np
from scipy.linalg import circulant


def fd_weights(offsets, k: int) -> np.ndarray:
    """Weights w such that sum(w * g(x0 + offsets*step)) ~ step**k * g^(k)(x0).

    Solves the Taylor moment system directly; fine for the short stencils used here.
    """
    offsets = np.asarray(offsets, dtype=float)
    m = offsets.size
    if k >= m:
        raise ValueError(f"need more than {k} points for derivative order {k}")
    A = np.vander(offsets, m, increasing=True).T
    rhs = np.zeros(m)
    rhs[k] = factorial(k)
    return np.linalg.solve(A, rhs)


def _half_width(k: int, order: int) -> int:
    return (k + 1) // 2 + order // 2 - 1


def check_stencil(stencil) -> None:
    if stencil == "spectral":
        return
    if not isinstance(stencil, (int, np.integer)) or stencil < 4 or stencil % 2:
        raise ValueError(f"stencil must be an even integer >= 4 or 'spectral', got {stencil!r}")


def periodic_derivative(values: np.ndarray, k: int, stencil=4, period: float = 2 * np.pi) -> np.ndarray:
    """k-th derivative of uniformly sampled periodic data along axis 0."""
    values = np.asarray(values, dtype=float)
    n = values.shape[0]
    step = period / n
    if k == 0:
        return values.copy()
    if stencil == "spectral":
        wavenumbers = np.fft.rfftfreq(n, d=step) * 2 * np.pi
        factor = (1j * wavenumbers) ** k
        if n % 2 == 0 and k % 2 == 1:
            factor[-1] = 0.0
        spectrum = np.fft.rfft(values, axis=0)
        factor = factor.reshape((-1,) + (1,) * (values.ndim - 1))
        return np.fft.irfft(spectrum * factor, n=n, axis=0)
    check_stencil(stencil)
    m = _half_width(k, stencil)
    offsets = np.arange(-m, m + 1)
    weights = fd_weights(offsets, k) / step**k
    out = np.zeros_like(values)
    for off, w in zip(offsets, weights):
        if w != 0.0:
            out += w * np.roll(values, -off, axis=0)
    return out


def periodic_derivative_matrix(n: int, k: int, stencil=4, period: float = 2 * np.pi) -> np.ndarray:
    """Dense matrix D with D @ v equal to periodic_derivative(v, k, stencil)."""
    if stencil == "spectral":
        return periodic_derivative(np.eye(n), k, "spectral", period)
    check_stencil(stencil)
    step = period / n
    m = _half_width(k, stencil)
    offsets = np.arange(-m, m + 1)
    weights = fd_weights(offsets, k) / step**k
    column = np.zeros(n)
    for off, w in zip(offsets, weights):
        column[(-off) % n] += w
    return circulant(column)


def time_stencil(index: int, count: int, order: int = 4) -> tuple[np.ndarray, np.ndarray]:
    """Offsets and first-derivative weights (unit spacing) for sample `index` of `count`.

    Centered when the window fits, otherwise shifted to stay inside [0, count).
    """
    if count < 3:
        raise ValueError("at least 3 samples are needed for a time derivative")
    width = min(order + 1, count if count % 2 else count - 1)
    width = max(width, 3)
    if width > count:
        width = count
    half = width // 2
    start = min(max(index - half, 0), count - width)
    offsets = np.arange(start, start + width) - index
    return offsets, fd_weights(offsets, 1)
