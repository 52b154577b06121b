"""Dense float64 primitives shared by the rest of the package."""

from __future__ import annotations

import math

import numpy as np

# Largest float64 strictly below 1; keeps tanh outputs inside the open interval.
_TANH_BOUND = float(np.nextafter(1.0, 0.0))


def as_matrix(a, name: str = "matrix") -> np.ndarray:
    m = np.asarray(a, dtype=np.float64)
    if m.ndim != 2:
        raise ValueError(f"{name} must be 2-dimensional, got shape {m.shape}")
    return m


def matmul(a, b) -> np.ndarray:
    a = as_matrix(a, "a")
    b = as_matrix(b, "b")
    if a.shape[1] != b.shape[0]:
        raise ValueError(f"cannot multiply shapes {a.shape} and {b.shape}")
    return a @ b


def tanh_elementwise(m) -> np.ndarray:
    """Elementwise tanh, clipped so every entry lies strictly inside (-1, 1)."""
    return np.clip(np.tanh(np.asarray(m, dtype=np.float64)), -_TANH_BOUND, _TANH_BOUND)


def sigmoid(x):
    """Logistic function, evaluated on the overflow-free branch for each sign of x."""
    x = np.asarray(x, dtype=np.float64)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out if out.ndim else float(out)


def softplus(x):
    """log(1 + e^x) without overflow."""
    x = np.asarray(x, dtype=np.float64)
    out = np.maximum(x, 0.0) + np.log1p(np.exp(-np.abs(x)))
    return out if out.ndim else float(out)


def gaussian_kernel(z1, z2, gamma: float) -> float:
    z1 = np.asarray(z1, dtype=np.float64).ravel()
    z2 = np.asarray(z2, dtype=np.float64).ravel()
    if z1.shape != z2.shape:
        raise ValueError(f"vector lengths differ: {z1.size} vs {z2.size}")
    if not gamma > 0:
        raise ValueError(f"gamma must be positive, got {gamma}")
    return math.exp(-gamma * float(np.sum((z1 - z2) ** 2)))


def pairwise_sq_dists(a, b, chunk: int = 256) -> np.ndarray:
    """Squared Euclidean distances between the rows of ``a`` and ``b``.

    Computed from explicit differences rather than the ``|a|^2 + |b|^2 - 2ab``
    expansion, so the result is nonnegative and ``d(a, b) == d(b, a).T`` holds
    bit-for-bit.
    """
    a = as_matrix(a, "a")
    b = as_matrix(b, "b")
    if a.shape[1] != b.shape[1]:
        raise ValueError(f"column counts differ: {a.shape} vs {b.shape}")
    out = np.empty((a.shape[0], b.shape[0]))
    for start in range(0, a.shape[0], chunk):
        diff = a[start:start + chunk, None, :] - b[None, :, :]
        out[start:start + chunk] = np.einsum("ijk,ijk->ij", diff, diff)
    return out


def gaussian_kernel_matrix(a, b, gamma: float) -> np.ndarray:
    if not gamma > 0:
        raise ValueError(f"gamma must be positive, got {gamma}")
    return np.exp(-gamma * pairwise_sq_dists(a, b))
