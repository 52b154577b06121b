"""Hashing objective: pairwise cross-entropy, quantization, MMD, and their residuals.

All losses are sums over labeled pairs. Residuals are exact derivatives of the
total objective with respect to the hash-layer pre-activations z~, with the
kernel bandwidth held fixed for the batch.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .core_types import MEDIAN, Ablation, TrainConfig
from .numerics import as_matrix, gaussian_kernel_matrix, pairwise_sq_dists, sigmoid, softplus

# |z| floor inside the quantization loss and its derivative.
QUANT_EPS = 1e-6


@dataclass(frozen=True, eq=False)
class BatchActivations:
    """Hash-layer activations for one mini-batch.

    ``zx``/``zy`` are auxiliary rows of each modality, ``zq``/``zd`` target rows
    (query and database modality). Labeled pairs index rows of ``zx`` and ``zy``.
    """

    zx: np.ndarray
    zy: np.ndarray
    zq: np.ndarray
    zd: np.ndarray
    pair_i: np.ndarray
    pair_j: np.ndarray
    pair_s: np.ndarray

    def __post_init__(self):
        b = None
        for name in ("zx", "zy", "zq", "zd"):
            m = as_matrix(getattr(self, name), name)
            if m.size == 0:
                m = m.reshape(0, m.shape[1] if m.ndim == 2 else 0)
            if b is None:
                b = m.shape[1]
            elif m.shape[0] and m.shape[1] != b:
                raise ValueError(f"{name} has {m.shape[1]} columns, expected {b}")
            object.__setattr__(self, name, m)
        pi = np.asarray(self.pair_i, dtype=np.intp).ravel()
        pj = np.asarray(self.pair_j, dtype=np.intp).ravel()
        ps = np.asarray(self.pair_s, dtype=np.float64).ravel()
        if not (pi.size == pj.size == ps.size):
            raise ValueError("pair arrays differ in length")
        if pi.size and (pi.min() < 0 or pi.max() >= self.zx.shape[0]
                        or pj.min() < 0 or pj.max() >= self.zy.shape[0]):
            raise ValueError("pair index out of range")
        object.__setattr__(self, "pair_i", pi)
        object.__setattr__(self, "pair_j", pj)
        object.__setattr__(self, "pair_s", ps)

    @property
    def bits(self) -> int:
        return self.zx.shape[1]

    def inner_products(self) -> np.ndarray:
        # Index the small row-by-row Gram matrix rather than gathering one code row per
        # pair, so the per-pair work stays a lookup even for very large pair sets.
        return (self.zx @ self.zy.T)[self.pair_i, self.pair_j]


class LossReport(NamedTuple):
    L: float
    Q: float
    Dq: float
    Dd: float
    C: float


class Residuals(NamedTuple):
    x: np.ndarray
    y: np.ndarray
    q: np.ndarray
    d: np.ndarray


def _require_pairs(batch: BatchActivations) -> None:
    if batch.pair_s.size == 0:
        raise ValueError("batch has no labeled pairs")


def relationship_loss(batch: BatchActivations) -> float:
    _require_pairs(batch)
    a = batch.inner_products()
    return float(np.sum(softplus(a) - batch.pair_s * a))


def ip_loss(batch: BatchActivations, bits: int | None = None) -> float:
    """Squared error between the scaled inner product and the +-1 pair target."""
    _require_pairs(batch)
    bits = bits or batch.bits
    a = batch.inner_products()
    return float(np.sum((a / bits - (2.0 * batch.pair_s - 1.0)) ** 2))


def _clamped(z: np.ndarray) -> np.ndarray:
    return np.where(np.abs(z) < QUANT_EPS, np.where(z < 0, -QUANT_EPS, QUANT_EPS), z)


def _pair_counts(batch: BatchActivations) -> tuple[np.ndarray, np.ndarray]:
    return (np.bincount(batch.pair_i, minlength=batch.zx.shape[0]).astype(np.float64),
            np.bincount(batch.pair_j, minlength=batch.zy.shape[0]).astype(np.float64))


def quantization_loss(batch: BatchActivations) -> float:
    cx, cy = _pair_counts(batch)
    qx = -np.log(np.abs(_clamped(batch.zx))).sum(axis=1)
    qy = -np.log(np.abs(_clamped(batch.zy))).sum(axis=1)
    return float(cx @ qx + cy @ qy)


def mmd(sample_a, sample_b, gamma: float) -> float:
    """Biased (V-statistic) squared MMD with a Gaussian kernel, diagonal terms included."""
    a = as_matrix(sample_a, "sample_a")
    b = as_matrix(sample_b, "sample_b")
    if a.shape[0] == 0 or b.shape[0] == 0:
        raise ValueError("MMD needs two non-empty samples")
    if a.shape[1] != b.shape[1]:
        raise ValueError(f"column counts differ: {a.shape[1]} vs {b.shape[1]}")
    # Correctly rounded sums make the estimate independent of summation order,
    # so mmd(a, b) == mmd(b, a) exactly.
    kaa = math.fsum(gaussian_kernel_matrix(a, a, gamma).ravel()) / a.shape[0] ** 2
    kbb = math.fsum(gaussian_kernel_matrix(b, b, gamma).ravel()) / b.shape[0] ** 2
    kab = math.fsum(gaussian_kernel_matrix(a, b, gamma).ravel()) / (a.shape[0] * b.shape[0])
    return max(0.0, (kaa + kbb) - 2.0 * kab)


def mmd_gradients(a: np.ndarray, b: np.ndarray, gamma: float) -> tuple[np.ndarray, np.ndarray]:
    """Derivatives of :func:`mmd` with respect to every row of ``a`` and of ``b``."""
    n, m = a.shape[0], b.shape[0]
    kaa = gaussian_kernel_matrix(a, a, gamma)
    kbb = gaussian_kernel_matrix(b, b, gamma)
    kab = gaussian_kernel_matrix(a, b, gamma)

    def pull(k, u, v):
        # sum_j k_ij (u_i - v_j)
        return k.sum(axis=1)[:, None] * u - k @ v

    ga = -4.0 * gamma / n**2 * pull(kaa, a, a) + 4.0 * gamma / (n * m) * pull(kab, a, b)
    gb = -4.0 * gamma / m**2 * pull(kbb, b, b) + 4.0 * gamma / (n * m) * pull(kab.T, b, a)
    return ga, gb


def median_gamma(*samples) -> float:
    """1 / median of squared pairwise distances over the union of the samples."""
    rows = [as_matrix(s) for s in samples if np.asarray(s).size]
    z = np.vstack(rows)
    if z.shape[0] < 2:
        return 1.0
    d = pairwise_sq_dists(z, z)[np.triu_indices(z.shape[0], k=1)]
    med = float(np.median(d))
    return 1.0 / med if med > 0 else 1.0


def resolve_gamma(batch: BatchActivations, cfg: TrainConfig) -> float:
    if cfg.gamma == MEDIAN:
        return median_gamma(batch.zx, batch.zy, batch.zq, batch.zd)
    return float(cfg.gamma)


def _mmd_terms(batch: BatchActivations, gamma: float) -> tuple[float, float]:
    dq = mmd(batch.zx, batch.zq, gamma) if batch.zq.shape[0] and batch.zx.shape[0] else 0.0
    dd = mmd(batch.zy, batch.zd, gamma) if batch.zd.shape[0] and batch.zy.shape[0] else 0.0
    return dq, dd


def total_objective(batch: BatchActivations, cfg: TrainConfig,
                    gamma: float | None = None) -> LossReport:
    """C = L + lam * Q + mu * (Dq + Dd), with ablations applied.

    Under the IP ablation, L is the inner-product surrogate. Q, Dq and Dd are
    always reported, even when their weight is zero.
    """
    if gamma is None:
        gamma = resolve_gamma(batch, cfg)
    L = ip_loss(batch, cfg.bits) if cfg.ablation == Ablation.IP else relationship_loss(batch)
    Q = quantization_loss(batch)
    dq, dd = _mmd_terms(batch, gamma)
    C = L + cfg.effective_lam * Q + cfg.effective_mu * (dq + dd)
    return LossReport(L, Q, dq, dd, C)


def activation_gradients(batch: BatchActivations, cfg: TrainConfig,
                         gamma: float | None = None) -> Residuals:
    """dC/dz for each activation block (before the tanh chain factor)."""
    if gamma is None:
        gamma = resolve_gamma(batch, cfg)
    _require_pairs(batch)
    a = batch.inner_products()
    if cfg.ablation == Ablation.IP:
        coef = 2.0 * (a / cfg.bits - (2.0 * batch.pair_s - 1.0)) / cfg.bits
    else:
        coef = sigmoid(a) - batch.pair_s
    nx, ny = batch.zx.shape[0], batch.zy.shape[0]
    g = np.bincount(batch.pair_i * ny + batch.pair_j, weights=coef,
                    minlength=nx * ny).reshape(nx, ny)
    gx = g @ batch.zy
    gy = g.T @ batch.zx

    lam = cfg.effective_lam
    if lam:
        cx, cy = _pair_counts(batch)
        gx -= lam * cx[:, None] / _clamped(batch.zx)
        gy -= lam * cy[:, None] / _clamped(batch.zy)

    gq = np.zeros_like(batch.zq)
    gd = np.zeros_like(batch.zd)
    mu = cfg.effective_mu
    if mu:
        if batch.zq.shape[0]:
            ax, aq = mmd_gradients(batch.zx, batch.zq, gamma)
            gx += mu * ax
            gq += mu * aq
        if batch.zd.shape[0]:
            ay, ad = mmd_gradients(batch.zy, batch.zd, gamma)
            gy += mu * ay
            gd += mu * ad
    return Residuals(gx, gy, gq, gd)


def residuals(batch: BatchActivations, cfg: TrainConfig, pre_activations,
              gamma: float | None = None) -> Residuals:
    """dC/dz~ for the four blocks, given their hash-layer pre-activations.

    ``pre_activations`` is ``(x, y, q, d)`` in the same row order as ``batch``.
    """
    grads = activation_gradients(batch, cfg, gamma)
    out = []
    for g, pre in zip(grads, pre_activations):
        pre = np.asarray(pre, dtype=np.float64).reshape(g.shape)
        out.append(g * (1.0 - np.tanh(pre) ** 2))
    return Residuals(*out)


def pointwise_costs(batch: BatchActivations, cfg: TrainConfig,
                    gamma: float | None = None) -> Residuals:
    """Per-item share of C for every row of the four blocks.

    Each pair's relationship term is charged to its X item; each item carries
    its own quantization terms; a kernel term between two rows of the same
    sample is charged to the first index and a cross-sample term is split
    evenly between its two rows. The shares sum to ``total_objective(...).C``.
    """
    if gamma is None:
        gamma = resolve_gamma(batch, cfg)
    _require_pairs(batch)
    a = batch.inner_products()
    if cfg.ablation == Ablation.IP:
        per_pair = (a / cfg.bits - (2.0 * batch.pair_s - 1.0)) ** 2
    else:
        per_pair = softplus(a) - batch.pair_s * a
    cost_x = np.bincount(batch.pair_i, weights=per_pair, minlength=batch.zx.shape[0])
    cost_y = np.zeros(batch.zy.shape[0])
    lam = cfg.effective_lam
    cx, cy = _pair_counts(batch)
    cost_x = cost_x + lam * cx * -np.log(np.abs(_clamped(batch.zx))).sum(axis=1)
    cost_y = cost_y + lam * cy * -np.log(np.abs(_clamped(batch.zy))).sum(axis=1)
    cost_q = np.zeros(batch.zq.shape[0])
    cost_d = np.zeros(batch.zd.shape[0])
    mu = cfg.effective_mu

    def shares(aux, tgt):
        n, m = aux.shape[0], tgt.shape[0]
        k_aux = gaussian_kernel_matrix(aux, aux, gamma).sum(axis=1) / n**2
        k_tgt = gaussian_kernel_matrix(tgt, tgt, gamma).sum(axis=1) / m**2
        kab = gaussian_kernel_matrix(aux, tgt, gamma)
        return (k_aux - kab.sum(axis=1) / (n * m),
                k_tgt - kab.sum(axis=0) / (n * m))

    if mu and batch.zq.shape[0] and batch.zx.shape[0]:
        sx, sq = shares(batch.zx, batch.zq)
        cost_x = cost_x + mu * sx
        cost_q = cost_q + mu * sq
    if mu and batch.zd.shape[0] and batch.zy.shape[0]:
        sy, sd = shares(batch.zy, batch.zd)
        cost_y = cost_y + mu * sy
        cost_d = cost_d + mu * sd
    return Residuals(cost_x, cost_y, cost_q, cost_d)
