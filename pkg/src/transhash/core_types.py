"""Datasets, supervised relations, hash codes and training configuration."""

from __future__ import annotations

import enum
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np


class Modality(str, enum.Enum):
    X = "X"
    Y = "Y"


class Domain(str, enum.Enum):
    AUXILIARY = "Auxiliary"
    TARGET = "Target"


class Ablation(str, enum.Enum):
    FULL = "full"
    IP = "ip"
    NO_MMD = "no-mmd"
    NO_QUANT = "no-quant"


MEDIAN = "median"


def _as_labels(labels) -> tuple[frozenset, ...]:
    return tuple(frozenset(int(c) for c in item) for item in labels)


@dataclass(frozen=True, eq=False)
class FeatureDataset:
    """Feature rows of one modality from one domain, with per-item category sets.

    Unlabeled items carry an empty label set.
    """

    modality: Modality
    domain: Domain
    features: np.ndarray
    labels: tuple[frozenset, ...] = ()

    def __post_init__(self):
        feats = np.array(self.features, dtype=np.float64)
        if feats.ndim != 2:
            raise ValueError(f"features must be 2-dimensional, got shape {feats.shape}")
        if not np.all(np.isfinite(feats)):
            raise ValueError("features contain non-finite values")
        feats.setflags(write=False)
        labels = _as_labels(self.labels) if len(self.labels) else (frozenset(),) * feats.shape[0]
        if len(labels) != feats.shape[0]:
            raise ValueError(f"{feats.shape[0]} feature rows but {len(labels)} label sets")
        object.__setattr__(self, "modality", Modality(self.modality))
        object.__setattr__(self, "domain", Domain(self.domain))
        object.__setattr__(self, "features", feats)
        object.__setattr__(self, "labels", labels)

    def __len__(self) -> int:
        return self.features.shape[0]

    @property
    def dim(self) -> int:
        return self.features.shape[1]

    def __eq__(self, other) -> bool:
        if not isinstance(other, FeatureDataset):
            return NotImplemented
        return (
            self.modality == other.modality
            and self.domain == other.domain
            and self.features.shape == other.features.shape
            and bool(np.array_equal(self.features, other.features))
            and self.labels == other.labels
        )

    def subset(self, idx) -> "FeatureDataset":
        idx = np.asarray(idx, dtype=np.intp)
        return FeatureDataset(self.modality, self.domain, self.features[idx],
                              tuple(self.labels[i] for i in idx))


def labels_intersect(a: frozenset, b: frozenset) -> int:
    return int(not a.isdisjoint(b))


@dataclass(frozen=True, eq=False)
class RelationSet:
    """Supervised cross-modal pairs (i into the X set, j into the Y set, s in {0, 1})."""

    i: np.ndarray
    j: np.ndarray
    s: np.ndarray

    def __post_init__(self):
        i = np.asarray(self.i, dtype=np.int64).ravel()
        j = np.asarray(self.j, dtype=np.int64).ravel()
        s = np.asarray(self.s, dtype=np.int64).ravel()
        if not (i.size == j.size == s.size):
            raise ValueError("relation index and label arrays differ in length")
        if np.any((s != 0) & (s != 1)):
            raise ValueError("relation labels must be 0 or 1")
        if np.any(i < 0) or np.any(j < 0):
            raise ValueError("relation indices must be nonnegative")
        for name, arr in (("i", i), ("j", j), ("s", s)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @classmethod
    def from_pairs(cls, pairs: Sequence[tuple[int, int, int]]) -> "RelationSet":
        arr = np.asarray(list(pairs), dtype=np.int64).reshape(-1, 3)
        return cls(arr[:, 0], arr[:, 1], arr[:, 2])

    @classmethod
    def from_labels(cls, x: FeatureDataset, y: FeatureDataset, i, j) -> "RelationSet":
        """Label the given (i, j) pairs by category-set intersection."""
        i = np.asarray(i, dtype=np.int64)
        j = np.asarray(j, dtype=np.int64)
        s = [labels_intersect(x.labels[a], y.labels[b]) for a, b in zip(i, j)]
        return cls(i, j, np.asarray(s, dtype=np.int64))

    def __len__(self) -> int:
        return int(self.s.size)

    def __eq__(self, other) -> bool:
        if not isinstance(other, RelationSet):
            return NotImplemented
        return all(np.array_equal(getattr(self, k), getattr(other, k)) for k in "ijs")

    def check_bounds(self, n_x: int, n_y: int) -> None:
        if len(self) and (self.i.max() >= n_x or self.j.max() >= n_y):
            raise ValueError(f"relation indices exceed dataset sizes ({n_x}, {n_y})")


@dataclass(frozen=True, eq=False)
class TrainingSets:
    """Training pools: auxiliary rows first, then sampled target rows."""

    x_pool: FeatureDataset
    y_pool: FeatureDataset
    aux_x_count: int
    aux_y_count: int
    relations: RelationSet

    def __post_init__(self):
        if not 0 <= self.aux_x_count <= len(self.x_pool):
            raise ValueError("aux_x_count out of range")
        if not 0 <= self.aux_y_count <= len(self.y_pool):
            raise ValueError("aux_y_count out of range")
        self.relations.check_bounds(self.aux_x_count, self.aux_y_count)

    @property
    def n_hat(self) -> int:
        return len(self.x_pool) - self.aux_x_count

    @property
    def m_hat(self) -> int:
        return len(self.y_pool) - self.aux_y_count


def _concat(a: FeatureDataset, b: FeatureDataset) -> FeatureDataset:
    return FeatureDataset(a.modality, a.domain, np.vstack([a.features, b.features]),
                          a.labels + b.labels)


def build_training_sets(aux_x: FeatureDataset, aux_y: FeatureDataset, relations: RelationSet,
                        query: FeatureDataset, database: FeatureDataset,
                        n_hat: int, m_hat: int, seed: int) -> TrainingSets:
    """Pool the auxiliary sets with ``n_hat`` query and ``m_hat`` database items.

    Target items are drawn without replacement; the draw depends only on ``seed``.
    """
    if aux_x.modality != Modality.X or query.modality != Modality.X:
        raise ValueError("aux_x and query must both be modality X")
    if aux_y.modality != Modality.Y or database.modality != Modality.Y:
        raise ValueError("aux_y and database must both be modality Y")
    if aux_x.dim != query.dim or aux_y.dim != database.dim:
        raise ValueError("auxiliary and target feature dimensions differ")
    if not 0 <= n_hat <= len(query):
        raise ValueError(f"n_hat={n_hat} exceeds the {len(query)} query items")
    if not 0 <= m_hat <= len(database):
        raise ValueError(f"m_hat={m_hat} exceeds the {len(database)} database items")
    relations.check_bounds(len(aux_x), len(aux_y))
    rng = np.random.default_rng([seed, 3])
    qi = np.sort(rng.choice(len(query), size=n_hat, replace=False))
    di = np.sort(rng.choice(len(database), size=m_hat, replace=False))
    return TrainingSets(
        x_pool=_concat(aux_x, query.subset(qi)),
        y_pool=_concat(aux_y, database.subset(di)),
        aux_x_count=len(aux_x),
        aux_y_count=len(aux_y),
        relations=relations,
    )


@dataclass(frozen=True, eq=False)
class CodeTable:
    """Bit-packed codes: one row of uint64 words per item, most significant bit first.

    A set bit encodes +1, a clear bit -1. Pad bits past ``bits`` are always zero.
    """

    bits: int
    words: np.ndarray

    def __post_init__(self):
        if self.bits < 1:
            raise ValueError("bits must be >= 1")
        words = np.asarray(self.words, dtype=np.uint64)
        n_words = -(-self.bits // 64)
        if words.ndim != 2 or words.shape[1] != n_words:
            raise ValueError(f"expected {n_words} words per code, got shape {words.shape}")
        pad = 64 * n_words - self.bits
        if pad and np.any(words[:, -1] & np.uint64((1 << pad) - 1)):
            raise ValueError("pad bits must be zero")
        words = words.copy()
        words.setflags(write=False)
        object.__setattr__(self, "words", words)

    def __len__(self) -> int:
        return self.words.shape[0]

    @property
    def item_count(self) -> int:
        return len(self)

    def __eq__(self, other) -> bool:
        if not isinstance(other, CodeTable):
            return NotImplemented
        return self.bits == other.bits and np.array_equal(self.words, other.words)


@dataclass(frozen=True)
class TrainConfig:
    """Hyperparameters for one training run.

    ``gamma`` is either a positive float (fixed kernel bandwidth) or ``"median"``
    for the per-batch median heuristic.
    """

    bits: int = 16
    lam: float = 3e-4
    mu: float = 100.0
    gamma: float | str = MEDIAN
    learning_rate: float = 1e-5
    momentum: float = 0.9
    batch_size: int = 64
    epochs: int = 50
    seed: int = 0
    hidden_sizes_x: tuple[int, ...] = (1000, 500)
    hidden_sizes_y: tuple[int, ...] = (1000, 500)
    ablation: Ablation = Ablation.FULL
    hash_lr_mult: float = 10.0

    def __post_init__(self):
        object.__setattr__(self, "ablation", Ablation(self.ablation))
        object.__setattr__(self, "hidden_sizes_x", tuple(int(h) for h in self.hidden_sizes_x))
        object.__setattr__(self, "hidden_sizes_y", tuple(int(h) for h in self.hidden_sizes_y))
        if self.bits < 1:
            raise ValueError("bits must be >= 1")
        if self.batch_size < 2:
            raise ValueError("batch_size must be >= 2")
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")
        if not 0 <= self.momentum < 1:
            raise ValueError("momentum must lie in [0, 1)")
        if self.lam < 0 or self.mu < 0:
            raise ValueError("lam and mu must be nonnegative")
        if self.epochs < 0:
            raise ValueError("epochs must be nonnegative")
        if isinstance(self.gamma, str):
            if self.gamma != MEDIAN:
                raise ValueError(f"gamma must be a positive number or {MEDIAN!r}")
        elif not self.gamma > 0:
            raise ValueError("gamma must be positive")
        if any(h < 1 for h in self.hidden_sizes_x + self.hidden_sizes_y):
            raise ValueError("hidden sizes must be positive")

    @property
    def effective_lam(self) -> float:
        return 0.0 if self.ablation == Ablation.NO_QUANT else float(self.lam)

    @property
    def effective_mu(self) -> float:
        return 0.0 if self.ablation == Ablation.NO_MMD else float(self.mu)

    def with_(self, **changes) -> "TrainConfig":
        return replace(self, **changes)
