"""scikit-learn style front end for two-tower transitive hashing."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted

from .core_types import (Ablation, Domain, FeatureDataset, Modality, RelationSet, TrainConfig,
                         TrainingSets, build_training_sets)
from .evaluation import mean_average_precision
from .network import forward
from .retrieval import HammingIndex, binarize, to_signs
from .training import train


def _relations_arg(relations, n_x: int, n_y: int) -> RelationSet:
    if isinstance(relations, RelationSet):
        rel = relations
    else:
        arr = np.asarray(relations, dtype=np.int64)
        if arr.ndim != 2 or arr.shape[1] != 3:
            raise ValueError("relations must be an (n, 3) array of (i, j, s) rows")
        rel = RelationSet(arr[:, 0], arr[:, 1], arr[:, 2])
    rel.check_bounds(n_x, n_y)
    return rel


class TransitiveHashing(BaseEstimator):
    """Learns paired hash functions for two modalities from auxiliary cross-modal pairs.

    Parameters mirror :class:`~transhash.core_types.TrainConfig`; ``n_bits`` is
    the code length and ``random_state`` the run seed.

    ``fit`` takes auxiliary features of both modalities, their supervised
    relations, and optional unlabeled target-domain features whose code
    distributions are aligned with the auxiliary ones.
    """

    def __init__(self, n_bits=16, lam=3e-4, mu=100.0, gamma="median", learning_rate=1e-5,
                 momentum=0.9, batch_size=64, epochs=50, hidden_sizes_x=(1000, 500),
                 hidden_sizes_y=(1000, 500), hash_lr_mult=10.0, ablation="full",
                 random_state=0):
        self.n_bits = n_bits
        self.lam = lam
        self.mu = mu
        self.gamma = gamma
        self.learning_rate = learning_rate
        self.momentum = momentum
        self.batch_size = batch_size
        self.epochs = epochs
        self.hidden_sizes_x = hidden_sizes_x
        self.hidden_sizes_y = hidden_sizes_y
        self.hash_lr_mult = hash_lr_mult
        self.ablation = ablation
        self.random_state = random_state

    def to_config(self) -> TrainConfig:
        return TrainConfig(
            bits=int(self.n_bits), lam=float(self.lam), mu=float(self.mu),
            gamma=self.gamma if isinstance(self.gamma, str) else float(self.gamma),
            learning_rate=float(self.learning_rate), momentum=float(self.momentum),
            batch_size=int(self.batch_size), epochs=int(self.epochs),
            seed=int(self.random_state or 0), hidden_sizes_x=tuple(self.hidden_sizes_x),
            hidden_sizes_y=tuple(self.hidden_sizes_y), ablation=Ablation(self.ablation),
            hash_lr_mult=float(self.hash_lr_mult))

    def fit(self, X, Y, relations, X_target=None, Y_target=None, x_labels=None, y_labels=None):
        """Fit on auxiliary features ``X``/``Y`` and their ``(i, j, s)`` relations.

        All rows of ``X_target``/``Y_target`` join the training pools as
        unlabeled target items. Optional auxiliary label sets let the sampler
        label cross pairs that are not listed in ``relations``.
        """
        X = check_array(X, dtype=np.float64)
        Y = check_array(Y, dtype=np.float64)
        rel = _relations_arg(relations, X.shape[0], Y.shape[0])
        aux_x = FeatureDataset(Modality.X, Domain.AUXILIARY, X, x_labels or ())
        aux_y = FeatureDataset(Modality.Y, Domain.AUXILIARY, Y, y_labels or ())
        q = self._target(X_target, X.shape[1], Modality.X)
        d = self._target(Y_target, Y.shape[1], Modality.Y)
        sets = build_training_sets(aux_x, aux_y, rel, q, d, len(q), len(d),
                                   int(self.random_state or 0))
        return self.fit_sets(sets)

    @staticmethod
    def _target(F, dim, modality) -> FeatureDataset:
        if F is None:
            F = np.empty((0, dim))
        else:
            F = check_array(F, dtype=np.float64)
        return FeatureDataset(modality, Domain.TARGET, F)

    def fit_sets(self, sets: TrainingSets):
        """Fit on pre-built training pools."""
        cfg = self.to_config()
        self.tower_x_, self.tower_y_, self.log_ = train(sets, cfg)
        self.config_ = cfg
        self.n_features_x_ = sets.x_pool.dim
        self.n_features_y_ = sets.y_pool.dim
        return self

    def _tower(self, modality):
        check_is_fitted(self, ("tower_x_", "tower_y_"))
        mod = Modality(str(modality).upper())
        return self.tower_x_ if mod == Modality.X else self.tower_y_

    def transform(self, F, modality="x"):
        """Continuous hash-layer activations in (-1, 1)."""
        tower = self._tower(modality)
        F = check_array(F, dtype=np.float64)
        if F.shape[1] != tower.d_in:
            raise ValueError(f"X has {F.shape[1]} features, the {modality} tower expects "
                             f"{tower.d_in}")
        return forward(tower, F).z

    def encode_table(self, F, modality="x"):
        return binarize(self.transform(F, modality))

    def encode(self, F, modality="x"):
        """+1/-1 hash codes, one row per item."""
        return to_signs(self.encode_table(F, modality))

    def score(self, X_query, Y_database, query_labels, database_labels, top_r=None):
        """MAP of X-to-Y Hamming ranking."""
        q = self.encode_table(X_query, "x")
        db = HammingIndex(self.encode_table(Y_database, "y"), Modality.Y)
        return mean_average_precision(q, query_labels, db, database_labels, top_r).map
