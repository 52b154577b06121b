"""Mini-batch sampling, the joint two-tower training loop, and learning-rate search."""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field
from typing import Callable, Iterable

import numpy as np

from .core_types import TrainConfig, TrainingSets
from .network import OptimizerState, Tower, backward, forward, init_tower, sgd_step
from .objective import BatchActivations, LossReport, resolve_gamma, residuals, total_objective

log = logging.getLogger(__name__)

# Named random sub-streams derived from the run seed.
STREAM_INIT = 0
STREAM_SAMPLING = 1

DIVERGENCE_LIMIT = 1e12
MIN_SIMILAR_FRACTION = 0.25


class TrainingDiverged(RuntimeError):
    def __init__(self, iteration: int, value: float):
        super().__init__(f"objective diverged at iteration {iteration}: C = {value!r}")
        self.iteration = iteration
        self.value = value


class GridSearchFailed(RuntimeError):
    pass


@dataclass
class Batch:
    """Pool row indices for the four blocks plus labeled pairs over the auxiliary rows.

    ``pair_i``/``pair_j`` index positions in ``x_idx``/``y_idx``.
    """

    x_idx: np.ndarray
    y_idx: np.ndarray
    q_idx: np.ndarray
    d_idx: np.ndarray
    pair_i: np.ndarray
    pair_j: np.ndarray
    pair_s: np.ndarray


@dataclass
class EpochRecord:
    epoch: int
    report: LossReport
    seconds: float

    def to_line(self) -> str:
        r = self.report
        return (f"{self.epoch} {r.L:.17g} {r.Q:.17g} {r.Dq:.17g} {r.Dd:.17g} {r.C:.17g} "
                f"{self.seconds:.6f}")


@dataclass
class TrainLog:
    config: TrainConfig
    epochs: list[EpochRecord] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.epochs)

    def lines(self) -> list[str]:
        return ["epoch L Q Dq Dd C seconds"] + [e.to_line() for e in self.epochs]


def _multi_hot(labels, n_classes: int) -> np.ndarray:
    m = np.zeros((len(labels), n_classes), dtype=bool)
    for r, labs in enumerate(labels):
        m[r, list(labs)] = True
    return m


class BatchSampler:
    """Draws mini-batches from fixed training pools.

    Half a batch of relations is drawn from S (at least a quarter of them
    similar when S has similar pairs); their X and Y items become the auxiliary
    rows and every cross pair among them is labeled, from S where the pair is
    in S and otherwise by category intersection of labeled items.
    """

    def __init__(self, sets: TrainingSets, batch_size: int):
        if len(sets.x_pool) == 0 or len(sets.y_pool) == 0:
            raise ValueError("training pools are empty")
        if len(sets.relations) == 0:
            raise ValueError("no supervised relations to sample from")
        self.sets = sets
        self.half = max(1, batch_size // 2)
        rel = sets.relations
        self._m = sets.aux_y_count
        keys = rel.i * self._m + rel.j
        order = np.argsort(keys, kind="stable")
        self._keys = keys[order]
        self._key_s = rel.s[order]
        self._similar = np.flatnonzero(rel.s == 1)
        aux_x = sets.x_pool.labels[:sets.aux_x_count]
        aux_y = sets.y_pool.labels[:sets.aux_y_count]
        n_classes = 1 + max((max(l) for l in aux_x + aux_y if l), default=-1)
        self._lx = _multi_hot(aux_x, n_classes)
        self._ly = _multi_hot(aux_y, n_classes)
        self._has_x = self._lx.any(axis=1)
        self._has_y = self._ly.any(axis=1)

    def sample(self, rng: np.random.Generator) -> Batch:
        rel = self.sets.relations
        half = self.half
        n_sim = min(half, math.ceil(half * MIN_SIMILAR_FRACTION)) if self._similar.size else 0
        picked = np.concatenate([
            rng.choice(self._similar, size=n_sim) if n_sim else np.empty(0, dtype=np.int64),
            rng.integers(0, len(rel), size=half - n_sim),
        ])
        x_idx = rel.i[picked]
        y_idx = rel.j[picked]

        ii, jj = np.meshgrid(np.arange(half), np.arange(half), indexing="ij")
        ii, jj = ii.ravel(), jj.ravel()
        gx, gy = x_idx[ii], y_idx[jj]
        keys = gx * self._m + gy
        pos = np.minimum(np.searchsorted(self._keys, keys), len(self._keys) - 1)
        in_s = self._keys[pos] == keys
        labeled = in_s | (self._has_x[gx] & self._has_y[gy])
        s = np.where(in_s, self._key_s[pos],
                     (self._lx[gx] & self._ly[gy]).any(axis=1).astype(np.int64))
        ii, jj, s = ii[labeled], jj[labeled], s[labeled]

        n_pos = int(s.sum())
        if 0 < n_pos and n_pos < MIN_SIMILAR_FRACTION * s.size:
            # Replicate similar pairs k times so that k*n_pos >= 0.25 * (n + (k-1)*n_pos).
            n_neg = s.size - n_pos
            k = math.ceil(MIN_SIMILAR_FRACTION * n_neg / ((1 - MIN_SIMILAR_FRACTION) * n_pos))
            sim = np.flatnonzero(s == 1)
            extra = np.tile(sim, k - 1)
            ii = np.concatenate([ii, ii[extra]])
            jj = np.concatenate([jj, jj[extra]])
            s = np.concatenate([s, s[extra]])

        return Batch(x_idx, y_idx, self._target(rng, self.sets.aux_x_count, len(self.sets.x_pool)),
                     self._target(rng, self.sets.aux_y_count, len(self.sets.y_pool)), ii, jj, s)

    def _target(self, rng, start: int, stop: int) -> np.ndarray:
        n = stop - start
        if n == 0:
            return np.empty(0, dtype=np.int64)
        return start + rng.choice(n, size=self.half, replace=n < self.half)


def sample_batch(sets: TrainingSets, cfg: TrainConfig, rng: np.random.Generator) -> Batch:
    return BatchSampler(sets, cfg.batch_size).sample(rng)


def init_towers(sets: TrainingSets, cfg: TrainConfig) -> tuple[Tower, Tower]:
    tx = init_tower((sets.x_pool.dim, *cfg.hidden_sizes_x, cfg.bits), [cfg.seed, STREAM_INIT, 0])
    ty = init_tower((sets.y_pool.dim, *cfg.hidden_sizes_y, cfg.bits), [cfg.seed, STREAM_INIT, 1])
    return tx, ty


@dataclass
class StepResult:
    report: LossReport
    batch_activations: BatchActivations
    residuals: tuple
    # False once the hash-layer pre-activations overflow; tanh would otherwise hide it.
    finite: bool = True


def train_step(tx: Tower, ty: Tower, sx: OptimizerState, sy: OptimizerState,
               sets: TrainingSets, batch: Batch, cfg: TrainConfig) -> StepResult:
    """One joint update of both towers from a single batch.

    The towers are left untouched when the forward pass overflowed.
    """
    fx = forward(tx, sets.x_pool.features[np.concatenate([batch.x_idx, batch.q_idx])])
    fy = forward(ty, sets.y_pool.features[np.concatenate([batch.y_idx, batch.d_idx])])
    nx, ny = batch.x_idx.size, batch.y_idx.size
    acts = BatchActivations(fx.z[:nx], fy.z[:ny], fx.z[nx:], fy.z[ny:],
                            batch.pair_i, batch.pair_j, batch.pair_s)
    gamma = resolve_gamma(acts, cfg)
    report = total_objective(acts, cfg, gamma)
    px, py = fx.pre[-1], fy.pre[-1]
    finite = bool(np.isfinite(px).all() and np.isfinite(py).all())
    res = residuals(acts, cfg, (px[:nx], py[:ny], px[nx:], py[ny:]), gamma)
    if finite:
        gx = backward(tx, fx, np.vstack([res.x, res.q]))
        gy = backward(ty, fy, np.vstack([res.y, res.d]))
        sgd_step(tx, gx, sx)
        sgd_step(ty, gy, sy)
    return StepResult(report, acts, res, finite)


def iterations_per_epoch(sets: TrainingSets, cfg: TrainConfig) -> int:
    return max(1, len(sets.relations) // cfg.batch_size)


def train(sets: TrainingSets, cfg: TrainConfig,
          on_step: Callable[[int, StepResult], None] | None = None
          ) -> tuple[Tower, Tower, TrainLog]:
    """Jointly train both towers on the total objective.

    Each epoch runs ``|S| // batch_size`` iterations (at least one). The epoch
    record holds the mean loss report over that epoch's batches.
    """
    tx, ty = init_towers(sets, cfg)
    sx = OptimizerState.for_tower(tx, cfg.momentum, cfg.learning_rate, cfg.hash_lr_mult)
    sy = OptimizerState.for_tower(ty, cfg.momentum, cfg.learning_rate, cfg.hash_lr_mult)
    train_log = TrainLog(cfg)
    if cfg.epochs == 0:
        return tx, ty, train_log
    sampler = BatchSampler(sets, cfg.batch_size)
    rng = np.random.default_rng([cfg.seed, STREAM_SAMPLING])
    n_iter = iterations_per_epoch(sets, cfg)
    it = 0
    for epoch in range(cfg.epochs):
        t0 = time.perf_counter()
        acc = np.zeros(5)
        for _ in range(n_iter):
            step = train_step(tx, ty, sx, sy, sets, sampler.sample(rng), cfg)
            c = step.report.C if step.finite else math.nan
            if not math.isfinite(c) or c > DIVERGENCE_LIMIT:
                raise TrainingDiverged(it, c)
            acc += step.report
            if on_step is not None:
                on_step(it, step)
            it += 1
        record = EpochRecord(epoch, LossReport(*(acc / n_iter)), time.perf_counter() - t0)
        train_log.epochs.append(record)
        log.debug("epoch %d: %s", epoch, record.to_line())
    return tx, ty, train_log


DEFAULT_LR_GRID = tuple(10.0 ** (-5 + 0.5 * k) for k in range(9))


@dataclass
class GridSearchResult:
    best_learning_rate: float
    scores: dict[float, float]
    failures: dict[float, str]


def grid_search_lr(sets: TrainingSets, cfg: TrainConfig,
                   holdout: Callable[[Tower, Tower], float],
                   grid: Iterable[float] = DEFAULT_LR_GRID,
                   epochs: int | None = None) -> GridSearchResult:
    """Train one model per candidate rate and keep the best holdout score.

    Ties go to the smaller rate. ``epochs`` overrides the config's budget.
    """
    grid = sorted(float(g) for g in grid)
    if not grid:
        raise ValueError("learning-rate grid is empty")
    scores, failures = {}, {}
    for lr in grid:
        run_cfg = cfg.with_(learning_rate=lr, epochs=cfg.epochs if epochs is None else epochs)
        try:
            tx, ty, _ = train(sets, run_cfg)
        except TrainingDiverged as exc:
            failures[lr] = str(exc)
            continue
        score = float(holdout(tx, ty))
        if not math.isfinite(score):
            failures[lr] = f"holdout score is {score!r}"
            continue
        scores[lr] = score
    if not scores:
        detail = "; ".join(f"lr={lr:g}: {msg}" for lr, msg in failures.items())
        raise GridSearchFailed(f"every learning-rate candidate failed: {detail}")
    best = max(scores, key=lambda lr: (scores[lr], -lr))
    return GridSearchResult(best, scores, failures)
