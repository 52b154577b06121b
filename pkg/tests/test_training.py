import numpy as np
import pytest

from conftest import small_config, small_spec
from transhash.core_types import (FeatureDataset, RelationSet,
                                  build_training_sets)
from transhash.datagen import generate
from transhash.training import (DEFAULT_LR_GRID, GridSearchFailed, BatchSampler, TrainingDiverged,
                                grid_search_lr, init_towers, iterations_per_epoch, sample_batch,
                                train)


def _tiny_sets(s_values, n=6):
    rng = np.random.default_rng(0)
    x = FeatureDataset("X", "Auxiliary", rng.standard_normal((n, 3)))
    y = FeatureDataset("Y", "Auxiliary", rng.standard_normal((n, 2)))
    q = FeatureDataset("X", "Target", rng.standard_normal((4, 3)))
    d = FeatureDataset("Y", "Target", rng.standard_normal((4, 2)))
    idx = np.arange(len(s_values)) % n
    rel = RelationSet(idx, idx[::-1], s_values)
    return build_training_sets(x, y, rel, q, d, 4, 4, seed=0)


class TestSampleBatch:
    def test_only_dissimilar(self):
        sets = _tiny_sets([0] * 10)
        b = sample_batch(sets, small_config(batch_size=8), np.random.default_rng(1))
        assert b.pair_s.size > 0 and not b.pair_s.any()

    def test_deterministic(self, small_sets):
        cfg = small_config()
        a = sample_batch(small_sets, cfg, np.random.default_rng(4))
        b = sample_batch(small_sets, cfg, np.random.default_rng(4))
        for f in ("x_idx", "y_idx", "q_idx", "d_idx", "pair_i", "pair_j", "pair_s"):
            np.testing.assert_array_equal(getattr(a, f), getattr(b, f))

    def test_batch_of_four(self, small_sets):
        b = sample_batch(small_sets, small_config(batch_size=4), np.random.default_rng(0))
        assert b.x_idx.size == 2 and b.y_idx.size == 2
        assert b.q_idx.size == 2 and b.d_idx.size == 2
        assert b.pair_s.size == 4

    def test_blocks_and_balance(self, small_sets):
        sampler = BatchSampler(small_sets, 32)
        rng = np.random.default_rng(2)
        for _ in range(20):
            b = sampler.sample(rng)
            assert np.all(b.x_idx < small_sets.aux_x_count)
            assert np.all(b.q_idx >= small_sets.aux_x_count)
            assert np.all(b.d_idx >= small_sets.aux_y_count)
            assert b.pair_s.mean() >= 0.25
            # labels agree with category intersection (S itself is label-derived here)
            xl = small_sets.x_pool.labels
            yl = small_sets.y_pool.labels
            for i, j, s in zip(b.pair_i, b.pair_j, b.pair_s):
                assert s == int(bool(xl[b.x_idx[i]] & yl[b.y_idx[j]]))

    def test_relations_override_labels(self):
        sets = _tiny_sets([1, 1, 1])
        b = sample_batch(sets, small_config(batch_size=4), np.random.default_rng(0))
        # unlabeled items: only pairs listed in S are labeled
        assert set(b.pair_s.tolist()) == {1}

    def test_empty_relations(self):
        sets = _tiny_sets([])
        with pytest.raises(ValueError):
            sample_batch(sets, small_config(), np.random.default_rng(0))


class TestTrain:
    def test_zero_epochs(self, small_sets):
        cfg = small_config(epochs=0)
        tx, ty, log = train(small_sets, cfg)
        ix, iy = init_towers(small_sets, cfg)
        assert tx == ix and ty == iy and len(log) == 0

    def test_reproducible(self, small_sets):
        cfg = small_config(epochs=2)
        a = train(small_sets, cfg)
        b = train(small_sets, cfg)
        assert a[0] == b[0] and a[1] == b[1]
        assert [e.report for e in a[2].epochs] == [e.report for e in b[2].epochs]

    def test_log_has_one_entry_per_epoch(self, small_sets):
        _, _, log = train(small_sets, small_config(epochs=3))
        assert [e.epoch for e in log.epochs] == [0, 1, 2]
        lines = log.lines()
        assert lines[0] == "epoch L Q Dq Dd C seconds" and len(lines) == 4
        assert len(lines[1].split()) == 7

    def test_relationship_loss_decreases(self):
        data = generate(small_spec(noise_sigma=0.0, shift_translation=0.0, shift_rotation=0.0,
                                   separation=4.0))
        sets = build_training_sets(data.aux_x, data.aux_y, data.relations, data.query,
                                   data.database, 20, 20, seed=0)
        _, _, log = train(sets, small_config(epochs=30, hidden_sizes_x=(32,),
                                             hidden_sizes_y=(32,)))
        assert log.epochs[-1].report.L < log.epochs[0].report.L

    def test_no_mmd_keeps_target_rows_out(self, small_sets):
        seen = []
        train(small_sets, small_config(ablation="no-mmd", mu=5.0, epochs=1),
              on_step=lambda it, step: seen.append(step))
        assert seen
        for step in seen:
            assert np.all(step.residuals.q == 0) and np.all(step.residuals.d == 0)
            assert step.report.Dq > 0 or step.report.Dd > 0

    def test_mmd_trend(self):
        data = generate(small_spec(shift_translation=3.0, shift_rotation=1.0))
        sets = build_training_sets(data.aux_x, data.aux_y, data.relations, data.query,
                                   data.database, 40, 30, seed=0)
        _, _, log = train(sets, small_config(epochs=15, learning_rate=1e-5, mu=100.0,
                                             lam=3e-4, hidden_sizes_x=(32,),
                                             hidden_sizes_y=(32,)))
        first = log.epochs[0].report
        last = log.epochs[-1].report
        assert last.Dq + last.Dd <= 1.1 * (first.Dq + first.Dd)

    @pytest.mark.filterwarnings("ignore::RuntimeWarning")
    def test_divergence_guard(self, small_sets):
        # tanh bounds every loss term, so only overflowing parameters can diverge
        with pytest.raises(TrainingDiverged, match="iteration"):
            train(small_sets, small_config(learning_rate=1e250, epochs=5))

    def test_epoch_length(self, small_sets):
        assert iterations_per_epoch(small_sets, small_config(batch_size=16)) == 600 // 16
        assert iterations_per_epoch(small_sets, small_config(batch_size=10**4)) == 1


class TestGridSearch:
    def test_default_grid(self):
        assert len(DEFAULT_LR_GRID) == 9
        assert DEFAULT_LR_GRID[0] == pytest.approx(1e-5, rel=1e-12)
        assert DEFAULT_LR_GRID[-1] == pytest.approx(1e-1, rel=1e-12)
        ratios = np.array(DEFAULT_LR_GRID[1:]) / np.array(DEFAULT_LR_GRID[:-1])
        np.testing.assert_allclose(ratios, 10**0.5)

    def test_single_candidate(self, small_sets):
        res = grid_search_lr(small_sets, small_config(), lambda tx, ty: 0.5, grid=[3e-4],
                             epochs=1)
        assert res.best_learning_rate == 3e-4 and res.scores == {3e-4: 0.5}

    def test_tie_prefers_smaller(self, small_sets):
        res = grid_search_lr(small_sets, small_config(), lambda tx, ty: 1.0,
                             grid=[1e-3, 1e-4], epochs=1)
        assert res.best_learning_rate == 1e-4

    @pytest.mark.filterwarnings("ignore::RuntimeWarning")
    def test_all_fail(self, small_sets):
        with pytest.raises(GridSearchFailed, match="lr=1e\\+250.*lr=1e\\+300"):
            grid_search_lr(small_sets, small_config(), lambda tx, ty: 1.0,
                           grid=[1e250, 1e300], epochs=3)

    def test_picks_best_holdout(self, small_data, small_sets):
        from transhash.experiment import evaluate_towers
        res = grid_search_lr(small_sets, small_config(), lambda tx, ty:
                             evaluate_towers(tx, ty, small_data)[0].map,
                             grid=[1e-6, 1e-4], epochs=2)
        assert res.best_learning_rate == max(res.scores, key=res.scores.get)
