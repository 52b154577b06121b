import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from transhash import TransitiveHashing
from transhash.core_types import Ablation


@pytest.fixture(scope="module")
def fitted(small_data):
    d = small_data
    rel = np.column_stack([d.relations.i, d.relations.j, d.relations.s])
    est = TransitiveHashing(n_bits=8, hidden_sizes_x=(16,), hidden_sizes_y=(16,), epochs=2,
                            batch_size=16, learning_rate=1e-4, random_state=5)
    return est.fit(d.aux_x.features, d.aux_y.features, rel, X_target=d.query.features,
                   Y_target=d.database.features, x_labels=d.aux_x.labels,
                   y_labels=d.aux_y.labels)


def test_params_round_trip():
    est = TransitiveHashing(n_bits=24, mu=3.0, ablation="no-mmd")
    params = est.get_params()
    assert params["n_bits"] == 24 and params["ablation"] == "no-mmd"
    twin = clone(est)
    assert twin.get_params() == params
    est.set_params(lam=0.5)
    cfg = est.to_config()
    assert cfg.lam == 0.5 and cfg.ablation is Ablation.NO_MMD and cfg.effective_mu == 0.0


def test_not_fitted():
    with pytest.raises(NotFittedError):
        TransitiveHashing().transform(np.ones((2, 3)))


def test_transform_and_encode(fitted, small_data):
    z = fitted.transform(small_data.query.features, "x")
    assert z.shape == (len(small_data.query), 8) and np.all(np.abs(z) < 1)
    h = fitted.encode(small_data.database.features, "y")
    assert set(np.unique(h)) <= {-1, 1}
    np.testing.assert_array_equal(h, np.where(fitted.transform(small_data.database.features, "y")
                                              > 0, 1, -1))
    assert len(fitted.log_) == 2


def test_dimension_check(fitted):
    with pytest.raises(ValueError, match="expects 12"):
        fitted.transform(np.ones((2, 10)), "x")


def test_score_in_range(fitted, small_data):
    m = fitted.score(small_data.query.features, small_data.database.features,
                     small_data.query.labels, small_data.database.labels)
    assert 0 <= m <= 1


def test_bad_relations(small_data):
    with pytest.raises(ValueError):
        TransitiveHashing(epochs=0).fit(small_data.aux_x.features, small_data.aux_y.features,
                                        np.zeros((3, 2)))


def test_fit_without_target(small_data):
    d = small_data
    rel = np.column_stack([d.relations.i, d.relations.j, d.relations.s])
    est = TransitiveHashing(n_bits=4, hidden_sizes_x=(8,), hidden_sizes_y=(8,), epochs=1,
                            batch_size=8).fit(d.aux_x.features, d.aux_y.features, rel)
    assert est.encode(d.query.features).shape == (len(d.query), 4)
