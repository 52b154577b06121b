import numpy as np
import pytest

from transhash.core_types import TrainConfig, build_training_sets
from transhash.datagen import SynthSpec, generate


def small_spec(**overrides) -> SynthSpec:
    base = dict(categories=4, dim_x=12, dim_y=10, latent_dim=6, n_aux_x=120, n_aux_y=100,
                n_query=40, n_database=30, separation=3.0, noise_sigma=0.2,
                shift_translation=1.0, shift_rotation=0.3, n_relations=600, seed=7)
    base.update(overrides)
    return SynthSpec(**base)


def small_config(**overrides) -> TrainConfig:
    base = dict(bits=8, batch_size=16, epochs=3, hidden_sizes_x=(16,), hidden_sizes_y=(16,),
                learning_rate=1e-4, seed=3)
    base.update(overrides)
    return TrainConfig(**base)


@pytest.fixture(scope="session")
def small_data():
    return generate(small_spec())


@pytest.fixture(scope="session")
def small_sets(small_data):
    d = small_data
    return build_training_sets(d.aux_x, d.aux_y, d.relations, d.query, d.database,
                               20, 15, seed=1)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    from helpers import ACCEPTANCE_RESULTS
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number, title, passed, detail in sorted(ACCEPTANCE_RESULTS):
        status = "PASS" if passed else "FAIL"
        terminalreporter.write_line(f"[{status}] {number}. {title}: {detail}")
