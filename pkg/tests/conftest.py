import numpy as np
import pytest

from smtpcps.config import RunConfig
from smtpcps.controller import build_family
from smtpcps.harness import EpisodeConfig, initial_conditions


def make_family(cfg: RunConfig):
    return build_family(cfg.controller_model(), cfg.gain(), cfg.input_set(), cfg.N, cfg.alpha_max, cfg.tolerance())


def make_episode(cfg: RunConfig, x0, **kwargs) -> EpisodeConfig:
    message, length = cfg.message_spec()
    settings = dict(model=cfg.linear_model(), d_true=cfg.d_true(), d_c=cfg.d_c(), alpha=cfg.alpha, x0=tuple(x0),
                    steps=cfg.steps, message=message, message_bits=length, bit_costs=cfg.costs(),
                    tol=cfg.tolerance())
    settings.update(kwargs)
    return EpisodeConfig(**settings)


@pytest.fixture(scope="session")
def reference_config():
    return RunConfig()


@pytest.fixture(scope="session")
def reference_family(reference_config):
    return make_family(reference_config)


@pytest.fixture(scope="session")
def reference_x0(reference_family):
    return initial_conditions(reference_family)


@pytest.fixture(scope="session")
def small_config():
    return RunConfig(N=30, steps=20, reps=2, alphas=(2.0, 8.0))


@pytest.fixture(scope="session")
def small_family(small_config):
    return make_family(small_config)


@pytest.fixture
def rng():
    return np.random.default_rng(20240517)
