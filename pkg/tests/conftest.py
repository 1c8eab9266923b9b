import time

import numpy as np
import pytest

from vrutwin.predictor import ModelConfig, init_model, train
from vrutwin.scenario import ROLE_SETUP, GenConfig, gen_dataset, make_site

CORPUS_SEED = 1
TEST_SEED = 99
N_RUNS = 20
TRAIN_SECONDS: dict[str, float] = {}
ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def site():
    return make_site()


@pytest.fixture(scope="session")
def corpus(site):
    return gen_dataset(site, GenConfig(seed=CORPUS_SEED), N_RUNS)


@pytest.fixture(scope="session")
def test_corpus(site):
    return gen_dataset(site, GenConfig(seed=TEST_SEED), 10)


@pytest.fixture(scope="session")
def trained(corpus):
    """Full-size models trained on the zero-noise corpus: role -> (model, report).

    Wall time goes in ``TRAIN_SECONDS["clean"]`` for the runtime budget check.
    """
    t0 = time.perf_counter()
    out = {role: train(ModelConfig.for_role(role), corpus[role]) for role in ROLE_SETUP}
    TRAIN_SECONDS["clean"] = time.perf_counter() - t0
    return out


@pytest.fixture(scope="session")
def models(trained):
    return {role: m for role, (m, _) in trained.items()}


def tiny_config(role="pedestrian", **kw):
    kw.setdefault("input_steps", 4 if role == "pedestrian" else 10)
    return ModelConfig(role=role, enc1_units=4, enc2_units=4, dec_units=3, **kw)


@pytest.fixture
def tiny_models():
    """Small untrained models with the right roles, for fast engine plumbing tests."""
    return {role: init_model(tiny_config(role)) for role in ROLE_SETUP}


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def report():
    """Record one acceptance line; all lines are echoed again in the terminal summary."""

    def emit(criterion: int, ok: bool, detail: str) -> None:
        line = f"criterion {criterion}: {'PASS' if ok else 'FAIL'} {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)

    return emit


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
