import numpy as np
import pytest

from fsamlab.config import ExperimentConfig

ACCEPTANCE_LINES = []


@pytest.fixture(autouse=True)
def _no_seed_override(monkeypatch):
    monkeypatch.delenv("FSAMLAB_SEED", raising=False)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def small_cfg():
    return ExperimentConfig().override({
        "run.steps": 60, "run.eval_every": 20, "run.batch_size": 16,
        "data.n": 120, "data.n_eval": 60, "model.layers": "2,6,2",
        "fsam.interval": 20, "fsam.n_fisher": 32,
    })


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
