import numpy as np
import pytest

from fsamlab.errors import ConfigError
from fsamlab.models import ModelSpec, ParamLayout, init_params, param_count, unflatten


@pytest.mark.parametrize("kind,sizes,expected", [
    ("logistic", (3, 1), 4),
    ("mlp", (2, 5, 2), 27),
    ("mlp", (10, 10, 10, 10), 330),
])
def test_param_count(kind, sizes, expected):
    assert param_count(ModelSpec(kind, sizes)) == expected


def test_param_count_independent_sum():
    sizes = (10, 10, 10, 10)
    total = 0
    for i in range(len(sizes) - 1):
        total += sizes[i] * sizes[i + 1] + sizes[i + 1]
    assert param_count(ModelSpec("mlp", sizes)) == total


@pytest.mark.parametrize("bad", [
    dict(kind="logistic", layer_sizes=(2, 3, 1)),
    dict(kind="mlp", layer_sizes=(2,)),
    dict(kind="mlp", layer_sizes=(2, 0, 1)),
    dict(kind="cnn", layer_sizes=(2, 1)),
    dict(kind="mlp", layer_sizes=(2, 1), activation="gelu"),
])
def test_invalid_specs(bad):
    with pytest.raises(ConfigError):
        ModelSpec(**bad)


def test_init_is_deterministic_and_sized():
    spec = ModelSpec("mlp", (4, 7, 3))
    a, b = init_params(spec, 42), init_params(spec, 42)
    assert a.tobytes() == b.tobytes()
    assert len(a) == param_count(spec)
    assert not np.array_equal(a, init_params(spec, 43))


def test_init_biases_zero_and_weights_bounded():
    spec = ModelSpec("mlp", (4, 7, 3))
    for seed in range(10):
        layers = unflatten(init_params(spec, seed), spec)
        for (W, b), n_in in zip(layers, (4, 7)):
            assert np.all(b == 0.0)
            bound = 1.0 / np.sqrt(n_in)
            for w in W.ravel():
                assert abs(w) <= bound
    (W, _), _ = unflatten(init_params(spec, 0), spec)
    assert np.all(np.abs(W) <= 0.5)


@pytest.mark.parametrize("spec", [
    ModelSpec("logistic", (3, 1)), ModelSpec("mlp", (2, 5, 2)),
    ModelSpec("mlp", (10, 10, 10, 10)), ModelSpec("quadratic", (6,)),
])
def test_layout_rows_partition(spec):
    layout = ParamLayout.of(spec)
    d = param_count(spec)
    assert layout.size == d
    hits = np.zeros(d, dtype=int)
    for row in layout.rows():
        hits[row] += 1
    assert np.all(hits == 1)


def test_layout_rows_are_neuron_fan_in():
    spec = ModelSpec("mlp", (3, 2, 1))
    rows = list(ParamLayout.of(spec).rows())
    sizes = [r.stop - r.start for r in rows]
    # layer 1: two rows of 3 weights + two bias rows; layer 2: one row of 2 + one bias
    assert sizes == [3, 3, 1, 1, 2, 1]
