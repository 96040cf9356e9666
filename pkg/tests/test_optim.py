import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fsamlab.errors import ConfigError, NonFiniteError, ShapeError
from fsamlab.optim import VARIANTS, OptimHyper, OptimizerState, base_step, current_lr, zero_state

LITERAL = OptimHyper(lr=0.1, beta1=0.0, beta2=0.999, delta=1e-8, weight_decay=0.0, variant="amsgrad")


def test_zero_state():
    s = zero_state(3, OptimHyper(delta=1e-8))
    assert s.t == 0
    np.testing.assert_array_equal(s.v_hat, [1e-8 ** 2] * 3)
    np.testing.assert_allclose(s.v_hat, 1e-16, rtol=1e-15)
    assert not s.m_buf.any() and not s.v.any()
    with pytest.raises(ValueError):
        zero_state(0, OptimHyper())


def test_state_serialization_roundtrip():
    s = zero_state(4, OptimHyper())
    _, s = base_step(s, np.ones(4), np.array([0.1, -2.0, 3.0, 0.0]), OptimHyper())
    back = OptimizerState.from_dict(json.loads(json.dumps(s.to_dict())))
    assert back.t == s.t
    for a, b in ((back.m_buf, s.m_buf), (back.v, s.v), (back.v_hat, s.v_hat)):
        assert a.tobytes() == b.tobytes()


def test_scalar_golden_trace():
    # hand trace: v0 = (1 - 0.999) * 1^2 = 1e-3, vhat0 = max(1e-16, 1e-3), dw = -0.1 / sqrt(1e-3)
    v0 = (1 - 0.999) * 1.0
    dw = -0.1 * 1.0 / math.sqrt(max(1e-16, v0))
    assert abs(dw - (-3.16228)) < 1e-5
    p, s = base_step(zero_state(1, LITERAL), np.array([0.5]), np.array([1.0]), LITERAL)
    assert s.t == 1
    assert s.v[0] == pytest.approx(v0, rel=1e-12)
    assert s.v_hat[0] == pytest.approx(v0, rel=1e-12)
    assert p[0] == pytest.approx(0.5 + dw, rel=1e-12)


def test_max_accumulator_holds_after_zero_grad():
    s = zero_state(1, LITERAL)
    p, s1 = base_step(s, np.array([0.0]), np.array([1.0]), LITERAL)
    _, s2 = base_step(s1, p, np.array([0.0]), LITERAL)
    assert s2.v_hat[0] == s1.v_hat[0]
    assert s2.v[0] == pytest.approx(0.999 * s1.v[0], rel=1e-15)


@pytest.mark.parametrize("variant", VARIANTS)
def test_zero_gradient_is_a_fixed_point(variant):
    hyper = OptimHyper(variant=variant, weight_decay=0.0)
    s = zero_state(3, hyper)
    w = np.array([1.0, -2.0, 0.5])
    p, s2 = base_step(s, w, np.zeros(3), hyper)
    np.testing.assert_array_equal(p, w)
    np.testing.assert_array_equal(s2.v_hat, s.v_hat)


def test_decoupled_weight_decay():
    hyper = OptimHyper(variant="sgd", beta1=0.0, lr=0.1, weight_decay=0.5)
    p, _ = base_step(zero_state(1, hyper), np.array([2.0]), np.array([0.0]), hyper)
    assert p[0] == pytest.approx(2.0 - 0.1 * 0.5 * 2.0)


def test_adagrad_matches_definition():
    hyper = OptimHyper(variant="adagrad", lr=0.5, weight_decay=0.0, delta=1e-3)
    s = zero_state(1, hyper)
    w = np.array([1.0])
    acc = 0.0
    for g in (0.3, -1.2, 2.0):
        acc += g * g
        expected = w[0] - 0.5 * g / math.sqrt(acc + 1e-6)
        w, s = base_step(s, w, np.array([g]), hyper)
        assert w[0] == pytest.approx(expected, rel=1e-14)


def test_heavy_ball_sgd():
    hyper = OptimHyper(variant="sgd", lr=0.1, beta1=0.5, weight_decay=0.0)
    s = zero_state(1, hyper)
    w, s = base_step(s, np.array([0.0]), np.array([1.0]), hyper)
    w, s = base_step(s, w, np.array([1.0]), hyper)
    assert w[0] == pytest.approx(-0.1 - 0.1 * 1.5)


def test_bias_correction_first_adam_step_is_lr_sized():
    hyper = OptimHyper(variant="adam", lr=0.01, bias_correction=True, weight_decay=0.0)
    p, _ = base_step(zero_state(2, hyper), np.zeros(2), np.array([3.0, -0.2]), hyper)
    np.testing.assert_allclose(p, [-0.01, 0.01], rtol=1e-6)


def test_linear_warmup():
    hyper = OptimHyper(lr=1.0, warmup_steps=4)
    assert [current_lr(hyper, t) for t in range(6)] == [0.25, 0.5, 0.75, 1.0, 1.0, 1.0]


def test_errors():
    hyper = OptimHyper()
    with pytest.raises(ShapeError):
        base_step(zero_state(3, hyper), np.zeros(3), np.zeros(2), hyper)
    with pytest.raises(NonFiniteError) as exc:
        base_step(zero_state(3, hyper), np.zeros(3), np.array([0.0, np.nan, np.inf]), hyper)
    assert exc.value.index == 1
    for bad in (dict(lr=0), dict(delta=0), dict(beta1=1.0), dict(beta2=-0.1), dict(variant="lion")):
        with pytest.raises(ConfigError):
            OptimHyper(**bad)


grad_seqs = st.lists(
    st.lists(st.floats(-1e3, 1e3, allow_nan=False, allow_subnormal=False), min_size=3, max_size=3),
    min_size=1, max_size=30)


@settings(max_examples=60, deadline=None)
@given(grad_seqs, st.sampled_from([0.0, 0.9]))
def test_amsgrad_vhat_monotone_and_step_bounded(seq, beta1):
    hyper = OptimHyper(variant="amsgrad", beta1=beta1, weight_decay=0.0, lr=0.01, delta=1e-3)
    s = zero_state(3, hyper)
    w = np.zeros(3)
    for g in seq:
        g = np.array(g)
        g_eff = beta1 * s.m_buf + (1 - beta1) * g if beta1 else g
        w2, s2 = base_step(s, w, g, hyper)
        assert np.all(s2.v_hat >= s.v_hat)
        assert np.all(s2.v_hat >= hyper.delta ** 2)
        # allow one ulp of w for the rounding in w - step
        bound = hyper.lr * np.abs(g_eff) / hyper.delta * (1 + 1e-12) + np.spacing(np.abs(w))
        assert np.all(np.abs(w2 - w) <= bound)
        w, s = w2, s2


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(-10, 10, allow_nan=False), min_size=4, max_size=4), st.sampled_from(VARIANTS))
def test_purity(g, variant):
    hyper = OptimHyper(variant=variant)
    s = zero_state(4, hyper)
    w = np.linspace(-1, 1, 4)
    a = base_step(s, w, np.array(g), hyper)
    b = base_step(s, w, np.array(g), hyper)
    assert a[0].tobytes() == b[0].tobytes()
    assert s.t == 0 and not s.v.any()


@pytest.mark.parametrize("seed", range(5))
@pytest.mark.parametrize("variant", VARIANTS)
def test_descent_on_quadratic(variant, seed):
    # same U(-1/sqrt(d), 1/sqrt(d)) law as model init; adagrad's travel is ~2*lr*sqrt(T)
    hyper = OptimHyper(variant=variant, lr=0.01)
    w = np.random.default_rng(seed).uniform(-1, 1, 10) / np.sqrt(10)
    f0 = 0.5 * w @ w
    s = zero_state(10, hyper)
    for _ in range(500):
        w, s = base_step(s, w, w.copy(), hyper)
    assert 0.5 * w @ w <= 0.01 * f0
