import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import reference_adamw
from rrtn.optim import AdamWConfig, AdamWState, NonFiniteGradientError, adamw_step
from rrtn.tensor import Tensor


def test_single_step_hand_value():
    p = Tensor([1.0])
    adamw_step([p], [np.array([1.0])], AdamWState.for_params([p]), AdamWConfig())
    expect = 1 - 0.001 * (1 / (1 + 1e-8)) - 0.001 * 0.01 * 1
    assert p.data[0] == pytest.approx(expect, abs=1e-15)
    assert p.data[0] == pytest.approx(0.99899, abs=1e-8)


def test_zero_grad_no_decay_fixed_point():
    p = Tensor([0.3, -2.0])
    adamw_step([p], [np.zeros(2)], AdamWState.for_params([p]), AdamWConfig(weight_decay=0.0))
    assert np.array_equal(p.data, [0.3, -2.0])


def test_zero_grad_pure_decay():
    p = Tensor([0.3, -2.0])
    adamw_step([p], [np.zeros(2)], AdamWState.for_params([p]), AdamWConfig())
    assert np.allclose(p.data, np.array([0.3, -2.0]) * (1 - 0.001 * 0.01), rtol=0, atol=1e-15)


@settings(max_examples=60, deadline=None)
@given(n=st.integers(1, 6), steps=st.integers(1, 8), seed=st.integers(0, 2**16),
       lr=st.floats(1e-4, 1e-1), wd=st.floats(0, 0.1))
def test_matches_reference(n, steps, seed, lr, wd):
    rng = np.random.default_rng(seed)
    theta0 = rng.standard_normal(n)
    gs = [rng.standard_normal(n) for _ in range(steps)]
    cfg = AdamWConfig(lr=lr, weight_decay=wd)
    p = Tensor(theta0)
    state = AdamWState.for_params([p])
    for g in gs:
        adamw_step([p], [g], state, cfg)
    ref = reference_adamw(theta0.tolist(), [g.tolist() for g in gs], lr, 0.9, 0.999, 1e-8, wd)
    assert np.max(np.abs(p.data - np.array(ref))) < 1e-12
    assert state.t == steps
    assert np.all(state.v[0] >= 0)


def test_non_finite_grad_aborts_untouched():
    p, q = Tensor([1.0]), Tensor([2.0])
    state = AdamWState.for_params([p, q])
    with pytest.raises(NonFiniteGradientError):
        adamw_step([p, q], [np.array([0.5]), np.array([np.nan])], state, AdamWConfig())
    assert p.data[0] == 1.0 and q.data[0] == 2.0 and state.t == 0


def test_config_validation():
    with pytest.raises(ValueError):
        AdamWConfig(beta1=1.0)
    with pytest.raises(ValueError):
        AdamWConfig(lr=0)
    with pytest.raises(ValueError):
        AdamWConfig(eps=-1)
