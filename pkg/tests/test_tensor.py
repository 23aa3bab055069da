import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from celetrip import tensor as T
from celetrip.tensor import Adam, AdamState, NonFiniteError, Tensor, TensorError, adam_step, bce_loss
from helpers import check_tensor_grads


def _leaf(rng, *shape):
    return Tensor(rng.normal(size=shape), requires_grad=True)


UNARY = {
    "sigmoid": T.sigmoid, "tanh": T.tanh, "leaky_relu": T.leaky_relu, "elu": T.elu,
    "softmax_rows": lambda a: T.softmax(a, axis=1), "softmax_cols": lambda a: T.softmax(a, axis=0),
    "max_rows": T.max_rows, "transpose": T.transpose, "sum0": lambda a: T.tsum(a, axis=0),
    "mean1": lambda a: T.mean(a, axis=1, keepdims=True), "gather": lambda a: T.gather_rows(a, [2, 0, 2]),
    "neg": lambda a: -a, "scale": lambda a: a / 4.0,
    "masked_softmax": lambda a: T.masked_softmax(a, np.array([[1, 0, 1, 1], [0, 1, 0, 0], [1, 1, 1, 1]], bool)),
}


@pytest.mark.parametrize("name", sorted(UNARY))
def test_unary_gradients(name):
    rng = np.random.default_rng(1)
    x = _leaf(rng, 3, 4)
    # fixed random projection makes the scalar depend on every output entry
    w = rng.normal(size=UNARY[name](x).shape)
    errs = check_tensor_grads(lambda: T.tsum(UNARY[name](x) * Tensor(w)), [x])
    assert errs.max() < 1e-6


BINARY = {
    "add_broadcast": (lambda a, b: a + b, (3, 4), (1, 4)),
    "sub": (lambda a, b: a - b, (3, 4), (3, 4)),
    "mul_broadcast": (lambda a, b: a * b, (3, 4), (3, 1)),
    "matmul": (lambda a, b: a @ b, (3, 4), (4, 2)),
    "concat0": (lambda a, b: T.concat([a, b], axis=0), (3, 4), (2, 4)),
    "concat1": (lambda a, b: T.concat([a, b], axis=1), (3, 4), (3, 2)),
    "cosine": (T.cosine_similarity, (5, 4), (1, 4)),
}


@pytest.mark.parametrize("name", sorted(BINARY))
def test_binary_gradients(name):
    fn, sa, sb = BINARY[name]
    rng = np.random.default_rng(2)
    a, b = _leaf(rng, *sa), _leaf(rng, *sb)
    w = rng.normal(size=fn(a, b).shape)
    errs = check_tensor_grads(lambda: T.tsum(fn(a, b) * Tensor(w)), [a, b])
    assert errs.max() < 1e-6


def test_bce_gradient():
    p = Tensor([[0.3], [0.8], [0.55]], requires_grad=True)
    errs = check_tensor_grads(lambda: bce_loss(p, [1, 0, 1], pos_weight=2.0), [p])
    assert errs.max() < 1e-6


def test_reused_node_accumulates():
    x = Tensor([[1.5, -2.0]], requires_grad=True)
    y = x * x + x
    T.tsum(y).backward()
    assert np.allclose(x.grad, 2 * x.value + 1)


def test_backward_twice_rebuilds_interior_grads():
    x = Tensor([[1.0, 2.0]], requires_grad=True)
    loss = T.tsum(x * 3.0)
    loss.backward()
    loss.backward()
    assert np.allclose(x.grad, 6.0)


def test_analytic_values():
    assert np.allclose(T.softmax(Tensor([[0.0, 0.0]]), axis=1).value, [[0.5, 0.5]])
    assert T.tanh(Tensor(0.0)).item() == 0.0
    assert T.sigmoid(Tensor(0.0)).item() == 0.5


def test_softmax_extreme_inputs_stay_finite():
    s = T.softmax(Tensor([[1000.0, -1000.0, 999.0]]), axis=1).value
    assert np.isfinite(s).all() and math.isclose(s.sum(), 1.0)


def test_masked_softmax_zeroes_masked():
    s = T.masked_softmax(Tensor([[5.0, 1.0, 2.0]]), [[False, True, True]]).value
    assert s[0, 0] == 0.0 and math.isclose(s.sum(), 1.0)
    with pytest.raises(TensorError):
        T.masked_softmax(Tensor([[1.0]]), [[False]])


def test_shape_errors_name_shapes():
    with pytest.raises(TensorError, match=r"\(2, 3\).*\(2, 3\)"):
        Tensor(np.ones((2, 3))) @ Tensor(np.ones((2, 3)))
    with pytest.raises(TensorError, match="add"):
        Tensor(np.ones((2, 3))) + Tensor(np.ones((3, 2)))


def test_non_finite_raises():
    with pytest.raises(NonFiniteError):
        Tensor([[1.0]]) * np.inf


def test_cosine_of_zero_row_is_zero():
    c = T.cosine_similarity(Tensor(np.zeros((1, 3))), Tensor([[1.0, 2.0, 3.0]])).value
    assert c[0, 0] == 0.0


def test_bce_examples():
    assert math.isclose(bce_loss(Tensor([0.5]), [1]).item(), math.log(2), rel_tol=1e-12)
    assert bce_loss(Tensor([1.0, 0.0]), [1, 0]).item() < 1e-6
    assert math.isclose(bce_loss(Tensor([0.9, 0.2]), [1, 0]).item(), (-math.log(0.9) - math.log(0.8)) / 2,
                        rel_tol=1e-12)
    with pytest.raises(TensorError):
        bce_loss(Tensor(np.zeros(0)), [])


def test_adam_zero_gradient_is_noop():
    p = {"w": np.array([1.0, -2.0])}
    adam_step(p, {"w": np.zeros(2)}, AdamState(lr=0.1))
    assert np.array_equal(p["w"], [1.0, -2.0])


@given(arrays(np.float64, 5, elements=st.floats(-1e3, 1e3).filter(lambda g: abs(g) > 1e-3)),
       st.floats(1e-4, 1.0))
def test_adam_first_step_moves_by_lr(g, lr):
    w = np.zeros(5)
    adam_step({"w": w}, {"w": g}, AdamState(lr=lr))
    # bias correction makes m_hat = g and v_hat = g^2 on step one
    assert np.allclose(w, -lr * g / (np.abs(g) + 1e-8), rtol=1e-12, atol=0)
    assert np.all(np.sign(w) == -np.sign(g))


def test_adam_is_deterministic():
    def run():
        rng = np.random.default_rng(5)
        x = Tensor(rng.normal(size=(3, 2)), requires_grad=True)
        opt = Adam({"x": x}, lr=0.05)
        for _ in range(20):
            opt.zero_grad()
            T.tsum(T.tanh(x) * T.tanh(x)).backward()
            opt.step()
        return x.value.copy()
    assert run().tobytes() == run().tobytes()


def test_adam_skips_params_without_grad():
    a, b = Tensor([[1.0]], requires_grad=True), Tensor([[2.0]], requires_grad=True)
    opt = Adam({"a": a, "b": b}, lr=0.1)
    T.tsum(a * 3.0).backward()
    opt.step()
    assert b.value[0, 0] == 2.0 and a.value[0, 0] < 1.0


@given(arrays(np.float64, (3, 4), elements=st.floats(-50, 50)))
def test_softmax_rows_are_distributions(x):
    s = T.softmax(Tensor(x), axis=1).value
    assert np.all(s >= 0) and np.allclose(s.sum(axis=1), 1.0, atol=1e-12)
