import numpy as np
import pytest

from cases import MODELS, OP_CASES, gradient_penalty_error, model_gradient_error, op_first_order_error, op_second_order_error
from oracles import central_diff
from ssce.tensor import OPS, ShapeError, Tensor, UnsupportedOpError, backward, forward_op, grad, no_grad, ops


def test_every_registered_op_has_a_case():
    assert sorted(c.name for c in OP_CASES) == sorted(OPS)


@pytest.mark.parametrize("case", OP_CASES, ids=lambda c: c.name)
def test_op_gradient_matches_finite_differences(case):
    assert op_first_order_error(case) < 1e-4


@pytest.mark.parametrize("case", [c for c in OP_CASES if c.second_order], ids=lambda c: c.name)
def test_op_gradient_of_gradient(case):
    assert op_second_order_error(case) < 1e-4


@pytest.mark.parametrize("name", sorted(MODELS))
def test_model_parameter_gradients(name):
    assert model_gradient_error(name) < 1e-4


def test_gradient_penalty_nested_oracle():
    assert gradient_penalty_error(seed=0) < 1e-3


# -- forward values ---------------------------------------------------------------


def test_matmul_identity(rng):
    a = rng.normal(size=(3, 3))
    np.testing.assert_array_equal(forward_op("matmul", [Tensor(np.eye(3)), Tensor(a)]).data, a)


def test_conv2d_ones():
    out = forward_op("conv2d", [Tensor(np.ones((1, 1, 4, 4))), Tensor(np.ones((1, 1, 2, 2)))], {"stride": 1, "padding": 0})
    assert out.shape == (1, 1, 3, 3)
    np.testing.assert_array_equal(out.data, np.full((1, 1, 3, 3), 4.0))


def test_conv2d_matches_brute_force(rng):
    x, w = rng.normal(size=(2, 3, 7, 7)), rng.normal(size=(4, 3, 3, 3))
    s, p = 2, 1
    xp = np.pad(x, ((0, 0), (0, 0), (p, p), (p, p)))
    ho = (7 + 2 * p - 3) // s + 1
    ref = np.zeros((2, 4, ho, ho))
    for n in range(2):
        for o in range(4):
            for i in range(ho):
                for j in range(ho):
                    ref[n, o, i, j] = np.sum(xp[n, :, i * s : i * s + 3, j * s : j * s + 3] * w[o])
    np.testing.assert_allclose(ops.conv2d(x, w, s, p).data, ref, atol=1e-12)


def test_conv2d_transpose_is_adjoint(rng):
    x, w = rng.normal(size=(2, 3, 8, 8)), rng.normal(size=(4, 3, 4, 4))
    y = ops.conv2d(x, w, 2, 1).data
    g = rng.normal(size=y.shape)
    xt = ops.conv2d_transpose(g, w, 2, 1, out_hw=(8, 8)).data
    assert abs(np.sum(y * g) - np.sum(x * xt)) < 1e-10


def test_relu_definition():
    np.testing.assert_array_equal(ops.relu(Tensor([-1.0, 0.0, 2.0])).data, [0.0, 0.0, 2.0])


def test_softmax_rows_sum_to_one_and_positive(rng):
    out = ops.softmax(Tensor(rng.normal(size=(50, 7)) * 40), axis=1).data
    np.testing.assert_allclose(out.sum(axis=1), 1.0, atol=1e-12)
    assert np.all(out > 0)


def test_max_pool_output_shape():
    assert ops.max_pool(Tensor(np.zeros((2, 3, 8, 6))), 2).shape == (2, 3, 4, 3)


def test_dropout_deterministic_and_identity_in_eval(rng):
    x = rng.normal(size=(5, 5))
    a = ops.dropout(x, 0.5, np.random.default_rng(9), True).data
    b = ops.dropout(x, 0.5, np.random.default_rng(9), True).data
    np.testing.assert_array_equal(a, b)
    assert set(np.unique(np.round(a / np.where(x == 0, 1, x), 12))) <= {0.0, 2.0}
    np.testing.assert_array_equal(ops.dropout(x, 0.5, None, False).data, x)


@pytest.mark.parametrize(
    "op, inputs, attrs, fragment",
    [
        ("matmul", [np.zeros((2, 3)), np.zeros((4, 2))], {}, "matmul"),
        ("add", [np.zeros((2, 3)), np.zeros((4,))], {}, "add"),
        ("conv2d", [np.zeros((1, 2, 5, 5)), np.zeros((3, 4, 3, 3))], {}, "conv2d"),
        ("max_pool", [np.zeros((1, 1, 1, 1))], {"kernel": 2}, "max_pool"),
        ("reshape", [np.zeros((2, 3))], {"shape": (4, 2)}, "reshape"),
    ],
)
def test_shape_errors_name_the_op(op, inputs, attrs, fragment):
    with pytest.raises(ShapeError, match=fragment):
        forward_op(op, [Tensor(a) for a in inputs], attrs)


def test_conv_attrs_must_be_positive():
    with pytest.raises(ShapeError, match="stride"):
        ops.conv2d(np.zeros((1, 1, 4, 4)), np.zeros((1, 1, 2, 2)), stride=0)


def test_unknown_op():
    with pytest.raises(ValueError, match="unknown op"):
        forward_op("fft", [Tensor([1.0])])


# -- backward semantics -------------------------------------------------------------


def test_square_gradient():
    x = Tensor(3.0, requires_grad=True)
    (x * x).backward()
    assert x.grad.item() == 6.0


def test_tanh_gradient_at_zero():
    x = Tensor([0.0], requires_grad=True)
    ops.sum(ops.tanh(x)).backward()
    np.testing.assert_array_equal(x.grad.data, [1.0])


def test_non_scalar_root_rejected():
    x = Tensor([1.0, 2.0], requires_grad=True)
    with pytest.raises(ShapeError, match="scalar"):
        backward(x * 2.0)


def test_backward_accumulates():
    x = Tensor(2.0, requires_grad=True)
    (x * x).backward()
    (x * x).backward()
    assert x.grad.item() == 8.0
    x.zero_grad()
    assert x.grad.item() == 0.0


def test_independent_leaf_gets_exact_zero():
    x, y = Tensor([1.0, 2.0], requires_grad=True), Tensor([3.0], requires_grad=True)
    gx, gy = grad(ops.sum(x * x), [x, y])
    np.testing.assert_array_equal(gy.data, [0.0])
    np.testing.assert_array_equal(gx.data, [2.0, 4.0])


def test_no_grad_records_nothing():
    x = Tensor([1.0], requires_grad=True)
    with no_grad():
        y = x * 2.0
    assert not y.requires_grad


def test_constant_never_accumulates():
    c = Tensor([1.0, 2.0])
    x = Tensor([3.0, 4.0], requires_grad=True)
    ops.sum(c * x).backward()
    assert c.grad is None


def test_mlp_gradients_vs_finite_differences(rng):
    # explicit two-layer perceptron with raw matrices
    w1, w2, x = rng.normal(size=(4, 6)), rng.normal(size=(6, 1)), rng.normal(size=(5, 4))

    def loss(a, b):
        return ops.sum(ops.matmul(ops.tanh(ops.matmul(Tensor(x), a)), b))

    tw1, tw2 = Tensor(w1, requires_grad=True), Tensor(w2, requires_grad=True)
    loss(tw1, tw2).backward()
    n1 = central_diff(lambda a: loss(Tensor(a), Tensor(w2)).item(), w1)
    n2 = central_diff(lambda b: loss(Tensor(w1), Tensor(b)).item(), w2)
    np.testing.assert_allclose(tw1.grad.data, n1, rtol=1e-4, atol=1e-8)
    np.testing.assert_allclose(tw2.grad.data, n2, rtol=1e-4, atol=1e-8)


# -- second order -------------------------------------------------------------------


def test_cubic_penalty_second_order():
    # f = x^3, g = (f')^2, dg/dx at 1 = 2 * 3x^2 * 6x = 36
    x = Tensor(1.0, requires_grad=True)
    (df,) = grad(ops.power(x, 3.0), [x], create_graph=True)
    (dg,) = grad(df * df, [x])
    assert dg.item() == pytest.approx(36.0, abs=1e-12)
    fprime = lambda v: 3 * v * v  # noqa: E731
    numeric = (fprime(1 + 1e-5) ** 2 - fprime(1 - 1e-5) ** 2) / 2e-5
    assert dg.item() == pytest.approx(numeric, rel=1e-8)


def test_linear_critic_penalty_gradient(rng):
    w = Tensor(rng.normal(size=(5, 1)), requires_grad=True)
    x = Tensor(rng.normal(size=(1, 5)), requires_grad=True)
    (gx,) = grad(ops.sum(ops.matmul(x, w)), [x], create_graph=True)
    (gw,) = grad(ops.sum(gx * gx), [w])
    np.testing.assert_allclose(gw.data, 2 * w.data, atol=1e-14)


def test_max_pool_rejects_second_order(rng):
    x = Tensor(rng.normal(size=(1, 1, 4, 4)), requires_grad=True)
    with pytest.raises(UnsupportedOpError, match="max_pool"):
        grad(ops.sum(ops.max_pool(x, 2)), [x], create_graph=True)


def test_forward_is_bitwise_deterministic(rng):
    x, w = rng.normal(size=(2, 3, 8, 8)), rng.normal(size=(4, 3, 3, 3))
    a = ops.conv2d(x, w, 1, 1).data
    b = ops.conv2d(x.copy(), w.copy(), 1, 1).data
    assert a.tobytes() == b.tobytes()
