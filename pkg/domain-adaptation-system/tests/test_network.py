import numpy as np
import pytest

from app.core.exceptions import ContractViolationException, InvalidArgumentException
from app.models.network import (
    ModelDims,
    ModelParams,
    backward_through_g,
    ce_loss_and_grads,
    forward_features,
    forward_logits,
    init_params,
    predict_logits,
)
from app.services.gradcheck_service import numerical_gradient, relative_error


def _matmul_loops(A, B):
    out = np.zeros((A.shape[0], B.shape[1]))
    for i in range(A.shape[0]):
        for j in range(B.shape[1]):
            for k in range(A.shape[1]):
                out[i, j] += A[i, k] * B[k, j]
    return out


def test_init_is_deterministic_glorot(tiny_dims):
    a = init_params(tiny_dims, seed=5)
    b = init_params(tiny_dims, seed=5)
    c = init_params(tiny_dims, seed=6)
    assert a.equals(b)
    assert not a.equals(c)
    limit = np.sqrt(6.0 / (tiny_dims.d_in + tiny_dims.hidden))
    assert np.all(np.abs(a.W1) <= limit)
    assert not np.any(a.b1) and not np.any(a.bc)


def test_forward_matches_loop_oracle(tiny_params, rng):
    X = rng.standard_normal((5, 4))
    H = np.tanh(_matmul_loops(X, tiny_params.W1) + tiny_params.b1)
    F = _matmul_loops(H, tiny_params.W2) + tiny_params.b2
    Z = _matmul_loops(F, tiny_params.Wc) + tiny_params.bc
    np.testing.assert_allclose(forward_features(tiny_params, X), F, atol=1e-12)
    np.testing.assert_allclose(predict_logits(tiny_params, X), Z, atol=1e-12)
    np.testing.assert_allclose(forward_logits(tiny_params, F), Z, atol=1e-12)


def test_dims_mismatch_is_contract_violation(tiny_params):
    with pytest.raises(ContractViolationException):
        forward_features(tiny_params, np.zeros((2, 5)))
    with pytest.raises(ContractViolationException):
        forward_logits(tiny_params, np.zeros((2, 2)))
    with pytest.raises(ContractViolationException):
        ModelParams(np.zeros((2, 3)), np.zeros(3), np.zeros((4, 2)), np.zeros(2), np.zeros((2, 2)), np.zeros(2))


def test_head_needs_two_classes():
    with pytest.raises(ContractViolationException):
        init_params(ModelDims(2, 2, 2, 1), seed=0)


def test_ce_gradient_matches_finite_differences(tiny_params, rng):
    X = rng.standard_normal((6, 4))
    y = np.array([0, 1, 2, 0, 1, 2])
    result = ce_loss_and_grads(tiny_params, X, y)

    blocks = tiny_params.copy().blocks()
    numeric = numerical_gradient(lambda: ce_loss_and_grads(ModelParams.from_blocks(blocks), X, y).loss, blocks, 1e-5)
    assert relative_error(result.grads.blocks(), numeric) <= 1e-5


def test_ce_grad_features_compose_through_backward(tiny_params, rng):
    X = rng.standard_normal((6, 4))
    y = np.array([2, 1, 0, 0, 1, 2])
    result = ce_loss_and_grads(tiny_params, X, y)
    g = backward_through_g(tiny_params, X, result.grad_features)
    for name, block in zip(["W1", "b1", "W2", "b2"], g):
        np.testing.assert_allclose(block, getattr(result.grads, name), atol=1e-14)


def test_ce_loss_of_uniform_logits_is_log_c():
    dims = ModelDims(2, 2, 2, 4)
    params = init_params(dims, 0)
    params.Wc = np.zeros((2, 4))
    params.bc = np.zeros(4)
    loss = ce_loss_and_grads(params, np.ones((3, 2)), np.array([0, 1, 3])).loss
    assert loss == pytest.approx(np.log(4))


def test_ce_rejects_bad_labels(tiny_params):
    X = np.zeros((2, 4))
    with pytest.raises(InvalidArgumentException):
        ce_loss_and_grads(tiny_params, X, np.array([0, 3]))
    with pytest.raises(ContractViolationException):
        ce_loss_and_grads(tiny_params, X, np.array([0]))


def test_single_unit_forward_by_hand():
    params = ModelParams(
        W1=np.array([[1.0]]), b1=np.zeros(1), W2=np.array([[2.0]]), b2=np.zeros(1),
        Wc=np.array([[1.0, -1.0]]), bc=np.zeros(2),
    )
    F = forward_features(params, np.array([[0.5]]))
    assert F[0, 0] == pytest.approx(2.0 * np.tanh(0.5))
    assert F[0, 0] == pytest.approx(0.92423, abs=1e-5)


def test_backward_through_g_matches_finite_differences_of_feature_sum(tiny_params, rng):
    X = rng.standard_normal((5, 4))
    analytic = backward_through_g(tiny_params, X, np.ones((5, tiny_params.dims.d_feat)))

    blocks = tiny_params.copy().blocks()
    numeric = numerical_gradient(
        lambda: float(forward_features(ModelParams.from_blocks(blocks), X).sum()), blocks[:4], 1e-5
    )
    assert relative_error(list(analytic), numeric) <= 1e-5
