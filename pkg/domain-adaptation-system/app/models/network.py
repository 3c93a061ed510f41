"""
Network Model
Feature transform g (one tanh hidden layer) and linear classifier head f,
with exact forward and backward passes
"""
from dataclasses import dataclass, fields
from typing import List, NamedTuple, Sequence

import numpy as np

from app.core.exceptions import ContractViolationException, InvalidArgumentException
from app.core.numerics import as_matrix, log_softmax, make_rng, softmax

# Stream id for parameter initialization
INIT_STREAM = 0


class ModelDims(NamedTuple):
    d_in: int
    hidden: int
    d_feat: int
    num_classes: int


@dataclass
class ModelParams:
    """
    Trainable parameters

    W1, b1, W2, b2 form g: F = tanh(X W1 + b1) W2 + b2.
    Wc, bc form the head f: Z = F Wc + bc.
    The same container carries gradients.
    """
    W1: np.ndarray
    b1: np.ndarray
    W2: np.ndarray
    b2: np.ndarray
    Wc: np.ndarray
    bc: np.ndarray

    def __post_init__(self):
        d_in, h = self.W1.shape
        h2, d_feat = self.W2.shape
        d_feat2, c = self.Wc.shape
        if (
            h != h2 or d_feat != d_feat2
            or self.b1.shape != (h,) or self.b2.shape != (d_feat,) or self.bc.shape != (c,)
            or min(d_in, h, d_feat) < 1
        ):
            raise ContractViolationException(
                "inconsistent parameter block shapes",
                details={name: list(getattr(self, name).shape) for name in self.block_names()}
            )
        if c < 2:
            raise ContractViolationException("classifier needs at least 2 classes", details={"num_classes": c})

    @staticmethod
    def block_names() -> List[str]:
        return [f.name for f in fields(ModelParams)]

    @property
    def dims(self) -> ModelDims:
        return ModelDims(self.W1.shape[0], self.W1.shape[1], self.W2.shape[1], self.Wc.shape[1])

    def blocks(self) -> List[np.ndarray]:
        return [getattr(self, name) for name in self.block_names()]

    @classmethod
    def from_blocks(cls, blocks: Sequence[np.ndarray]) -> "ModelParams":
        return cls(*[np.asarray(b, dtype=np.float64) for b in blocks])

    def copy(self) -> "ModelParams":
        return ModelParams.from_blocks([b.copy() for b in self.blocks()])

    def equals(self, other: "ModelParams") -> bool:
        """Bitwise equality of every block"""
        return all(
            a.shape == b.shape and a.tobytes() == b.tobytes()
            for a, b in zip(self.blocks(), other.blocks())
        )


class FeatureGrads(NamedTuple):
    W1: np.ndarray
    b1: np.ndarray
    W2: np.ndarray
    b2: np.ndarray


class CrossEntropyResult(NamedTuple):
    loss: float
    grads: ModelParams
    grad_features: np.ndarray


def _glorot(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    a = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-a, a, size=(fan_in, fan_out))


def init_params(dims: ModelDims, seed: int) -> ModelParams:
    """
    Glorot-uniform weights and zero biases from the seeded init stream

    Args:
        dims: (d_in, hidden, d_feat, num_classes)
        seed: Run seed

    Returns:
        Fresh parameters
    """
    d_in, h, d_feat, c = dims
    rng = make_rng(seed, INIT_STREAM)
    return ModelParams(
        W1=_glorot(rng, d_in, h),
        b1=np.zeros(h),
        W2=_glorot(rng, h, d_feat),
        b2=np.zeros(d_feat),
        Wc=_glorot(rng, d_feat, c),
        bc=np.zeros(c),
    )


def _check_input(params: ModelParams, X: np.ndarray) -> np.ndarray:
    X = as_matrix(X, "X")
    if X.shape[1] != params.dims.d_in:
        raise ContractViolationException(
            f"input has {X.shape[1]} columns, model expects {params.dims.d_in}",
            details={"columns": X.shape[1], "d_in": params.dims.d_in}
        )
    return X


def _hidden(params: ModelParams, X: np.ndarray) -> np.ndarray:
    return np.tanh(X @ params.W1 + params.b1)


def forward_features(params: ModelParams, X: np.ndarray) -> np.ndarray:
    """F = tanh(X W1 + b1) W2 + b2, row-wise"""
    X = _check_input(params, X)
    return _hidden(params, X) @ params.W2 + params.b2


def forward_logits(params: ModelParams, F: np.ndarray) -> np.ndarray:
    """Z = F Wc + bc"""
    F = as_matrix(F, "F")
    if F.shape[1] != params.dims.d_feat:
        raise ContractViolationException(
            f"features have {F.shape[1]} columns, head expects {params.dims.d_feat}",
            details={"columns": F.shape[1], "d_feat": params.dims.d_feat}
        )
    return F @ params.Wc + params.bc


def predict_logits(params: ModelParams, X: np.ndarray) -> np.ndarray:
    return forward_logits(params, forward_features(params, X))


def check_labels(y: np.ndarray, num_classes: int, n: int) -> np.ndarray:
    y = np.asarray(y)
    if y.shape != (n,):
        raise ContractViolationException(
            f"expected {n} labels, got shape {y.shape}",
            details={"n": n, "shape": list(y.shape)}
        )
    if y.size and (not np.issubdtype(y.dtype, np.integer) or y.min() < 0 or y.max() >= num_classes):
        raise InvalidArgumentException(
            f"labels must be integers in [0, {num_classes})",
            argument="labels"
        )
    return y.astype(np.int64)


def backward_through_g(params: ModelParams, X: np.ndarray, grad_F: np.ndarray) -> FeatureGrads:
    """
    Gradients of any scalar whose gradient w.r.t. the features is grad_F

    Args:
        params: Current parameters
        X: Inputs (n x d_in)
        grad_F: dL/dF (n x d_feat)

    Returns:
        Gradients for W1, b1, W2, b2
    """
    X = _check_input(params, X)
    grad_F = np.asarray(grad_F, dtype=np.float64)
    if grad_F.shape != (X.shape[0], params.dims.d_feat):
        raise ContractViolationException(
            "grad_F shape does not match the feature batch",
            details={"grad_F": list(grad_F.shape), "expected": [X.shape[0], params.dims.d_feat]}
        )

    H = _hidden(params, X)
    dW2 = H.T @ grad_F
    db2 = grad_F.sum(axis=0)
    dpre = (grad_F @ params.W2.T) * (1.0 - H * H)
    dW1 = X.T @ dpre
    db1 = dpre.sum(axis=0)
    return FeatureGrads(dW1, db1, dW2, db2)


def ce_loss_and_grads(params: ModelParams, X: np.ndarray, y: np.ndarray) -> CrossEntropyResult:
    """
    Mean softmax cross-entropy with exact gradients

    Returns:
        (loss, full parameter gradients, dL/dF) so that other feature-space
        losses can be added to dL/dF before calling backward_through_g
    """
    X = _check_input(params, X)
    n = X.shape[0]
    y = check_labels(y, params.dims.num_classes, n)

    F = _hidden(params, X) @ params.W2 + params.b2
    Z = F @ params.Wc + params.bc
    rows = np.arange(n)
    loss = float(-log_softmax(Z)[rows, y].mean())

    dZ = softmax(Z)
    dZ[rows, y] -= 1.0
    dZ /= n

    grad_F = dZ @ params.Wc.T
    g = backward_through_g(params, X, grad_F)
    grads = ModelParams(g.W1, g.b1, g.W2, g.b2, F.T @ dZ, dZ.sum(axis=0))
    return CrossEntropyResult(loss, grads, grad_F)
