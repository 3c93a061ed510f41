"""
Numerical Substrate
Activations, seeded random streams and SGD with momentum on float64 numpy arrays
"""
from dataclasses import dataclass, field
from typing import List, Sequence, Union

import numpy as np
from scipy.special import logsumexp

from app.core.exceptions import ContractViolationException, InvalidArgumentException

# Inputs to exp() are clamped to this magnitude
SATURATION = 500.0

# Largest float64 strictly below 1.0
_ONE_BELOW = np.nextafter(1.0, 0.0)

ArrayLike = Union[np.ndarray, Sequence[float], float]


def as_matrix(values: ArrayLike, name: str = "matrix") -> np.ndarray:
    """Coerce to a 2-D float64 array, rejecting NaN/Inf"""
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 2:
        raise ContractViolationException(
            f"{name} must be 2-D, got shape {arr.shape}",
            details={"name": name, "shape": list(arr.shape)}
        )
    ensure_finite(arr, name)
    return arr


def ensure_finite(arr: np.ndarray, name: str = "array") -> np.ndarray:
    """Raise InvalidArgumentException if any entry is NaN or infinite"""
    if not np.all(np.isfinite(arr)):
        raise InvalidArgumentException(f"{name} contains non-finite values", argument=name)
    return arr


def softmax(logits: ArrayLike) -> np.ndarray:
    """
    Numerically guarded softmax over the last axis

    Args:
        logits: Vector or row-major batch of logit vectors

    Returns:
        Probabilities with the same shape; every row sums to 1
    """
    z = np.asarray(logits, dtype=np.float64)
    if z.size == 0 or z.shape[-1] == 0:
        raise InvalidArgumentException("softmax of an empty vector", argument="logits")
    ensure_finite(z, "logits")

    shifted = z - z.max(axis=-1, keepdims=True)
    shifted = np.clip(shifted, -SATURATION, 0.0)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def log_softmax(logits: ArrayLike) -> np.ndarray:
    """Log-probabilities over the last axis with the same saturation guard as softmax"""
    z = np.asarray(logits, dtype=np.float64)
    if z.size == 0 or z.shape[-1] == 0:
        raise InvalidArgumentException("log_softmax of an empty vector", argument="logits")
    ensure_finite(z, "logits")

    shifted = np.clip(z - z.max(axis=-1, keepdims=True), -SATURATION, 0.0)
    return shifted - logsumexp(shifted, axis=-1, keepdims=True)


def sigmoid(x: ArrayLike) -> Union[float, np.ndarray]:
    """Logistic function; saturated outputs stay strictly inside (0, 1)"""
    arr = np.asarray(x, dtype=np.float64)
    ensure_finite(arr, "x")

    clipped = np.clip(arr, -SATURATION, SATURATION)
    out = np.minimum(1.0 / (1.0 + np.exp(-clipped)), _ONE_BELOW)
    if out.ndim == 0:
        return float(out)
    return out


def make_rng(seed: int, *keys: int) -> np.random.Generator:
    """
    Seeded PCG64 generator for an independent, named stream

    The same ``(seed, *keys)`` tuple yields the same stream on every platform.

    Args:
        seed: Non-negative run seed
        keys: Stream identifiers (stream id, epoch index, ...)

    Returns:
        numpy Generator
    """
    if seed < 0 or any(k < 0 for k in keys):
        raise InvalidArgumentException("seed and stream keys must be non-negative", argument="seed")
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(seed), *map(int, keys)])))


@dataclass
class SgdState:
    """Classic momentum SGD: v <- momentum*v + g; p <- p - lr*v"""
    learning_rate: float
    momentum: float
    velocity: List[np.ndarray] = field(default_factory=list)

    def __post_init__(self):
        if not (self.learning_rate >= 0.0 and np.isfinite(self.learning_rate)):
            raise InvalidArgumentException("learning_rate must be finite and non-negative", argument="learning_rate")
        if not (0.0 <= self.momentum < 1.0):
            raise InvalidArgumentException("momentum must lie in [0, 1)", argument="momentum")

    @classmethod
    def for_params(cls, params: Sequence[np.ndarray], learning_rate: float, momentum: float) -> "SgdState":
        return cls(learning_rate, momentum, [np.zeros_like(p, dtype=np.float64) for p in params])


def sgd_step(state: SgdState, params: Sequence[np.ndarray], grads: Sequence[np.ndarray]) -> List[np.ndarray]:
    """
    Apply one momentum update

    Args:
        state: Optimizer state; its velocity buffers are updated in place
        params: Parameter blocks
        grads: Gradient blocks with matching shapes

    Returns:
        New parameter blocks
    """
    if len(params) != len(grads) or len(params) != len(state.velocity):
        raise ContractViolationException(
            "parameter, gradient and velocity block counts differ",
            details={"params": len(params), "grads": len(grads), "velocity": len(state.velocity)}
        )

    updated = []
    for i, (p, g) in enumerate(zip(params, grads)):
        if p.shape != g.shape or p.shape != state.velocity[i].shape:
            raise ContractViolationException(
                f"block {i} shape mismatch",
                details={"param": list(p.shape), "grad": list(g.shape), "velocity": list(state.velocity[i].shape)}
            )
        ensure_finite(g, f"grad[{i}]")
        state.velocity[i] = state.momentum * state.velocity[i] + g
        updated.append(ensure_finite(p - state.learning_rate * state.velocity[i], f"param[{i}]"))
    return updated
