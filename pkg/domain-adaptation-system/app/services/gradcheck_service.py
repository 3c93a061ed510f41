"""
Gradient Check Service
Central finite-difference checks of the analytic gradients
"""
from typing import Callable, List, Optional, Sequence

import numpy as np

from app.config import settings
from app.core.exceptions import ContractViolationException
from app.core.logging import get_logger
from app.core.numerics import make_rng
from app.models.network import ModelDims, ModelParams, ce_loss_and_grads, forward_features, init_params, predict_logits
from app.schemas.adapt import AdaptConfig, KernelConfig, SelectionPolicy
from app.schemas.report import GradCheckReport, GradCheckResult
from app.services.adaptation_service import composite_loss_and_grads
from app.services.kernel_service import WeightedSet, median_heuristic_bandwidth, mmd2_weighted
from app.services.selection_service import build_weights, pseudo_labels

# Stream id for random check instances
GRADCHECK_STREAM = 11

TINY_DIMS = ModelDims(d_in=4, hidden=5, d_feat=3, num_classes=3)

# Below this magnitude a partial derivative is compared absolutely
GRADIENT_FLOOR = 1e-4

logger = get_logger("gradcheck")


def numerical_gradient(f: Callable[[], float], arrays: Sequence[np.ndarray], epsilon: float) -> List[np.ndarray]:
    """Central differences of f() with respect to every entry of ``arrays`` (perturbed in place)"""
    grads = []
    for arr in arrays:
        g = np.zeros_like(arr)
        for idx in np.ndindex(arr.shape):
            original = arr[idx]
            arr[idx] = original + epsilon
            plus = f()
            arr[idx] = original - epsilon
            minus = f()
            arr[idx] = original
            g[idx] = (plus - minus) / (2.0 * epsilon)
        grads.append(g)
    return grads


def relative_error(
    analytic: Sequence[np.ndarray],
    numeric: Sequence[np.ndarray],
    floor: float = GRADIENT_FLOOR
) -> float:
    """
    Worst per-coordinate relative error max |a - n| / max(|a|, |n|, floor)

    Coordinates whose gradients are both below ``floor`` are compared on an
    absolute scale of ``floor``.
    """
    a = np.concatenate([np.ravel(x) for x in analytic])
    n = np.concatenate([np.ravel(x) for x in numeric])
    if a.shape != n.shape:
        raise ContractViolationException(
            "analytic and numeric gradients differ in size",
            details={"analytic": a.size, "numeric": n.size}
        )
    if a.size == 0:
        return 0.0
    scale = np.maximum(np.maximum(np.abs(a), np.abs(n)), floor)
    return float(np.max(np.abs(a - n) / scale))


def _tiny_params(rng: np.random.Generator) -> ModelParams:
    params = init_params(TINY_DIMS, int(rng.integers(0, 2**31)))
    # nonzero biases so every block is exercised
    return ModelParams.from_blocks([p + 0.1 * rng.standard_normal(p.shape) for p in params.blocks()])


def _balanced_labels(rng: np.random.Generator, n: int, num_classes: int) -> np.ndarray:
    return rng.permutation(np.arange(n) % num_classes)


def check_cross_entropy(rng: np.random.Generator, epsilon: float) -> float:
    params = _tiny_params(rng)
    X = rng.standard_normal((6, TINY_DIMS.d_in))
    y = _balanced_labels(rng, 6, TINY_DIMS.num_classes)
    analytic = ce_loss_and_grads(params, X, y).grads.blocks()

    blocks = params.blocks()
    numeric = numerical_gradient(
        lambda: ce_loss_and_grads(ModelParams.from_blocks(blocks), X, y).loss, blocks, epsilon
    )
    return relative_error(analytic, numeric)


def check_weighted_mmd(rng: np.random.Generator, epsilon: float) -> float:
    d = 3
    Fa = rng.standard_normal((5, d))
    Fb = rng.standard_normal((4, d)) + 0.5
    wa = rng.uniform(0.1, 1.0, 5)
    wb = rng.uniform(0.1, 1.0, 4)
    cfg = KernelConfig()
    sigma_sq = median_heuristic_bandwidth(Fa, Fb)

    result = mmd2_weighted(WeightedSet(Fa, wa), WeightedSet(Fb, wb), cfg, sigma_sq=sigma_sq)
    numeric = numerical_gradient(
        lambda: mmd2_weighted(WeightedSet(Fa, wa), WeightedSet(Fb, wb), cfg, sigma_sq=sigma_sq).value,
        [Fa, Fb],
        epsilon,
    )
    return relative_error([result.grad_a, result.grad_b], numeric)


def check_composite(rng: np.random.Generator, epsilon: float, lam: float = 0.5) -> float:
    """CE + lam * class-conditional MMD on n_s = n_t = 6, C = 3 with frozen weights and bandwidth"""
    params = _tiny_params(rng)
    Xs = rng.standard_normal((6, TINY_DIMS.d_in))
    ys = _balanced_labels(rng, 6, TINY_DIMS.num_classes)
    Xt = rng.standard_normal((6, TINY_DIMS.d_in)) + 0.3
    cfg = AdaptConfig(policy=SelectionPolicy.soft(2))

    weights = build_weights(pseudo_labels(predict_logits(params, Xt)), cfg.policy).to_dense()
    sigma_sq = median_heuristic_bandwidth(forward_features(params, Xs), forward_features(params, Xt))
    analytic = composite_loss_and_grads(params, Xs, ys, Xt, weights, cfg, lam, sigma_sq=sigma_sq).grads.blocks()

    blocks = params.blocks()
    numeric = numerical_gradient(
        lambda: composite_loss_and_grads(
            ModelParams.from_blocks(blocks), Xs, ys, Xt, weights, cfg, lam, sigma_sq=sigma_sq
        ).loss,
        blocks,
        epsilon,
    )
    return relative_error(analytic, numeric)


SUITES = {
    "cross_entropy": check_cross_entropy,
    "weighted_mmd": check_weighted_mmd,
    "composite": check_composite,
}


def run_gradcheck(
    instances: Optional[int] = None,
    epsilon: Optional[float] = None,
    tolerance: Optional[float] = None,
    seed: int = 0
) -> GradCheckReport:
    """
    Run every suite on ``instances`` random tiny problems

    Args:
        instances: Problems per suite (settings.GRADCHECK_INSTANCES by default)
        epsilon: Finite-difference step
        tolerance: Largest accepted relative error
        seed: Instance stream seed

    Returns:
        GradCheckReport with the worst error per suite
    """
    instances = instances if instances is not None else settings.GRADCHECK_INSTANCES
    epsilon = epsilon if epsilon is not None else settings.GRADCHECK_EPSILON
    tolerance = tolerance if tolerance is not None else settings.GRADCHECK_TOLERANCE

    results = []
    for s, (name, check) in enumerate(SUITES.items()):
        worst = max(check(make_rng(seed, GRADCHECK_STREAM, s, i), epsilon) for i in range(instances))
        results.append(GradCheckResult(suite=name, instances=instances, max_relative_error=worst, passed=worst <= tolerance))
        logger.info(f"Gradient suite {name}: max relative error {worst:.3e}", extra={"passed": worst <= tolerance})

    return GradCheckReport(epsilon=epsilon, tolerance=tolerance, results=results)
