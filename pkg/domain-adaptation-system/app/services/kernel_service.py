"""
Kernel Service
Gaussian multi-kernel MMD^2 (biased V-statistic) with exact feature gradients,
and its class-conditional form over weighted target references
"""
from dataclasses import dataclass
from typing import Any, NamedTuple, Optional

import numpy as np
from scipy.spatial.distance import cdist, pdist

from app.core.exceptions import ContractViolationException, EmptyClusterSignal, InvalidArgumentException
from app.core.logging import get_logger
from app.core.numerics import as_matrix, ensure_finite
from app.models.network import check_labels
from app.schemas.adapt import KernelConfig

logger = get_logger("kernels")


@dataclass(frozen=True, eq=False)
class WeightedSet:
    """Feature rows with nonnegative weights"""
    F: np.ndarray
    w: np.ndarray

    def __post_init__(self):
        F = as_matrix(self.F, "F")
        w = np.asarray(self.w, dtype=np.float64)
        if F.shape[0] < 1 or w.shape != (F.shape[0],):
            raise ContractViolationException(
                "weighted set needs one weight per row and at least one row",
                details={"F": list(F.shape), "w": list(w.shape)}
            )
        ensure_finite(w, "w")
        if np.any(w < 0):
            raise InvalidArgumentException("weights must be nonnegative", argument="w")
        object.__setattr__(self, "F", F)
        object.__setattr__(self, "w", w)

    @classmethod
    def uniform(cls, F: np.ndarray) -> "WeightedSet":
        F = np.asarray(F, dtype=np.float64)
        return cls(F, np.ones(F.shape[0]))

    @property
    def total_weight(self) -> float:
        return float(self.w.sum())


class MMDResult(NamedTuple):
    value: float
    grad_a: np.ndarray
    grad_b: np.ndarray


class ClassConditionalMMD(NamedTuple):
    loss: float
    grad_target: np.ndarray
    grad_source: np.ndarray
    active_classes: int
    skipped_classes: int

    @property
    def degenerate(self) -> bool:
        """No class contributed a term; the training step falls back to CE only"""
        return self.active_classes == 0


def median_heuristic_bandwidth(F_a: np.ndarray, F_b: np.ndarray) -> float:
    """
    Median of nonzero pairwise squared distances over the pooled set

    Returns:
        sigma^2, or 1.0 when every pair coincides
    """
    pooled = np.vstack([as_matrix(F_a, "F_a"), as_matrix(F_b, "F_b")])
    if pooled.shape[0] < 2:
        raise InvalidArgumentException("median heuristic needs at least 2 points", argument="F")

    d2 = pdist(pooled, "sqeuclidean")
    d2 = d2[d2 > 0]
    if d2.size == 0:
        return 1.0
    return float(np.median(d2))


def resolve_bandwidth(cfg: KernelConfig, F_a: np.ndarray, F_b: np.ndarray) -> float:
    if cfg.bandwidth_rule == "fixed":
        return float(cfg.sigma0_sq)
    return median_heuristic_bandwidth(F_a, F_b)


def _kernel_and_slope(X: np.ndarray, Y: np.ndarray, sigma_sq: float, multipliers) -> tuple:
    """Averaged kernel matrix K and G = mean_m K_m / s_m (so dk/dx = -G (x - y))"""
    D = cdist(X, Y, "sqeuclidean")
    K = np.zeros_like(D)
    G = np.zeros_like(D)
    for m in multipliers:
        s = m * sigma_sq
        Km = np.exp(-D / (2.0 * s))
        K += Km
        G += Km / s
    n_kernels = len(multipliers)
    return K / n_kernels, G / n_kernels


def mmd2_weighted(
    A: WeightedSet,
    B: WeightedSet,
    cfg: KernelConfig,
    sigma_sq: Optional[float] = None,
    normalize: bool = True
) -> MMDResult:
    """
    Weighted biased MMD^2 between two feature sets

    value = a'K_AA a - 2 a'K_AB b + b'K_BB b with a, b the (normalized)
    weights. Weights are constants for differentiation.

    Args:
        A: First weighted set
        B: Second weighted set
        cfg: Kernel family
        sigma_sq: Base bandwidth; resolved from cfg over A and B when omitted
        normalize: Divide each weight vector by its sum

    Returns:
        (value, dvalue/dA.F, dvalue/dB.F)

    Raises:
        EmptyClusterSignal: a set has zero total weight
    """
    if A.F.shape[1] != B.F.shape[1]:
        raise ContractViolationException(
            "feature dimensions differ",
            details={"a": A.F.shape[1], "b": B.F.shape[1]}
        )
    if A.total_weight <= 0 or B.total_weight <= 0:
        raise EmptyClusterSignal(details={"weight_a": A.total_weight, "weight_b": B.total_weight})

    if sigma_sq is None:
        sigma_sq = resolve_bandwidth(cfg, A.F, B.F)
    if not (sigma_sq > 0 and np.isfinite(sigma_sq)):
        raise InvalidArgumentException("bandwidth must be finite and positive", argument="sigma_sq")

    a = A.w / A.total_weight if normalize else A.w
    b = B.w / B.total_weight if normalize else B.w
    Xa, Xb = A.F, B.F

    K_aa, G_aa = _kernel_and_slope(Xa, Xa, sigma_sq, cfg.multipliers)
    K_ab, G_ab = _kernel_and_slope(Xa, Xb, sigma_sq, cfg.multipliers)
    K_bb, G_bb = _kernel_and_slope(Xb, Xb, sigma_sq, cfg.multipliers)

    value = float(a @ K_aa @ a - 2.0 * (a @ K_ab @ b) + b @ K_bb @ b)

    grad_a = (
        -2.0 * a[:, None] * ((G_aa @ a)[:, None] * Xa - G_aa @ (a[:, None] * Xa))
        + 2.0 * a[:, None] * ((G_ab @ b)[:, None] * Xa - G_ab @ (b[:, None] * Xb))
    )
    grad_b = (
        -2.0 * b[:, None] * ((G_bb @ b)[:, None] * Xb - G_bb @ (b[:, None] * Xb))
        + 2.0 * b[:, None] * ((G_ab.T @ a)[:, None] * Xb - G_ab.T @ (a[:, None] * Xa))
    )
    # rounding can leave -1e-17 on identical sets
    return MMDResult(max(value, 0.0), grad_a, grad_b)


def class_conditional_mmd(
    source_F: np.ndarray,
    source_y: np.ndarray,
    target_F: np.ndarray,
    reference_weights: Any,
    cfg: KernelConfig,
    min_cluster_size: int = 2,
    sigma_sq: Optional[float] = None
) -> ClassConditionalMMD:
    """
    Mean over active classes of MMD^2 between each source class cluster and
    the target samples referencing that class

    A class is active when it has at least ``min_cluster_size`` source rows
    and positive reference mass. Classes are visited in ascending order.

    Args:
        source_F: Source features (n_s x d)
        source_y: Source labels
        target_F: Target features (n_t x d)
        reference_weights: n_t x C matrix, or an object with ``to_dense()``
        cfg: Kernel family and weight scaling
        min_cluster_size: Minimum source rows per class
        sigma_sq: Shared base bandwidth; pooled median heuristic when omitted

    Returns:
        ClassConditionalMMD with gradients for both feature batches
    """
    source_F = as_matrix(source_F, "source_F")
    target_F = as_matrix(target_F, "target_F")
    W = reference_weights.to_dense() if hasattr(reference_weights, "to_dense") else np.asarray(reference_weights, dtype=np.float64)
    n_t, num_classes = target_F.shape[0], W.shape[1] if W.ndim == 2 else 0
    if W.shape != (n_t, num_classes) or source_F.shape[1] != target_F.shape[1]:
        raise ContractViolationException(
            "reference weights or feature shapes are inconsistent",
            details={"W": list(W.shape), "source_F": list(source_F.shape), "target_F": list(target_F.shape)}
        )
    source_y = check_labels(source_y, num_classes, source_F.shape[0])

    grad_target = np.zeros_like(target_F)
    grad_source = np.zeros_like(source_F)
    if not np.any(W > 0):
        return ClassConditionalMMD(0.0, grad_target, grad_source, 0, num_classes)

    if sigma_sq is None:
        sigma_sq = resolve_bandwidth(cfg, source_F, target_F)

    total = 0.0
    active = 0
    skipped = 0
    for c in range(num_classes):
        src_idx = np.flatnonzero(source_y == c)
        tgt_idx = np.flatnonzero(W[:, c] > 0)
        if src_idx.size < min_cluster_size or tgt_idx.size == 0:
            skipped += 1
            continue

        if cfg.weight_scaling == "per_class_sum":
            cluster = WeightedSet.uniform(source_F[src_idx])
            refs = WeightedSet(target_F[tgt_idx], W[tgt_idx, c])
            normalize = True
        else:
            cluster = WeightedSet(source_F[src_idx], np.full(src_idx.size, 1.0 / src_idx.size))
            refs = WeightedSet(target_F[tgt_idx], W[tgt_idx, c] / n_t)
            normalize = False

        try:
            term = mmd2_weighted(cluster, refs, cfg, sigma_sq=sigma_sq, normalize=normalize)
        except EmptyClusterSignal:
            skipped += 1
            continue

        total += term.value
        grad_source[src_idx] += term.grad_a
        grad_target[tgt_idx] += term.grad_b
        active += 1

    if active == 0:
        logger.debug("No active class in batch", extra={"skipped": skipped})
        return ClassConditionalMMD(0.0, grad_target, grad_source, 0, skipped)

    return ClassConditionalMMD(total / active, grad_target / active, grad_source / active, active, skipped)
