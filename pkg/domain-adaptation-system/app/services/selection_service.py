"""
Selection Service
Pseudo-labels and reference weights for single-label, hard, soft and ratio policies
"""
from dataclasses import dataclass
from typing import List, Tuple

import numpy as np

from app.core.exceptions import ContractViolationException, InvalidArgumentException
from app.core.numerics import as_matrix, sigmoid, softmax
from app.schemas.adapt import SelectionPolicy
from app.schemas.report import SelectionSummary

Row = Tuple[Tuple[int, float], ...]


@dataclass(frozen=True, eq=False)
class PseudoLabels:
    labels: np.ndarray   # argmax class per row
    probs: np.ndarray    # softmax of the logits
    logits: np.ndarray

    @property
    def num_classes(self) -> int:
        return self.probs.shape[1]

    def __len__(self) -> int:
        return self.labels.shape[0]


@dataclass(frozen=True)
class ReferenceWeights:
    """Sparse n_t x C matrix: for each target row, the (class, weight) pairs it references"""
    n_t: int
    num_classes: int
    rows: Tuple[Row, ...]

    def to_dense(self) -> np.ndarray:
        W = np.zeros((self.n_t, self.num_classes))
        for i, row in enumerate(self.rows):
            for c, w in row:
                W[i, c] = w
        return W

    def nnz_per_row(self) -> List[int]:
        return [sum(1 for _, w in row if w != 0) for row in self.rows]


def pseudo_labels(logits: np.ndarray) -> PseudoLabels:
    """Argmax class (ties to the lowest index) and softmax probabilities per row"""
    Z = as_matrix(logits, "logits")
    if Z.shape[1] < 2:
        raise InvalidArgumentException("pseudo-labels need at least 2 classes", argument="logits")
    return PseudoLabels(labels=_ranked(Z)[:, 0], probs=softmax(Z), logits=Z)


def _ranked(scores: np.ndarray) -> np.ndarray:
    """Class indices by descending score; stable sort keeps ties in index order"""
    return np.argsort(-scores, axis=-1, kind="stable")


def top_k(P: np.ndarray, k: int) -> List[int]:
    """
    The k most probable classes, most probable first

    Args:
        P: Probability vector
        k: Number of classes, 1 <= k <= C

    Returns:
        Ordered class indices
    """
    P = np.asarray(P, dtype=np.float64)
    if P.ndim != 1:
        raise ContractViolationException("top_k expects a single probability vector", details={"shape": list(P.shape)})
    if not 1 <= k <= P.shape[0]:
        raise InvalidArgumentException(f"k must lie in [1, {P.shape[0]}], got {k}", argument="k")
    return [int(c) for c in _ranked(P)[:k]]


def build_weights(pl: PseudoLabels, policy: SelectionPolicy) -> ReferenceWeights:
    """
    Reference weights for a batch of target rows

    single_label: weight 1 on the argmax class.
    hard(k): weight 1 on each top-k class.
    soft(k): weight sigmoid(raw logit) on each top-k class.
    ratio(t): top-1 alone when p1/p2 > t, otherwise top-1 and top-2, weight 1.
    """
    policy.validate_for(pl.num_classes)
    n = len(pl)
    order = _ranked(pl.logits)

    if policy.variant == "single_label":
        rows = tuple(((int(c), 1.0),) for c in pl.labels)
    elif policy.variant == "hard":
        rows = tuple(tuple((int(c), 1.0) for c in order[i, :policy.k]) for i in range(n))
    elif policy.variant == "soft":
        chosen = order[:, :policy.k]
        w = sigmoid(np.take_along_axis(pl.logits, chosen, axis=1))
        rows = tuple(
            tuple((int(c), float(wt)) for c, wt in zip(chosen[i], w[i]))
            for i in range(n)
        )
    else:
        idx = np.arange(n)
        first, second = order[:, 0], order[:, 1]
        with np.errstate(divide="ignore"):
            ratio = pl.probs[idx, first] / pl.probs[idx, second]
        rows = tuple(
            ((int(first[i]), 1.0),) if ratio[i] > policy.threshold
            else ((int(first[i]), 1.0), (int(second[i]), 1.0))
            for i in range(n)
        )

    return ReferenceWeights(n_t=n, num_classes=pl.num_classes, rows=rows)


def selection_report(weights: ReferenceWeights) -> SelectionSummary:
    """Histogram of referenced clusters per sample and per-class weight mass"""
    histogram = [0] * (weights.num_classes + 1)
    for count in weights.nnz_per_row():
        histogram[count] += 1
    mass = weights.to_dense().sum(axis=0) if weights.n_t else np.zeros(weights.num_classes)
    return SelectionSummary(
        n_t=weights.n_t,
        clusters_per_sample=histogram,
        class_mass=[float(m) for m in mass]
    )
