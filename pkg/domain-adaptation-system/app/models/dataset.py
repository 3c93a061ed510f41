"""
Embedding Dataset Model
Feature matrices with optional labels, and deterministic mini-batching
"""
from dataclasses import dataclass, field
from typing import List, Literal, Optional

import numpy as np

from app.core.exceptions import ContractViolationException, InvalidArgumentException
from app.core.numerics import as_matrix
from app.models.network import check_labels

DatasetRole = Literal["source", "target"]


@dataclass(frozen=True, eq=False)
class EmbeddingDataset:
    """
    n x d features plus optional labels

    Target datasets keep their labels for evaluation only: ``training_labels``
    refuses them, ``evaluation_labels()`` returns them.
    """
    X: np.ndarray
    num_classes: int
    labels: Optional[np.ndarray] = field(default=None, repr=False)
    role: DatasetRole = "source"
    provenance: str = ""

    def __post_init__(self):
        X = as_matrix(self.X, "X").copy()
        X.setflags(write=False)
        object.__setattr__(self, "X", X)
        if self.num_classes < 2:
            raise InvalidArgumentException("datasets need at least 2 classes", argument="num_classes")
        if self.labels is not None:
            y = check_labels(self.labels, self.num_classes, X.shape[0])
            y.setflags(write=False)
            object.__setattr__(self, "labels", y)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def dim(self) -> int:
        return self.X.shape[1]

    @property
    def has_labels(self) -> bool:
        return self.labels is not None

    @property
    def training_labels(self) -> np.ndarray:
        if self.role != "source":
            raise ContractViolationException(
                "target labels are reserved for evaluation",
                details={"provenance": self.provenance}
            )
        if self.labels is None:
            raise ContractViolationException("source dataset has no labels", details={"provenance": self.provenance})
        return self.labels

    def evaluation_labels(self) -> Optional[np.ndarray]:
        return self.labels

    def as_target(self) -> "EmbeddingDataset":
        return EmbeddingDataset(self.X, self.num_classes, self.labels, "target", self.provenance)

    def equals(self, other: "EmbeddingDataset") -> bool:
        same_labels = (
            (self.labels is None and other.labels is None)
            or (self.labels is not None and other.labels is not None and np.array_equal(self.labels, other.labels))
        )
        return (
            self.num_classes == other.num_classes
            and self.X.shape == other.X.shape
            and self.X.tobytes() == other.X.tobytes()
            and same_labels
        )


def batches(ds: EmbeddingDataset, batch_size: int, rng: np.random.Generator) -> List[np.ndarray]:
    """
    One epoch of shuffled index batches

    A trailing batch with fewer than 2 samples is merged into the previous one.

    Args:
        ds: Dataset to batch
        batch_size: Samples per batch
        rng: Epoch generator (see numerics.make_rng)

    Returns:
        List of index arrays partitioning range(n)
    """
    if batch_size < 1:
        raise InvalidArgumentException("batch_size must be >= 1", argument="batch_size")
    if ds.n == 0:
        raise InvalidArgumentException("cannot batch an empty dataset", argument="ds")

    order = rng.permutation(ds.n)
    chunks = [order[i:i + batch_size] for i in range(0, ds.n, batch_size)]
    if len(chunks) > 1 and len(chunks[-1]) < 2:
        tail = chunks.pop()
        chunks[-1] = np.concatenate([chunks[-1], tail])
    return chunks
