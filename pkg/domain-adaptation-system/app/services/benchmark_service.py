"""
Benchmark Service
Synthetic category-ambiguity benchmark: compact source classes, a rotated,
translated and noisier target with some class means pulled together
"""
import json
from pathlib import Path
from typing import List, NamedTuple

import numpy as np

from app.config import settings
from app.core.exceptions import InvalidArgumentException
from app.core.logging import get_logger
from app.core.numerics import make_rng
from app.models.dataset import EmbeddingDataset
from app.schemas.adapt import validate_model
from app.schemas.benchmark import ShiftSpec

# Stream id for benchmark generation
GENERATOR_STREAM = 7

# Class-mean radius in units of source_sigma * sqrt(d)
MEAN_RADIUS = 2.0

logger = get_logger("data")


class ShiftBenchmark(NamedTuple):
    source: EmbeddingDataset
    target: EmbeddingDataset
    source_test: EmbeddingDataset


def available_presets() -> List[str]:
    return sorted(p.stem for p in Path(settings.PRESET_DIR).glob("*.json"))


def load_preset(name: str) -> ShiftSpec:
    """Read a shipped ShiftSpec preset such as ``ambiguity-16`` or ``null-16``"""
    path = Path(settings.PRESET_DIR) / f"{name}.json"
    if not path.is_file():
        raise InvalidArgumentException(
            f"unknown preset '{name}'; available: {', '.join(available_presets())}",
            argument="preset"
        )
    return load_spec(path)


def load_spec(path: Path) -> ShiftSpec:
    with open(path, encoding="utf-8") as fh:
        return validate_model(ShiftSpec, json.load(fh))


def rotate_pairs(X: np.ndarray, angle: float) -> np.ndarray:
    """Rotate every dimension pair (0,1), (2,3), ... by ``angle`` radians"""
    out = X.copy()
    c, s = np.cos(angle), np.sin(angle)
    for p in range(X.shape[1] // 2):
        x, y = X[:, 2 * p], X[:, 2 * p + 1]
        out[:, 2 * p] = c * x - s * y
        out[:, 2 * p + 1] = s * x + c * y
    return out


def _sample(rng: np.random.Generator, means: np.ndarray, per_class: int, sigma: float):
    labels = np.repeat(np.arange(means.shape[0]), per_class)
    X = means[labels] + sigma * rng.standard_normal((labels.size, means.shape[1]))
    return X, labels


def generate_shift_benchmark(spec: ShiftSpec) -> ShiftBenchmark:
    """
    Draw source, target and held-out source-test datasets

    Class means lie on a sphere of radius MEAN_RADIUS * source_sigma * sqrt(d).
    Target means are rotated pairwise and translated along a random direction
    by ``bias`` per coordinate (norm bias * sqrt(d)); then
    round(class_overlap * C/2) disjoint class pairs move ``overlap_strength``
    of their gap toward each other.

    Args:
        spec: Benchmark definition

    Returns:
        ShiftBenchmark(source, target with evaluation-only labels, source_test)
    """
    C, d = spec.num_classes, spec.dim
    rng = make_rng(spec.seed, GENERATOR_STREAM)

    directions = rng.standard_normal((C, d))
    directions /= np.linalg.norm(directions, axis=1, keepdims=True)
    means = directions * (MEAN_RADIUS * spec.source_sigma * np.sqrt(d))

    bias_direction = rng.standard_normal(d)
    bias_direction /= np.linalg.norm(bias_direction)
    pairing = rng.permutation(C)[: 2 * (C // 2)].reshape(-1, 2)

    target_means = rotate_pairs(means, spec.rotation_angle) + spec.bias * np.sqrt(d) * bias_direction
    n_pulled = int(round(spec.class_overlap * len(pairing)))
    for i, j in pairing[:n_pulled]:
        gap = target_means[j] - target_means[i]
        target_means[i] = target_means[i] + spec.overlap_strength * gap
        target_means[j] = target_means[j] - spec.overlap_strength * gap

    provenance = f"shift:{spec.name or 'custom'}:seed={spec.seed}"
    Xs, ys = _sample(rng, means, spec.n_per_class_source, spec.source_sigma)
    Xt, yt = _sample(rng, target_means, spec.n_per_class_target, spec.target_sigma)
    Xv, yv = _sample(rng, means, spec.n_per_class_target, spec.source_sigma)

    logger.info(
        "Generated shift benchmark",
        extra={"spec": spec.name, "seed": spec.seed, "pulled_pairs": n_pulled, "n_source": ys.size, "n_target": yt.size}
    )
    return ShiftBenchmark(
        source=EmbeddingDataset(Xs, C, ys, "source", f"{provenance}:source"),
        target=EmbeddingDataset(Xt, C, yt, "target", f"{provenance}:target"),
        source_test=EmbeddingDataset(Xv, C, yv, "target", f"{provenance}:source_test"),
    )
