"""
Shared fixtures: tiny models, separable blobs and a small shift benchmark
"""
import numpy as np
import pytest

from app.core.numerics import make_rng
from app.models.dataset import EmbeddingDataset
from app.models.network import ModelDims, init_params
from app.schemas.adapt import AdaptConfig
from app.schemas.benchmark import ShiftSpec
from app.services.benchmark_service import generate_shift_benchmark


@pytest.fixture
def rng():
    return make_rng(1234, 99)


@pytest.fixture
def tiny_dims():
    return ModelDims(d_in=4, hidden=6, d_feat=3, num_classes=3)


@pytest.fixture
def tiny_params(tiny_dims):
    return init_params(tiny_dims, seed=3)


@pytest.fixture
def blobs():
    """Two well separated Gaussian blobs in 2-D"""
    rng = make_rng(5, 1)
    X = np.vstack([rng.normal(-3.0, 0.5, (40, 2)), rng.normal(3.0, 0.5, (40, 2))])
    y = np.repeat([0, 1], 40)
    return EmbeddingDataset(X, 2, y, "source", "blobs")


@pytest.fixture
def small_spec():
    return ShiftSpec(
        name="small", C=4, d=4, n_per_class_source=12, n_per_class_target=8,
        source_sigma=0.5, target_sigma=0.8, rotation_angle=0.3, bias=0.5, class_overlap=0.5, seed=2,
    )


@pytest.fixture
def small_bench(small_spec):
    return generate_shift_benchmark(small_spec)


@pytest.fixture
def fast_cfg():
    return AdaptConfig(epochs=2, batch_size=8, hidden_dim=8, feature_dim=4, seed=11)
