"""
Model Package
Network parameters, checkpoints and embedding datasets
"""
from .network import ModelDims, ModelParams, init_params
from .checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from .dataset import EmbeddingDataset, batches

__all__ = [
    "ModelDims",
    "ModelParams",
    "init_params",
    "Checkpoint",
    "load_checkpoint",
    "save_checkpoint",
    "EmbeddingDataset",
    "batches",
]
