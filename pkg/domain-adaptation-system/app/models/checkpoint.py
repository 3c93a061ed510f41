"""
Checkpoint Model
Self-describing binary container for ModelParams (layout in docs/checkpoint_format.md)
"""
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Union

import numpy as np

from app.core.exceptions import (
    CheckpointIOException,
    CheckpointVersionException,
    CorruptCheckpointException,
    DimensionMismatchException,
)
from app.core.logging import get_logger
from app.models.network import ModelDims, ModelParams

MAGIC = b"MCRLCKPT"
FORMAT_VERSION = 1

# version, d_in, hidden, d_feat, num_classes, rng_seed, epoch
_HEADER = struct.Struct("<IIIIIqI")
_FLOAT = np.dtype("<f8")

logger = get_logger("checkpoint")


@dataclass
class Checkpoint:
    params: ModelParams
    rng_seed: int
    epoch: int
    format_version: int = FORMAT_VERSION

    @property
    def dims(self) -> ModelDims:
        return self.params.dims

    def bind(self, d_in: int, num_classes: int) -> ModelParams:
        """
        Return the parameters if they fit a dataset of the given shape

        Raises:
            DimensionMismatchException
        """
        dims = self.dims
        if dims.d_in != d_in or dims.num_classes != num_classes:
            raise DimensionMismatchException(
                f"checkpoint expects d_in={dims.d_in}, C={dims.num_classes}; "
                f"dataset has d_in={d_in}, C={num_classes}",
                details={"checkpoint": list(dims), "d_in": d_in, "num_classes": num_classes}
            )
        return self.params


def _block_shapes(dims: ModelDims):
    d_in, h, d_feat, c = dims
    return [(d_in, h), (h,), (h, d_feat), (d_feat,), (d_feat, c), (c,)]


def serialize_checkpoint(ckpt: Checkpoint) -> bytes:
    dims = ckpt.dims
    parts = [MAGIC, _HEADER.pack(ckpt.format_version, *dims, ckpt.rng_seed, ckpt.epoch)]
    for block in ckpt.params.blocks():
        parts.append(np.ascontiguousarray(block, dtype=_FLOAT).tobytes(order="C"))
    return b"".join(parts)


def deserialize_checkpoint(payload: bytes, source: str = "<bytes>") -> Checkpoint:
    """
    Parse a checkpoint payload

    Raises:
        CorruptCheckpointException: bad magic, truncated or trailing data
        CheckpointVersionException: unsupported format version
    """
    if len(payload) < len(MAGIC) + _HEADER.size or payload[:len(MAGIC)] != MAGIC:
        raise CorruptCheckpointException("missing magic or truncated header", path=source)

    version, d_in, h, d_feat, c, rng_seed, epoch = _HEADER.unpack_from(payload, len(MAGIC))
    if version != FORMAT_VERSION:
        raise CheckpointVersionException(
            f"checkpoint format version {version} is not supported (expected {FORMAT_VERSION})",
            found=version,
            expected=FORMAT_VERSION
        )

    dims = ModelDims(d_in, h, d_feat, c)
    shapes = _block_shapes(dims)
    expected = len(MAGIC) + _HEADER.size + sum(int(np.prod(s)) for s in shapes) * _FLOAT.itemsize
    if len(payload) != expected:
        raise CorruptCheckpointException(
            f"payload is {len(payload)} bytes, dims imply {expected}",
            path=source,
            details={"size": len(payload), "expected": expected}
        )

    offset = len(MAGIC) + _HEADER.size
    blocks = []
    for shape in shapes:
        count = int(np.prod(shape))
        blocks.append(np.frombuffer(payload, dtype=_FLOAT, count=count, offset=offset).reshape(shape).astype(np.float64))
        offset += count * _FLOAT.itemsize

    try:
        params = ModelParams.from_blocks(blocks)
    except Exception as e:
        raise CorruptCheckpointException(f"invalid parameter blocks: {e}", path=source) from e
    if not all(np.all(np.isfinite(b)) for b in blocks):
        raise CorruptCheckpointException("parameter blocks contain non-finite values", path=source)
    return Checkpoint(params=params, rng_seed=rng_seed, epoch=epoch, format_version=version)


def save_checkpoint(ckpt: Checkpoint, path: Union[str, Path]):
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(serialize_checkpoint(ckpt))
    except OSError as e:
        raise CheckpointIOException(f"cannot write checkpoint: {e}", path=str(path)) from e
    logger.info(f"Saved checkpoint to {path}", extra={"dims": list(ckpt.dims), "epoch": ckpt.epoch})


def load_checkpoint(path: Union[str, Path]) -> Checkpoint:
    path = Path(path)
    try:
        payload = path.read_bytes()
    except OSError as e:
        raise CheckpointIOException(f"cannot read checkpoint: {e}", path=str(path)) from e
    return deserialize_checkpoint(payload, source=str(path))
