"""
Dataset Repository
CSV persistence for embedding datasets: header f0,...,f{d-1}[,label]
"""
import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Union

import numpy as np

from app.core.exceptions import DatasetParseException, InvalidArgumentException, SchemaException
from app.core.logging import get_logger
from app.models.dataset import DatasetRole, EmbeddingDataset

LABEL_COLUMN = "label"

logger = get_logger("data")


@dataclass(frozen=True)
class CsvSchema:
    """Expected layout; ``None`` fields are inferred from the file"""
    dim: Optional[int] = None
    has_label: Optional[bool] = None
    num_classes: Optional[int] = None


def _check_header(header, schema: CsvSchema, path: str):
    has_label = bool(header) and header[-1] == LABEL_COLUMN
    feature_cols = header[:-1] if has_label else header
    expected = [f"f{i}" for i in range(len(feature_cols))]
    if not feature_cols or feature_cols != expected:
        raise SchemaException(
            "header must be f0,...,f{d-1} with an optional trailing label column",
            details={"path": path, "header": header[:8]}
        )
    if schema.dim is not None and len(feature_cols) != schema.dim:
        raise SchemaException(
            f"expected {schema.dim} feature columns, found {len(feature_cols)}",
            details={"path": path}
        )
    if schema.has_label is not None and has_label != schema.has_label:
        raise SchemaException(
            "label column required" if schema.has_label else "unexpected label column",
            details={"path": path}
        )
    return len(feature_cols), has_label


def _parse_float(cell: str, line: int, path: str) -> float:
    try:
        value = float(cell)
    except ValueError:
        raise DatasetParseException(f"non-numeric value {cell!r}", line=line, path=path)
    if not math.isfinite(value):
        raise DatasetParseException(f"non-finite value {cell!r}", line=line, path=path)
    return value


def _parse_label(cell: str, line: int, path: str) -> int:
    try:
        return int(cell)
    except ValueError:
        raise DatasetParseException(f"label {cell!r} is not an integer", line=line, path=path)


def load_csv(path: Union[str, Path], schema: CsvSchema = CsvSchema(), role: DatasetRole = "source") -> EmbeddingDataset:
    """
    Load an embedding dataset

    Args:
        path: UTF-8 CSV file
        schema: Expected layout
        role: ``source`` or ``target`` (target labels are evaluation-only)

    Returns:
        EmbeddingDataset

    Raises:
        DatasetParseException: malformed cell, with its line number
        SchemaException: bad header or inconsistent row width
    """
    path = str(path)
    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as e:
        raise InvalidArgumentException(f"cannot open dataset: {e}", argument="path") from e

    with fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise SchemaException("empty file", details={"path": path})
        dim, has_label = _check_header(header, schema, path)
        width = len(header)

        rows, labels = [], []
        for cells in reader:
            line = reader.line_num
            if not cells:
                continue
            if len(cells) != width:
                raise SchemaException(
                    f"line {line}: expected {width} columns, found {len(cells)}",
                    details={"path": path, "line": line}
                )
            rows.append([_parse_float(c, line, path) for c in cells[:dim]])
            if has_label:
                labels.append((_parse_label(cells[dim], line, path), line))

    num_classes = schema.num_classes
    if num_classes is None:
        if not has_label:
            raise SchemaException("unlabeled file needs num_classes in the schema", details={"path": path})
        num_classes = max(2, max((y for y, _ in labels), default=0) + 1)
    for y, line in labels:
        if not 0 <= y < num_classes:
            raise DatasetParseException(f"label {y} outside [0, {num_classes})", line=line, path=path)

    X = np.array(rows, dtype=np.float64).reshape(len(rows), dim)
    y = np.array([y for y, _ in labels], dtype=np.int64) if has_label else None
    logger.info(f"Loaded {X.shape[0]} rows from {path}", extra={"dim": dim, "labeled": has_label})
    return EmbeddingDataset(X, num_classes, y, role, path)


def save_csv(ds: EmbeddingDataset, path: Union[str, Path], include_labels: bool = True):
    """Write with shortest round-trip float formatting so load(save(D)) == D"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    write_labels = include_labels and ds.has_labels
    labels = ds.evaluation_labels()

    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow([f"f{i}" for i in range(ds.dim)] + ([LABEL_COLUMN] if write_labels else []))
        for i, row in enumerate(ds.X):
            cells = [repr(float(v)) for v in row]
            if write_labels:
                cells.append(str(int(labels[i])))
            writer.writerow(cells)
    logger.info(f"Wrote {ds.n} rows to {path}")
