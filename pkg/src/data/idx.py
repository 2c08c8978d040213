"""Reader for IDX image/label container files (the MNIST family format).

Layout, all integers big-endian::

    images: [0x00000803][count][rows][cols][count*rows*cols unsigned bytes]
    labels: [0x00000801][count][count unsigned bytes]
"""

import gzip
import struct
from pathlib import Path
from typing import Optional, Tuple, Union

import numpy as np

from src.data.dataset import Dataset
from src.utils.errors import (
    IdxCountMismatchError,
    IdxMagicError,
    IdxTruncatedError,
)
from src.utils.logger import log_info


IMAGES_MAGIC = 0x00000803
LABELS_MAGIC = 0x00000801

PathLike = Union[str, Path]


def _read_bytes(path: Path) -> bytes:
    if path.suffix == ".gz":
        with gzip.open(path, "rb") as f:
            return f.read()
    return path.read_bytes()


def _read_header(raw: bytes, path: Path, magic: int, n_dims: int) -> Tuple[int, ...]:
    header_len = 4 * (1 + n_dims)
    if len(raw) < 4:
        raise IdxTruncatedError("file shorter than the magic number", path, len(raw))
    (found,) = struct.unpack(">I", raw[:4])
    if found != magic:
        raise IdxMagicError(f"bad magic 0x{found:08x}, expected 0x{magic:08x}", path, 0)
    if len(raw) < header_len:
        raise IdxTruncatedError("file ends inside the dimension header", path, len(raw))
    return struct.unpack(f">{n_dims}I", raw[4:header_len])


def read_idx_images(path: PathLike) -> np.ndarray:
    """Images as ``count x (rows * cols)`` floats scaled to [0, 1]."""
    path = Path(path)
    raw = _read_bytes(path)
    count, rows, cols = _read_header(raw, path, IMAGES_MAGIC, 3)
    payload = count * rows * cols
    if len(raw) < 16 + payload:
        raise IdxTruncatedError(f"expected {payload} pixel bytes, found {len(raw) - 16}", path, len(raw))
    pixels = np.frombuffer(raw, dtype=np.uint8, count=payload, offset=16)
    return pixels.reshape(count, rows * cols).astype(np.float64) / 255.0


def read_idx_labels(path: PathLike) -> np.ndarray:
    """Labels as an int64 vector."""
    path = Path(path)
    raw = _read_bytes(path)
    (count,) = _read_header(raw, path, LABELS_MAGIC, 1)
    if len(raw) < 8 + count:
        raise IdxTruncatedError(f"expected {count} label bytes, found {len(raw) - 8}", path, len(raw))
    return np.frombuffer(raw, dtype=np.uint8, count=count, offset=8).astype(np.int64)


def load_idx(images_path: PathLike, labels_path: PathLike, num_classes: Optional[int] = None) -> Dataset:
    """Load an image/label IDX pair into a Dataset.

    Args:
        images_path: IDX3 image file (optionally gzip-compressed, ``.gz``)
        labels_path: IDX1 label file (optionally gzip-compressed, ``.gz``)
        num_classes: Class count; defaults to the largest label plus one

    Returns:
        Dataset with row-major flattened images

    Raises:
        IdxMagicError: Wrong magic number (offset 0)
        IdxTruncatedError: File shorter than its header declares
        IdxCountMismatchError: Image and label counts differ (offset 4)
    """
    images = read_idx_images(images_path)
    labels = read_idx_labels(labels_path)
    if images.shape[0] != labels.shape[0]:
        raise IdxCountMismatchError(
            f"{images.shape[0]} images vs {labels.shape[0]} labels", labels_path, 4
        )
    if num_classes is not None:
        classes = num_classes
    else:
        classes = int(labels.max()) + 1 if labels.size else 1
    log_info(f"Loaded {images.shape[0]} IDX samples ({images.shape[1]} features, {classes} classes)")
    return Dataset(features=images, labels=labels, num_classes=classes)
