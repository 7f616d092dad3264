"""Reader and writer for the big-endian IDX format used by MNIST."""
from __future__ import annotations

import gzip
import struct
from pathlib import Path

import numpy as np

IMAGE_MAGIC = 0x00000803
LABEL_MAGIC = 0x00000801


class IDXFormatError(ValueError):
    pass


def _open(path):
    path = Path(path)
    if path.suffix == ".gz":
        return gzip.open(path, "rb")
    return open(path, "rb")


def _read_header(f, path, magic: int, ndims: int) -> tuple[int, ...]:
    head = f.read(4 * (1 + ndims))
    if len(head) < 4:
        raise IDXFormatError(f"{path}: truncated header")
    (found,) = struct.unpack(">I", head[:4])
    if found != magic:
        raise IDXFormatError(f"{path}: bad magic 0x{found:08X}, expected 0x{magic:08X}")
    if len(head) < 4 * (1 + ndims):
        raise IDXFormatError(f"{path}: truncated header (dimension sizes)")
    return struct.unpack(f">{ndims}I", head[4:])


def read_idx_images(path) -> np.ndarray:
    """Return a ``(count, rows, cols)`` uint8 array."""
    with _open(path) as f:
        count, rows, cols = _read_header(f, path, IMAGE_MAGIC, 3)
        body = f.read()
    expected = count * rows * cols
    if len(body) < expected:
        raise IDXFormatError(f"{path}: truncated pixel data, {len(body)} of {expected} bytes")
    return np.frombuffer(body[:expected], dtype=np.uint8).reshape(count, rows, cols)


def read_idx_labels(path) -> np.ndarray:
    with _open(path) as f:
        (count,) = _read_header(f, path, LABEL_MAGIC, 1)
        body = f.read()
    if len(body) < count:
        raise IDXFormatError(f"{path}: truncated label data, {len(body)} of {count} bytes")
    return np.frombuffer(body[:count], dtype=np.uint8).copy()


def write_idx_images(path, images: np.ndarray) -> None:
    images = np.asarray(images, dtype=np.uint8)
    count, rows, cols = images.shape
    with open(path, "wb") as f:
        f.write(struct.pack(">4I", IMAGE_MAGIC, count, rows, cols))
        f.write(images.tobytes())


def write_idx_labels(path, labels: np.ndarray) -> None:
    labels = np.asarray(labels, dtype=np.uint8)
    with open(path, "wb") as f:
        f.write(struct.pack(">2I", LABEL_MAGIC, labels.size))
        f.write(labels.tobytes())
