"""Independent writer/reader for the WTSEMB1 embedding file format.

The format is the contract between this exporter and the training core,
so it is implemented here from the published layout rather than imported:

    8 bytes   magic ``WTSEMB1\\0``
    u32       N   samples            (little-endian throughout)
    u32       D   embedding dimension
    u32       C   classes
    u8        has_true_labels
    N*D f32   image embeddings, row-major
    N u32     observed labels
    N u32     true labels            (only if has_true_labels)
    C*D f32   prototype embeddings, row-major
    C times   class name: u16 length + UTF-8 bytes
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

MAGIC = b"WTSEMB1\x00"
_HEADER = struct.Struct("<IIIB")


class FormatViolation(ValueError):
    pass


@dataclass
class EmbeddingFile:
    image_embeddings: np.ndarray
    observed_labels: np.ndarray
    text_embeddings: np.ndarray
    class_names: list[str]
    true_labels: np.ndarray | None = None

    @property
    def header(self) -> tuple[int, int, int, bool]:
        n, d = self.image_embeddings.shape
        return n, d, len(self.class_names), self.true_labels is not None


def write_embedding_file(data: EmbeddingFile, path) -> None:
    n, d, c, has_true = data.header
    if n == 0:
        raise FormatViolation("refusing to write an empty dataset")
    parts = [MAGIC, _HEADER.pack(n, d, c, 1 if has_true else 0)]
    parts.append(np.ascontiguousarray(data.image_embeddings, dtype="<f4").tobytes())
    parts.append(np.ascontiguousarray(data.observed_labels, dtype="<u4").tobytes())
    if has_true:
        parts.append(np.ascontiguousarray(data.true_labels, dtype="<u4").tobytes())
    parts.append(np.ascontiguousarray(data.text_embeddings, dtype="<f4").tobytes())
    for name in data.class_names:
        raw = name.encode("utf-8")
        parts.append(struct.pack("<H", len(raw)) + raw)
    Path(path).write_bytes(b"".join(parts))


def read_embedding_file(path) -> EmbeddingFile:
    blob = Path(path).read_bytes()
    pos = 0

    def take(count, what):
        nonlocal pos
        if pos + count > len(blob):
            raise FormatViolation(f"{path}: truncated while reading {what}")
        chunk = blob[pos:pos + count]
        pos += count
        return chunk

    if take(len(MAGIC), "magic") != MAGIC:
        raise FormatViolation(f"{path}: bad magic")
    n, d, c, has_true = _HEADER.unpack(take(_HEADER.size, "header"))
    if n == 0:
        raise FormatViolation(f"{path}: empty dataset")
    images = np.frombuffer(take(4 * n * d, "image embeddings"), dtype="<f4").reshape(n, d)
    observed = np.frombuffer(take(4 * n, "observed labels"), dtype="<u4").astype(np.int64)
    true = None
    if has_true:
        true = np.frombuffer(take(4 * n, "true labels"), dtype="<u4").astype(np.int64)
    text = np.frombuffer(take(4 * c * d, "prototypes"), dtype="<f4").reshape(c, d)
    names = []
    for k in range(c):
        (length,) = struct.unpack("<H", take(2, f"class name {k}"))
        names.append(take(length, f"class name {k}").decode("utf-8"))
    if pos != len(blob):
        raise FormatViolation(f"{path}: trailing bytes")
    for labels, what in ((observed, "observed"), (true, "true")):
        if labels is not None and labels.size and labels.max() >= c:
            raise FormatViolation(f"{path}: {what} label out of range")
    if not (np.all(np.isfinite(images)) and np.all(np.isfinite(text))):
        raise FormatViolation(f"{path}: non-finite embedding values")
    return EmbeddingFile(
        image_embeddings=images.astype(np.float64),
        observed_labels=observed,
        text_embeddings=text.astype(np.float64),
        class_names=names,
        true_labels=true,
    )
