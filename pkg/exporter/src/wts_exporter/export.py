"""Folder-to-embedding-file export and the verify report.

Expected layout: one subdirectory per class under the image root; the
subdirectory order (sorted by name) defines the class indices. Observed
labels are the directory indices. Ground-truth labels are attached only
when a sidecar label file is supplied (lines of ``relative/path label``).

The output is written atomically (temp file + rename) together with a
sidecar ``<out>.meta.txt`` recording the model id and prompt template.
"""

from __future__ import annotations

import logging
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from .encoders import load_encoder
from .format import EmbeddingFile, FormatViolation, read_embedding_file, write_embedding_file

log = logging.getLogger("wts_exporter")

DEFAULT_TEMPLATE = "a photo of a {}."
IMAGE_SUFFIXES = {".png", ".jpg", ".jpeg", ".bmp", ".gif", ".webp"}


@dataclass
class ExportJob:
    image_root: Path
    model_id: str
    template: str = DEFAULT_TEMPLATE
    out_path: Path = Path("embeddings.emb")
    device: str = "cpu"
    true_label_file: Path | None = None

    def __post_init__(self):
        self.image_root = Path(self.image_root)
        self.out_path = Path(self.out_path)
        if self.template.count("{}") != 1:
            raise ValueError("template must contain exactly one {} placeholder")


@dataclass
class ExportReport:
    n_samples: int
    n_classes: int
    dim: int
    skipped: list[str] = field(default_factory=list)
    zero_shot_accuracy: float | None = None


def _scan_classes(root: Path) -> list[tuple[str, list[Path]]]:
    if not root.is_dir():
        raise ValueError(f"{root} is not a directory")
    classes = []
    for sub in sorted(p for p in root.iterdir() if p.is_dir()):
        files = sorted(
            p for p in sub.iterdir()
            if p.is_file() and p.suffix.lower() in IMAGE_SUFFIXES
        )
        if not files:
            raise ValueError(f"class directory {sub.name!r} has no images")
        classes.append((sub.name, files))
    if not classes:
        raise ValueError(f"{root} has no class subdirectories")
    return classes


def _load_true_labels(job: ExportJob, paths: list[Path], n_classes: int) -> np.ndarray:
    table = {}
    for lineno, raw in enumerate(
        Path(job.true_label_file).read_text().splitlines(), start=1
    ):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        try:
            rel, label = line.rsplit(None, 1)
            table[rel] = int(label)
        except ValueError as exc:
            raise ValueError(f"{job.true_label_file}: bad line {lineno}: {raw!r}") from exc
    labels = np.empty(len(paths), dtype=np.int64)
    for i, path in enumerate(paths):
        rel = str(path.relative_to(job.image_root))
        if rel not in table:
            raise ValueError(f"{job.true_label_file}: no label for {rel}")
        labels[i] = table[rel]
    if labels.size and (labels.min() < 0 or labels.max() >= n_classes):
        raise ValueError("sidecar labels out of class range")
    return labels


def zero_shot_accuracy(images: np.ndarray, prototypes: np.ndarray,
                       labels: np.ndarray) -> float:
    """Argmax-cosine accuracy, computed here as an independent cross-check
    of the core's teacher evaluation."""
    im = images / np.linalg.norm(images, axis=1, keepdims=True)
    pr = prototypes / np.linalg.norm(prototypes, axis=1, keepdims=True)
    predicted = np.argmax(im @ pr.T, axis=1)
    return float(np.mean(predicted == labels))


def export(job: ExportJob) -> ExportReport:
    classes = _scan_classes(job.image_root)
    encoder = load_encoder(job.model_id, device=job.device)

    images, labels, kept_paths, skipped = [], [], [], []
    for index, (_, files) in enumerate(classes):
        decoded = 0
        for path in files:
            try:
                with Image.open(path) as img:
                    img.load()
                    images.append(img.copy())
            except (UnidentifiedImageError, OSError) as exc:
                skipped.append(str(path))
                log.warning("skipping undecodable image %s (%s)", path, exc)
                continue
            labels.append(index)
            kept_paths.append(path)
            decoded += 1
        if decoded == 0:
            raise ValueError(f"class directory {classes[index][0]!r} has no decodable images")

    image_matrix = encoder.encode_images(images)
    prompts = [job.template.format(name) for name, _ in classes]
    text_matrix = encoder.encode_texts(prompts)

    true_labels = None
    if job.true_label_file is not None:
        true_labels = _load_true_labels(job, kept_paths, len(classes))

    data = EmbeddingFile(
        image_embeddings=image_matrix,
        observed_labels=np.asarray(labels, dtype=np.int64),
        text_embeddings=text_matrix,
        class_names=[name for name, _ in classes],
        true_labels=true_labels,
    )
    tmp = job.out_path.with_name(job.out_path.name + ".tmp")
    write_embedding_file(data, tmp)
    os.replace(tmp, job.out_path)
    meta = job.out_path.with_name(job.out_path.name + ".meta.txt")
    meta.write_text(
        f"model = {job.model_id}\n"
        f"template = {job.template}\n"
        f"image_root = {job.image_root}\n"
        f"skipped = {len(skipped)}\n"
    )

    report = ExportReport(
        n_samples=len(labels),
        n_classes=len(classes),
        dim=image_matrix.shape[1],
        skipped=skipped,
    )
    if true_labels is not None:
        report.zero_shot_accuracy = zero_shot_accuracy(
            image_matrix, text_matrix, true_labels
        )
    return report


def verify(path) -> tuple[int, list[str]]:
    """Parse and report on an embedding file.

    Returns (exit code, report lines). Format violations give exit 2;
    non-unit embedding rows beyond 1e-3 produce a warning but exit 0.
    """
    lines = []
    try:
        data = read_embedding_file(path)
    except FormatViolation as exc:
        return 2, [f"invalid: {exc}"]
    n, d, c, has_true = data.header
    lines.append(f"N={n} D={d} C={c} has_true_labels={int(has_true)}")
    image_norms = np.linalg.norm(data.image_embeddings, axis=1)
    text_norms = np.linalg.norm(data.text_embeddings, axis=1)
    lines.append(
        f"image norms: min {image_norms.min():.6f} max {image_norms.max():.6f}"
    )
    lines.append(
        f"prototype norms: min {text_norms.min():.6f} max {text_norms.max():.6f}"
    )
    hist = np.bincount(data.observed_labels, minlength=c)
    lines.append("observed histogram: " + " ".join(str(v) for v in hist))
    worst = max(np.abs(image_norms - 1.0).max(), np.abs(text_norms - 1.0).max())
    if worst > 1e-3:
        lines.append(f"warning: embedding norms deviate from 1 by up to {worst:.2e}")
    return 0, lines
