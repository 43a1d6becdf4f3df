"""Image and prompt encoders behind a single interface.

Two families are supported through the model identifier:

  ``toy``          deterministic local featurizer (downsampled pixels under
                   a fixed random projection; prompts hash to fixed unit
                   vectors). Needs no downloads; meant for pipeline tests
                   and format plumbing, not for real zero-shot quality.
  anything else    treated as a Hugging Face CLIP checkpoint id, e.g.
                   ``openai/clip-vit-base-patch16``. Requires the ``clip``
                   extra (torch + transformers) and locally available
                   model weights.

Every encoder returns L2-normalized float32-ready vectors.
"""

from __future__ import annotations

import hashlib

import numpy as np
from PIL import Image

TOY_MODEL = "toy"
TOY_DIM = 64
_TOY_THUMB = 8


def _l2_normalize(matrix: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(matrix, axis=1, keepdims=True)
    if np.any(norms == 0.0):
        raise ValueError("encoder produced a zero vector")
    return matrix / norms


class ToyEncoder:
    """Deterministic stand-in encoder. Same inputs always give same vectors."""

    def __init__(self, dim: int = TOY_DIM):
        self.dim = dim
        rng = np.random.default_rng(48879)
        self._projection = rng.standard_normal((3 * _TOY_THUMB * _TOY_THUMB, dim))

    def encode_images(self, images: list[Image.Image]) -> np.ndarray:
        rows = np.empty((len(images), self.dim), dtype=np.float64)
        for i, img in enumerate(images):
            thumb = img.convert("RGB").resize((_TOY_THUMB, _TOY_THUMB), Image.BILINEAR)
            pixels = np.asarray(thumb, dtype=np.float64).reshape(-1) / 255.0
            pixels -= pixels.mean()
            rows[i] = pixels @ self._projection
        return _l2_normalize(rows)

    def encode_texts(self, prompts: list[str]) -> np.ndarray:
        rows = np.empty((len(prompts), self.dim), dtype=np.float64)
        for i, prompt in enumerate(prompts):
            digest = hashlib.sha256(prompt.encode("utf-8")).digest()
            seed = int.from_bytes(digest[:8], "little")
            rows[i] = np.random.default_rng(seed).standard_normal(self.dim)
        return _l2_normalize(rows)


class ClipEncoder:
    """Hugging Face CLIP wrapper; loaded lazily so the toy path has no
    torch dependency."""

    def __init__(self, model_id: str, device: str = "cpu", batch_size: int = 16):
        try:
            import torch
            from transformers import CLIPModel, CLIPProcessor
        except ImportError as exc:
            raise RuntimeError(
                f"model {model_id!r} needs the 'clip' extra (torch + transformers)"
            ) from exc
        self._torch = torch
        self.device = device
        self.batch_size = batch_size
        self.model = CLIPModel.from_pretrained(model_id).to(device).eval()
        self.processor = CLIPProcessor.from_pretrained(model_id)

    def encode_images(self, images: list[Image.Image]) -> np.ndarray:
        torch = self._torch
        chunks = []
        with torch.no_grad():
            for start in range(0, len(images), self.batch_size):
                batch = images[start:start + self.batch_size]
                inputs = self.processor(images=batch, return_tensors="pt").to(self.device)
                feats = self.model.get_image_features(**inputs)
                chunks.append(feats.cpu().numpy().astype(np.float64))
        return _l2_normalize(np.vstack(chunks))

    def encode_texts(self, prompts: list[str]) -> np.ndarray:
        torch = self._torch
        with torch.no_grad():
            inputs = self.processor(text=prompts, return_tensors="pt", padding=True)
            feats = self.model.get_text_features(**inputs.to(self.device))
        return _l2_normalize(feats.cpu().numpy().astype(np.float64))


def load_encoder(model_id: str, device: str = "cpu"):
    if model_id == TOY_MODEL:
        return ToyEncoder()
    return ClipEncoder(model_id, device=device)
