"""Zero-shot image-text classification over paired samples.

Each image is scored against one candidate text per class; a softmax
over the similarity logits gives class probabilities and the argmax is
the prediction. The class order is fixed (benign, malware) and argmax
takes the first maximum, so exact ties resolve to benign.

Similarity backends are pluggable: `clip` uses a pretrained vision-
language model (unavailable without its weights), `hash` is a fully
deterministic offline embedding used for contract tests and smoke runs.
Candidate texts default to the first benign and first malware annotation
summaries found in the manifest.
"""

from __future__ import annotations

import hashlib
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import ModelUnavailable, PairMismatch
from .manifest import Prediction, load_samples, write_predictions

log = logging.getLogger(__name__)

CLASS_ORDER = ("benign", "malware")

_EMBED_DIM = 256
_LOGIT_SCALE = 100.0  # cosine similarities spread before softmax


@dataclass(frozen=True)
class ZeroShotPair:
    sample_id: str
    image_path: str
    text_path: str
    true_label: str


@dataclass
class ZeroShotRun:
    pairs: list[ZeroShotPair]
    class_texts: dict[str, str]  # label -> candidate text
    backend: str = "hash"
    generation: dict = field(default_factory=dict)


def pairs_from_manifest(manifest_path: str | Path, split: str | None = None) -> list[ZeroShotPair]:
    pairs = []
    for sample in load_samples(manifest_path):
        if split and sample.split != split:
            continue
        if not sample.text_path:
            continue
        pairs.append(
            ZeroShotPair(
                sample_id=sample.sample_id,
                image_path=sample.image_path,
                text_path=sample.text_path,
                true_label=sample.label,
            )
        )
    return pairs


def default_class_texts(manifest_path: str | Path) -> dict[str, str]:
    """First annotation summary of each class, in manifest order."""
    texts: dict[str, str] = {}
    for sample in load_samples(manifest_path):
        if sample.text_path and sample.label not in texts:
            path = Path(sample.text_path)
            if path.is_file():
                texts[sample.label] = path.read_text(encoding="utf-8").strip()
        if len(texts) == len(CLASS_ORDER):
            break
    missing = [label for label in CLASS_ORDER if label not in texts]
    if missing:
        raise PairMismatch(f"no annotation found to seed candidate text for: {missing}")
    return texts


# -- backends ------------------------------------------------------------------

def _hash_text_embedding(text: str) -> np.ndarray:
    vector = np.zeros(_EMBED_DIM)
    for token in text.lower().split():
        digest = hashlib.sha256(token.encode("utf-8")).digest()
        index = int.from_bytes(digest[:4], "little") % _EMBED_DIM
        sign = 1.0 if digest[4] % 2 else -1.0
        vector[index] += sign
    norm = np.linalg.norm(vector)
    return vector / norm if norm else vector


def _hash_image_embedding(image_path: str) -> np.ndarray:
    with Image.open(image_path) as im:
        gray = im.convert("L").resize((16, 16), Image.BILINEAR)
        vector = np.asarray(gray, dtype=np.float64).reshape(-1)
    vector = vector - vector.mean()
    norm = np.linalg.norm(vector)
    return vector / norm if norm else vector


def _hash_backend(image_path: str, texts: list[str]) -> np.ndarray:
    image_emb = _hash_image_embedding(image_path)
    return np.array(
        [_LOGIT_SCALE * float(image_emb @ _hash_text_embedding(text)) for text in texts]
    )


class _ClipBackend:
    def __init__(self, model_id: str = "openai/clip-vit-base-patch32"):
        try:
            from transformers import CLIPModel, CLIPProcessor

            self.model = CLIPModel.from_pretrained(model_id)
            self.processor = CLIPProcessor.from_pretrained(model_id)
        except Exception as exc:
            raise ModelUnavailable(f"CLIP model {model_id!r} could not load: {exc}") from exc

    def __call__(self, image_path: str, texts: list[str]) -> np.ndarray:
        import torch

        with Image.open(image_path) as im:
            inputs = self.processor(
                text=texts, images=im.convert("RGB"), return_tensors="pt", padding=True
            )
        with torch.no_grad():
            outputs = self.model(**inputs)
        return outputs.logits_per_image[0].numpy()


def _resolve_backend(name: str, model_id: str | None = None):
    if name == "hash":
        return _hash_backend
    if name == "clip":
        return _ClipBackend(model_id) if model_id else _ClipBackend()
    raise ValueError(f"unknown backend {name!r}; expected 'hash' or 'clip'")


# -- scoring -------------------------------------------------------------------

def softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max()
    exp = np.exp(shifted)
    return exp / exp.sum()


def zero_shot_classify(run: ZeroShotRun, out_path: str | Path, model_id: str | None = None) -> list[Prediction]:
    """Score every pair and write the prediction file.

    Probabilities per sample sum to 1 (softmax); prediction is the
    highest-probability class, first-in-order on ties.
    """
    if not run.pairs:
        raise PairMismatch("zero-shot run has no image/text pairs")
    for label in CLASS_ORDER:
        if label not in run.class_texts:
            raise PairMismatch(f"missing candidate text for class {label!r}")
    backend = _resolve_backend(run.backend, model_id)
    candidate_texts = [run.class_texts[label] for label in CLASS_ORDER]

    predictions = []
    for pair in run.pairs:
        if not Path(pair.image_path).is_file():
            raise PairMismatch(f"image missing: {pair.image_path}")
        if not Path(pair.text_path).is_file():
            raise PairMismatch(f"text missing: {pair.text_path}")
        logits = np.asarray(backend(pair.image_path, candidate_texts), dtype=np.float64)
        probs = softmax(logits)
        assert math.isclose(float(probs.sum()), 1.0, abs_tol=1e-6)
        winner = CLASS_ORDER[int(np.argmax(probs))]
        predictions.append(
            Prediction(
                sample_id=pair.sample_id,
                true_label=pair.true_label,
                predicted_label=winner,
                score_malware=float(probs[CLASS_ORDER.index("malware")]),
            )
        )

    predictions.sort(key=lambda p: p.sample_id)
    write_predictions(predictions, out_path)
    return predictions
