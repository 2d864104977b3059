"""Synthetic manifest fixtures written straight to the interchange formats."""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

import numpy as np
import pytest
from PIL import Image

MANIFEST_KIND = "apkmodal/dataset-manifest"


def _sample_id(tag: str) -> str:
    return hashlib.sha256(tag.encode()).hexdigest()


def build_corpus(
    root: Path,
    n: int = 20,
    with_texts: bool = False,
    resolution: int = 128,
    color_mode: str = "grayscale",
):
    """n synthetic samples (dark=benign, bright=malware), split 60/20/20,
    plus a manifest file in the documented line-delimited JSON schema."""
    images = root / "images"
    texts = root / "texts"
    images.mkdir(parents=True, exist_ok=True)
    if with_texts:
        texts.mkdir(parents=True, exist_ok=True)

    rng = np.random.default_rng(7)
    records = []
    n_train = int(n * 0.6)
    n_val = int(n * 0.2)
    for i in range(n):
        label = "benign" if i % 2 == 0 else "malware"
        sid = _sample_id(f"harness-{i}")
        low, high = (120, 200) if label == "malware" else (20, 100)
        pixels = rng.integers(low, high, size=(resolution, resolution), dtype=np.uint8)
        if color_mode == "rgb":
            pixels = np.dstack([pixels] * 3)
        name = f"{sid}_{color_mode}_{resolution}"
        image_path = images / f"{name}.png"
        Image.fromarray(pixels).save(image_path)

        text_path = None
        if with_texts:
            text_path = texts / f"{name}.txt"
            adjective = "requests dangerous SMS permissions" if label == "malware" else (
                "uses only ordinary networking permissions"
            )
            text_path.write_text(f"The application {adjective} and bundle {i}.", encoding="utf-8")

        split = "train" if i < n_train else ("val" if i < n_train + n_val else "test")
        records.append(
            {
                "sample_id": sid,
                "image_path": str(image_path),
                "text_path": str(text_path) if text_path else None,
                "label": label,
                "family": None,
                "split": split,
                "image_spec": {"color_mode": color_mode, "resolution": resolution},
            }
        )

    counts: dict = {}
    for record in records:
        counts.setdefault(record["split"], {}).setdefault(record["label"], 0)
        counts[record["split"]][record["label"]] += 1
    header = {
        "kind": MANIFEST_KIND,
        "version": 1,
        "seed": 0,
        "split_fractions": [0.6, 0.2, 0.2],
        "created_at": "2026-01-01T00:00:00+00:00",
        "counts": counts,
    }
    manifest_path = root / "manifest.jsonl"
    lines = [json.dumps(header, separators=(",", ":"))]
    lines += [
        json.dumps(record, separators=(",", ":"))
        for record in sorted(records, key=lambda r: r["sample_id"])
    ]
    manifest_path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return manifest_path


@pytest.fixture
def tiny_manifest(tmp_path: Path) -> Path:
    return build_corpus(tmp_path, n=20)


@pytest.fixture
def paired_manifest(tmp_path: Path) -> Path:
    return build_corpus(tmp_path, n=20, with_texts=True)
