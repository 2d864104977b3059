"""Reader for the dataset-manifest and prediction-file interchange formats.

The harness talks to the conversion pipeline only through its documented
file contracts: a line-delimited JSON manifest (header line, then one
record per line with sample_id / image_path / text_path / label / split)
and a `sample_id,true,pred,score` CSV of predictions. Nothing here
imports the pipeline package.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

from .errors import ManifestInvalid

MANIFEST_KIND = "apkmodal/dataset-manifest"
PREDICTIONS_HEADER = ("sample_id", "true", "pred", "score")

LABELS = ("benign", "malware")


@dataclass(frozen=True)
class Sample:
    sample_id: str
    image_path: str
    text_path: str | None
    label: str
    split: str


def load_samples(path: str | Path) -> list[Sample]:
    path = Path(path)
    if not path.is_file():
        raise ManifestInvalid(f"manifest {path} does not exist")
    lines = [line for line in path.read_text(encoding="utf-8").splitlines() if line.strip()]
    if not lines:
        raise ManifestInvalid(f"manifest {path} is empty")
    try:
        header = json.loads(lines[0])
    except json.JSONDecodeError as exc:
        raise ManifestInvalid(f"{path}: bad header line: {exc}") from exc
    if header.get("kind") != MANIFEST_KIND:
        raise ManifestInvalid(f"{path}: kind {header.get('kind')!r} is not {MANIFEST_KIND!r}")

    samples = []
    for line_num, line in enumerate(lines[1:], start=2):
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ManifestInvalid(f"{path}:{line_num}: {exc}") from exc
        label = obj.get("label")
        if label not in LABELS:
            raise ManifestInvalid(f"{path}:{line_num}: label {label!r}")
        samples.append(
            Sample(
                sample_id=obj["sample_id"],
                image_path=obj["image_path"],
                text_path=obj.get("text_path"),
                label=label,
                split=obj.get("split") or "unassigned",
            )
        )
    return samples


def split_samples(samples: list[Sample]) -> dict[str, list[Sample]]:
    parts: dict[str, list[Sample]] = {}
    for sample in samples:
        parts.setdefault(sample.split, []).append(sample)
    return parts


@dataclass(frozen=True)
class Prediction:
    sample_id: str
    true_label: str
    predicted_label: str
    score_malware: float


def write_predictions(predictions: list[Prediction], path: str | Path) -> Path:
    path = Path(path)
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(PREDICTIONS_HEADER)
        for p in predictions:
            writer.writerow(
                [p.sample_id, p.true_label, p.predicted_label, f"{p.score_malware:.10g}"]
            )
    return path
