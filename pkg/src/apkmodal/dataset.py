"""Pair images, annotations, and labels into a versioned manifest.

A manifest is a line-delimited JSON file: one header object followed by
one record per line, sorted by sample_id. Sample identity is the SHA-256
of the source APK, so renames never split a sample. Splits are assigned
per label with a splitmix64-seeded Fisher-Yates shuffle and
largest-remainder rounding, which keeps every label's split proportions
within one sample of the global fractions.
"""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass, replace
from datetime import datetime, timezone
from enum import Enum
from pathlib import Path

from .errors import DuplicateSampleId, EmptyManifest, MissingImage, UnlabeledSample
from .image import ColorMode, ImageSpec
from .labels import Label
from .png import read_png_header

log = logging.getLogger(__name__)

MANIFEST_KIND = "apkmodal/dataset-manifest"
MANIFEST_VERSION = 1
DEFAULT_FRACTIONS = (0.8, 0.1, 0.1)


class Split(str, Enum):
    TRAIN = "train"
    VAL = "val"
    TEST = "test"


@dataclass(frozen=True)
class DatasetRecord:
    sample_id: str
    image_path: str
    text_path: str | None
    label: Label
    family: str | None
    split: Split | None
    image_spec: ImageSpec

    def to_json_obj(self) -> dict:
        return {
            "sample_id": self.sample_id,
            "image_path": self.image_path,
            "text_path": self.text_path,
            "label": self.label.value,
            "family": self.family,
            "split": self.split.value if self.split else None,
            "image_spec": {
                "color_mode": self.image_spec.color_mode.value,
                "resolution": self.image_spec.resolution,
            },
        }

    @classmethod
    def from_json_obj(cls, obj: dict) -> "DatasetRecord":
        return cls(
            sample_id=obj["sample_id"],
            image_path=obj["image_path"],
            text_path=obj.get("text_path"),
            label=Label.parse(obj["label"]),
            family=obj.get("family"),
            split=Split(obj["split"]) if obj.get("split") else None,
            image_spec=ImageSpec(
                ColorMode(obj["image_spec"]["color_mode"]),
                int(obj["image_spec"]["resolution"]),
            ),
        )


@dataclass
class DatasetManifest:
    records: list[DatasetRecord]
    seed: int
    split_fractions: tuple[float, float, float]
    created_at: str

    def counts(self) -> dict[str, dict[str, int]]:
        """Per-split, per-label record tallies."""
        table: dict[str, dict[str, int]] = {}
        for record in self.records:
            split_key = record.split.value if record.split else "unassigned"
            table.setdefault(split_key, {}).setdefault(record.label.value, 0)
            table[split_key][record.label.value] += 1
        return {split: dict(sorted(by_label.items())) for split, by_label in sorted(table.items())}


def validate_fractions(fractions: tuple[float, float, float]) -> None:
    if len(fractions) != 3 or any(f < 0 for f in fractions):
        raise ValueError(f"need three non-negative fractions, got {fractions}")
    if abs(sum(fractions) - 1.0) > 1e-9:
        raise ValueError(f"split fractions must sum to 1.0, got {sum(fractions)}")


def read_labels_csv(path: str | Path) -> dict[str, tuple[Label, str | None]]:
    """sample_id -> (label, family) from a two- or three-column CSV."""
    table: dict[str, tuple[Label, str | None]] = {}
    with open(path, newline="", encoding="utf-8") as handle:
        for row_num, row in enumerate(csv.reader(handle), start=1):
            if not row or (row_num == 1 and row[0].strip().lower() == "sample_id"):
                continue
            if len(row) < 2:
                raise ValueError(f"{path}:{row_num}: expected sample_id,label[,family]")
            sample_id = row[0].strip()
            if sample_id in table:
                raise DuplicateSampleId(f"{path}:{row_num}: duplicate sample_id {sample_id!r}")
            family = row[2].strip() if len(row) > 2 and row[2].strip() else None
            table[sample_id] = (Label.parse(row[1]), family)
    return table


def _check_image(path: Path, spec: ImageSpec) -> None:
    if not path.is_file():
        raise MissingImage(str(path))
    try:
        width, height, color_type = read_png_header(path)
    except ValueError as exc:
        raise MissingImage(f"{path}: {exc}") from exc
    if (width, height) != (spec.resolution, spec.resolution):
        raise MissingImage(
            f"{path}: decodes to {width}x{height}, spec wants {spec.resolution}x{spec.resolution}"
        )
    expected_type = 0 if spec.color_mode is ColorMode.GRAYSCALE else 2
    if color_type != expected_type:
        raise MissingImage(
            f"{path}: PNG color type {color_type} does not match {spec.color_mode.value}"
        )


def _find_text(text_dir: Path | None, image_stem: str, sample_id: str) -> str | None:
    if text_dir is None:
        return None
    for candidate in (text_dir / f"{image_stem}.txt", text_dir / f"{sample_id}.txt"):
        if candidate.is_file():
            if candidate.stat().st_size == 0:
                log.warning("ignoring empty annotation file %s", candidate)
                continue
            return str(candidate)
    return None


def build_manifest(
    image_dir: str | Path,
    text_dir: str | Path | None,
    labels_path: str | Path,
    spec: ImageSpec,
    seed: int,
    fractions: tuple[float, float, float] = DEFAULT_FRACTIONS,
) -> DatasetManifest:
    """Assemble records for every image of the given spec in image_dir.

    Samples without an annotation file keep text_path null so image-only
    experiments stay valid. Splits are left unassigned; run assign_splits.
    """
    validate_fractions(fractions)
    image_dir = Path(image_dir)
    text_dir = Path(text_dir) if text_dir else None
    labels = read_labels_csv(labels_path)

    suffix = f"_{spec.tag}.png"
    records = []
    for image_path in sorted(image_dir.glob(f"*{suffix}")):
        sample_id = image_path.name[: -len(suffix)]
        if sample_id not in labels:
            raise UnlabeledSample(f"{image_path.name}: sample {sample_id!r} not in labels file")
        _check_image(image_path, spec)
        label, family = labels[sample_id]
        records.append(
            DatasetRecord(
                sample_id=sample_id,
                image_path=str(image_path),
                text_path=_find_text(text_dir, image_path.name[: -len(".png")], sample_id),
                label=label,
                family=family,
                split=None,
                image_spec=spec,
            )
        )
    records.sort(key=lambda r: r.sample_id)
    return DatasetManifest(
        records=records,
        seed=seed,
        split_fractions=fractions,
        created_at=datetime.now(timezone.utc).isoformat(timespec="seconds"),
    )


def _largest_remainder(total: int, fractions: tuple[float, float, float]) -> list[int]:
    """Integer split counts that sum to total, each within 1 of its target."""
    targets = [total * f for f in fractions]
    counts = [int(t) for t in targets]
    leftover = total - sum(counts)
    remainders = sorted(
        range(len(fractions)),
        key=lambda i: (-(targets[i] - counts[i]), i),
    )
    for i in remainders[:leftover]:
        counts[i] += 1
    return counts


def assign_splits(
    manifest: DatasetManifest,
    seed: int | None = None,
    fractions: tuple[float, float, float] | None = None,
) -> DatasetManifest:
    """Stratified train/val/test assignment, deterministic in the seed.

    Within each label, samples are ordered by sample_id, shuffled by a
    splitmix64-seeded Fisher-Yates, and cut at the fraction boundaries.
    """
    from .rng import SplitMix64, derive_seed, fisher_yates

    if not manifest.records:
        raise EmptyManifest("cannot split an empty manifest")
    seed = manifest.seed if seed is None else seed
    fractions = manifest.split_fractions if fractions is None else fractions
    validate_fractions(fractions)

    assignment: dict[str, Split] = {}
    by_label: dict[Label, list[str]] = {}
    for record in manifest.records:
        by_label.setdefault(record.label, []).append(record.sample_id)

    for label in sorted(by_label, key=lambda l: l.value):
        ids = sorted(by_label[label])
        fisher_yates(ids, SplitMix64(derive_seed(seed, label.value)))
        n_train, n_val, _ = _largest_remainder(len(ids), fractions)
        for position, sample_id in enumerate(ids):
            if position < n_train:
                assignment[sample_id] = Split.TRAIN
            elif position < n_train + n_val:
                assignment[sample_id] = Split.VAL
            else:
                assignment[sample_id] = Split.TEST

    records = [replace(r, split=assignment[r.sample_id]) for r in manifest.records]
    return DatasetManifest(
        records=records,
        seed=seed,
        split_fractions=fractions,
        created_at=manifest.created_at,
    )


# -- serialization -------------------------------------------------------------

def serialize_manifest(manifest: DatasetManifest) -> str:
    """Header line plus one record per line, sorted by sample_id. A fixed
    point under parse -> serialize."""
    header = {
        "kind": MANIFEST_KIND,
        "version": MANIFEST_VERSION,
        "seed": manifest.seed,
        "split_fractions": list(manifest.split_fractions),
        "created_at": manifest.created_at,
        "counts": manifest.counts(),
    }
    lines = [json.dumps(header, separators=(",", ":"))]
    for record in sorted(manifest.records, key=lambda r: r.sample_id):
        lines.append(json.dumps(record.to_json_obj(), separators=(",", ":")))
    return "\n".join(lines) + "\n"


def parse_manifest(text: str) -> DatasetManifest:
    lines = [line for line in text.splitlines() if line.strip()]
    if not lines:
        raise EmptyManifest("manifest file has no content")
    header = json.loads(lines[0])
    if header.get("kind") != MANIFEST_KIND:
        raise ValueError(f"not a dataset manifest (kind={header.get('kind')!r})")
    records = [DatasetRecord.from_json_obj(json.loads(line)) for line in lines[1:]]
    seen: set[str] = set()
    for record in records:
        if record.sample_id in seen:
            raise DuplicateSampleId(record.sample_id)
        seen.add(record.sample_id)
    manifest = DatasetManifest(
        records=records,
        seed=int(header["seed"]),
        split_fractions=tuple(header["split_fractions"]),
        created_at=header["created_at"],
    )
    if header.get("counts") != manifest.counts():
        raise ValueError("manifest header counts do not match records")
    return manifest


def save_manifest(manifest: DatasetManifest, path: str | Path) -> Path:
    path = Path(path)
    path.write_text(serialize_manifest(manifest), encoding="utf-8")
    return path


def load_manifest(path: str | Path) -> DatasetManifest:
    return parse_manifest(Path(path).read_text(encoding="utf-8"))
