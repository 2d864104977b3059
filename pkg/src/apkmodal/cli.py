"""Batch command-line driver for the whole pipeline.

Subcommands: convert, extract-text, dataset, train-baseline, predict,
evaluate. Exit codes are a stable contract: 0 success, 1 some files
failed but the batch finished, 2 usage or configuration error. Per-file
failures never abort a corpus run; they are collected and summarized.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import hashlib
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import baseline, dataset, metrics, png
from .apk import SourceMode, collect_code_bytes, open_apk, read_entry
from .axml import decode_axml
from .errors import ApkModalError, DatasetError
from .image import (
    ColorMode,
    ImageSpec,
    ResampleFilter,
    RESOLUTIONS,
    all_specs,
    encode_canvas,
    image_file_name,
    resample,
)
from .labels import Label
from .textfeat import (
    AnnotatorConfig,
    EvidenceConfig,
    Provenance,
    annotate,
    build_prompt,
    extract_evidence,
)

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_PARTIAL = 1
EXIT_USAGE = 2


def _gather_apks(inputs: list[str]) -> list[Path]:
    apks: list[Path] = []
    for item in inputs:
        path = Path(item)
        if path.is_dir():
            apks.extend(sorted(path.glob("*.apk")))
        elif path.is_file():
            apks.append(path)
        else:
            raise FileNotFoundError(f"input {path} does not exist")
    return apks


def _parse_specs(color_mode: str, resolution: str, resample_name: str) -> list[ImageSpec]:
    flt = ResampleFilter(resample_name)
    if color_mode == "all" and resolution == "all":
        return all_specs(flt)
    modes = [ColorMode.GRAYSCALE, ColorMode.RGB] if color_mode == "all" else [ColorMode(color_mode)]
    sides = list(RESOLUTIONS) if resolution == "all" else [int(resolution)]
    return [ImageSpec(mode, side, flt) for mode in modes for side in sides]


def _add_spec_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--color-mode", choices=["grayscale", "rgb", "all"], default="all",
        help="image color mode, or 'all' for both (default: all)",
    )
    parser.add_argument(
        "--resolution", choices=["128", "256", "512", "all"], default="all",
        help="square output resolution, or 'all' for the full matrix (default: all)",
    )
    parser.add_argument(
        "--resample", choices=["nearest", "bilinear"], default="nearest",
        help="resampling filter (default: nearest, bit-exact)",
    )


# -- convert -------------------------------------------------------------------

def _convert_one(apk_path: Path, specs: list[ImageSpec], source: SourceMode, out_dir: Path) -> dict:
    sha = hashlib.sha256(apk_path.read_bytes()).hexdigest()
    with open_apk(apk_path) as archive:
        data = collect_code_bytes(archive, source)
    outputs = []
    for mode in {spec.color_mode for spec in specs}:
        canvas = encode_canvas(data, mode)
        for spec in specs:
            if spec.color_mode is not mode:
                continue
            image = resample(canvas, spec, source_len=len(data))
            name = image_file_name(sha, spec)
            png.write_png(image.pixels, out_dir / name)
            outputs.append(name)
    return {"apk": str(apk_path), "sha256": sha, "status": "ok", "outputs": sorted(outputs)}


def cmd_convert(args: argparse.Namespace) -> int:
    try:
        apks = _gather_apks(args.input)
        specs = _parse_specs(args.color_mode, args.resolution, args.resample)
    except (FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if not apks:
        print("error: no APK files found in the given inputs", file=sys.stderr)
        return EXIT_USAGE

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    source = SourceMode(args.source)

    results = []
    with concurrent.futures.ThreadPoolExecutor(max_workers=args.jobs) as pool:
        futures = {
            pool.submit(_convert_one, apk, specs, source, out_dir): apk for apk in apks
        }
        done = 0
        for future in concurrent.futures.as_completed(futures):
            apk = futures[future]
            done += 1
            try:
                results.append(future.result())
            except (ApkModalError, OSError) as exc:
                log.error("%s: %s", apk, exc)
                results.append({"apk": str(apk), "status": "error", "error": str(exc)})
            log.info("converted %d/%d", done, len(apks))

    results.sort(key=lambda r: r["apk"])
    index_path = out_dir / "index.jsonl"
    with open(index_path, "w", encoding="utf-8") as handle:
        for row in results:
            handle.write(json.dumps(row, separators=(",", ":")) + "\n")

    failed = sum(1 for r in results if r["status"] != "ok")
    print(f"convert: {len(results) - failed} ok, {failed} failed, index at {index_path}")
    return EXIT_PARTIAL if failed else EXIT_OK


# -- extract-text ----------------------------------------------------------------

def _extract_one(
    apk_path: Path,
    specs: list[ImageSpec],
    evidence_config: EvidenceConfig,
    max_tokens: int,
    annotator: AnnotatorConfig | None,
    labels: dict[str, tuple[Label, str | None]] | None,
    out_dir: Path,
) -> dict:
    sha = hashlib.sha256(apk_path.read_bytes()).hexdigest()
    with open_apk(apk_path) as archive:
        manifest = None
        if "AndroidManifest.xml" in archive:
            try:
                manifest = decode_axml(read_entry(archive, "AndroidManifest.xml"))
            except ApkModalError as exc:
                log.warning("%s: manifest undecodable (%s); continuing without it", apk_path, exc)
        evidence = extract_evidence(archive, manifest, evidence_config)

    (out_dir / f"{sha}.evidence.json").write_text(evidence.to_json() + "\n", encoding="utf-8")
    prompts = {
        hypothesis: build_prompt(evidence, hypothesis, max_tokens)
        for hypothesis in (Label.BENIGN, Label.MALWARE)
    }
    (out_dir / f"{sha}.prompt_benign.txt").write_text(prompts[Label.BENIGN].rendered(), encoding="utf-8")
    (out_dir / f"{sha}.prompt_malware.txt").write_text(prompts[Label.MALWARE].rendered(), encoding="utf-8")

    row = {"apk": str(apk_path), "sha256": sha, "status": "ok"}
    if annotator is not None:
        # annotate with the label-matching prompt when the label is known,
        # with the threat-analysis prompt otherwise
        hypothesis = Label.MALWARE
        if labels and sha in labels:
            hypothesis = labels[sha][0]
        annotation = annotate(prompts[hypothesis], annotator)
        for spec in specs:
            stem = image_file_name(sha, spec)[: -len(".png")]
            (out_dir / f"{stem}.txt").write_text(annotation.text, encoding="utf-8")
    return row


def cmd_extract_text(args: argparse.Namespace) -> int:
    try:
        apks = _gather_apks(args.input)
        specs = _parse_specs(args.color_mode, args.resolution, args.resample)
    except (FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if not apks:
        print("error: no APK files found in the given inputs", file=sys.stderr)
        return EXIT_USAGE

    try:
        annotator = AnnotatorConfig.from_env()
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if annotator is not None:
        if args.stub_dir:
            annotator.stub_dir = Path(args.stub_dir)
        if annotator.mode is Provenance.LIVE_ENDPOINT and not annotator.endpoint:
            print("error: ANNOTATOR_MODE=live requires ANNOTATOR_ENDPOINT", file=sys.stderr)
            return EXIT_USAGE
        if annotator.mode is Provenance.STUB and annotator.stub_dir is None:
            print("error: stub mode requires --stub-dir or ANNOTATOR_STUB_DIR", file=sys.stderr)
            return EXIT_USAGE

    labels = dataset.read_labels_csv(args.labels) if args.labels else None
    evidence_config = EvidenceConfig(min_string_len=args.min_string_len)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    failed = 0
    with concurrent.futures.ThreadPoolExecutor(max_workers=args.jobs) as pool:
        futures = {
            pool.submit(
                _extract_one, apk, specs, evidence_config, args.max_tokens, annotator, labels, out_dir
            ): apk
            for apk in apks
        }
        for future in concurrent.futures.as_completed(futures):
            apk = futures[future]
            try:
                future.result()
            except (ApkModalError, OSError) as exc:
                log.error("%s: %s", apk, exc)
                failed += 1

    print(f"extract-text: {len(apks) - failed} ok, {failed} failed")
    return EXIT_PARTIAL if failed else EXIT_OK


# -- dataset ---------------------------------------------------------------------

def cmd_dataset(args: argparse.Namespace) -> int:
    try:
        fractions = tuple(float(f) for f in args.fractions.split(","))
        spec = ImageSpec(ColorMode(args.color_mode), int(args.resolution))
        manifest = dataset.build_manifest(
            image_dir=args.images,
            text_dir=args.texts,
            labels_path=args.labels,
            spec=spec,
            seed=args.seed,
            fractions=fractions,  # type: ignore[arg-type]
        )
        manifest = dataset.assign_splits(manifest)
    except (DatasetError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    dataset.save_manifest(manifest, args.out)
    print(f"dataset: {len(manifest.records)} records -> {args.out}")
    print(json.dumps(manifest.counts(), indent=2))
    return EXIT_OK


# -- baseline train / predict ------------------------------------------------------

def _features_for_split(
    manifest: dataset.DatasetManifest, split: dataset.Split, pool_side: int
) -> tuple[np.ndarray, np.ndarray, list[dataset.DatasetRecord]]:
    records = [r for r in manifest.records if r.split is split]
    rows = []
    for record in records:
        pixels = png.read_png(record.image_path).astype(np.float64)
        if pixels.ndim == 3:
            pixels = pixels.mean(axis=2)
        rows.append(baseline.pool_pixels(pixels, pool_side))
    features = np.array(rows) if rows else np.empty((0, pool_side * pool_side))
    targets = np.array([1.0 if r.label is Label.MALWARE else 0.0 for r in records])
    return features, targets, records


def cmd_train_baseline(args: argparse.Namespace) -> int:
    try:
        manifest = dataset.load_manifest(args.manifest)
    except (ApkModalError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    config = baseline.TrainConfig(
        learning_rate=args.learning_rate,
        epochs=args.epochs,
        l2=args.l2,
        seed=args.seed,
        batch_size=args.batch_size,
        patience=args.patience,
    )
    x_train, y_train, _ = _features_for_split(manifest, dataset.Split.TRAIN, args.pool_side)
    x_val, y_val, _ = _features_for_split(manifest, dataset.Split.VAL, args.pool_side)
    if not len(x_train):
        print("error: manifest has no train split", file=sys.stderr)
        return EXIT_USAGE
    try:
        model = baseline.train(
            x_train,
            y_train,
            config,
            val_features=x_val if len(x_val) else None,
            val_targets=y_val if len(y_val) else None,
            pool_side=args.pool_side,
        )
    except ApkModalError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    baseline.save_model(model, args.out)
    print(f"train-baseline: {len(x_train)} train / {len(x_val)} val samples, model -> {args.out}")
    return EXIT_OK


def cmd_predict(args: argparse.Namespace) -> int:
    try:
        model = baseline.load_model(args.model)
        manifest = dataset.load_manifest(args.manifest)
    except (ApkModalError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    split = dataset.Split(args.split)
    features, _, records = _features_for_split(manifest, split, model.pool_side)
    if not len(features):
        print(f"error: manifest has no {split.value} split", file=sys.stderr)
        return EXIT_USAGE
    labels, scores = baseline.predict_batch(model, features)
    predictions = [
        metrics.PredictionRecord(
            sample_id=record.sample_id,
            true_label=record.label,
            predicted_label=label,
            score_malware=float(score),
        )
        for record, label, score in zip(records, labels, scores)
    ]
    metrics.write_predictions(predictions, args.out)
    print(f"predict: {len(predictions)} {split.value} predictions -> {args.out}")
    return EXIT_OK


# -- evaluate --------------------------------------------------------------------

def cmd_evaluate(args: argparse.Namespace) -> int:
    try:
        predictions = metrics.read_predictions(args.predictions)
        rep = metrics.report(predictions)
    except (ApkModalError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    print(metrics.render_table(rep))
    if args.json:
        Path(args.json).write_text(
            json.dumps(metrics.report_to_dict(rep), indent=2) + "\n", encoding="utf-8"
        )
        print(f"report -> {args.json}")
    return EXIT_OK


# -- parser ----------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="apkmodal",
        description="Convert APK corpora to bytecode images and text evidence, "
        "build dataset manifests, train/score the baseline classifier.",
    )
    parser.add_argument("--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("convert", help="render APKs as PNG images")
    p.add_argument("--input", nargs="+", required=True, help="APK files or directories")
    p.add_argument("--out", required=True, help="output directory for PNGs and index.jsonl")
    _add_spec_flags(p)
    p.add_argument("--source", choices=["dex", "whole"], default="dex",
                   help="bytes to render: concatenated classes*.dex or the whole file")
    p.add_argument("--jobs", type=int, default=1, help="parallel workers (default: 1)")
    p.set_defaults(func=cmd_convert)

    p = sub.add_parser("extract-text", help="extract evidence, prompts, and annotations")
    p.add_argument("--input", nargs="+", required=True)
    p.add_argument("--out", required=True)
    _add_spec_flags(p)
    p.add_argument("--labels", help="sample_id,label CSV used to pick the annotation prompt")
    p.add_argument("--min-string-len", type=int, default=4)
    p.add_argument("--max-tokens", type=int, default=3500)
    p.add_argument("--stub-dir", help="stub corpus directory (ANNOTATOR_MODE=stub)")
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_extract_text)

    p = sub.add_parser("dataset", help="pair images/texts/labels into a split manifest")
    p.add_argument("--images", required=True)
    p.add_argument("--texts", default=None)
    p.add_argument("--labels", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--color-mode", choices=["grayscale", "rgb"], default="grayscale")
    p.add_argument("--resolution", choices=["128", "256", "512"], default="128")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--fractions", default="0.8,0.1,0.1", help="train,val,test (default 0.8,0.1,0.1)")
    p.set_defaults(func=cmd_dataset)

    p = sub.add_parser("train-baseline", help="train the built-in logistic classifier")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True, help="model file path")
    p.add_argument("--pool-side", type=int, default=baseline.DEFAULT_POOL_SIDE)
    p.add_argument("--learning-rate", type=float, default=0.1)
    p.add_argument("--epochs", type=int, default=300,
                   help="gradient-descent epochs (default 300; small corpora need the runway)")
    p.add_argument("--l2", type=float, default=1e-4)
    p.add_argument("--batch-size", type=int, default=32)
    p.add_argument("--patience", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_train_baseline)

    p = sub.add_parser("predict", help="score a manifest split with a trained model")
    p.add_argument("--model", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--split", choices=["train", "val", "test"], default="test")
    p.add_argument("--out", required=True, help="predictions CSV path")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("evaluate", help="score a predictions file")
    p.add_argument("--predictions", required=True)
    p.add_argument("--json", help="also write the machine-readable report here")
    p.set_defaults(func=cmd_evaluate)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    return args.func(args)


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
