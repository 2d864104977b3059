"""Harness CLI surface."""

import csv

from train_harness.cli import main


def test_cli_finetune_tiny(tiny_manifest, tmp_path):
    out = tmp_path / "preds.csv"
    code = main([
        "finetune", "--manifest", str(tiny_manifest), "--arch", "mobilenet_v2",
        "--out", str(out), "--tiny", "--seed", "2",
    ])
    assert code == 0
    with open(out, newline="", encoding="utf-8") as handle:
        rows = list(csv.reader(handle))
    assert len(rows) == 5  # header + 4 test samples


def test_cli_zeroshot_default_texts(paired_manifest, tmp_path):
    out = tmp_path / "zs.csv"
    code = main(["zeroshot", "--manifest", str(paired_manifest), "--out", str(out)])
    assert code == 0
    assert out.is_file()


def test_cli_zeroshot_explicit_texts(paired_manifest, tmp_path):
    out = tmp_path / "zs2.csv"
    code = main([
        "zeroshot", "--manifest", str(paired_manifest), "--out", str(out),
        "--benign-text", "an ordinary well-behaved application",
        "--malware-text", "sends premium sms and exfiltrates contacts",
    ])
    assert code == 0


def test_cli_reports_manifest_errors(tmp_path):
    code = main([
        "finetune", "--manifest", str(tmp_path / "missing.jsonl"),
        "--arch", "vgg16", "--out", str(tmp_path / "o.csv"), "--tiny",
    ])
    assert code == 1
