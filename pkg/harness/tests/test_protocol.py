"""Protocol constants and manifest interchange parsing."""

import pytest

from train_harness.errors import ManifestInvalid
from train_harness.manifest import load_samples, split_samples
from train_harness.protocol import ARCHITECTURES, TrainProtocol


def test_protocol_defaults_are_the_reference_values():
    protocol = TrainProtocol(architecture="resnet50")
    assert protocol.batch_size == 32
    assert protocol.max_epochs == 20
    assert protocol.early_stop_patience == 5
    assert protocol.optimizer == "adam"


def test_eight_architectures():
    assert ARCHITECTURES == (
        "vgg16",
        "vgg19",
        "resnet50",
        "resnet101",
        "resnet152",
        "mobilenet_v2",
        "densenet169",
        "efficientnet_b4",
    )


def test_unknown_architecture_rejected():
    with pytest.raises(ValueError):
        TrainProtocol(architecture="alexnet")


def test_optimizer_pinned_to_adam():
    with pytest.raises(ValueError):
        TrainProtocol(architecture="vgg16", optimizer="sgd")


def test_tiny_mode_caps_epochs():
    tiny = TrainProtocol(architecture="vgg16").tiny()
    assert tiny.max_epochs == 1
    assert tiny.image_size == 64


def test_manifest_loads_and_splits(tiny_manifest):
    samples = load_samples(tiny_manifest)
    assert len(samples) == 20
    parts = split_samples(samples)
    assert {k: len(v) for k, v in parts.items()} == {"train": 12, "val": 4, "test": 4}
    assert all(s.label in ("benign", "malware") for s in samples)


def test_manifest_kind_checked(tmp_path):
    bad = tmp_path / "bad.jsonl"
    bad.write_text('{"kind":"something-else"}\n', encoding="utf-8")
    with pytest.raises(ManifestInvalid):
        load_samples(bad)


def test_missing_manifest(tmp_path):
    with pytest.raises(ManifestInvalid):
        load_samples(tmp_path / "nope.jsonl")
