"""Fine-tune one CNN backbone on a dataset manifest.

Images load from the manifest's PNG paths; grayscale inputs are
replicated to three channels so RGB-native backbones accept them. The
loop selects the best-validation-loss epoch and writes test-split
predictions (malware probability from the softmax head) in the
interchange CSV format.
"""

from __future__ import annotations

import logging
from pathlib import Path

import numpy as np
import torch
import torch.nn.functional as F
from PIL import Image
from torch.utils.data import DataLoader, Dataset

from .errors import ManifestInvalid, ResourceExhausted
from .manifest import Prediction, Sample, load_samples, split_samples, write_predictions
from .protocol import TrainProtocol

log = logging.getLogger(__name__)

_LABEL_INDEX = {"benign": 0, "malware": 1}


class ManifestImages(Dataset):
    def __init__(self, samples: list[Sample], image_size: int | None):
        self.samples = samples
        self.image_size = image_size

    def __len__(self) -> int:
        return len(self.samples)

    def __getitem__(self, index: int):
        sample = self.samples[index]
        with Image.open(sample.image_path) as im:
            if self.image_size and im.size != (self.image_size, self.image_size):
                im = im.resize((self.image_size, self.image_size), Image.BILINEAR)
            array = np.asarray(im, dtype=np.float32) / 255.0
        if array.ndim == 2:  # grayscale -> replicate across channels
            array = np.repeat(array[:, :, None], 3, axis=2)
        tensor = torch.from_numpy(array.transpose(2, 0, 1))
        tensor = (tensor - 0.5) / 0.5
        return tensor, _LABEL_INDEX[sample.label], index


def build_model(architecture: str, pretrained: bool) -> torch.nn.Module:
    import torchvision.models as tvm

    builders = {
        "vgg16": tvm.vgg16,
        "vgg19": tvm.vgg19,
        "resnet50": tvm.resnet50,
        "resnet101": tvm.resnet101,
        "resnet152": tvm.resnet152,
        "mobilenet_v2": tvm.mobilenet_v2,
        "densenet169": tvm.densenet169,
        "efficientnet_b4": tvm.efficientnet_b4,
    }
    builder = builders[architecture]
    if not pretrained:
        return builder(weights=None, num_classes=2)
    # pretrained heads are class-1000; swap the classifier for two classes
    from .errors import ModelUnavailable

    try:
        model = builder(weights="DEFAULT")
    except Exception as exc:  # weight download/load failure
        raise ModelUnavailable(f"{architecture}: pretrained weights unavailable ({exc})") from exc
    _replace_head(model, architecture)
    return model


def _replace_head(model: torch.nn.Module, architecture: str) -> None:
    if architecture.startswith("vgg"):
        model.classifier[-1] = torch.nn.Linear(model.classifier[-1].in_features, 2)
    elif architecture.startswith("resnet"):
        model.fc = torch.nn.Linear(model.fc.in_features, 2)
    elif architecture == "densenet169":
        model.classifier = torch.nn.Linear(model.classifier.in_features, 2)
    else:  # mobilenet_v2, efficientnet_b4
        model.classifier[-1] = torch.nn.Linear(model.classifier[-1].in_features, 2)


def _epoch_loss(model: torch.nn.Module, loader: DataLoader) -> float:
    model.eval()
    total = 0.0
    count = 0
    with torch.no_grad():
        for x, y, _ in loader:
            logits = model(x)
            total += float(F.cross_entropy(logits, y, reduction="sum"))
            count += len(y)
    return total / max(count, 1)


def finetune(
    manifest_path: str | Path,
    protocol: TrainProtocol,
    out_path: str | Path,
    checkpoint_path: str | Path | None = None,
) -> list[Prediction]:
    """Train per the protocol and write test-split predictions.

    Returns the prediction records. A checkpoint of the best epoch is
    saved when checkpoint_path is given.
    """
    samples = load_samples(manifest_path)
    parts = split_samples(samples)
    train = parts.get("train", [])
    val = parts.get("val", [])
    test = parts.get("test", [])
    if not train or not val:
        raise ManifestInvalid(
            f"{manifest_path}: need non-empty train and val splits "
            f"(got {len(train)} train, {len(val)} val)"
        )

    torch.manual_seed(protocol.seed)
    size = protocol.image_size
    loaders = {
        "train": DataLoader(ManifestImages(train, size), batch_size=protocol.batch_size, shuffle=True),
        "val": DataLoader(ManifestImages(val, size), batch_size=protocol.batch_size),
        "test": DataLoader(ManifestImages(test, size), batch_size=protocol.batch_size),
    }

    try:
        model = build_model(protocol.architecture, protocol.pretrained)
        optimizer = torch.optim.Adam(model.parameters(), lr=protocol.learning_rate)

        best_state = {k: v.detach().clone() for k, v in model.state_dict().items()}
        best_loss = _epoch_loss(model, loaders["val"])
        bad_epochs = 0
        for epoch in range(protocol.max_epochs):
            model.train()
            for x, y, _ in loaders["train"]:
                optimizer.zero_grad()
                loss = F.cross_entropy(model(x), y)
                loss.backward()
                optimizer.step()
            val_loss = _epoch_loss(model, loaders["val"])
            log.info("%s epoch %d: val loss %.4f", protocol.architecture, epoch + 1, val_loss)
            if val_loss < best_loss:
                best_loss = val_loss
                best_state = {k: v.detach().clone() for k, v in model.state_dict().items()}
                bad_epochs = 0
            else:
                bad_epochs += 1
                if bad_epochs >= protocol.early_stop_patience:
                    log.info("early stop after epoch %d", epoch + 1)
                    break

        model.load_state_dict(best_state)
        if checkpoint_path is not None:
            torch.save(
                {"architecture": protocol.architecture, "state_dict": best_state},
                checkpoint_path,
            )

        predictions = []
        model.eval()
        with torch.no_grad():
            for x, _, idx in loaders["test"]:
                probs = F.softmax(model(x), dim=1)
                for row, sample_idx in zip(probs, idx):
                    sample = test[int(sample_idx)]
                    p_malware = float(row[1])
                    predictions.append(
                        Prediction(
                            sample_id=sample.sample_id,
                            true_label=sample.label,
                            predicted_label="malware" if p_malware >= 0.5 else "benign",
                            score_malware=p_malware,
                        )
                    )
    except torch.cuda.OutOfMemoryError as exc:
        raise ResourceExhausted(str(exc)) from exc
    except RuntimeError as exc:
        if "out of memory" in str(exc).lower():
            raise ResourceExhausted(str(exc)) from exc
        raise

    predictions.sort(key=lambda p: p.sample_id)
    write_predictions(predictions, out_path)
    return predictions
