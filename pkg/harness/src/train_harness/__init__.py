"""train_harness: CNN fine-tuning and zero-shot runs over dataset manifests."""

from .errors import HarnessError, ManifestInvalid, ModelUnavailable, PairMismatch, ResourceExhausted
from .finetune import finetune
from .manifest import Prediction, Sample, load_samples, write_predictions
from .protocol import ARCHITECTURES, TrainProtocol
from .zeroshot import ZeroShotPair, ZeroShotRun, pairs_from_manifest, zero_shot_classify

__version__ = "0.1.0"

__all__ = [
    "ARCHITECTURES",
    "HarnessError",
    "ManifestInvalid",
    "ModelUnavailable",
    "PairMismatch",
    "Prediction",
    "ResourceExhausted",
    "Sample",
    "TrainProtocol",
    "ZeroShotPair",
    "ZeroShotRun",
    "finetune",
    "load_samples",
    "pairs_from_manifest",
    "write_predictions",
    "zero_shot_classify",
]
