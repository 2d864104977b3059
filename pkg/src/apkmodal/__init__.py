"""apkmodal: APK corpora to bytecode images, text evidence, and scored datasets."""

from .apk import ApkArchive, ApkEntry, SourceMode, collect_code_bytes, open_apk, read_entry
from .axml import ManifestModel, decode_axml, extract_permissions
from .baseline import BaselineClassifier, LinearModel, TrainConfig, featurize, predict, train
from .dataset import (
    DatasetManifest,
    DatasetRecord,
    Split,
    assign_splits,
    build_manifest,
    load_manifest,
    save_manifest,
)
from .image import (
    ByteImage,
    ColorMode,
    ImageSpec,
    ResampleFilter,
    all_specs,
    apk_to_image,
    canvas_to_bytes,
    encode_canvas,
    resample,
)
from .labels import Label
from .metrics import (
    ConfusionMatrix,
    MetricsReport,
    PredictionRecord,
    confusion,
    read_predictions,
    report,
    roc_auc,
    write_predictions,
)
from .textfeat import (
    Annotation,
    AnnotatorConfig,
    PromptInstance,
    TextEvidence,
    annotate,
    build_prompt,
    extract_evidence,
)

__version__ = "0.1.0"

__all__ = [
    "ApkArchive",
    "ApkEntry",
    "Annotation",
    "AnnotatorConfig",
    "BaselineClassifier",
    "ByteImage",
    "ColorMode",
    "ConfusionMatrix",
    "DatasetManifest",
    "DatasetRecord",
    "ImageSpec",
    "Label",
    "LinearModel",
    "ManifestModel",
    "MetricsReport",
    "PredictionRecord",
    "PromptInstance",
    "ResampleFilter",
    "SourceMode",
    "Split",
    "TextEvidence",
    "TrainConfig",
    "all_specs",
    "annotate",
    "apk_to_image",
    "assign_splits",
    "build_manifest",
    "build_prompt",
    "canvas_to_bytes",
    "collect_code_bytes",
    "confusion",
    "decode_axml",
    "encode_canvas",
    "extract_evidence",
    "extract_permissions",
    "featurize",
    "load_manifest",
    "open_apk",
    "predict",
    "read_entry",
    "read_predictions",
    "report",
    "resample",
    "roc_auc",
    "save_manifest",
    "train",
    "write_predictions",
]
