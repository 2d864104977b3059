"""Training protocol: the eight benchmark architectures and their settings.

The defaults (batch 32, at most 20 epochs, early-stopping patience 5,
Adam) are the reference protocol the experiments standardize on; the
test suite asserts them as constants.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

ARCHITECTURES = (
    "vgg16",
    "vgg19",
    "resnet50",
    "resnet101",
    "resnet152",
    "mobilenet_v2",
    "densenet169",
    "efficientnet_b4",
)

DEFAULT_BATCH_SIZE = 32
DEFAULT_MAX_EPOCHS = 20
DEFAULT_PATIENCE = 5
DEFAULT_OPTIMIZER = "adam"


@dataclass(frozen=True)
class TrainProtocol:
    architecture: str
    batch_size: int = DEFAULT_BATCH_SIZE
    max_epochs: int = DEFAULT_MAX_EPOCHS
    early_stop_patience: int = DEFAULT_PATIENCE
    optimizer: str = DEFAULT_OPTIMIZER
    learning_rate: float = 1e-4
    image_size: int | None = None  # None: native manifest resolution
    pretrained: bool = False
    seed: int = 0

    def __post_init__(self):
        if self.architecture not in ARCHITECTURES:
            raise ValueError(
                f"unknown architecture {self.architecture!r}; expected one of {ARCHITECTURES}"
            )
        if self.optimizer != "adam":
            raise ValueError(f"protocol optimizer is adam, got {self.optimizer!r}")

    def tiny(self) -> "TrainProtocol":
        """Desk-scale smoke configuration: one epoch, small inputs."""
        return replace(self, max_epochs=1, image_size=self.image_size or 64)
