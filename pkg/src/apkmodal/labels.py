"""Binary class labels shared by the dataset, metrics, and classifier stages."""

from enum import Enum


class Label(str, Enum):
    BENIGN = "benign"
    MALWARE = "malware"

    @classmethod
    def parse(cls, text: str) -> "Label":
        try:
            return cls(text.strip().lower())
        except ValueError:
            raise ValueError(f"unknown label {text!r}; expected 'benign' or 'malware'") from None
