"""Harness error types."""


class HarnessError(Exception):
    pass


class ManifestInvalid(HarnessError):
    """Manifest missing, malformed, or lacking the splits a run needs."""


class ResourceExhausted(HarnessError):
    """Training ran out of memory or another hard resource limit."""


class ModelUnavailable(HarnessError):
    """A required pretrained model could not be loaded."""


class PairMismatch(HarnessError):
    """An image/text pair is incomplete on disk."""
