"""Exception types raised across the pipeline, grouped by stage."""


class ApkModalError(Exception):
    """Base class for every error this package raises on purpose."""


# APK container

class ApkContainerError(ApkModalError):
    pass


class NotAZip(ApkContainerError):
    """File has no end-of-central-directory record."""


class TruncatedArchive(ApkContainerError):
    """ZIP structure present but cut short or internally inconsistent."""


class EntryNotFound(ApkContainerError):
    pass


class ChecksumMismatch(ApkContainerError):
    """Entry payload does not match its stored CRC-32 or size."""


class UnsupportedCompressionMethod(ApkContainerError):
    """Entry uses a compression method other than stored or deflate."""


class NoDexFound(ApkContainerError):
    pass


# Binary XML decoding

class AxmlError(ApkModalError):
    pass


class NotAxml(AxmlError):
    """Input is neither binary XML nor parseable text XML."""


class TruncatedChunk(AxmlError):
    pass


class StringIndexOutOfRange(AxmlError):
    pass


class MalformedAttribute(AxmlError):
    pass


# Byte-to-image conversion

class EmptyInput(ApkModalError):
    pass


# Annotation client

class AnnotatorError(ApkModalError):
    pass


class EndpointUnreachable(AnnotatorError):
    """Endpoint failed after the configured number of retries."""


class MalformedResponse(AnnotatorError):
    pass


class StubMiss(AnnotatorError):
    """Stub corpus has no canned response for this prompt digest."""


# Dataset assembly

class DatasetError(ApkModalError):
    pass


class UnlabeledSample(DatasetError):
    pass


class DuplicateSampleId(DatasetError):
    pass


class MissingImage(DatasetError):
    pass


class EmptyManifest(DatasetError):
    pass


# Metrics

class MetricsError(ApkModalError):
    pass


class EmptyPredictions(MetricsError):
    pass


class SingleClassOnly(MetricsError):
    """ROC-AUC needs at least one positive and one negative."""


class MissingScores(MetricsError):
    pass


# Baseline classifier

class BaselineError(ApkModalError):
    pass


class SingleClassTrainingSet(BaselineError):
    pass


class NonFiniteLoss(BaselineError):
    pass


class DimensionMismatch(BaselineError):
    pass
