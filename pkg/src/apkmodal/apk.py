"""Read an APK as a ZIP archive and expose its entries as byte sequences.

The view is built from the central directory only, so opening an archive
never decompresses anything. Duplicate entry names (a known obfuscation
trick) are resolved by keeping the last central-directory occurrence,
which is what the Android runtime itself loads; a warning is logged for
each shadowed entry.
"""

from __future__ import annotations

import logging
import os
import re
import zipfile
import zlib
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

from .errors import (
    ChecksumMismatch,
    EntryNotFound,
    NoDexFound,
    NotAZip,
    TruncatedArchive,
    UnsupportedCompressionMethod,
)

log = logging.getLogger(__name__)

_SUPPORTED_METHODS = (zipfile.ZIP_STORED, zipfile.ZIP_DEFLATED)
_DEX_NAME = re.compile(r"^classes(\d*)\.dex$")


class SourceMode(str, Enum):
    """Which bytes feed the image stage: concatenated DEX code or the raw file."""

    DEX_ONLY = "dex"
    WHOLE_FILE = "whole"


@dataclass(frozen=True)
class ApkEntry:
    """Central-directory metadata for one archive member. Payload is read lazily."""

    name: str
    compressed_size: int
    uncompressed_size: int
    crc32: int
    compression_method: int


@dataclass
class ApkArchive:
    """Immutable read-only view of an APK. Safe to share across workers."""

    source_path: Path
    entries: list[ApkEntry]
    total_size: int
    _zip: zipfile.ZipFile = field(repr=False)
    _infos: dict[str, zipfile.ZipInfo] = field(repr=False)

    def __contains__(self, name: str) -> bool:
        return name in self._infos

    def names(self) -> list[str]:
        return [e.name for e in self.entries]

    def read(self, name: str) -> bytes:
        return read_entry(self, name)

    def close(self) -> None:
        self._zip.close()

    def __enter__(self) -> "ApkArchive":
        return self

    def __exit__(self, *exc) -> None:
        self.close()


def open_apk(path: str | os.PathLike) -> ApkArchive:
    """Open an APK and enumerate its central directory without decompressing.

    Raises NotAZip when the end-of-central-directory record is missing,
    TruncatedArchive when the ZIP structure is present but inconsistent,
    and OSError for plain I/O failures.
    """
    path = Path(path)
    total_size = path.stat().st_size
    try:
        zf = zipfile.ZipFile(path, "r")
    except zipfile.BadZipFile as exc:
        if "not a zip file" in str(exc).lower():
            raise NotAZip(f"{path}: no end-of-central-directory record") from exc
        raise TruncatedArchive(f"{path}: {exc}") from exc
    except (EOFError, OSError) as exc:
        if isinstance(exc, OSError) and exc.errno is not None:
            raise
        raise TruncatedArchive(f"{path}: {exc}") from exc

    infos: dict[str, zipfile.ZipInfo] = {}
    for info in zf.infolist():
        if info.filename in infos:
            log.warning("%s: duplicate entry %r, keeping last occurrence", path, info.filename)
        infos[info.filename] = info

    entries = [
        ApkEntry(
            name=info.filename,
            compressed_size=info.compress_size,
            uncompressed_size=info.file_size,
            crc32=info.CRC,
            compression_method=info.compress_type,
        )
        for info in infos.values()
    ]
    return ApkArchive(
        source_path=path,
        entries=entries,
        total_size=total_size,
        _zip=zf,
        _infos=infos,
    )


def read_entry(archive: ApkArchive, name: str) -> bytes:
    """Fully decompress one entry, verifying size and CRC-32."""
    info = archive._infos.get(name)
    if info is None:
        raise EntryNotFound(f"no entry named {name!r} in {archive.source_path}")
    if info.compress_type not in _SUPPORTED_METHODS:
        raise UnsupportedCompressionMethod(
            f"{name!r} uses compression method {info.compress_type}; only stored and deflate are supported"
        )
    try:
        data = archive._zip.read(info)
    except zipfile.BadZipFile as exc:
        # zipfile reports a failed CRC check as BadZipFile
        raise ChecksumMismatch(f"{name!r}: {exc}") from exc
    except zlib.error as exc:
        # a deflate stream that no longer decompresses is payload corruption
        raise ChecksumMismatch(f"{name!r}: {exc}") from exc
    except EOFError as exc:
        raise TruncatedArchive(f"{name!r}: {exc}") from exc
    if len(data) != info.file_size:
        raise ChecksumMismatch(
            f"{name!r}: decompressed to {len(data)} bytes, central directory says {info.file_size}"
        )
    return data


def dex_entry_names(archive: ApkArchive) -> list[str]:
    """Names of classes*.dex entries in ascending numeric order."""
    found: list[tuple[int, str]] = []
    for entry in archive.entries:
        m = _DEX_NAME.match(entry.name)
        if m:
            found.append((int(m.group(1) or "1"), entry.name))
    found.sort()
    return [name for _, name in found]


def collect_code_bytes(archive: ApkArchive, source: SourceMode = SourceMode.DEX_ONLY) -> bytes:
    """Gather the byte sequence the image stage will render.

    DEX_ONLY concatenates classes.dex, classes2.dex, ... in numeric order
    (invariant to on-disk entry order); WHOLE_FILE returns the unmodified
    on-disk APK bytes.
    """
    if source is SourceMode.WHOLE_FILE:
        return archive.source_path.read_bytes()
    names = dex_entry_names(archive)
    if not names:
        raise NoDexFound(f"{archive.source_path}: no classes*.dex entries")
    return b"".join(read_entry(archive, name) for name in names)
