"""Shared fixtures: APK builders and a synthetic labeled corpus.

Normal fixtures are written with the standard-library ZIP writer; the
corrupt and duplicate-entry cases are crafted byte-by-byte so the reader
under test is exercised against independently constructed archives.
"""

from __future__ import annotations

import struct
import zipfile
import zlib
from pathlib import Path

import pytest

from axml_encoder import encode, manifest_elem


def write_zip(path: Path, entries: dict[str, bytes], compress: bool = True) -> Path:
    method = zipfile.ZIP_DEFLATED if compress else zipfile.ZIP_STORED
    with zipfile.ZipFile(path, "w", method) as zf:
        for name, data in entries.items():
            zf.writestr(name, data)
    return path


def raw_zip(entries: list[tuple[str, bytes, int]], corrupt_payload_of: str | None = None) -> bytes:
    """Hand-assembled ZIP: local headers, optional payload corruption, central
    directory, EOCD. Entry method 0=stored, 8=deflate, others pass through."""
    blob = b""
    central = b""
    for name, data, method in entries:
        raw_name = name.encode("utf-8")
        crc = zlib.crc32(data) & 0xFFFFFFFF
        if method == 8:
            compressor = zlib.compressobj(9, zlib.DEFLATED, -15)
            payload = compressor.compress(data) + compressor.flush()
        else:
            payload = data
        if corrupt_payload_of == name:
            payload = bytes([payload[0] ^ 0xFF]) + payload[1:]
        offset = len(blob)
        local = struct.pack(
            "<IHHHHHIIIHH", 0x04034B50, 20, 0, method, 0, 0, crc, len(payload), len(data),
            len(raw_name), 0,
        )
        blob += local + raw_name + payload
        central += struct.pack(
            "<IHHHHHHIIIHHHHHII", 0x02014B50, 20, 20, 0, method, 0, 0, crc, len(payload),
            len(data), len(raw_name), 0, 0, 0, 0, 0, offset,
        ) + raw_name
    eocd = struct.pack(
        "<IHHHHIIH", 0x06054B50, 0, 0, len(entries), len(entries), len(central), len(blob), 0
    )
    return blob + central + eocd


SEND_SMS = "android.permission.SEND_SMS"
READ_CONTACTS = "android.permission.READ_CONTACTS"


def malware_manifest_bytes(utf8: bool = True) -> bytes:
    return encode(manifest_elem("com.example.sample", [SEND_SMS, READ_CONTACTS]), utf8=utf8)


@pytest.fixture
def fixture_apk(tmp_path: Path) -> Path:
    """APK with two dex files, a binary manifest, and a resource entry."""
    dex1 = bytes(range(100))
    dex2 = bytes(range(50, 100))
    return write_zip(
        tmp_path / "fixture.apk",
        {
            "classes.dex": dex1,
            "classes2.dex": dex2,
            "AndroidManifest.xml": malware_manifest_bytes(),
            "res/values/strings.txt": b"hello http://evil.example/c2 world",
        },
    )


@pytest.fixture
def empty_zip(tmp_path: Path) -> Path:
    path = tmp_path / "empty.apk"
    with zipfile.ZipFile(path, "w"):
        pass
    return path


def make_corpus_apk(path: Path, bright: bool, seed: int, size: int = 4096) -> Path:
    """Synthetic separable sample: dark byte values vs bright byte values."""
    from apkmodal.rng import SplitMix64

    rng = SplitMix64(seed)
    lo, hi = (160, 250) if bright else (5, 95)
    body = bytes(lo + rng.next_below(hi - lo) for _ in range(size))
    return write_zip(
        path,
        {
            "classes.dex": body,
            "AndroidManifest.xml": malware_manifest_bytes() if bright else encode(
                manifest_elem("org.example.benign", ["android.permission.INTERNET"])
            ),
        },
    )


@pytest.fixture
def synthetic_corpus(tmp_path: Path):
    """20 APKs: 10 dark (benign) and 10 bright (malware), with a labels CSV."""
    import hashlib

    apk_dir = tmp_path / "apks"
    apk_dir.mkdir()
    rows = ["sample_id,label"]
    for i in range(10):
        for bright, label in ((False, "benign"), (True, "malware")):
            name = f"{label}_{i}.apk"
            path = make_corpus_apk(apk_dir / name, bright=bright, seed=1000 * i + bright)
            sha = hashlib.sha256(path.read_bytes()).hexdigest()
            rows.append(f"{sha},{label}")
    labels_csv = tmp_path / "labels.csv"
    labels_csv.write_text("\n".join(rows) + "\n", encoding="utf-8")
    return apk_dir, labels_csv
