"""Reference Android binary XML encoder used to build golden fixtures.

Written directly from the chunk layout (document header, string pool,
namespace records, element records with 20-byte attribute entries) and
kept independent of the decoder under test: its own constants, its own
serialization. Supports both UTF-8 and UTF-16 string pools.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

DOC_TYPE = 0x0003
POOL_TYPE = 0x0001
START_NS = 0x0100
END_NS = 0x0101
START_EL = 0x0102
END_EL = 0x0103

POOL_UTF8_FLAG = 1 << 8

VT_REFERENCE = 0x01
VT_STRING = 0x03
VT_INT_DEC = 0x10
VT_INT_HEX = 0x11
VT_BOOL = 0x12

NO_INDEX = 0xFFFFFFFF

ANDROID_URI = "http://schemas.android.com/apk/res/android"


@dataclass
class Elem:
    """Element spec: attrs are (ns_uri_or_None, name, value); values may be
    str, bool, int, ('ref', n) or ('hex', n)."""

    tag: str
    attrs: list[tuple] = field(default_factory=list)
    children: list["Elem"] = field(default_factory=list)


class _Pool:
    def __init__(self):
        self.strings: list[str] = []
        self.index: dict[str, int] = {}

    def add(self, text: str) -> int:
        if text not in self.index:
            self.index[text] = len(self.strings)
            self.strings.append(text)
        return self.index[text]


def _collect_strings(pool: _Pool, element: Elem) -> None:
    for ns, name, value in element.attrs:
        if ns:
            pool.add(ns)
        pool.add(name)
        if isinstance(value, str):
            pool.add(value)
    pool.add(element.tag)
    for child in element.children:
        _collect_strings(pool, child)


def _len16(n: int) -> bytes:
    if n > 0x7FFF:
        return struct.pack("<HH", 0x8000 | (n >> 16), n & 0xFFFF)
    return struct.pack("<H", n)


def _len8(n: int) -> bytes:
    if n > 0x7F:
        return struct.pack("<BB", 0x80 | (n >> 8), n & 0xFF)
    return struct.pack("<B", n)


def _pool_chunk(pool: _Pool, utf8: bool) -> bytes:
    blobs = []
    for text in pool.strings:
        if utf8:
            encoded = text.encode("utf-8")
            blobs.append(_len8(len(text)) + _len8(len(encoded)) + encoded + b"\x00")
        else:
            units = text.encode("utf-16-le")
            blobs.append(_len16(len(units) // 2) + units + b"\x00\x00")
    offsets = []
    at = 0
    for blob in blobs:
        offsets.append(at)
        at += len(blob)
    data = b"".join(blobs)
    if len(data) % 4:
        data += b"\x00" * (4 - len(data) % 4)

    header_size = 28
    strings_start = header_size + 4 * len(pool.strings)
    size = strings_start + len(data)
    flags = POOL_UTF8_FLAG if utf8 else 0
    header = struct.pack(
        "<HHIIIIII", POOL_TYPE, header_size, size, len(pool.strings), 0, flags, strings_start, 0
    )
    return header + struct.pack(f"<{len(offsets)}I", *offsets) + data


def _node_header(chunk_type: int, body: bytes, line: int = 1) -> bytes:
    size = 16 + len(body)
    return struct.pack("<HHIII", chunk_type, 16, size, line, NO_INDEX) + body


def _attr_value(value, pool: _Pool) -> tuple[int, int, int]:
    """(raw_index, data_type, data_word)"""
    if isinstance(value, str):
        idx = pool.index[value]
        return idx, VT_STRING, idx
    if isinstance(value, bool):
        return NO_INDEX, VT_BOOL, 0xFFFFFFFF if value else 0
    if isinstance(value, int):
        return NO_INDEX, VT_INT_DEC, value & 0xFFFFFFFF
    kind, word = value
    if kind == "ref":
        return NO_INDEX, VT_REFERENCE, word & 0xFFFFFFFF
    if kind == "hex":
        return NO_INDEX, VT_INT_HEX, word & 0xFFFFFFFF
    raise ValueError(f"unsupported attribute value {value!r}")


def _element_chunks(element: Elem, pool: _Pool) -> bytes:
    attr_records = b""
    for ns, name, value in element.attrs:
        ns_idx = pool.index[ns] if ns else NO_INDEX
        raw, data_type, word = _attr_value(value, pool)
        attr_records += struct.pack(
            "<IIIHBBI", ns_idx, pool.index[name], raw, 8, 0, data_type, word
        )
    start_body = struct.pack(
        "<IIHHHHHH",
        NO_INDEX,  # element namespace: manifests use unqualified tags
        pool.index[element.tag],
        20,  # attribute records start right after this struct
        20,  # attribute record size
        len(element.attrs),
        0,
        0,
        0,
    )
    out = _node_header(START_EL, start_body + attr_records)
    for child in element.children:
        out += _element_chunks(child, pool)
    out += _node_header(END_EL, struct.pack("<II", NO_INDEX, pool.index[element.tag]))
    return out


def encode(root: Elem, utf8: bool = True, android_prefix: str = "android") -> bytes:
    pool = _Pool()
    pool.add(android_prefix)
    pool.add(ANDROID_URI)
    _collect_strings(pool, root)

    body = _pool_chunk(pool, utf8)
    ns_body = struct.pack("<II", pool.index[android_prefix], pool.index[ANDROID_URI])
    body += _node_header(START_NS, ns_body)
    body += _element_chunks(root, pool)
    body += _node_header(END_NS, ns_body)

    return struct.pack("<HHI", DOC_TYPE, 8, 8 + len(body)) + body


def manifest_elem(package: str, permissions: list[str], extras: list[Elem] | None = None) -> Elem:
    """Convenience builder for a typical manifest document."""
    children = [
        Elem("uses-permission", attrs=[(ANDROID_URI, "name", perm)]) for perm in permissions
    ]
    if extras:
        children.extend(extras)
    return Elem("manifest", attrs=[(None, "package", package)], children=children)
