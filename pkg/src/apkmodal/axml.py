"""Decode Android binary XML (AndroidManifest.xml) into a manifest model.

The binary format is a flat stream of size-prefixed chunks: a document
header, a string pool, an optional resource map, then namespace and
element records whose names and attribute values are indices into the
pool. Unknown chunk types are skipped by their declared size so vendor
extensions never abort a decode. Plain-text manifests (already unpacked
APKs, test fixtures) take a fallback path through a regular XML parser.
"""

from __future__ import annotations

import struct
import xml.etree.ElementTree as ET
from dataclasses import dataclass, field
from xml.sax.saxutils import quoteattr

from .errors import MalformedAttribute, NotAxml, StringIndexOutOfRange, TruncatedChunk

# chunk type codes
CHUNK_STRING_POOL = 0x0001
CHUNK_XML_DOCUMENT = 0x0003
CHUNK_START_NAMESPACE = 0x0100
CHUNK_END_NAMESPACE = 0x0101
CHUNK_START_ELEMENT = 0x0102
CHUNK_END_ELEMENT = 0x0103
CHUNK_CDATA = 0x0104
CHUNK_RESOURCE_MAP = 0x0180

# string pool flags
_SORTED_FLAG = 1 << 0
_UTF8_FLAG = 1 << 8

# typed attribute values (Res_value.dataType)
TYPE_NULL = 0x00
TYPE_REFERENCE = 0x01
TYPE_ATTRIBUTE = 0x02
TYPE_STRING = 0x03
TYPE_INT_DEC = 0x10
TYPE_INT_HEX = 0x11
TYPE_INT_BOOLEAN = 0x12

_NO_INDEX = 0xFFFFFFFF

ANDROID_NAMESPACE = "http://schemas.android.com/apk/res/android"

_COMPONENT_KINDS = ("activity", "service", "receiver", "provider")


@dataclass(frozen=True)
class AxmlChunk:
    """One size-prefixed chunk: type code, header span, and byte extent."""

    chunk_type: int
    header_size: int
    chunk_size: int
    offset: int


@dataclass
class StringPool:
    strings: list[str]
    utf8: bool
    sorted_flag: bool

    def get(self, index: int) -> str | None:
        if index == _NO_INDEX:
            return None
        if index >= len(self.strings):
            raise StringIndexOutOfRange(f"string index {index} >= pool size {len(self.strings)}")
        return self.strings[index]


@dataclass
class XmlAttribute:
    namespace: str | None  # namespace URI, not prefix
    name: str
    value: str


@dataclass
class XmlElement:
    tag: str
    namespace: str | None
    attributes: list[XmlAttribute] = field(default_factory=list)
    children: list["XmlElement"] = field(default_factory=list)
    ns_declarations: list[tuple[str, str]] = field(default_factory=list)  # (prefix, uri)

    def get_attr(self, name: str, namespace: str | None = None) -> str | None:
        for attr in self.attributes:
            if attr.name == name and (namespace is None or attr.namespace == namespace):
                return attr.value
        return None

    def iter(self):
        yield self
        for child in self.children:
            yield from child.iter()


@dataclass
class ManifestModel:
    """Structured view of a decoded AndroidManifest.xml."""

    package_name: str
    permissions: list[str]
    components: list[tuple[str, str]]  # (kind, name)
    intent_actions: list[str]
    raw_xml: str
    root: XmlElement | None


class _Reader:
    """Bounds-checked little-endian cursor; short reads raise TruncatedChunk."""

    def __init__(self, data: bytes, pos: int = 0, end: int | None = None):
        self.data = data
        self.pos = pos
        self.end = len(data) if end is None else end

    def _take(self, n: int) -> bytes:
        if self.pos + n > self.end:
            raise TruncatedChunk(f"need {n} bytes at offset {self.pos}, have {self.end - self.pos}")
        chunk = self.data[self.pos : self.pos + n]
        self.pos += n
        return chunk

    def u8(self) -> int:
        return self._take(1)[0]

    def u16(self) -> int:
        return struct.unpack("<H", self._take(2))[0]

    def u32(self) -> int:
        return struct.unpack("<I", self._take(4))[0]


def scan_chunks(data: bytes) -> list[AxmlChunk]:
    """Chunk table for a binary document: the outer chunk, then its children.

    Children must tile the document exactly; any overlap or gap raises.
    """
    reader = _Reader(data)
    chunk_type = reader.u16()
    header_size = reader.u16()
    chunk_size = reader.u32()
    if chunk_type != CHUNK_XML_DOCUMENT:
        raise NotAxml(f"document chunk type 0x{chunk_type:04x}, expected 0x0003")
    if header_size < 8 or header_size > chunk_size:
        raise TruncatedChunk(f"document header size {header_size} out of range")
    if chunk_size != len(data):
        raise TruncatedChunk(f"document chunk size {chunk_size} != input length {len(data)}")
    chunks = [AxmlChunk(chunk_type, header_size, chunk_size, 0)]
    pos = header_size
    while pos < len(data):
        sub = _Reader(data, pos)
        ctype = sub.u16()
        chsize = sub.u16()
        csize = sub.u32()
        if csize < 8 or chsize < 8 or chsize > csize:
            raise TruncatedChunk(f"chunk at {pos}: header {chsize}, size {csize}")
        if pos + csize > len(data):
            raise TruncatedChunk(f"chunk at {pos} runs past end of document")
        chunks.append(AxmlChunk(ctype, chsize, csize, pos))
        pos += csize
    return chunks


def _parse_string_pool(data: bytes, chunk: AxmlChunk) -> StringPool:
    reader = _Reader(data, chunk.offset + 8, chunk.offset + chunk.chunk_size)
    if chunk.header_size < 28:
        raise TruncatedChunk(f"string pool header {chunk.header_size} < 28")
    string_count = reader.u32()
    style_count = reader.u32()
    flags = reader.u32()
    strings_start = reader.u32()
    styles_start = reader.u32()
    utf8 = bool(flags & _UTF8_FLAG)

    offsets_at = chunk.offset + chunk.header_size
    if offsets_at + 4 * string_count > chunk.offset + chunk.chunk_size:
        raise TruncatedChunk(f"string pool offsets overflow chunk ({string_count} strings)")
    offsets = struct.unpack_from(f"<{string_count}I", data, offsets_at) if string_count else ()

    pool_start = chunk.offset + strings_start
    if style_count and styles_start:
        pool_end = chunk.offset + styles_start
    else:
        pool_end = chunk.offset + chunk.chunk_size
    if not (chunk.offset <= pool_start <= pool_end <= chunk.offset + chunk.chunk_size):
        raise TruncatedChunk("string data region outside pool chunk")

    strings = []
    for index, rel in enumerate(offsets):
        at = pool_start + rel
        if not (pool_start <= at < pool_end):
            raise StringIndexOutOfRange(f"string {index} offset {rel} outside pool payload")
        strings.append(_decode_pool_string(data, at, pool_end, utf8))
    return StringPool(strings=strings, utf8=utf8, sorted_flag=bool(flags & _SORTED_FLAG))


def _decode_pool_string(data: bytes, at: int, end: int, utf8: bool) -> str:
    # Unpaired surrogates and invalid byte sequences degrade to U+FFFD
    # instead of failing the whole decode; real manifests contain garbage.
    reader = _Reader(data, at, end)
    if utf8:
        char_len = reader.u8()
        if char_len & 0x80:
            char_len = ((char_len & 0x7F) << 8) | reader.u8()
        byte_len = reader.u8()
        if byte_len & 0x80:
            byte_len = ((byte_len & 0x7F) << 8) | reader.u8()
        return reader._take(byte_len).decode("utf-8", errors="replace")
    length = reader.u16()
    if length & 0x8000:
        length = ((length & 0x7FFF) << 16) | reader.u16()
    return reader._take(2 * length).decode("utf-16-le", errors="replace")


def _render_typed_value(data_type: int, data_word: int, raw_index: int, pool: StringPool) -> str:
    """Render a Res_value the way a manifest reader expects to see it.

    Only the types that actually occur in manifests get a friendly form;
    everything else falls back to a lossless hex literal.
    """
    if data_type == TYPE_STRING:
        text = pool.get(data_word if data_word != _NO_INDEX else raw_index)
        return text if text is not None else ""
    if data_type == TYPE_INT_BOOLEAN:
        return "true" if data_word else "false"
    if data_type == TYPE_INT_DEC:
        value = data_word - (1 << 32) if data_word >= (1 << 31) else data_word
        return str(value)
    if data_type == TYPE_INT_HEX:
        return f"0x{data_word:x}"
    if data_type == TYPE_REFERENCE:
        return f"@0x{data_word:08x}"
    if data_type == TYPE_NULL:
        return ""
    return f"0x{data_word:08x}"


def _parse_binary(data: bytes) -> XmlElement | None:
    chunks = scan_chunks(data)
    pool: StringPool | None = None
    ns_stack: list[tuple[str, str]] = []  # (prefix, uri)
    pending_ns: list[tuple[str, str]] = []
    element_stack: list[XmlElement] = []
    roots: list[XmlElement] = []

    def need_pool() -> StringPool:
        if pool is None:
            raise TruncatedChunk("element chunk before any string pool")
        return pool

    for chunk in chunks[1:]:
        body = _Reader(data, chunk.offset + chunk.header_size, chunk.offset + chunk.chunk_size)
        if chunk.chunk_type == CHUNK_STRING_POOL:
            if pool is None:
                pool = _parse_string_pool(data, chunk)
        elif chunk.chunk_type == CHUNK_START_NAMESPACE:
            prefix = need_pool().get(body.u32())
            uri = need_pool().get(body.u32())
            if uri is not None:
                ns_stack.append((prefix or "", uri))
                pending_ns.append((prefix or "", uri))
        elif chunk.chunk_type == CHUNK_END_NAMESPACE:
            if ns_stack:
                ns_stack.pop()
        elif chunk.chunk_type == CHUNK_START_ELEMENT:
            element = _parse_start_element(data, chunk, need_pool())
            element.ns_declarations = pending_ns
            pending_ns = []
            if element_stack:
                element_stack[-1].children.append(element)
            else:
                roots.append(element)
            element_stack.append(element)
        elif chunk.chunk_type == CHUNK_END_ELEMENT:
            if element_stack:
                element_stack.pop()
        # resource map, CDATA, and unknown chunk types are skipped

    return roots[0] if roots else None


def _parse_start_element(data: bytes, chunk: AxmlChunk, pool: StringPool) -> XmlElement:
    body = _Reader(data, chunk.offset + chunk.header_size, chunk.offset + chunk.chunk_size)
    ns_index = body.u32()
    name_index = body.u32()
    attr_start = body.u16()
    attr_size = body.u16()
    attr_count = body.u16()
    body.u16()  # id attribute index
    body.u16()  # class attribute index
    body.u16()  # style attribute index

    tag = pool.get(name_index)
    if tag is None:
        raise MalformedAttribute(f"element at {chunk.offset} has no name")
    namespace = pool.get(ns_index)

    if attr_size < 20:
        raise MalformedAttribute(f"attribute record size {attr_size} < 20")
    attrs_at = chunk.offset + chunk.header_size + attr_start
    if attrs_at + attr_count * attr_size > chunk.offset + chunk.chunk_size:
        raise TruncatedChunk(f"{attr_count} attributes overflow element chunk at {chunk.offset}")

    element = XmlElement(tag=tag, namespace=namespace)
    for i in range(attr_count):
        a = _Reader(data, attrs_at + i * attr_size, attrs_at + (i + 1) * attr_size)
        attr_ns = pool.get(a.u32())
        attr_name = pool.get(a.u32())
        raw_index = a.u32()
        value_size = a.u16()
        a.u8()  # res0, always zero
        data_type = a.u8()
        data_word = a.u32()
        if attr_name is None:
            raise MalformedAttribute(f"attribute {i} of <{tag}> has no name")
        if value_size < 8:
            raise MalformedAttribute(f"attribute {attr_name!r} typed value size {value_size} < 8")
        value = _render_typed_value(data_type, data_word, raw_index, pool)
        element.attributes.append(XmlAttribute(namespace=attr_ns, name=attr_name, value=value))
    return element


# -- plain-text fallback -----------------------------------------------------

def _parse_text(data: bytes) -> XmlElement | None:
    try:
        text = data.decode("utf-8", errors="replace")
        root = ET.fromstring(text)
    except (ET.ParseError, ValueError) as exc:
        raise NotAxml(f"text input is not well-formed XML: {exc}") from exc
    prefixes: dict[str, str] = {}  # uri -> prefix

    def assign_prefix(uri: str) -> str:
        if uri not in prefixes:
            prefixes[uri] = "android" if uri == ANDROID_NAMESPACE else f"ns{len(prefixes)}"
        return prefixes[uri]

    def convert(node: ET.Element) -> XmlElement:
        uri, tag = _split_clark(node.tag)
        element = XmlElement(tag=tag, namespace=uri)
        for key, value in node.attrib.items():
            attr_uri, attr_name = _split_clark(key)
            if attr_uri:
                assign_prefix(attr_uri)
            element.attributes.append(XmlAttribute(namespace=attr_uri, name=attr_name, value=value))
        for child in node:
            element.children.append(convert(child))
        return element

    converted = convert(root)
    converted.ns_declarations = [(prefix, uri) for uri, prefix in prefixes.items()]
    return converted


def _split_clark(name: str) -> tuple[str | None, str]:
    if name.startswith("{"):
        uri, _, local = name[1:].partition("}")
        return uri, local
    return None, name


# -- reconstruction and model ------------------------------------------------

def reconstruct_xml(root: XmlElement | None) -> str:
    """Deterministic textual XML: UTF-8, LF endings, two-space indent."""
    lines = ['<?xml version="1.0" encoding="utf-8"?>']
    if root is not None:
        _emit(root, 0, {}, lines)
    return "\n".join(lines) + "\n"


def _emit(element: XmlElement, depth: int, ns_prefixes: dict[str, str], lines: list[str]) -> None:
    scope = dict(ns_prefixes)
    parts = [element.tag if element.namespace is None else _qualify(element.namespace, element.tag, scope)]
    for prefix, uri in element.ns_declarations:
        scope[uri] = prefix
        parts.append(f'xmlns:{prefix}={quoteattr(uri)}' if prefix else f'xmlns={quoteattr(uri)}')
    for attr in element.attributes:
        name = attr.name if attr.namespace is None else _qualify(attr.namespace, attr.name, scope)
        parts.append(f"{name}={quoteattr(attr.value)}")
    indent = "  " * depth
    opening = " ".join(parts)
    if element.children:
        lines.append(f"{indent}<{opening}>")
        for child in element.children:
            _emit(child, depth + 1, scope, lines)
        closing = parts[0]
        lines.append(f"{indent}</{closing}>")
    else:
        lines.append(f"{indent}<{opening}/>")


def _qualify(uri: str, name: str, scope: dict[str, str]) -> str:
    prefix = scope.get(uri)
    if prefix is None:
        # undeclared namespace in a malformed document; fall back to the
        # conventional prefix for the android namespace, else drop it
        prefix = "android" if uri == ANDROID_NAMESPACE else None
    return f"{prefix}:{name}" if prefix else name


def _attr_named(element: XmlElement, name: str) -> str | None:
    value = element.get_attr(name, ANDROID_NAMESPACE)
    if value is None:
        value = element.get_attr(name)
    return value


def build_model(root: XmlElement | None) -> ManifestModel:
    package_name = ""
    permissions: list[str] = []
    seen_permissions: set[str] = set()
    components: list[tuple[str, str]] = []
    intent_actions: list[str] = []

    if root is not None:
        if root.tag == "manifest":
            package_name = root.get_attr("package") or ""
        for element in root.iter():
            if element.tag == "uses-permission":
                name = _attr_named(element, "name")
                if name and name not in seen_permissions:
                    seen_permissions.add(name)
                    permissions.append(name)
            elif element.tag in _COMPONENT_KINDS:
                name = _attr_named(element, "name")
                if name:
                    components.append((element.tag, name))
            elif element.tag == "action":
                name = _attr_named(element, "name")
                if name:
                    intent_actions.append(name)

    return ManifestModel(
        package_name=package_name,
        permissions=permissions,
        components=components,
        intent_actions=intent_actions,
        raw_xml=reconstruct_xml(root),
        root=root,
    )


def decode_axml(data: bytes) -> ManifestModel:
    """Decode binary XML bytes, or text XML as a fallback, into a ManifestModel."""
    if len(data) >= 2 and data[0] == 0x03 and data[1] == 0x00:
        return build_model(_parse_binary(data))
    head = data.lstrip(b"\xef\xbb\xbf \t\r\n")
    if head[:1] == b"<":
        return build_model(_parse_text(data))
    raise NotAxml("input is neither binary XML (0x0003) nor text XML")


def extract_permissions(model: ManifestModel) -> list[str]:
    """uses-permission names in document order, deduplicated."""
    return list(model.permissions)
