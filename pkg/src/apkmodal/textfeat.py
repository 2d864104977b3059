"""Extract textual evidence from an APK and turn it into annotation prompts.

Evidence is the strings-style view of the code and resources: printable
ASCII runs, URLs, dotted-quad IPs, and the declared permissions with the
configured dangerous subset highlighted. A prompt instance is one of the
two fixed templates plus a priority-truncated rendering of that evidence.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import re
import time
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import requests

from .apk import ApkArchive, read_entry
from .axml import ManifestModel
from .errors import AnnotatorError, EndpointUnreachable, MalformedResponse, StubMiss
from .labels import Label
from .prompts import BENIGN_PROMPT_TEMPLATE, EVIDENCE_DELIMITER, MALWARE_PROMPT_TEMPLATE

log = logging.getLogger(__name__)

# Named examples plus the usual abuse suspects; a config value, not a
# fixed taxonomy -- extend or replace per corpus.
DEFAULT_DANGEROUS_PERMISSIONS = (
    "SEND_SMS",
    "READ_CONTACTS",
    "RECEIVE_SMS",
    "READ_SMS",
    "CALL_PHONE",
    "RECORD_AUDIO",
    "ACCESS_FINE_LOCATION",
    "WRITE_CONTACTS",
    "READ_PHONE_STATE",
    "SYSTEM_ALERT_WINDOW",
)

_URL_PATTERN = re.compile(r"https?://[^\s'\"<>]+")
_IPV4_PATTERN = re.compile(r"(?<![\d.])((?:\d{1,3}\.){3}\d{1,3})(?![\d.])")


@dataclass(frozen=True)
class EvidenceConfig:
    min_string_len: int = 4
    max_strings_per_entry: int = 2000
    dangerous_permissions: tuple[str, ...] = DEFAULT_DANGEROUS_PERMISSIONS


@dataclass
class TextEvidence:
    permissions: list[str]
    printable_strings: list[str]
    urls: list[str]
    ip_addresses: list[str]
    dangerous_permission_hits: list[str]
    source_entry_counts: dict[str, int]

    def to_json(self) -> str:
        return json.dumps(
            {
                "permissions": self.permissions,
                "printable_strings": self.printable_strings,
                "urls": self.urls,
                "ip_addresses": self.ip_addresses,
                "dangerous_permission_hits": self.dangerous_permission_hits,
                "source_entry_counts": self.source_entry_counts,
            },
            indent=2,
            sort_keys=False,
        )


def _is_text_source(name: str) -> bool:
    # code plus string-bearing resources; media and signatures add noise
    return (
        re.match(r"^classes\d*\.dex$", name) is not None
        or name == "resources.arsc"
        or name.startswith("res/")
        or name.startswith("assets/")
    )


def extract_evidence(
    archive: ApkArchive,
    manifest: ManifestModel | None,
    config: EvidenceConfig = EvidenceConfig(),
) -> TextEvidence:
    """Scan dex and resource entries for printable runs and indicators."""
    run_pattern = re.compile(rb"[\x20-\x7e]{%d,}" % config.min_string_len)
    printable: list[str] = []
    counts: dict[str, int] = {}
    urls: list[str] = []
    ips: list[str] = []
    seen_urls: set[str] = set()
    seen_ips: set[str] = set()

    for entry in archive.entries:
        if not _is_text_source(entry.name):
            continue
        data = read_entry(archive, entry.name)
        found = run_pattern.findall(data)[: config.max_strings_per_entry]
        counts[entry.name] = len(found)
        for raw in found:
            text = raw.decode("ascii")
            printable.append(text)
            for url in _URL_PATTERN.findall(text):
                if url not in seen_urls:
                    seen_urls.add(url)
                    urls.append(url)
            for quad in _IPV4_PATTERN.findall(text):
                if quad not in seen_ips and all(int(octet) <= 255 for octet in quad.split(".")):
                    seen_ips.add(quad)
                    ips.append(quad)

    permissions = list(manifest.permissions) if manifest is not None else []
    dangerous = [
        perm
        for perm in permissions
        if any(perm == short or perm.endswith("." + short) for short in config.dangerous_permissions)
    ]
    return TextEvidence(
        permissions=permissions,
        printable_strings=printable,
        urls=urls,
        ip_addresses=ips,
        dangerous_permission_hits=dangerous,
        source_entry_counts=counts,
    )


def approx_tokens(text: str) -> int:
    """Whitespace token count; stands in when no real tokenizer is attached."""
    return len(text.split())


@dataclass(frozen=True)
class PromptInstance:
    label_hypothesis: Label
    template_text: str
    evidence_digest: str
    max_input_tokens: int

    def rendered(self) -> str:
        if not self.evidence_digest:
            return self.template_text
        return self.template_text + EVIDENCE_DELIMITER + self.evidence_digest

    def prompt_digest(self) -> str:
        return hashlib.sha256(self.rendered().encode("utf-8")).hexdigest()


# (section header, evidence field) in descending priority; when the token
# budget runs out, the lowest-priority items are the ones dropped.
_SECTION_PLAN = (
    ("Dangerous permission hits:", "dangerous_permission_hits"),
    ("URLs:", "urls"),
    ("IP addresses:", "ip_addresses"),
    ("Declared permissions:", "permissions"),
    ("Strings:", "printable_strings"),
)


def build_prompt(
    evidence: TextEvidence,
    hypothesis: Label,
    max_input_tokens: int = 3500,
) -> PromptInstance:
    """Instantiate the benign or malware template over the evidence.

    The rendered prompt stays within max_input_tokens (whitespace
    approximation); the template itself is never truncated.
    """
    template = MALWARE_PROMPT_TEMPLATE if hypothesis is Label.MALWARE else BENIGN_PROMPT_TEMPLATE
    budget = max_input_tokens - approx_tokens(template) - approx_tokens(EVIDENCE_DELIMITER)

    lines: list[str] = []
    exhausted = False
    for header, field_name in _SECTION_PLAN:
        items = getattr(evidence, field_name)
        if not items or exhausted:
            continue
        header_cost = approx_tokens(header)
        section_lines: list[str] = []
        spent = header_cost
        for item in items:
            cost = approx_tokens("- " + item)
            if budget - spent - cost < 0:
                exhausted = True
                break
            section_lines.append("- " + item)
            spent += cost
        if section_lines:
            lines.append(header)
            lines.extend(section_lines)
            budget -= spent

    return PromptInstance(
        label_hypothesis=hypothesis,
        template_text=template,
        evidence_digest="\n".join(lines),
        max_input_tokens=max_input_tokens,
    )


# -- annotation client ---------------------------------------------------------

class Provenance(str, Enum):
    LIVE_ENDPOINT = "live"
    STUB = "stub"


@dataclass
class Annotation:
    text: str
    label_hypothesis: Label
    provenance: Provenance
    model_id: str


@dataclass
class AnnotatorConfig:
    """Transport settings for the annotation endpoint or its stub."""

    mode: Provenance = Provenance.STUB
    endpoint: str | None = None
    model: str = "stub"
    api_key: str | None = None
    stub_dir: Path | None = None
    timeout: float = 60.0
    max_retries: int = 3
    retry_backoff: float = 0.5
    generation_params: dict = field(default_factory=dict)

    @classmethod
    def from_env(cls, env: dict | None = None) -> "AnnotatorConfig | None":
        """Build from ANNOTATOR_* variables; None when no mode is set."""
        env = os.environ if env is None else env
        mode = env.get("ANNOTATOR_MODE")
        if not mode:
            return None
        if mode not in ("live", "stub"):
            raise ValueError(f"ANNOTATOR_MODE must be 'live' or 'stub', got {mode!r}")
        stub_dir = env.get("ANNOTATOR_STUB_DIR")
        return cls(
            mode=Provenance.LIVE_ENDPOINT if mode == "live" else Provenance.STUB,
            endpoint=env.get("ANNOTATOR_ENDPOINT"),
            model=env.get("ANNOTATOR_MODEL", "stub"),
            api_key=env.get("ANNOTATOR_API_KEY"),
            stub_dir=Path(stub_dir) if stub_dir else None,
        )


def annotate(prompt: PromptInstance, config: AnnotatorConfig) -> Annotation:
    """Obtain the model's summary for one prompt.

    Stub mode looks up <sha256-of-rendered-prompt>.txt in the stub corpus
    and is fully deterministic; live mode posts a chat-completion request
    and retries transient failures with exponential backoff.
    """
    if config.mode is Provenance.STUB:
        return _annotate_stub(prompt, config)
    return _annotate_live(prompt, config)


def annotate_batch(
    prompts: list[PromptInstance],
    config: AnnotatorConfig,
    max_in_flight: int = 4,
) -> list[Annotation | AnnotatorError]:
    """Annotate many prompts with a bounded number of concurrent requests.

    Results keep prompt order; a failed prompt yields its exception
    instead of aborting the batch.
    """
    import concurrent.futures

    results: list[Annotation | AnnotatorError] = [None] * len(prompts)  # type: ignore[list-item]
    with concurrent.futures.ThreadPoolExecutor(max_workers=max(1, max_in_flight)) as pool:
        futures = {pool.submit(annotate, prompt, config): i for i, prompt in enumerate(prompts)}
        for future in concurrent.futures.as_completed(futures):
            index = futures[future]
            try:
                results[index] = future.result()
            except AnnotatorError as exc:
                results[index] = exc
    return results


def _annotate_stub(prompt: PromptInstance, config: AnnotatorConfig) -> Annotation:
    if config.stub_dir is None:
        raise StubMiss("stub mode requires a stub corpus directory")
    path = config.stub_dir / f"{prompt.prompt_digest()}.txt"
    if not path.is_file():
        raise StubMiss(f"no stub response at {path}")
    text = path.read_text(encoding="utf-8")
    if not text.strip():
        raise MalformedResponse(f"stub response {path} is empty")
    return Annotation(
        text=text,
        label_hypothesis=prompt.label_hypothesis,
        provenance=Provenance.STUB,
        model_id=config.model,
    )


def _annotate_live(prompt: PromptInstance, config: AnnotatorConfig) -> Annotation:
    if not config.endpoint:
        raise EndpointUnreachable("live mode requires an endpoint URL")
    payload = {
        "model": config.model,
        "messages": [{"role": "user", "content": prompt.rendered()}],
        **config.generation_params,
    }
    headers = {"Content-Type": "application/json"}
    if config.api_key:
        headers["Authorization"] = f"Bearer {config.api_key}"

    last_error: Exception | None = None
    for attempt in range(config.max_retries):
        if attempt:
            time.sleep(config.retry_backoff * (2 ** (attempt - 1)))
        try:
            response = requests.post(
                config.endpoint, json=payload, headers=headers, timeout=config.timeout
            )
        except requests.RequestException as exc:
            last_error = exc
            log.warning("annotation attempt %d failed: %s", attempt + 1, exc)
            continue
        if response.status_code >= 500:
            last_error = EndpointUnreachable(f"HTTP {response.status_code}")
            log.warning("annotation attempt %d got HTTP %d", attempt + 1, response.status_code)
            continue
        if response.status_code != 200:
            raise MalformedResponse(f"HTTP {response.status_code}: {response.text[:200]}")
        try:
            body = response.json()
            text = body["choices"][0]["message"]["content"]
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            raise MalformedResponse(f"unexpected response shape: {exc}") from exc
        if not isinstance(text, str) or not text.strip():
            raise MalformedResponse("endpoint returned an empty summary")
        return Annotation(
            text=text,
            label_hypothesis=prompt.label_hypothesis,
            provenance=Provenance.LIVE_ENDPOINT,
            model_id=config.model,
        )
    raise EndpointUnreachable(
        f"{config.endpoint}: gave up after {config.max_retries} attempts ({last_error})"
    )
