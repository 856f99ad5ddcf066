"""HTTP client for vision-language-model endpoints.

Builds style-specific request bodies (OpenAI chat, Anthropic messages, or a
plain generic JSON shape), executes them with capped-exponential-backoff
retries, and runs whole manifests with bounded concurrency. Outputs are
written one file per record so an interrupted batch resumes for free, and
response text is persisted verbatim for the repair stage.
"""

from __future__ import annotations

import base64
import json
import logging
import os
import random
import time
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import requests

from ._fs import write_text_atomic
from .annotation_io import ManifestRecord
from .dataset import PNG_SIGNATURE
from .errors import (
    AuthError,
    ExhaustedRetries,
    GdtBenchError,
    ImageTooLarge,
    MissingApiKey,
    NotPng,
    UnsupportedStyle,
)

logger = logging.getLogger(__name__)

STYLE_OPENAI_CHAT = "openai-chat"
STYLE_ANTHROPIC_MESSAGES = "anthropic-messages"
STYLE_GENERIC_JSON = "generic-json"
KNOWN_STYLES = (STYLE_OPENAI_CHAT, STYLE_ANTHROPIC_MESSAGES, STYLE_GENERIC_JSON)

#: System/instruction segment fixing the output contract for every request.
DEFAULT_INSTRUCTION = (
    "Respond with only a JSON array of objects with keys "
    "geometric_characteristic, tolerance, datum, in drawing order."
)

RAW_OUTPUT_SUFFIX = ".raw.txt"


@dataclass
class EndpointConfig:
    """One remote endpoint; the API key lives only in the named env var."""

    name: str
    style: str
    base_url: str
    model: str
    api_key_env: str = ""
    timeout: float = 60.0
    max_retries: int = 3
    max_concurrency: int = 4
    max_image_bytes: int = 20_000_000
    backoff_base: float = 1.0

    def __post_init__(self):
        if self.style not in KNOWN_STYLES:
            raise UnsupportedStyle(
                f"endpoint {self.name!r}: unknown style {self.style!r}, "
                f"expected one of {', '.join(KNOWN_STYLES)}"
            )
        if self.max_concurrency < 1:
            raise ValueError("max_concurrency must be >= 1")
        if self.timeout <= 0:
            raise ValueError("timeout must be positive")
        if self.max_retries < 0:
            raise ValueError("max_retries must be >= 0")


@dataclass(frozen=True)
class WireRequest:
    """A ready-to-send request; auth headers are attached at send time."""

    url: str
    body: dict
    style: str


@dataclass(frozen=True)
class RawModelOutput:
    """Verbatim endpoint response text plus transport bookkeeping."""

    record_id: str
    model_text: str
    http_status: int
    latency_ms: float
    attempt_count: int


@dataclass
class BatchSummary:
    succeeded: int = 0
    skipped: int = 0
    failed: int = 0
    total_latency_ms: float = 0.0
    failures: list[tuple[str, str]] = field(default_factory=list)


def load_endpoint_config(path: Path | str, name: str) -> EndpointConfig:
    """Find the named endpoint in a config file ({"endpoints": [...]})."""
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    endpoints = data.get("endpoints") if isinstance(data, dict) else None
    if not isinstance(endpoints, list):
        raise GdtBenchError(f"{path}: expected an object with an 'endpoints' array")
    for entry in endpoints:
        if isinstance(entry, dict) and entry.get("name") == name:
            return EndpointConfig(**entry)
    known = ", ".join(
        str(e.get("name")) for e in endpoints if isinstance(e, dict)
    )
    raise GdtBenchError(f"{path}: no endpoint named {name!r} (have: {known or 'none'})")


def build_request(
    config: EndpointConfig,
    query: str,
    image_png: bytes,
    instruction: str = DEFAULT_INSTRUCTION,
) -> WireRequest:
    """Assemble the style-specific body carrying instruction, query, and image."""
    if not image_png.startswith(PNG_SIGNATURE):
        raise NotPng("image payload does not start with the PNG signature")
    if len(image_png) > config.max_image_bytes:
        raise ImageTooLarge(
            f"image is {len(image_png)} bytes, cap is {config.max_image_bytes}"
        )
    encoded = base64.b64encode(image_png).decode("ascii")
    if config.style == STYLE_OPENAI_CHAT:
        body = {
            "model": config.model,
            "messages": [
                {"role": "system", "content": instruction},
                {
                    "role": "user",
                    "content": [
                        {"type": "text", "text": query},
                        {
                            "type": "image_url",
                            "image_url": {"url": f"data:image/png;base64,{encoded}"},
                        },
                    ],
                },
            ],
        }
    elif config.style == STYLE_ANTHROPIC_MESSAGES:
        body = {
            "model": config.model,
            "max_tokens": 4096,
            "system": instruction,
            "messages": [
                {
                    "role": "user",
                    "content": [
                        {
                            "type": "image",
                            "source": {
                                "type": "base64",
                                "media_type": "image/png",
                                "data": encoded,
                            },
                        },
                        {"type": "text", "text": query},
                    ],
                }
            ],
        }
    else:
        body = {
            "model": config.model,
            "instruction": instruction,
            "query": query,
            "image_png_base64": encoded,
        }
    return WireRequest(url=config.base_url, body=body, style=config.style)


def build_text_request(
    config: EndpointConfig, instruction: str, text: str
) -> WireRequest:
    """Assemble a text-only request (used by the repair pass)."""
    if config.style == STYLE_OPENAI_CHAT:
        body = {
            "model": config.model,
            "messages": [
                {"role": "system", "content": instruction},
                {"role": "user", "content": text},
            ],
        }
    elif config.style == STYLE_ANTHROPIC_MESSAGES:
        body = {
            "model": config.model,
            "max_tokens": 4096,
            "system": instruction,
            "messages": [{"role": "user", "content": [{"type": "text", "text": text}]}],
        }
    else:
        body = {"model": config.model, "instruction": instruction, "query": text}
    return WireRequest(url=config.base_url, body=body, style=config.style)


def _auth_headers(config: EndpointConfig) -> dict[str, str]:
    if not config.api_key_env:
        return {}
    key = os.environ.get(config.api_key_env, "")
    if not key:
        raise MissingApiKey(f"environment variable {config.api_key_env} is not set")
    if config.style == STYLE_ANTHROPIC_MESSAGES:
        return {"x-api-key": key, "anthropic-version": "2023-06-01"}
    return {"Authorization": f"Bearer {key}"}


def extract_response_text(style: str, body_text: str) -> str:
    """Pull the model's text out of a style-specific response body."""
    try:
        payload = json.loads(body_text)
    except json.JSONDecodeError:
        return body_text
    if not isinstance(payload, dict):
        return body_text
    if style == STYLE_OPENAI_CHAT:
        try:
            return payload["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError):
            return body_text
    if style == STYLE_ANTHROPIC_MESSAGES:
        blocks = payload.get("content")
        if isinstance(blocks, list):
            texts = [
                b.get("text", "")
                for b in blocks
                if isinstance(b, dict) and b.get("type") == "text"
            ]
            if texts:
                return "".join(texts)
        return body_text
    text = payload.get("text")
    return text if isinstance(text, str) else body_text


def execute_with_retry(
    config: EndpointConfig,
    request: WireRequest,
    record_id: str = "",
    sleep: Callable[[float], None] = time.sleep,
    rng: random.Random | None = None,
) -> RawModelOutput:
    """POST with retries on 429/5xx/timeouts: capped exponential, full jitter.

    401/403 raise AuthError immediately; other non-retryable statuses and
    exhausted retries raise ExhaustedRetries carrying the last status.
    """
    headers = {"Content-Type": "application/json"}
    headers.update(_auth_headers(config))
    rng = rng if rng is not None else random.Random()
    max_attempts = config.max_retries + 1
    started = time.monotonic()
    last_status: int | None = None
    for attempt in range(1, max_attempts + 1):
        status: int | None
        try:
            response = requests.post(
                request.url, json=request.body, headers=headers, timeout=config.timeout
            )
            status = response.status_code
        except requests.RequestException as exc:
            logger.debug("attempt %d for %s failed: %s", attempt, record_id, exc)
            status = None
            response = None
        last_status = status if status is not None else last_status
        if response is not None and 200 <= status < 300:
            latency_ms = (time.monotonic() - started) * 1000.0
            return RawModelOutput(
                record_id=record_id,
                model_text=extract_response_text(config.style, response.text),
                http_status=status,
                latency_ms=latency_ms,
                attempt_count=attempt,
            )
        if status in (401, 403):
            raise AuthError(status)
        retryable = status is None or status == 429 or status >= 500
        if not retryable:
            raise ExhaustedRetries(status, attempt)
        if attempt < max_attempts:
            delay = rng.uniform(0.0, config.backoff_base * (2 ** (attempt - 1)))
            sleep(delay)
    raise ExhaustedRetries(last_status, max_attempts)


def raw_output_path(out_dir: Path | str, record_id: str) -> Path:
    return Path(out_dir) / f"{record_id}{RAW_OUTPUT_SUFFIX}"


def run_batch(
    config: EndpointConfig,
    records: Sequence[ManifestRecord],
    out_dir: Path | str,
    instruction: str = DEFAULT_INSTRUCTION,
    sleep: Callable[[float], None] = time.sleep,
) -> BatchSummary:
    """Fetch model output for every record that does not already have one.

    At most config.max_concurrency requests are in flight at once. Each
    success writes ``<record_id>.raw.txt`` atomically; existing files are
    skipped, so reruns of a completed batch make no network calls. Failures
    are collected per record and never abort the batch.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    summary = BatchSummary()
    pending = []
    for record in records:
        if raw_output_path(out_dir, record.record_id).exists():
            summary.skipped += 1
        else:
            pending.append(record)
    if not pending:
        return summary

    def fetch(record: ManifestRecord) -> RawModelOutput:
        image = Path(record.image_path).read_bytes()
        request = build_request(config, record.query, image, instruction=instruction)
        output = execute_with_retry(
            config, request, record_id=record.record_id, sleep=sleep
        )
        write_text_atomic(raw_output_path(out_dir, record.record_id), output.model_text)
        return output

    with ThreadPoolExecutor(max_workers=config.max_concurrency) as pool:
        futures = {pool.submit(fetch, record): record for record in pending}
        for future in as_completed(futures):
            record = futures[future]
            try:
                output = future.result()
            except Exception as exc:  # per-record isolation: keep the batch going
                summary.failed += 1
                summary.failures.append((record.record_id, f"{type(exc).__name__}: {exc}"))
                logger.warning("record %s failed: %s", record.record_id, exc)
            else:
                summary.succeeded += 1
                summary.total_latency_ms += output.latency_ms
    summary.failures.sort()
    return summary
