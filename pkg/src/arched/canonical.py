"""Canonical byte encodings shared by exports, reports, and persistence.

One serialization convention everywhere keeps golden-file tests and
byte-identity roundtrips honest: sorted keys, compact separators, UTF-8,
single trailing newline.
"""

from __future__ import annotations

import hashlib
import json
from datetime import datetime, timezone
from typing import Any


def canonical_json_bytes(value: Any) -> bytes:
    """Serialize ``value`` to canonical JSON bytes."""
    text = json.dumps(value, sort_keys=True, separators=(",", ":"), ensure_ascii=False)
    return (text + "\n").encode("utf-8")


def payload_digest(value: Any) -> str:
    """SHA-256 hex digest of the canonical JSON form of ``value``."""
    return hashlib.sha256(canonical_json_bytes(value)).hexdigest()


def utc_now() -> datetime:
    return datetime.now(timezone.utc)


def iso(ts: datetime) -> str:
    return ts.isoformat()


def parse_iso(text: str) -> datetime:
    return datetime.fromisoformat(text)
