"""Canonical JSON/JSONL helpers.

All pipeline outputs go through :func:`canonical_dumps` so identical inputs
produce byte-identical files regardless of dict construction order.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path
from typing import Any, Iterator


def canonical_dumps(obj: Any) -> str:
    return json.dumps(obj, sort_keys=True, ensure_ascii=False)


def sha256_bytes(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def sha256_text(text: str) -> str:
    return sha256_bytes(text.encode("utf-8"))


def sha256_file(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def content_id(*parts: str, length: int = 16) -> str:
    """Stable short identifier from an ordered tuple of strings."""
    joined = "\x1f".join(parts)
    return sha256_text(joined)[:length]


def iter_jsonl(path: Path) -> Iterator[dict]:
    with open(path, encoding="utf-8") as f:
        for line in f:
            if line.strip():
                yield json.loads(line)


def load_jsonl(path: Path) -> list[dict]:
    return list(iter_jsonl(path))


def save_jsonl(path: Path, records: list[dict]) -> int:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        for record in records:
            f.write(canonical_dumps(record) + "\n")
    return len(records)


def append_jsonl(path: Path, record: dict) -> int:
    """Append one record; returns the byte offset the record was written at."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "a", encoding="utf-8") as f:
        offset = f.tell()
        f.write(canonical_dumps(record) + "\n")
    return offset
