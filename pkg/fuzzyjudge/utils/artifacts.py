"""Reading and writing pipeline artifacts.

JSONL artifacts start with a single ``{"_meta": {...}}`` line; JSON artifacts
carry a top-level ``_meta`` key. ``created_at`` inside ``_meta`` is the only
field that changes between identical runs.
"""

import hashlib
import json
from collections.abc import Iterable, Mapping
from datetime import datetime, timezone
from pathlib import Path
from typing import Any

from ..errors import FuzzyJudgeError

META_KEY = "_meta"


class MissingArtifact(FuzzyJudgeError):
    """Raised when an input artifact or file does not exist."""

    def __init__(self, path: Path, hint: str = ""):
        self.path = path
        message = f"Missing artifact: {path}"
        if hint:
            message += f" ({hint})"
        super().__init__(message)


class MalformedArtifact(FuzzyJudgeError):
    """Raised when an artifact cannot be decoded."""


def dumps_canonical(value: Any) -> str:
    """Serialize with sorted keys and no insignificant whitespace."""
    return json.dumps(value, sort_keys=True, ensure_ascii=False, separators=(",", ":"))


def build_meta(
    artifact: str,
    config: Mapping[str, Any] | None = None,
    inputs: Mapping[str, str] | None = None,
) -> dict[str, Any]:
    return {
        "artifact": artifact,
        "config": dict(config or {}),
        "inputs": dict(inputs or {}),
        "created_at": datetime.now(timezone.utc).isoformat(timespec="seconds"),
    }


def write_jsonl(path: Path, records: Iterable[Mapping[str, Any]], meta: Mapping[str, Any]) -> int:
    """Write records one per line after the metadata line.

    Returns:
        Number of records written (metadata line excluded)
    """
    path.parent.mkdir(parents=True, exist_ok=True)
    count = 0
    with path.open("w", encoding="utf-8", newline="\n") as handle:
        handle.write(dumps_canonical({META_KEY: dict(meta)}) + "\n")
        for record in records:
            handle.write(dumps_canonical(dict(record)) + "\n")
            count += 1
    return count


def read_jsonl(path: Path) -> tuple[dict[str, Any], list[dict[str, Any]]]:
    """Read a JSONL artifact.

    Returns:
        Tuple of (metadata, records); metadata is empty for files without a
        metadata line.
    """
    if not path.exists():
        raise MissingArtifact(path)
    meta: dict[str, Any] = {}
    records: list[dict[str, Any]] = []
    with path.open("r", encoding="utf-8") as handle:
        for line_number, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            try:
                value = json.loads(line)
            except json.JSONDecodeError as exc:
                raise MalformedArtifact(f"{path}:{line_number}: {exc}") from exc
            if line_number == 1 and isinstance(value, dict) and set(value) == {META_KEY}:
                meta = value[META_KEY]
                continue
            records.append(value)
    return meta, records


def write_json(path: Path, payload: Mapping[str, Any], meta: Mapping[str, Any]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    document = dict(payload)
    document[META_KEY] = dict(meta)
    path.write_text(
        json.dumps(document, sort_keys=True, ensure_ascii=False, indent=2) + "\n",
        encoding="utf-8",
    )


def read_json(path: Path) -> tuple[dict[str, Any], dict[str, Any]]:
    """Read a JSON artifact, returning (metadata, payload without metadata)."""
    if not path.exists():
        raise MissingArtifact(path)
    try:
        document = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise MalformedArtifact(f"{path}: {exc}") from exc
    meta = document.pop(META_KEY, {})
    return meta, document


def file_fingerprint(path: Path) -> str:
    """Content hash of a file, ignoring the ``created_at`` metadata field."""
    digest = hashlib.sha256()
    with path.open("rb") as handle:
        for raw in handle:
            digest.update(_strip_created_at(raw))
    return digest.hexdigest()[:16]


def content_fingerprint(records: Iterable[Mapping[str, Any]]) -> str:
    digest = hashlib.sha256()
    for record in records:
        digest.update(dumps_canonical(dict(record)).encode("utf-8"))
        digest.update(b"\n")
    return digest.hexdigest()[:16]


def _strip_created_at(raw: bytes) -> bytes:
    marker = b'"created_at":'
    start = raw.find(marker)
    if start < 0:
        return raw
    end = raw.find(b'"', raw.find(b'"', start + len(marker)) + 1)
    return raw[:start] + raw[end + 1 :]
