"""Plain-text key=value run manifests, written atomically."""

from __future__ import annotations

import hashlib
import os
from pathlib import Path


class ManifestError(ValueError):
    """Manifest file is not parseable as key=value lines."""


def git_blob_sha1(path) -> str:
    """Content hash of a file the way git hashes blobs."""
    data = Path(path).read_bytes()
    h = hashlib.sha1(b"blob %d\0" % len(data))
    h.update(data)
    return h.hexdigest()


def write_manifest(path, entries: dict) -> None:
    """Write key=value lines via a temp file + rename so readers never see
    a half-written manifest."""
    path = Path(path)
    lines = []
    for key, value in entries.items():
        key = str(key)
        value = str(value)
        if "=" in key or "\n" in key or "\n" in value:
            raise ManifestError(f"key/value not representable: {key!r}={value!r}")
        lines.append(f"{key}={value}\n")
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "w", encoding="utf-8") as fh:
        fh.writelines(lines)
        fh.flush()
        os.fsync(fh.fileno())
    os.replace(tmp, path)


def read_manifest(path) -> dict[str, str]:
    entries: dict[str, str] = {}
    for ln, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        if "=" not in line:
            raise ManifestError(f"{path}:{ln}: expected key=value, got {line!r}")
        key, _, value = line.partition("=")
        entries[key] = value
    return entries
