"""Atomic artifact writers.

A run stages every artifact in a private directory next to the output
directory and moves the files into place only after all of them were
written, so a failed run leaves nothing behind.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import os
import shutil
import tempfile
from enum import Enum
from pathlib import Path
from typing import Any, Dict, Iterable, List, Sequence

import numpy as np
from loguru import logger

from core import events
from utils import logx


def sha256_bytes(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def sha256_file(path: str | Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def plain(obj: Any) -> Any:
    """Convert numpy values and containers to JSON types; non-finite floats become strings."""
    if isinstance(obj, dict):
        return {str(k): plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return plain(obj.tolist())
    if isinstance(obj, np.generic):
        return plain(obj.item())
    if isinstance(obj, Enum):
        return obj.value
    if isinstance(obj, float) and not math.isfinite(obj):
        return str(obj)
    return obj


def json_text(data: Any) -> str:
    """Deterministic JSON: sorted keys, two-space indent, trailing newline."""
    return json.dumps(plain(data), sort_keys=True, indent=2, allow_nan=False) + "\n"


def csv_text(header: Sequence[str], rows: Iterable[Sequence[Any]]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow(["" if v is None else (repr(float(v)) if isinstance(v, (float, np.floating)) else v) for v in row])
    return buf.getvalue()


def atomic_write_text(path: str | Path, text: str) -> None:
    """Write ``text`` to ``path`` via a temp file and ``os.replace``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp_path = tempfile.mkstemp(dir=str(path.parent), prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as f:
            f.write(text)
            f.flush()
            os.fsync(f.fileno())
        os.replace(tmp_path, path)
    finally:
        try:
            os.remove(tmp_path)
        except FileNotFoundError:
            pass


class ArtifactSet:
    """All-or-nothing collection of output files.

    Files are staged in memory; :meth:`commit` writes each one atomically
    and returns the ``(name, sha256)`` listing for the manifest.
    """

    def __init__(self, output_dir: str | Path) -> None:
        self.output_dir = Path(output_dir)
        self._files: Dict[str, str] = {}

    def add_text(self, name: str, text: str) -> None:
        if name in self._files:
            raise ValueError(f"artifact {name} staged twice")
        self._files[name] = text

    def add_json(self, name: str, data: Any) -> None:
        self.add_text(name, json_text(data))

    def add_csv(self, name: str, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> None:
        self.add_text(name, csv_text(header, rows))

    def digests(self) -> List[Dict[str, str]]:
        return [
            {"path": name, "sha256": sha256_bytes(text.encode("utf-8"))}
            for name, text in sorted(self._files.items())
        ]

    @property
    def names(self) -> List[str]:
        return sorted(self._files)

    def commit(self) -> List[Dict[str, str]]:
        """Write every staged file; on failure remove whatever was written."""
        staging = Path(tempfile.mkdtemp(prefix=".stage-", dir=str(self._parent())))
        written: List[Path] = []
        try:
            for name, text in sorted(self._files.items()):
                atomic_write_text(staging / name, text)
            self.output_dir.mkdir(parents=True, exist_ok=True)
            for name in sorted(self._files):
                target = self.output_dir / name
                os.replace(staging / name, target)
                written.append(target)
        except Exception:
            for target in written:
                target.unlink(missing_ok=True)
            logger.error("artifact commit to {} failed; removed {} files", self.output_dir, len(written))
            raise
        finally:
            shutil.rmtree(staging, ignore_errors=True)
        digests = self.digests()
        for entry in digests:
            logx.event(events.ARTIFACT_WRITTEN, path=str(self.output_dir / entry["path"]), sha256=entry["sha256"])
        return digests

    def _parent(self) -> Path:
        parent = self.output_dir.parent
        parent.mkdir(parents=True, exist_ok=True)
        return parent


__all__ = [
    "ArtifactSet",
    "atomic_write_text",
    "csv_text",
    "json_text",
    "plain",
    "sha256_bytes",
    "sha256_file",
]
