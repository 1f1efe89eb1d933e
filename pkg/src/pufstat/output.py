"""Deterministic, atomic artifact writing and run manifests.

Every command line run builds a RunManifest from its inputs and parameters.
The manifest hash is computed before any artifact is written; text artifacts
carry the hash in a comment or JSON field, and the manifest file written at
the end lists each artifact with its content digest. Raw binary artifacts
(the packed bit stream has no room for a header) are linked from the
manifest side only.

Numbers are formatted with 17 significant digits, which round-trips doubles
exactly, so identical manifests always produce byte-identical artifacts.
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass, field
from pathlib import Path


def fmt_num(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, (int,)):
        return str(value)
    return format(float(value), ".17g")


def sha256_bytes(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def sha256_file(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def hash_input_files(paths) -> str:
    """Digest of a set of input files: names and contents, in sorted order."""
    h = hashlib.sha256()
    for path in sorted(Path(p) for p in paths):
        h.update(path.name.encode("utf-8"))
        h.update(b"\0")
        h.update(bytes.fromhex(sha256_file(path)))
    return h.hexdigest()


def write_bytes_atomic(path: Path, data: bytes) -> None:
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "wb") as fh:
        fh.write(data)
        fh.flush()
        os.fsync(fh.fileno())
    os.replace(tmp, path)


def write_text_atomic(path: Path, text: str) -> None:
    write_bytes_atomic(path, text.encode("utf-8"))


@dataclass
class RunManifest:
    version: str
    subcommand: str
    params: dict
    dataset: str | None = None
    layout: str | None = None
    meta: str | None = None
    geometry: str | None = None
    seed: int | None = None
    input_sha256: str | None = None
    artifacts: dict = field(default_factory=dict)

    def core(self) -> dict:
        return {
            "tool": "pufstat",
            "version": self.version,
            "subcommand": self.subcommand,
            "dataset": self.dataset,
            "layout": self.layout,
            "meta": self.meta,
            "geometry": self.geometry,
            "seed": self.seed,
            "input_sha256": self.input_sha256,
            "params": self.params,
        }

    @property
    def hash(self) -> str:
        canonical = json.dumps(self.core(), sort_keys=True, separators=(",", ":"))
        return sha256_bytes(canonical.encode("utf-8"))


class ArtifactWriter:
    """Writes a run's artifacts under one directory, tracking digests."""

    def __init__(self, out_dir: Path, manifest: RunManifest):
        self.out_dir = Path(out_dir)
        self.out_dir.mkdir(parents=True, exist_ok=True)
        self.manifest = manifest

    def _record(self, name: str, data: bytes) -> Path:
        path = self.out_dir / name
        write_bytes_atomic(path, data)
        self.manifest.artifacts[name] = sha256_bytes(data)
        return path

    def write_json(self, name: str, payload: dict) -> Path:
        body = dict(payload)
        body["manifest_hash"] = self.manifest.hash
        text = json.dumps(body, indent=2, sort_keys=True) + "\n"
        return self._record(name, text.encode("utf-8"))

    def write_csv(self, name: str, header, rows, units: str) -> Path:
        lines = [
            f"# manifest: {self.manifest.hash}",
            f"# units: {units}",
            ",".join(header),
        ]
        for row in rows:
            lines.append(",".join(fmt_num(v) if not isinstance(v, str) else v for v in row))
        return self._record(name, ("\n".join(lines) + "\n").encode("utf-8"))

    def write_dat(self, name: str, columns: str, blocks, units: str) -> Path:
        """Whitespace table for plotting. ``blocks`` is a list of
        (comment_or_None, rows); blocks are separated by blank lines."""
        lines = [
            f"# manifest: {self.manifest.hash}",
            f"# units: {units}",
            f"# columns: {columns}",
        ]
        first = True
        for comment, rows in blocks:
            if not first:
                lines.append("")
            first = False
            if comment:
                lines.append(f"# {comment}")
            for row in rows:
                lines.append(" ".join(fmt_num(v) if not isinstance(v, str) else v for v in row))
        return self._record(name, ("\n".join(lines) + "\n").encode("utf-8"))

    def write_binary(self, name: str, data: bytes) -> Path:
        return self._record(name, data)

    def finish(self) -> Path:
        payload = self.manifest.core()
        payload["hash"] = self.manifest.hash
        payload["artifacts"] = dict(sorted(self.manifest.artifacts.items()))
        text = json.dumps(payload, indent=2, sort_keys=True) + "\n"
        path = self.out_dir / f"{self.manifest.subcommand}_manifest.json"
        write_text_atomic(path, text)
        return path
