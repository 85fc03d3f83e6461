"""Deterministic CSV/JSON emission and run records.

Every artifact is byte-stable given the same inputs: JSON keys are sorted,
floats are written with repr (shortest round-trip), line endings are '\\n'.
Run records carry timestamps, but those are excluded from content hashes.
"""

import datetime
import hashlib
import json
import math
import os
from dataclasses import dataclass, field

import numpy as np

__all__ = ["write_json", "write_csv", "profile_to_csv", "trajectory_to_csv",
           "RunRecord", "content_hash_of_dir"]


def _jsonify(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonify(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonify(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonify(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return None if not math.isfinite(v) else v  # strict JSON: no NaN/Inf
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj


def write_json(path, obj):
    text = json.dumps(_jsonify(obj), sort_keys=True, indent=1)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text + "\n")
    return path


def _fmt(v):
    if v is None or (isinstance(v, float) and math.isnan(v)):
        return ""
    return repr(float(v))


def write_csv(path, columns, arrays, schema_comment=None):
    lines = []
    if schema_comment:
        lines.append(f"# {schema_comment}")
    lines.append(",".join(columns))
    n = len(arrays[0])
    for k in range(n):
        lines.append(",".join(_fmt(a[k]) for a in arrays))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
    return path


def profile_to_csv(prof, path):
    return write_csv(
        path, ["r", "H", "D", "D1", "d", "dprime", "N", "surfaceD"],
        [prof.r, prof.H, prof.D, prof.D1, prof.d, prof.dprime, prof.N,
         prof.surfaceD],
        schema_comment="freqlab-profile 1")


def trajectory_to_csv(traj, path):
    return write_csv(path, ["t", "u", "du"], [traj.t, traj.u, traj.du],
                     schema_comment="freqlab-trajectory 1")


def _sha256(path):
    hsh = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            hsh.update(chunk)
    return hsh.hexdigest()


@dataclass
class RunRecord:
    """Append-only record of one command invocation."""

    command: str
    config: dict
    out_dir: str
    tool_version: str
    started_at: str = ""
    finished_at: str = ""
    manifest: list = field(default_factory=list)
    summary: dict = field(default_factory=dict)

    def start(self):
        self.started_at = datetime.datetime.now(datetime.timezone.utc).isoformat()
        return self

    def add(self, path):
        rel = os.path.relpath(path, self.out_dir)
        self.manifest.append({"path": rel, "sha256": _sha256(path)})
        return path

    def finish(self, summary=None):
        if summary:
            self.summary.update(summary)
        self.finished_at = datetime.datetime.now(datetime.timezone.utc).isoformat()
        self.manifest.sort(key=lambda m: m["path"])
        record = {
            "schema_version": 1,
            "command": self.command,
            "config": self.config,
            "tool_version": self.tool_version,
            "started_at": self.started_at,
            "finished_at": self.finished_at,
            "manifest": self.manifest,
            "summary": self.summary,
            "content_hash": self.content_hash(),
        }
        write_json(os.path.join(self.out_dir, "record.json"), record)
        line = json.dumps(_jsonify(record), sort_keys=True)
        with open(os.path.join(self.out_dir, "runs.jsonl"), "a",
                  encoding="utf-8", newline="\n") as fh:
            fh.write(line + "\n")
        return record

    def content_hash(self):
        """Hash of the emitted artifacts; timestamps play no part."""
        hsh = hashlib.sha256()
        for m in sorted(self.manifest, key=lambda m: m["path"]):
            hsh.update(m["path"].encode())
            hsh.update(m["sha256"].encode())
        return hsh.hexdigest()


def content_hash_of_dir(out_dir):
    """Recomputed artifact hash of a run directory (record/journal excluded)."""
    hsh = hashlib.sha256()
    for root, _, files in os.walk(out_dir):
        for name in sorted(files):
            if name in ("record.json", "runs.jsonl"):
                continue
            path = os.path.join(root, name)
            rel = os.path.relpath(path, out_dir)
            hsh.update(rel.encode())
            hsh.update(_sha256(path).encode())
    return hsh.hexdigest()
