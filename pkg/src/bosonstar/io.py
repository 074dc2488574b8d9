"""Binary field snapshots and JSON/CSV report emission.

Snapshot format (BSF1):
    bytes 0..3    magic b"BSF1"
    bytes 4..7    header length H, little-endian unsigned 32-bit
    bytes 8..8+H  header, UTF-8 JSON: format_version, grid (n, length),
                  space flag, and free-form metadata (mass, velocity,
                  charge, multiplier when known, creation info)
    remainder     n^3 complex samples as interleaved little-endian
                  float64 (re, im), row-major with the last axis fastest

The payload must be exactly 16 n^3 bytes; save followed by load is
bit-identical on the payload and lossless on the header.
"""

from __future__ import annotations

import csv
import json
import os
from typing import Iterable

import numpy as np

from .spectral import ComplexField, GridSpec

__all__ = [
    "SnapshotError",
    "FORMAT_VERSION",
    "save_field",
    "load_field",
    "write_report",
    "write_csv",
]

MAGIC = b"BSF1"
FORMAT_VERSION = 1


class SnapshotError(ValueError):
    """Raised for malformed snapshot files (magic, version, payload)."""


def save_field(path, f: ComplexField, metadata: dict | None = None) -> None:
    """Write a field snapshot; metadata merges into the JSON header."""
    if not np.all(np.isfinite(f.values.view(np.float64))):
        raise ValueError("refusing to save a field with non-finite values")
    header = {
        "format_version": FORMAT_VERSION,
        "n": f.grid.n,
        "length": f.grid.length,
        "space": f.space,
    }
    if metadata:
        header.update(metadata)
    blob = json.dumps(header, sort_keys=True, default=_jsonable).encode("utf-8")
    payload = np.ascontiguousarray(f.values, dtype="<c16").tobytes()
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(len(blob).to_bytes(4, "little"))
        fh.write(blob)
        fh.write(payload)


def load_field(path) -> tuple[ComplexField, dict]:
    """Read a snapshot, returning (field, header)."""
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != MAGIC:
            raise SnapshotError(f"bad magic {magic!r}; not a BSF1 snapshot")
        raw_len = fh.read(4)
        if len(raw_len) != 4:
            raise SnapshotError("truncated snapshot: missing header length")
        hlen = int.from_bytes(raw_len, "little")
        blob = fh.read(hlen)
        if len(blob) != hlen:
            raise SnapshotError("truncated snapshot: incomplete header")
        try:
            header = json.loads(blob.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as err:
            raise SnapshotError(f"unreadable snapshot header: {err}") from err
        version = header.get("format_version")
        if version != FORMAT_VERSION:
            raise SnapshotError(
                f"unsupported snapshot format version {version!r}; "
                f"this reader handles version {FORMAT_VERSION}"
            )
        try:
            n = int(header["n"])
            length = float(header["length"])
            space = header["space"]
        except KeyError as err:
            raise SnapshotError(f"snapshot header missing field {err}") from err
        payload = fh.read()
    expected = 16 * n**3
    if len(payload) != expected:
        raise SnapshotError(
            f"payload length mismatch: expected {expected} bytes for n={n}, "
            f"got {len(payload)}"
        )
    vals = np.frombuffer(payload, dtype="<c16").reshape(n, n, n)
    grid = GridSpec(n, length)
    return ComplexField(grid, vals.astype(np.complex128), space), header


def _jsonable(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, complex):
        return {"re": obj.real, "im": obj.imag}
    raise TypeError(f"not JSON-serializable: {type(obj).__name__}")


def write_report(path, report: dict) -> None:
    """Write a run report as pretty-printed JSON (numpy-aware)."""
    tmp = f"{path}.tmp.{os.getpid()}"
    with open(tmp, "w", encoding="utf-8") as fh:
        json.dump(report, fh, indent=2, sort_keys=True, default=_jsonable)
        fh.write("\n")
    os.replace(tmp, path)


def write_csv(path, rows: Iterable[dict], fieldnames: list[str] | None = None) -> int:
    """Write dict rows as CSV; returns the number of rows written."""
    rows = iter(rows)
    try:
        first = next(rows)
    except StopIteration:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            if fieldnames:
                csv.DictWriter(fh, fieldnames=fieldnames).writeheader()
        return 0
    if fieldnames is None:
        fieldnames = list(first.keys())
    count = 0
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=fieldnames)
        writer.writeheader()
        writer.writerow(first)
        count += 1
        for row in rows:
            writer.writerow(row)
            count += 1
    return count
