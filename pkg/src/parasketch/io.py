"""File formats: CSV matrices, snapshot manifests, atomic writes.

A matrix file is plain CSV of doubles, one matrix row per line, printed with
17 significant digits so that save followed by load is bit-exact. A snapshot
manifest is a text file of ``t,relative/path.csv`` lines; paths are resolved
against the manifest's own directory.
"""

from __future__ import annotations

import os
import tempfile
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .linalg import as_matrix

_FMT = "%.17g"


def format_float(x: float) -> str:
    return _FMT % float(x)


def atomic_write_text(path, text: str) -> None:
    """Write a file via temp-and-rename so readers never see a partial file."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".", suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def matrix_to_csv(a) -> str:
    a = as_matrix(a)
    return "\n".join(",".join(_FMT % x for x in row) for row in a) + "\n"


def save_matrix(path, a) -> None:
    atomic_write_text(path, matrix_to_csv(a))


def load_matrix(path) -> np.ndarray:
    rows = []
    width = None
    with open(path, "r") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                row = [float(tok) for tok in line.split(",")]
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: bad matrix row: {exc}") from None
            if width is None:
                width = len(row)
            elif len(row) != width:
                raise ValueError(
                    f"{path}:{lineno}: ragged row (expected {width} entries, got {len(row)})"
                )
            rows.append(row)
    if not rows:
        raise ValueError(f"{path}: empty matrix file")
    return as_matrix(np.array(rows))


def save_snapshots(manifest_path, ts: Sequence[float], matrices: Iterable[np.ndarray]) -> None:
    """Write one CSV per snapshot plus the manifest listing (t, path) pairs."""
    manifest_path = Path(manifest_path)
    manifest_path.parent.mkdir(parents=True, exist_ok=True)
    lines = []
    for j, (t, a) in enumerate(zip(ts, matrices)):
        name = f"{manifest_path.stem}_{j:04d}.csv"
        save_matrix(manifest_path.parent / name, a)
        lines.append(f"{format_float(t)},{name}")
    atomic_write_text(manifest_path, "\n".join(lines) + "\n")


def load_snapshots(manifest_path):
    """Read a manifest; returns (ts, matrices) in file order."""
    manifest_path = Path(manifest_path)
    ts: list[float] = []
    mats: list[np.ndarray] = []
    with open(manifest_path, "r") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            t_str, _, rel = line.partition(",")
            if not rel:
                raise ValueError(f"{manifest_path}:{lineno}: expected 't,path'")
            ts.append(float(t_str))
            mats.append(load_matrix(manifest_path.parent / rel))
    if not ts:
        raise ValueError(f"{manifest_path}: empty manifest")
    return ts, mats
