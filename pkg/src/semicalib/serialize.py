"""Plain-text block files: a version line, then ``@name rows cols`` array blocks.

Floats are written with ``repr`` so a file round-trips bit for bit.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .data import InputError


def write_blocks(path, header: str, blocks: dict) -> None:
    lines = [header]
    for name, value in blocks.items():
        a = np.asarray(value, dtype=float)
        a2 = a.reshape(1, -1) if a.ndim < 2 else a
        lines.append(f"@{name} {a2.shape[0]} {a2.shape[1]} {a.ndim}")
        lines.extend(" ".join(repr(float(v)) for v in row) for row in a2)
    Path(path).write_text("\n".join(lines) + "\n")


def read_blocks(path, header: str) -> dict:
    path = Path(path)
    if not path.exists():
        raise InputError(f"file not found: {path}")
    lines = path.read_text().splitlines()
    if not lines or lines[0].strip() != header:
        raise InputError(f"{path}: expected header '{header}'")
    out = {}
    i = 1
    while i < len(lines):
        line = lines[i]
        if not line.startswith("@"):
            raise InputError(f"{path}: malformed block at line {i + 1}")
        name, r, c, ndim = line[1:].split()
        r, c, ndim = int(r), int(c), int(ndim)
        rows = lines[i + 1:i + 1 + r]
        a = np.array(" ".join(rows).split(), dtype=float).reshape(r, c)
        if ndim == 0:
            a = a.reshape(())
        elif ndim == 1:
            a = a.ravel()
        out[name] = a
        i += 1 + r
    return out
