"""Flat-text parameter checkpoints shared by the meta net and classifiers.

Layout: one header line with a model tag and its dimensions, then every
parameter in row-major order, one full-precision float per line.
"""
from __future__ import annotations

from pathlib import Path
from typing import Callable

import numpy as np

from .errors import ParseError


def save_flat_params(path: str | Path, tag: str, dims: tuple[int, ...],
                     arrays: list[np.ndarray]) -> None:
    lines = [" ".join([tag] + [str(d) for d in dims])]
    for arr in arrays:
        lines.extend(repr(float(v)) for v in np.asarray(arr, dtype=np.float64).ravel())
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_flat_params(path: str | Path, expected_tag: str,
                     shapes_of: Callable) -> tuple[tuple[int, ...], list[np.ndarray]]:
    """Read a checkpoint; ``shapes_of(dims)`` gives the parameter shapes."""
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines:
        raise ParseError("empty checkpoint")
    header = lines[0].split()
    if not header or header[0] != expected_tag:
        raise ParseError(f"expected {expected_tag!r} checkpoint", line=1)
    try:
        dims = tuple(int(v) for v in header[1:])
    except ValueError as exc:
        raise ParseError(str(exc), line=1) from exc
    shapes = shapes_of(dims)
    expected = sum(int(np.prod(s)) for s in shapes)
    values = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        try:
            values.append(float(line))
        except ValueError as exc:
            raise ParseError(str(exc), line=lineno) from exc
    if len(values) != expected:
        raise ParseError(f"expected {expected} parameters, got {len(values)}")
    flat = np.asarray(values, dtype=np.float64)
    arrays, offset = [], 0
    for shape in shapes:
        size = int(np.prod(shape))
        arrays.append(flat[offset:offset + size].reshape(shape))
        offset += size
    return dims, arrays
