"""Complex matrices as CSV.

First line ``rows,cols``; then one matrix row per line written as
``re,im,re,im,...``.  The reader also accepts the flat layout with a single
``re,im`` pair per line (row-major).
"""

from __future__ import annotations

import csv
import io
from pathlib import Path

import numpy as np

from .errors import ConfigError


def format_matrix(M) -> str:
    M = np.atleast_2d(np.asarray(M, dtype=complex))
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(M.shape)
    for row in M:
        w.writerow([repr(float(x)) for c in row for x in (c.real, c.imag)])
    return buf.getvalue()


def write_matrix(path, M) -> None:
    Path(path).write_text(format_matrix(M))


def parse_matrix(text: str, source: str = "<string>") -> np.ndarray:
    rows = [r for r in csv.reader(io.StringIO(text)) if r and any(c.strip() for c in r)]
    if not rows:
        raise ConfigError(f"{source}: empty matrix file")
    try:
        n, m = (int(x) for x in rows[0])
        flat = [float(x) for r in rows[1:] for x in r]
    except ValueError as exc:
        raise ConfigError(f"{source}: malformed matrix CSV ({exc})") from None
    if n < 1 or m < 1 or len(flat) != 2 * n * m:
        raise ConfigError(f"{source}: header says {n}x{m} but {len(flat) // 2} entries follow")
    vals = np.empty(n * m, dtype=complex)
    vals.real, vals.imag = flat[0::2], flat[1::2]  # 1j * inf would turn into nan
    return vals.reshape(n, m)


def read_matrix(path) -> np.ndarray:
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"matrix file {str(p)!r} does not exist")
    return parse_matrix(p.read_text(), str(p))
