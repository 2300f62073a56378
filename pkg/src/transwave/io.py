"""Binary blobs for grid functions and jets, plus CSV tables."""

from __future__ import annotations

import csv
import struct
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .grid import GridFunction, make_grid
from .timejets import Jet

GRID_MAGIC = b"TWGF"
JET_MAGIC = b"TWJT"


def _grid_bytes(gf: GridFunction) -> bytes:
    g = gf.grid
    header = GRID_MAGIC + struct.pack("<3q", g.n, g.N, gf.m)
    # point-major: all components of a point are contiguous
    body = np.ascontiguousarray(np.moveaxis(gf.values, 0, -1), dtype="<f8").tobytes()
    return header + body


def _grid_from(buf: memoryview, pos: int) -> tuple[GridFunction, int]:
    if bytes(buf[pos : pos + 4]) != GRID_MAGIC:
        raise ValueError("not a grid function blob")
    n, N, m = struct.unpack_from("<3q", buf, pos + 4)
    pos += 4 + 24
    g = make_grid(n, N)
    count = m * g.size
    data = np.frombuffer(buf, dtype="<f8", count=count, offset=pos).reshape(g.shape + (m,))
    return GridFunction(g, np.moveaxis(data, -1, 0).astype(float)), pos + 8 * count


def write_grid_function(path: str | Path, gf: GridFunction) -> None:
    Path(path).write_bytes(_grid_bytes(gf))


def read_grid_function(path: str | Path) -> GridFunction:
    gf, _ = _grid_from(memoryview(Path(path).read_bytes()), 0)
    return gf


def write_jet(path: str | Path, jet: Jet) -> None:
    parts = [JET_MAGIC + struct.pack("<q", len(jet))] + [_grid_bytes(e) for e in jet]
    Path(path).write_bytes(b"".join(parts))


def read_jet(path: str | Path) -> Jet:
    buf = memoryview(Path(path).read_bytes())
    if bytes(buf[:4]) != JET_MAGIC:
        raise ValueError("not a jet blob")
    (count,) = struct.unpack_from("<q", buf, 4)
    pos, entries = 12, []
    for _ in range(count):
        gf, pos = _grid_from(buf, pos)
        entries.append(gf)
    return Jet(tuple(entries))


def _fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_table(path: str | Path, records: Sequence[dict], columns: Sequence[str] | None = None) -> Path:
    """CSV with a header row, '.' decimals and LF line endings."""
    path = Path(path)
    columns = list(columns or (records[0].keys() if records else []))
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for rec in records:
            w.writerow([_fmt(rec.get(c, "")) for c in columns])
    return path


def read_table(path: str | Path) -> list[dict]:
    with Path(path).open(newline="") as fh:
        return list(csv.DictReader(fh))


def export_csv(path: str | Path, gf: GridFunction) -> Path:
    """One row per grid point: x1..xn then u0..u{m-1}."""
    g = gf.grid
    coords = [c.ravel() for c in g.coords()]
    vals = [v.ravel() for v in gf.values]
    cols = [f"x{i + 1}" for i in range(g.n)] + [f"u{j}" for j in range(gf.m)]
    rows: Iterable = zip(*coords, *vals)
    return write_table(path, [dict(zip(cols, r)) for r in rows], cols)
