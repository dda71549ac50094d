"""
Snapshot and table files.

Snapshot layout (little-endian)::

    bytes 0-3    magic b"ZSNP"
    uint32       format version (1)
    uint32       N1, N2
    float64      eps, delta, t
    uint32       length L of the metadata string
    L bytes      ASCII "key=value" pairs separated by ";" (surface, coriolis)
    float64[N1]  longitude nodes p1
    float64[N2]  colatitude nodes p2
    float64[N1*N2] x 3   comp1, comp2, h, each row-major with shape (N1, N2)

Tables are CSV with one leading comment line carrying the config hash and
the unit of every column, then a header row.  Every file is written to a
temporary name in the target directory and renamed into place.
"""

from __future__ import annotations

import csv
import io as _io
import os
import struct
import tempfile

import numpy as np

from .fields import Grid, ScalarField, VectorField, State, Params
from .geometry import parse_profile

MAGIC = b"ZSNP"
VERSION = 1
_HEAD = struct.Struct("<4sIII3dI")


def atomic_write(path, data: bytes) -> None:
    path = os.fspath(path)
    d = os.path.dirname(os.path.abspath(path))
    os.makedirs(d, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def snapshot_bytes(s: State, t: float = 0.0, meta: dict | None = None) -> bytes:
    g = s.grid
    meta = dict(meta or {})
    meta.setdefault("surface", g.profile.name)
    text = ";".join(f"{k}={meta[k]}" for k in sorted(meta)).encode("ascii")
    parts = [
        _HEAD.pack(MAGIC, VERSION, g.N1, g.N2, s.params.eps, s.params.delta, float(t), len(text)),
        text,
        np.ascontiguousarray(g.p1, "<f8").tobytes(),
        np.ascontiguousarray(g.p2, "<f8").tobytes(),
    ]
    for a in (s.u.comp1, s.u.comp2, s.h.values):
        parts.append(np.ascontiguousarray(a, "<f8").tobytes())
    return b"".join(parts)


def write_snapshot(path, s: State, t: float = 0.0, meta: dict | None = None) -> None:
    atomic_write(path, snapshot_bytes(s, t, meta))


def read_snapshot(path, grid: Grid | None = None):
    """Return ``(state, t, meta)``.  A grid is rebuilt from the metadata
    unless one is passed; its nodes must match the file."""
    with open(path, "rb") as fh:
        raw = fh.read()
    magic, ver, N1, N2, eps, delta, t, L = _HEAD.unpack_from(raw, 0)
    if magic != MAGIC or ver != VERSION:
        raise ValueError(f"{path}: not a version-{VERSION} snapshot")
    off = _HEAD.size
    meta = dict(kv.split("=", 1) for kv in raw[off:off + L].decode("ascii").split(";") if kv)
    off += L

    def take(n):
        nonlocal off
        a = np.frombuffer(raw, "<f8", count=n, offset=off).copy()
        off += 8 * n
        return a

    p1, p2 = take(N1), take(N2)
    if grid is None:
        grid = Grid(parse_profile(meta.get("surface", "sphere")), N1, N2)
    if (grid.N1 != N1 or grid.N2 != N2 or not np.allclose(grid.p2, p2, rtol=0, atol=1e-14)
            or not np.allclose(grid.p1, p1, rtol=0, atol=1e-14)):
        raise ValueError(f"{path}: grid does not match the snapshot nodes")
    c1, c2, h = (take(N1 * N2).reshape(N1, N2) for _ in range(3))
    s = State(VectorField(c1, c2, grid), ScalarField(h, grid), Params(eps, delta))
    return s, t, meta


def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return repr(float(x)) if np.isfinite(x) else ("nan" if np.isnan(x) else ("inf" if x > 0 else "-inf"))
    return str(x)


def csv_bytes(columns, rows, units, config_hash: str) -> bytes:
    buf = _io.StringIO()
    unit_text = ",".join(f"{c}[{units.get(c, '1')}]" for c in columns)
    buf.write(f"# config_hash={config_hash} units={unit_text}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        vals = [r[c] for c in columns] if isinstance(r, dict) else list(r)
        w.writerow([_fmt(v) for v in vals])
    return buf.getvalue().encode("utf-8")


def write_csv(path, columns, rows, units=None, config_hash: str = "none") -> None:
    atomic_write(path, csv_bytes(list(columns), rows, units or {}, config_hash))


def read_csv(path):
    """Return ``(comment, columns, rows)`` with rows as lists of strings."""
    with open(path, newline="") as fh:
        comment = fh.readline().rstrip("\n")
        r = csv.reader(fh)
        columns = next(r)
        return comment, columns, [row for row in r]


def write_zonal_means(path, s: State, config_hash: str = "none") -> None:
    """Longitude averages of ``comp1``, ``comp2`` and ``h`` per colatitude."""
    g = s.grid
    rows = [(g.p2[j], s.u.comp1[:, j].mean(), s.u.comp2[:, j].mean(), s.h.values[:, j].mean())
            for j in range(g.N2)]
    write_csv(path, ["p2", "u1_mean", "u2_mean", "h_mean"], rows,
              {"p2": "rad", "u1_mean": "1/time", "u2_mean": "1/time", "h_mean": "length"}, config_hash)
