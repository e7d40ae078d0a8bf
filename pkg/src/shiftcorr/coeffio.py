"""Coefficient files and the on-disk table cache.

Text format::

    # kind: eigenvalue
    # weight: 12
    # normalization: lambda(n)=a(n)/n^((k-1)/2)
    # limit: 1000
    1 1
    2 -0.53033008588991060
    ...

Binary format: the 4-byte magic ``SCL1``, the limit as a little-endian
uint64, then ``limit`` little-endian float64 values for ``n = 1..limit``.
Maass tables use the text format with ``kind: maass`` and ``spectral: <r>``.
"""

from __future__ import annotations

import os
import struct
from pathlib import Path

import numpy as np

from . import config
from .errors import UsageError
from .forms import KINDS, CoefficientTable, EigenformSpec, eigenvalue_table

MAGIC = b"SCL1"
NORMALIZATION = "lambda(n)=a(n)/n^((k-1)/2)"


def write_text(table: CoefficientTable, path, extra: dict | None = None) -> None:
    header = {"kind": table.kind}
    if "weight" in table.source:
        header["weight"] = table.source["weight"]
    if "label" in table.source:
        header["label"] = table.source["label"]
    header["normalization"] = table.source.get("normalization", NORMALIZATION)
    header["limit"] = table.limit
    header.update(extra or {})
    lines = [f"# {k}: {v}" for k, v in header.items()]
    vals = table.values
    lines += [f"{n} {vals[n]:.17g}" for n in range(1, table.limit + 1)]
    Path(path).write_text("\n".join(lines) + "\n")


def read_text(path) -> CoefficientTable:
    header: dict = {}
    ns, vs = [], []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                key, sep, value = line[1:].partition(":")
                if sep:
                    header[key.strip()] = value.strip()
                continue
            parts = line.split()
            if len(parts) != 2:
                raise UsageError(f"{path}:{lineno}: expected 'n value'")
            ns.append(int(parts[0]))
            vs.append(float(parts[1]))
    kind = header.get("kind", "multiplicative")
    if kind not in KINDS:
        raise UsageError(f"{path}: unknown kind {kind!r}")
    limit = int(header.get("limit", max(ns, default=0)))
    if ns != list(range(1, limit + 1)):
        raise UsageError(f"{path}: body must list n = 1..{limit} in order")
    values = np.zeros(limit + 1)
    values[1:] = vs
    source = {k: v for k, v in header.items() if k not in ("kind", "limit")}
    if "weight" in source:
        source["weight"] = int(source["weight"])
    source.setdefault("label", Path(path).stem)
    source["file"] = str(path)
    return CoefficientTable(limit, values, kind, source)


def write_binary(table: CoefficientTable, path) -> None:
    tmp = Path(str(path) + ".tmp")
    with open(tmp, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<Q", table.limit))
        fh.write(np.ascontiguousarray(table.values[1:], dtype="<f8").tobytes())
    os.replace(tmp, path)


def read_binary(path, kind: str = "eigenvalue", source: dict | None = None, limit: int | None = None) -> CoefficientTable:
    with open(path, "rb") as fh:
        if fh.read(4) != MAGIC:
            raise UsageError(f"{path}: not an SCL1 coefficient file")
        (stored,) = struct.unpack("<Q", fh.read(8))
        count = stored if limit is None else min(limit, stored)
        data = np.fromfile(fh, dtype="<f8", count=count)
    if data.shape[0] != count:
        raise UsageError(f"{path}: truncated file")
    values = np.zeros(count + 1)
    values[1:] = data
    src = dict(source or {})
    src.setdefault("label", Path(path).stem)
    return CoefficientTable(count, values, kind, src)


def read_table(path) -> CoefficientTable:
    """Read either format, detected by the magic bytes."""
    with open(path, "rb") as fh:
        head = fh.read(4)
    return read_binary(path) if head == MAGIC else read_text(path)


def write_table(table: CoefficientTable, path, binary: bool | None = None) -> None:
    if binary is None:
        binary = str(path).endswith((".bin", ".scl1"))
    (write_binary if binary else write_text)(table, path)


def cached_eigenvalue_table(spec: EigenformSpec | str, N: int) -> CoefficientTable:
    """Normalized table for ``spec`` up to ``N``, reusing the cache when it is long enough."""
    if isinstance(spec, str):
        spec = EigenformSpec.parse(spec)
    path = config.cache_dir() / f"{spec.label}.scl1"
    source = {"label": spec.label, "weight": spec.weight, "construction": "integer q-expansion",
              "normalization": NORMALIZATION}
    if path.exists():
        with open(path, "rb") as fh:
            ok = fh.read(4) == MAGIC
            stored = struct.unpack("<Q", fh.read(8))[0] if ok else 0
        if ok and stored >= N:
            return read_binary(path, "eigenvalue", source, limit=N)
    table = eigenvalue_table(spec, N)
    write_binary(table, path)
    return CoefficientTable(N, table.values, "eigenvalue", source)
