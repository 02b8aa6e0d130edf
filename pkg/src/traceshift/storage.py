"""Text serialization for algebra elements.

Format (one element per file):

    traceshift-operator v1
    blocks <B>
    block <dim> <weight>        (B lines)
    hermitian <0|1>
    <dim rows per block, each row "re,im re,im ..." with dim entries>

All floats are written with 17 significant digits, which round-trips IEEE
doubles bit-exactly.
"""

from __future__ import annotations

import os
import tempfile

import numpy as np

from .algebra import AlgebraElement, TraceAlgebra
from .errors import StructureError

MAGIC = "traceshift-operator v1"


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def dumps_element(elem: AlgebraElement) -> str:
    alg = elem.algebra
    lines = [MAGIC, f"blocks {len(alg.blocks)}"]
    for b in alg.blocks:
        lines.append(f"block {b.dim} {_fmt(b.weight)}")
    lines.append(f"hermitian {1 if elem.hermitian else 0}")
    for m in elem.mats:
        for row in m:
            lines.append(" ".join(f"{_fmt(v.real)},{_fmt(v.imag)}" for v in row))
    return "\n".join(lines) + "\n"


def loads_element(text: str) -> AlgebraElement:
    lines = [ln.strip() for ln in text.splitlines() if ln.strip() and not ln.startswith("#")]
    if not lines or lines[0] != MAGIC:
        raise StructureError("not a traceshift operator file")
    pos = 1
    tag, nblocks = lines[pos].split()
    if tag != "blocks":
        raise StructureError("missing blocks header")
    nblocks = int(nblocks)
    pos += 1
    spec = []
    for _ in range(nblocks):
        tag, dim, weight = lines[pos].split()
        if tag != "block":
            raise StructureError("malformed block line")
        spec.append((int(dim), float(weight)))
        pos += 1
    tag, herm = lines[pos].split()
    if tag != "hermitian":
        raise StructureError("missing hermitian flag")
    hermitian = bool(int(herm))
    pos += 1
    alg = TraceAlgebra.of(spec)
    mats = []
    for dim, _ in spec:
        rows = []
        for _ in range(dim):
            entries = lines[pos].split()
            if len(entries) != dim:
                raise StructureError(f"expected {dim} entries per row, got {len(entries)}")
            row = [complex(float(re), float(im))
                   for re, im in (e.split(",") for e in entries)]
            rows.append(row)
            pos += 1
        mats.append(np.array(rows, dtype=np.complex128))
    return alg.element(mats, hermitian=hermitian)


def save_element(path: str, elem: AlgebraElement) -> None:
    atomic_write_text(path, dumps_element(elem))


def load_element(path: str) -> AlgebraElement:
    with open(path, "r", encoding="ascii") as fh:
        return loads_element(fh.read())


def atomic_write_text(path: str, text: str) -> None:
    """Write via a sibling temp file then rename, so readers never see partial files."""
    directory = os.path.dirname(os.path.abspath(path)) or "."
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=".part")
    try:
        with os.fdopen(fd, "w", encoding="ascii", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
