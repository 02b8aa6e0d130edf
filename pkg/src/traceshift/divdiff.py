"""Divided differences with confluent (repeated) nodes.

The order-n divided difference is computed from the classical recursion on
sorted nodes; coincident nodes take the derivative branch

    f[x,...,x] (m+1 copies) = f^(m)(x) / m!

Nodes closer than ``CONFLUENCE_RTOL * (1 + |x|)`` are snapped to their
cluster mean first: the recursive quotient loses all precision near
coincidence while the confluent branch is exact.  The batch evaluator
groups node tuples by their coincidence pattern, so large symbol tables
with systematically repeated nodes (fused trace symbols, degenerate
spectra) stay fully vectorized.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import CapabilityError

CONFLUENCE_RTOL = 1e-7


@dataclass(frozen=True)
class DividedDifferenceTable:
    """One evaluated divided difference with its confluence structure."""

    nodes: tuple[float, ...]
    value: complex
    multiplicities: tuple[int, ...]

    @classmethod
    def evaluate(cls, f, nodes) -> "DividedDifferenceTable":
        snapped, _ = snap_nodes(nodes)
        mults = []
        i = 0
        while i < snapped.size:
            j = i
            while j < snapped.size and snapped[j] == snapped[i]:
                j += 1
            mults.append(j - i)
            i = j
        return cls(tuple(float(x) for x in snapped),
                   divided_difference(f, snapped), tuple(mults))


def snap_nodes(nodes) -> tuple[np.ndarray, int]:
    """Sort nodes and merge clusters within the confluence tolerance.

    Returns the snapped ascending node array and the largest multiplicity.
    """
    xs = np.sort(np.asarray(nodes, dtype=float))
    if xs.ndim != 1 or xs.size == 0:
        raise ValueError("nodes must be a nonempty 1-d sequence")
    out = xs.copy()
    max_mult = 1
    i = 0
    while i < xs.size:
        j = i + 1
        while j < xs.size and xs[j] - xs[j - 1] <= CONFLUENCE_RTOL * (1.0 + abs(xs[j])):
            j += 1
        if j - i > 1:
            out[i:j] = xs[i:j].mean()
            max_mult = max(max_mult, j - i)
        i = j
    return out, max_mult


def _depth_of(f) -> int:
    return getattr(f, "depth", 0)


def _deriv(f, k: int):
    if k == 0:
        return f
    if not hasattr(f, "deriv"):
        raise CapabilityError("confluent nodes need a derivative stack")
    return f.deriv(k)


def divided_difference(f, nodes) -> complex:
    """f[x_0, ..., x_n] for a scalar function with a derivative stack.

    ``f`` may be a plain callable when all nodes are distinct; repeated
    nodes require ``f.deriv(k)`` up to the largest multiplicity minus one.
    """
    xs, max_mult = snap_nodes(nodes)
    if max_mult - 1 > _depth_of(f):
        raise CapabilityError(
            f"nodes have multiplicity {max_mult} but derivative depth is {_depth_of(f)}")
    n = xs.size - 1
    col = np.atleast_1d(np.asarray(f(xs), dtype=np.complex128)).copy()
    for level in range(1, n + 1):
        gaps = xs[level:] - xs[:-level]
        new = np.empty(n + 1 - level, dtype=np.complex128)
        conf = gaps == 0.0
        if np.any(conf):
            pts = xs[:-level][conf]
            new[conf] = np.asarray(_deriv(f, level)(pts),
                                   dtype=np.complex128) / math.factorial(level)
        ok = ~conf
        new[ok] = (col[1:][ok] - col[:-1][ok]) / gaps[ok]
        col = new
    return complex(col[0])


def _snap_rows(xs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Row-wise cluster snapping for sorted node rows.

    Returns the snapped rows and the boolean zero-gap pattern
    z[:, i] = (x_{i+1} == x_i after snapping).
    """
    t, m = xs.shape
    if m == 1:
        return xs, np.zeros((t, 0), dtype=bool)
    close = (xs[:, 1:] - xs[:, :-1]) <= CONFLUENCE_RTOL * (1.0 + np.abs(xs[:, 1:]))
    if not np.any(close):
        return xs, close
    # cluster ids per row, then replace by cluster means
    ids = np.zeros((t, m), dtype=np.int64)
    ids[:, 1:] = np.cumsum(~close, axis=1)
    sums = np.zeros((t, m))
    cnts = np.zeros((t, m))
    rows = np.repeat(np.arange(t), m)
    np.add.at(sums, (rows, ids.ravel()), xs.ravel())
    np.add.at(cnts, (rows, ids.ravel()), 1.0)
    with np.errstate(invalid="ignore"):
        means = sums / np.where(cnts == 0, 1.0, cnts)
    snapped = means[np.arange(t)[:, None], ids]
    return snapped, close


def divided_difference_batch(f, nodes: np.ndarray) -> np.ndarray:
    """Divided differences for many node tuples at once.

    ``nodes`` has shape (T, n+1); rows are sorted and snapped, then grouped
    by coincidence pattern so each group runs one vectorized confluent
    Newton table.
    """
    xs = np.sort(np.asarray(nodes, dtype=float), axis=1)
    t, m = xs.shape
    if m == 1:
        return np.asarray(f(xs[:, 0]), dtype=np.complex128)
    xs, zero_gap = _snap_rows(xs)
    out = np.empty(t, dtype=np.complex128)
    if not np.any(zero_gap):
        out[:] = _table_for_group(f, xs, zero_gap[:1] if t else zero_gap)
        return out
    patterns, inverse = np.unique(zero_gap, axis=0, return_inverse=True)
    for gi in range(patterns.shape[0]):
        sel = inverse == gi
        out[sel] = _table_for_group(f, xs[sel], patterns[gi][None, :])
    return out


def _table_for_group(f, xs: np.ndarray, pattern: np.ndarray) -> np.ndarray:
    """Vectorized confluent Newton table for rows sharing one zero-gap pattern."""
    t, m = xs.shape
    z = pattern[0] if pattern.size else np.zeros(0, dtype=bool)
    # largest multiplicity = longest run of zero gaps + 1
    run, max_mult = 0, 1
    for flag in z:
        run = run + 1 if flag else 0
        max_mult = max(max_mult, run + 1)
    if max_mult - 1 > _depth_of(f):
        raise CapabilityError(
            f"nodes have multiplicity {max_mult} but derivative depth is {_depth_of(f)}")
    col = np.asarray(f(xs), dtype=np.complex128)
    if col.shape != xs.shape:
        col = np.broadcast_to(col, xs.shape).astype(np.complex128)
    for level in range(1, m):
        conf = np.array([bool(np.all(z[i:i + level])) for i in range(m - level)])
        gaps = xs[:, level:] - xs[:, :-level]
        new = np.empty((t, m - level), dtype=np.complex128)
        ok = ~conf
        if np.any(ok):
            new[:, ok] = (col[:, 1:][:, ok] - col[:, :-1][:, ok]) / gaps[:, ok]
        if np.any(conf):
            pts = xs[:, :m - level][:, conf]
            vals = np.asarray(_deriv(f, level)(pts), dtype=np.complex128)
            new[:, conf] = vals / math.factorial(level)
        col = new
    return col[:, 0]


def opitz_matrix(nodes) -> np.ndarray:
    """Upper bidiagonal node matrix: diagonal = nodes, superdiagonal = 1.

    For any sufficiently smooth f, the top-right entry of f of this matrix
    equals the divided difference over the nodes, which makes matrix
    functions with trusted implementations (expm-based families,
    polynomials) an independent oracle for mixed-multiplicity node sets.
    """
    xs = np.asarray(nodes, dtype=float)
    z = np.diag(xs.astype(np.complex128))
    idx = np.arange(xs.size - 1)
    z[idx, idx + 1] = 1.0
    return z


def opitz_divided_difference(nodes, matfun) -> complex:
    """Divided difference via a user-supplied matrix function evaluator."""
    f = matfun(opitz_matrix(nodes))
    return complex(f[0, -1])
