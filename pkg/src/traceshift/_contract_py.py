"""Pure NumPy contraction kernels for multilinear operator integrals.

The contraction evaluated here, in rotated eigenbases, is

    T[a, j] = sum over middles  S(a, m_1, ..., m_{k-1}, j)
              * W1[a, m_1] * W2[m_1, m_2] * ... * Wk[m_{k-1}, j]

where the symbol S is looked up from a table indexed by the first slot `a`
and the colex rank of the sorted multiset of the remaining k indices (the
symbol is a divided difference, hence symmetric).  k = 1 is a Hadamard
product; k = 2 contracts slice by slice over the middle index; k >= 3 runs
the direct multi-index sum.  The compiled twin in ``_kernels`` implements
the same contract for k = 2, 3.
"""

from __future__ import annotations

import math
from functools import lru_cache

import numpy as np


def comb_vec(m: np.ndarray, t: int) -> np.ndarray:
    """Exact C(m, t) for int64 arrays (zero where m < t)."""
    m = np.asarray(m, dtype=np.int64)
    out = np.ones(m.shape, dtype=np.int64)
    for j in range(t):
        out = out * np.maximum(m - j, 0)
    return out // math.factorial(t)


def multiset_rank(sorted_idx: np.ndarray) -> np.ndarray:
    """Colex rank of ascending multisets over {0..n-1}; shape (..., k) -> (...)."""
    k = sorted_idx.shape[-1]
    rank = np.zeros(sorted_idx.shape[:-1], dtype=np.int64)
    for t in range(1, k + 1):
        rank = rank + comb_vec(sorted_idx[..., t - 1] + t - 1, t)
    return rank


def num_multisets(n: int, k: int) -> int:
    return math.comb(n + k - 1, k)


@lru_cache(maxsize=64)
def pair_rank_table(n: int) -> np.ndarray:
    idx = np.arange(n)
    pairs = np.stack(np.broadcast_arrays(idx[:, None], idx[None, :]), axis=-1)
    return multiset_rank(np.sort(pairs, axis=-1))


@lru_cache(maxsize=32)
def triple_rank_table(n: int) -> np.ndarray:
    idx = np.arange(n)
    g = np.stack(np.meshgrid(idx, idx, idx, indexing="ij"), axis=-1)
    return multiset_rank(np.sort(g, axis=-1))


def contract(table: np.ndarray, w_first: np.ndarray,
             w_rest: list[np.ndarray]) -> np.ndarray:
    """Contract the symbol table against the rotated perturbations."""
    k = len(w_rest) + 1
    m_dim, n = w_first.shape
    if k == 1:
        return np.asarray(table) * w_first
    if k == 2:
        r2 = pair_rank_table(n)
        out = np.zeros((m_dim, n), dtype=np.complex128)
        w2 = w_rest[0]
        for m in range(n):
            out += table[:, r2[m]] * w_first[:, m:m + 1] * w2[m][None, :]
        return out
    if k == 3:
        r3 = triple_rank_table(n)
        out = np.zeros((m_dim, n), dtype=np.complex128)
        w2, w3 = w_rest
        for m in range(n):
            w1m = w_first[:, m]
            for p in range(n):
                coef = w2[m, p] * w3[p]
                out += table[:, r3[m, p]] * np.outer(w1m, coef)
        return out
    return _contract_general(table, w_first, w_rest)


def _contract_general(table, w_first, w_rest):
    """Direct (k+1)-fold sum for k >= 4; cost O(M N^k)."""
    k = len(w_rest) + 1
    m_dim, n = w_first.shape
    out = np.zeros((m_dim, n), dtype=np.complex128)
    js = np.arange(n)
    middle_count = k - 1
    for mids in np.ndindex(*([n] * middle_count)):
        chain = 1.0 + 0.0j
        for i in range(middle_count - 1):
            chain *= w_rest[i][mids[i], mids[i + 1]]
        if chain == 0.0:
            continue
        cols = np.sort(np.concatenate(
            [np.repeat(np.asarray(mids)[None, :], n, axis=0), js[:, None]], axis=1), axis=1)
        ranks = multiset_rank(cols)
        out += table[:, ranks] * np.outer(w_first[:, mids[0]] * chain,
                                          w_rest[-1][mids[-1]])
    return out


def contraction_cost(m_dim: int, n: int, k: int) -> int:
    """Multiply-add count of the direct contraction."""
    return int(m_dim * n ** k)
