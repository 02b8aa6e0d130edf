"""Backend selection for the contraction kernels.

The compiled extension is preferred when importable; otherwise the NumPy
fallback runs the identical contract.  Set TRACESHIFT_PURE=1 to force the
fallback (used by the benchmark and the parity tests).
"""

from __future__ import annotations

import os

import numpy as np

from . import _contract_py

if os.environ.get("TRACESHIFT_PURE") == "1":
    _kernels = None
else:
    try:
        from . import _kernels  # type: ignore[attr-defined]
    except ImportError:
        _kernels = None

BACKEND = "compiled" if _kernels is not None else "pure"

multiset_rank = _contract_py.multiset_rank
num_multisets = _contract_py.num_multisets
contraction_cost = _contract_py.contraction_cost


def contract(table: np.ndarray, w_first: np.ndarray,
             w_rest: list[np.ndarray], backend: str | None = None) -> np.ndarray:
    """Contract a symbol table against rotated perturbations (see _contract_py)."""
    use = backend or BACKEND
    k = len(w_rest) + 1
    if use == "compiled" and _kernels is not None and k in (2, 3):
        table = np.ascontiguousarray(table, dtype=np.complex128)
        w_first = np.ascontiguousarray(w_first, dtype=np.complex128)
        rest = [np.ascontiguousarray(w, dtype=np.complex128) for w in w_rest]
        if k == 2:
            return _kernels.contract2(table, w_first, rest[0])
        return _kernels.contract3(table, w_first, rest[0], rest[1])
    return _contract_py.contract(table, w_first, w_rest)
