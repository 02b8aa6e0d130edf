"""Append-only store for empirically tracked universal constants.

Norm bounds on operator integrals carry universal constant factors whose
numeric values are not available; they are maintained as running suprema of
observed ratios over seeded randomized instance families.  The store is a
JSON-lines log: appends never rewrite history, and reading merges the log
into per-key suprema.  Values from here feed bound reports as estimates and
are never asserted as pass/fail thresholds.
"""

from __future__ import annotations

import json
import os
from typing import Iterable

from . import fixtures
from .errors import DomainError


def output_dir() -> str:
    return os.environ.get("TRACESHIFT_OUTDIR", os.path.join(os.getcwd(), "traceshift-out"))


def default_store_path() -> str:
    return os.path.join(output_dir(), "constants.jsonl")


def _key_id(kind: str, key: dict) -> str:
    parts = [kind] + [f"{k}={key[k]:g}" if isinstance(key[k], float) else f"{k}={key[k]}"
                      for k in sorted(key)]
    return "|".join(parts)


class ConstantStore:
    """Running suprema of observed bound ratios, persisted as JSON lines."""

    def __init__(self, path: str | None = None):
        self.path = path
        self._merged: dict[str, dict] = {}
        if path and os.path.exists(path):
            with open(path, "r", encoding="utf-8") as fh:
                for line in fh:
                    line = line.strip()
                    if line:
                        self._absorb(json.loads(line))

    def _absorb(self, rec: dict) -> None:
        kid = _key_id(rec["kind"], rec["key"])
        cur = self._merged.get(kid)
        if cur is None or rec["value"] > cur["value"]:
            self._merged[kid] = {"kind": rec["kind"], "key": rec["key"],
                                 "value": rec["value"], "count": 1}
        if cur is not None:
            self._merged[kid]["count"] = cur.get("count", 1) + 1

    def append(self, kind: str, key: dict, value: float, seed=None, meta=None) -> None:
        rec = {"kind": kind, "key": key, "value": float(value)}
        if seed is not None:
            rec["seed"] = seed
        if meta:
            rec["meta"] = meta
        self._absorb(rec)
        if self.path:
            os.makedirs(os.path.dirname(os.path.abspath(self.path)), exist_ok=True)
            with open(self.path, "a", encoding="utf-8") as fh:
                fh.write(json.dumps(rec, sort_keys=True) + "\n")

    def best(self, kind: str, key: dict) -> float | None:
        rec = self._merged.get(_key_id(kind, key))
        return None if rec is None else float(rec["value"])

    def snapshot(self) -> dict:
        return {kid: {"value": rec["value"], "count": rec.get("count", 1)}
                for kid, rec in sorted(self._merged.items())}


def estimate_symbol_constant(k: int, *, instances: int = 40, seed: int = 1013,
                             store: ConstantStore | None = None,
                             dims: Iterable[int] = (4, 5, 6, 7, 8)) -> float:
    """Running supremum of ||T||_2 / (||f^(k)||_inf prod ||V||_{2k}) over a
    seeded random family; persisted under the (alpha=2, k) key when a store
    is given."""
    from .algebra import TraceAlgebra
    from .functions import bump_fixture, gaussian_fixture
    from .moi import MoiRequest, norm_bound_ratio

    if k < 1:
        raise DomainError("order must be >= 1")
    dims = tuple(dims)
    rng = fixtures.rng_from_seed(seed)
    symbols = [gaussian_fixture(0.0, 0.8, depth=k + 2),
               bump_fixture(-1.2, 1.2, 0.8, depth=k + 2)]
    sup = 0.0
    for i in range(instances):
        dim = dims[i % len(dims)]
        alg = TraceAlgebra.of([(dim, 1.0)])
        h0 = fixtures.random_selfadjoint(alg, rng, scale=1.5)
        vs = tuple(fixtures.random_hermitian(alg, rng, scale=0.8) for _ in range(k))
        f = symbols[i % len(symbols)]
        req = MoiRequest(order=k, base=h0, perturbations=vs, symbol=f)
        rep = norm_bound_ratio(req, 2.0, (2.0 * k,) * k, store=store, seed=seed + i)
        sup = max(sup, rep.ratio)
    return sup


def ensure_symbol_constant(k: int, *, store: ConstantStore | None = None,
                           instances: int = 24, seed: int = 1013) -> float:
    """Fetch the stored estimate for the (alpha=2, k) symbol constant, running
    the default randomized family once if the store has nothing yet."""
    key = {"alpha": 2.0, "k": k}
    if store is not None:
        cached = store.best("moi_norm_c", key)
        if cached is not None:
            return cached
    value = estimate_symbol_constant(k, instances=instances, seed=seed, store=store)
    return value if store is None else store.best("moi_norm_c", key)
