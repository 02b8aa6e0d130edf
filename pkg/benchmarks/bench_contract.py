#!/usr/bin/env python3
"""Benchmark: compiled contraction kernel vs the NumPy fallback.

Times the k-fold eigenbasis contraction at sizes where the O(N^(k+1))
multiply-add count dominates, holding the symbol table fixed (its
construction cost is shared by both backends).  Run after building the
extension in place:

    python3 setup.py build_ext --inplace
    python3 benchmarks/bench_contract.py [--sizes 16,32,64] [--repeat 3]
"""

import argparse
import time

import numpy as np

from traceshift import _contract, _contract_py
from traceshift._contract_py import num_multisets


def bench_once(k: int, n: int, repeat: int, rng) -> dict:
    table = rng.standard_normal((n, num_multisets(n, k))) \
        + 1j * rng.standard_normal((n, num_multisets(n, k)))
    w_first = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    w_rest = [rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
              for _ in range(k - 1)]

    def time_backend(backend):
        best = np.inf
        for _ in range(repeat):
            t0 = time.perf_counter()
            out = _contract.contract(table, w_first, w_rest, backend=backend)
            best = min(best, time.perf_counter() - t0)
        return best, out

    t_pure, out_pure = time_backend("pure")
    row = {"k": k, "n": n, "madds": n ** (k + 1), "pure_s": t_pure}
    if _contract.BACKEND == "compiled":
        t_comp, out_comp = time_backend("compiled")
        row["compiled_s"] = t_comp
        row["speedup"] = t_pure / t_comp
        row["max_diff"] = float(np.max(np.abs(out_pure - out_comp)))
    return row


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--sizes", default="16,32,64")
    parser.add_argument("--orders", default="2,3")
    parser.add_argument("--repeat", type=int, default=3)
    args = parser.parse_args()
    sizes = [int(s) for s in args.sizes.split(",")]
    orders = [int(s) for s in args.orders.split(",")]
    rng = np.random.default_rng(0)

    print(f"available backend: {_contract.BACKEND}")
    header = "k,n,madds,pure_s,compiled_s,speedup,max_diff"
    print(header)
    for k in orders:
        for n in sizes:
            row = bench_once(k, n, args.repeat, rng)
            print(",".join(str(row.get(col, "")) for col in header.split(",")))


if __name__ == "__main__":
    main()
