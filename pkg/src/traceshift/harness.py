"""Batch experiment runners behind the CLI.

Each suite builds seeded fixtures, runs the corresponding checks, and
returns a :class:`VerificationReport`; ``run_experiment`` dispatches a
parsed config, writes the report and any requested plot data into the
output directory (atomically), and hands the report back for exit-code
logic.  Fixtures are independent, so suites can fan out over a thread pool
when ``workers > 1``; records are collected in fixture order either way.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import fixtures, storage
from .algebra import TraceAlgebra, apply_function, resolvent, schatten_norm, trace
from .bump import BumpFunction
from .config import ExperimentConfig
from .constants import ConstantStore, ensure_symbol_constant, estimate_symbol_constant, output_dir
from .errors import ConfigError
from .functions import (
    bump_fixture,
    class_witness,
    gaussian_fixture,
    product,
    sup_ratio_report,
    u_power,
    xn_xm1n_fixture,
)
from .moi import MoiRequest, compact_trace_bound, moi_eval, moi_trace
from .reports import VerificationReport, emit_plotdata
from .ssf import (
    dd_expansion_defect,
    first_order_ssf,
    gauge_uniqueness,
    growth_report,
    reconstruct_ssf,
    resolvent_expansion_defect,
    resolvent_transfer_defect,
)
from .taylor import remainder_bound_report, taylor_remainder

DEFAULT_PLOTS = {
    "remainder": ("bound-margin",),
    "ssf": ("ssf", "growth"),
    "verify-identities": (),
    "verify-bounds": ("bound-margin",),
    "bump": (),
    "constants": ("ratios",),
}


def _pmap(fn, items, workers: int):
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def _algebra_for(config_dim: int, algebra_text: str | None) -> TraceAlgebra:
    if algebra_text:
        return fixtures.parse_algebra(algebra_text)
    return TraceAlgebra.of([(config_dim, 1.0)])


# ---------------------------------------------------------------------------
# suites
# ---------------------------------------------------------------------------

def suite_identities(seed: int, dim: int, order: int, *, count: int = 8,
                     workers: int = 1) -> VerificationReport:
    """Divided-difference expansion, resolvent transfer/expansion, cyclicity."""
    report = VerificationReport("identities")
    alg = TraceAlgebra.of([(dim, 1.0)])
    rng = fixtures.rng_from_seed(seed)
    f = gaussian_fixture(0.0, 0.9, depth=10)

    n_id = max(2, min(order + 1, 5))
    for i in range(count):
        nodes = rng.uniform(-1.5, 1.5, size=n_id)
        if i % 3 == 1 and n_id >= 2:
            nodes[1] = nodes[0]
        if i % 3 == 2:
            nodes[:] = nodes[0]
        defect = dd_expansion_defect(f, nodes)
        report.add("symbol-expansion", f"nodes-{i}", defect, 1e-9,
                   "pass" if defect <= 1e-9 else "fail")

    def transfer_case(i):
        h0, v = fixtures.random_pair(alg, seed + 100 + i)
        return resolvent_transfer_defect(f, h0, v)

    for i, defect in enumerate(_pmap(transfer_case, list(range(max(3, count // 2))), workers)):
        report.add("resolvent-transfer", f"pair-{i}", defect, 1e-9,
                   "pass" if defect <= 1e-9 else "fail")

    for n in range(2, min(order, 3) + 1):
        h0, v = fixtures.random_pair(alg, seed + 200 + n, v_scale=0.4)
        defect = resolvent_expansion_defect(f, h0, v, 1.0, n, skip_witness=True)
        report.add("resolvent-expansion", f"order-{n}", defect, 1e-8,
                   "pass" if defect <= 1e-8 else "fail")

    h0, v = fixtures.random_pair(alg, seed + 300)
    h = h0.shifted(v)
    anchor = moi_eval(MoiRequest(1, base=h0, perturbations=(v,), symbol=f,
                                 first=h)).element
    diff = apply_function(f, h) - apply_function(f, h0)
    defect = (anchor - diff).operator_norm() / (1.0 + diff.operator_norm())
    report.add("perturbation-anchor", "pair-0", defect, 1e-9,
               "pass" if defect <= 1e-9 else "fail")

    for k in range(1, min(order, 3) + 1):
        h0, _ = fixtures.random_pair(alg, seed + 400 + k)
        vs = tuple(fixtures.random_hermitian(alg, fixtures.rng_from_seed(seed + 500 + k + 7 * j),
                                             scale=0.5) for j in range(k))
        req = MoiRequest(order=k, base=h0, perturbations=vs, symbol=f)
        reduced = moi_trace(req)
        full = moi_eval(req).trace
        rel = abs(reduced - full) / (1.0 + abs(full))
        report.add("cyclicity-reduction", f"k-{k}", rel, 1e-9,
                   "pass" if rel <= 1e-9 else "fail")
    return report


def suite_bounds(seed: int, dim: int, order: int, *, window=(-2.0, 2.0),
                 eps: float = 0.5, count: int = 5, workers: int = 1,
                 store: ConstantStore | None = None) -> VerificationReport:
    """Explicit bound checks plus informational reports with empirical constants."""
    report = VerificationReport("bounds")
    alg = TraceAlgebra.of([(dim, 1.0)])
    a, b = window
    store = store if store is not None else ConstantStore()
    for k in range(1, max(order - 1, 1) + 1):
        ensure_symbol_constant(k, store=store, instances=12, seed=seed)
    f_in = bump_fixture(a + 0.45 * (b - a), b - 0.45 * (b - a), 0.30 * (b - a), depth=max(order, 2))
    margin_rows = []

    def bound_case(i):
        h0, v = fixtures.random_pair(alg, seed + i, h_scale=0.45 * (b - a), v_scale=0.2)
        out = []
        for n in range(1, order + 1):
            out.append((n, remainder_bound_report(f_in, h0, v, n, a, b, eps,
                                                  store=store, skip_witness=True)))
        return i, out

    for i, reps in _pmap(bound_case, list(range(count)), workers):
        for n, rep in reps:
            report.add("remainder-bound", f"pair-{i}-n{n}", rep.ratio, 1.0, rep.verdict,
                       f"trace={rep.trace_abs:.6g}; bound={rep.bound_value:.6g}")
            margin_rows.append((f"pair-{i}-n{n}", rep.trace_abs, rep.bound_value))

    h0, v = fixtures.random_pair(alg, seed + 71, h_scale=0.45 * (b - a), v_scale=0.25)
    for k in range(1, min(order, 2) + 1):
        vs = [fixtures.random_hermitian(alg, fixtures.rng_from_seed(seed + 80 + j), scale=0.5)
              for j in range(k)]
        rep = compact_trace_bound(f_in, h0, vs, a, b, eps, store=store, skip_witness=True)
        report.add("moi-trace-bound", f"k-{k}", rep.ratio, 1.0,
                   "pass" if rep.ratio <= 1.0 else "info",
                   f"constant={rep.constant:.6g}")
        report.add("bump-partition", f"phi-l1-k{k}", rep.phi_l1, rep.proj_trace_eps,
                   "pass" if rep.phi_l1_within_projection else "fail",
                   "trace-norm of bump vs window projection")
        margin_rows.append((f"moi-k{k}", rep.trace_abs, rep.bound))

    g = gaussian_fixture(0.0, 0.8, depth=4)
    rec = taylor_remainder(g, h0, v, 1)
    gu = product(g, u_power(1, depth=4))
    bound = gu.sup_norm(0, (-24.0, 24.0), samples=1 << 15) \
        * (2.0 + v.operator_norm()) * schatten_norm(resolvent(h0, 1j), 1)
    report.add("first-order-resolvent-bound", "gaussian", abs(rec.trace), bound,
               "pass" if abs(rec.trace) <= bound else "fail")

    ratio = sup_ratio_report(f_in, a, b, min(order, f_in.depth), require_witness=False)
    report.add("lemma-sup-ratio", "bump", ratio.max_ratio, 1.0 + 1e-9,
               "pass" if ratio.passed else "fail")

    bf = f_in.payload
    xs = np.linspace(bf.a, bf.b, 101)
    plateau_defect = float(np.max(np.abs(bf.value(xs) - 1.0)))
    outside = np.array([bf.a_eps - 0.3, bf.a_eps, bf.b_eps, bf.b_eps + 0.3])
    leak = float(np.max(np.abs(bf.value(outside))))
    wide = np.linspace(bf.a_eps, bf.b_eps, 10001)
    sup = float(np.max(bf.value(wide)))
    report.add("bump-partition", "plateau", plateau_defect, 1e-12,
               "pass" if plateau_defect <= 1e-12 else "fail")
    report.add("bump-partition", "support", leak, 0.0,
               "pass" if leak == 0.0 else "fail")
    report.add("bump-partition", "sup-norm", sup, 1.0,
               "pass" if abs(sup - 1.0) <= 1e-12 else "fail")

    wit = class_witness(xn_xm1n_fixture(min(order, 3)), "Fc", min(order, 3), (a, b))
    report.add("class-witness", f"xn-xm1n-Fc{min(order, 3)}", float(wit.holds), 1.0,
               "pass" if wit.holds else "fail")

    report.add_series("bound_margin", ("fixture", "trace_abs", "bound"), margin_rows)
    report.constants_snapshot = store.snapshot()
    return report


def suite_ssf(seed: int, dim: int, order: int, *, window=(-2.0, 2.0),
              grid_size: int = 257, count: int = 5,
              workers: int = 1) -> VerificationReport:
    """Counting-function trace formula, reconstruction, uniqueness, growth."""
    report = VerificationReport("ssf")
    a, b = window
    alg = TraceAlgebra.of([(dim, 1.0)])
    alg_weighted = TraceAlgebra.of([(dim, 1.0), (2, 0.5)])
    f_in = bump_fixture(a + 0.4 * (b - a), b - 0.4 * (b - a), 0.25 * (b - a), depth=max(order, 2))

    def counting_case(i):
        algebra = alg_weighted if i % 2 else alg
        h0, v = fixtures.random_pair(algebra, seed + i, h_scale=0.4 * (b - a), v_scale=0.15)
        eta = first_order_ssf(h0, v, a, b)
        lhs = eta.pair_with(f_in, 1)
        h = h0.shifted(v)
        rhs = (trace(apply_function(f_in, h)) - trace(apply_function(f_in, h0))).real
        return abs(lhs - rhs) / (1.0 + abs(rhs))

    for i, rel in enumerate(_pmap(counting_case, list(range(count)), workers)):
        report.add("counting-first-order", f"pair-{i}", rel, 1e-7,
                   "pass" if rel <= 1e-7 else "fail")

    h0, v = fixtures.separated_pair(alg, seed + 37, (a, b),
                                    min_gap=0.02 * (b - a), h_scale=0.4 * (b - a),
                                    v_scale=0.12 * (b - a))
    eta_last = None
    for n in range(2, max(order, 2) + 1):
        eta = reconstruct_ssf(h0, v, n, (a, b), grid_size=grid_size)
        resid = eta.metadata["holdout_max_scaled_residual"]
        report.add("ssf-reconstruction", f"order-{n}", resid, 1e-5,
                   "pass" if resid <= 1e-5 else "fail",
                   f"l1={eta.certified_l1:.6g}; cells={eta.metadata['cells']}")
        eta_last = eta

    n_uni = min(max(order, 2), 3)
    eta_a = reconstruct_ssf(h0, v, n_uni, (a, b), grid_size=grid_size,
                            layers=(0.0, 0.5))
    eta_b = reconstruct_ssf(h0, v, n_uni, (a, b), grid_size=grid_size,
                            layers=(0.25, 0.75))
    uni = gauge_uniqueness(eta_a, eta_b, n_uni)
    report.add("ssf-uniqueness", f"order-{n_uni}", uni.relative, 1e-6,
               "pass" if uni.passed else "fail")

    r_half = max(abs(a), abs(b), float(np.max(np.abs(h0.shifted(v).spectrum()))) + 0.5)
    eta1 = first_order_ssf(h0, v, -2 * r_half, 2 * r_half)
    g1 = growth_report(eta1, h0, v, 1)
    report.add("ssf-growth", "order-1", g1.k_empirical, math.inf, "info",
               f"argmax={g1.argmax:.4g}")
    rows = [(float(x), float(abs(val)), float(g1.envelope(x)))
            for x, val in zip(eta1.grid[::8], eta1.values[::8])]
    report.add_series("growth", ("x", "abs_eta", "envelope"), rows)
    if eta_last is not None:
        report.add_series("ssf", ("lambda", "eta"),
                          [(float(x), float(y)) for x, y in zip(eta_last.grid, eta_last.values)])
    return report


# ---------------------------------------------------------------------------
# tasks
# ---------------------------------------------------------------------------

def task_remainder(cfg: ExperimentConfig) -> VerificationReport:
    report = VerificationReport("remainder")
    alg = _algebra_for(cfg.dim, cfg.algebra)
    a, b = cfg.window
    store = ConstantStore(cfg.store) if cfg.store else ConstantStore()
    f_in = bump_fixture(a + 0.45 * (b - a), b - 0.45 * (b - a), 0.3 * (b - a),
                        depth=max(cfg.order, 2))
    rows, detail_rows = [], []
    outdir = cfg.output or output_dir()
    for i in range(cfg.fixtures):
        seed = cfg.seed + i
        h0, v = fixtures.random_pair(alg, seed, h_scale=0.45 * (b - a), v_scale=0.2)
        rep = remainder_bound_report(f_in, h0, v, cfg.order, a, b, cfg.eps,
                                     store=store, skip_witness=True)
        report.add("remainder-bound", f"pair-{i}", rep.ratio, 1.0, rep.verdict)
        rows.append((f"pair-{i}", rep.trace_abs, rep.bound_value))
        detail_rows.append((cfg.order, rep.function, rep.trace_abs,
                            rep.constants.value, rep.ratio, seed))
        if cfg.dump_elements:
            rec = taylor_remainder(f_in, h0, v, cfg.order)
            storage.save_element(os.path.join(outdir, f"remainder-{i}.op"), rec.remainder)
    report.add_series("bound_margin", ("fixture", "trace_abs", "bound"), rows)
    lines = ["n,function,trace,bound_constant,ratio,seed"]
    lines += [",".join(format(x, ".17g") if isinstance(x, float) else str(x)
                       for x in row) for row in detail_rows]
    os.makedirs(outdir, exist_ok=True)
    storage.atomic_write_text(os.path.join(outdir, "remainder-rows.csv"),
                              "\n".join(lines) + "\n")
    report.constants_snapshot = store.snapshot()
    return report


def task_ssf(cfg: ExperimentConfig) -> VerificationReport:
    report = suite_ssf(cfg.seed, cfg.dim, cfg.order, window=cfg.window,
                       grid_size=cfg.grid_size, workers=cfg.workers)
    report.name = "ssf-task"
    alg = _algebra_for(cfg.dim, cfg.algebra)
    h0, v = fixtures.random_pair(alg, cfg.seed + 37,
                                 h_scale=0.4 * (cfg.window[1] - cfg.window[0]), v_scale=0.2)
    outdir = cfg.output or output_dir()
    os.makedirs(outdir, exist_ok=True)
    if cfg.order >= 2:
        eta = reconstruct_ssf(h0, v, cfg.order, cfg.window, grid_size=cfg.grid_size)
    else:
        eta = first_order_ssf(h0, v, cfg.window[0], cfg.window[1], grid_size=cfg.grid_size)
    growth = growth_report(eta, h0, v)
    eta.metadata["empirical_growth_constant"] = growth.k_empirical
    eta.write_csv(os.path.join(outdir, "eta.csv"))
    eta.write_sidecar(os.path.join(outdir, "eta.json"))
    return report


def task_bump(cfg: ExperimentConfig) -> VerificationReport:
    report = VerificationReport("bump")
    bf = BumpFunction(cfg.a, cfg.b, cfg.eps, depth=min(cfg.depth, 8))
    xs = np.linspace(bf.a_eps - 0.5 * cfg.eps, bf.b_eps + 0.5 * cfg.eps, cfg.samples)
    vals = bf.value(xs)
    in_range = bool(np.all((vals >= 0.0) & (vals <= 1.0)))
    plateau = np.linspace(cfg.a, cfg.b, 257)
    plateau_defect = float(np.max(np.abs(bf.value(plateau) - 1.0)))
    report.add("bump-partition", "range", float(in_range), 1.0,
               "pass" if in_range else "fail")
    report.add("bump-partition", "plateau", plateau_defect, 1e-12,
               "pass" if plateau_defect <= 1e-12 else "fail")
    outdir = cfg.output or output_dir()
    os.makedirs(outdir, exist_ok=True)
    lines = ["lambda,phi"]
    lines += [f"{format(float(x), '.17g')},{format(float(p), '.17g')}"
              for x, p in zip(xs, vals)]
    storage.atomic_write_text(os.path.join(outdir, "bump-samples.csv"),
                              "\n".join(lines) + "\n")
    return report


def task_constants(cfg: ExperimentConfig) -> VerificationReport:
    report = VerificationReport("constants")
    store = ConstantStore(cfg.store) if cfg.store else ConstantStore()
    rows = []
    for k in range(1, cfg.order + 1):
        sup = estimate_symbol_constant(k, instances=cfg.instances, seed=cfg.seed, store=store)
        report.add("moi-norm-ratio", f"k-{k}", sup, math.inf, "info",
                   f"instances={cfg.instances}")
        rows.append((k, f"2x{k}", cfg.seed, sup, store.best("moi_norm_c", {"alpha": 2.0, "k": k})))
    report.add_series("ratios", ("k", "alphas", "seed", "ratio", "running_sup"), rows)
    report.constants_snapshot = store.snapshot()
    return report


def run_experiment(cfg: ExperimentConfig) -> VerificationReport:
    """Dispatch a parsed config, write report + plot data, return the report."""
    if cfg.task == "verify-identities":
        report = suite_identities(cfg.seed, cfg.dim, cfg.order, workers=cfg.workers)
    elif cfg.task == "verify-bounds":
        store = ConstantStore(cfg.store) if cfg.store else None
        report = suite_bounds(cfg.seed, cfg.dim, cfg.order, window=cfg.window,
                              eps=cfg.eps, workers=cfg.workers, store=store)
    elif cfg.task == "ssf":
        report = task_ssf(cfg)
    elif cfg.task == "remainder":
        report = task_remainder(cfg)
    elif cfg.task == "bump":
        report = task_bump(cfg)
    elif cfg.task == "constants":
        report = task_constants(cfg)
    else:  # pragma: no cover - parse_config guards this
        raise ConfigError(f"unhandled task {cfg.task!r}")
    outdir = cfg.output or output_dir()
    report.write(outdir)
    for kind in (cfg.plots if cfg.plots is not None else DEFAULT_PLOTS[cfg.task]):
        emit_plotdata(report, kind, outdir)
    return report
