"""Acceptance criteria, one test per criterion.

Each test prints a single pass/fail line (run with ``pytest -s`` to see them
on passing runs).  Tolerances are fixed here and not configurable.
"""

import numpy as np
import pytest

import traceshift as ts
from traceshift import fixtures as fx
from traceshift.harness import suite_bounds, suite_identities, suite_ssf
from traceshift.moi import MoiRequest, moi_eval, moi_trace
from traceshift.ssf import (
    dd_expansion_defect,
    first_order_ssf,
    gauge_uniqueness,
    growth_report,
    reconstruct_ssf,
    resolvent_expansion_defect,
    resolvent_transfer_defect,
)
from traceshift.taylor import (
    fd_derivative_oracle,
    gateaux_derivative,
    remainder_bound_report,
)


def report(num, name, ok, detail=""):
    line = f"[criterion {num:2d}] {name}: {'PASS' if ok else 'FAIL'}"
    if detail:
        line += f"  ({detail})"
    print(line)
    assert ok, line


def test_01_moi_derivative_equivalence():
    """k! T_{f[k]}(V,..,V) matches the central stencil for 50 seeded pairs."""
    families = {
        "exp-bump": (ts.bump_fixture(-1.7, 1.7, 1.1, depth=6), 1e-2, 2),
        "gaussian": (ts.gaussian_fixture(0.0, 0.9, depth=10), 1e-2, 2),
        "bspline": (ts.bspline_fixture(np.linspace(-2.2, 2.2, 8)), 2e-3, 0),
    }
    names = list(families)
    worst = 0.0
    for i in range(50):
        dim = 3 + i % 6
        alg = ts.TraceAlgebra.of([(dim, 1.0)])
        h0, v = fx.random_pair(alg, 1000 + i, h_scale=1.2, v_scale=0.15)
        f, h, rich = families[names[i % 3]]
        for k in (1, 2, 3):
            g = gateaux_derivative(f, h0, v, k)
            fd = fd_derivative_oracle(f, h0, v, k, h=h, richardson=rich)
            defect = (g - fd.element).operator_norm() / (1.0 + g.operator_norm())
            worst = max(worst, defect)
    report(1, "derivative representation vs finite differences",
           worst <= 1e-5, f"50 pairs, k=1..3, worst {worst:.2e}")


def test_02_first_order_trace_formula():
    """Quadrature of f' against the counting difference matches the trace."""
    f = ts.bump_fixture(-0.9, 0.9, 0.4, depth=2)
    worst = 0.0
    value_defect = 0.0
    for i in range(30):
        if i % 2:
            alg = ts.TraceAlgebra.of([(3 + i % 5, 1.0)])
            unit = 1.0
        else:
            alg = ts.TraceAlgebra.of([(3 + i % 5, 1.0), (2, 0.5)])
            unit = 0.5
        h0, v = fx.random_pair(alg, 2000 + i, h_scale=1.2, v_scale=0.25)
        eta = first_order_ssf(h0, v, -2.0, 2.0)
        lhs = eta.pair_with(f, 1)
        h = h0.shifted(v)
        rhs = (ts.trace(ts.apply_function(f, h))
               - ts.trace(ts.apply_function(f, h0))).real
        worst = max(worst, abs(lhs - rhs) / (1.0 + abs(rhs)))
        scaled = np.asarray(eta.values) / unit
        value_defect = max(value_defect, float(np.max(np.abs(scaled - np.round(scaled)))))
    report(2, "first-order trace formula",
           worst <= 1e-7 and value_defect <= 1e-10,
           f"30 fixtures, worst rel {worst:.2e}, step-value defect {value_defect:.1e}")


def test_03_first_order_bound_strict():
    """|tr R_1| <= (b-a) max projection trace * ||f'||, no failures allowed."""
    f = ts.bump_fixture(-0.9, 0.9, 0.5, depth=2)
    worst = 0.0
    for i in range(30):
        alg = ts.TraceAlgebra.of([(3 + i % 6, 1.0)] if i % 3 else
                                 [(3 + i % 6, 1.0), (2, 0.5)])
        h0, v = fx.random_pair(alg, 3000 + i, h_scale=1.5, v_scale=0.3)
        rep = remainder_bound_report(f, h0, v, 1, -2.0, 2.0, 0.5, skip_witness=True)
        assert rep.verdict == "pass"
        worst = max(worst, rep.ratio)
    report(3, "explicit first-order remainder bound",
           worst <= 1.0, f"30 fixtures, worst ratio {worst:.4f}")


def test_04_reconstruction_orders_two_three():
    """Held-out residuals and the scalar integral-remainder kernel."""
    alg = ts.TraceAlgebra.of([(5, 1.0)])
    h0, v = fx.separated_pair(alg, 11, (-2.0, 2.0), min_gap=0.06)
    worst_resid = 0.0
    for n in (2, 3):
        eta = reconstruct_ssf(h0, v, n, (-2.0, 2.0))
        worst_resid = max(worst_resid, eta.metadata["holdout_max_scaled_residual"])
    # 1x1 fixture: eta_2 = (v - x)+ up to a degree-1 polynomial
    alg1 = ts.TraceAlgebra.of([(1, 1.0)])
    h0s = ts.SelfAdjointOperator(alg1.element([np.zeros((1, 1))], hermitian=True))
    vval = 0.8
    vs = alg1.element([np.array([[vval]])], hermitian=True)
    eta2 = reconstruct_ssf(h0s, vs, 2, (-1.0, 2.0))
    xs = eta2.grid
    exact = np.where((xs > 0) & (xs <= vval), vval - xs, 0.0)
    design = np.vander(xs, 2)
    coef, *_ = np.linalg.lstsq(design, exact - eta2.values, rcond=None)
    resid = exact - eta2.values - design @ coef
    l2 = float(np.sqrt(np.sum(resid ** 2 * np.gradient(xs))))
    report(4, "shift-density reconstruction (n=2,3)",
           worst_resid <= 1e-5 and l2 <= 1e-4,
           f"worst held-out {worst_resid:.2e}, scalar-kernel L2 {l2:.2e}")


def test_05_uniqueness_modulo_polynomials():
    """Disjoint test families agree up to a degree <= n-1 polynomial."""
    alg = ts.TraceAlgebra.of([(5, 1.0)])
    worst = 0.0
    for n in (2, 3):
        h0, v = fx.separated_pair(alg, 40 + n, (-2.0, 2.0), min_gap=0.06)
        ea = reconstruct_ssf(h0, v, n, (-2.0, 2.0), layers=(0.0, 0.5))
        eb = reconstruct_ssf(h0, v, n, (-2.0, 2.0), layers=(0.25, 0.75))
        rep = gauge_uniqueness(ea, eb, n)
        assert rep.passed
        worst = max(worst, rep.relative)
    report(5, "uniqueness modulo polynomials (n=2,3)",
           worst <= 1e-6, f"worst relative residual {worst:.2e}")


def test_06_symbol_and_resolvent_identities():
    """Scalar expansion, operator expansion, and the transfer identity."""
    f = ts.gaussian_fixture(0.0, 0.9, depth=10)
    rng = fx.rng_from_seed(77)
    worst_dd = 0.0
    for i in range(100):
        size = 2 + i % 4
        nodes = rng.uniform(-1.5, 1.5, size=size)
        if i % 4 == 1 and size >= 2:
            nodes[1] = nodes[0]
        if i % 4 == 3:
            nodes[:] = nodes[0]
        worst_dd = max(worst_dd, dd_expansion_defect(f, nodes))
    worst_op = 0.0
    for n in (2, 3):
        for seed in range(5):
            dim = 4 + seed % 3
            alg = ts.TraceAlgebra.of([(dim, 1.0)])
            h0, v = fx.random_pair(alg, 4000 + 10 * n + seed, v_scale=0.4)
            worst_op = max(worst_op, resolvent_expansion_defect(
                f, h0, v, 1.0, n, skip_witness=True))
    worst_tr = 0.0
    for i in range(30):
        alg = ts.TraceAlgebra.of([(3 + i % 4, 1.0)])
        h0, v = fx.random_pair(alg, 5000 + i, v_scale=0.3)
        worst_tr = max(worst_tr, resolvent_transfer_defect(f, h0, v))
    report(6, "expansion identities",
           worst_dd <= 1e-9 and worst_op <= 1e-8 and worst_tr <= 1e-9,
           f"scalar {worst_dd:.2e}, operator {worst_op:.2e}, transfer {worst_tr:.2e}")


def test_07_growth_envelope_stability():
    """Empirical envelope constant is finite and stable under doubling."""
    def growth_k(i, n):
        dim = 3 + i % 4
        alg = ts.TraceAlgebra.of([(dim, 1.0)])
        h0, v = fx.random_pair(alg, 5000 + i, h_scale=1.0, v_scale=0.3)
        r = max(2.0, 2.0 * float(np.max(np.abs(h0.shifted(v).spectrum()))) + 1.0)
        if n == 1:
            eta = first_order_ssf(h0, v, -r, r)
        else:
            eta = reconstruct_ssf(h0, v, 2, (-r, r), grid_size=65)
        return growth_report(eta, h0, v, n).k_empirical

    detail = []
    ok = True
    for n in (1, 2):
        ks = [growth_k(i, n) for i in range(200)]
        k100, k200 = max(ks[:100]), max(ks)
        ok = ok and np.isfinite(k200) and k200 > 0 and (k200 - k100) <= 0.10 * k100
        detail.append(f"n={n}: K100={k100:.4f} K200={k200:.4f}")
    report(7, "growth envelope constant", ok, "; ".join(detail))


def test_08_bump_certification():
    """Plateau, support, sup norm, and trace-norm domination by the window."""
    bf = ts.BumpFunction(-1.0, 1.0, 0.5, depth=4)
    plateau = float(np.max(np.abs(bf.value(np.linspace(-1.0, 1.0, 2001)) - 1.0)))
    outside = float(np.max(np.abs(bf.value(
        np.array([-1.5, -1.6, 1.5, 1.7, -5.0, 5.0])))))
    sup = float(np.max(bf.value(np.linspace(bf.a_eps, bf.b_eps, 20001))))
    proj_ok = True
    detail_ratio = 0.0
    for seed in range(10):
        alg = ts.TraceAlgebra.of([(4 + seed % 4, 1.0), (2, 0.5)])
        h0, _ = fx.random_pair(alg, 6000 + seed, h_scale=1.6)
        phi_l1 = ts.schatten_norm(ts.apply_function(bf.value, h0), 1)
        proj = ts.spectral_projection(h0, ts.Interval.open(bf.a_eps, bf.b_eps)).trace()
        proj_ok = proj_ok and phi_l1 <= proj + 1e-12 * (1 + proj)
        detail_ratio = max(detail_ratio, phi_l1 / proj if proj else 0.0)
    ok = plateau <= 1e-12 and outside == 0.0 and abs(sup - 1.0) <= 1e-12 and proj_ok
    report(8, "bump certification", ok,
           f"plateau {plateau:.1e}, leak {outside:.1e}, sup {sup:.15f}, "
           f"max tr-ratio {detail_ratio:.3f}")


def test_09_cyclicity_reduction():
    """Reduced-contraction traces equal full-contraction traces."""
    f = ts.bump_fixture(-1.6, 1.6, 0.9, depth=4)
    worst = 0.0
    for i in range(30):
        k = 1 + i % 3
        alg = ts.TraceAlgebra.of([(3 + i % 5, 1.0)])
        h0, _ = fx.random_pair(alg, 7000 + i)
        vs = tuple(fx.random_hermitian(alg, fx.rng_from_seed(7100 + 10 * i + j),
                                       scale=0.5) for j in range(k))
        req = MoiRequest(k, base=h0, perturbations=vs, symbol=f)
        reduced = moi_trace(req)
        full = moi_eval(req).trace
        worst = max(worst, abs(reduced - full) / (1.0 + abs(full)))
    report(9, "trace cyclicity reduction", worst <= 1e-9,
           f"30 fixtures, k<=3, worst rel {worst:.2e}")


def test_10_determinism(tmp_path):
    """Fixed seeds reproduce byte-identical CSV bodies."""
    outs = []
    for tag in ("a", "b"):
        d = tmp_path / tag
        suite_identities(7, 4, 2).write(str(d))
        suite_bounds(3, 4, 2).write(str(d))
        suite_ssf(5, 4, 2, grid_size=129).write(str(d))
        outs.append(d)
    same = all((outs[0] / name).read_bytes() == (outs[1] / name).read_bytes()
               for name in ("identities.csv", "bounds.csv", "ssf.csv"))
    report(10, "deterministic verification output", same,
           "identities/bounds/ssf CSV bodies byte-identical")
