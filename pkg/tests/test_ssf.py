import numpy as np
import pytest

import traceshift as ts
from traceshift import fixtures as fx
from traceshift.errors import DomainError
from traceshift.ssf import (
    PiecewisePoly,
    dd_expansion_defect,
    first_order_ssf,
    gauge_uniqueness,
    growth_report,
    jittered_grid,
    l1_bound_report,
    reconstruct_ssf,
    resolvent_expansion_defect,
    resolvent_transfer_defect,
)
from traceshift.taylor import remainder_bound_constant, taylor_remainder


def rank_one_fixture(weight=1.0):
    alg = ts.TraceAlgebra.of([(1, weight)])
    h0 = ts.SelfAdjointOperator(alg.element([np.zeros((1, 1))], hermitian=True))
    v = alg.element([np.array([[1.0]])], hermitian=True)
    return alg, h0, v


class TestFirstOrder:
    def test_rank_one_step(self):
        _, h0, v = rank_one_fixture()
        eta = first_order_ssf(h0, v, -1.0, 2.0)
        assert eta(0.5) == pytest.approx(1.0)
        assert eta(1.5) == pytest.approx(0.0)
        assert eta(-0.5) == pytest.approx(0.0)
        assert eta.certified_l1 == pytest.approx(1.0)
        f = ts.bump_fixture(-0.8, 1.7, 0.2, depth=2)
        lhs = eta.pair_with(f, 1)
        rhs = float(f(np.array([1.0]))[0] - f(np.array([0.0]))[0])
        assert lhs == pytest.approx(rhs, abs=1e-12)

    def test_zero_perturbation(self, alg4):
        h0, _ = fx.random_pair(alg4, 3)
        eta = first_order_ssf(h0, alg4.zero(), -2.0, 2.0)
        assert np.all(eta.values == 0.0)
        assert eta.certified_l1 == 0.0

    def test_weighted_counting(self):
        _, h0, v = rank_one_fixture(weight=0.5)
        eta = first_order_ssf(h0, v, -1.0, 2.0)
        assert eta(0.5) == pytest.approx(0.5)
        assert eta.certified_l1 == pytest.approx(0.5)

    def test_trace_formula_exactness(self, alg_weighted):
        f = ts.bump_fixture(-0.9, 0.9, 0.4, depth=2)
        for seed in range(6):
            h0, v = fx.random_pair(alg_weighted, 300 + seed, h_scale=1.2, v_scale=0.2)
            eta = first_order_ssf(h0, v, -2.0, 2.0)
            lhs = eta.pair_with(f, 1)
            h = h0.shifted(v)
            rhs = (ts.trace(ts.apply_function(f, h))
                   - ts.trace(ts.apply_function(f, h0))).real
            assert abs(lhs - rhs) <= 1e-7 * (1 + abs(rhs))

    def test_integer_values_under_plain_trace(self, alg5):
        h0, v = fx.random_pair(alg5, 9, v_scale=0.4)
        eta = first_order_ssf(h0, v, -2.0, 2.0)
        vals = np.asarray(eta.values)
        assert np.max(np.abs(vals - np.round(vals))) < 1e-12


class TestReconstruction:
    def test_requires_order_two(self, pair5):
        h0, v = pair5
        with pytest.raises(DomainError):
            reconstruct_ssf(h0, v, 1, (-2.0, 2.0))

    def test_scalar_taylor_kernel(self):
        # 1x1 fixture: eta_2 is the integral-remainder kernel (v - x)+ up to
        # a degree-1 polynomial
        alg = ts.TraceAlgebra.of([(1, 1.0)])
        h0 = ts.SelfAdjointOperator(alg.element([np.zeros((1, 1))], hermitian=True))
        vval = 0.8
        v = alg.element([np.array([[vval]])], hermitian=True)
        eta = reconstruct_ssf(h0, v, 2, (-1.0, 2.0), grid_size=257)
        xs = eta.grid
        exact = np.where((xs > 0) & (xs <= vval), vval - xs, 0.0)
        design = np.vander(xs, 2)
        coef, *_ = np.linalg.lstsq(design, exact - eta.values, rcond=None)
        resid = exact - eta.values - design @ coef
        l2 = float(np.sqrt(np.sum(resid ** 2 * np.gradient(xs))))
        assert l2 <= 1e-4

    def test_zero_perturbation_gives_zero(self, alg4):
        h0, _ = fx.random_pair(alg4, 3)
        eta = reconstruct_ssf(h0, alg4.zero(), 2, (-2.0, 2.0), grid_size=129)
        assert np.max(np.abs(eta.values)) < 1e-10

    @pytest.mark.parametrize("n", [2, 3])
    def test_holdout_and_fresh_function(self, n, alg5):
        h0, v = fx.separated_pair(alg5, 11, (-2.0, 2.0), min_gap=0.06)
        eta = reconstruct_ssf(h0, v, n, (-2.0, 2.0), grid_size=257)
        assert eta.metadata["holdout_max_scaled_residual"] <= 1e-5
        f = ts.bump_fixture(-0.9, 0.4, 0.35, depth=max(n, 2))
        rec = taylor_remainder(f, h0, v, n)
        assert abs(eta.pair_with(f) - rec.trace) <= 1e-5 * (1 + eta.certified_l1)

    def test_gauge_moments_vanish(self, alg5):
        h0, v = fx.separated_pair(alg5, 21, (-2.0, 2.0), min_gap=0.06)
        eta = reconstruct_ssf(h0, v, 2, (-2.0, 2.0))
        for m in eta.metadata["gauge_moments"]:
            assert abs(m) <= 1e-8


class TestUniqueness:
    def test_known_polynomial_shift(self, alg5):
        h0, v = fx.separated_pair(alg5, 31, (-2.0, 2.0), min_gap=0.06)
        eta = reconstruct_ssf(h0, v, 2, (-2.0, 2.0))
        shifted_rep = PiecewisePoly(eta.rep.breaks, eta.rep.coeffs.copy())
        # add 3 lambda - 2 through the rep's own basis
        pm = np.zeros_like(eta.rep.coeffs)
        for i in range(pm.shape[0]):
            lo, hi = eta.rep.breaks[i], eta.rep.breaks[i + 1]
            h = hi - lo
            mid = 0.5 * (lo + hi)
            pm[i, 0] = (3 * mid - 2) * np.sqrt(h)
            pm[i, 1] = 3 * (h / 2) * np.sqrt(h / 3)
        shifted_rep = PiecewisePoly(eta.rep.breaks, eta.rep.coeffs + pm)
        eta_b = ts.SpectralShiftFunction(
            order=2, window=eta.window, grid=eta.grid,
            values=np.asarray(shifted_rep(eta.grid)), gauge="raw",
            certified_l1=shifted_rep.l1(), provenance="reconstructed",
            rep=shifted_rep)
        rep = gauge_uniqueness(eta, eta_b, 2)
        assert rep.passed
        assert rep.coefficients[0] == pytest.approx(2.0, abs=1e-6)
        assert rep.coefficients[1] == pytest.approx(-3.0, abs=1e-6)

    def test_identical_inputs(self, alg5):
        h0, v = fx.separated_pair(alg5, 41, (-2.0, 2.0), min_gap=0.06)
        eta = reconstruct_ssf(h0, v, 2, (-2.0, 2.0))
        rep = gauge_uniqueness(eta, eta, 2)
        assert rep.residual == 0.0

    @pytest.mark.parametrize("n", [2, 3])
    def test_disjoint_families(self, n, alg5):
        h0, v = fx.separated_pair(alg5, 51, (-2.0, 2.0), min_gap=0.06)
        ea = reconstruct_ssf(h0, v, n, (-2.0, 2.0), layers=(0.0, 0.5))
        eb = reconstruct_ssf(h0, v, n, (-2.0, 2.0), layers=(0.25, 0.75))
        rep = gauge_uniqueness(ea, eb, n)
        assert rep.passed, rep


class TestBounds:
    def test_eta_l1_zero(self, alg4):
        h0, _ = fx.random_pair(alg4, 3)
        eta = first_order_ssf(h0, alg4.zero(), -1.0, 2.0)
        consts = remainder_bound_constant(-1.0, 2.0, 1, 0.5, h0, alg4.zero())
        rep = l1_bound_report(eta, consts)
        assert rep.passed

    def test_rank_one_l1_bound(self):
        _, h0, v = rank_one_fixture()
        eta = first_order_ssf(h0, v, -1.0, 2.0)
        consts = remainder_bound_constant(-1.0, 2.0, 1, 0.5, h0, v)
        rep = l1_bound_report(eta, consts)
        assert rep.l1_exact == pytest.approx(1.0)
        assert consts.value == pytest.approx(3.0)
        assert rep.passed and rep.strict

    def test_rank_one_weighted_l1_bound(self):
        _, h0, v = rank_one_fixture(weight=0.5)
        eta = first_order_ssf(h0, v, -1.0, 2.0)
        consts = remainder_bound_constant(-1.0, 2.0, 1, 0.5, h0, v)
        rep = l1_bound_report(eta, consts)
        assert rep.l1_exact == pytest.approx(0.5)
        assert consts.value == pytest.approx(1.5)
        assert rep.passed


class TestGrowth:
    def test_zero_eta(self, alg4):
        h0, _ = fx.random_pair(alg4, 3)
        eta = first_order_ssf(h0, alg4.zero(), -4.0, 4.0)
        rep = growth_report(eta, h0, alg4.zero(), 1)
        assert rep.k_empirical == 0.0

    def test_scaling_arithmetic(self, alg5):
        h0, v = fx.random_pair(alg5, 13, v_scale=0.3)
        eta1 = first_order_ssf(h0, v, -4.0, 4.0)
        g1 = growth_report(eta1, h0, v, 1)
        eta2 = first_order_ssf(h0, 2.0 * v, -4.0, 4.0)
        g2 = growth_report(eta2, h0, 2.0 * v, 1)
        assert np.isfinite(g1.k_empirical) and np.isfinite(g2.k_empirical)
        assert g2.v_norm == pytest.approx(2 * g1.v_norm)

    def test_window_widening_does_not_grow(self, alg5):
        h0, v = fx.random_pair(alg5, 13, v_scale=0.3)
        narrow = growth_report(first_order_ssf(h0, v, -4.0, 4.0), h0, v, 1)
        wide = growth_report(first_order_ssf(h0, v, -8.0, 8.0), h0, v, 1)
        assert wide.k_empirical <= narrow.k_empirical * (1 + 1e-9)


class TestIdentities:
    def test_dd_expansion_two_nodes_analytic(self, gauss):
        assert dd_expansion_defect(gauss, [0.4, -0.9]) < 1e-12

    def test_dd_expansion_random_and_confluent(self, gauss):
        rng = np.random.default_rng(3)
        for _ in range(10):
            nodes = rng.uniform(-1.5, 1.5, size=4)
            assert dd_expansion_defect(gauss, nodes) < 1e-9
        assert dd_expansion_defect(gauss, [0.3, 0.3, 0.3]) < 1e-8

    def test_resolvent_transfer_zero_v(self, alg4, gauss):
        h0, _ = fx.random_pair(alg4, 3)
        assert resolvent_transfer_defect(gauss, h0, alg4.zero()) < 1e-12

    def test_resolvent_transfer_resolvent_symbol(self, alg4):
        # f = u^{-1}: both sides reduce to resolvent identities
        h0, v = fx.random_pair(alg4, 5, v_scale=0.3)
        f = ts.inv_u_fixture(depth=4)
        assert resolvent_transfer_defect(f, h0, v) < 1e-10

    def test_resolvent_transfer_bump(self, alg5, wide_bump):
        for seed in range(5):
            h0, v = fx.random_pair(alg5, 400 + seed, v_scale=0.3)
            assert resolvent_transfer_defect(wide_bump, h0, v) < 1e-9

    def test_expansion_trivial_order_one(self, alg4, gauss):
        h0, v = fx.random_pair(alg4, 3)
        assert resolvent_expansion_defect(gauss, h0, v, 1.0, 1, skip_witness=True) == 0.0

    @pytest.mark.parametrize("n", [2, 3])
    def test_expansion_operator_orders(self, n, alg4, gauss):
        h0, v = fx.random_pair(alg4, 19, v_scale=0.4)
        assert resolvent_expansion_defect(gauss, h0, v, 1.0, n, skip_witness=True) < 1e-8

    def test_expansion_scalar_algebra_reduces_to_symbol_identity(self, gauss):
        # on a 1x1 algebra the operator identity is the scalar expansion
        alg = ts.TraceAlgebra.of([(1, 1.0)])
        h0 = ts.SelfAdjointOperator(alg.element([np.array([[0.4]])], hermitian=True))
        v = alg.element([np.array([[0.3]])], hermitian=True)
        defect = resolvent_expansion_defect(gauss, h0, v, 1.0, 3, skip_witness=True)
        assert defect < 1e-12


class TestCrossOrderConsistency:
    def test_reconstructions_reproduce_remainders(self, alg5, wide_bump):
        # both orders reproduce their remainder traces on a shared fixture
        h0, v = fx.separated_pair(alg5, 61, (-2.0, 2.0), min_gap=0.06)
        for n in (2, 3):
            eta = reconstruct_ssf(h0, v, n, (-2.0, 2.0))
            rec = taylor_remainder(wide_bump, h0, v, n)
            assert abs(eta.pair_with(wide_bump) - rec.trace) <= 1e-7 * (1 + abs(rec.trace))


def test_jittered_grid_avoids_values():
    grid = jittered_grid(0.0, 1.0, 101, avoid=[0.5])
    assert np.min(np.abs(grid - 0.5)) > 1e-10


def test_ssf_csv_and_sidecar(tmp_path, alg5):
    h0, v = fx.random_pair(alg5, 9, v_scale=0.3)
    eta = first_order_ssf(h0, v, -2.0, 2.0, grid_size=64)
    csv = tmp_path / "eta.csv"
    eta.write_csv(str(csv))
    lines = csv.read_text().splitlines()
    assert lines[0] == "lambda,eta"
    assert len(lines) == 65
    side = tmp_path / "eta.json"
    eta.write_sidecar(str(side))
    import json
    doc = json.loads(side.read_text())
    assert doc["order"] == 1
    assert doc["provenance"] == "counting-exact"
    assert "certified_l1" in doc


def test_composition_cap_raises(alg4, gauss):
    from traceshift.errors import CapabilityError
    h0, v = fx.random_pair(alg4, 3)
    with pytest.raises(CapabilityError):
        resolvent_expansion_defect(gauss, h0, v, 1.0, 7, skip_witness=True)


def test_first_order_jumps_only_at_eigenvalues(alg5):
    h0, v = fx.random_pair(alg5, 9, v_scale=0.3)
    eta = first_order_ssf(h0, v, -2.0, 2.0)
    eigs = np.sort(np.concatenate([h0.spectrum(), h0.shifted(v).spectrum()]))
    for jump in eta.metadata["jumps"]:
        assert np.min(np.abs(eigs - jump)) < 1e-10


def test_family_rank_on_grid(alg5):
    # the family's derivative span must resolve grids at the solver's own
    # resolution up to the polynomial kernel
    from traceshift.ssf import _solver_breaks, build_test_family
    h0, v = fx.separated_pair(alg5, 31, (-2.0, 2.0), min_gap=0.06)
    n = 2
    breaks = _solver_breaks(h0, h0.shifted(v), -2.0, 2.0)
    fam = build_test_family((-2.0, 2.0), n, breaks)
    size = 2 * n * (breaks.size - 1)
    grid = jittered_grid(-2.0, 2.0, size, avoid=breaks)
    assert fam.numerical_rank(grid) >= grid.size - n
