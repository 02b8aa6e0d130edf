import math

import numpy as np
import pytest

import traceshift as ts
from traceshift import fixtures as fx
from traceshift.constants import ConstantStore
from traceshift.errors import CapabilityError
from traceshift.taylor import (
    RemainderEvaluator,
    fd_derivative_oracle,
    gateaux_derivative,
    remainder_bound_constant,
    remainder_bound_report,
    taylor_remainder,
)


def poly(coeffs):
    return ts.polynomial_fixture(coeffs)


class TestGateaux:
    def test_linear(self, pair5):
        h0, v = pair5
        d1 = gateaux_derivative(poly([0, 1.0]), h0, v, 1)
        assert (d1 - v).max_entry() < 1e-12

    def test_square_second_derivative(self, pair5):
        h0, v = pair5
        d2 = gateaux_derivative(poly([0, 0, 1.0]), h0, v, 2)
        assert (d2 - 2.0 * (v @ v)).max_entry() < 1e-11

    @pytest.mark.parametrize("k", [1, 2])
    def test_exp_fd_cross_validation(self, k, alg4, gauss):
        worst = 0.0
        for seed in range(20):
            h0, v = fx.random_pair(alg4, 100 + seed, h_scale=1.1, v_scale=0.2)
            g = gateaux_derivative(gauss, h0, v, k)
            fd = fd_derivative_oracle(gauss, h0, v, k, h=1e-2, richardson=2)
            scaled = math.factorial(k)  # oracle returns the un-normalized derivative
            del scaled
            worst = max(worst, (g - fd.element).operator_norm())
        assert worst < 1e-6

    def test_hermitian_for_real_symbol(self, pair5, gauss):
        h0, v = pair5
        d2 = gateaux_derivative(gauss, h0, v, 2)
        assert (d2 - d2.adjoint()).max_entry() <= 1e-10 * (1 + d2.max_entry())


class TestFdOracle:
    def test_linear_function_higher_stencils_vanish(self, pair5):
        h0, v = pair5
        # a wide step keeps the k-th difference quotient's rounding noise tiny
        for k in (2, 3, 4):
            fd = fd_derivative_oracle(poly([0.5, 2.0]), h0, v, k, h=0.25)
            assert fd.element.operator_norm() < 1e-8

    def test_square_first_derivative(self, pair5):
        h0, v = pair5
        fd = fd_derivative_oracle(poly([0, 0, 1.0]), h0, v, 1, h=1e-3)
        expected = h0.element @ v + v @ h0.element
        assert (fd.element - expected).operator_norm() < 1e-8

    def test_stencil_cap(self, pair5, gauss):
        h0, v = pair5
        with pytest.raises(CapabilityError):
            fd_derivative_oracle(gauss, h0, v, 5)


class TestRemainder:
    def test_first_order_is_difference(self, pair5, gauss):
        h0, v = pair5
        rec = taylor_remainder(gauss, h0, v, 1)
        diff = ts.apply_function(gauss, h0.shifted(v)) - ts.apply_function(gauss, h0)
        assert (rec.remainder - diff).max_entry() < 1e-12
        assert rec.derivative_traces == ()

    def test_polynomial_exactness(self, pair5):
        h0, v = pair5
        rec = taylor_remainder(poly([1.0, -0.3, 0.7]), h0, v, 3)
        assert abs(rec.trace) < 1e-9
        assert rec.remainder.operator_norm() < 1e-9

    def test_telescoping(self, pair5, gauss):
        h0, v = pair5
        for n in (2, 3):
            r_n = taylor_remainder(gauss, h0, v, n)
            r_prev = taylor_remainder(gauss, h0, v, n - 1)
            step = (1.0 / math.factorial(n - 1)) * gateaux_derivative(gauss, h0, v, n - 1)
            defect = (r_n.remainder - (r_prev.remainder - step)).operator_norm()
            assert defect <= 1e-9 * (1 + r_prev.remainder.operator_norm())

    def test_trace_consistency(self, pair5, gauss):
        h0, v = pair5
        rec = taylor_remainder(gauss, h0, v, 3)
        h = h0.shifted(v)
        total = (ts.trace(ts.apply_function(gauss, h))
                 - ts.trace(ts.apply_function(gauss, h0))).real
        assert rec.trace == pytest.approx(total - sum(rec.derivative_traces), abs=1e-12)

    def test_unitary_invariance(self, alg5, gauss):
        h0, v = fx.random_pair(alg5, 31, v_scale=0.3)
        u = fx.random_unitary(alg5, fx.rng_from_seed(77))
        rec = taylor_remainder(gauss, h0, v, 2)
        h0_rot = ts.SelfAdjointOperator(h0.element.conjugated(u))
        rec_rot = taylor_remainder(gauss, h0_rot, v.conjugated(u), 2)
        assert rec_rot.trace == pytest.approx(rec.trace, abs=1e-9)

    def test_fast_evaluator_matches(self, alg5, wide_bump):
        h0, v = fx.random_pair(alg5, 41, v_scale=0.3)
        for n in (1, 2, 3, 4):
            ev = RemainderEvaluator(h0, v, n)
            fast = ev.remainder_trace(wide_bump)
            full = taylor_remainder(wide_bump, h0, v, n).trace
            assert fast == pytest.approx(full, abs=1e-11)


class TestBoundConstants:
    def test_first_order_constant_is_projection_count(self):
        alg = ts.TraceAlgebra.of([(4, 1.0)])
        h0 = ts.SelfAdjointOperator(alg.diagonal([[-3.0, -0.5, 0.5, 3.0]]))
        consts = remainder_bound_constant(-1.0, 1.0, 1, 0.5, h0, alg.zero())
        assert consts.proj_trace_h0 == pytest.approx(2.0)
        assert consts.value == pytest.approx(2.0 * 2.0)  # (b-a) * max projection trace

    def test_zero_perturbation(self, alg4):
        h0, _ = fx.random_pair(alg4, 3)
        consts = remainder_bound_constant(-1.0, 1.0, 3, 0.5, h0, alg4.zero(),
                                          c2k=(1.0, 1.0))
        assert consts.proj_trace_h0 == consts.proj_trace_h
        assert consts.value == pytest.approx(
            2.0 ** 3 * consts.proj_trace_h0, abs=1e-12)  # V-norm powers vanish

    def test_dominates_first_summand(self, pair5):
        h0, v = pair5
        consts = remainder_bound_constant(-2.0, 2.0, 3, 0.5, h0, v, c2k=(0.4, 0.4))
        first = 4.0 ** 3 * max(consts.proj_trace_h0, consts.proj_trace_h)
        assert consts.value >= first


class TestBoundReports:
    def test_first_order_strict(self, alg5):
        f = ts.bump_fixture(-0.9, 0.9, 0.5, depth=2)
        for seed in range(8):
            h0, v = fx.random_pair(alg5, 200 + seed, h_scale=1.5, v_scale=0.3)
            rep = remainder_bound_report(f, h0, v, 1, -2.0, 2.0, 0.5, skip_witness=True)
            assert rep.verdict == "pass"
            assert rep.ratio <= 1.0

    def test_zero_function(self, pair5):
        z = ts.ScalarFunction("zero", [lambda x: np.zeros_like(np.asarray(x, float))] * 3,
                              support=(-0.5, 0.5), tags=("Dc5",))
        h0, v = pair5
        rep = remainder_bound_report(z, h0, v, 2, -2.0, 2.0, 0.5, skip_witness=True,
                                     store=ConstantStore())
        assert rep.ratio == 0.0

    def test_scaling_invariance(self, pair5):
        f = ts.bump_fixture(-0.9, 0.9, 0.5, depth=2)
        h0, v = pair5
        r1 = remainder_bound_report(f, h0, v, 1, -2.0, 2.0, 0.5, skip_witness=True)
        r2 = remainder_bound_report(ts.functions.scale(f, 5.0), h0, v, 1,
                                    -2.0, 2.0, 0.5, skip_witness=True)
        assert r1.ratio == pytest.approx(r2.ratio, rel=1e-9)


def test_first_order_resolvent_weighted_bound(alg5):
    # |tr R_1| <= sup|f u| (2 + |V|) |R_0|_1 for fixtures with i-weighted decay
    from traceshift.functions import product, u_power
    from traceshift.algebra import resolvent, schatten_norm
    g = ts.gaussian_fixture(0.0, 0.8, depth=4)
    gu = product(g, u_power(1, depth=4))
    for seed in range(6):
        h0, v = fx.random_pair(alg5, 500 + seed, v_scale=0.4)
        rec = taylor_remainder(g, h0, v, 1)
        bound = gu.sup_norm(0, (-24.0, 24.0), samples=1 << 15) \
            * (2.0 + v.operator_norm()) * schatten_norm(resolvent(h0, 1j), 1)
        assert abs(rec.trace) <= bound
