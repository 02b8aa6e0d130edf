import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import traceshift as ts
from traceshift import fixtures as fx
from traceshift.errors import DomainError, SingularityError, StructureError


def test_trace_identity_weighted():
    alg = ts.TraceAlgebra.of([(2, 3.0)])
    assert ts.trace(alg.identity()) == pytest.approx(6.0)


def test_trace_zero(alg_weighted):
    assert ts.trace(alg_weighted.zero()) == 0


def test_trace_block_diagonal_example():
    alg = ts.TraceAlgebra.of([(1, 1.0), (2, 0.5)])
    a = alg.diagonal([[2.0], [1.0, 1.0]])
    assert ts.trace(a).real == pytest.approx(3.0)


def test_trace_shape_mismatch(alg4):
    other = ts.TraceAlgebra.of([(3, 1.0)])
    with pytest.raises(StructureError):
        alg4.element([np.eye(3)])
    a = other.identity()
    b = alg4.identity()
    with pytest.raises(StructureError):
        a + b


def test_schatten_identity():
    alg = ts.TraceAlgebra.of([(2, 1.0)])
    assert ts.schatten_norm(alg.identity(), 2) == pytest.approx(math.sqrt(2))


def test_schatten_weight_scaling():
    alg = ts.TraceAlgebra.of([(2, 4.0)])
    assert ts.schatten_norm(alg.identity(), 1) == pytest.approx(8.0)


def test_schatten_eigen_oracle(alg_weighted):
    a = fx.random_hermitian(alg_weighted, fx.rng_from_seed(2), scale=1.3)
    # oracle: p=1 norm of a hermitian element is the weighted sum of |eigenvalues|
    expected = sum(b.weight * float(np.sum(np.abs(np.linalg.eigvalsh(m))))
                   for m, b in zip(a.mats, alg_weighted.blocks))
    assert ts.schatten_norm(a, 1) == pytest.approx(expected, abs=1e-10)


def test_schatten_domain_error(alg4):
    with pytest.raises(DomainError):
        ts.schatten_norm(alg4.identity(), 0.5)


def test_s_numbers_single():
    alg = ts.TraceAlgebra.of([(1, 2.0)])
    mu = ts.s_numbers(alg.element([np.array([[3.0]])]))
    assert mu(0.5) == pytest.approx(3.0)
    assert mu(1.99) == pytest.approx(3.0)
    assert mu(2.01) == 0.0


def test_s_numbers_zero(alg4):
    mu = ts.s_numbers(alg4.zero())
    assert np.all(mu(np.linspace(0, 5, 7)) == 0)


def test_s_numbers_weighted_sort():
    alg = ts.TraceAlgebra.of([(1, 1.0), (1, 2.0)])
    a = alg.diagonal([[1.0], [5.0]])
    mu = ts.s_numbers(a)
    assert mu(1.0) == pytest.approx(5.0)
    assert mu(2.5) == pytest.approx(1.0)
    assert mu(3.5) == 0.0
    assert mu.integral() == pytest.approx(ts.schatten_norm(a, 1))


def test_s_numbers_nonincreasing(alg_weighted):
    a = fx.random_hermitian(alg_weighted, fx.rng_from_seed(5))
    mu = ts.s_numbers(a)
    t = np.linspace(0, mu.total_mass() * 1.2, 200)
    vals = mu(t)
    assert np.all(np.diff(vals) <= 1e-14)


def test_spectral_projection_examples():
    alg = ts.TraceAlgebra.of([(3, 1.0)])
    h = ts.SelfAdjointOperator(alg.diagonal([[-1.0, 0.0, 2.0]]))
    p = ts.spectral_projection(h, ts.Interval(-0.5, 1.0))
    assert p.trace() == pytest.approx(1.0)
    full = ts.spectral_projection(h, ts.Interval(-10, 10))
    assert (full.element - alg.identity()).max_entry() < 1e-12
    empty = ts.spectral_projection(h, ts.Interval(5, 6))
    assert empty.element.max_entry() == 0.0


def test_spectral_projection_invariants(pair5):
    h0, _ = pair5
    p = ts.spectral_projection(h0, ts.Interval(-0.5, 0.9))
    e = p.element
    assert (e @ e - e).max_entry() < 1e-12
    assert e.hermitian
    comm = e @ h0.element - h0.element @ e
    assert comm.max_entry() < 1e-12


def test_counting_sweep_oracle(alg_weighted):
    h = fx.random_selfadjoint(alg_weighted, fx.rng_from_seed(3), scale=1.5)
    pairs = h.weighted_eigenvalues()
    for lam in np.linspace(-2, 2, 41):
        direct = sum(w for x, w in pairs if -2 <= x < lam)
        proj = ts.spectral_projection(h, ts.Interval.half_open(-2, lam)).trace()
        assert proj == pytest.approx(direct, abs=1e-12)
        assert h.counting(-2, lam) == pytest.approx(direct, abs=1e-12)


def test_apply_function_identity_and_one(pair5):
    h0, _ = pair5
    assert (ts.apply_function(lambda x: x, h0) - h0.element).max_entry() < 1e-12
    assert (ts.apply_function(lambda x: np.ones_like(x), h0)
            - h0.algebra.identity()).max_entry() < 1e-12


def test_apply_function_exp_oracle(alg4):
    from scipy.linalg import expm
    h = fx.random_selfadjoint(alg4, fx.rng_from_seed(7), scale=1.2)
    ours = ts.apply_function(np.exp, h)
    oracle = expm(np.asarray(h.element.mats[0]))
    rel = np.max(np.abs(ours.mats[0] - oracle)) / np.max(np.abs(oracle))
    assert rel < 1e-9


def test_apply_function_domain_error(alg4):
    h = ts.SelfAdjointOperator(alg4.diagonal([[0.0, 1.0, 2.0, 3.0]]))
    with np.errstate(divide="ignore"):
        with pytest.raises(DomainError):
            ts.apply_function(lambda x: 1.0 / x, h)


def test_apply_function_homomorphism(pair5):
    h0, _ = pair5
    f = np.exp
    g = np.sin
    fg = ts.apply_function(lambda x: f(x) * g(x), h0)
    prod = ts.apply_function(f, h0) @ ts.apply_function(g, h0)
    assert (fg - prod).max_entry() < 1e-10


def test_resolvent_scalar_cases():
    alg = ts.TraceAlgebra.of([(1, 1.0)])
    h = ts.SelfAdjointOperator(alg.diagonal([[0.0]]))
    r = ts.resolvent(h, 1j)
    assert r.mats[0][0, 0] == pytest.approx(1j)
    h1 = ts.SelfAdjointOperator(alg.diagonal([[1.0]]))
    r1 = ts.resolvent(h1, 1j)
    assert r1.mats[0][0, 0] == pytest.approx((1 + 1j) / 2)


def test_resolvent_norm_bound_and_oracle(pair5):
    h0, _ = pair5
    r = ts.resolvent(h0, 1j)
    assert r.operator_norm() <= 1.0 + 1e-12
    for p in (1, 2, 3):
        expected = sum(b.weight * float(np.sum((lam ** 2 + 1) ** (-p / 2)))
                       for lam, b in zip(h0.eigenvalues, h0.algebra.blocks))
        assert ts.schatten_norm(r, p) ** p == pytest.approx(expected, rel=1e-10)


def test_resolvent_singularity(alg4):
    h = ts.SelfAdjointOperator(alg4.diagonal([[0.0, 1.0, 2.0, 3.0]]))
    with pytest.raises(SingularityError):
        ts.resolvent(h, 1.0)


def test_decomposition_residual_recorded(pair5):
    h0, _ = pair5
    assert h0.decomposition_residual <= 1e-10 * (1 + h0.element.max_entry())


def test_hermitian_flag_validation(alg4):
    m = np.triu(np.ones((4, 4)))
    with pytest.raises(StructureError):
        alg4.element([m], hermitian=True)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 10_000))
def test_trace_cyclicity(seed):
    alg = ts.TraceAlgebra.of([(3, 1.0), (2, 0.7)])
    rng = fx.rng_from_seed(seed)
    a = fx.random_hermitian(alg, rng)
    b = fx.random_hermitian(alg, rng)
    lhs = ts.trace(a @ b)
    rhs = ts.trace(b @ a)
    assert abs(lhs - rhs) <= 1e-10 * (1 + abs(lhs))


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 10_000), p=st.sampled_from([2.0, 3.0, 4.0]))
def test_hoelder(seed, p):
    q = p / (p - 1)
    alg = ts.TraceAlgebra.of([(4, 1.0)])
    rng = fx.rng_from_seed(seed)
    a = fx.random_hermitian(alg, rng)
    b = fx.random_hermitian(alg, rng)
    lhs = ts.schatten_norm(a @ b, 1)
    rhs = ts.schatten_norm(a, p) * ts.schatten_norm(b, q)
    assert lhs <= rhs * (1 + 1e-10)


def test_storage_roundtrip_bit_exact(alg_weighted, tmp_path):
    from traceshift.storage import dumps_element, loads_element
    a = fx.random_hermitian(alg_weighted, fx.rng_from_seed(13), scale=math.pi)
    text = dumps_element(a)
    back = loads_element(text)
    for m1, m2 in zip(a.mats, back.mats):
        assert np.array_equal(m1, m2)
    assert dumps_element(back) == text
    path = tmp_path / "elem.op"
    ts.save_element(str(path), a)
    again = ts.load_element(str(path))
    assert all(np.array_equal(x, y) for x, y in zip(a.mats, again.mats))
    assert again.hermitian == a.hermitian
