"""Scalar calculus: functions with derivative stacks and decay metadata.

A :class:`ScalarFunction` bundles vectorized evaluators for f and its
derivatives up to a declared depth, optional compact support, a sampling
window hint for noncompactly supported functions, and class-membership tags.
On top of it this module provides the named fixtures used throughout the
package, the Fourier L^1 functional, numerical class-membership witnesses,
and the sup-norm ratio check for compactly supported functions.

Fourier convention, fixed once and used everywhere:

    g_hat(xi) = integral g(x) exp(-i x xi) dx
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.interpolate import BSpline

from .bump import BumpFunction
from .errors import CapabilityError, DomainError

_OUTSIDE_SUPPORT_TOL = 1e-12


class ScalarFunction:
    """Callable with a derivative stack and support/decay metadata."""

    __slots__ = ("name", "_derivs", "support", "window_hint", "tags",
                 "real_valued", "payload", "_sup_cache")

    def __init__(self, name: str, derivs: Sequence[Callable], *,
                 support: tuple[float, float] | None = None,
                 window_hint: tuple[float, float] | None = None,
                 tags: Sequence[str] = (),
                 real_valued: bool = True,
                 payload=None):
        if not derivs:
            raise DomainError("need at least the order-0 evaluator")
        object.__setattr__(self, "name", name)
        object.__setattr__(self, "_derivs", tuple(derivs))
        object.__setattr__(self, "support", tuple(support) if support else None)
        object.__setattr__(self, "window_hint", tuple(window_hint) if window_hint else None)
        object.__setattr__(self, "tags", frozenset(tags))
        object.__setattr__(self, "real_valued", bool(real_valued))
        object.__setattr__(self, "payload", payload)
        object.__setattr__(self, "_sup_cache", {})

    def __setattr__(self, *a):  # pragma: no cover - guard
        raise AttributeError("ScalarFunction is immutable")

    @property
    def depth(self) -> int:
        return len(self._derivs) - 1

    def __call__(self, x):
        return self._derivs[0](x)

    def deriv(self, k: int) -> Callable:
        if k < 0 or k > self.depth:
            raise CapabilityError(
                f"{self.name}: derivative order {k} exceeds declared depth {self.depth}")
        return self._derivs[k]

    def d(self, k: int, x):
        return self.deriv(k)(x)

    def sampling_window(self, window: tuple[float, float] | None = None) -> tuple[float, float]:
        if window is not None:
            return (float(window[0]), float(window[1]))
        if self.support is not None:
            return self.support
        if self.window_hint is not None:
            return self.window_hint
        raise CapabilityError(
            f"{self.name}: no window given and no support/decay envelope declared")

    def sup_norm(self, k: int = 0, window: tuple[float, float] | None = None,
                 samples: int = 4097) -> float:
        """Dense-grid sup of |f^(k)| over the window (cached per window)."""
        lo, hi = self.sampling_window(window)
        key = (k, lo, hi, samples)
        cached = self._sup_cache.get(key)
        if cached is None:
            xs = np.linspace(lo, hi, samples)
            cached = float(np.max(np.abs(np.asarray(self.deriv(k)(xs)))))
            self._sup_cache[key] = cached
        return cached

    def has_tag(self, tag: str) -> bool:
        return tag in self.tags

    def __repr__(self):
        return f"ScalarFunction({self.name!r}, depth={self.depth})"


def claims_class(f: ScalarFunction, kind: str, order: int) -> bool:
    """Whether the fixture's tags assert membership in the class of the given order."""
    if "smooth_compact" in f.tags and kind in ("Cc", "Dc", "Fc"):
        return True
    if "schwartz" in f.tags:
        return True
    for tag in f.tags:
        if tag.startswith(kind):
            try:
                if int(tag[len(kind):]) >= order:
                    return True
            except ValueError:
                continue
    return False


def validate_derivative_stack(f: ScalarFunction, window=None, points: int = 64,
                              rtol: float = 1e-5, h_rel: float = 1e-6) -> float:
    """Max relative defect of the declared derivatives against central differences."""
    lo, hi = f.sampling_window(window)
    margin = 0.01 * (hi - lo)
    xs = np.linspace(lo + margin, hi - margin, points)
    h = h_rel * max(1.0, hi - lo)
    worst = 0.0
    for k in range(1, f.depth + 1):
        fd = (np.asarray(f.d(k - 1, xs + h)) - np.asarray(f.d(k - 1, xs - h))) / (2 * h)
        declared = np.asarray(f.d(k, xs))
        scale = float(np.max(np.abs(declared))) + 1e-12
        worst = max(worst, float(np.max(np.abs(fd - declared))) / scale)
        if worst > rtol:
            raise DomainError(
                f"{f.name}: derivative order {k} disagrees with finite differences "
                f"(relative defect {worst:.2e})")
    return worst


# ---------------------------------------------------------------------------
# combinators
# ---------------------------------------------------------------------------

def product(f: ScalarFunction, g: ScalarFunction, depth: int | None = None,
            name: str | None = None) -> ScalarFunction:
    """Pointwise product with the Leibniz derivative stack."""
    depth = min(f.depth, g.depth) if depth is None else depth
    if depth > min(f.depth, g.depth):
        raise CapabilityError("product depth exceeds a factor's depth")

    def make(m):
        def dm(x, _m=m):
            acc = None
            for j in range(_m + 1):
                term = math.comb(_m, j) * np.asarray(f.d(j, x)) * np.asarray(g.d(_m - j, x))
                acc = term if acc is None else acc + term
            return acc
        return dm

    if f.support and g.support:
        support = (max(f.support[0], g.support[0]), min(f.support[1], g.support[1]))
        if support[0] >= support[1]:
            support = (f.support[0], f.support[0])
    else:
        support = f.support or g.support
    hints = [w for w in (f.window_hint, g.window_hint) if w]
    hint = None
    if hints:
        hint = (min(w[0] for w in hints), max(w[1] for w in hints))
    return ScalarFunction(
        name or f"{f.name}*{g.name}",
        [make(m) for m in range(depth + 1)],
        support=support, window_hint=hint,
        real_valued=f.real_valued and g.real_valued)


def scale(f: ScalarFunction, c: float, name: str | None = None) -> ScalarFunction:
    c = complex(c)
    real = f.real_valued and c.imag == 0.0
    if real:
        c = c.real
    return ScalarFunction(
        name or f"{c:g}*{f.name}",
        [lambda x, _k=k: c * np.asarray(f.d(_k, x)) for k in range(f.depth + 1)],
        support=f.support, window_hint=f.window_hint,
        tags=f.tags, real_valued=real, payload=f.payload)


def u_power(p: int, depth: int = 10) -> ScalarFunction:
    """(x - i)^p with its exact derivative stack; p may be negative."""

    def make(k):
        coef = 1.0
        for j in range(k):
            coef *= (p - j)

        def dk(x, _c=coef, _e=p - k):
            x = np.asarray(x, dtype=float)
            return _c * (x - 1j) ** _e
        return dk

    return ScalarFunction(f"u^{p}", [make(k) for k in range(depth + 1)],
                          window_hint=(-64.0, 64.0), real_valued=False)


def derivative_with_multiplier(f: ScalarFunction, k: int, l: int) -> ScalarFunction:
    """The function x -> f^(k)(x) (x - i)^l, values only (depth 0)."""
    fk = f.deriv(k)

    def val(x):
        x = np.asarray(x, dtype=float)
        return np.asarray(fk(x)) * (x - 1j) ** l

    return ScalarFunction(f"{f.name}^({k})*u^{l}", [val], support=f.support,
                          window_hint=f.window_hint, real_valued=False)


# ---------------------------------------------------------------------------
# fixtures
# ---------------------------------------------------------------------------

def bump_fixture(a: float, b: float, eps: float, depth: int = 8) -> ScalarFunction:
    """The exp-ramp plateau bump as a ScalarFunction (fixture name: bump)."""
    bf = BumpFunction(a, b, eps, depth=depth)
    return ScalarFunction(
        f"bump({a:g},{b:g},{eps:g})",
        [bf.value] + [bf.deriv(k) for k in range(1, depth + 1)],
        support=bf.support, tags=("smooth_compact",), payload=bf)


def gaussian_fixture(mu: float = 0.0, sigma: float = 1.0, depth: int = 10) -> ScalarFunction:
    """exp(-(x-mu)^2 / (2 sigma^2)), derivatives via the Hermite recursion."""
    if sigma <= 0:
        raise DomainError("sigma must be positive")

    def make(k):
        def dk(x, _k=k):
            t = (np.asarray(x, dtype=float) - mu) / sigma
            he_prev, he = np.zeros_like(t), np.ones_like(t)
            for j in range(_k):
                he_prev, he = he, t * he - j * he_prev
            sign = -1.0 if _k % 2 else 1.0
            return sign * sigma ** (-_k) * he * np.exp(-0.5 * t * t)
        return dk

    return ScalarFunction(
        f"gaussian({mu:g},{sigma:g})",
        [make(k) for k in range(depth + 1)],
        window_hint=(mu - 40 * sigma, mu + 40 * sigma),
        tags=("schwartz",))


def polynomial_fixture(coeffs: Sequence[float], name: str | None = None) -> ScalarFunction:
    """Polynomial with ascending coefficients; derivative stack is exact."""
    c = np.asarray(coeffs, dtype=float)
    stacks = [c]
    while stacks[-1].size > 1:
        stacks.append(np.polynomial.polynomial.polyder(stacks[-1]))
    stacks.append(np.zeros(1))

    def make(arr):
        def dk(x, _a=arr):
            return np.polynomial.polynomial.polyval(np.asarray(x, dtype=float), _a)
        return dk

    return ScalarFunction(name or f"poly(deg={c.size - 1})",
                          [make(a) for a in stacks], tags=("poly",))


def bspline_fixture(knots: Sequence[float], depth: int | None = None) -> ScalarFunction:
    """Single B-spline basis bump on the given knots (degree = len(knots) - 2)."""
    knots = np.asarray(knots, dtype=float)
    degree = knots.size - 2
    if degree < 1:
        raise DomainError("need at least 3 knots")
    base = BSpline.basis_element(knots, extrapolate=False)
    depth = degree if depth is None else min(depth, degree)

    def make(k):
        spl = base if k == 0 else base.derivative(k)

        def dk(x, _s=spl):
            return np.nan_to_num(_s(np.asarray(x, dtype=float)), nan=0.0)
        return dk

    tags = {f"Cc{j}" for j in range(degree)} | {f"Dc{j}" for j in range(degree)}
    tags |= {f"Fc{j}" for j in range(1, degree + 1)}
    tags |= {f"H{j}" for j in range(1, degree + 1)} | {f"W{j}" for j in range(degree)}
    return ScalarFunction(
        f"bspline(deg={degree})",
        [make(k) for k in range(depth + 1)],
        support=(float(knots[0]), float(knots[-1])), tags=sorted(tags), payload=base)


def xn_xm1n_fixture(n: int) -> ScalarFunction:
    """x^n (x-1)^n on [0, 1], zero outside.

    Lies in F_c^n of any window containing [0, 1] but not in C^n: the n-th
    a.e.-derivative jumps at 0 and 1.  Boundary evaluations use the inside
    limit.
    """
    if n < 1:
        raise DomainError("n must be >= 1")
    poly = np.polynomial.polynomial.polypow(np.array([0.0, 1.0]), n)
    poly = np.polynomial.polynomial.polymul(
        poly, np.polynomial.polynomial.polypow(np.array([-1.0, 1.0]), n))
    stacks = [poly]
    for _ in range(2 * n):
        stacks.append(np.polynomial.polynomial.polyder(stacks[-1]))

    def make(arr):
        def dk(x, _a=arr):
            x = np.asarray(x, dtype=float)
            inside = (x >= 0.0) & (x <= 1.0)
            out = np.zeros(x.shape)
            out[inside] = np.polynomial.polynomial.polyval(x[inside], _a)
            return out
        return dk

    tags = {f"Fc{j}" for j in range(1, n + 1)} | {f"Cc{j}" for j in range(n)}
    tags |= {f"Dc{j}" for j in range(n)} | {f"H{j}" for j in range(1, n + 1)}
    return ScalarFunction(f"xn_xm1n({n})", [make(a) for a in stacks],
                          support=(0.0, 1.0), tags=sorted(tags))


def inv_u_fixture(depth: int = 10) -> ScalarFunction:
    """g(x) = (x - i)^(-1) with exact derivatives; decays like 1/|x|."""

    def make(k):
        coef = (-1.0) ** k * math.factorial(k)

        def dk(x, _c=coef, _e=-(k + 1)):
            x = np.asarray(x, dtype=float)
            return _c * (x - 1j) ** _e
        return dk

    tags = {f"W{j}" for j in range(1, 9)}
    return ScalarFunction("inv_u", [make(k) for k in range(depth + 1)],
                          window_hint=(-64.0, 64.0), real_valued=False,
                          tags=sorted(tags))


FUNCTION_FIXTURES = {
    "bump": bump_fixture,
    "gaussian": gaussian_fixture,
    "polynomial": polynomial_fixture,
    "bspline": bspline_fixture,
    "xn_xm1n": xn_xm1n_fixture,
    "inv_u": inv_u_fixture,
}


# ---------------------------------------------------------------------------
# Fourier L^1 functional
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FourierL1Result:
    value: float
    error_estimate: float
    converged: bool
    samples: int
    window: tuple[float, float]
    trend: str = "stable"


def fourier_l1(g, *, window: tuple[float, float] | None = None,
               rtol: float = 1e-5, min_samples: int = 1 << 12,
               max_samples: int = 1 << 19, pad: float = 8.0) -> FourierL1Result:
    """Numerical integral of |g_hat| over the adaptive frequency window.

    The transform is evaluated by a dense FFT quadrature of the fixed
    convention g_hat(xi) = int g(x) exp(-i x xi) dx.  Sampling is refined
    (finer x-grid widens the frequency window, more zero padding refines
    the frequency resolution) until the value stabilizes; the last
    refinement step is reported as the error estimate.
    """
    if isinstance(g, ScalarFunction):
        lo, hi = g.sampling_window(window)
        fn = g
    else:
        if window is None:
            raise CapabilityError("plain callables require an explicit window")
        lo, hi = window
        fn = g

    def run(m, padf):
        width = (hi - lo) * padf
        center = 0.5 * (lo + hi)
        x0 = center - 0.5 * width
        dx = width / m
        xs = x0 + (np.arange(m) + 0.5) * dx
        vals = np.asarray(fn(xs), dtype=np.complex128)
        xi = 2.0 * np.pi * np.fft.fftfreq(m, d=dx)
        ghat = dx * np.exp(-1j * xs[0] * xi) * np.fft.fft(vals)
        dxi = 2.0 * np.pi / width
        mag = np.abs(ghat)
        total = float(np.sum(mag) * dxi)
        # fraction of mass in the outer half of the frequency window
        outer = float(np.sum(mag[np.abs(xi) > 0.5 * np.max(np.abs(xi))]) * dxi)
        return total, outer

    m, padf = min_samples, pad
    value, outer = run(m, padf)
    prev = value
    converged, trend = False, "stable"
    err = np.inf
    while m < max_samples:
        m *= 2
        if outer <= rtol * max(value, 1e-300):
            padf *= 2.0  # frequency window is wide enough; refine resolution
        value, outer = run(m, padf)
        err = abs(value - prev)
        if err <= rtol * max(abs(value), 1e-300) and outer <= 10 * rtol * max(value, 1e-300):
            converged = True
            break
        trend = "increasing" if value > prev * 1.05 else "stable"
        prev = value
    return FourierL1Result(value, err, converged, m, (lo, hi), trend)


# ---------------------------------------------------------------------------
# class-membership witnesses
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ConditionReport:
    label: str
    value: float
    finite: bool
    detail: str = ""


@dataclass(frozen=True)
class WitnessReport:
    function: str
    kind: str
    order: int
    holds: bool
    conditions: tuple[ConditionReport, ...]

    def condition(self, label: str) -> ConditionReport:
        for c in self.conditions:
            if c.label == label:
                return c
        raise KeyError(label)


def weighted_l1(f: ScalarFunction, k: int, power: int, *,
                rtol: float = 1e-3, max_doublings: int = 12) -> ConditionReport:
    """int |f^(k)|(1+|x|)^power dx with divergence detection on doubling windows."""
    label = f"L1(f^({k}) (1+|x|)^{power})"
    nodes, weights = np.polynomial.legendre.leggauss(24)

    def chunk(lo, hi, panels=16):
        edges = np.linspace(lo, hi, panels + 1)
        half = 0.5 * np.diff(edges)
        mids = 0.5 * (edges[:-1] + edges[1:])
        pts = mids[:, None] + half[:, None] * nodes[None, :]
        vals = np.abs(np.asarray(f.d(k, pts.ravel()))).reshape(pts.shape)
        w = (1.0 + np.abs(pts)) ** power
        return float(np.sum((vals * w) @ weights * half))

    if f.support is not None:
        total = chunk(f.support[0], f.support[1], panels=64)
        return ConditionReport(label, total, True, "compact support")

    lo, hi = f.sampling_window()
    l = max(abs(lo), abs(hi), 1.0)
    total = chunk(-l, l, panels=64)
    increments = []
    for _ in range(max_doublings):
        inc = chunk(l, 2 * l) + chunk(-2 * l, -l)
        increments.append(inc)
        total += inc
        l *= 2
        if inc <= rtol * max(total, 1e-300):
            return ConditionReport(label, total, True, f"converged at |x|<={l:g}")
        if len(increments) >= 3 and increments[-1] >= 0.9 * increments[-3]:
            return ConditionReport(label, total, False,
                                   f"increments not decaying out to |x|={l:g}")
    return ConditionReport(label, total, False, "no convergence within window cap")


def _fourier_condition(f: ScalarFunction, k: int, l: int, rtol: float) -> ConditionReport:
    label = f"FT(f^({k}) u^{l}) in L1"
    try:
        res = fourier_l1(derivative_with_multiplier(f, k, l), rtol=rtol)
    except CapabilityError as exc:
        raise CapabilityError(f"witness for {f.name}: {exc}") from exc
    return ConditionReport(label, res.value, res.converged and res.trend == "stable",
                           f"err~{res.error_estimate:.1e} samples={res.samples}")


def _jump_scan(func, window, points=4096) -> tuple[bool, float]:
    """Detect a genuine jump: bisect toward the largest adjacent-sample gap
    and require the gap to persist as the bracket width vanishes."""
    lo_w, hi_w = window
    xs = np.linspace(lo_w, hi_w, points)
    vals = np.asarray(func(xs), dtype=float)
    diffs = np.abs(np.diff(vals))
    scale = float(np.max(np.abs(vals))) + 1e-300
    i = int(np.argmax(diffs))
    if diffs[i] <= 1e-8 * scale:
        return False, float(xs[i])
    lo, hi = float(xs[i]), float(xs[i + 1])
    flo, fhi = float(vals[i]), float(vals[i + 1])
    for _ in range(60):
        if hi - lo <= 1e-14 * (1.0 + abs(lo)):
            break
        mid = 0.5 * (lo + hi)
        fmid = float(func(mid))
        if abs(fmid - flo) >= abs(fhi - fmid):
            hi, fhi = mid, fmid
        else:
            lo, flo = mid, fmid
    gap = abs(fhi - flo)
    return gap > 1e-6 * scale, 0.5 * (lo + hi)


def class_witness(f: ScalarFunction, kind: str, order: int,
                  window: tuple[float, float] | None = None,
                  rtol: float = 1e-3) -> WitnessReport:
    """Numerically check the membership conditions of a function class.

    Kinds: ``Dc`` / ``Cc`` / ``Fc`` over a window (a, b); ``W`` and ``H``
    over the whole line (Fourier and weighted-integrability conditions).
    """
    conds: list[ConditionReport] = []
    if kind in ("Dc", "Cc", "Fc"):
        if window is None:
            raise CapabilityError("windowed classes need an explicit (a, b)")
        a, b = window
        if f.support is None:
            conds.append(ConditionReport("compact support", math.inf, False,
                                         "no declared support"))
        else:
            inside = f.support[0] > a and f.support[1] < b
            pts = np.concatenate([np.linspace(a, f.support[0], 17),
                                  np.linspace(f.support[1], b, 17)])
            leak = float(np.max(np.abs(np.asarray(f(pts)))))
            conds.append(ConditionReport("closed support inside (a,b)",
                                         leak, inside and leak <= _OUTSIDE_SUPPORT_TOL,
                                         f"support={f.support}"))
        need = order if kind != "Fc" else order - 1
        conds.append(ConditionReport(f"derivative depth >= {need}", f.depth,
                                     f.depth >= min(order, f.depth if kind == "Fc" else order)
                                     and f.depth >= need, ""))
        if kind == "Fc":
            if f.depth >= order:
                xs = np.linspace(a, b, 8193)
                l2 = float(np.trapezoid(np.abs(np.asarray(f.d(order, xs))) ** 2, xs))
                conds.append(ConditionReport(f"f^({order}) in L2", l2, math.isfinite(l2), ""))
            else:
                conds.append(ConditionReport(f"f^({order}) in L2", math.inf, False,
                                             "stack too shallow to sample"))
            if order >= 1 and f.depth >= order - 1:
                jump, loc = _jump_scan(f.deriv(order - 1), (a, b))
                conds.append(ConditionReport(f"f^({order - 1}) absolutely continuous",
                                             0.0 if not jump else 1.0, not jump,
                                             f"scan near x={loc:.6g}"))
        if kind == "Cc" and f.depth >= order:
            jump, loc = _jump_scan(f.deriv(order), (a, b))
            conds.append(ConditionReport(f"f^({order}) continuous",
                                         0.0 if not jump else 1.0, not jump,
                                         f"scan near x={loc:.6g}"))
        if kind == "Dc" and f.depth >= order:
            sup = f.sup_norm(order, (a, b))
            conds.append(ConditionReport(f"f^({order}) bounded", sup, math.isfinite(sup), ""))
    elif kind == "W":
        if f.depth < order:
            raise CapabilityError(f"{f.name}: W witness of order {order} needs depth {order}")
        for k in range(order + 1):
            conds.append(_fourier_condition(f, k, k, rtol))
        for k in range(1, order + 1):
            conds.append(weighted_l1(f, k, k - 1, rtol=rtol))
    elif kind == "H":
        if f.depth < order:
            raise CapabilityError(f"{f.name}: H witness of order {order} needs depth {order}")
        for k in range(order):
            conds.append(_fourier_condition(f, k, k, rtol))
            conds.append(_fourier_condition(f, k, k + 1, rtol))
        for k in range(order + 1):
            conds.append(weighted_l1(f, k, k, rtol=rtol))
    else:
        raise DomainError(f"unknown class kind {kind!r}")
    return WitnessReport(f.name, kind, order, all(c.finite for c in conds), tuple(conds))


# ---------------------------------------------------------------------------
# sup-norm ratio check for compactly supported functions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SupRatioReport:
    ratios: tuple[float, ...]
    max_ratio: float
    passed: bool


def sup_ratio_report(f: ScalarFunction, a: float, b: float, k: int,
                     require_witness: bool = True) -> SupRatioReport:
    """||f^(j)||_inf / ((b-a)^(k-j) ||f^(k)||_inf) for j = 0..k; each must be <= 1.

    Requires f to be (tagged as) k-times differentiable with compact support
    inside (a, b); the zero function yields all-zero ratios by convention.
    """
    if require_witness and not claims_class(f, "Dc", k):
        w = class_witness(f, "Dc", k, (a, b))
        if not w.holds:
            raise CapabilityError(f"{f.name} failed the Dc^{k}(({a},{b})) witness")
    fk = f.sup_norm(k, (a, b))
    if fk <= 1e-300:
        sups = [f.sup_norm(j, (a, b)) for j in range(k + 1)]
        if max(sups) <= 1e-300:
            ratios = tuple(0.0 for _ in range(k + 1))
            return SupRatioReport(ratios, 0.0, True)
        raise DomainError("f^(k) vanishes but lower derivatives do not")
    ratios = tuple(f.sup_norm(j, (a, b)) / ((b - a) ** (k - j) * fk)
                   for j in range(k + 1))
    mx = max(ratios)
    return SupRatioReport(ratios, mx, mx <= 1.0 + 1e-9)
