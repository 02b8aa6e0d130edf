"""Multilinear operator integrals in the eigenbasis.

In finite dimensions the double-limit definition of the multilinear
operator integral collapses to the exact eigenprojection sum

    T(V_1, ..., V_k) = sum  f[k](mu_{i0}, lam_{i1}, ..., lam_{ik})
                         P_{i0} V_1 P_{i1} ... V_k P_{ik}

with divided-difference symbol values, the first slot taken from an
(optionally different) operator and the remaining slots from one base
operator.  Evaluation rotates every perturbation into the eigenbases and
runs the contraction kernel; traces can additionally use the reduced
contraction that fuses the last two symbol variables, which is what trace
cyclicity gives for a uniform operator pattern.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations_with_replacement
from typing import Sequence

import numpy as np

from ._contract import BACKEND, contract, contraction_cost, multiset_rank, num_multisets
from .algebra import (
    AlgebraElement,
    Interval,
    SelfAdjointOperator,
    apply_function,
    schatten_norm,
    spectral_projection,
    trace,
)
from .bump import BumpFunction
from .divdiff import divided_difference_batch
from .errors import CapabilityError, DomainError, StructureError
from .functions import ScalarFunction, claims_class, class_witness, fourier_l1


@dataclass(frozen=True)
class MoiRequest:
    """One multilinear operator integral evaluation.

    The operator pattern is ``first, base, base, ..., base``; ``first``
    defaults to ``base``.  The symbol function must carry a derivative
    stack at least as deep as the order, so confluent symbol values are
    always available.
    """

    order: int
    base: SelfAdjointOperator
    perturbations: tuple[AlgebraElement, ...]
    symbol: ScalarFunction
    first: SelfAdjointOperator | None = None

    def __post_init__(self):
        if self.order < 1:
            raise DomainError("order must be >= 1")
        if len(self.perturbations) != self.order:
            raise StructureError(
                f"order {self.order} needs {self.order} perturbations, "
                f"got {len(self.perturbations)}")
        alg = self.base.algebra
        for v in self.perturbations:
            if v.algebra != alg:
                raise StructureError("perturbations must share the base operator's algebra")
        if self.first is not None and self.first.algebra != alg:
            raise StructureError("first operator must share the base operator's algebra")
        if self.symbol.depth < self.order:
            raise CapabilityError(
                f"symbol depth {self.symbol.depth} < order {self.order}")
        object.__setattr__(self, "perturbations", tuple(self.perturbations))

    @property
    def algebra(self):
        return self.base.algebra

    @property
    def uniform_pattern(self) -> bool:
        return self.first is None or self.first is self.base


@dataclass(frozen=True)
class MoiResult:
    element: AlgebraElement
    trace: complex
    contraction_cost: int
    symbol_evaluations: int
    backend: str


def _symbol_table(f: ScalarFunction, mu: np.ndarray, lam: np.ndarray, k: int):
    """Symbol table S[a, rank(multiset)] plus the evaluation count."""
    m_dim, n = mu.size, lam.size
    if k == 1:
        nodes = np.stack([np.repeat(mu, n), np.tile(lam, m_dim)], axis=1)
        vals = divided_difference_batch(f, nodes)
        return vals.reshape(m_dim, n), nodes.shape[0]
    msets = np.array(list(combinations_with_replacement(range(n), k)), dtype=np.int64)
    ranks = multiset_rank(msets)
    t = msets.shape[0]
    nodes = np.empty((m_dim * t, k + 1))
    nodes[:, 0] = np.repeat(mu, t)
    nodes[:, 1:] = np.tile(lam[msets], (m_dim, 1))
    vals = divided_difference_batch(f, nodes).reshape(m_dim, t)
    table = np.zeros((m_dim, num_multisets(n, k)), dtype=np.complex128)
    table[:, ranks] = vals
    return table, nodes.shape[0]


def moi_eval(req: MoiRequest, backend: str | None = None) -> MoiResult:
    """Evaluate the operator integral exactly via the eigenprojection sum."""
    first = req.first if req.first is not None else req.base
    k = req.order
    mats, cost, sym_evals = [], 0, 0
    for bi in range(len(req.algebra.blocks)):
        mu, u0 = first.eigenvalues[bi], first.eigenvectors[bi]
        lam, u = req.base.eigenvalues[bi], req.base.eigenvectors[bi]
        w_first = u0.conj().T @ req.perturbations[0].mats[bi] @ u
        w_rest = [u.conj().T @ v.mats[bi] @ u for v in req.perturbations[1:]]
        table, n_evals = _symbol_table(req.symbol, mu, lam, k)
        t_rot = contract(table, w_first, w_rest, backend=backend)
        mats.append(u0 @ t_rot @ u.conj().T)
        cost += contraction_cost(mu.size, lam.size, k)
        sym_evals += n_evals
    elem = AlgebraElement(req.algebra, mats)
    return MoiResult(elem, trace(elem), cost, sym_evals, backend or BACKEND)


def _fused_block_trace(f: ScalarFunction, lam: np.ndarray, ws: list[np.ndarray],
                       k: int) -> complex:
    """Block trace through the reduced (k-1)-fold contraction.

    Tracing the eigenprojection sum collapses the outermost projections
    onto each other, so the symbol's last variable fuses with the *first*:
    the reduced symbol is g(x_0..x_{k-1}) = f[k](x_0, ..., x_{k-1}, x_0),
    contracted against V_1..V_{k-1} and traced against V_k."""
    n = lam.size
    if k == 1:
        diag = np.asarray(f.deriv(1)(lam), dtype=np.complex128)
        return complex(np.sum(diag * np.diagonal(ws[0])))
    if k == 2:
        nodes = np.empty((n * n, 3))
        nodes[:, 0] = np.repeat(lam, n)
        nodes[:, 1] = np.tile(lam, n)
        nodes[:, 2] = nodes[:, 0]
        g = divided_difference_batch(f, nodes).reshape(n, n)
        x = g * ws[0]
        return complex(np.einsum("aj,ja->", x, ws[1]))
    if k == 3:
        grid = np.stack(np.meshgrid(lam, lam, lam, indexing="ij"), axis=-1).reshape(-1, 3)
        nodes = np.concatenate([grid, grid[:, 0:1]], axis=1)
        g = divided_difference_batch(f, nodes).reshape(n, n, n)
        x = np.einsum("amj,am,mj->aj", g, ws[0], ws[1])
        return complex(np.einsum("aj,ja->", x, ws[2]))
    if k == 4:
        grid = np.stack(np.meshgrid(lam, lam, lam, lam, indexing="ij"), axis=-1).reshape(-1, 4)
        nodes = np.concatenate([grid, grid[:, 0:1]], axis=1)
        g = divided_difference_batch(f, nodes).reshape(n, n, n, n)
        x = np.einsum("ampj,am,mp,pj->aj", g, ws[0], ws[1], ws[2])
        return complex(np.einsum("aj,ja->", x, ws[3]))
    raise CapabilityError("reduced trace path implemented for order <= 4")


def moi_trace(req: MoiRequest) -> complex:
    """Trace of the operator integral.

    For the uniform pattern this uses the reduced (k-1)-fold contraction;
    a distinct first operator falls back to tracing the full evaluation,
    since the cyclic fusion needs matching outer projections.
    """
    if not req.uniform_pattern:
        return moi_eval(req).trace
    if req.order > 4:
        return moi_eval(req).trace
    total = 0.0 + 0.0j
    for bi, block in enumerate(req.algebra.blocks):
        lam, u = req.base.eigenvalues[bi], req.base.eigenvectors[bi]
        ws = [u.conj().T @ v.mats[bi] @ u for v in req.perturbations]
        total += block.weight * _fused_block_trace(req.symbol, lam, ws, req.order)
    return complex(total)


# ---------------------------------------------------------------------------
# bound ratio reports
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class NormRatioReport:
    """Observed ratio against the L^p bound with its unknown constant stripped."""

    order: int
    alpha: float
    alphas: tuple[float, ...]
    numerator: float
    denominator: float
    ratio: float
    seed: int | None = None
    running_sup: float | None = None

    def as_row(self) -> tuple:
        return (self.order, "/".join(f"{a:g}" for a in self.alphas),
                self.seed if self.seed is not None else "",
                self.ratio, self.running_sup if self.running_sup is not None else "")


def norm_bound_ratio(req: MoiRequest, alpha: float, alphas: Sequence[float], *,
                     store=None, seed: int | None = None,
                     sup_window: tuple[float, float] | None = None) -> NormRatioReport:
    """||T||_alpha / (||f^(k)||_inf prod ||V_l||_alpha_l).

    For alpha = 1 the numerator is the trace seminorm |tr T|, matching the
    bound available at the Hoelder endpoint.  The unknown universal constant
    is tracked as a running supremum in the store, never asserted.
    """
    alphas = tuple(float(a) for a in alphas)
    if len(alphas) != req.order:
        raise DomainError("need one exponent per perturbation")
    if any(not 1.0 < a < math.inf for a in alphas):
        raise DomainError("perturbation exponents must lie in (1, inf)")
    if abs(sum(1.0 / a for a in alphas) - 1.0 / alpha) > 1e-12:
        raise DomainError("Hoelder mismatch: 1/alpha must equal sum of 1/alpha_l")
    res = moi_eval(req)
    numer = abs(res.trace) if alpha == 1.0 else schatten_norm(res.element, alpha)
    window = sup_window
    if window is None:
        spec = req.base.spectrum()
        pad = 0.1 * (1.0 + spec[-1] - spec[0])
        hull = (float(spec[0]) - pad, float(spec[-1]) + pad)
        try:
            lo, hi = req.symbol.sampling_window()
            window = (min(lo, hull[0]), max(hi, hull[1]))
        except CapabilityError:
            window = hull
    fsup = req.symbol.sup_norm(req.order, window)
    denom = fsup * math.prod(schatten_norm(v, a) for v, a in zip(req.perturbations, alphas))
    if denom <= 1e-300:
        ratio = 0.0 if numer <= 1e-300 else math.inf
    else:
        ratio = numer / denom
    running = None
    if store is not None:
        key = {"alpha": alpha, "k": req.order}
        store.append("moi_norm_c", key, ratio, seed=seed)
        running = store.best("moi_norm_c", key)
    return NormRatioReport(req.order, alpha, alphas, numer, denom, ratio,
                           seed=seed, running_sup=running)


def bump_ft_l1(bf: BumpFunction, ell: int) -> float:
    """Cached L^1 norm of the Fourier transform of the bump's ell-th derivative."""
    cached = bf._ft_l1_cache.get(ell)
    if cached is None:
        g = ScalarFunction(f"bump_deriv{ell}", [bf.deriv(ell)], support=bf.support)
        cached = fourier_l1(g, rtol=1e-6).value
        bf._ft_l1_cache[ell] = cached
    return cached


def symbol_bound_scale(bf: BumpFunction, h0: SelfAdjointOperator, k: int) -> float:
    """max(||Phi(H0)||_1, max_l (1/l!) ||FT(Phi^(l))||_1) for l = 1..k."""
    phi_h = apply_function(bf.value, h0)
    best = schatten_norm(phi_h, 1)
    for ell in range(1, k + 1):
        best = max(best, bump_ft_l1(bf, ell) / math.factorial(ell))
    return best


@dataclass(frozen=True)
class CompactTraceBoundReport:
    order: int
    trace_abs: float
    bound: float
    ratio: float
    constant: float
    d_scale: float
    c2k: float
    phi_l1: float
    proj_trace_eps: float
    phi_l1_within_projection: bool
    window: tuple[float, float]
    eps: float


def compact_trace_bound(f: ScalarFunction, h0: SelfAdjointOperator,
                        perturbations: Sequence[AlgebraElement],
                        a: float, b: float, eps: float, *,
                        store=None, c2k: float | None = None,
                        skip_witness: bool = False) -> CompactTraceBoundReport:
    """Trace bound for the uniform-pattern integral of a compactly supported symbol.

    Assembles the fully explicit part of the constant (projection trace,
    bump data, combinatorial factor) and multiplies in the empirical
    estimate of the unknown universal constant; the result is reported, not
    asserted.
    """
    k = len(perturbations)
    if not skip_witness and not claims_class(f, "Fc", k + 1):
        w = class_witness(f, "Fc", k + 1, (a, b))
        if not w.holds:
            raise CapabilityError(f"{f.name} failed the F_c^{k + 1}(({a},{b})) witness")
    if c2k is None:
        if store is not None:
            c2k = store.best("moi_norm_c", {"alpha": 2.0, "k": k})
        if c2k is None:
            from .constants import ensure_symbol_constant
            c2k = ensure_symbol_constant(k, store=store)
    bf = BumpFunction(a, b, eps, depth=max(k, 1))
    d_scale = symbol_bound_scale(bf, h0, k)
    proj_open = spectral_projection(h0, Interval.open(a, b)).trace()
    constant = ((k + 1) * 2 ** k + c2k) * (b - a + 1) ** k * d_scale * (1.0 + proj_open)
    req = MoiRequest(order=k, base=h0, perturbations=tuple(perturbations), symbol=f)
    value = abs(moi_trace(req))
    vnorms = math.prod(v.operator_norm() for v in perturbations)
    bound = constant * f.sup_norm(k, (a, b)) * vnorms
    phi_l1 = schatten_norm(apply_function(bf.value, h0), 1)
    proj_eps = spectral_projection(h0, Interval.open(a - eps, b + eps)).trace()
    ratio = value / bound if bound > 0 else (0.0 if value == 0 else math.inf)
    return CompactTraceBoundReport(k, value, bound, ratio, constant, d_scale,
                                   c2k, phi_l1, proj_eps,
                                   phi_l1 <= proj_eps + 1e-10 * (1 + proj_eps),
                                   (a, b), eps)
