"""Block-diagonal matrix algebras with weighted traces.

A :class:`TraceAlgebra` is a finite direct sum of full matrix blocks, each
carrying a strictly positive trace weight.  The weighted trace

    tr(A) = sum_b  w_b * Tr(A_b)

is faithful, normal and finite, which is enough structure to compute
counting functions, noncommutative L^p norms and generalized s-numbers
exactly while keeping every operator a plain dense matrix.  All values are
immutable after construction; operations are pure.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import (
    DecompositionError,
    DomainError,
    SingularityError,
    StructureError,
)

HERMITICITY_RTOL = 1e-10
PROJECTION_RTOL = 1e-10
DECOMPOSITION_RTOL = 1e-10


def _frozen(a: np.ndarray) -> np.ndarray:
    out = np.array(a, dtype=np.complex128, order="C", copy=True)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class Block:
    """One matrix block: dimension and trace weight."""

    dim: int
    weight: float

    def __post_init__(self):
        if int(self.dim) < 1 or int(self.dim) != self.dim:
            raise DomainError(f"block dimension must be a positive integer, got {self.dim}")
        if not (self.weight > 0.0 and math.isfinite(self.weight)):
            raise DomainError(f"block weight must be positive and finite, got {self.weight}")


@dataclass(frozen=True)
class TraceAlgebra:
    """Direct sum of matrix blocks with positive trace weights."""

    blocks: tuple[Block, ...]

    def __post_init__(self):
        if not self.blocks:
            raise DomainError("algebra needs at least one block")
        object.__setattr__(self, "blocks", tuple(
            b if isinstance(b, Block) else Block(*b) for b in self.blocks
        ))

    @classmethod
    def of(cls, spec: Sequence[tuple[int, float]]) -> "TraceAlgebra":
        return cls(tuple(Block(int(d), float(w)) for d, w in spec))

    @property
    def total_dimension(self) -> int:
        return sum(b.dim for b in self.blocks)

    @property
    def weights(self) -> tuple[float, ...]:
        return tuple(b.weight for b in self.blocks)

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(b.dim for b in self.blocks)

    def trace_of_identity(self) -> float:
        return sum(b.weight * b.dim for b in self.blocks)

    # -- element constructors -------------------------------------------------

    def element(self, mats: Sequence[np.ndarray], hermitian: bool | None = None) -> "AlgebraElement":
        return AlgebraElement(self, tuple(_frozen(m) for m in mats), hermitian)

    def zero(self) -> "AlgebraElement":
        return self.element([np.zeros((b.dim, b.dim)) for b in self.blocks], hermitian=True)

    def identity(self) -> "AlgebraElement":
        return self.element([np.eye(b.dim) for b in self.blocks], hermitian=True)

    def diagonal(self, values: Sequence[Sequence[float]]) -> "AlgebraElement":
        if len(values) != len(self.blocks):
            raise StructureError("one value sequence per block required")
        mats = [np.diag(np.asarray(v, dtype=np.complex128)) for v in values]
        herm = all(np.allclose(np.imag(np.asarray(v)), 0.0) for v in values)
        return self.element(mats, hermitian=herm)


class AlgebraElement:
    """Immutable block-diagonal algebra element.

    ``hermitian`` may be passed explicitly; when True the construction
    verifies that the max-entry distance to the conjugate transpose stays
    below ``HERMITICITY_RTOL * (1 + max-entry)``.  Arithmetic on elements
    propagates the flag by algebraic closure (sums of hermitians, real
    scalings) without re-verification, since cancellation-heavy
    combinations can shrink the result far below the operands' rounding
    noise.
    """

    __slots__ = ("algebra", "mats", "hermitian")

    def __init__(self, algebra: TraceAlgebra, mats: Sequence[np.ndarray],
                 hermitian: bool | None = None, *, trust_flag: bool = False):
        mats = tuple(_frozen(m) for m in mats)
        if len(mats) != len(algebra.blocks):
            raise StructureError(
                f"expected {len(algebra.blocks)} blocks, got {len(mats)}")
        for m, b in zip(mats, algebra.blocks):
            if m.shape != (b.dim, b.dim):
                raise StructureError(
                    f"block shape {m.shape} does not match algebra block dim {b.dim}")
        if hermitian is None:
            hermitian = _is_hermitian(mats)
        elif hermitian and not trust_flag and not _is_hermitian(mats):
            raise StructureError("element declared hermitian is not hermitian within tolerance")
        object.__setattr__(self, "algebra", algebra)
        object.__setattr__(self, "mats", mats)
        object.__setattr__(self, "hermitian", bool(hermitian))

    def __setattr__(self, *a):  # pragma: no cover - guard
        raise AttributeError("AlgebraElement is immutable")

    # -- arithmetic -----------------------------------------------------------

    def _check_same(self, other: "AlgebraElement"):
        if self.algebra is not other.algebra and self.algebra != other.algebra:
            raise StructureError("operands belong to different algebras")

    def __add__(self, other: "AlgebraElement") -> "AlgebraElement":
        self._check_same(other)
        return AlgebraElement(self.algebra,
                              [a + b for a, b in zip(self.mats, other.mats)],
                              hermitian=self.hermitian and other.hermitian,
                              trust_flag=True)

    def __sub__(self, other: "AlgebraElement") -> "AlgebraElement":
        self._check_same(other)
        return AlgebraElement(self.algebra,
                              [a - b for a, b in zip(self.mats, other.mats)],
                              hermitian=self.hermitian and other.hermitian,
                              trust_flag=True)

    def __neg__(self) -> "AlgebraElement":
        return AlgebraElement(self.algebra, [-a for a in self.mats], hermitian=self.hermitian,
                              trust_flag=True)

    def __mul__(self, c) -> "AlgebraElement":
        c = complex(c)
        herm = self.hermitian and abs(c.imag) == 0.0
        return AlgebraElement(self.algebra, [c * a for a in self.mats], hermitian=herm,
                              trust_flag=True)

    __rmul__ = __mul__

    def __matmul__(self, other: "AlgebraElement") -> "AlgebraElement":
        self._check_same(other)
        return AlgebraElement(self.algebra,
                              [a @ b for a, b in zip(self.mats, other.mats)])

    def adjoint(self) -> "AlgebraElement":
        return AlgebraElement(self.algebra, [a.conj().T for a in self.mats],
                              hermitian=self.hermitian, trust_flag=True)

    def power(self, k: int) -> "AlgebraElement":
        if k < 0:
            raise DomainError("negative powers are not defined; use resolvent instead")
        if k == 0:
            return self.algebra.identity()
        out = self
        for _ in range(k - 1):
            out = out @ self
        return out

    def conjugated(self, unitary: "AlgebraElement") -> "AlgebraElement":
        """U A U* for a block unitary U."""
        self._check_same(unitary)
        return AlgebraElement(self.algebra,
                              [u @ a @ u.conj().T for u, a in zip(unitary.mats, self.mats)],
                              hermitian=self.hermitian, trust_flag=True)

    # -- metrics --------------------------------------------------------------

    def max_entry(self) -> float:
        return max((float(np.max(np.abs(m))) if m.size else 0.0) for m in self.mats)

    def operator_norm(self) -> float:
        return max(float(np.linalg.norm(m, 2)) for m in self.mats)

    def frobenius(self) -> float:
        return math.sqrt(sum(float(np.linalg.norm(m, "fro")) ** 2 for m in self.mats))

    def __repr__(self):
        dims = "+".join(str(b.dim) for b in self.algebra.blocks)
        return f"<AlgebraElement dims={dims} hermitian={self.hermitian}>"


def _is_hermitian(mats: Sequence[np.ndarray]) -> bool:
    scale = 1.0 + max((float(np.max(np.abs(m))) if m.size else 0.0) for m in mats)
    return all(float(np.max(np.abs(m - m.conj().T))) <= HERMITICITY_RTOL * scale
               if m.size else True for m in mats)


@dataclass(frozen=True)
class Interval:
    """Real interval with explicit endpoint membership flags."""

    lo: float
    hi: float
    closed_lo: bool = True
    closed_hi: bool = True

    @classmethod
    def half_open(cls, lo: float, hi: float) -> "Interval":
        """[lo, hi) - the convention used by counting functions."""
        return cls(lo, hi, True, False)

    @classmethod
    def open(cls, lo: float, hi: float) -> "Interval":
        return cls(lo, hi, False, False)

    def contains(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x)
        lo_ok = (x >= self.lo) if self.closed_lo else (x > self.lo)
        hi_ok = (x <= self.hi) if self.closed_hi else (x < self.hi)
        return lo_ok & hi_ok


class SelfAdjointOperator:
    """Hermitian algebra element with its cached spectral decomposition.

    Eigenvalues are sorted ascending within each block.  ``decomposition_residual``
    is the largest Frobenius defect of U diag(lam) U* against the element and
    must stay below ``DECOMPOSITION_RTOL * (1 + |H|)``.
    """

    __slots__ = ("element", "eigenvalues", "eigenvectors", "decomposition_residual")

    def __init__(self, element: AlgebraElement):
        if not element.hermitian:
            raise StructureError("self-adjoint operator requires a hermitian element")
        evals, evecs, resid = [], [], 0.0
        for m in element.mats:
            lam, u = np.linalg.eigh(m)
            evals.append(_frozen_real(lam))
            evecs.append(_frozen(u))
            rec = (u * lam) @ u.conj().T
            resid = max(resid, float(np.linalg.norm(rec - m, "fro")))
        scale = 1.0 + element.max_entry()
        if resid > DECOMPOSITION_RTOL * scale:
            raise DecompositionError(
                f"eigendecomposition residual {resid:.3e} exceeds {DECOMPOSITION_RTOL * scale:.3e}")
        object.__setattr__(self, "element", element)
        object.__setattr__(self, "eigenvalues", tuple(evals))
        object.__setattr__(self, "eigenvectors", tuple(evecs))
        object.__setattr__(self, "decomposition_residual", resid)

    def __setattr__(self, *a):  # pragma: no cover - guard
        raise AttributeError("SelfAdjointOperator is immutable")

    @property
    def algebra(self) -> TraceAlgebra:
        return self.element.algebra

    def spectrum(self) -> np.ndarray:
        """All eigenvalues, ascending, across blocks."""
        return np.sort(np.concatenate(self.eigenvalues))

    def weighted_eigenvalues(self) -> list[tuple[float, float]]:
        """(eigenvalue, trace weight) pairs across blocks."""
        out = []
        for lam, b in zip(self.eigenvalues, self.algebra.blocks):
            out.extend((float(x), b.weight) for x in lam)
        out.sort(key=lambda t: t[0])
        return out

    def shifted(self, v: AlgebraElement, s: float = 1.0) -> "SelfAdjointOperator":
        """Diagonalize H + s V."""
        return SelfAdjointOperator(self.element + s * v)

    def counting(self, a: float, lam: float) -> float:
        """Weighted count of the spectrum in [a, lam): tr(E_H([a, lam)))."""
        total = 0.0
        for ev, b in zip(self.eigenvalues, self.algebra.blocks):
            total += b.weight * int(np.count_nonzero((ev >= a) & (ev < lam)))
        return total

    def __repr__(self):
        return f"<SelfAdjointOperator spectrum=[{self.spectrum()[0]:.4g}, {self.spectrum()[-1]:.4g}]>"


def _frozen_real(a: np.ndarray) -> np.ndarray:
    out = np.array(a, dtype=np.float64, order="C", copy=True)
    out.setflags(write=False)
    return out


def diagonalize(element: AlgebraElement) -> SelfAdjointOperator:
    return SelfAdjointOperator(element)


@dataclass(frozen=True)
class SpectralProjection:
    """Spectral projection E_H(interval), kept with its source operator."""

    element: AlgebraElement
    interval: Interval
    source: SelfAdjointOperator

    def trace(self) -> float:
        return trace(self.element).real


# ---------------------------------------------------------------------------
# operations
# ---------------------------------------------------------------------------

def trace(a: AlgebraElement) -> complex:
    """Weighted trace sum_b w_b Tr(A_b); real for hermitian input."""
    val = sum(b.weight * complex(np.trace(m)) for m, b in zip(a.mats, a.algebra.blocks))
    return val


def schatten_norm(a: AlgebraElement, p: float) -> float:
    """Noncommutative L^p norm (tr |A|^p)^(1/p) from singular values.

    p = inf returns the operator norm (largest singular value, unweighted).
    """
    if p != math.inf and p < 1:
        raise DomainError(f"schatten exponent must satisfy p >= 1, got {p}")
    svals = [np.linalg.svd(m, compute_uv=False) if m.size else np.zeros(0) for m in a.mats]
    if p == math.inf:
        return max((float(s[0]) if s.size else 0.0) for s in svals)
    total = sum(b.weight * float(np.sum(s ** p)) for s, b in zip(svals, a.algebra.blocks))
    return float(total ** (1.0 / p))


class SNumberFunction:
    """Right-continuous nonincreasing step function t -> mu_t(A).

    Singular values sorted descending, each occupying measure = its block
    weight on the t-axis; zero beyond the total accumulated mass.
    """

    __slots__ = ("values", "masses", "edges")

    def __init__(self, values: np.ndarray, masses: np.ndarray):
        order = np.argsort(-values, kind="stable")
        self.values = _frozen_real(values[order])
        self.masses = _frozen_real(masses[order])
        edges = np.concatenate([[0.0], np.cumsum(self.masses)])
        self.edges = _frozen_real(edges)

    def __call__(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        idx = np.searchsorted(self.edges, t, side="right") - 1
        out = np.zeros(t.shape)
        ok = (idx >= 0) & (idx < self.values.size) & (t >= 0)
        out[ok] = self.values[idx[ok]]
        return out if out.shape else float(out)

    def total_mass(self) -> float:
        return float(self.edges[-1])

    def integral(self) -> float:
        """int_0^inf mu_t dt, which equals the weighted trace norm."""
        return float(np.dot(self.values, self.masses))


def s_numbers(a: AlgebraElement) -> SNumberFunction:
    vals, masses = [], []
    for m, b in zip(a.mats, a.algebra.blocks):
        s = np.linalg.svd(m, compute_uv=False)
        vals.append(s)
        masses.append(np.full(s.size, b.weight))
    return SNumberFunction(np.concatenate(vals), np.concatenate(masses))


def spectral_projection(h: SelfAdjointOperator, interval: Interval | tuple) -> SpectralProjection:
    """Sum of eigenprojections for eigenvalues inside the interval.

    Endpoint membership honors the declared open/closed flags exactly; an
    empty interval yields the zero projection.
    """
    if not isinstance(interval, Interval):
        interval = Interval(*interval)
    mats = []
    for lam, u in zip(h.eigenvalues, h.eigenvectors):
        mask = interval.contains(lam)
        cols = u[:, mask]
        mats.append(cols @ cols.conj().T)
    elem = AlgebraElement(h.algebra, mats, hermitian=True)
    return SpectralProjection(elem, interval, h)


def apply_function(f: Callable, h: SelfAdjointOperator) -> AlgebraElement:
    """U diag(f(lam)) U* per block; hermitian whenever f is real on the spectrum."""
    mats = []
    real = True
    for lam, u in zip(h.eigenvalues, h.eigenvectors):
        vals = np.asarray(f(lam), dtype=np.complex128)
        if vals.shape != lam.shape:
            vals = np.broadcast_to(vals, lam.shape).astype(np.complex128)
        if not np.all(np.isfinite(vals)):
            raise DomainError("function undefined (non-finite) at an eigenvalue")
        scale = 1.0 + float(np.max(np.abs(vals))) if vals.size else 1.0
        if float(np.max(np.abs(vals.imag))) > HERMITICITY_RTOL * scale:
            real = False
        mats.append((u * vals) @ u.conj().T)
    return AlgebraElement(h.algebra, mats, hermitian=real or None)


RESOLVENT_SINGULARITY_RTOL = 1e-12


def resolvent(h: SelfAdjointOperator, z: complex) -> AlgebraElement:
    """(H - z)^(-1) through the eigendecomposition.

    Raises :class:`SingularityError` when z sits within tolerance of the
    spectrum (which covers every real z inside the spectrum).
    """
    z = complex(z)
    spec = h.spectrum()
    scale = 1.0 + float(np.max(np.abs(spec))) if spec.size else 1.0
    if float(np.min(np.abs(spec - z))) <= RESOLVENT_SINGULARITY_RTOL * scale:
        raise SingularityError(f"resolvent point {z} is within tolerance of the spectrum")
    return apply_function(lambda lam: 1.0 / (lam - z), h)
