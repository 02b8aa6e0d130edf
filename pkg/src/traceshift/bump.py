"""Smooth plateau bump built from exp(-1/x) ramps.

The bump is exactly 1 on [a, b], exactly 0 outside (a - eps, b + eps), takes
values in [0, 1] and is C-infinity.  It is assembled as (h1 - h2)^4 where h1
ramps 0 -> 1 over [a - eps, a] and h2 ramps 0 -> 1 over [b, b + eps]; both
ramps are normalized integrals of exp(-1/x)-type mollifiers, so every
derivative has a closed form in terms of the ramp integrand.  Derivatives up
to ``depth`` (default cap 8) come from Leibniz products of the ramp stacks,
with the mollifier derivatives generated by the exact polynomial recursion

    d/dx [ exp(-1/x) q(1/x) ] = exp(-1/x) u^2 (q(u) - q'(u)),  u = 1/x.
"""

from __future__ import annotations

import math
from functools import lru_cache

import numpy as np
from numpy.polynomial import polynomial as npoly

from .errors import CapabilityError, DomainError

_UNDERFLOW_U = 700.0  # exp(-u) underflows well before this; snap to 0


@lru_cache(maxsize=64)
def _mollifier_poly(j: int) -> tuple[float, ...]:
    """Ascending coefficients of q_j with exp(-1/x)^(j) = exp(-1/x) q_j(1/x)."""
    q = np.array([1.0])
    for _ in range(j):
        dq = npoly.polyder(q) if q.size > 1 else np.array([0.0])
        diff = npoly.polysub(q, dq)
        q = npoly.polymulx(npoly.polymulx(diff))  # multiply by u^2
    return tuple(q)


def mollifier_deriv(x, j: int = 0) -> np.ndarray:
    """j-th derivative of x -> exp(-1/x) for x > 0, 0 for x <= 0."""
    x = np.asarray(x, dtype=float)
    out = np.zeros(x.shape)
    pos = x > 1.0 / _UNDERFLOW_U
    if np.any(pos):
        u = 1.0 / x[pos]
        val = np.exp(-u)
        if j:
            val = val * npoly.polyval(u, np.asarray(_mollifier_poly(j)))
        out[pos] = val
    return out


def _gauss_legendre(order: int):
    nodes, weights = np.polynomial.legendre.leggauss(order)
    return nodes, weights


class _Ramp:
    """Normalized integral of m(t - lo) * m(hi - t) over [lo, hi].

    The ramp r(x) rises smoothly from 0 at lo to exactly 1 at hi, and
    r^(k) for k >= 1 equals g^(k-1)/Z with g the integrand.
    """

    def __init__(self, lo: float, hi: float, panels: int = 24, order: int = 16):
        self.lo, self.hi = lo, hi
        self._edges = np.linspace(lo, hi, panels + 1)
        self._nodes, self._weights = _gauss_legendre(order)
        panel_ints = []
        for i in range(panels):
            s, e = self._edges[i], self._edges[i + 1]
            panel_ints.append(self._raw_segment(s, e))
        self._prefix = np.concatenate([[0.0], np.cumsum(panel_ints)])
        self.norm = float(self._prefix[-1])

    def integrand(self, t, k: int = 0) -> np.ndarray:
        """g^(k)(t) with g(t) = m(t - lo) m(hi - t), by the Leibniz rule."""
        t = np.asarray(t, dtype=float)
        out = np.zeros(t.shape)
        for j in range(k + 1):
            sign = -1.0 if (k - j) % 2 else 1.0
            out = out + math.comb(k, j) * sign * \
                mollifier_deriv(t - self.lo, j) * mollifier_deriv(self.hi - t, k - j)
        return out

    def _raw_segment(self, s: float, e: float) -> float:
        half = 0.5 * (e - s)
        pts = 0.5 * (s + e) + half * self._nodes
        return float(half * np.dot(self._weights, self.integrand(pts)))

    def value(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        out = np.zeros(x.shape)
        out[x >= self.hi] = 1.0
        mid = (x > self.lo) & (x < self.hi)
        if np.any(mid):
            xm = x[mid]
            idx = np.clip(np.searchsorted(self._edges, xm, side="right") - 1,
                          0, self._edges.size - 2)
            start = self._edges[idx]
            half = 0.5 * (xm - start)
            pts = (start + half)[:, None] + half[:, None] * self._nodes[None, :]
            partial = half * (self.integrand(pts) @ self._weights)
            out[mid] = (self._prefix[idx] + partial) / self.norm
        return out

    def deriv(self, x, k: int) -> np.ndarray:
        """k-th derivative for k >= 1; vanishes outside the open ramp."""
        x = np.asarray(x, dtype=float)
        out = np.zeros(x.shape)
        mid = (x > self.lo) & (x < self.hi)
        if np.any(mid):
            out[mid] = self.integrand(x[mid], k - 1) / self.norm
        return out


def _leibniz_square(stack: np.ndarray) -> np.ndarray:
    """Derivative stack of w^2 from the stack of w (axis 0 = order)."""
    depth = stack.shape[0] - 1
    out = np.zeros_like(stack)
    for m in range(depth + 1):
        acc = np.zeros_like(stack[0])
        for j in range(m + 1):
            acc = acc + math.comb(m, j) * stack[j] * stack[m - j]
        out[m] = acc
    return out


class BumpFunction:
    """Plateau bump: 1 on [a, b], supported in (a - eps, b + eps)."""

    def __init__(self, a: float, b: float, eps: float, depth: int = 8,
                 panels: int = 24, order: int = 16):
        if not a < b:
            raise DomainError(f"need a < b, got a={a}, b={b}")
        if not eps > 0:
            raise DomainError(f"need eps > 0, got {eps}")
        if depth < 0:
            raise DomainError("depth must be nonnegative")
        self.a, self.b, self.eps = float(a), float(b), float(eps)
        self.depth = int(depth)
        self.a_eps = self.a - self.eps
        self.b_eps = self.b + self.eps
        self._up = _Ramp(self.a_eps, self.a, panels, order)
        self._down = _Ramp(self.b, self.b_eps, panels, order)
        self._ft_l1_cache: dict[int, object] = {}

    @property
    def support(self) -> tuple[float, float]:
        return (self.a_eps, self.b_eps)

    def _w_stack(self, x: np.ndarray, depth: int) -> np.ndarray:
        """Stack of (h1 - h2)^(j), j = 0..depth."""
        stack = np.zeros((depth + 1, x.size))
        stack[0] = self._up.value(x) - self._down.value(x)
        for j in range(1, depth + 1):
            stack[j] = self._up.deriv(x, j) - self._down.deriv(x, j)
        return stack

    def derivative_stack(self, x, depth: int) -> np.ndarray:
        """Stack of bump derivatives, shape (depth+1,) + shape(x)."""
        if depth > self.depth:
            raise CapabilityError(
                f"bump was built with derivative depth {self.depth}, requested {depth}")
        x = np.atleast_1d(np.asarray(x, dtype=float))
        shape = x.shape
        x = x.ravel()
        w = self._w_stack(x, depth)
        phi = _leibniz_square(_leibniz_square(w))
        # exact plateau/support branches
        plateau = (x >= self.a) & (x <= self.b)
        outside = (x <= self.a_eps) | (x >= self.b_eps)
        phi[0][plateau] = 1.0
        phi[0][outside] = 0.0
        if depth >= 1:
            phi[1:, plateau] = 0.0
            phi[1:, outside] = 0.0
        return phi.reshape((depth + 1,) + shape)

    def value(self, x) -> np.ndarray:
        out = self.derivative_stack(x, 0)[0]
        return out if np.ndim(x) else float(out.reshape(-1)[0])

    __call__ = value

    def deriv(self, k: int):
        if k == 0:
            return self.value

        def _d(x, _k=k):
            out = self.derivative_stack(x, _k)[_k]
            return out if np.ndim(x) else float(out.reshape(-1)[0])

        return _d

    def __repr__(self):
        return f"BumpFunction(a={self.a}, b={self.b}, eps={self.eps}, depth={self.depth})"
