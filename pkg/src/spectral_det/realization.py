"""Linear systems (-A, B, C) and their impulse responses phi(t) = C exp(-tA) B.

Two concrete state spaces are supported:

* ``MatrixRealization``: A is a dense n x n matrix, B has shape (n, m) and
  C has shape (p, n).  Scalar systems have m = p = 1.
* ``DiagonalRealization``: A is multiplication by u + s0 on L^2(0, inf),
  B is multiplication by a profile b(u) and C integrates against c(u).
  Several channels (b_k, c_k) may be stacked, which is how direct sums of
  such systems are represented.

Every diagonal system can be sampled on a quadrature rule, giving a matrix
system with A = diag(u_i + s0), B_i = sqrt(w_i) b(u_i), C_i = sqrt(w_i) c(u_i).
All state-space computations downstream work on that matrix form.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import linalg

from . import nystrom
from .errors import AccuracyError, DomainError, PoleError, StabilityError

STABILITY_TOL = 1e-10
DIAGONAL_NODES = 128
INFINITY = "infinity"


def _as_2d(B, column: bool) -> np.ndarray:
    B = np.asarray(B, dtype=complex)
    if B.ndim == 1:
        B = B[:, None] if column else B[None, :]
    if B.ndim != 2:
        raise DomainError(f"expected a vector or matrix, got shape {B.shape}")
    return B


@dataclass(frozen=True, eq=False)
class MatrixRealization:
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    check: bool = True

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=complex))
        B = _as_2d(self.B, column=True)
        C = _as_2d(self.C, column=False)
        n = A.shape[0]
        if A.shape != (n, n) or B.shape[0] != n or C.shape[1] != n:
            raise DomainError(f"inconsistent shapes A{A.shape} B{B.shape} C{C.shape}")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "C", C)
        if self.check:
            rate = self.decay_rate
            if not rate > STABILITY_TOL:
                raise StabilityError(f"min Re eig(A) = {rate:.3g} is not positive")

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def is_diagonal(self) -> bool:
        return not np.any(self.A - np.diag(np.diag(self.A)))

    @property
    def scalar(self) -> bool:
        return self.B.shape[1] == 1 and self.C.shape[0] == 1

    @property
    def decay_rate(self) -> float:
        ev = np.diag(self.A) if self.is_diagonal else linalg.eigvals(self.A)
        return float(np.min(ev.real))


@dataclass(frozen=True, eq=False)
class DiagonalRealization:
    """Howland-type system over (0, inf), or over (0, support) if given.

    ``b`` and ``c`` are vectorised callables, or equal-length tuples of them
    (one per channel).  ``scale`` sets the quadrature map scale.
    """
    b: Callable | tuple
    c: Callable | tuple
    s0: float = 0.0
    support: float | None = None
    scale: float = 1.0

    def __post_init__(self):
        b = tuple(self.b) if isinstance(self.b, (tuple, list)) else (self.b,)
        c = tuple(self.c) if isinstance(self.c, (tuple, list)) else (self.c,)
        if len(b) != len(c) or not b:
            raise DomainError("b and c need the same positive number of channels")
        if self.s0 < 0:
            raise DomainError("spectral offset s0 must be non-negative")
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "c", c)

    @property
    def channels(self) -> int:
        return len(self.b)

    @property
    def decay_rate(self) -> float:
        return float(self.s0)

    def rule(self, n: int = DIAGONAL_NODES) -> nystrom.QuadratureRule:
        if self.support is not None:
            return nystrom.build_rule(n, "linear", self.support)
        return nystrom.build_rule(n, "rational", self.scale)


Realization = MatrixRealization | DiagonalRealization


@dataclass(frozen=True)
class ImpulseResponse:
    """phi(t) with a known exponential decay rate (0 when only algebraic)."""
    evaluator: Callable
    decay_rate: float = 0.0
    spot_check: bool = field(default=True, repr=False)

    def __post_init__(self):
        if self.spot_check and self.decay_rate > 0:
            t = np.logspace(0, np.log10(1 + 30 / self.decay_rate), 12)
            v = np.abs(np.array([self.evaluator(s) for s in t]))
            ratio = v * np.exp(self.decay_rate * t)
            if not np.all(np.isfinite(ratio)) or ratio.max() > 1e6 * max(ratio[0], 1e-300):
                raise StabilityError("impulse response violates its stated decay bound")

    def __call__(self, t):
        return self.evaluator(t)


def discretize(sys: Realization, n: int = DIAGONAL_NODES) -> MatrixRealization:
    """Sample a diagonal system on its rule; matrix systems pass through."""
    if isinstance(sys, MatrixRealization):
        return sys
    rule = sys.rule(n)
    u, sw = rule.nodes, np.sqrt(rule.weights)
    k = sys.channels
    a = np.tile(u + sys.s0, k)
    B = np.concatenate([sw * np.asarray(bf(u), dtype=complex) * np.ones_like(u) for bf in sys.b])
    C = np.concatenate([sw * np.asarray(cf(u), dtype=complex) * np.ones_like(u) for cf in sys.c])
    return MatrixRealization(np.diag(a), B, C, check=False)


def _matrix_response(sys: MatrixRealization, t: np.ndarray) -> np.ndarray:
    if sys.is_diagonal:
        a = np.diag(sys.A)
        E = np.exp(-np.multiply.outer(t, a))
        out = np.einsum("pi,...i,im->...pm", sys.C, E, sys.B)
    else:
        out = np.array([sys.C @ linalg.expm(-s * sys.A) @ sys.B for s in t.ravel()])
        out = out.reshape(t.shape + out.shape[1:])
    return out[..., 0, 0] if sys.scalar else out


def impulse_response(sys: Realization, t, tol: float = 1e-8):
    """phi(t) = C exp(-tA) B for t > 0 (scalar or array)."""
    tt = np.asarray(t, dtype=float)
    if np.any(tt <= 0):
        raise DomainError("impulse response needs t > 0")
    if isinstance(sys, MatrixRealization):
        out = _matrix_response(sys, tt)
    else:
        coarse = _matrix_response(discretize(sys, DIAGONAL_NODES), tt)
        out = _matrix_response(discretize(sys, 2 * DIAGONAL_NODES), tt)
        err = np.max(np.abs(out - coarse), initial=0.0)
        if err > tol * max(1.0, np.max(np.abs(out), initial=0.0)):
            raise AccuracyError(f"diagonal impulse response unresolved (refinement change {err:.2e})")
    return out[()] if np.ndim(out) == 0 else out


def response(sys: Realization) -> ImpulseResponse:
    """Wrap a system's impulse response as an ImpulseResponse value."""
    if isinstance(sys, MatrixRealization):
        return ImpulseResponse(lambda t: impulse_response(sys, t), sys.decay_rate)
    ms = discretize(sys)
    return ImpulseResponse(lambda t: _matrix_response(ms, np.asarray(t, float))[()], sys.decay_rate)


def rational_realization(poles: Sequence) -> Realization:
    """Howland system with phi(t) = sum_j 1/(t - a_j)^r_j, Re a_j < 0.

    ``poles`` is a sequence of (a, r) pairs.
    """
    pieces = []
    for a, r in poles:
        a, r = complex(a), int(r)
        if not a.real < 0:
            raise StabilityError(f"pole {a} must have negative real part")
        if r < 1:
            raise DomainError(f"pole order must be a positive integer, got {r}")

        def b(u, a=a, r=r):
            return u ** ((r - 1) / 2) * np.exp(a * u / 2)

        def c(u, a=a, r=r):
            return u ** ((r - 1) / 2) * np.exp(a * u / 2) / math.factorial(r - 1)

        pieces.append(DiagonalRealization(b, c, scale=1.0 / abs(a.real)))
    if not pieces:
        raise DomainError("need at least one pole")
    out = pieces[0]
    for p in pieces[1:]:
        out = direct_sum(out, p)
    return out


def direct_sum(s1: Realization, s2: Realization) -> Realization:
    """System whose impulse response is phi_1 + phi_2."""
    if isinstance(s1, MatrixRealization) and isinstance(s2, MatrixRealization):
        if s1.B.shape[1] != s2.B.shape[1] or s1.C.shape[0] != s2.C.shape[0]:
            raise TypeError("direct sum needs matching input and output dimensions")
        return MatrixRealization(linalg.block_diag(s1.A, s2.A),
                                 np.vstack([s1.B, s2.B]), np.hstack([s1.C, s2.C]))
    if isinstance(s1, DiagonalRealization) and isinstance(s2, DiagonalRealization):
        if s1.s0 != s2.s0 or s1.support != s2.support:
            raise TypeError("diagonal systems need the same offset and support")
        return DiagonalRealization(s1.b + s2.b, s1.c + s2.c, s1.s0, s1.support,
                                   min(s1.scale, s2.scale))
    raise TypeError("direct sum of a matrix and a diagonal system is not defined")


def darboux_shift(sys: Realization, zeta) -> Realization:
    """Replace B by (zeta I + A)(zeta I - A)^{-1} B.

    ``zeta`` may be the string "infinity" (or ``np.inf``), which is the identity.
    """
    if (isinstance(zeta, str) and zeta == INFINITY) or (np.isscalar(zeta) and np.isinf(zeta)):
        return sys
    zeta = complex(zeta)
    if isinstance(sys, MatrixRealization):
        M = zeta * np.eye(sys.n) - sys.A
        smin = linalg.svdvals(M).min()
        if smin <= 1e-12 * max(1.0, np.linalg.norm(sys.A, 2)):
            raise PoleError(f"zeta I - A is singular at zeta = {zeta}")
        Bn = (zeta * np.eye(sys.n) + sys.A) @ linalg.solve(M, sys.B)
        return MatrixRealization(sys.A, Bn, sys.C)
    if abs(zeta.imag) < 1e-14 and zeta.real >= sys.s0:
        raise PoleError(f"zeta = {zeta} lies on the spectrum of A")
    s0 = sys.s0
    b = tuple((lambda u, f=f: (zeta + u + s0) / (zeta - u - s0) * f(u)) for f in sys.b)
    return DiagonalRealization(b, sys.c, s0, sys.support, sys.scale)


def hat_system(s1: Realization, s2: Realization, lam: complex,
               n: int = DIAGONAL_NODES) -> MatrixRealization:
    """Block system with impulse response [[0, lam phi], [-psi, 0]].

    phi and psi are the responses of s1 and s2, which must share A.  Diagonal
    systems are first sampled on the same rule.
    """
    s1 = discretize(s1, n)
    s2 = discretize(s2, n)
    if s1.A.shape != s2.A.shape or not np.allclose(s1.A, s2.A, rtol=0, atol=1e-14):
        raise TypeError("hat system needs both systems to share the same A")
    if not (s1.scalar and s2.scalar):
        raise TypeError("hat system is built from scalar systems")
    k = s1.n
    Z = np.zeros((k, 1))
    A = linalg.block_diag(s1.A, s1.A)
    B = np.block([[Z, s1.B], [s2.B, Z]])
    C = np.block([[lam * s1.C, Z.T], [Z.T, -s2.C]])
    return MatrixRealization(A, B, C)


def scalar_system(a: complex = 1.0, b: complex = 1.0, c: complex = 1.0) -> MatrixRealization:
    """One-dimensional system A = a, B = b, C = c."""
    return MatrixRealization([[a]], [b], [c])


def soliton_system(rates: Sequence[float], weights: Sequence[float]) -> MatrixRealization:
    """Diagonal matrix system A = diag(a_k), B = 1, C_k = 2 a_k w_k.

    For positive rates and weights its potential is a reflectionless
    multi-soliton; with one rate a and weight w it is -2 a^2 sech^2(a(x - x0)),
    x0 = log(w) / (2a).
    """
    a = np.asarray(rates, dtype=float)
    w = np.asarray(weights, dtype=float)
    return MatrixRealization(np.diag(a), np.ones_like(a), 2 * a * w)
