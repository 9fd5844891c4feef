"""Quadrature on the half line, Nystrom discretisation and Fredholm determinants.

Gauss-Legendre nodes on (-1, 1) are pushed to (0, inf) by one of two maps

    rational:     t = L (1 + s) / (1 - s)
    exponential:  t = -L log((1 - s) / 2)

or to a finite interval (0, L) by the affine map t = L (1 + s) / 2.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np
from scipy import linalg

from .errors import DomainError, KernelEvaluationError

MAP_KINDS = ("rational", "exponential", "linear")
DEFAULT_NODES = 64
MAX_NODES = 512


@dataclass(frozen=True, eq=False)
class QuadratureRule:
    nodes: np.ndarray
    weights: np.ndarray
    map_kind: str
    scale: float

    def __post_init__(self):
        if len(self.nodes) != len(self.weights):
            raise DomainError("nodes and weights differ in length")
        if np.any(self.weights <= 0) or np.any(np.diff(self.nodes) <= 0):
            raise DomainError("rule needs increasing nodes and positive weights")

    def __len__(self):
        return len(self.nodes)

    def integrate(self, f: Callable) -> complex:
        """Sum of w_i f(t_i); f must accept an array."""
        return np.sum(self.weights * f(self.nodes))

    def shifted(self, a: float) -> "QuadratureRule":
        """The same rule moved to (a, a + ...)."""
        return QuadratureRule(self.nodes + a, self.weights, self.map_kind, self.scale)


def build_rule(n: int, map_kind: str = "rational", L: float = 1.0) -> QuadratureRule:
    """Mapped Gauss-Legendre rule with n nodes."""
    if n < 2:
        raise DomainError(f"need at least 2 nodes, got {n}")
    if L <= 0:
        raise DomainError(f"scale must be positive, got {L}")
    s, w = np.polynomial.legendre.leggauss(int(n))
    if map_kind == "rational":
        t = L * (1 + s) / (1 - s)
        wt = w * 2 * L / (1 - s) ** 2
    elif map_kind == "exponential":
        t = -L * np.log((1 - s) / 2)
        wt = w * L / (1 - s)
    elif map_kind == "linear":
        t = L * (1 + s) / 2
        wt = w * L / 2
    else:
        raise DomainError(f"unknown map kind {map_kind!r}; expected one of {MAP_KINDS}")
    return QuadratureRule(t, wt, map_kind, float(L))


@dataclass(frozen=True, eq=False)
class DiscretizedOperator:
    rule: QuadratureRule
    M: np.ndarray

    def __post_init__(self):
        n = len(self.rule)
        if self.M.shape != (n, n):
            raise DomainError(f"matrix shape {self.M.shape} does not match rule length {n}")


def discretize_kernel(k: Callable, rule: QuadratureRule) -> DiscretizedOperator:
    """Symmetrised Nystrom matrix sqrt(w_i) k(t_i, t_j) sqrt(w_j).

    ``k`` is called once with broadcast arrays of shape (n, 1) and (1, n).
    """
    t = rule.nodes
    K = np.asarray(k(t[:, None], t[None, :]))
    K = np.broadcast_to(K, (len(t), len(t)))
    bad = ~np.isfinite(K)
    if bad.any():
        i, j = np.argwhere(bad)[0]
        raise KernelEvaluationError(
            f"kernel not finite at node pair ({i}, {j}): t=({t[i]!r}, {t[j]!r})")
    sw = np.sqrt(rule.weights)
    # K * outer(sw, sw) keeps symmetric kernels exactly symmetric
    return DiscretizedOperator(rule, K * np.outer(sw, sw))


class LogDet(NamedTuple):
    """log|det| and principal argument, returned when det itself overflows."""
    log_abs: float
    arg: float
    overflow: bool = True


def fredholm_logdet(op: DiscretizedOperator | np.ndarray, z: complex = 1.0) -> LogDet:
    M = op.M if isinstance(op, DiscretizedOperator) else np.asarray(op)
    n = M.shape[0]
    lu, piv = linalg.lu_factor(np.eye(n) + z * M, check_finite=True)
    d = np.diag(lu)
    sign = (-1.0) ** np.count_nonzero(piv != np.arange(n))
    with np.errstate(divide="ignore"):
        log_abs = float(np.sum(np.log(np.abs(d))))
    arg = float(np.angle(sign * np.prod(d / np.abs(d)))) if np.all(d != 0) else 0.0
    return LogDet(log_abs, arg, log_abs > 700.0)


def fredholm_det(op: DiscretizedOperator | np.ndarray, z: complex = 1.0):
    """det(I + z M) by LU with partial pivoting.

    Returns a complex scalar, or a ``LogDet`` when the value would overflow.
    """
    ld = fredholm_logdet(op, z)
    if ld.overflow:
        return ld
    if ld.log_abs == -np.inf:
        return 0j
    val = np.exp(ld.log_abs + 1j * ld.arg)
    return complex(val)


def eigenvalues(op: DiscretizedOperator | np.ndarray) -> np.ndarray:
    """Eigenvalues of the Nystrom matrix, largest modulus first."""
    M = op.M if isinstance(op, DiscretizedOperator) else np.asarray(op)
    if np.allclose(M, np.conj(M.T), rtol=0, atol=1e-14 * max(1.0, np.abs(M).max(initial=0))):
        ev = linalg.eigvalsh(0.5 * (M + np.conj(M.T))).astype(complex)
    else:
        ev = linalg.eigvals(M)
    return ev[np.argsort(-np.abs(ev), kind="stable")]


class DetResult(NamedTuple):
    det: complex
    nodes: int
    converged: bool


def auto_det(kernel: Callable, z: complex = 1.0, map_kind: str = "rational",
             L: float = 1.0, tol: float = 1e-10, n0: int = DEFAULT_NODES,
             nmax: int = MAX_NODES) -> DetResult:
    """det(I + z K), doubling the node count until successive values agree."""
    n = max(2, int(n0))
    prev = complex(fredholm_det(discretize_kernel(kernel, build_rule(n, map_kind, L)), z))
    while 2 * n <= nmax:
        n *= 2
        cur = complex(fredholm_det(discretize_kernel(kernel, build_rule(n, map_kind, L)), z))
        if abs(cur - prev) <= tol * max(1.0, abs(cur)):
            return DetResult(cur, n, True)
        prev = cur
    return DetResult(prev, n, False)
