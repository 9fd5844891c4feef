"""Hankel integral operators, their products and finite trace identities."""
from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Callable, Mapping

import numpy as np
from scipy import linalg
from scipy.special import eval_laguerre

from . import nystrom
from .errors import ConsistencyError
from .nystrom import DiscretizedOperator, QuadratureRule

BLOCK_AGREE = 1e-8
BLOCK_FAIL = 1e-6


def _phi_grid(phi: Callable, T: np.ndarray) -> np.ndarray:
    """Evaluate phi on an array, falling back to elementwise calls."""
    try:
        out = np.asarray(phi(T), dtype=complex)
        if out.shape == T.shape:
            return out
    except (TypeError, ValueError):
        pass
    flat = np.array([phi(float(t)) for t in T.ravel()], dtype=complex)
    return flat.reshape(T.shape)


def hankel_operator(phi: Callable, rule: QuadratureRule) -> DiscretizedOperator:
    """Nystrom discretisation of the kernel phi(x + y)."""
    t = rule.nodes
    sums = t[:, None] + t[None, :]
    # phi only depends on x + y; evaluate each distinct sum once
    uniq, inv = np.unique(sums, return_inverse=True)
    vals = _phi_grid(phi, uniq)[inv].reshape(sums.shape)
    return nystrom.discretize_kernel(lambda x, y: vals, rule)


def hankel_det(phi: Callable, rule: QuadratureRule, z: complex = 1.0):
    return nystrom.fredholm_det(hankel_operator(phi, rule), z)


def product_kernel_matrix(phi: Callable, psi: Callable, rule: QuadratureRule) -> np.ndarray:
    """Symmetrised matrix of K(x, y) = int_0^inf phi(x+u) psi(u+y) du on the rule.

    The inner integral uses the same rule, so K = G_phi G_psi exactly at the
    discrete level.
    """
    Gp = hankel_operator(phi, rule).M
    Gq = hankel_operator(psi, rule).M
    return Gp @ Gq


def hankel_product_det(phi: Callable, psi: Callable, lam: complex,
                       rule: QuadratureRule, check: bool = True) -> complex:
    """det(I + lam K) for K with kernel int phi(x+u) psi(u+y) du.

    Also evaluates the block determinant of [[I, lam G_phi], [-G_psi, I]] and
    raises ConsistencyError when the two differ by more than 1e-6.
    """
    Gp = hankel_operator(phi, rule).M
    Gq = hankel_operator(psi, rule).M
    n = len(rule)
    d1 = complex(nystrom.fredholm_det(lam * Gp @ Gq))
    if check:
        I = np.eye(n)
        block = np.block([[I, lam * Gp], [-Gq, I]])
        d2 = complex(linalg.det(block))
        gap = abs(d1 - d2) / max(1.0, abs(d1))
        if gap > BLOCK_FAIL:
            raise ConsistencyError(f"product and block determinants differ by {gap:.2e}")
        if gap > BLOCK_AGREE:
            warnings.warn(f"product and block determinants differ by {gap:.2e}")
    return d1


def semi_additive_check(phi: Callable, psi: Callable, x: float, y: float,
                        h: float = 1e-3, rule: QuadratureRule | None = None) -> float:
    """|d/dt K(x+t, y+t) at t=0 + phi(x) psi(y)| with a central difference in t."""
    if rule is None:
        rule = nystrom.build_rule(128, "rational", 1.0)
    u, w = rule.nodes, rule.weights

    def K(a, b):
        return np.sum(w * _phi_grid(phi, a + u) * _phi_grid(psi, u + b))

    d = (K(x + h, y + h) - K(x - h, y - h)) / (2 * h)
    return float(abs(d + _phi_grid(phi, np.array(x))[()] * _phi_grid(psi, np.array(y))[()]))


@dataclass(frozen=True)
class TrigPolynomial:
    """Finitely supported Fourier coefficients {k: c_k}."""
    coefficients: Mapping[int, complex]

    def __post_init__(self):
        clean = {int(k): complex(v) for k, v in dict(self.coefficients).items() if v != 0}
        object.__setattr__(self, "coefficients", clean)

    @property
    def max_frequency(self) -> int:
        return max((abs(k) for k in self.coefficients), default=0)

    def coef(self, k: int) -> complex:
        return self.coefficients.get(int(k), 0j)

    def __call__(self, theta):
        theta = np.asarray(theta, dtype=float)
        return sum(c * np.exp(1j * k * theta) for k, c in self.coefficients.items()) + 0 * theta


def toeplitz_matrix(f: TrigPolynomial, N: int) -> np.ndarray:
    """N x N truncation with entry (i, j) = f_hat(i - j)."""
    i = np.arange(N)
    D = i[:, None] - i[None, :]
    T = np.zeros((N, N), dtype=complex)
    for k, c in f.coefficients.items():
        T[D == k] = c
    return T


def _product(f: TrigPolynomial, h: TrigPolynomial) -> TrigPolynomial:
    out: dict[int, complex] = {}
    for k, a in f.coefficients.items():
        for j, b in h.coefficients.items():
            out[k + j] = out.get(k + j, 0j) + a * b
    return TrigPolynomial(out)


def semicommutator(f: TrigPolynomial, h: TrigPolynomial, N: int) -> np.ndarray:
    """Leading N x N block of T_{fh} - T_f T_h on the half-infinite index set.

    The products are formed on a truncation padded by the band width, so the
    block equals that of the semi-infinite operators exactly.
    """
    K = max(f.max_frequency, h.max_frequency)
    M = N + K
    Tf, Th = toeplitz_matrix(f, M), toeplitz_matrix(h, M)
    return (toeplitz_matrix(_product(f, h), M) - Tf @ Th)[:N, :N]


def toeplitz_cocycle(f: TrigPolynomial, h: TrigPolynomial, N: int) -> tuple[complex, complex]:
    """(trace of w(f,h) - w(h,f), sum_k k f_hat(k) h_hat(-k)) with w(f,h) = T_{fh} - T_f T_h.

    w(f,h) - w(h,f) = T_h T_f - T_f T_h.  Its nonzero entries sit in the top
    left K x K corner (K the maximal frequency); the trace of a commutator of
    two finite truncations would vanish identically, so the blocks of the
    semi-infinite operators are used.
    """
    K = max(f.max_frequency, h.max_frequency)
    if N < 2 * K:
        warnings.warn(f"truncation N={N} is below twice the maximal frequency {K}")
    lhs = complex(np.trace(semicommutator(f, h, N) - semicommutator(h, f, N)))
    rhs = complex(sum(k * c * h.coef(-k) for k, c in f.coefficients.items()))
    return lhs, rhs


def pincus_check(V: np.ndarray, W: np.ndarray) -> tuple[complex, complex]:
    """(trace(VW - WV), log det(e^V e^W e^-V e^-W)).

    Both vanish in finite dimensions; the log-determinant is computed as
    the sum of logs of the eigenvalues of the multiplicative commutator.
    """
    V = np.asarray(V, dtype=complex)
    W = np.asarray(W, dtype=complex)
    C = V @ W - W @ V
    if not C.any():
        # commuting pair: e^V e^W e^-V e^-W = I exactly
        return 0j, 0j
    tr = complex(np.trace(C))
    P = linalg.expm(V) @ linalg.expm(W) @ linalg.expm(-V) @ linalg.expm(-W)
    ld = complex(np.sum(np.log(linalg.eigvals(P))))
    return tr, ld


def laguerre_matrix(h: Callable, size: int = 8, nodes: int = 200) -> np.ndarray:
    """Entries int_{-1}^{1} h((1+u)/(1-u)) u^(n+m) du for n, m < size.

    These are the matrix entries of the Hankel operator whose impulse
    response is the Laplace transform of h, in the orthonormal Laguerre basis
    sqrt(2) exp(-t) P_n(2t).
    """
    s, w = np.polynomial.legendre.leggauss(nodes)
    vals = _phi_grid(h, (1 + s) / (1 - s))
    idx = np.arange(size)
    return np.array([[np.sum(w * vals * s ** (a + b)) for b in idx] for a in idx])


def hankel_laguerre_matrix(phi: Callable, rule: QuadratureRule, size: int = 8) -> np.ndarray:
    """<G_phi l_n, l_m> from the Nystrom discretisation on ``rule``."""
    t = rule.nodes
    sw = np.sqrt(rule.weights)
    ell = np.array([np.sqrt(2) * np.exp(-t) * eval_laguerre(k, 2 * t) for k in range(size)])
    G = hankel_operator(phi, rule).M
    E = ell * sw
    return E @ G @ E.T
