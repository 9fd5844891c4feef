"""Gram family R_x, tau function, Gelfand-Levitan kernel and the bracket ring.

For a system (-A, B, C) the Gram family

    R_x = int_x^inf exp(-tA) B C exp(-tA) dt

solves A R + R A = exp(-xA) B C exp(-xA).  With A = V diag(mu) V^{-1} this is
solved entrywise in the eigenbasis, where every later quantity (F_x, the
bracket, the Green series) is also evaluated.  Diagonal systems are sampled on
their quadrature rule first, so the eigenbasis is the identity.
"""
from __future__ import annotations

import math
import threading
from functools import lru_cache
from typing import Callable

import numpy as np
from scipy import linalg

from . import nystrom
from .errors import AccuracyError, DivergenceError, DomainError, PoleError, SingularTauError
from .realization import DIAGONAL_NODES, MatrixRealization, Realization, discretize

TAU_TOL = 1e-12
EIG_COND_MAX = 1e8
FD_STEP = 1e-3


class StateFamily:
    """R_x, F_x = (I + R_x)^{-1} and brackets for one system.

    Results per x are memoised; a lock serialises insertions so the family
    can be shared between threads.
    """

    def __init__(self, sys: Realization, nodes: int = DIAGONAL_NODES):
        self.source = sys
        self.sys = discretize(sys, nodes)
        s = self.sys
        self.n = s.n
        self.defective = False
        if s.is_diagonal:
            self.mu = np.diag(s.A).copy()
            self.V = self.Vinv = None
        else:
            mu, V = linalg.eig(s.A)
            if np.linalg.cond(V) > EIG_COND_MAX:
                self.defective = True
            self.mu, self.V, self.Vinv = mu, V, linalg.inv(V)
        self.Bt = self._to_eig(s.B, left=True)
        self.Ct = self._from_eig_row(s.C)
        self.msum = self.mu[:, None] + self.mu[None, :]
        self.BCt = self.Bt @ self.Ct
        self._memo: dict[float, tuple] = {}
        self._lock = threading.Lock()

    # basis changes: X_eig = V^{-1} X V
    def _to_eig(self, X, left=False):
        if self.V is None:
            return np.asarray(X, dtype=complex)
        return self.Vinv @ X if left else self.Vinv @ X @ self.V

    def _from_eig_row(self, C):
        return np.asarray(C, dtype=complex) if self.V is None else C @ self.V

    def to_eig(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=complex)
        return X if self.V is None else self.Vinv @ X @ self.V

    def from_eig(self, X) -> np.ndarray:
        return X if self.V is None else self.V @ X @ self.Vinv

    # core objects
    def _state(self, x: float):
        x = float(x)
        hit = self._memo.get(x)
        if hit is not None:
            return hit
        if self.defective:
            Rt = self._to_eig(_gram_quadrature(self.sys, x))
        else:
            e = np.exp(-x * self.mu)
            Rt = self.BCt * np.outer(e, e) / self.msum
        IR = np.eye(self.n) + Rt
        lu, piv = linalg.lu_factor(IR)
        d = np.diag(lu)
        det = np.prod(d) * (-1.0) ** np.count_nonzero(piv != np.arange(self.n))
        F = linalg.lu_solve((lu, piv), np.eye(self.n)) if abs(det) > TAU_TOL else None
        out = (Rt, det, F)
        with self._lock:
            if len(self._memo) > 4096:
                self._memo.clear()
            self._memo[x] = out
        return out

    def gram_eig(self, x):
        return self._state(x)[0]

    def gram(self, x: float) -> np.ndarray:
        if x < 0:
            raise DomainError("gram needs x >= 0")
        return self.from_eig(self.gram_eig(x))

    def tau(self, x: float) -> complex:
        Rt, det, F = self._state(x)
        if F is None:
            raise SingularTauError(f"I + R_x is singular at x = {x}")
        return complex(det)

    def resolvent_eig(self, x: float) -> np.ndarray:
        F = self._state(x)[2]
        if F is None:
            raise SingularTauError(f"I + R_x is singular at x = {x}")
        return F

    def resolvent(self, x: float) -> np.ndarray:
        return self.from_eig(self.resolvent_eig(x))

    def t_gl(self, x: float, y) -> complex | np.ndarray:
        """-C exp(-xA) F_x exp(-yA) B; y may be an array (scalar systems)."""
        F = self.resolvent_eig(x)
        left = (self.Ct * np.exp(-x * self.mu)) @ F
        y = np.asarray(y, dtype=float)
        if self.sys.scalar:
            ey = np.exp(-np.multiply.outer(y, self.mu)) * self.Bt[:, 0]
            return -(ey @ left[0])[()]
        right = np.exp(-np.multiply.outer(y, self.mu))[..., :, None] * self.Bt
        return -np.einsum("pi,...im->...pm", left, right)

    def bracket_eig(self, Xt: np.ndarray, x: float) -> complex:
        F = self.resolvent_eig(x)
        e = np.exp(-x * self.mu)
        val = (self.Ct * e) @ F @ Xt @ F @ (e[:, None] * self.Bt)
        return val[0, 0] if self.sys.scalar else val

    def bracket(self, X, x: float):
        """C exp(-xA) F X F exp(-xA) B for an operator X on the state space."""
        return self.bracket_eig(self.to_eig(X), x)

    def power_eig(self, k: int) -> np.ndarray:
        """A^k in the eigenbasis."""
        return np.diag(self.mu ** k)

    @property
    def A_eig(self) -> np.ndarray:
        if self.V is None:
            return np.diag(self.mu)
        return self.Vinv @ self.sys.A @ self.V


def _gram_quadrature(sys: MatrixRealization, x: float, panels: int = 40) -> np.ndarray:
    """Fallback for defective A: Gauss-Legendre on [x, x + 40 / min Re eig]."""
    T = 40.0 / sys.decay_rate
    s, w = np.polynomial.legendre.leggauss(20)
    edges = np.linspace(x, x + T, panels + 1)
    R = np.zeros((sys.n, sys.n), dtype=complex)
    BC = sys.B @ sys.C
    for a, b in zip(edges[:-1], edges[1:]):
        for si, wi in zip(s, w):
            t = 0.5 * (b - a) * si + 0.5 * (a + b)
            E = linalg.expm(-t * sys.A)
            R += 0.5 * (b - a) * wi * E @ BC @ E
    return R


_family_lock = threading.Lock()


@lru_cache(maxsize=64)
def _family_cached(sys, nodes):
    return StateFamily(sys, nodes)


def family(sys: Realization | StateFamily, nodes: int = DIAGONAL_NODES) -> StateFamily:
    if isinstance(sys, StateFamily):
        return sys
    with _family_lock:
        return _family_cached(sys, nodes)


# ----------------------------------------------------------------------------
# module-level operations

def gram(sys, x: float) -> np.ndarray:
    return family(sys).gram(x)


def tau(sys, x: float) -> complex:
    return family(sys).tau(x)


def log_tau(sys, x: float) -> complex:
    return np.log(family(sys).tau(x))


def t_gl(sys, x: float, y):
    return family(sys).t_gl(x, y)


def gl_residual(sys, x: float, y: float, phi: Callable | None = None,
                nodes: int = 192, scale: float | None = None) -> float:
    """|phi(x+y) + T(x,y) + int_x^inf T(x,z) phi(z+y) dz| by quadrature in z.

    ``phi`` defaults to the impulse response of the sampled system.  The
    z-rule scale follows the slowest decay rate of A, clipped to [1/4, 16].
    """
    fam = family(sys)
    if phi is None:
        ms = fam.sys
        a = np.diag(ms.A) if ms.is_diagonal else None

        def phi(t):
            t = np.asarray(t, dtype=float)
            if a is not None:
                return np.exp(-np.multiply.outer(t, a)) @ (ms.C[0] * ms.B[:, 0])
            return np.array([(ms.C @ linalg.expm(-s * ms.A) @ ms.B)[0, 0] for s in t.ravel()]).reshape(t.shape)
    if scale is None:
        scale = 1.0 / float(np.clip(np.abs(fam.mu.real).min(), 1 / 16, 4.0))
    rule = nystrom.build_rule(nodes, "rational", scale).shifted(x)
    z = rule.nodes
    integral = np.sum(rule.weights * fam.t_gl(x, z) * phi(z + y))
    return float(abs(phi(np.array(x + y)) + fam.t_gl(x, y) + integral))


def gl_logderiv_check(sys, x: float, h: float = 1e-4) -> float:
    """|central difference of log tau at x - T_GL(x, x)|."""
    fam = family(sys)
    d = (np.log(fam.tau(x + h)) - np.log(fam.tau(x - h))) / (2 * h)
    return float(abs(d - fam.t_gl(x, x)))


def bracket(sys, X, x: float):
    return family(sys).bracket(X, x)


def star(sys, X, Y, x: float) -> np.ndarray:
    """X (A F + F A - 2 F A F) Y."""
    fam = family(sys)
    A = fam.sys.A
    F = fam.resolvent(x)
    return np.asarray(X) @ (A @ F + F @ A - 2 * F @ A @ F) @ np.asarray(Y)


def dpartial(sys, X, x: float, h: float = FD_STEP) -> np.ndarray:
    """A (I - 2F) X + dX/dx + X (I - 2F) A.

    ``X`` is a matrix or a callable x -> matrix (differenced centrally).
    """
    fam = family(sys)
    A = fam.sys.A
    I = np.eye(fam.n)
    F = fam.resolvent(x)
    if callable(X):
        X0 = np.asarray(X(x), dtype=complex)
        dX = (np.asarray(X(x + h)) - np.asarray(X(x - h))) / (2 * h)
    else:
        X0 = np.asarray(X, dtype=complex)
        dX = 0.0
    return A @ (I - 2 * F) @ X0 + dX + X0 @ (I - 2 * F) @ A


def bracket_identity_check(sys, x: float, pairs: int = 20, seed: int = 0,
                           h: float = 1e-2) -> tuple[float, float]:
    """Largest multiplicativity error and smallest observed derivation order.

    For random real X, Y: |[X * Y] - [X][Y]| relative to max(1, |[X][Y]|),
    and the order log2(e(h) / e(h/2)) of e(h) = |central difference of
    [X] - [dpartial X]|.
    """
    fam = family(sys)
    rng = np.random.default_rng(seed)
    mult, order = 0.0, np.inf
    for _ in range(pairs):
        X = rng.standard_normal((fam.n, fam.n))
        Y = rng.standard_normal((fam.n, fam.n))
        bx, by = fam.bracket(X, x), fam.bracket(Y, x)
        lhs = fam.bracket(star(fam, X, Y, x), x)
        mult = max(mult, abs(lhs - bx * by) / max(1.0, abs(bx * by)))
        target = fam.bracket(dpartial(fam, X, x), x)
        errs = [abs((fam.bracket(X, x + s) - fam.bracket(X, x - s)) / (2 * s) - target)
                for s in (h, h / 2)]
        if errs[1] > 0 and errs[0] > 1e-13 * max(1.0, abs(target)):
            order = min(order, float(np.log2(errs[0] / errs[1])))
    return float(mult), float(order)


def potential(sys, x: float) -> complex:
    """u(x) = -4 [A]_x."""
    fam = family(sys)
    return -4 * fam.bracket_eig(fam.A_eig, x)


def potential_complex(sys, z: complex) -> complex:
    """u(z) = -4 [A]_z at complex z, bypassing the per-x memo.

    u is analytic near the real axis wherever tau does not vanish, which is
    what the contour-integral derivatives in ``potential_jet`` rely on.
    """
    fam = family(sys)
    if fam.defective:
        raise DomainError("complex evaluation needs a diagonalisable A")
    e = np.exp(-complex(z) * fam.mu)
    IR = np.eye(fam.n) + fam.BCt * np.outer(e, e) / fam.msum
    F = linalg.inv(IR)
    val = (fam.Ct * e) @ F @ fam.A_eig @ F @ (e[:, None] * fam.Bt)
    return complex(-4 * val[0, 0])


def potential_jet(sys, x: float, order: int, radius: float = 0.25, points: int = 64) -> np.ndarray:
    """u(x), u'(x), ..., u^(order)(x) by the trapezoid rule on a circle about x.

    The Cauchy integral converges geometrically for analytic u; the result
    is compared with a circle of half the radius and AccuracyError is raised
    when they disagree above 1e-8 relative.
    """
    def jet(r):
        th = 2 * np.pi * np.arange(points) / points
        w = r * np.exp(1j * th)
        vals = np.array([potential_complex(sys, x + t) for t in w])
        k = np.arange(order + 1)
        c = np.array([np.mean(vals * w ** (-j)) for j in k])
        return np.array([math.factorial(j) for j in k]) * c

    a, b = jet(radius), jet(radius / 2)
    scale = np.maximum(1.0, np.abs(a))
    if np.max(np.abs(a - b) / scale) > 1e-8:
        raise AccuracyError(f"contour derivatives at x = {x} are not converged")
    return a.real if np.all(np.abs(a.imag) <= 1e-10 * scale) else a


def _second_diff(f, x, h):
    return (f(x + h) - 2 * f(x) + f(x - h)) / h ** 2


def dyson_potential(sys, x: float, h: float = FD_STEP, richardson: bool = True) -> complex:
    """-2 (log tau)'' by central differences, Richardson-refined by default."""
    fam = family(sys)

    def lt(s):
        return np.log(fam.tau(s))

    d = _second_diff(lt, x, h)
    if richardson:
        d = (4 * _second_diff(lt, x, h / 2) - d) / 3
    return -2 * d


def invertibility_threshold(sys, x_max: float = 50.0) -> float:
    """Smallest x0 >= 0 with ||R_x||_2 < 1 for all x >= x0."""
    fam = family(sys)

    def norm(x):
        return np.linalg.norm(fam.from_eig(fam.gram_eig(x)), 2)

    if norm(0.0) < 1:
        return 0.0
    lo, hi = 0.0, 1.0
    while norm(hi) >= 1:
        lo, hi = hi, 2 * hi
        if hi > x_max:
            raise DomainError("R_x does not become a contraction")
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        lo, hi = (mid, hi) if norm(mid) >= 1 else (lo, mid)
    return hi


def baker_akhiezer(sys, x: float, kappa: float, rule=None) -> complex:
    """f(x; kappa) = cos(sqrt(kappa) x) + int_x^inf T_GL(x, y) cos(sqrt(kappa) y) dy.

    The y-integral is done in closed form in the eigenbasis of A unless a
    quadrature rule on (0, inf) is given, in which case it is shifted to x.
    """
    fam = family(sys)
    x0 = invertibility_threshold(fam)
    if x < x0:
        raise DomainError(f"x = {x} is below the invertibility threshold x0 = {x0:.6g}")
    k = np.sqrt(complex(kappa))
    base = np.cos(k * x)
    if rule is not None:
        y = rule.nodes + x
        return complex(base + np.sum(rule.weights * fam.t_gl(x, y) * np.cos(k * y)))
    F = fam.resolvent_eig(x)
    left = (fam.Ct * np.exp(-x * fam.mu)) @ F
    mu = fam.mu
    # int_x^inf exp(-mu y) cos(k y) dy
    lap = 0.5 * (np.exp(-(mu - 1j * k) * x) / (mu - 1j * k)
                 + np.exp(-(mu + 1j * k) * x) / (mu + 1j * k))
    return complex(base - left[0] @ (lap * fam.Bt[:, 0]))


def lambda0_estimate(sys, xs) -> float:
    """Heuristic bottom-of-spectrum bound max(0, -min u) over sample points."""
    u = np.array([potential(sys, x).real for x in xs])
    return float(max(0.0, -u.min()))


def green_diag_series(sys, x: float, lam: float, terms: int = 8):
    """Truncated series (1/sqrt(-lam)) (1/2 - [A]/lam + [A^3]/lam^2 - ...).

    Returns (value, error estimate), the estimate being the last term kept.
    """
    if not (np.isreal(lam) and lam < 0):
        raise DomainError("the series is offered for real lam < 0 only")
    fam = family(sys)
    s = np.sqrt(-lam)
    total = 0.5 + 0j
    mags = []
    for j in range(1, terms):
        t = (-1) ** j * fam.bracket_eig(fam.power_eig(2 * j - 1), x) / lam ** j
        total += t
        mags.append(abs(t))
    if len(mags) >= 3 and not (mags[-1] <= mags[-2] <= mags[-3]):
        if mags[-1] > 1e-15 * abs(total):
            raise DivergenceError(f"series terms do not decay at lam = {lam}")
    err = (mags[-1] if mags else 0.0) / s
    return complex(total / s), float(err)


def green_diag_closed(sys, x: float, lam: complex) -> complex:
    """Summed form of the series: (1/sqrt(-lam)) (1/2 - [A (lam I + A^2)^{-1}])."""
    fam = family(sys)
    d = lam + fam.mu ** 2
    if np.min(np.abs(d)) < 1e-14 * max(1.0, abs(lam)):
        raise PoleError("lam I + A^2 is singular")
    Xt = fam.A_eig @ np.diag(1.0 / d) if fam.V is not None else np.diag(fam.mu / d)
    return complex((0.5 - fam.bracket_eig(Xt, x)) / np.sqrt(-complex(lam)))


def darboux_field(sys, x: float, lam: complex) -> complex:
    """(-2/sqrt(-lam)) [A(I-2F)A(lam I+A^2)^{-1} + A(lam I+A^2)^{-1}(I-2F)A]_x."""
    fam = family(sys)
    d = lam + fam.mu ** 2
    if np.min(np.abs(d)) < 1e-14 * max(1.0, abs(lam)):
        raise PoleError("lam I + A^2 is singular")
    A = fam.A_eig
    Rinv = np.diag(1.0 / d)  # (lam I + A^2)^{-1} is diagonal in the eigenbasis
    M = np.eye(fam.n) - 2 * fam.resolvent_eig(x)
    X = A @ M @ A @ Rinv + A @ Rinv @ M @ A
    return complex(-2 / np.sqrt(-complex(lam)) * fam.bracket_eig(X, x))


def volterra_inverse(T: Callable, rule, M: float, eps: float, tol: float = 1e-12,
                     max_terms: int = 200) -> np.ndarray:
    """Kernel of V_T^{-1} - I on the rule, by the Neumann series sum (-1)^j T^j.

    T(x, y) is upper triangular (zero for y < x) with |T| <= M exp(-eps (x + y)).
    The series stops once M^{j+1} / (eps^j 2^j j!) falls below ``tol``.  The
    result is the matrix of kernel values at node pairs.
    """
    if M <= 0 or eps <= 0:
        raise DomainError("need M > 0 and eps > 0")
    t, w = rule.nodes, rule.weights
    K = np.asarray(T(t[:, None], t[None, :]), dtype=complex)
    K = np.where(t[None, :] >= t[:, None], K, 0.0)
    bound = M * np.exp(-eps * (t[:, None] + t[None, :]))
    if np.any(np.abs(K) > bound * (1 + 1e-9) + 1e-300):
        raise DomainError("kernel exceeds the stated bound M exp(-eps(x+y))")
    term = K.copy()
    out = np.zeros_like(K)
    j = 1
    bnd = M
    while True:
        out += (-1) ** j * term
        # bound for the next power
        bnd = bnd * M / (eps * 2 * j)
        if bnd < tol or j >= max_terms:
            break
        term = term @ (w[:, None] * K)
        j += 1
    return out
