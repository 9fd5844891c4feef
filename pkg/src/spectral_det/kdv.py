"""Exact differential polynomials in u and the stationary KdV hierarchy.

A ``DiffPoly`` is a polynomial with rational coefficients in the jet
variables u_0 = u, u_1 = u', u_2 = u'', ...; monomials are exponent tuples.
The derivation sends u_i to u_{i+1}.  The hierarchy is

    f_0 = 1,   f_{m+1}' = -f_m'''/4 + u f_m' + u' f_m / 2,

so f_1 = u/2 + c_1 and f_2 = (3u^2 - u'')/8 + c_1 u/2 + c_2.  Each step is
integrated with a weight-homogeneous ansatz (u_i has weight i + 2); the
integration constants enter linearly, f_m = sum_k c_k fhat_{m-k}.

With F_n = sum_j f_{n-j} lam^j the polynomial

    Q_{2n+1} = F''F/2 - F'^2/4 - (u - lam) F^2

has x-independent coefficients once the termination relation
d/dx f_{n+1} = 0 is imposed, and

    P_{2n+1} = sum_{j=0}^{n} (f_{n-j} d/dx - f_{n-j}'/2) L^j,  L = -d^2/dx^2 + u,

satisfies Q_{2n+1}(L) = -P_{2n+1}^2.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from math import comb
from typing import Mapping, Sequence

import numpy as np
import sympy

from .errors import ConsistencyError, DomainError, NotFiniteGapError

Monomial = tuple  # exponents of (u_0, u_1, ..., u_k), no trailing zeros


def _trim(m) -> Monomial:
    m = list(m)
    while m and m[-1] == 0:
        m.pop()
    return tuple(m)


def _mono_mul(a: Monomial, b: Monomial) -> Monomial:
    n = max(len(a), len(b))
    return _trim(tuple((a[i] if i < len(a) else 0) + (b[i] if i < len(b) else 0)
                       for i in range(n)))


class DiffPoly:
    """Immutable polynomial in u_0, u_1, ... with Fraction coefficients."""
    __slots__ = ("terms", "_hash")

    def __init__(self, terms: Mapping | None = None):
        clean = {}
        for m, c in (terms or {}).items():
            c = Fraction(c)
            if c:
                key = _trim(m)
                clean[key] = clean.get(key, Fraction(0)) + c
        self.terms = {m: clean[m] for m in sorted(clean) if clean[m]}
        self._hash = None

    # constructors
    @classmethod
    def const(cls, c) -> "DiffPoly":
        return cls({(): c})

    @classmethod
    def var(cls, i: int) -> "DiffPoly":
        """The jet variable u_i."""
        return cls({(0,) * i + (1,): 1})

    # arithmetic
    def __add__(self, other):
        other = _coerce(other)
        t = dict(self.terms)
        for m, c in other.terms.items():
            t[m] = t.get(m, Fraction(0)) + c
        return DiffPoly(t)

    __radd__ = __add__

    def __neg__(self):
        return DiffPoly({m: -c for m, c in self.terms.items()})

    def __sub__(self, other):
        return self + (-_coerce(other))

    def __rsub__(self, other):
        return _coerce(other) - self

    def __mul__(self, other):
        other = _coerce(other)
        t: dict = {}
        for m1, c1 in self.terms.items():
            for m2, c2 in other.terms.items():
                m = _mono_mul(m1, m2)
                t[m] = t.get(m, Fraction(0)) + c1 * c2
        return DiffPoly(t)

    __rmul__ = __mul__

    def __pow__(self, k: int):
        out = DiffPoly.const(1)
        for _ in range(k):
            out = out * self
        return out

    def __eq__(self, other):
        try:
            other = _coerce(other)
        except TypeError:
            return NotImplemented
        return self.terms == other.terms

    def __hash__(self):
        if self._hash is None:
            self._hash = hash(tuple(self.terms.items()))
        return self._hash

    def __bool__(self):
        return bool(self.terms)

    def __repr__(self):
        if not self.terms:
            return "0"
        parts = []
        for m, c in self.terms.items():
            names = [("u" if i == 0 else f"u{i}") + (f"^{e}" if e > 1 else "")
                     for i, e in enumerate(m) if e]
            parts.append(f"{c}" + ("*" + "*".join(names) if names else ""))
        return " + ".join(parts)

    # structure
    @property
    def order(self) -> int:
        """Highest derivative of u present, -1 for constants."""
        return max((len(m) - 1 for m in self.terms), default=-1)

    def weights(self) -> set:
        return {sum(e * (i + 2) for i, e in enumerate(m)) for m in self.terms}

    def is_constant(self) -> bool:
        return all(m == () for m in self.terms)

    def constant_value(self) -> Fraction:
        return self.terms.get((), Fraction(0))

    def coefficient(self, m) -> Fraction:
        return self.terms.get(_trim(m), Fraction(0))

    def evaluate(self, jet: Sequence) -> complex:
        """Numeric value with u_i = jet[i]."""
        total = 0.0
        for m, c in self.terms.items():
            if len(m) > len(jet):
                raise DomainError(f"jet needs u_{len(m) - 1}")
            v = float(c)
            for i, e in enumerate(m):
                if e:
                    v = v * jet[i] ** e
            total = total + v
        return total


def _coerce(p) -> DiffPoly:
    if isinstance(p, DiffPoly):
        return p
    if isinstance(p, (int, Fraction)):
        return DiffPoly.const(p)
    raise TypeError(f"cannot use {type(p).__name__} as a DiffPoly")


U = DiffPoly.var(0)


def d_dx(p: DiffPoly) -> DiffPoly:
    """Leibniz derivative with d u_i = u_{i+1}."""
    t: dict = {}
    for m, c in p.terms.items():
        for i, e in enumerate(m):
            if e == 0:
                continue
            new = list(m) + [0]
            new[i] -= 1
            new[i + 1] += 1
            key = _trim(new)
            t[key] = t.get(key, Fraction(0)) + c * e
    return DiffPoly(t)


def d_dx_n(p: DiffPoly, k: int) -> DiffPoly:
    for _ in range(k):
        p = d_dx(p)
    return p


# ---------------------------------------------------------------------------
# the recursion

def _partitions(w: int, smallest: int = 2):
    """Multisets of parts >= smallest summing to w, as nondecreasing tuples."""
    if w == 0:
        yield ()
        return
    for p in range(smallest, w + 1):
        for rest in _partitions(w - p, p):
            yield (p,) + rest


def monomials_of_weight(w: int) -> list:
    out = []
    for parts in _partitions(w):
        m = [0] * (max(parts) - 1)
        for p in parts:
            m[p - 2] += 1
        out.append(_trim(m))
    return sorted(out)


def integrate(rhs: DiffPoly) -> DiffPoly:
    """The weight-homogeneous antiderivative of rhs within the ring, constant term 0.

    Raises ConsistencyError when rhs is not a total derivative.
    """
    if not rhs:
        return DiffPoly()
    ws = rhs.weights()
    if len(ws) != 1:
        raise ConsistencyError(f"right side is not weight-homogeneous: weights {sorted(ws)}")
    w = ws.pop() - 1
    basis = monomials_of_weight(w)
    derivs = [d_dx(DiffPoly({m: 1})) for m in basis]
    rows = sorted(set(rhs.terms).union(*[d.terms for d in derivs]))
    M = sympy.Matrix([[sympy.Rational(d.coefficient(r).numerator, d.coefficient(r).denominator)
                       for d in derivs] for r in rows])
    b = sympy.Matrix([sympy.Rational(rhs.coefficient(r).numerator, rhs.coefficient(r).denominator)
                      for r in rows])
    try:
        sol, params = M.gauss_jordan_solve(b)
    except ValueError as exc:
        raise ConsistencyError(f"right side of weight {w + 1} is not a total derivative") from exc
    sol = sol.subs({p: 0 for p in params})
    return DiffPoly({m: Fraction(int(sympy.fraction(c)[0]), int(sympy.fraction(c)[1]))
                     for m, c in zip(basis, sol)})


@lru_cache(maxsize=None)
def _fhat(m: int) -> DiffPoly:
    """Homogeneous part of f_m (all constants zero), weight 2m."""
    if m == 0:
        return DiffPoly.const(1)
    f = _fhat(m - 1)
    rhs = (Fraction(-1, 4) * d_dx_n(f, 3) + U * d_dx(f)
           + Fraction(1, 2) * d_dx(U) * f)
    return integrate(rhs)


def _constants(constants, count: int) -> list:
    if constants is None:
        constants = {}
    if isinstance(constants, Mapping):
        cs = [Fraction(constants.get(k, constants.get(f"c{k}", 0))) for k in range(1, count + 1)]
    else:
        cs = [Fraction(c) for c in constants] + [Fraction(0)] * count
        cs = cs[:count]
    return [Fraction(1)] + cs


def kdv_recursion(ell: int, constants=None) -> list:
    """[f_0, ..., f_{ell+1}] with integration constants c_1, ..., c_{ell+1}.

    ``constants`` is a sequence (c_1, c_2, ...) or a mapping {1: c_1, ...}
    or {"c1": c_1, ...}; missing constants are zero.
    """
    if ell < 0:
        raise DomainError("ell must be nonnegative")
    c = _constants(constants, ell + 1)
    fs = []
    for m in range(ell + 2):
        f = DiffPoly()
        for k in range(m + 1):
            if c[k]:
                f = f + c[k] * _fhat(m - k)
        fs.append(f)
    return fs


# ---------------------------------------------------------------------------
# polynomials in lam

@dataclass(frozen=True)
class LambdaPoly:
    """sum_j coefficients[j] lam^j (ascending powers)."""
    coefficients: tuple
    degree: int

    def __post_init__(self):
        if len(self.coefficients) != self.degree + 1:
            raise DomainError("coefficient count does not match the degree")
        if not self.coefficients[-1]:
            raise DomainError("leading coefficient vanishes")

    def map(self, fn) -> "LambdaPoly":
        return LambdaPoly(tuple(fn(c) for c in self.coefficients), self.degree)


def _lp_mul(a: list, b: list) -> list:
    out = [DiffPoly() for _ in range(len(a) + len(b) - 1)]
    for i, x in enumerate(a):
        if not x:
            continue
        for j, y in enumerate(b):
            if y:
                out[i + j] = out[i + j] + x * y
    return out


def big_f(n: int, fs: Sequence[DiffPoly]) -> LambdaPoly:
    """F_n = sum_{j=0}^n f_{n-j} lam^j."""
    if len(fs) < n + 1:
        raise DomainError(f"need f_0..f_{n}")
    return LambdaPoly(tuple(fs[n - j] for j in range(n + 1)), n)


# ---------------------------------------------------------------------------
# termination rewrite

class Rewrite:
    """Normal form modulo d/dx f_{ell+1} = 0 and its derivatives.

    The relation is linear in u_{2 ell + 1} with a constant coefficient, so
    it is solved for that variable; higher derivatives are replaced by the
    derivatives of the solution, themselves in normal form.
    """

    def __init__(self, ell: int, fs: Sequence[DiffPoly]):
        rel = d_dx(fs[ell + 1])
        self.top = 2 * ell + 1
        lead = (0,) * self.top + (1,)
        alpha = rel.coefficient(lead)
        if alpha == 0 or rel.order != self.top:
            raise ConsistencyError("termination relation does not fix the top derivative")
        rest = rel - DiffPoly({lead: alpha})
        if any(len(m) > self.top and m[self.top] for m in rest.terms):
            raise ConsistencyError("termination relation is not linear in the top derivative")
        self.subs = {self.top: (-rest) * DiffPoly.const(1 / alpha)}

    def _sub(self, k: int) -> DiffPoly:
        if k not in self.subs:
            self.subs[k] = self(d_dx(self._sub(k - 1)))
        return self.subs[k]

    def __call__(self, p: DiffPoly) -> DiffPoly:
        out = DiffPoly()
        for m, c in p.terms.items():
            if len(m) <= self.top:
                out = out + DiffPoly({m: c})
                continue
            term = DiffPoly({m[:self.top]: c})
            for k in range(self.top, len(m)):
                if m[k]:
                    term = term * self._sub(k) ** m[k]
            out = out + term
        return out


def q_poly(n: int, fs: Sequence[DiffPoly], rewrite: Rewrite | None = None,
           check: bool = True) -> LambdaPoly:
    """Q_{2n+1}(lam) = F''F/2 - F'^2/4 - (u - lam) F^2 for F = F_n.

    With ``rewrite`` (the termination relation for ell = n) the coefficients
    are put in normal form and, if ``check`` is set, each is verified to have
    zero derivative modulo the relation.
    """
    F = list(big_f(n, fs).coefficients)
    F1 = [d_dx(c) for c in F]
    F2 = [d_dx(c) for c in F1]
    FF = _lp_mul(F, F)
    uml = [U, DiffPoly.const(-1)]  # u - lam
    parts = [
        [Fraction(1, 2) * c for c in _lp_mul(F2, F)],
        [Fraction(-1, 4) * c for c in _lp_mul(F1, F1)],
        [-c for c in _lp_mul(uml, FF)],
    ]
    deg = 2 * n + 1
    coeffs = [DiffPoly() for _ in range(deg + 1)]
    for part in parts:
        for j, c in enumerate(part):
            coeffs[j] = coeffs[j] + c
    if rewrite is not None:
        coeffs = [rewrite(c) for c in coeffs]
        if check:
            for j, c in enumerate(coeffs):
                dc = rewrite(d_dx(c))
                if dc:
                    raise ConsistencyError(f"coefficient of lam^{j} is not a first integral: d/dx = {dc}")
    return LambdaPoly(tuple(coeffs), deg)


# ---------------------------------------------------------------------------
# differential operators

class DiffOperator:
    """sum_k a_k d^k with DiffPoly coefficients; ``coefficients`` is highest order first."""
    __slots__ = ("_c",)

    def __init__(self, coeffs: Mapping[int, DiffPoly] | None = None):
        self._c = {k: v for k, v in (coeffs or {}).items() if v}

    @classmethod
    def from_list(cls, coefficients: Sequence[DiffPoly]) -> "DiffOperator":
        n = len(coefficients) - 1
        return cls({n - i: _coerce(c) for i, c in enumerate(coefficients)})

    @property
    def order(self) -> int:
        return max(self._c, default=-1)

    @property
    def coefficients(self) -> list:
        return [self._c.get(k, DiffPoly()) for k in range(self.order, -1, -1)]

    def coeff(self, k: int) -> DiffPoly:
        return self._c.get(k, DiffPoly())

    def is_zero(self) -> bool:
        return not self._c

    def __add__(self, other):
        t = dict(self._c)
        for k, v in other._c.items():
            t[k] = t.get(k, DiffPoly()) + v
        return DiffOperator(t)

    def __neg__(self):
        return DiffOperator({k: -v for k, v in self._c.items()})

    def __sub__(self, other):
        return self + (-other)

    def scale(self, p) -> "DiffOperator":
        """Left multiplication by a function."""
        p = _coerce(p)
        return DiffOperator({k: p * v for k, v in self._c.items()})

    def __mul__(self, other: "DiffOperator") -> "DiffOperator":
        # (a d^i)(b d^j) = a sum_k C(i, k) b^(k) d^(i + j - k)
        t: dict = {}
        for i, a in self._c.items():
            for j, b in other._c.items():
                db = b
                for k in range(i + 1):
                    if db:
                        key = i + j - k
                        t[key] = t.get(key, DiffPoly()) + comb(i, k) * a * db
                    db = d_dx(db)
        return DiffOperator(t)

    def map(self, fn) -> "DiffOperator":
        return DiffOperator({k: fn(v) for k, v in self._c.items()})

    def __repr__(self):
        return " + ".join(f"({v})d^{k}" for k, v in sorted(self._c.items(), reverse=True)) or "0"


D = DiffOperator({1: DiffPoly.const(1)})
L_OP = DiffOperator({2: DiffPoly.const(-1), 0: U})


def p_operator(n: int, fs: Sequence[DiffPoly]) -> DiffOperator:
    """P_{2n+1} = sum_{j=0}^{n} (f_{n-j} d - f_{n-j}'/2) L^j."""
    out = DiffOperator()
    Lj = DiffOperator({0: DiffPoly.const(1)})
    for j in range(n + 1):
        f = fs[n - j]
        first = DiffOperator({1: f, 0: Fraction(-1, 2) * d_dx(f)})
        out = out + first * Lj
        Lj = Lj * L_OP
    return out


def q_of_l(q: LambdaPoly) -> DiffOperator:
    """sum_j q_j L^j with the coefficients multiplying on the left."""
    out = DiffOperator()
    Lj = DiffOperator({0: DiffPoly.const(1)})
    for j, c in enumerate(q.coefficients):
        out = out + Lj.scale(c)
        Lj = Lj * L_OP
    return out


class BCResult:
    """Residual operators of the Burchnall-Chaundy and commutation checks."""

    def __init__(self, residual: DiffOperator, commutator: DiffOperator, q: LambdaPoly,
                 p: DiffOperator):
        self.residual, self.commutator, self.q, self.p = residual, commutator, q, p

    @property
    def ok(self) -> bool:
        return self.residual.is_zero() and self.commutator.is_zero()


def burchnall_chaundy_check(ell: int, constants=None, raise_on_failure: bool = False) -> BCResult:
    """Q_{2 ell+1}(L) + P_{2 ell+1}^2 and [L, P] in normal form modulo termination."""
    fs = kdv_recursion(ell, constants)
    rw = Rewrite(ell, fs)
    q = q_poly(ell, fs, rw)
    P = p_operator(ell, fs)
    res = (q_of_l(q) + P * P).map(rw)
    comm = (L_OP * P - P * L_OP).map(rw)
    out = BCResult(res, comm, q, P)
    if raise_on_failure and not out.ok:
        bad = res if not res.is_zero() else comm
        k = bad.order
        raise ConsistencyError(f"nonzero residual, coefficient of d^{k}: {bad.coeff(k)}")
    return out


# ---------------------------------------------------------------------------
# the spectral curve

@dataclass(frozen=True)
class HyperellipticCurve:
    """zeta^2 = Q(lam); ``Q`` holds ascending coefficients."""
    Q: tuple
    branch_points: tuple
    genus: int
    degenerate: bool
    gaps: tuple

    def __call__(self, lam):
        return np.polyval(np.asarray(self.Q)[::-1], lam)


MULT_TOL = 1e-8


def curve_from_coefficients(Q: Sequence[complex]) -> HyperellipticCurve:
    """Branch points, genus, degeneracy and real gaps of zeta^2 = Q(lam)."""
    Q = np.real_if_close(np.asarray(Q, dtype=complex), tol=1e6)
    desc = Q[::-1]
    roots = np.roots(desc)
    roots = roots[np.argsort(roots.real, kind="stable")]
    # a repeated root of Q is a root of Q' at which Q nearly vanishes
    scale = np.sum(np.abs(desc))
    doubles = []
    for r in np.roots(np.polyder(desc)) if len(desc) > 2 else []:
        if abs(np.polyval(desc, r)) <= MULT_TOL * scale * max(1.0, abs(r)) ** (len(desc) - 1):
            doubles.append(r)
    distinct = len(roots) - len(doubles)
    genus = max(0, (distinct - 1) // 2)
    # merge each double root into one branch point
    pts = list(roots)
    for r in doubles:
        for _ in range(2):
            i = int(np.argmin([abs(p - r) for p in pts]))
            pts.pop(i)
        pts.append(r)
    pts = sorted(pts, key=lambda z: (np.real(z), np.imag(z)))
    real_pts = sorted(float(np.real(p)) for p in pts if abs(np.imag(p)) < 1e-8 * max(1.0, abs(p)))
    gaps = []
    for a, b in zip(real_pts[:-1], real_pts[1:]):
        if b - a > 1e-12 and np.real(np.polyval(desc, 0.5 * (a + b))) < 0:
            gaps.append((a, b))
    # join gaps that touch at a double root (Q does not change sign there)
    merged = []
    for g in gaps:
        if merged and abs(merged[-1][1] - g[0]) < 1e-9 and any(abs(g[0] - d) < 1e-6 for d in doubles):
            merged[-1] = (merged[-1][0], g[1])
        else:
            merged.append(g)
    return HyperellipticCurve(tuple(complex(c) if np.iscomplexobj(c) else float(c) for c in Q),
                              tuple(complex(p) for p in pts), genus, bool(doubles), tuple(merged))


def spectral_curve(ell: int, constants=None, jet: Sequence | None = None, system=None,
                   at: float = 1.0, check_at: float | None = None,
                   tol: float = 1e-6) -> HyperellipticCurve:
    """Numeric curve zeta^2 = Q_{2 ell + 1}(lam) from a jet or a realization.

    For a realization the jet u, ..., u^(2 ell) comes from contour integrals
    of the analytic potential, at ``at`` and again at ``check_at`` (default
    at + 0.6); if the two coefficient sets differ by more than ``tol``
    relative, NotFiniteGapError is raised.
    """
    fs = kdv_recursion(ell, constants)
    rw = Rewrite(ell, fs)
    q = q_poly(ell, fs, rw)
    if (jet is None) == (system is None):
        raise DomainError("give exactly one of jet and system")
    if jet is not None:
        coeffs = [c.evaluate(list(jet)) for c in q.coefficients]
        return curve_from_coefficients(coeffs)
    from .statecalc import potential_jet
    j1 = potential_jet(system, at, 2 * ell)
    j2 = potential_jet(system, at + 0.6 if check_at is None else check_at, 2 * ell)
    c1 = np.array([c.evaluate(j1) for c in q.coefficients])
    c2 = np.array([c.evaluate(j2) for c in q.coefficients])
    drift = np.max(np.abs(c1 - c2)) / max(1.0, np.max(np.abs(c1)))
    if drift > tol:
        raise NotFiniteGapError(f"Q coefficients drift by {drift:.2e} between evaluation points")
    return curve_from_coefficients(c1)
