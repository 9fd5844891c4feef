"""Schrodinger operators L = -d^2/dx^2 + u and canonical systems.

Conventions used throughout:

* ``green_diag_ode`` returns psi_+ psi_- / Wr(psi_+, psi_-) with
  Wr(f, g) = f g' - f' g.  This is the diagonal of (L - lam)^{-1}: it is
  positive below the spectrum (1/(2 sqrt(-lam)) for u = 0) and agrees with
  ``statecalc.green_diag_series``.  The kernel of (lam - L)^{-1} is its
  negative.
* ``xi`` is (1/pi) arg G(x, x; lam + i eps) for the G above, which is
  arg(-G) for the (lam - L)^{-1} kernel.  Since Im G > 0 in the upper half
  plane the value lies in [0, 1]; it is 0 below the spectrum.
* Canonical systems solve Psi' = J (lam Omega_1 + Omega_0) Psi with
  J = [[0, -1], [1, 0]].  Schrodinger's equation embeds as Omega_1 =
  diag(1, 0), Omega_0 = diag(-u, 1), Psi = (f, -f').
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, NamedTuple

import numpy as np
from scipy import optimize
from scipy.integrate import cumulative_simpson, solve_ivp

from . import airy, nystrom
from .errors import (DivergenceError, DomainError, GridError, NodeError, PoleError,
                     StiffnessError, UnsupportedError)

RTOL = 1e-10
ATOL = 1e-13
EPS_DEFAULT = 1e-6
J = np.array([[0.0, -1.0], [1.0, 0.0]])


# ---------------------------------------------------------------------------
# potentials and trajectories

@dataclass(frozen=True, eq=False)
class Potential:
    """A bounded continuous potential u on ``domain``.

    ``decay`` marks potentials tending to zero at both ends, which the Weyl
    solutions require.  ``reach`` is a distance beyond which |u| is below
    ``1e-14 max|u|``; it is estimated from samples when not given.
    """
    evaluator: Callable[[float], float]
    domain: tuple[float, float] = (-np.inf, np.inf)
    decay: bool = True
    reach: float | None = None
    samples: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        a, b = self.domain
        if not a < b:
            raise DomainError(f"empty domain {self.domain}")
        xs = np.linspace(max(a, -60.0), min(b, 60.0), 481)
        with np.errstate(all="ignore"):
            try:
                vals = np.array([float(self.evaluator(float(x))) for x in xs])
            except (ValueError, ArithmeticError, np.linalg.LinAlgError) as exc:
                raise DomainError(f"potential cannot be evaluated on the sample grid ({exc})")
        if not np.all(np.isfinite(vals)):
            bad = xs[~np.isfinite(vals)][0]
            raise DomainError(f"potential is not finite at x = {bad!r}")
        object.__setattr__(self, "samples", np.vstack([xs, vals]))
        if self.reach is None and self.decay:
            top = max(np.abs(vals).max(), 1e-300)
            big = np.abs(xs[np.abs(vals) > 1e-14 * top])
            object.__setattr__(self, "reach", float(big.max() if big.size else 0.0) + 1.0)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if x.ndim == 0:
            return float(self.evaluator(float(x)))
        return np.array([float(self.evaluator(float(t))) for t in x.ravel()]).reshape(x.shape)


def free_potential() -> Potential:
    return Potential(lambda x: 0.0, reach=0.0)


def soliton_potential(a: float = 1.0, x0: float = 0.0) -> Potential:
    """u = -2 a^2 sech^2(a (x - x0)), with a single bound state at -a^2."""
    return Potential(lambda x: -2 * a * a / np.cosh(a * (x - x0)) ** 2)


def potential_from_system(sys) -> Potential:
    """u = -4 [A]_x from a realization, treated as defined on the whole line."""
    from . import statecalc
    fam = statecalc.family(sys)
    return Potential(lambda x: statecalc.potential(fam, x).real)


@dataclass(frozen=True, eq=False)
class Trajectory:
    """ODE solution with dense output; ``y`` holds the values at ``x``."""
    x: np.ndarray
    y: np.ndarray
    dense: Callable

    def __call__(self, x):
        return self.dense(x)


def _integrate(rhs, x_start, x_end, y0, points=None, dtype=complex) -> Trajectory:
    y0 = np.asarray(y0, dtype=dtype)
    scale = max(np.abs(y0).max(), 1e-300)
    res = solve_ivp(rhs, (x_start, x_end), y0, method="RK45", rtol=RTOL,
                    atol=ATOL * scale, dense_output=True,
                    t_eval=None if points is None else np.asarray(points, dtype=float))
    if res.status != 0:
        raise StiffnessError(f"integration stopped at x = {res.t[-1]:.6g}: {res.message}")
    x = res.t if points is None else np.asarray(points, dtype=float)
    return Trajectory(x, res.y, res.sol)


def _schrod_rhs(u: Potential, lam: complex):
    def rhs(x, y):
        return np.array([y[1], (u.evaluator(x) - lam) * y[0]])
    return rhs


def solve_schrodinger(u: Potential, lam: complex, x0: float, x1: float, init,
                      points=None, reverse: bool = False) -> Trajectory:
    """Integrate -psi'' + u psi = lam psi for y = (psi, psi').

    ``init`` is given at x0, or at x1 when ``reverse`` is set, in which case
    the integration runs from x1 down to x0.
    """
    if not x0 < x1:
        raise DomainError(f"need x0 < x1, got {x0}, {x1}")
    a, b = (x1, x0) if reverse else (x0, x1)
    return _integrate(_schrod_rhs(u, complex(lam)), a, b, init, points)


# ---------------------------------------------------------------------------
# Weyl solutions and the Green's function

def cutoff(u: Potential, lam: complex) -> float:
    """X = 15 / sqrt(-Re lam) plus the potential's reach.

    On or above the continuous spectrum 15 / sqrt|lam| is used instead, and
    the free part is capped at 30.
    """
    r = -complex(lam).real
    base = 15.0 / np.sqrt(r) if r > 0 else 15.0 / np.sqrt(max(abs(lam), 1e-300))
    return float(u.reach + min(base, 30.0))


class WeylPair(NamedTuple):
    plus: Trajectory
    minus: Trajectory
    X: float


def weyl_solutions(u: Potential, lam: complex, x=None, X: float | None = None) -> WeylPair:
    """psi_+ decaying at +inf and psi_- decaying at -inf.

    Each starts at -/+ X from the free asymptotics with unit amplitude,
    (psi, psi') = (1, -/+ k) with k = sqrt(-lam), and is integrated inward;
    so psi_+(x) ~ exp(-k (x - X)) near X.  The points ``x`` are where the
    trajectories are recorded.
    """
    if not u.decay:
        raise UnsupportedError("Weyl solutions need a potential that decays at both ends")
    lam = complex(lam)
    if lam.imag == 0 and lam.real >= 0:
        raise DomainError("lam must have nonzero imaginary part or lie below the spectrum")
    X = cutoff(u, lam) if X is None else float(X)
    pts = None if x is None else np.atleast_1d(np.asarray(x, dtype=float))
    if pts is not None and np.max(np.abs(pts)) >= X:
        raise DomainError(f"points must lie inside the cutoff X = {X}")
    k = np.sqrt(-lam)
    rhs = _schrod_rhs(u, lam)
    dp = None if pts is None else np.sort(pts)[::-1]
    dm = None if pts is None else np.sort(pts)
    plus = _integrate(rhs, X, -X if pts is None else dp[-1], [1.0, -k], dp)
    minus = _integrate(rhs, -X, X if pts is None else dm[-1], [1.0, k], dm)
    return WeylPair(plus, minus, X)


def wronskian(f, g) -> complex:
    """f g' - f' g for value pairs (f, f') and (g, g')."""
    return f[0] * g[1] - f[1] * g[0]


def _pair_at(u, x, lam, X=None):
    xs = np.atleast_1d(np.asarray(x, dtype=float))
    wp = weyl_solutions(u, lam, xs, X)
    return wp.plus(xs), wp.minus(xs)


def green_diag_ode(u: Potential, x, lam: complex, X: float | None = None):
    """psi_+ psi_- / Wr(psi_+, psi_-) at x (scalar or array)."""
    p, m = _pair_at(u, x, lam, X)
    W = wronskian(p, m)
    if np.any(np.abs(W) <= 1e-12 * np.abs(p[0] * m[1]) + 1e-300):
        raise PoleError(f"Wronskian vanishes: lam = {lam} is an eigenvalue")
    g = p[0] * m[0] / W
    return complex(g[0]) if np.ndim(x) == 0 else g


def xi(u: Potential, x: float, lam: float, eps: float = EPS_DEFAULT) -> float:
    """(1/pi) arg G(x, x; lam + i eps), an eps-regularised boundary value in [0, 1]."""
    if eps <= 0:
        raise DomainError("eps must be positive")
    g = green_diag_ode(u, x, complex(lam, eps))
    ang = np.angle(g)
    # Im G >= 0 up to rounding; fold the principal value into [0, pi]
    if ang < 0:
        ang = 0.0 if ang > -np.pi / 2 else np.pi
    return float(ang / np.pi)


def xi_richardson(u: Potential, x: float, lam: float, eps: float = EPS_DEFAULT) -> float:
    """xi extrapolated to eps -> 0 from eps and eps / 2 (first order in eps)."""
    return 2 * xi(u, x, lam, eps / 2) - xi(u, x, lam, eps)


def bound_states(u: Potential, lam_min: float, lam_max: float = 0.0, n: int = 200,
                 x: float = 0.0) -> np.ndarray:
    """Eigenvalues in (lam_min, lam_max) by shooting: zeros of Wr(psi_+, psi_-)."""
    if not lam_min < lam_max <= 0:
        raise DomainError("need lam_min < lam_max <= 0")
    hi = lam_max if lam_max < 0 else -1e-6

    def wr(lam):
        p, m = _pair_at(u, x, lam)
        return float(wronskian(p, m)[0].real)

    grid = np.linspace(lam_min, hi, n)
    vals = np.array([wr(t) for t in grid])
    roots = []
    for i in range(n - 1):
        if vals[i] == 0:
            roots.append(grid[i])
        elif vals[i] * vals[i + 1] < 0:
            roots.append(optimize.brentq(wr, grid[i], grid[i + 1], xtol=1e-13, rtol=1e-14))
    return np.array(roots)


# ---------------------------------------------------------------------------
# Kodaira matrix and Weyl m-functions

def kodaira(u: Potential, x: float, lam: complex) -> np.ndarray:
    """Characteristic matrix with psi_- scaled so that Wr(psi_+, psi_-) = 1.

    Then Xi[0, 0] = 2 G(x, x; lam) and det Xi = -1.
    """
    p, m = _pair_at(u, x, lam)
    W = wronskian(p, m)[0]
    if abs(W) <= 1e-300:
        raise PoleError(f"Wronskian vanishes at lam = {lam}")
    f, fp = p[0][0], p[1][0]
    g, gp = m[0][0] / W, m[1][0] / W
    off = fp * g + f * gp
    return np.array([[2 * f * g, off], [off, 2 * fp * gp]])


def kodaira_measure(u: Potential, x: float, lam_grid, eps: float = EPS_DEFAULT) -> list:
    """Increments (1/pi) int Im Xi(x, nu + i eps) dnu between consecutive grid points."""
    grid = np.asarray(lam_grid, dtype=float)
    if grid.ndim != 1 or grid.size < 2 or np.any(np.diff(grid) <= 0):
        raise GridError("lam grid must be increasing with at least two points")
    dens = [kodaira(u, x, complex(t, eps)).imag / np.pi for t in grid]
    return [0.5 * (grid[i + 1] - grid[i]) * (dens[i] + dens[i + 1]) for i in range(grid.size - 1)]


def weyl_m(u: Potential, x: float, lam: complex) -> tuple[complex, complex]:
    """(m_+, m_-) = (psi_+'/psi_+, -psi_-'/psi_-) at x."""
    p, m = _pair_at(u, x, lam)
    if abs(p[0][0]) < 1e-300 or abs(m[0][0]) < 1e-300:
        raise PoleError(f"a Weyl solution vanishes at x = {x}")
    return complex(p[1][0] / p[0][0]), complex(-m[1][0] / m[0][0])


def weyl_m_identity_check(u: Potential, x: float, lam: complex, h: float = 1e-3) -> float:
    """|d/dx log(-G) by central differences - (m_+ - m_-)|."""
    if complex(lam).imag == 0:
        raise DomainError("lam must be off the real axis")
    xs = np.array([x - h, x, x + h])
    p, m = _pair_at(u, xs, lam)
    if np.any(np.abs(p[0]) < 1e-300) or np.any(np.abs(m[0]) < 1e-300):
        raise PoleError(f"a Weyl solution vanishes near x = {x}")
    prod = p[0] * m[0]
    # the Wronskian cancels in the ratio
    d = np.log(prod[2] / prod[0]) / (2 * h)
    mp, mm = p[1][1] / p[0][1], -m[1][1] / m[0][1]
    return float(abs(d - (mp - mm)))


# ---------------------------------------------------------------------------
# canonical systems

@dataclass(frozen=True, eq=False)
class CanonicalSystem:
    """Psi' = J (lam Omega_1(x) + Omega_0(x)) Psi.

    ``psi0`` is the default initial vector at x = 0.  ``solution``, when
    given, maps (x array, lam) to the 2 x len(x) solution with that initial
    vector and is used instead of integrating; this is how the Airy system
    avoids the exponential growth of Bi in forward integration.
    """
    omega0: Callable[[float], np.ndarray]
    omega1: Callable[[float], np.ndarray]
    psi0: tuple[float, float] = (1.0, 0.0)
    solution: Callable | None = None

    def __post_init__(self):
        for x in np.linspace(0.0, 5.0, 11):
            O1 = np.asarray(self.omega1(x), dtype=float)
            O0 = np.asarray(self.omega0(x), dtype=float)
            if O1.shape != (2, 2) or O0.shape != (2, 2):
                raise DomainError("Omega_0 and Omega_1 must be 2 x 2")
            if not (np.allclose(O1, O1.T) and np.allclose(O0, O0.T)):
                raise DomainError(f"Omega matrices must be symmetric (x = {x})")
            if np.linalg.eigvalsh(O1).min() < -1e-12:
                raise DomainError(f"Omega_1 is not positive semidefinite at x = {x}")

    def matrix(self, x: float, lam: complex) -> np.ndarray:
        return lam * np.asarray(self.omega1(x)) + np.asarray(self.omega0(x))


def schrodinger_canonical(u: Potential | None = None) -> CanonicalSystem:
    """Omega_1 = diag(1, 0), Omega_0 = diag(-u, 1), Psi(0) = (1, 0)."""
    ev = (lambda x: 0.0) if u is None else u.evaluator
    O1 = np.diag([1.0, 0.0])
    return CanonicalSystem(lambda x: np.diag([-ev(x), 1.0]), lambda x: O1)


def airy_system() -> CanonicalSystem:
    """Omega_0 = [[x, 0], [0, -1]], Omega_1 = 0; Psi = (Ai, Ai')."""
    zero = np.zeros((2, 2))

    def exact(x, lam=0.0):
        a, ap = airy.airy_ai(np.asarray(x, dtype=float))
        return np.array([a, ap])

    return CanonicalSystem(lambda x: np.array([[x, 0.0], [0.0, -1.0]]), lambda x: zero,
                           psi0=(airy.AI0, airy.AIP0), solution=exact)


def canonical_solve(cs: CanonicalSystem, lam: complex, x_range, psi0=None,
                    points=None, with_energy: bool = False) -> Trajectory:
    """Integrate the canonical system over ``x_range`` = (x0, x1) from Psi(x0).

    For real lam and real Psi(x0) the integration is carried out in real
    arithmetic.  With ``with_energy`` a third component accumulates
    int Psi^T Omega_1 Psi dy.
    """
    x0, x1 = map(float, x_range)
    psi0 = np.asarray(cs.psi0 if psi0 is None else psi0)
    if psi0.shape != (2,) or not np.any(psi0):
        raise DomainError("Psi(x0) must be a nonzero 2-vector")
    real = np.isrealobj(psi0) and np.imag(lam) == 0
    dtype = float if real else complex
    lam = float(np.real(lam)) if real else complex(lam)

    def rhs(x, y):
        M = cs.matrix(x, lam)
        d = J @ M @ y[:2]
        if with_energy:
            return np.append(d, y[:2] @ np.asarray(cs.omega1(x)) @ y[:2])
        return d

    y0 = np.append(psi0, 0.0) if with_energy else psi0
    return _integrate(rhs, x0, x1, y0, points, dtype=dtype)


def _psi(cs: CanonicalSystem, lam, xs) -> np.ndarray:
    xs = np.asarray(xs, dtype=float)
    if cs.solution is not None:
        return np.asarray(cs.solution(xs, lam))
    flat = np.unique(xs.ravel())
    out = np.empty((2, flat.size), dtype=complex)
    pos, neg = flat >= 0, flat < 0
    if pos.any():
        out[:, pos] = canonical_solve(cs, lam, (0.0, max(flat[-1], 1e-12))).dense(flat[pos])
    if neg.any():
        out[:, neg] = canonical_solve(cs, lam, (0.0, flat[0])).dense(flat[neg])
    idx = np.searchsorted(flat, xs.ravel())
    return out[:, idx].reshape((2,) + xs.shape)


def hamiltonian_kernel(cs: CanonicalSystem, lam: complex, x, y):
    """k(x, y) = Psi(y)^T J Psi(x) / (x - y), with -Psi^T Omega Psi on the diagonal."""
    X, Y = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
    px, py = _psi(cs, lam, X), _psi(cs, lam, Y)
    num = py[0] * (J[0, 0] * px[0] + J[0, 1] * px[1]) + py[1] * (J[1, 0] * px[0] + J[1, 1] * px[1])
    diag = np.isclose(X, Y, rtol=0, atol=1e-14)
    O = np.array([[cs.matrix(t, lam) for t in row] for row in np.atleast_2d(X)]).reshape(X.shape + (2, 2))
    dval = -np.einsum("...i,...ij,...j->...", np.moveaxis(px, 0, -1), O, np.moveaxis(px, 0, -1))
    with np.errstate(divide="ignore", invalid="ignore"):
        k = num / (X - Y)
    out = np.where(diag, dval, k)
    return out[()] if out.ndim == 0 else out


def airy_determinant(s: float = 0.0, n: int = 41, L: float = 1.0,
                     map_kind: str = "rational") -> float:
    """det(I - K_Airy) on (s, inf) with an n-node mapped Gauss-Legendre rule."""
    cs = airy_system()
    rule = nystrom.build_rule(n, map_kind, L).shifted(s)
    t = rule.nodes
    K = np.asarray(hamiltonian_kernel(cs, 0.0, t[:, None], t[None, :]), dtype=float)
    sw = np.sqrt(rule.weights)
    return float(np.real(nystrom.fredholm_det(sw[:, None] * K * sw[None, :], -1.0)))


# ---------------------------------------------------------------------------
# de Branges phase

@dataclass(frozen=True, eq=False)
class PhaseData:
    grid: np.ndarray
    phase: np.ndarray
    E: np.ndarray

    def __post_init__(self):
        r = np.exp(1j * self.phase) * self.E
        if np.any(np.abs(r.imag) > 1e-8 * np.maximum(1.0, np.abs(self.E))):
            raise GridError("E exp(i phase) is not real on the grid")

    @property
    def theta(self) -> np.ndarray:
        """Theta = E* / E on the real grid."""
        return np.conj(self.E) / self.E


def _E_canonical(cs: CanonicalSystem, x: float, kappa: float) -> complex:
    """E = f - i h where Psi(x) = (f, -h)."""
    if x == 0:
        psi = np.asarray(cs.psi0, dtype=float)
    elif cs.solution is not None:
        psi = np.asarray(cs.solution(np.array([x]), kappa))[:, 0]
    else:
        psi = canonical_solve(cs, kappa, (0.0, x)).y[:, -1]
    return complex(psi[0] + 1j * psi[1])


def phase_from_E(E: Callable[[float], complex], kappa_grid, max_refine: int = 6) -> PhaseData:
    """Continuous branch of -arg E on a grid, refined until |dphi| < pi/2."""
    grid = np.asarray(kappa_grid, dtype=float)
    if grid.ndim != 1 or grid.size < 2 or np.any(np.diff(grid) <= 0):
        raise GridError("kappa grid must be increasing with at least two points")
    vals = np.array([E(k) for k in grid], dtype=complex)
    zero = np.abs(vals) < 1e-300
    if zero.any():
        # E vanishes: the phase is undefined there, so the points are dropped
        grid, vals = grid[~zero], vals[~zero]
    for _ in range(max_refine + 1):
        ph = -np.angle(vals)
        jump = np.abs(np.angle(np.exp(1j * np.diff(ph))))
        bad = np.nonzero(jump >= np.pi / 2)[0]
        if bad.size == 0:
            return PhaseData(grid, np.unwrap(ph), vals)
        mids = 0.5 * (grid[bad] + grid[bad + 1])
        mv = np.array([E(k) for k in mids], dtype=complex)
        grid = np.insert(grid, bad + 1, mids)
        vals = np.insert(vals, bad + 1, mv)
    raise GridError("phase branch jumps persist after refinement")


def debranges_phase(cs: CanonicalSystem, x: float, kappa_grid, max_refine: int = 6) -> PhaseData:
    """Phase of E(kappa) = f(x; kappa) - i h(x; kappa) over a kappa grid."""
    if not np.all(np.isreal(cs.psi0)) or not np.any(cs.psi0):
        raise DomainError("Psi(0) must be real and nonzero")
    return phase_from_E(lambda k: _E_canonical(cs, x, k), kappa_grid, max_refine)


PHASE_SIGN = -1.0


def phase_derivative_check(cs: CanonicalSystem, x: float, kappa: float, dk: float = 1e-4) -> float:
    """| ||Psi||^2 phi'(kappa) - PHASE_SIGN int_0^x Psi^T Omega_1 Psi dy |.

    phi' comes from central differences of the phase branch.  With
    Psi' = J Omega Psi, phi = -arg E and Psi = (f, -h) one finds
    (f h_k - h f_k)(x) = -int Psi^T Omega_1 Psi, so the identity holds with
    PHASE_SIGN = -1 on the right.
    """
    pd = phase_from_E(lambda k: _E_canonical(cs, x, k), [kappa - dk, kappa, kappa + dk])
    i0 = int(np.argmin(np.abs(pd.grid - kappa)))
    dphi = (pd.phase[-1] - pd.phase[0]) / (pd.grid[-1] - pd.grid[0])
    if x == 0:
        return float(abs(dphi))
    tr = canonical_solve(cs, kappa, (0.0, x), with_energy=True)
    psi = tr.y[:2, -1]
    energy = tr.y[2, -1]
    assert abs(pd.grid[i0] - kappa) < 1e-15
    return float(abs(np.dot(psi, psi) * dphi - PHASE_SIGN * energy))


def winding_number(theta) -> int:
    """Winding of a closed-up sampled curve about 0.

    Counts signed crossings of the negative real axis, the last sample being
    joined back to the first.
    """
    z = np.asarray(theta, dtype=complex)
    if z.ndim != 1 or z.size < 3:
        raise GridError("need at least three samples")
    if np.any(np.abs(z) < 1e-300):
        raise GridError("the curve passes through 0")
    a, b = z, np.roll(z, -1)
    count = 0
    for p, q in zip(a, b):
        if (p.imag >= 0) != (q.imag >= 0):
            # abscissa where the segment meets the real axis
            t = p.imag / (p.imag - q.imag)
            if p.real + t * (q.real - p.real) < 0:
                count += 1 if q.imag < p.imag else -1
    # counterclockwise motion crosses the negative axis downward
    return count


# ---------------------------------------------------------------------------
# the Lambda kernel

def _decaying_start(cs: CanonicalSystem, lam: complex, X: float):
    w, V = np.linalg.eig(J @ cs.matrix(X, lam))
    i = int(np.argmin(w.real))
    if w[i].real >= 0:
        raise DivergenceError(f"no decaying branch at lam = {lam}")
    return V[:, i], -w[i].real


def decaying_solution(cs: CanonicalSystem, lam: complex, X: float | None = None):
    """Psi(x; lam) decaying at +inf, normalised by Psi_1(0) = 1, on (0, X).

    Starts from the decaying eigenvector of J Omega(X) frozen at the cutoff.
    Returns (trajectory, decay rate, X).
    """
    lam = complex(lam)
    if lam.imag <= 0:
        raise DomainError("need Im lam > 0")
    X0 = 10.0 if X is None else X
    v, rate = _decaying_start(cs, lam, X0)
    if X is None:
        X = min(max(40.0 / rate, 10.0), 400.0)
        v, rate = _decaying_start(cs, lam, X)
    tr = canonical_solve(cs, lam, (X, 0.0), psi0=v.astype(complex))
    c = tr.y[0, -1]
    if abs(c) < 1e-300:
        raise PoleError("Psi_1(0) vanishes")
    return Trajectory(tr.x, tr.y / c, lambda s, d=tr.dense, c=c: d(s) / c), rate, X


def lambda_kernel(cs: CanonicalSystem, lam: complex, nu: complex, X: float | None = None,
                  panels: int = 200, order: int = 8) -> complex:
    """int_0^X Psi(x; nu)^H Omega_1 Psi(x; lam) dx for the decaying branches."""
    pl, rl, Xl = decaying_solution(cs, lam, X)
    pn, rn, Xn = (pl, rl, Xl) if nu == lam else decaying_solution(cs, nu, X)
    Xc = min(Xl, Xn)
    s, w = np.polynomial.legendre.leggauss(order)
    edges = np.linspace(0.0, Xc, panels + 1)
    mid, half = 0.5 * (edges[1:] + edges[:-1]), 0.5 * np.diff(edges)
    t = (mid[:, None] + half[:, None] * s).ravel()
    wt = (half[:, None] * w).ravel()
    a, b = pl(t), pn(t)
    O1 = np.array([cs.omega1(v) for v in t])
    vals = np.einsum("in,nij,jn->n", np.conj(b), O1, a)
    total = np.sum(wt * vals)
    tail = abs(np.conj(pn(Xc)) @ np.asarray(cs.omega1(Xc)) @ pl(Xc)) / (rl + rn)
    if tail > 1e-8 * max(1.0, abs(total)):
        raise DivergenceError(f"tail beyond X = {Xc:.4g} is {tail:.2e}")
    return complex(total)


def lambda_boundary(cs: CanonicalSystem, lam: complex, nu: complex) -> complex:
    """Boundary form Psi(0; nu)^H J Psi(0; lam) / (lam - conj nu) of the same integral."""
    a = decaying_solution(cs, lam)[0](0.0)
    b = decaying_solution(cs, nu)[0](0.0)
    return complex(np.conj(b) @ J @ a / (lam - np.conj(nu)))


# ---------------------------------------------------------------------------
# Drach

class DrachResult(NamedTuple):
    ode_residual: float
    solution_residual: float
    mu2: complex
    mu2_spread: float


def _d5(f, h):
    """First, second and third derivatives by 5-point stencils on interior points."""
    d1 = (f[:-4] - 8 * f[1:-3] + 8 * f[3:-1] - f[4:]) / (12 * h)
    d2 = (-f[:-4] + 16 * f[1:-3] - 30 * f[2:-2] + 16 * f[3:-1] - f[4:]) / (12 * h * h)
    d3 = (-f[:-4] + 2 * f[1:-3] - 2 * f[3:-1] + f[4:]) / (2 * h ** 3)
    return d1, d2, d3


def drach_check(u: Potential, lam: float, x_grid) -> DrachResult:
    """Defect of the third-order equation for h = g^2 with g = G(x, x; lam).

    The grid must be uniform; derivatives use 5-point stencils, so results
    are reported on its interior points.  mu^2 is evaluated from
    -g g''/2 + g'^2/4 + g^2 (u - lam) at the leftmost interior point, and
    psi = sqrt(g) exp(int mu / g) is then checked against L psi = lam psi.
    """
    xs = np.asarray(x_grid, dtype=float)
    if xs.size < 9:
        raise GridError("need at least 9 grid points")
    dx = np.diff(xs)
    if np.any(dx <= 0) or np.ptp(dx) > 1e-9 * dx.mean():
        raise GridError("x grid must be uniform and increasing")
    h = dx.mean()
    g = green_diag_ode(u, xs, lam)
    zeros = xs[np.abs(g) < 1e-12]
    if zeros.size:
        raise NodeError(f"g vanishes at x = {zeros.tolist()}")
    uu = u(xs)[2:-2]
    H = g * g
    h1, h2, h3 = _d5(H, h)
    Hi = H[2:-2]
    defect = (Hi ** 2 * h3 - 1.5 * Hi * h1 * h2 - 4 * (uu - lam) * Hi ** 2 * h1
              + 0.75 * h1 ** 3 - 4 * _d5(u(xs), h)[0] * Hi ** 3)
    g1, g2, _ = _d5(g, h)
    gi = g[2:-2]
    mu2_all = -0.5 * gi * g2 + 0.25 * g1 ** 2 + gi ** 2 * (uu - lam)
    mu2 = complex(mu2_all[0])
    spread = float(np.max(np.abs(mu2_all - mu2)))
    mu = np.sqrt(mu2)
    r = 1 / gi
    integ = cumulative_simpson(r.real, dx=h, initial=0) + 1j * cumulative_simpson(r.imag, dx=h, initial=0)
    psi = np.sqrt(gi.astype(complex)) * np.exp(mu * integ)
    p1, p2, _ = _d5(psi, h)
    lres = -p2 + (uu[2:-2] - lam) * psi[2:-2]
    sol = float(np.max(np.abs(lres)) / np.max(np.abs(psi)))
    return DrachResult(float(np.max(np.abs(defect))), sol, mu2, spread)
