"""Airy function Ai and its derivative from series and asymptotic expansions.

Maclaurin series on [-7, 5.5], the standard large-argument expansions
beyond.  The switch points balance series cancellation against the best
truncation error of the asymptotic expansions; the worst relative error is
about 1e-8 near the positive switch.  Ai(0) and Ai'(0) come from
Gamma-function closed forms.
"""
from __future__ import annotations

import math

import numpy as np

AI0 = 1.0 / (3 ** (2 / 3) * math.gamma(2 / 3))
AIP0 = -1.0 / (3 ** (1 / 3) * math.gamma(1 / 3))
SWITCH_POS = 5.5
SWITCH_NEG = 7.0


def _maclaurin(x: float) -> tuple[float, float]:
    x3 = x ** 3
    f, fp = 1.0, 0.0
    g, gp = x, 1.0
    t, s = 1.0, x
    k = 0
    while True:
        t *= x3 / ((3 * k + 2) * (3 * k + 3))
        s *= x3 / ((3 * k + 3) * (3 * k + 4))
        k += 1
        f += t
        g += s
        fp += 3 * k * t / x if x else 0.0
        gp += (3 * k + 1) * s / x if x else 0.0
        if abs(t) + abs(s) < 1e-18 * (abs(f) + abs(g)) and k > 3:
            break
    return AI0 * f + AIP0 * g, AI0 * fp + AIP0 * gp


def _uv(zeta: float, kmax: int = 40):
    """Coefficients u_k, v_k, truncated where |u_k| zeta^-k stops shrinking."""
    u, v = [1.0], [1.0]
    for k in range(1, kmax):
        uk = u[-1] * (6 * k - 5) * (6 * k - 3) * (6 * k - 1) / ((2 * k - 1) * 216 * k)
        if uk / zeta ** k > u[-1] / zeta ** (k - 1):
            break
        u.append(uk)
        v.append(-(6 * k + 1) / (6 * k - 1) * uk)
    return np.array(u), np.array(v)


def _asym_pos(x: float) -> tuple[float, float]:
    zeta = 2.0 / 3.0 * x ** 1.5
    u, v = _uv(zeta)
    p = (-1.0 / zeta) ** np.arange(len(u))
    pref = math.exp(-zeta) / (2 * math.sqrt(math.pi))
    return pref * x ** -0.25 * np.dot(u, p), -pref * x ** 0.25 * np.dot(v, p)


def _asym_neg(z: float) -> tuple[float, float]:
    zeta = 2.0 / 3.0 * z ** 1.5
    u, v = _uv(zeta)
    k = np.arange(len(u))
    sgn = (-1.0) ** (k // 2)
    pw = zeta ** -k.astype(float)
    even, odd = k % 2 == 0, k % 2 == 1
    c, s = math.cos(zeta - math.pi / 4), math.sin(zeta - math.pi / 4)
    ai = (c * np.sum((sgn * u * pw)[even]) + s * np.sum((sgn * u * pw)[odd])) / (math.sqrt(math.pi) * z ** 0.25)
    aip = z ** 0.25 / math.sqrt(math.pi) * (s * np.sum((sgn * v * pw)[even]) - c * np.sum((sgn * v * pw)[odd]))
    return ai, aip


def airy_ai(x):
    """(Ai(x), Ai'(x)) for scalar or array x."""
    xs = np.asarray(x, dtype=float)
    ai = np.empty(xs.shape)
    aip = np.empty(xs.shape)
    for idx, t in np.ndenumerate(xs):
        if -SWITCH_NEG <= t <= SWITCH_POS:
            ai[idx], aip[idx] = _maclaurin(float(t))
        elif t > 0:
            ai[idx], aip[idx] = _asym_pos(float(t))
        else:
            ai[idx], aip[idx] = _asym_neg(float(-t))
    if xs.ndim == 0:
        return float(ai), float(aip)
    return ai, aip


def airy_kernel(x, y):
    """(Ai(x)Ai'(y) - Ai'(x)Ai(y)) / (x - y), with Ai'(x)^2 - x Ai(x)^2 on the diagonal."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    ax, apx = airy_ai(x)
    ay, apy = airy_ai(y)
    X, Y = np.broadcast_arrays(x, y)
    AX, APX = np.broadcast_to(ax, X.shape), np.broadcast_to(apx, X.shape)
    AY, APY = np.broadcast_to(ay, Y.shape), np.broadcast_to(apy, Y.shape)
    diag = np.isclose(X, Y, rtol=0, atol=1e-14)
    with np.errstate(divide="ignore", invalid="ignore"):
        K = (AX * APY - APX * AY) / (X - Y)
    return np.where(diag, APX ** 2 - X * AX ** 2, K)
