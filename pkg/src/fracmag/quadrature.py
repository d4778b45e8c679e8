"""Quadrature rules: double-exponential half-line/interval rules, graded
Gauss-Legendre panels and Lebedev spherical grids.

All rules return nodes and weights as float arrays; integrands are evaluated
by the caller, so every rule here is vectorized over whatever the caller
batches.
"""
from __future__ import annotations

from functools import lru_cache
from typing import Callable

import numpy as np

__all__ = [
    "QuadratureError",
    "gauss_legendre",
    "graded_panels",
    "panel_rule",
    "exp_sinh",
    "tanh_sinh",
    "integrate_half_line",
    "integrate_interval",
    "integrate_tail",
    "integrate_power_weighted",
    "lebedev",
    "LEBEDEV_ORDERS",
]


class QuadratureError(RuntimeError):
    """Quadrature did not reach its tolerance; ``residual`` holds the estimate."""

    def __init__(self, msg: str, residual: float = float("nan")):
        super().__init__(msg)
        self.residual = residual


@lru_cache(maxsize=64)
def gauss_legendre(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes/weights on [-1, 1]."""
    x, w = np.polynomial.legendre.leggauss(int(n))
    x.flags.writeable = False
    w.flags.writeable = False
    return x, w


def graded_panels(r_start: float, r_end: float, ratio: float = 2.0) -> np.ndarray:
    """Breakpoints ``r_start * ratio**k`` on [r_start, r_end], closed at ``r_end``."""
    if not 0.0 < r_start < r_end:
        raise ValueError("need 0 < r_start < r_end")
    n = int(np.ceil(np.log(r_end / r_start) / np.log(ratio) - 1e-12))
    edges = r_start * ratio ** np.arange(n + 1, dtype=float)
    edges[-1] = r_end
    if n >= 2 and edges[-1] - edges[-2] < 0.25 * (edges[-2] - edges[-3]):
        edges = np.delete(edges, -2)
    return edges


def panel_rule(edges: np.ndarray, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Composite Gauss-Legendre rule with ``n`` nodes on each panel."""
    x, w = gauss_legendre(n)
    a = edges[:-1, None]
    b = edges[1:, None]
    nodes = 0.5 * (b - a) * x[None, :] + 0.5 * (a + b)
    weights = 0.5 * (b - a) * w[None, :]
    return nodes.ravel(), weights.ravel()


def exp_sinh(level: int, scale: float = 1.0, tmax: float = 4.5) -> tuple[np.ndarray, np.ndarray]:
    """Double-exponential rule for [0, inf): ``x = scale * exp(pi/2 sinh t)``.

    Handles integrable algebraic singularities at 0 and exponential decay
    at infinity.  ``level`` halves the step ``2**-level``.
    """
    h = 2.0 ** (-level)
    t = np.arange(-tmax, tmax + 0.5 * h, h)
    e = np.exp(0.5 * np.pi * np.sinh(t))
    x = scale * e
    w = h * scale * 0.5 * np.pi * np.cosh(t) * e
    return x, w


def tanh_sinh(level: int, a: float, b: float, tmax: float = 6.0) -> tuple[np.ndarray, np.ndarray]:
    """Double-exponential rule on [a, b] with endpoint-singularity tolerance."""
    h = 2.0 ** (-level)
    t = np.arange(-tmax, tmax + 0.5 * h, h)
    sh = 0.5 * np.pi * np.sinh(t)
    # distance from the nearer endpoint, computed without cancellation
    comp = 1.0 / (np.exp(np.abs(sh)) * np.cosh(sh))
    half = 0.5 * (b - a)
    x = np.where(t < 0, a + half * comp, b - half * comp)
    w = h * half * 0.5 * np.pi * np.cosh(t) / np.cosh(sh) ** 2
    keep = (comp > 0) & (x > a) & (x < b)
    return x[keep], w[keep]


def _refine(rule: Callable[[int], tuple[np.ndarray, np.ndarray]],
            f: Callable[[np.ndarray], np.ndarray], rtol: float, atol: float,
            level0: int, max_level: int) -> tuple[float, float]:
    x, w = rule(level0)
    prev = float(np.sum(w * f(x)))
    for lev in range(level0 + 1, max_level + 1):
        x, w = rule(lev)
        cur = float(np.sum(w * f(x)))
        err = abs(cur - prev)
        if err <= max(rtol * abs(cur), atol):
            return cur, err
        prev = cur
    raise QuadratureError("double-exponential rule did not converge", err)


def integrate_half_line(f: Callable[[np.ndarray], np.ndarray], scale: float = 1.0,
                        rtol: float = 1e-13, atol: float = 0.0,
                        max_level: int = 9) -> tuple[float, float]:
    """Integrate ``f`` over [0, inf) with step halving; returns (value, err)."""
    return _refine(lambda lev: exp_sinh(lev, scale), f, rtol, atol, 2, max_level)


def integrate_power_weighted(g: Callable[[np.ndarray], np.ndarray], power: float,
                             scale: float = 1.0, upper: float = np.inf,
                             rtol: float = 1e-13, atol: float = 0.0,
                             max_level: int = 9) -> tuple[float, float]:
    """Integrate ``r**power * g(r)`` over [0, upper) for ``power > -1``.

    ``g`` must have a finite limit at the origin.  On [0, min(scale, upper)]
    the map ``r = t**(1/(power+1))`` turns the integrand into ``g`` itself,
    so exponents close to -1 (where the mass sits at astronomically small
    ``r``) cost nothing extra.  ``g`` is never evaluated below
    ``1e-100*scale``; its value there stands in for the limit at 0.
    """
    q = float(power) + 1.0
    if q <= 0.0:
        raise ValueError("power must exceed -1")
    a = min(scale, upper)
    floor = 1e-100 * scale

    def head_f(t):
        return g(np.maximum(t ** (1.0 / q), floor)) / q

    head, e1 = _refine(lambda lev: tanh_sinh(lev, 0.0, a ** q), head_f, rtol, atol,
                       2, max_level)
    if upper <= scale:
        return head, e1

    def f(r):
        return r ** power * g(r)

    if np.isinf(upper):
        tail, e2 = integrate_tail(f, a, scale, rtol, atol, max_level)
    else:
        tail, e2 = integrate_interval(f, a, upper, rtol, atol, max_level)
    return head + tail, e1 + e2


def integrate_tail(f: Callable[[np.ndarray], np.ndarray], a: float, scale: float = 1.0,
                   rtol: float = 1e-13, atol: float = 0.0,
                   max_level: int = 9) -> tuple[float, float]:
    """Integrate ``f`` over [a, inf) with ``x = a + scale*exp(pi/2 sinh t)``."""
    def rule(lev):
        x, w = exp_sinh(lev, scale)
        return a + x, w
    return _refine(rule, f, rtol, atol, 2, max_level)


def integrate_interval(f: Callable[[np.ndarray], np.ndarray], a: float, b: float,
                       rtol: float = 1e-13, atol: float = 0.0,
                       max_level: int = 9) -> tuple[float, float]:
    """Integrate ``f`` over [a, b] by tanh-sinh with step halving."""
    return _refine(lambda lev: tanh_sinh(lev, a, b), f, rtol, atol, 2, max_level)


# ---------------------------------------------------------------------------
# Lebedev grids.  Orbit codes: 0 -> (1,0,0) x6, 1 -> (0,a,a) x12 with a=sqrt(1/2),
# 2 -> (a,a,a) x8 with a=sqrt(1/3), 3 -> (a,a,b) x24, 4 -> (a,b,0) x24,
# 5 -> (a,b,c) x48.  Weights are normalized to sum to one.

_LEBEDEV_TABLE: dict[int, list[tuple]] = {
    26: [
        (0, 0.0, 0.0, 0.4761904761904762e-1),
        (1, 0.0, 0.0, 0.3809523809523810e-1),
        (2, 0.0, 0.0, 0.3214285714285714e-1),
    ],
    50: [
        (0, 0.0, 0.0, 0.1269841269841270e-1),
        (1, 0.0, 0.0, 0.2257495590828924e-1),
        (2, 0.0, 0.0, 0.2109375000000000e-1),
        (3, 0.3015113445777636, 0.0, 0.2017333553791887e-1),
    ],
    86: [
        (0, 0.0, 0.0, 0.1154401154401154e-1),
        (2, 0.0, 0.0, 0.1194390908585628e-1),
        (3, 0.3696028464541502, 0.0, 0.1111055571060340e-1),
        (3, 0.6943540066026664, 0.0, 0.1187650129453714e-1),
        (4, 0.3742430390903412, 0.0, 0.1181230374690448e-1),
    ],
    110: [
        (0, 0.0, 0.0, 0.3828270494937162e-2),
        (2, 0.0, 0.0, 0.9793737512487512e-2),
        (3, 0.1851156353447362, 0.0, 0.8211737283191111e-2),
        (3, 0.6904210483822922, 0.0, 0.9942814891178103e-2),
        (3, 0.3956894730559419, 0.0, 0.9595471336070963e-2),
        (4, 0.4783690288121502, 0.0, 0.9694996361663028e-2),
    ],
    146: [
        (0, 0.0, 0.0, 0.5996313688621381e-3),
        (1, 0.0, 0.0, 0.7372999718620756e-2),
        (2, 0.0, 0.0, 0.7210515360144488e-2),
        (3, 0.6764410400114264, 0.0, 0.7116355493117555e-2),
        (3, 0.4174961227965453, 0.0, 0.6753829486314477e-2),
        (3, 0.1574676672039082, 0.0, 0.7574394159054034e-2),
        (5, 0.1403553811713183, 0.4493328323269557, 0.6991087353303262e-2),
    ],
}

LEBEDEV_ORDERS = tuple(sorted(_LEBEDEV_TABLE))


def _signs(v: np.ndarray) -> np.ndarray:
    out = [v]
    for ax in range(3):
        flipped = [p.copy() for p in out]
        for p in flipped:
            p[ax] = -p[ax]
        out += flipped
    pts = np.unique(np.round(np.array(out), 15), axis=0)
    return pts


def _orbit(code: int, a: float, b: float) -> np.ndarray:
    from itertools import permutations

    if code == 0:
        base = [(1.0, 0.0, 0.0)]
    elif code == 1:
        q = np.sqrt(0.5)
        base = [(0.0, q, q)]
    elif code == 2:
        q = np.sqrt(1.0 / 3.0)
        base = [(q, q, q)]
    elif code == 3:
        base = [(a, a, np.sqrt(1.0 - 2.0 * a * a))]
    elif code == 4:
        base = [(a, np.sqrt(1.0 - a * a), 0.0)]
    elif code == 5:
        base = [(a, b, np.sqrt(1.0 - a * a - b * b))]
    else:
        raise ValueError(code)
    pts = []
    for p in base:
        for perm in set(permutations(p)):
            pts.append(_signs(np.array(perm)))
    return np.unique(np.concatenate(pts), axis=0)


@lru_cache(maxsize=None)
def lebedev(order: int) -> tuple[np.ndarray, np.ndarray]:
    """Lebedev nodes (``order`` x 3 unit vectors) and weights summing to one."""
    if order not in _LEBEDEV_TABLE:
        raise ValueError(f"Lebedev order must be one of {LEBEDEV_ORDERS}")
    xs, ws = [], []
    for code, a, b, w in _LEBEDEV_TABLE[order]:
        p = _orbit(code, a, b)
        xs.append(p)
        ws.append(np.full(len(p), w))
    x = np.concatenate(xs)
    w = np.concatenate(ws)
    if len(x) != order:
        raise AssertionError(f"Lebedev {order}: built {len(x)} points")
    x.flags.writeable = False
    w.flags.writeable = False
    return x, w
