"""Normalizing constants, the Bessel-type Levy density and the extension kernel.

Throughout, ``nu = (3 + 2 s)/2``.  The Levy density factors as
``mu(r) = prefactor * w(r)`` with the *raw* kernel

    w(r) = K_nu(m r) / r**nu           (m > 0)
    w(r) = r**(-3 - 2 s)               (m = 0)

and ``prefactor = C_s m**nu`` (resp. ``c_s``).  Energies are assembled from
sums of ``w`` and multiplied by the prefactor at the end.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .quadrature import QuadratureError, integrate_half_line, integrate_power_weighted, integrate_tail
from .specfun import DomainError, gamma, kv

__all__ = [
    "FracParams",
    "Constants",
    "constants",
    "density_prefactor",
    "raw_kernel",
    "raw_kernel_origin_limit",
    "levy_density",
    "shell_antiderivative",
    "kernel_mass",
    "kernel_second_moment",
    "tail_mass",
    "extension_kernel",
    "extension_mass",
    "extension_mass_outside",
    "sandwich_constants",
]


@dataclass(frozen=True)
class FracParams:
    """Fractional order ``s`` and mass ``m``.

    ``m = 0`` selects the pure fractional kernel; everything else assumes
    ``m > 0``.
    """

    s: float
    m: float = 1.0
    nu: float = field(init=False)
    crit_exp: float = field(init=False)

    def __post_init__(self):
        s, m = float(self.s), float(self.m)
        if not 0.0 < s < 1.0:
            raise DomainError(f"s must lie in (0, 1), got {s}")
        if not m >= 0.0 or not math.isfinite(m):
            raise DomainError(f"m must be a nonnegative real, got {m}")
        object.__setattr__(self, "s", s)
        object.__setattr__(self, "m", m)
        object.__setattr__(self, "nu", (3.0 + 2.0 * s) / 2.0)
        object.__setattr__(self, "crit_exp", 6.0 / (3.0 - 2.0 * s))


@dataclass(frozen=True)
class Constants:
    c_s: float
    C_s: float
    kappa_s: float
    C_prime_s: float
    p_s: float


def constants(p: FracParams) -> Constants:
    """All normalizing constants for order ``p.s``."""
    s = p.s
    g1s = gamma(1.0 - s)
    gs = gamma(s)
    nu = p.nu
    c_s = s * 2.0 ** (2.0 * s) * gamma(nu) / (math.pi ** 1.5 * g1s)
    C_s = s * 2.0 ** ((2.0 * s - 1.0) / 2.0) / (math.pi ** 1.5 * g1s)
    kappa = 2.0 ** (1.0 - 2.0 * s) * g1s / gs
    C_prime = 2.0 ** (-(1.0 + 2.0 * s) / 2.0) / (math.pi ** 1.5 * gs)
    p_s = gamma(nu) / (math.pi ** 1.5 * gs)
    return Constants(c_s, C_s, kappa, C_prime, p_s)


def density_prefactor(p: FracParams) -> float:
    """``C_s m**nu`` for ``m > 0`` and ``c_s`` for ``m = 0``."""
    c = constants(p)
    if p.m == 0.0:
        return c.c_s
    return c.C_s * p.m ** p.nu


def raw_kernel(p: FracParams, r) -> np.ndarray:
    """Raw radial kernel ``w(r)``; see the module docstring."""
    r = np.asarray(r, dtype=float)
    if np.any(r <= 0.0):
        raise DomainError("kernel evaluated at r <= 0")
    if p.m == 0.0:
        return r ** (-3.0 - 2.0 * p.s)
    return kv(p.nu, p.m * r) / r ** p.nu


def raw_kernel_origin_limit(p: FracParams) -> float:
    """``lim_{r->0} r**(3+2s) w(r)`` (the pure fractional coefficient)."""
    if p.m == 0.0:
        return 1.0
    return 2.0 ** (p.nu - 1.0) * gamma(p.nu) / p.m ** p.nu


def levy_density(p: FracParams, r):
    """Levy density ``mu(r)``; ``c_s / r**(3+2s)`` when ``m = 0``."""
    out = density_prefactor(p) * raw_kernel(p, r)
    return float(out) if np.ndim(out) == 0 else out


def shell_antiderivative(p: FracParams, rho) -> np.ndarray:
    """``Phi(rho) = int_rho^inf w(t) t dt`` in closed form.

    Uses ``d/dz [z**(1-nu) K_{nu-1}(z)] = -z**(1-nu) K_nu(z)``.
    """
    rho = np.asarray(rho, dtype=float)
    if p.m == 0.0:
        return rho ** (-1.0 - 2.0 * p.s) / (1.0 + 2.0 * p.s)
    return rho ** (1.0 - p.nu) * kv(p.nu - 1.0, p.m * rho) / p.m


def _regular_factor(p: FracParams):
    # r**nu K_nu(m r): finite at the origin
    lim = 2.0 ** (p.nu - 1.0) * gamma(p.nu) / p.m ** p.nu

    def g(r):
        r = np.asarray(r, dtype=float)
        out = np.empty_like(r)
        tiny = p.m * r < 1e-30
        out[tiny] = lim
        rr = r[~tiny]
        out[~tiny] = rr ** p.nu * kv(p.nu, p.m * rr)
        return out

    return g


def kernel_second_moment(p: FracParams, weight=None, rtol: float = 1e-13) -> float:
    """``int_0^inf r**4 w(r) weight(r) dr`` (the radial second moment of ``w``).

    ``weight`` is an optional smooth cutoff.  Near the origin the integrand
    behaves like ``r**(1-2s)``; that power is integrated exactly.
    """
    if p.m == 0.0:
        raise DomainError("second moment diverges for m = 0 without a weight")
    g0 = _regular_factor(p)
    # r**4 w = r**(4 - 2 nu) * [r**nu K_nu] = r**(1-2s) * g0
    if weight is None:
        g = g0
    else:
        def g(r):
            return g0(r) * weight(np.asarray(r, dtype=float))
    val, _ = integrate_power_weighted(g, 1.0 - 2.0 * p.s, scale=1.0 / p.m, rtol=rtol)
    return val


def kernel_mass(p: FracParams, rtol: float = 1e-13) -> float:
    """``(2 pi/3) C_s m**nu int_0^inf r**((5-2s)/2) K_nu(m r) dr``.

    This is the direct radial integral; its closed form is ``s m**(2s-2)``.

    Raises
    ------
    QuadratureError
        If the double-exponential rule fails; carries the residual estimate.
    """
    if p.m <= 0.0:
        raise DomainError("kernel_mass requires m > 0")
    c = constants(p)
    try:
        mom = kernel_second_moment(p, rtol=rtol)
    except QuadratureError as exc:
        raise QuadratureError("kernel_mass quadrature failed", exc.residual) from exc
    return 2.0 * math.pi / 3.0 * c.C_s * p.m ** p.nu * mom


def tail_mass(p: FracParams, radius: float, rtol: float = 1e-12) -> float:
    """``int_{|z| > radius} mu(z) dz``."""
    if radius <= 0.0:
        raise DomainError("radius must be positive")
    pref = density_prefactor(p)
    if p.m == 0.0:
        return pref * 4.0 * math.pi * radius ** (-2.0 * p.s) / (2.0 * p.s)
    val, _ = integrate_tail(lambda r: r * r * raw_kernel(p, r), radius,
                            scale=max(radius, 1.0 / p.m), rtol=rtol, atol=1e-300)
    return pref * 4.0 * math.pi * val


def extension_kernel(p: FracParams, x, t: float):
    """Extension (Poisson-type) kernel ``P_m(x, t)``.

    ``x`` may be a point or an array of points with trailing dimension 3.
    """
    t = float(t)
    if not t > 0.0:
        raise DomainError("extension_kernel requires t > 0")
    if p.m <= 0.0:
        raise DomainError("extension_kernel requires m > 0")
    x = np.asarray(x, dtype=float)
    rho2 = np.sum(x * x, axis=-1) + t * t
    return _ext_radial(p, np.sqrt(rho2 - t * t), t)


def _ext_radial(p: FracParams, r, t: float):
    c = constants(p)
    rho = np.sqrt(np.asarray(r, dtype=float) ** 2 + t * t)
    return c.C_prime_s * p.m ** p.nu * t ** (2.0 * p.s) * rho ** (-p.nu) * kv(p.nu, p.m * rho)


def extension_mass(p: FracParams, t: float, rtol: float = 1e-12) -> float:
    """``int_{R^3} P_m(x, t) dx`` by radial quadrature (equals ``theta(m t)``)."""
    val, _ = integrate_half_line(lambda r: 4.0 * math.pi * r * r * _ext_radial(p, r, t),
                                 scale=max(t, 1e-3 / max(p.m, 1e-300)), rtol=rtol)
    return val


def extension_mass_outside(p: FracParams, t: float, delta: float, rtol: float = 1e-10) -> float:
    """``int_{|x| > delta} P_m(x, t) dx``."""
    val, _ = integrate_tail(lambda r: 4.0 * math.pi * r * r * _ext_radial(p, r, t), delta,
                            scale=max(delta, 1.0 / p.m), rtol=rtol, atol=1e-300)
    return val


def sandwich_constants(p: FracParams, R: float, n: int = 2000) -> tuple[float, float]:
    """Bounds ``C1 <= r**nu K_nu(m r) <= C2`` over ``r in (0, 2R]`` by scanning."""
    r = np.geomspace(1e-8 * R, 2.0 * R, n)
    v = r ** p.nu * kv(p.nu, p.m * r)
    lim = 2.0 ** (p.nu - 1.0) * gamma(p.nu) / p.m ** p.nu
    return float(min(v.min(), lim)), float(max(v.max(), lim))
