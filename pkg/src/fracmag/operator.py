"""Pointwise application of the pseudorelativistic magnetic operator.

Two quadratures of the same operator are provided:

* ``apply_regularized`` integrates the symmetric second difference

      D(z) = e^{-i z.A(x+z/2)} u(x+z) + e^{i z.A(x-z/2)} u(x-z) - 2 u(x)

  against ``-prefactor/2 * w(|z|)``.  Near the origin ``D(z)`` is replaced by
  its quadratic model ``H_A z.z`` (magnetic Hessian), whose radial integral
  is done exactly; only the O(|z|^4) remainder is integrated numerically.
* ``apply_truncated`` integrates ``u(x) - e^{-i z.A(x+z/2)} u(x+z)`` over
  ``eps < |z| < r_far`` (principal-value style).

Spherical coordinates are centred at ``x``: Gauss-Legendre panels in
``r`` (geometric toward 0, then uniform) times a Lebedev grid on the sphere.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .field import (AnalyticField, ConstantField, FieldSum, GaussianField, SampledField,
                    StencilError, VectorPotential, magnetic_hessian, magnetic_laplacian)
from .kernel import FracParams, density_prefactor, raw_kernel, tail_mass
from .quadrature import (LEBEDEV_ORDERS, graded_panels, integrate_half_line,
                         integrate_power_weighted, lebedev, panel_rule)
from .specfun import gamma, kv

__all__ = [
    "QuadratureSpec",
    "OperatorValue",
    "CapabilityError",
    "TruncationError",
    "apply_regularized",
    "apply_truncated",
    "apply_local_limit",
    "apply_symbol_nonmagnetic",
    "symbol_gaussian",
]


class CapabilityError(ValueError):
    """The requested input class is not supported by this routine."""


class TruncationError(RuntimeError):
    """Far-field tail bound exceeds the requested tolerance."""

    def __init__(self, msg: str, bound: float):
        super().__init__(msg)
        self.bound = bound


@dataclass(frozen=True)
class QuadratureSpec:
    """Quadrature controls for pointwise operator evaluation.

    Parameters
    ----------
    eps : float
        Excluded radius (truncated form only; 0 for the regularized form).
    r_far : float, optional
        Truncation radius.  Defaults to ``max(12, 40/m)``.
    n_radial : int
        Gauss-Legendre nodes per radial panel.
    n_angular : int
        Lebedev order (26, 50, 86, 110 or 146).
    target_rel_err : float
        Tolerance for the reported tail bound relative to ``|result|``.
    r_sub : float
        Radius of the ball where the Hessian model is subtracted.
    panel_width : float
        Maximal radial panel width away from the origin.
    """

    eps: float = 0.0
    r_far: float | None = None
    n_radial: int = 16
    n_angular: int = 50
    target_rel_err: float = 1e-6
    r_sub: float = 0.5
    panel_width: float = 0.5

    def __post_init__(self):
        if self.eps < 0:
            raise ValueError("eps must be nonnegative")
        if self.r_far is not None and not self.eps < self.r_far:
            raise ValueError("need eps < r_far")
        if self.n_radial < 8 or self.n_angular < 8:
            raise ValueError("node counts must be >= 8")
        if self.n_angular not in LEBEDEV_ORDERS:
            raise ValueError(f"n_angular must be one of {LEBEDEV_ORDERS}")

    def far(self, p: FracParams) -> float:
        if self.r_far is not None:
            return float(self.r_far)
        return max(12.0, 40.0 / p.m) if p.m > 0 else 60.0

    def refined(self) -> "QuadratureSpec":
        """Roughly twice the radial and angular nodes."""
        ang = {26: 50, 50: 110, 86: 146, 110: 146, 146: 146}[self.n_angular]
        return QuadratureSpec(self.eps, self.r_far, 2 * self.n_radial, ang,
                              self.target_rel_err, self.r_sub, self.panel_width)

    def coarsened(self) -> "QuadratureSpec":
        ang = {26: 26, 50: 26, 86: 50, 110: 50, 146: 86}[self.n_angular]
        return QuadratureSpec(self.eps, self.r_far, max(8, self.n_radial // 2), ang,
                              self.target_rel_err, self.r_sub, self.panel_width)


@dataclass(frozen=True)
class OperatorValue:
    """Operator value at a point with its error estimate."""

    value: complex
    est_err: float

    def __complex__(self):
        return complex(self.value)


def _evaluator(u):
    if isinstance(u, AnalyticField):
        return u.value, u
    if isinstance(u, SampledField):
        return u.evaluate, u
    raise TypeError("u must be a SampledField or an analytic field")


def _radial_edges(start: float, stop: float, width: float) -> np.ndarray:
    """Geometric panels from ``start`` up to ``width``, then uniform to ``stop``."""
    mid = min(width, stop)
    if start < mid:
        e = list(graded_panels(start, mid))
    else:
        e = [start]
    if stop > mid:
        n = int(math.ceil((stop - mid) / width - 1e-12))
        e += list(np.linspace(mid, stop, n + 1)[1:])
    return np.asarray(e)


def _shell_averages(A: VectorPotential, ev, x: np.ndarray, u0: complex, r: np.ndarray,
                    omega: np.ndarray, wa: np.ndarray, second: bool) -> np.ndarray:
    """Angular averages (weights sum to one) of D(r w) or of u(x) - T_+(r w)."""
    z = r[:, None, None] * omega[None, :, :]
    yp = x + z
    tp = np.exp(-1j * np.sum(z * A.evaluate(x + 0.5 * z), axis=-1)) * ev(yp)
    if second:
        ym = x - z
        tm = np.exp(1j * np.sum(z * A.evaluate(x - 0.5 * z), axis=-1)) * ev(ym)
        d = tp + tm - 2.0 * u0
    else:
        d = u0 - tp
    return d @ wa, np.max(np.abs(tp))


def _regularized_core(p: FracParams, A: VectorPotential, u, x: np.ndarray,
                      q: QuadratureSpec) -> tuple[complex, float]:
    ev, src = _evaluator(u)
    u0 = complex(ev(x[None, :])[0])
    r_far = q.far(p)
    r_sub = min(q.r_sub, r_far)
    try:
        H = magnetic_hessian(A, src, x)
        trH = complex(np.trace(H))
    except StencilError:
        # no second derivatives: integrate the raw second difference
        trH = None
    pref = density_prefactor(p)
    omega, wa = lebedev(q.n_angular)

    r_min = 1e-4 * r_sub if trH is not None else 1e-7 * r_sub
    edges = _radial_edges(r_min, r_far, q.panel_width)
    rn, rw = panel_rule(edges, q.n_radial)
    davg, umax = _shell_averages(A, ev, x, u0, rn, omega, wa, second=True)
    if trH is not None:
        davg = davg - np.where(rn <= r_sub, rn * rn * trH / 3.0, 0.0)
    integral = 4.0 * math.pi * np.sum(rw * rn * rn * raw_kernel(p, rn) * davg)

    if trH is not None:
        # exact radial integral of the quadratic model on [0, r_sub]
        if p.m == 0.0:
            mom = r_sub ** (2.0 - 2.0 * p.s) / (2.0 - 2.0 * p.s)
        else:
            lim = 2.0 ** (p.nu - 1.0) * gamma(p.nu) / p.m ** p.nu

            def g(r):
                r = np.asarray(r, dtype=float)
                return np.where(p.m * r < 1e-30, lim,
                                np.maximum(r, 1e-300) ** p.nu * kv(p.nu, p.m * np.maximum(r, 1e-300)))

            mom, _ = integrate_power_weighted(g, 1.0 - 2.0 * p.s, scale=r_sub, upper=r_sub)
        integral += 4.0 * math.pi * trH / 3.0 * mom
    value = -0.5 * pref * integral + p.m ** (2.0 * p.s) * u0
    umax = max(umax, abs(u0))
    tail = 2.0 * umax * tail_mass(p, r_far) if p.m > 0 else 0.0
    return value, tail


def apply_regularized(p: FracParams, A: VectorPotential, u, x, q: QuadratureSpec | None = None,
                      check_tail: bool = False) -> OperatorValue:
    """Operator value at ``x`` from the singularity-removed (second-difference) form.

    Parameters
    ----------
    p : FracParams
    A : VectorPotential
    u : SampledField or AnalyticField
        Analytic fields give exact derivatives for the Hessian model; grid
        fields use 4th-order stencils at grid nodes and cubic splines for
        off-grid values.
    x : array_like, shape (3,)
    q : QuadratureSpec, optional

    Returns
    -------
    OperatorValue
        ``est_err`` is the difference to a coarser rule plus the far tail bound.
    """
    q = q or QuadratureSpec()
    x = np.asarray(x, dtype=float)
    val, tail = _regularized_core(p, A, u, x, q)
    coarse, _ = _regularized_core(p, A, u, x, q.coarsened())
    err = abs(val - coarse) + tail
    if check_tail and tail > q.target_rel_err * max(abs(val), 1e-300):
        raise TruncationError("far-field tail bound exceeds target", tail)
    return OperatorValue(complex(val), float(err))


def _truncated_core(p: FracParams, A: VectorPotential, u, x: np.ndarray,
                    q: QuadratureSpec) -> tuple[complex, float]:
    ev, _ = _evaluator(u)
    u0 = complex(ev(x[None, :])[0])
    r_far = q.far(p)
    omega, wa = lebedev(q.n_angular)
    edges = _radial_edges(q.eps, r_far, q.panel_width)
    rn, rw = panel_rule(edges, q.n_radial)
    gavg, umax = _shell_averages(A, ev, x, u0, rn, omega, wa, second=False)
    pref = density_prefactor(p)
    g_eps = 4.0 * math.pi * np.sum(rw * rn * rn * raw_kernel(p, rn) * gavg)
    value = pref * g_eps + p.m ** (2.0 * p.s) * u0
    umax = max(umax, abs(u0))
    tail = 2.0 * umax * tail_mass(p, r_far) if p.m > 0 else 0.0
    return value, tail


def apply_truncated(p: FracParams, A: VectorPotential, u, x, q: QuadratureSpec,
                    check_tail: bool = False) -> OperatorValue:
    """Operator value at ``x`` with the ball ``|z| < q.eps`` removed.

    Returns ``prefactor * g_eps(x) + m**(2s) u(x)``.
    """
    if not q.eps > 0:
        raise ValueError("apply_truncated requires eps > 0")
    x = np.asarray(x, dtype=float)
    val, tail = _truncated_core(p, A, u, x, q)
    coarse, _ = _truncated_core(p, A, u, x, q.coarsened())
    err = abs(val - coarse) + tail
    if check_tail and tail > q.target_rel_err * max(abs(val), 1e-300):
        raise TruncationError("far-field tail bound exceeds target", tail)
    return OperatorValue(complex(val), float(err))


def apply_local_limit(m: float, A: VectorPotential, u, x) -> complex:
    """``(-Delta_A + m^2) u(x)``."""
    ev, src = _evaluator(u)
    x = np.asarray(x, dtype=float)
    return magnetic_laplacian(A, src, x) + m * m * complex(ev(x[None, :])[0])


def symbol_gaussian(s: float, m: float, g: GaussianField, x, rtol: float = 1e-13) -> complex:
    """``F^{-1}[(|xi|^2 + m^2)^s F g](x)`` for a centred-or-shifted Gaussian.

    Unitary transform convention.  ``s`` may be any value in (0, 1] and
    ``m >= 0``.
    """
    if np.any(g.wavevector != 0):
        raise CapabilityError("symbol oracle supports Gaussians without plane-wave factor")
    rho = float(np.linalg.norm(np.asarray(x, dtype=float) - g.center))
    a = g.a

    def f(k):
        sinc = np.sinc(k * rho / math.pi)
        return (k * k + m * m) ** s * (2.0 * a) ** -1.5 * np.exp(-k * k / (4.0 * a)) * k * k * sinc

    val, _ = integrate_half_line(f, scale=2.0 * math.sqrt(a), rtol=rtol)
    return g.amplitude * (2.0 * math.pi) ** -1.5 * 4.0 * math.pi * val


def apply_symbol_nonmagnetic(p: FracParams, u, x) -> complex:
    """Fourier-symbol evaluation for A = 0 on sums of Gaussians.

    Raises
    ------
    CapabilityError
        If ``u`` is not built from :class:`GaussianField` / constants.
    """
    if isinstance(u, SampledField):
        u = u.analytic
    terms = u.terms if isinstance(u, FieldSum) else [(1.0, u)]
    total = 0.0 + 0.0j
    for c, f in terms:
        if isinstance(f, GaussianField):
            total += c * symbol_gaussian(p.s, p.m, f, x)
        elif isinstance(f, ConstantField):
            total += c * f.c * p.m ** (2.0 * p.s)
        else:
            raise CapabilityError(f"no closed-form transform for {type(f).__name__}")
    return total
