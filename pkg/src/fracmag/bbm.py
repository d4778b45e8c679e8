"""Limits as ``s -> 1``: seminorms to the local magnetic Dirichlet energy,
the operator to ``-Delta_A + m^2``, and the mollifier moments behind them.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .energy import PairQuadratureSpec, discrete_form, local_energy
from .field import CartesianGrid, SampledField, VectorPotential
from .kernel import FracParams, constants, kernel_mass, raw_kernel
from .operator import QuadratureSpec, apply_local_limit, apply_regularized
from .quadrature import QuadratureError, integrate_interval, integrate_tail
from .specfun import DomainError

__all__ = [
    "SweepResult",
    "smooth_cutoff",
    "mollifier_moments",
    "bbm_sweep",
    "operator_limit_sweep",
]


@dataclass(frozen=True)
class SweepResult:
    s_values: list[float]
    seminorm_energy: list[float]
    local_energy: float
    rel_gap: list[float]

    def rows(self) -> list[tuple[float, float, float, float]]:
        return [(s, e, self.local_energy, g)
                for s, e, g in zip(self.s_values, self.seminorm_energy, self.rel_gap)]


def _check_increasing(s_list: Sequence[float]) -> list[float]:
    s = [float(v) for v in s_list]
    if not s:
        raise DomainError("empty s list")
    if any(b <= a for a, b in zip(s, s[1:])):
        raise DomainError("s values must be strictly increasing")
    return s


def smooth_cutoff(r, r_omega: float) -> np.ndarray:
    """C-infinity cutoff: 1 on ``[0, r_omega]``, 0 beyond ``2 r_omega``."""
    r = np.asarray(r, dtype=float)
    t = np.clip((r - r_omega) / r_omega, 0.0, 1.0)

    def f(x):
        xs = np.where(x > 0, x, 1.0)
        return np.where(x > 0, np.exp(-1.0 / xs), 0.0)

    a, b = f(1.0 - t), f(t)
    return a / (a + b)


def mollifier_moments(s_list: Sequence[float], m: float, r_omega: float,
                      rtol: float = 1e-12) -> list[tuple[float, float, float]]:
    """``(s, I1, I2)`` for the Bessel mollifiers with a smooth cutoff at ``r_omega``.

    ``I1`` is the full second moment (equal to ``s m^(2s-2)``) and ``I2`` the
    part removed by the cutoff, which vanishes as ``s -> 1``.

    Raises
    ------
    QuadratureError
        When either integral misses its tolerance.
    """
    if not r_omega > 0:
        raise DomainError("r_omega must be positive")
    out = []
    for s in _check_increasing(s_list):
        p = FracParams(s, m)
        c = 2.0 * math.pi / 3.0 * constants(p).C_s * m ** p.nu
        I1 = kernel_mass(p, rtol=rtol)

        def g(r):
            return r ** 4 * raw_kernel(p, r) * (smooth_cutoff(r, r_omega) - 1.0)

        try:
            mid, _ = integrate_interval(g, r_omega, 2.0 * r_omega, rtol=rtol, atol=1e-300)
            tail, _ = integrate_tail(lambda r: -r ** 4 * raw_kernel(p, r), 2.0 * r_omega,
                                     scale=max(2.0 * r_omega, 1.0 / m), rtol=rtol, atol=1e-300)
        except QuadratureError as exc:
            raise QuadratureError(f"I2 quadrature failed at s={s}", exc.residual) from exc
        out.append((s, I1, c * (mid + tail)))
    return out


def bbm_sweep(A: VectorPotential, u: SampledField, s_list: Sequence[float], m: float,
              pairq: PairQuadratureSpec | None = None,
              domain_radius: float | None = None) -> SweepResult:
    """Seminorm energies along ``s_list`` against ``int |grad_A u|^2``.

    ``domain_radius`` restricts both sides to a ball (bounded-domain case).
    The local energy uses analytic derivatives when ``u`` carries them.
    """
    if not isinstance(u.grid, CartesianGrid):
        raise DomainError("bbm_sweep needs a Cartesian field")
    s_vals = _check_increasing(s_list)
    loc = local_energy(A, u, domain_radius)
    if not loc > 0:
        raise DomainError("local energy vanishes; relative gap undefined")
    energies, gaps = [], []
    for s in s_vals:
        form = discrete_form(FracParams(s, m), A, u.grid, pairq, domain_radius)
        e = form.report(u.values).seminorm_sq
        energies.append(e)
        gaps.append(abs(e - loc) / loc)
    return SweepResult(s_vals, energies, loc, gaps)


def operator_limit_sweep(A: VectorPotential, u, x, s_list: Sequence[float], m: float,
                         q: QuadratureSpec | None = None) -> list[tuple[float, complex, float]]:
    """``(s, value, |value - target|)`` with target ``(-Delta_A + m^2) u(x)``."""
    x = np.asarray(x, dtype=float)
    target = apply_local_limit(m, A, u, x)
    out = []
    for s in _check_increasing(s_list):
        v = apply_regularized(FracParams(s, m), A, u, x, q).value
        out.append((s, v, float(abs(v - target))))
    return out
