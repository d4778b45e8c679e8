"""Ground states: minimize the magnetic norm on an ``L^p`` sphere or the
Choquard quotient.

Both objectives are scale invariant, so the iteration works on the quotient

    E(u) = ||u||^2 / N(u)^(2/p),   N(u) = int |u|^p        (power problem)
    G(u) = ||u||^2 / D(u)^(1/p),   D(u) = int (I_alpha * |u|^p) |u|^p

and renormalizes after each accepted step (exact projection).  Steps are
preconditioned gradient steps with Armijo backtracking; the preconditioner is
the discrete operator itself on radial grids (dense Cholesky) and the
Fourier symbol ``(|k|^2 + m^2)^s`` on Cartesian grids.

At a normalized critical point the gradient is ``2 (A u - lam f(u))``, so the
dual norm ``sqrt(<r, A^{-1} r>)`` of ``r = A u - lam f(u)`` bounds the weak
residual over every test field at once.  That is the reported ``residual``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.fft as sfft
import scipy.linalg as sla
from scipy.sparse.linalg import LinearOperator, cg

from .energy import (CapacityError, ChoquardParams, DegenerateInputError, PairQuadratureSpec,
                     discrete_form, riesz_potential)
from .field import (CartesianGrid, LinearPotential, RadialGrid, RadialPotential, SampledField,
                    VectorPotential, ZeroPotential, gauge_translate, isometry_check,
                    shift_potential)
from .kernel import FracParams
from .specfun import DomainError

__all__ = [
    "NonConvergenceError",
    "MinimizeConfig",
    "GroundState",
    "minimize_power",
    "minimize_choquard",
    "gauge_translate_state",
    "power_energy",
]


class NonConvergenceError(RuntimeError):
    """Iteration budget exhausted; ``trace`` and ``state`` hold the last iterate."""

    def __init__(self, msg: str, trace: list[float], state: "GroundState | None" = None):
        super().__init__(msg)
        self.trace = trace
        self.state = state


@dataclass(frozen=True)
class MinimizeConfig:
    """Solver settings.

    Parameters
    ----------
    grid : CartesianGrid or RadialGrid
    p_exp : float
        Power nonlinearity exponent, in ``(2, 6/(3-2s))``; ignored by the
        Choquard problem.
    max_iters : int
    step0 : float
        Initial Armijo step (in units of the preconditioned gradient).
    tol_energy : float
        Stop when the relative decrease of the objective falls below this.
    tol_residual : float
        Stop when the dual-norm Euler-Lagrange residual falls below this.
    seed : int
        Jitters the width of the Gaussian start.
    constraint : float
        Target ``||u||_p^p`` for the power problem.
    allow_critical : bool
        Admit ``p_exp`` equal to the critical exponent ``6/(3-2s)``.  The
        continuum minimum is then not attained and discrete minimizers
        concentrate at the grid scale; the option exists for experiments only.
    """

    grid: CartesianGrid | RadialGrid
    p_exp: float = 2.5
    max_iters: int = 500
    step0: float = 1.0
    tol_energy: float = 0.0
    tol_residual: float = 1e-8
    seed: int = 0
    constraint: float = 1.0
    init_width: float = 1.0
    allow_critical: bool = False
    pairq: PairQuadratureSpec = field(default_factory=PairQuadratureSpec)

    def __post_init__(self):
        if self.max_iters < 1:
            raise DomainError("max_iters must be positive")
        if not self.step0 > 0 or not self.constraint > 0 or not self.init_width > 0:
            raise DomainError("step0, constraint and init_width must be positive")


@dataclass
class GroundState:
    u: SampledField
    energy: float
    multiplier: float
    residual: float
    iters: int
    trace: list[float]
    problem: str
    params: FracParams
    potential: VectorPotential
    p_exp: float
    choquard: ChoquardParams | None = None
    pairq: PairQuadratureSpec = field(default_factory=PairQuadratureSpec)
    converged: bool = True

    def summary(self) -> dict:
        return dict(problem=self.problem, energy=self.energy, multiplier=self.multiplier,
                    residual=self.residual, iters=self.iters, converged=self.converged)


# ---------------------------------------------------------------------------
# helpers


def _weights(grid):
    return grid.weights if isinstance(grid, RadialGrid) else grid.cell_volume


def _inner(grid, a, b) -> float:
    return float(np.real(np.sum(_weights(grid) * np.conj(a) * b)))


def _pow(u: np.ndarray, q: float) -> np.ndarray:
    """``|u|^(q-2) u`` with the value 0 at ``u = 0``."""
    a = np.abs(u)
    safe = np.where(a > 0, a, 1.0)
    return np.where(a > 0, safe ** (q - 2.0) * u, 0.0)


def _initial(cfg: MinimizeConfig) -> np.ndarray:
    rng = np.random.default_rng(cfg.seed)
    w = cfg.init_width * (1.0 + 0.1 * rng.uniform(-1.0, 1.0))
    X = cfg.grid.points()
    return np.exp(-np.sum(X * X, axis=-1) / (2.0 * w * w)).astype(complex)


class _Preconditioner:
    """Approximate inverse of the discrete operator (exact on radial grids)."""

    def __init__(self, form, p: FracParams, A: VectorPotential):
        self.form = form
        g = form.grid
        self.exact = isinstance(g, RadialGrid)
        if self.exact:
            H = g.weights[:, None] * form.operator_matrix()
            H = 0.5 * (H + H.conj().T)
            self._cho = sla.cho_factor(H)
            return
        n, h = g.n, g.h
        self._shape = tuple(sfft.next_fast_len(2 * n) for _ in range(3))
        ks = [2.0 * np.pi * sfft.fftfreq(L, d=h) for L in self._shape]
        K2 = sum(np.meshgrid(*[k * k for k in ks], indexing="ij"))
        self._inv = (K2 + p.m ** 2) ** (-p.s)
        phi = A.gauge_potential(g.points())
        self._phase = None if phi is None else np.exp(1j * phi)

    def __call__(self, r: np.ndarray) -> np.ndarray:
        if self.exact:
            return sla.cho_solve(self._cho, self.form.grid.weights * r)
        n = self.form.grid.n
        if self._phase is not None:
            r = np.conj(self._phase) * r
        pad = np.zeros(self._shape, dtype=complex)
        pad[:n, :n, :n] = r
        out = sfft.ifftn(sfft.fftn(pad) * self._inv)[:n, :n, :n]
        if self._phase is not None:
            out = self._phase * out
        return out

    def dual_norm(self, r: np.ndarray) -> float:
        """``sqrt(<r, A^{-1} r>)`` with the exact operator."""
        if self.exact:
            return math.sqrt(max(_inner(self.form.grid, r, self(r)), 0.0))
        shape = r.shape
        N = r.size
        op = LinearOperator((N, N), matvec=lambda v: self.form.apply(v.reshape(shape)).ravel(),
                            dtype=complex)
        M = LinearOperator((N, N), matvec=lambda v: self(v.reshape(shape)).ravel(), dtype=complex)
        x, _ = cg(op, r.ravel(), M=M, rtol=1e-10, atol=0.0, maxiter=500)
        return math.sqrt(max(_inner(self.form.grid, r, x.reshape(shape)), 0.0))


def _descend(value: Callable, value_grad: Callable, project: Callable, pre: _Preconditioner,
             u: np.ndarray, cfg: MinimizeConfig, grid, memory: int = 8):
    """Armijo-backtracked descent on a scale-invariant objective.

    Directions come from limited-memory BFGS with the preconditioner as the
    initial inverse Hessian; a non-descent direction falls back to the plain
    preconditioned gradient.  ``value_grad`` returns ``(E, g, r)`` with ``r``
    the Euler-Lagrange residual of the normalized iterate.  Returns
    ``(u, E, trace, iters, res, ok)``.
    """
    u = project(u)
    E, g, r = value_grad(u)
    trace = [E]
    pg = pre(g)
    S, Y = [], []
    res = float("inf")
    for it in range(1, cfg.max_iters + 1):
        # normalized iterate: g = 2 r, so this is the (preconditioned) dual norm of r
        res = 0.5 * math.sqrt(max(_inner(grid, g, pg), 0.0))
        if res < cfg.tol_residual:
            return u, E, trace, it - 1, res, True
        d = -_two_loop(g, pg, pre, S, Y, grid)
        slope = _inner(grid, g, d)
        if not slope < 0.0:
            S, Y = [], []
            d = -pg
            slope = _inner(grid, g, d)
        t = cfg.step0
        accepted = False
        while t > 1e-12 * cfg.step0:
            trial = project(u + t * d)
            Et = value(trial)
            if Et <= E + 1e-4 * t * slope:
                accepted = True
                break
            t *= 0.5
        if not accepted:
            # no decrease representable in floating point
            return u, E, trace, it - 1, res, res < 1e3 * cfg.tol_residual
        rel = (E - Et) / abs(E)
        E, g_new, r = value_grad(trial)
        pg_new = pre(g_new)
        sv = trial - u
        yv = g_new - g
        if _inner(grid, sv, yv) > 1e-14 * math.sqrt(_inner(grid, sv, sv) * _inner(grid, yv, yv)):
            S.append(sv)
            Y.append(yv)
            if len(S) > memory:
                S.pop(0)
                Y.pop(0)
        u, g, pg = trial, g_new, pg_new
        trace.append(E)
        if rel < cfg.tol_energy:
            res = 0.5 * math.sqrt(max(_inner(grid, g, pg), 0.0))
            return u, E, trace, it, res, True
    res = 0.5 * math.sqrt(max(_inner(grid, g, pg), 0.0))
    return u, E, trace, cfg.max_iters, res, res < cfg.tol_residual


def _two_loop(g, pg, pre, S, Y, grid):
    """L-BFGS inverse-Hessian product with ``pre`` as the base operator."""
    if not S:
        return pg
    q = g.copy()
    alphas = []
    for sv, yv in zip(reversed(S), reversed(Y)):
        rho = 1.0 / _inner(grid, yv, sv)
        a = rho * _inner(grid, sv, q)
        alphas.append((a, rho))
        q = q - a * yv
    sv, yv = S[-1], Y[-1]
    gamma = _inner(grid, sv, yv) / _inner(grid, yv, pre(yv))
    z = gamma * pre(q)
    for (sv, yv), (a, rho) in zip(zip(S, Y), reversed(alphas)):
        b = rho * _inner(grid, yv, z)
        z = z + (a - b) * sv
    return z


def _check_potential(A: VectorPotential, grid) -> None:
    if not isinstance(A, (ZeroPotential, LinearPotential, RadialPotential)):
        raise DomainError("solver potential must be Zero, LinearMatrix or RadialProfile")
    if isinstance(grid, RadialGrid):
        rng = np.random.default_rng(12345)
        rots = [np.linalg.qr(rng.standard_normal((3, 3)))[0] for _ in range(3)]
        pairs = [(rng.standard_normal(3), rng.standard_normal(3)) for _ in range(4)]
        ok, dev = isometry_check(A, rots, pairs, tol=1e-10)
        if not ok:
            raise DomainError(f"radial grid needs an equivariant potential (deviation {dev:.3g})")


def _finish(grid, u, E, trace, iters, res, ok, pre, resid_fn, **kw) -> GroundState:
    res = pre.dual_norm(resid_fn(u))
    gs = GroundState(SampledField(grid, u), E, kw.pop("multiplier"), res, iters, trace,
                     converged=ok, **kw)
    if not ok:
        raise NonConvergenceError(f"no convergence in {iters} iterations (residual {res:.3g})",
                                  trace, gs)
    return gs


# ---------------------------------------------------------------------------
# power problem


def power_energy(p: FracParams, A: VectorPotential, u: SampledField, p_exp: float,
                 pairq: PairQuadratureSpec | None = None) -> float:
    """``||u||^2 / N(u)^(2/p)`` (the quotient minimized by :func:`minimize_power`)."""
    form = discrete_form(p, A, u.grid, pairq)
    N = _inner(u.grid, np.ones_like(u.values), np.abs(u.values) ** p_exp)
    if not N > 0:
        raise DegenerateInputError("field vanishes")
    return form.report(u.values).norm_sq / N ** (2.0 / p_exp)


def minimize_power(p: FracParams, A: VectorPotential, cfg: MinimizeConfig) -> GroundState:
    """Minimize ``||u||^2_{A,s}`` subject to ``||u||_p^p = cfg.constraint``.

    Returns the minimizer on the constraint set; ``energy`` is the minimum
    and ``multiplier`` the Lagrange multiplier ``lam`` in ``A u = lam |u|^(p-2) u``.

    Raises
    ------
    DomainError
        Exponent outside ``(2, 6/(3-2s))`` or unsupported potential.
    NonConvergenceError
        ``max_iters`` exhausted.
    """
    q = float(cfg.p_exp)
    crit = p.crit_exp
    at_crit = cfg.allow_critical and abs(q - crit) <= 1e-12 * crit
    if not (2.0 < q < crit or at_crit):
        raise DomainError(f"p_exp={q} outside the admissible range (2, {crit:.6g})")
    if p.m <= 0.0:
        raise DomainError("solver requires m > 0")
    grid = cfg.grid
    _check_potential(A, grid)
    form = discrete_form(p, A, grid, cfg.pairq)
    pre = _Preconditioner(form, p, A)
    wsum = _weights(grid)

    def nrm(u):
        return float(np.sum(wsum * np.abs(u) ** q))

    def project(u):
        N = nrm(u)
        if not N > 0:
            raise DegenerateInputError("iterate vanished")
        return u / N ** (1.0 / q)

    def value(u):
        return _inner(grid, u, form.apply(u)) / nrm(u) ** (2.0 / q)

    def value_grad(u):
        Au = form.apply(u)
        Q = _inner(grid, u, Au)
        N = nrm(u)
        E = Q / N ** (2.0 / q)
        f = _pow(u, q)
        r = Au - (Q / N) * f
        g = 2.0 * (Au - E * N ** (2.0 / q - 1.0) * f) / N ** (2.0 / q)
        return E, g, r

    def resid(u):
        return value_grad(u)[2]

    u, E, trace, iters, res, ok = _descend(value, value_grad, project, pre, _initial(cfg), cfg, grid)
    # rescale to the requested constraint: exact homogeneity of both sides
    c = cfg.constraint
    uc = c ** (1.0 / q) * u
    Q = _inner(grid, uc, form.apply(uc))
    lam = Q / nrm(uc)
    return _finish(grid, uc, Q, trace, iters, res, ok, pre, lambda v: resid(v),
                   multiplier=lam, problem="power", params=p, potential=A, p_exp=q,
                   choquard=None, pairq=cfg.pairq)


# ---------------------------------------------------------------------------
# Choquard problem


def minimize_choquard(p: FracParams, A: VectorPotential, cp: ChoquardParams,
                      cfg: MinimizeConfig) -> GroundState:
    """Minimize ``G(u) = ||u||^2_{A,s} / D(u)^(1/p)``; the result has ``D(u) = 1``.

    ``energy`` is the minimum of ``G`` and ``multiplier`` the ``lam`` in
    ``A u = lam (I_alpha * |u|^p) |u|^(p-2) u``.
    """
    cp.check(p.s)
    if p.m <= 0.0:
        raise DomainError("solver requires m > 0")
    grid = cfg.grid
    _check_potential(A, grid)
    form = discrete_form(p, A, grid, cfg.pairq)
    pre = _Preconditioner(form, p, A)
    q = cp.p
    wsum = _weights(grid)

    def dval(u):
        rho = np.abs(u) ** q
        pot = riesz_potential(cp, grid, rho)
        return float(np.sum(wsum * pot * rho)), pot

    def project(u):
        D, _ = dval(u)
        if not D > 0:
            raise DegenerateInputError("D(u) = 0")
        return u / D ** (1.0 / (2.0 * q))

    def value(u):
        D, _ = dval(u)
        return _inner(grid, u, form.apply(u)) / D ** (1.0 / q)

    def value_grad(u):
        Au = form.apply(u)
        Q = _inner(grid, u, Au)
        D, pot = dval(u)
        G = Q / D ** (1.0 / q)
        f = pot * _pow(u, q)
        r = Au - (Q / D) * f
        g = 2.0 * r / D ** (1.0 / q)
        return G, g, r

    u, G, trace, iters, res, ok = _descend(value, value_grad, project, pre, _initial(cfg), cfg, grid)
    Q = _inner(grid, u, form.apply(u))
    D, _ = dval(u)
    return _finish(grid, u, G, trace, iters, res, ok, pre, lambda v: value_grad(v)[2],
                   multiplier=Q / D, problem="choquard", params=p, potential=A, p_exp=q,
                   choquard=cp, pairq=cfg.pairq)


# ---------------------------------------------------------------------------
# gauge translation of states


def gauge_translate_state(gs: GroundState, xi, eta, max_loss: float = 1e-4) -> GroundState:
    """``v(x) = e^{i eta.x} u(x + xi)`` with its energy under ``A(. + xi) + eta``.

    For linear ``A`` and ``eta = -M xi`` the shifted potential is ``A`` again,
    so the energy is preserved up to interpolation error (exactly for
    on-lattice shifts once the part of ``u`` moved off the grid vanishes).

    Raises
    ------
    CapacityError
        The shift moves more than a fraction ``max_loss`` of the ``L^2`` mass
        off the grid.
    """
    g = gs.u.grid
    if not isinstance(g, CartesianGrid):
        raise DomainError("gauge translation needs a Cartesian state")
    xi = np.asarray(xi, dtype=float)
    eta = np.asarray(eta, dtype=float)
    if np.any(np.abs(xi) >= g.half_width):
        raise CapacityError("shift exits the grid")
    # mass of u on nodes y whose preimage y - xi lies outside the box
    Y = g.points()
    lost = np.any(np.abs(Y - xi) > g.half_width * (1.0 + 1e-12), axis=-1)
    w = np.abs(gs.u.values) ** 2
    if np.sum(w[lost]) > max_loss * np.sum(w):
        raise CapacityError("shift moves the state off the grid")
    v = gauge_translate(gs.u, xi, eta)
    A2 = shift_potential(gs.potential, xi, eta)
    form = discrete_form(gs.params, A2, g, gs.pairq)
    Q = form.report(v.values).norm_sq
    return GroundState(v, Q, gs.multiplier, gs.residual, gs.iters, list(gs.trace), gs.problem,
                       gs.params, A2, gs.p_exp, gs.choquard, gs.pairq, gs.converged)
