"""Discrete quadratic forms and nonlinear energies.

Cartesian fields are extended by zero to the infinite lattice ``h Z^3``.
For such fields the ordered pair sum

    Q(u) = h^6 sum_{x != y} w(x - y) |e^{-i(x-y).A((x+y)/2)} u(x) - u(y)|^2

equals ``h^6 [2 W |u|^2 - 2 <u, P u>]`` where ``W`` is the full lattice sum of
``w`` and ``P`` only couples nodes inside the box.  Pairs with one end
outside therefore cost nothing beyond the scalar ``W``.  ``P`` is a
convolution (FFT) when ``A`` is a pure gauge (zero or affine with symmetric
matrix) and a chunked dense sum otherwise.

Near the diagonal the lattice under-samples the singular kernel.  For smooth
``u`` the pair integrand is ``|grad_A u(x) . z|^2 w(z)`` to leading order, so
the missing part is ``|grad_A u(x)|^2 / 3`` times the difference between the
continuum and lattice second moments of ``chi w`` with a Gaussian cutoff
``chi`` of width ``2h``.  Summed over ``x``, ``int |grad_A u|^2`` is applied as
``<u, -Delta_A u>`` with a high-order covariant second difference (neighbour
values transported with the midpoint phase).  That keeps the corrected form
exactly gauge covariant on the lattice, and unlike a squared first difference
its symbol stays positive at the Nyquist frequency, so coarse grids do not
admit spurious grid-scale minimizers.

Radial fields use the same construction in one dimension: the angular
integrals reduce the pair kernel to ``8 pi^2 (Phi(|r - r'|) - Phi(r + r'))/(r r')``
with ``Phi`` the closed-form shell antiderivative of ``w``.
"""
from __future__ import annotations

import math
from collections import OrderedDict
from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np
import scipy.fft as sfft
import scipy.sparse as sp

from .field import (CartesianGrid, RadialGrid, RadialPotential, SampledField,
                    VectorPotential, ZeroPotential)
from .kernel import (FracParams, density_prefactor, kernel_second_moment, raw_kernel,
                     shell_antiderivative)
from .quadrature import gauss_legendre, integrate_power_weighted
from .specfun import DomainError, gamma

__all__ = [
    "CapacityError",
    "DegenerateInputError",
    "PairQuadratureSpec",
    "EnergyReport",
    "ChoquardParams",
    "riesz_constant",
    "CartesianForm",
    "RadialForm",
    "discrete_form",
    "seminorm_sq",
    "norm_sq",
    "inner_product",
    "weak_residual",
    "diamagnetic_gap",
    "pair_diamagnetic_check",
    "riesz_convolution",
    "riesz_potential",
    "choquard_energy",
    "choquard_quotient",
    "local_energy",
]


class CapacityError(ValueError):
    """Grid exceeds the pair-sum budget."""


class DegenerateInputError(ValueError):
    """Input makes the requested quantity undefined (e.g. zero field)."""


@dataclass(frozen=True)
class PairQuadratureSpec:
    """Controls for discrete pair sums.

    Parameters
    ----------
    sigma_factor : float
        Width of the near-diagonal Gaussian cutoff in grid spacings.
    correction : bool
        Apply the near-diagonal second-moment correction.
    max_nodes : int
        Capacity limit on the number of Cartesian nodes.
    lattice_radius : float, optional
        Radius of the full-lattice kernel sum; default ``45/m``.
    dense_budget : int
        Node count up to which the magnetic pair matrix is cached densely.
    chunk : int
        Row block for on-the-fly magnetic pair sums.
    n_phase : int
        Gauss nodes for the radial phase-averaged kernel.
    stencil_half_width : int
        Half width ``q`` of the order-``2q`` covariant difference stencils used
        by the near-diagonal correction.  Low orders lose several percent of
        ``|grad u|^2`` on coarse grids.
    """

    sigma_factor: float = 2.0
    correction: bool = True
    max_nodes: int = 33 ** 3
    lattice_radius: float | None = None
    dense_budget: int = 3600
    chunk: int = 256
    n_phase: int = 48
    stencil_half_width: int = 8


@dataclass(frozen=True)
class EnergyReport:
    """Discrete energies of one field.

    ``quad_err`` is the size of the near-diagonal correction, a conservative
    bound on the error of the uncorrected pair sum; the corrected value is
    far more accurate.  ``seminorm_sq_raw`` is the bare pair sum without the
    density prefactor.
    """

    seminorm_sq: float
    mass_sq: float
    norm_sq: float
    quad_err: float
    seminorm_sq_raw: float

    def as_dict(self) -> dict:
        return dict(seminorm_sq=self.seminorm_sq, mass_sq=self.mass_sq, norm_sq=self.norm_sq,
                    quad_err=self.quad_err, seminorm_sq_raw=self.seminorm_sq_raw)


@dataclass(frozen=True)
class ChoquardParams:
    """Choquard nonlinearity ``(I_alpha * |u|^p) |u|^(p-2) u``.

    ``riesz_constant_mode`` has no default on purpose: ``"as_written"`` uses
    ``pi^(3/2) 2^alpha Gamma(alpha/2) / Gamma((3-alpha)/2)``, ``"standard"``
    its reciprocal (the usual Riesz normalization).
    """

    alpha: float
    p: float
    riesz_constant_mode: str

    def __post_init__(self):
        if not 0.0 < self.alpha < 3.0:
            raise DomainError("alpha must lie in (0, 3)")
        if self.riesz_constant_mode not in ("as_written", "standard"):
            raise DomainError("riesz_constant_mode must be 'as_written' or 'standard'")

    def admissible_range(self, s: float) -> tuple[float, float]:
        return 1.0 + self.alpha / 3.0, (3.0 + self.alpha) / (3.0 - 2.0 * s)

    def check(self, s: float) -> None:
        lo, hi = self.admissible_range(s)
        if not lo < self.p < hi:
            raise DomainError(f"Choquard exponent p={self.p} outside ({lo:.6g}, {hi:.6g})")


def riesz_constant(alpha: float, mode: str) -> float:
    """Riesz potential constant in the requested normalization."""
    if not 0.0 < alpha < 3.0:
        raise DomainError("alpha must lie in (0, 3)")
    c = math.pi ** 1.5 * 2.0 ** alpha * gamma(alpha / 2.0) / gamma((3.0 - alpha) / 2.0)
    if mode == "as_written":
        return c
    if mode == "standard":
        return 1.0 / c
    raise DomainError("riesz_constant_mode must be 'as_written' or 'standard'")


# ---------------------------------------------------------------------------
# lattice helpers


def _sphere_counts(K: int) -> np.ndarray:
    """``c[n] = #{k in Z^3 : |k|^2 = n}`` for ``n <= K^2`` (restricted to the cube)."""
    K2 = K * K
    r1 = np.zeros(K2 + 1)
    i = np.arange(-K, K + 1)
    np.add.at(r1, i * i, 1.0)
    r2 = sfft.irfft(sfft.rfft(r1, 4 * K2 + 4) ** 2, 4 * K2 + 4)[: 2 * K2 + 1]
    r3 = sfft.irfft(sfft.rfft(r2, 4 * K2 + 4) * sfft.rfft(r1, 4 * K2 + 4), 4 * K2 + 4)[: K2 + 1]
    return np.rint(r3)


def _lattice_moments(p: FracParams, h: float, radius: float, sigma: float):
    """Full-lattice sum of ``w`` and the cutoff second moment ``h^3 sum |z|^2 chi w``."""
    K = int(math.ceil(radius / h))
    c = _sphere_counts(K)
    n = np.nonzero(c)[0]
    n = n[n > 0]
    r = h * np.sqrt(n)
    w = raw_kernel(p, r)
    W = float(np.sum(c[n] * w))
    if p.m == 0.0:
        # continuum tail beyond the sampled ball
        W += 4.0 * math.pi * radius ** (-2.0 * p.s) / (2.0 * p.s) / h ** 3
    chi = np.exp(-r * r / (2.0 * sigma * sigma))
    M2 = h ** 3 * float(np.sum(c[n] * r * r * chi * w))
    return W, M2


def _continuum_moment(p: FracParams, sigma: float) -> float:
    """``int_{R^3} |z|^2 chi(z) w(z) dz`` with ``chi = exp(-|z|^2/(2 sigma^2))``."""
    if p.m == 0.0:
        return 4.0 * math.pi * 0.5 * (2.0 * sigma * sigma) ** (1.0 - p.s) * gamma(1.0 - p.s)
    return 4.0 * math.pi * kernel_second_moment(p, weight=lambda r: np.exp(-r * r / (2.0 * sigma * sigma)))


def _continuum_moment_1d(p: FracParams, sigma: float) -> float:
    """``int_R d^2 Phi(|d|) chi(d) dd`` for the radial reduction."""
    if p.m == 0.0:
        # Phi = d^(-1-2s)/(1+2s)
        return 2.0 / (1.0 + 2.0 * p.s) * 0.5 * (2.0 * sigma * sigma) ** (1.0 - p.s) * gamma(1.0 - p.s)

    lim = 2.0 ** (p.nu - 2.0) * gamma(p.nu - 1.0) / p.m ** (p.nu - 1.0) / p.m

    def g(d):
        # d^(1+2s) Phi(d) chi(d) is finite at 0
        d = np.asarray(d, dtype=float)
        out = np.full(d.shape, lim)
        ok = p.m * d > 1e-30
        dd = d[ok]
        out[ok] = dd ** (1.0 + 2.0 * p.s) * shell_antiderivative(p, dd)
        return out * np.exp(-d * d / (2.0 * sigma * sigma))

    val, _ = integrate_power_weighted(g, 1.0 - 2.0 * p.s, scale=sigma)
    return 2.0 * val


@lru_cache(maxsize=None)
def _central_weights(q: int) -> dict[int, float]:
    """Order-``2q`` central first-difference weights (offset -> weight)."""
    f = math.factorial
    c = {}
    for j in range(1, q + 1):
        cj = (-1) ** (j + 1) * f(q) ** 2 / (j * f(q - j) * f(q + j))
        c[j] = cj
        c[-j] = -cj
    return c


@lru_cache(maxsize=None)
def _second_weights(q: int) -> tuple[float, ...]:
    """``c_j`` with ``-u'' ~ sum_j c_j (2u - u(+j) - u(-j)) / h^2`` at order ``2q``.

    The symbol ``sum_j c_j (2 - 2 cos(j k h))`` matches ``(k h)^2`` to order
    ``2q`` and stays positive up to the Nyquist frequency.
    """
    f = math.factorial
    return tuple(2.0 * (-1) ** (j + 1) * f(q) ** 2 / (j * j * f(q - j) * f(q + j))
                 for j in range(1, q + 1))


# ---------------------------------------------------------------------------
# Cartesian form


class CartesianForm:
    """Discrete pseudorelativistic magnetic form on a Cartesian grid.

    Parameters
    ----------
    p : FracParams
    A : VectorPotential
    grid : CartesianGrid
    pairq : PairQuadratureSpec
    domain_radius : float, optional
        Restrict pairs to the ball ``|x| < domain_radius`` (bounded-domain
        variant).  Pair sums and the mass term see ``u`` inside the ball
        only; the near-diagonal model uses ``|grad_A u|^2`` of the unrestricted
        field at interior nodes.  This variant is for ``s -> 1`` sweeps and is
        not used by the solver.
    """

    def __init__(self, p: FracParams, A: VectorPotential, grid: CartesianGrid,
                 pairq: PairQuadratureSpec | None = None, domain_radius: float | None = None):
        pairq = pairq or PairQuadratureSpec()
        n = grid.n
        if n ** 3 > pairq.max_nodes:
            raise CapacityError(f"{n}^3 nodes exceed the pair-sum budget of {pairq.max_nodes}")
        self.p, self.A, self.grid, self.pairq = p, A, grid, pairq
        h = grid.h
        self.h = h
        self.pref = density_prefactor(p)
        self.mass = p.m ** (2.0 * p.s)
        sigma = pairq.sigma_factor * h
        radius = pairq.lattice_radius or (45.0 / p.m if p.m > 0 else 60.0)
        radius = max(radius, 10.0 * sigma, 2.0 * n * h)
        W, M2 = _lattice_moments(p, h, radius, sigma)
        self.W = W
        self.kappa = (_continuum_moment(p, sigma) - M2) if pairq.correction else 0.0

        # kernel on box offsets
        k = np.arange(-(n - 1), n)
        I, J, K = np.meshgrid(k, k, k, indexing="ij")
        r2 = (I * I + J * J + K * K).astype(float)
        wk = np.zeros_like(r2)
        nz = r2 > 0
        wk[nz] = raw_kernel(p, h * np.sqrt(r2[nz]))
        self._wk = wk
        self._fft_shape = tuple(sfft.next_fast_len(2 * n - 1) for _ in range(3))
        # place offsets so that circular convolution realizes the linear one
        ker = np.zeros(self._fft_shape)
        idx = np.arange(-(n - 1), n) % self._fft_shape[0]
        ker[np.ix_(idx, idx, idx)] = wk
        self._wk_hat = sfft.fftn(ker)

        X = grid.points()
        self._X = X
        self.mask = None
        self.W_field = None
        if domain_radius is not None:
            self.mask = (np.sum(X * X, axis=-1) < domain_radius ** 2).astype(float)
            self.W_field = self._conv(self.mask.astype(complex)).real

        self._phi = A.gauge_potential(X) if hasattr(A, "gauge_potential") else None
        self._dense = None
        self._L = self._G = None
        if self.kappa and self.mask is None:
            self._L = self._covariant_laplacian_matrix()
        elif self.kappa:
            # bounded domain: local model |grad_A u(x)|^2 for x inside, from the
            # unrestricted field
            self._G = self._covariant_gradient_matrix()
            self._Gmask = np.tile(self.mask.reshape(-1), 3)

    # -- plumbing
    def _pad(self, u):
        out = np.zeros(self._fft_shape, dtype=complex)
        n = self.grid.n
        out[:n, :n, :n] = u
        return out

    def _conv(self, u):
        n = self.grid.n
        return sfft.ifftn(sfft.fftn(self._pad(u)) * self._wk_hat)[:n, :n, :n]

    def _pair_apply(self, u):
        """``(P u)(y) = sum_{x != y} w(x - y) e^{-i (x-y).A((x+y)/2)} u(x)``."""
        if self._phi is not None:
            ph = np.exp(1j * self._phi)
            return ph * self._conv(np.conj(ph) * u)
        n3 = self.grid.n ** 3
        if self._dense is None and n3 <= self.pairq.dense_budget:
            self._dense = self._dense_pair_matrix()
        uf = u.reshape(-1)
        if self._dense is not None:
            return (self._dense @ uf).reshape(u.shape)
        out = np.empty(n3, dtype=complex)
        for lo in range(0, n3, self.pairq.chunk):
            blk = self._pair_block(lo, min(n3, lo + self.pairq.chunk))
            out[lo:lo + blk.shape[0]] = blk @ uf
        return out.reshape(u.shape)

    def _pair_block(self, lo, hi):
        n = self.grid.n
        Xf = self._X.reshape(-1, 3)
        ind = np.indices(self.grid.shape).reshape(3, -1).T
        y = Xf[lo:hi]
        d = Xf[None, :, :] - y[:, None, :]          # x - y
        mid = 0.5 * (Xf[None, :, :] + y[:, None, :])
        ang = np.sum(d * self.A.evaluate(mid), axis=-1)
        off = ind[None, :, :] - ind[lo:hi, None, :] + (n - 1)
        w = self._wk[off[..., 0], off[..., 1], off[..., 2]]
        return w * np.exp(-1j * ang)

    def _dense_pair_matrix(self):
        n3 = self.grid.n ** 3
        rows = [self._pair_block(lo, min(n3, lo + self.pairq.chunk))
                for lo in range(0, n3, self.pairq.chunk)]
        return np.concatenate(rows, axis=0)

    def _covariant_laplacian_matrix(self):
        """Sparse Hermitian ``-Delta_A`` of order ``2q`` (zero extension).

        Assembled from axis pairs ``(x, x + j h e_a)`` as
        ``sum c_j |T(x, y) u(y) - u(x)|^2 / h^2`` with the midpoint transport
        ``T``.
        """
        g = self.grid
        n, h = g.n, g.h
        N3 = n ** 3
        ind = np.arange(N3).reshape(g.shape)
        X = self._X
        diag = np.zeros(N3)
        rows, cols, vals = [], [], []
        for a in range(3):
            for j, c in enumerate(_second_weights(self.pairq.stencil_half_width), start=1):
                cw = c / (h * h)
                lo = [slice(None)] * 3
                hi = [slice(None)] * 3
                lo[a] = slice(0, max(0, n - j))
                hi[a] = slice(j, n)
                x = ind[tuple(lo)].ravel()
                y = ind[tuple(hi)].ravel()
                # every node pairs with x - j e_a and x + j e_a (possibly outside)
                diag += 2.0 * cw
                if len(x) == 0:
                    continue
                step = np.zeros(3)
                step[a] = j * h
                mid = X.reshape(-1, 3)[x] + 0.5 * step
                ph = np.exp(-1j * (self.A.evaluate(mid) @ step))
                rows += [x, y]
                cols += [y, x]
                vals += [-cw * ph, -cw * np.conj(ph)]
        L = sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                          shape=(N3, N3)) + sp.diags(diag.astype(complex))
        return L.tocsr()

    def _covariant_gradient_matrix(self):
        """Sparse covariant central gradient, shape (3 n^3, n^3)."""
        g = self.grid
        n, h = g.n, g.h
        ind = np.arange(n ** 3).reshape(g.shape)
        X = self._X
        rows, cols, vals = [], [], []
        for a in range(3):
            for j, c in _central_weights(self.pairq.stencil_half_width).items():
                if abs(j) >= n:
                    continue
                src = [slice(None)] * 3
                dst = [slice(None)] * 3
                src[a] = slice(max(0, j), n + min(0, j))   # neighbour index
                dst[a] = slice(max(0, -j), n - max(0, j))  # base index
                base = ind[tuple(dst)].ravel()
                nb = ind[tuple(src)].ravel()
                xb = X[tuple(dst)].reshape(-1, 3)
                step = np.zeros(3)
                step[a] = j * h
                ph = np.exp(-1j * (self.A.evaluate(xb + 0.5 * step) @ step))
                rows.append(a * n ** 3 + base)
                cols.append(nb)
                vals.append(c / h * ph)
        G = sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                          shape=(3 * n ** 3, n ** 3))
        return G

    # -- public
    @property
    def weights(self):
        return self.grid.cell_volume

    def covariant_gradient(self, u: np.ndarray) -> np.ndarray:
        """Gauge-covariant gradient on the grid, shape (3, n, n, n)."""
        G = self._covariant_gradient_matrix()
        return (G @ u.reshape(-1)).reshape((3,) + u.shape)

    def _restrict(self, u):
        return u if self.mask is None else u * self.mask

    def apply_raw(self, u: np.ndarray) -> np.ndarray:
        """Hermitian operator with ``Q_raw(u) = Re sum conj(u) apply_raw(u)``."""
        u = np.asarray(u, dtype=complex)
        ur = self._restrict(u)
        Wf = self.W if self.W_field is None else self.W_field
        out = self._restrict(self.h ** 6 * (2.0 * Wf * ur - 2.0 * self._pair_apply(ur)))
        c = self.h ** 3 * self.kappa / 3.0
        if self._L is not None:
            out = out + c * (self._L @ u.reshape(-1)).reshape(u.shape)
        elif self._G is not None:
            gu = self._Gmask * (self._G @ u.reshape(-1))
            out = out + c * (self._G.conj().T @ gu).reshape(u.shape)
        return out

    def correction_raw(self, u: np.ndarray) -> float:
        u = np.asarray(u, dtype=complex).reshape(-1)
        c = self.h ** 3 * self.kappa / 3.0
        if self._L is not None:
            return float(c * np.real(np.vdot(u, self._L @ u)))
        if self._G is not None:
            return float(c * np.sum(self._Gmask * np.abs(self._G @ u) ** 2))
        return 0.0

    def quad_raw(self, u: np.ndarray) -> float:
        u = np.asarray(u, dtype=complex)
        return float(np.real(np.vdot(u, self.apply_raw(u))))

    def apply(self, u: np.ndarray) -> np.ndarray:
        """``A u`` with ``norm_sq(u) = Re <u, A u>_w``."""
        u = np.asarray(u, dtype=complex)
        return 0.5 * self.pref * self.apply_raw(u) / self.weights + self.mass * self._restrict(u)

    def l2_sq(self, u) -> float:
        return float(self.weights * np.sum(np.abs(self._restrict(u)) ** 2))

    def inner(self, a, b) -> float:
        """Weighted real inner product ``Re <a, b>_w``."""
        return float(np.real(np.sum(self.weights * np.conj(a) * b)))

    def report(self, u: np.ndarray) -> EnergyReport:
        raw = max(self.quad_raw(u), 0.0)
        semi = 0.5 * self.pref * raw
        mass = self.mass * self.l2_sq(u)
        corr = 0.5 * self.pref * self.correction_raw(u)
        return EnergyReport(semi, mass, semi + mass, abs(corr), raw)


# ---------------------------------------------------------------------------
# radial form


def _radial_d1(grid: RadialGrid, A: VectorPotential, q: int) -> sp.csr_matrix:
    """Covariant central radial derivative with even reflection at r = 0."""
    n, h = grid.n, grid.h
    r = grid.nodes
    a_prof = None if isinstance(A, ZeroPotential) else A.profile
    rows, cols, vals = [], [], []
    for i in range(n):
        for j, c in _central_weights(q).items():
            k = i + j
            t_i = r[i]
            t_k = r[i] + j * h
            if k >= n or -k - 1 >= n:
                continue
            col = k if k >= 0 else -k - 1
            if a_prof is None:
                ph = 1.0
            else:
                tm = 0.5 * (t_i + t_k)
                ph = np.exp(-1j * (t_k - t_i) * float(a_prof(np.array(abs(tm)))) * tm)
            rows.append(i)
            cols.append(col)
            vals.append(c / h * ph)
    return sp.csr_matrix((vals, (rows, cols)), shape=(n, n), dtype=complex)


class RadialForm:
    """Discrete form for radial fields and ``A`` zero or radially equivariant."""

    def __init__(self, p: FracParams, A: VectorPotential, grid: RadialGrid,
                 pairq: PairQuadratureSpec | None = None):
        if not isinstance(A, (ZeroPotential, RadialPotential)):
            raise DomainError("radial form needs A = Zero or RadialProfile")
        pairq = pairq or PairQuadratureSpec()
        self.p, self.A, self.grid, self.pairq = p, A, grid, pairq
        n, h = grid.n, grid.h
        self.h = h
        self.pref = density_prefactor(p)
        self.mass = p.m ** (2.0 * p.s)
        r = grid.nodes
        ext = (pairq.lattice_radius or (45.0 / p.m if p.m > 0 else 60.0))
        n_ext = n + int(math.ceil(ext / h))
        re = (np.arange(n_ext) + 0.5) * h
        I, J = np.meshgrid(r, re, indexing="ij")
        d = np.abs(I - J)
        diag = d < 0.5 * h
        d_safe = np.where(diag, h, d)
        G0 = 8.0 * math.pi ** 2 * (shell_antiderivative(p, d_safe)
                                   - shell_antiderivative(p, I + J)) / (I * J)
        c0 = np.where(diag, 0.0, h * h * I * I * J * J * G0)
        R = c0.sum(axis=1)
        if p.m == 0.0:
            # continuum tail of the row sums beyond the sampled exterior
            Rt = re[-1] + 0.5 * h
            R = R + 8.0 * math.pi ** 2 * h * r * r * Rt ** (-2.0 * p.s) / (2.0 * p.s) * 2.0
        self.row_sums = R
        cin = c0[:, :n]
        if isinstance(A, RadialPotential):
            cA = self._magnetic_pairs(r)
        else:
            cA = cin.astype(complex)
        # S_ji = cA_ij
        S = cA.T
        self.Q = 2.0 * np.diag(R).astype(complex) - 2.0 * S
        self.kappa = 0.0
        self.D = None
        if pairq.correction:
            sigma = pairq.sigma_factor * h
            kk = np.arange(1, int(math.ceil(12.0 * sigma / h)) + 1) * h
            lat = 2.0 * h * np.sum(kk * kk * shell_antiderivative(p, kk)
                                   * np.exp(-kk * kk / (2.0 * sigma * sigma)))
            self.kappa = _continuum_moment_1d(p, sigma) - lat
            self.D = _radial_d1(grid, A, pairq.stencil_half_width).toarray()
            cw = h * 8.0 * math.pi ** 2 * r * r * self.kappa
            self.Qc = self.D.conj().T @ (cw[:, None] * self.D)
            self.Q = self.Q + self.Qc
        self.Q = 0.5 * (self.Q + self.Q.conj().T)

    def _magnetic_pairs(self, r: np.ndarray) -> np.ndarray:
        """``h^2 r^2 r'^2`` times the phase-averaged angular kernel."""
        p, h = self.p, self.h
        n = len(r)
        xg, wg = gauss_legendre(self.pairq.n_phase)
        t = 0.5 * (xg + 1.0)
        wt = 0.5 * wg
        I, J = np.meshgrid(r, r, indexing="ij")
        off = ~np.eye(n, dtype=bool)
        ri, rj = I[off], J[off]
        dmin = np.abs(ri - rj)
        S = ri + rj
        # log-spaced nodes on [d, S]
        L = np.log(S / dmin)
        rho = dmin[:, None] * np.exp(L[:, None] * t[None, :])
        jac = rho * L[:, None] * wt[None, :]
        mid = np.sqrt(np.maximum(2 * ri[:, None] ** 2 + 2 * rj[:, None] ** 2 - rho * rho, 0.0)) / 2
        psi = self.A.profile(mid) * (ri[:, None] ** 2 - rj[:, None] ** 2) / 2.0
        integ = raw_kernel(p, rho) * rho * np.exp(-1j * psi)
        G = 8.0 * math.pi ** 2 * np.sum(integ * jac, axis=1) / (ri * rj)
        out = np.zeros((n, n), dtype=complex)
        out[off] = h * h * ri ** 2 * rj ** 2 * G
        return out

    @property
    def weights(self):
        return self.grid.weights

    def apply_raw(self, u):
        return self.Q @ np.asarray(u, dtype=complex)

    def quad_raw(self, u) -> float:
        u = np.asarray(u, dtype=complex)
        return float(np.real(np.vdot(u, self.Q @ u)))

    def correction_raw(self, u) -> float:
        if self.D is None:
            return 0.0
        u = np.asarray(u, dtype=complex)
        return float(np.real(np.vdot(u, self.Qc @ u)))

    def apply(self, u):
        u = np.asarray(u, dtype=complex)
        return 0.5 * self.pref * (self.Q @ u) / self.weights + self.mass * u

    def operator_matrix(self) -> np.ndarray:
        """Dense matrix of :meth:`apply`."""
        return 0.5 * self.pref * self.Q / self.weights[:, None] + self.mass * np.eye(self.grid.n)

    def l2_sq(self, u) -> float:
        return float(np.sum(self.weights * np.abs(u) ** 2))

    def inner(self, a, b) -> float:
        return float(np.real(np.sum(self.weights * np.conj(a) * b)))

    def covariant_gradient(self, u):
        return self.D @ np.asarray(u, dtype=complex)

    def report(self, u) -> EnergyReport:
        raw = max(self.quad_raw(u), 0.0)
        semi = 0.5 * self.pref * raw
        mass = self.mass * self.l2_sq(u)
        corr = 0.5 * self.pref * self.correction_raw(u)
        return EnergyReport(semi, mass, semi + mass, abs(corr), raw)


# ---------------------------------------------------------------------------
# cached construction and functional API

_FORM_CACHE: "OrderedDict[tuple, tuple]" = OrderedDict()
_CACHE_SIZE = 8


def discrete_form(p: FracParams, A: VectorPotential, grid, pairq: PairQuadratureSpec | None = None,
                  domain_radius: float | None = None):
    """Build (or fetch from a small cache) the discrete form for ``grid``."""
    pairq = pairq or PairQuadratureSpec()
    key = (p, id(A), grid, pairq, domain_radius)
    hit = _FORM_CACHE.get(key)
    if hit is not None and hit[0] is A:
        _FORM_CACHE.move_to_end(key)
        return hit[1]
    if isinstance(grid, CartesianGrid):
        form = CartesianForm(p, A, grid, pairq, domain_radius)
    elif isinstance(grid, RadialGrid):
        if domain_radius is not None:
            raise DomainError("bounded domains are only supported on Cartesian grids")
        form = RadialForm(p, A, grid, pairq)
    else:
        raise TypeError("unsupported grid")
    _FORM_CACHE[key] = (A, form)
    while len(_FORM_CACHE) > _CACHE_SIZE:
        _FORM_CACHE.popitem(last=False)
    return form


def seminorm_sq(p: FracParams, A: VectorPotential, u: SampledField,
                pairq: PairQuadratureSpec | None = None) -> EnergyReport:
    """Energy report (seminorm, mass term, full norm) of a sampled field."""
    return discrete_form(p, A, u.grid, pairq).report(u.values)


def norm_sq(p: FracParams, A: VectorPotential, u: SampledField,
            pairq: PairQuadratureSpec | None = None) -> float:
    return seminorm_sq(p, A, u, pairq).norm_sq


def inner_product(p: FracParams, A: VectorPotential, u: SampledField, v: SampledField,
                  pairq: PairQuadratureSpec | None = None) -> float:
    """Real inner product whose diagonal is ``norm_sq``."""
    if u.grid != v.grid:
        raise ValueError("fields live on different grids")
    form = discrete_form(p, A, u.grid, pairq)
    return form.inner(v.values, form.apply(u.values))


def _signed_pow(u: np.ndarray, q: float) -> np.ndarray:
    """``|u|^(q-2) u`` with the value 0 at ``u = 0`` (also for ``q < 2``)."""
    a = np.abs(u)
    return np.where(a > 0, np.where(a > 0, a, 1.0) ** (q - 2.0) * u, 0.0)


def _rhs(form, u: np.ndarray, rhs_kind) -> np.ndarray:
    kind, par = rhs_kind
    if kind == "power":
        return _signed_pow(u, par)
    if kind == "choquard":
        rho = np.abs(u) ** par.p
        return riesz_potential(par, form.grid, rho) * _signed_pow(u, par.p)
    raise DomainError(f"unknown rhs kind {kind!r}")


def weak_residual(p: FracParams, A: VectorPotential, u: SampledField, rhs_kind,
                  test_set: Sequence[SampledField], lam: float,
                  pairq: PairQuadratureSpec | None = None) -> float:
    """``max_v |a(u, v) - lam Re int f(u) conj(v)| / ||v||``.

    ``rhs_kind`` is ``("power", p_exp)`` or ``("choquard", ChoquardParams)``.
    """
    if not test_set:
        raise DomainError("empty test set")
    form = discrete_form(p, A, u.grid, pairq)
    Au = form.apply(u.values)
    f = _rhs(form, u.values, rhs_kind)
    worst = 0.0
    for v in test_set:
        if v.grid != u.grid:
            raise ValueError("test field on a different grid")
        nv = math.sqrt(max(form.inner(v.values, form.apply(v.values)), 0.0))
        if nv == 0.0:
            continue
        r = form.inner(v.values, Au) - lam * form.inner(v.values, f)
        worst = max(worst, abs(r) / nv)
    return worst


def diamagnetic_gap(p: FracParams, A: VectorPotential, u: SampledField,
                    pairq: PairQuadratureSpec | None = None) -> float:
    """``||u||_{A,s}^2 - || |u| ||_{0,s}^2`` (nonnegative up to rounding)."""
    mag = discrete_form(p, A, u.grid, pairq).report(u.values).norm_sq
    zero = discrete_form(p, ZeroPotential(), u.grid, pairq).report(np.abs(u.values)).norm_sq
    return mag - zero



def pair_diamagnetic_check(A: VectorPotential, u, x, y) -> tuple[float, float]:
    """Return ``(||u(x)|-|u(y)||, |e^{-i(x-y).A((x+y)/2)} u(x) - u(y)|)``."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    ux = u.value(x) if hasattr(u, "value") else u.evaluate(x)
    uy = u.value(y) if hasattr(u, "value") else u.evaluate(y)
    ph = np.exp(-1j * np.sum((x - y) * A.evaluate(0.5 * (x + y)), axis=-1))
    return np.abs(np.abs(ux) - np.abs(uy)), np.abs(ph * ux - uy)


# ---------------------------------------------------------------------------
# Riesz potential and Choquard energy


def _self_cell(alpha: float, h: float) -> float:
    # integral of |z|^(alpha-3) over the ball with the cell's volume
    rb = (3.0 / (4.0 * math.pi)) ** (1.0 / 3.0) * h
    return 4.0 * math.pi * rb ** alpha / alpha


_RIESZ_CACHE: "OrderedDict[tuple, np.ndarray]" = OrderedDict()


def _riesz_kernel_hat(alpha: float, grid: CartesianGrid):
    key = (alpha, grid)
    hit = _RIESZ_CACHE.get(key)
    if hit is not None:
        return hit
    n, h = grid.n, grid.h
    shape = tuple(sfft.next_fast_len(2 * n - 1) for _ in range(3))
    k = np.arange(-(n - 1), n)
    I, J, K = np.meshgrid(k, k, k, indexing="ij")
    r = h * np.sqrt((I * I + J * J + K * K).astype(float))
    ker = np.where(r > 0, np.where(r > 0, r, 1.0) ** (alpha - 3.0), 0.0) * h ** 3
    ker[n - 1, n - 1, n - 1] = _self_cell(alpha, h)
    full = np.zeros(shape)
    idx = k % shape[0]
    full[np.ix_(idx, idx, idx)] = ker
    out = (shape, sfft.rfftn(full))
    _RIESZ_CACHE[key] = out
    while len(_RIESZ_CACHE) > 8:
        _RIESZ_CACHE.popitem(last=False)
    return out


def _radial_riesz_matrix(alpha: float, grid: RadialGrid) -> np.ndarray:
    """``K_ij`` with ``(I * rho)(r_i) = sum_j K_ij rho_j`` (constant excluded)."""
    r = grid.nodes
    h = grid.h
    I, J = np.meshgrid(r, r, indexing="ij")
    d = np.abs(I - J)
    diag = np.eye(len(r), dtype=bool)
    if abs(alpha - 1.0) < 1e-12:
        dd = np.where(diag, 1.0, d)
        near = np.where(diag, math.log(h / 2.0) - 1.0, np.log(dd))
        ang = 8.0 * math.pi ** 2 * (np.log(I + J) - near) / (I * J)
    else:
        dd = np.where(diag, 1.0, d)
        near = np.where(diag, (h / 2.0) ** (alpha - 1.0) / alpha, dd ** (alpha - 1.0))
        ang = 8.0 * math.pi ** 2 * ((I + J) ** (alpha - 1.0) - near) / ((alpha - 1.0) * I * J)
    # measure r'^2 dr' and the 1/(4 pi) that turns the double angular integral
    # into an average over the first sphere
    return ang * (J * J * h) / (4.0 * math.pi)


def riesz_potential(cp: ChoquardParams, grid, rho: np.ndarray) -> np.ndarray:
    """``(I_alpha * rho)`` at all grid nodes (real, nonnegative for ``rho >= 0``)."""
    c = riesz_constant(cp.alpha, cp.riesz_constant_mode)
    rho = np.asarray(rho, dtype=float)
    if isinstance(grid, CartesianGrid):
        shape, khat = _riesz_kernel_hat(cp.alpha, grid)
        n = grid.n
        pad = np.zeros(shape)
        pad[:n, :n, :n] = rho
        conv = sfft.irfftn(sfft.rfftn(pad) * khat, s=shape, axes=(0, 1, 2))
        return c * conv[:n, :n, :n]
    if isinstance(grid, RadialGrid):
        K = _radial_riesz_matrix(cp.alpha, grid)
        return c * (K @ rho)
    raise TypeError("unsupported grid")


def riesz_convolution(cp: ChoquardParams, w: SampledField, x) -> float:
    """``(I_alpha * w)(x)`` at a grid node ``x`` (direct sum, analytic self cell)."""
    g = w.grid
    if not isinstance(g, CartesianGrid):
        raise DomainError("riesz_convolution at a point needs a Cartesian grid")
    idx = g.index_of(x)
    if idx is None:
        raise DomainError("x must be a grid node")
    c = riesz_constant(cp.alpha, cp.riesz_constant_mode)
    X = g.points()
    d = np.sqrt(np.sum((X - np.asarray(x, dtype=float)) ** 2, axis=-1))
    vals = np.real(w.values)
    mask = d > 0
    s = np.sum(vals[mask] * d[mask] ** (cp.alpha - 3.0)) * g.h ** 3
    s += vals[idx] * _self_cell(cp.alpha, g.h)
    return float(c * s)


def choquard_energy(cp: ChoquardParams, u: SampledField) -> float:
    """``D(u) = int (I_alpha * |u|^p) |u|^p``."""
    rho = np.abs(u.values) ** cp.p
    pot = riesz_potential(cp, u.grid, rho)
    w = u.grid.weights if isinstance(u.grid, RadialGrid) else u.grid.cell_volume
    return float(np.sum(w * pot * rho))


def choquard_quotient(p: FracParams, A: VectorPotential, u: SampledField, cp: ChoquardParams,
                      pairq: PairQuadratureSpec | None = None) -> float:
    """``G(u) = ||u||^2_{A,s} / D(u)^(1/p)``; scale invariant."""
    D = choquard_energy(cp, u)
    if not D > 0.0:
        raise DegenerateInputError("D(u) = 0")
    return norm_sq(p, A, u, pairq) / D ** (1.0 / cp.p)


def local_energy(A: VectorPotential, u: SampledField, domain_radius: float | None = None) -> float:
    """``int |grad_A u|^2`` by grid quadrature of analytic derivatives.

    Falls back to the covariant stencil when ``u`` is not analytic.
    """
    g = u.grid
    X = g.points()
    if u.analytic is not None:
        grad = u.analytic.gradient(X) - 1j * A.evaluate(X) * u.analytic.value(X)[..., None]
        dens = np.sum(np.abs(grad) ** 2, axis=-1)
    else:
        if not isinstance(g, CartesianGrid):
            raise DomainError("stencil local energy needs a Cartesian grid")
        form = CartesianForm(FracParams(0.5, 1.0), A, g, PairQuadratureSpec())
        dens = np.sum(np.abs(form.covariant_gradient(u.values)) ** 2, axis=0)
    w = g.weights if isinstance(g, RadialGrid) else g.cell_volume
    if domain_radius is not None:
        dens = dens * (np.sum(X * X, axis=-1) < domain_radius ** 2)
    return float(np.sum(w * dens))

