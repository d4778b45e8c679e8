"""Magnetic potentials, sampled fields and local covariant calculus.

Potentials are small immutable objects exposing ``evaluate(x)`` and
``jacobian(x)`` on arrays of points with trailing dimension 3.  The
Jacobian convention is ``J[..., h, k] = d A_k / d x_h``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field
from typing import Callable, Sequence

import numpy as np

__all__ = [
    "ExtrapolationError",
    "StencilError",
    "VectorPotential",
    "ZeroPotential",
    "LinearPotential",
    "RadialPotential",
    "TabulatedPotential",
    "ShiftedPotential",
    "CartesianGrid",
    "RadialGrid",
    "SampledField",
    "GaussianField",
    "ConstantField",
    "FieldSum",
    "midpoint_phase",
    "covariant_gradient",
    "magnetic_laplacian",
    "magnetic_hessian",
    "isometry_check",
    "shift_potential",
    "gauge_translate",
    "read_potential_csv",
    "write_potential_csv",
    "read_field_csv",
    "write_field_csv",
]


class ExtrapolationError(ValueError):
    """A tabulated potential was queried outside its table."""


class StencilError(ValueError):
    """Finite-difference stencil does not fit inside the grid."""


# ---------------------------------------------------------------------------
# potentials


class VectorPotential:
    """Base class; subclasses implement ``evaluate`` and ``jacobian``."""

    kind = "abstract"
    lipschitz_bound: float | None = None

    def evaluate(self, x) -> np.ndarray:
        raise NotImplementedError

    def jacobian(self, x) -> np.ndarray:
        raise NotImplementedError

    def divergence(self, x) -> np.ndarray:
        return np.trace(self.jacobian(x), axis1=-2, axis2=-1)

    def __call__(self, x) -> np.ndarray:
        return self.evaluate(x)

    # pure-gauge potentials admit (x - y).A((x+y)/2) = phi(x) - phi(y)
    def gauge_potential(self, x) -> np.ndarray | None:
        return None


@dataclass(frozen=True)
class ZeroPotential(VectorPotential):
    kind = "Zero"
    lipschitz_bound: float | None = 0.0

    def evaluate(self, x):
        x = np.asarray(x, dtype=float)
        return np.zeros_like(x)

    def jacobian(self, x):
        x = np.asarray(x, dtype=float)
        return np.zeros(x.shape + (3,))

    def gauge_potential(self, x):
        return np.zeros(np.shape(x)[:-1])


@dataclass(frozen=True, eq=False)
class LinearPotential(VectorPotential):
    """``A(x) = M x + b`` with ``M`` real symmetric.

    The constant ``b`` arises from gauge translations; for ``b = 0`` this is
    the linear-matrix class.
    """

    M: np.ndarray = dc_field(default_factory=lambda: np.zeros((3, 3)))
    b: np.ndarray = dc_field(default_factory=lambda: np.zeros(3))
    lipschitz_bound: float | None = None
    kind = "LinearMatrix"

    def __post_init__(self):
        M = np.array(self.M, dtype=float).reshape(3, 3)
        if not np.allclose(M, M.T, rtol=0.0, atol=1e-14 * max(1.0, np.abs(M).max())):
            raise ValueError("LinearMatrix potential requires a symmetric matrix")
        M = 0.5 * (M + M.T)
        M.flags.writeable = False
        b = np.array(self.b, dtype=float).reshape(3)
        b.flags.writeable = False
        object.__setattr__(self, "M", M)
        object.__setattr__(self, "b", b)
        if self.lipschitz_bound is None:
            object.__setattr__(self, "lipschitz_bound", float(np.linalg.norm(M, 2)))

    def evaluate(self, x):
        x = np.asarray(x, dtype=float)
        return x @ self.M.T + self.b

    def jacobian(self, x):
        x = np.asarray(x, dtype=float)
        return np.broadcast_to(self.M.T, x.shape + (3,)).copy()

    def gauge_potential(self, x):
        x = np.asarray(x, dtype=float)
        return 0.5 * np.einsum("...i,ij,...j->...", x, self.M, x) + x @ self.b


class RadialPotential(VectorPotential):
    """``A(x) = a(|x|) x`` for a scalar profile ``a``.

    Parameters
    ----------
    profile : callable
        Vectorized ``a(r)``.
    derivative : callable, optional
        ``a'(r)``; a centred difference is used when omitted.
    """

    kind = "RadialProfile"

    def __init__(self, profile: Callable, derivative: Callable | None = None,
                 lipschitz_bound: float | None = None, name: str = ""):
        self.profile = profile
        self._deriv = derivative
        self.lipschitz_bound = lipschitz_bound
        self.name = name

    @classmethod
    def constant(cls, c: float) -> "RadialPotential":
        c = float(c)
        return cls(lambda r: np.full(np.shape(r), c), lambda r: np.zeros(np.shape(r)),
                   lipschitz_bound=abs(c), name=f"const:{c!r}")

    def derivative(self, r):
        r = np.asarray(r, dtype=float)
        if self._deriv is not None:
            return self._deriv(r)
        d = 1e-5 * np.maximum(1.0, r)
        return (self.profile(r + d) - self.profile(np.abs(r - d))) / (2.0 * d)

    def evaluate(self, x):
        x = np.asarray(x, dtype=float)
        r = np.sqrt(np.sum(x * x, axis=-1))
        return self.profile(r)[..., None] * x

    def jacobian(self, x):
        x = np.asarray(x, dtype=float)
        r = np.sqrt(np.sum(x * x, axis=-1))
        a = self.profile(r)
        da = self.derivative(r)
        with np.errstate(invalid="ignore", divide="ignore"):
            coef = np.where(r > 0, da / np.where(r > 0, r, 1.0), 0.0)
        J = coef[..., None, None] * x[..., :, None] * x[..., None, :]
        J = J + a[..., None, None] * np.eye(3)
        return J


class TabulatedPotential(VectorPotential):
    """Trilinear interpolation of samples on a uniform lattice.

    Queries outside the table raise :class:`ExtrapolationError`.
    ``lipschitz_bound`` is carried as user metadata and never verified.
    """

    kind = "Tabulated"

    def __init__(self, axes: Sequence[np.ndarray], values: np.ndarray,
                 lipschitz_bound: float | None = None):
        from scipy.interpolate import RegularGridInterpolator

        self.axes = tuple(np.asarray(a, dtype=float) for a in axes)
        values = np.asarray(values, dtype=float)
        shape = tuple(len(a) for a in self.axes)
        if values.shape != shape + (3,):
            raise ValueError(f"values must have shape {shape + (3,)}")
        self.values = values
        self.lipschitz_bound = lipschitz_bound
        self._interp = RegularGridInterpolator(self.axes, values, method="linear",
                                               bounds_error=False, fill_value=np.nan)
        grads = []
        for k in range(3):
            grads.append(np.stack(np.gradient(values[..., k], *self.axes), axis=-1))
        # jac[..., h, k] = d A_k / d x_h
        self._jac = RegularGridInterpolator(self.axes, np.stack(grads, axis=-1),
                                            method="linear", bounds_error=False,
                                            fill_value=np.nan)

    def _check(self, x):
        lo = np.array([a[0] for a in self.axes])
        hi = np.array([a[-1] for a in self.axes])
        tol = 1e-12 * (hi - lo)
        if np.any(x < lo - tol) or np.any(x > hi + tol):
            raise ExtrapolationError("tabulated potential queried outside its grid")

    def evaluate(self, x):
        x = np.asarray(x, dtype=float)
        self._check(x)
        xc = np.clip(x, [a[0] for a in self.axes], [a[-1] for a in self.axes])
        return self._interp(xc.reshape(-1, 3)).reshape(x.shape)

    def jacobian(self, x):
        x = np.asarray(x, dtype=float)
        self._check(x)
        xc = np.clip(x, [a[0] for a in self.axes], [a[-1] for a in self.axes])
        return self._jac(xc.reshape(-1, 3)).reshape(x.shape + (3,))


class ShiftedPotential(VectorPotential):
    """``A_eta(x) = A(x + xi) + eta`` for an arbitrary base potential."""

    def __init__(self, base: VectorPotential, xi, eta):
        self.base = base
        self.xi = np.asarray(xi, dtype=float)
        self.eta = np.asarray(eta, dtype=float)
        self.kind = base.kind
        self.lipschitz_bound = base.lipschitz_bound

    def evaluate(self, x):
        return self.base.evaluate(np.asarray(x, dtype=float) + self.xi) + self.eta

    def jacobian(self, x):
        return self.base.jacobian(np.asarray(x, dtype=float) + self.xi)


def shift_potential(A: VectorPotential, xi, eta) -> VectorPotential:
    """Potential ``A(x + xi) + eta`` (stays in the linear class when possible)."""
    xi = np.asarray(xi, dtype=float)
    eta = np.asarray(eta, dtype=float)
    if isinstance(A, ZeroPotential):
        if not np.any(eta):
            return A
        return LinearPotential(np.zeros((3, 3)), eta)
    if isinstance(A, LinearPotential):
        return LinearPotential(A.M, A.M @ xi + A.b + eta)
    return ShiftedPotential(A, xi, eta)


def midpoint_phase(A: VectorPotential, x, y) -> np.ndarray:
    """``exp(i (x - y) . A((x + y)/2))``; unit modulus by construction."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    ang = np.sum((x - y) * A.evaluate(0.5 * (x + y)), axis=-1)
    return np.exp(1j * ang)


# ---------------------------------------------------------------------------
# grids and fields


@dataclass(frozen=True)
class CartesianGrid:
    """``n**3`` nodes ``-L + h*j`` with ``h = 2L/(n-1)``."""

    n: int
    half_width: float

    def __post_init__(self):
        if int(self.n) < 3 or not self.half_width > 0:
            raise ValueError("CartesianGrid needs n >= 3 and half_width > 0")
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "half_width", float(self.half_width))

    @property
    def h(self) -> float:
        return 2.0 * self.half_width / (self.n - 1)

    @property
    def axis(self) -> np.ndarray:
        return -self.half_width + self.h * np.arange(self.n)

    @property
    def shape(self) -> tuple[int, int, int]:
        return (self.n,) * 3

    @property
    def cell_volume(self) -> float:
        return self.h ** 3

    def points(self) -> np.ndarray:
        a = self.axis
        X = np.stack(np.meshgrid(a, a, a, indexing="ij"), axis=-1)
        return X

    def index_of(self, x, tol: float = 1e-9) -> tuple[int, int, int] | None:
        j = (np.asarray(x, dtype=float) + self.half_width) / self.h
        r = np.rint(j)
        if np.all(np.abs(j - r) < tol) and np.all(r >= 0) and np.all(r < self.n):
            return tuple(int(v) for v in r)
        return None


@dataclass(frozen=True)
class RadialGrid:
    """Cell-centred radial nodes ``r_j = (j + 1/2) h`` on ``[0, radius]``."""

    n: int
    radius: float

    def __post_init__(self):
        if int(self.n) < 4 or not self.radius > 0:
            raise ValueError("RadialGrid needs n >= 4 and radius > 0")
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "radius", float(self.radius))

    @property
    def h(self) -> float:
        return self.radius / self.n

    @property
    def nodes(self) -> np.ndarray:
        return (np.arange(self.n) + 0.5) * self.h

    @property
    def weights(self) -> np.ndarray:
        r = self.nodes
        return 4.0 * math.pi * r * r * self.h

    @property
    def shape(self) -> tuple[int]:
        return (self.n,)

    def points(self) -> np.ndarray:
        """Nodes embedded on the first axis (for analytic evaluation)."""
        r = self.nodes
        return np.stack([r, np.zeros_like(r), np.zeros_like(r)], axis=-1)


class AnalyticField:
    """Closed-form field with first and second derivatives."""

    def value(self, x) -> np.ndarray:
        raise NotImplementedError

    def gradient(self, x) -> np.ndarray:
        raise NotImplementedError

    def hessian(self, x) -> np.ndarray:
        raise NotImplementedError

    def __add__(self, other):
        return FieldSum([(1.0, self), (1.0, other)])

    def __rmul__(self, c):
        return FieldSum([(c, self)])


class GaussianField(AnalyticField):
    """``amplitude * exp(-a |x - c|^2 + i k . x)``.

    The unit Gaussian ``exp(-|x|^2/2)`` is ``GaussianField(0.5)``.
    """

    def __init__(self, a: float = 0.5, center=(0.0, 0.0, 0.0), amplitude: complex = 1.0,
                 wavevector=(0.0, 0.0, 0.0)):
        if not a > 0:
            raise ValueError("Gaussian width parameter must be positive")
        self.a = float(a)
        self.center = np.asarray(center, dtype=float)
        self.amplitude = complex(amplitude)
        self.wavevector = np.asarray(wavevector, dtype=float)

    def value(self, x):
        x = np.asarray(x, dtype=float)
        d = x - self.center
        return self.amplitude * np.exp(-self.a * np.sum(d * d, axis=-1) + 1j * (x @ self.wavevector))

    def _g(self, x):
        d = np.asarray(x, dtype=float) - self.center
        return -2.0 * self.a * d + 1j * self.wavevector

    def gradient(self, x):
        return self.value(x)[..., None] * self._g(x)

    def hessian(self, x):
        g = self._g(x)
        H = g[..., :, None] * g[..., None, :] - 2.0 * self.a * np.eye(3)
        return self.value(x)[..., None, None] * H

    def fourier_radial(self, k):
        """Unitary transform magnitude profile ``(2a)^(-3/2) exp(-k^2/(4a))``."""
        return self.amplitude * (2.0 * self.a) ** -1.5 * np.exp(-np.asarray(k) ** 2 / (4.0 * self.a))


class ConstantField(AnalyticField):
    def __init__(self, c: complex = 1.0):
        self.c = complex(c)

    def value(self, x):
        return np.full(np.shape(x)[:-1], self.c, dtype=complex)

    def gradient(self, x):
        return np.zeros(np.shape(x), dtype=complex)

    def hessian(self, x):
        return np.zeros(np.shape(x) + (3,), dtype=complex)


class FieldSum(AnalyticField):
    """Finite linear combination of analytic fields."""

    def __init__(self, terms: Sequence[tuple[complex, AnalyticField]]):
        flat = []
        for c, f in terms:
            if isinstance(f, FieldSum):
                flat += [(c * c2, f2) for c2, f2 in f.terms]
            else:
                flat.append((complex(c), f))
        self.terms = flat

    def value(self, x):
        return sum(c * f.value(x) for c, f in self.terms)

    def gradient(self, x):
        return sum(c * f.gradient(x) for c, f in self.terms)

    def hessian(self, x):
        return sum(c * f.hessian(x) for c, f in self.terms)


@dataclass
class SampledField:
    """Complex samples on a grid with an optional analytic evaluator."""

    grid: CartesianGrid | RadialGrid
    values: np.ndarray
    analytic: AnalyticField | None = None

    def __post_init__(self):
        v = np.asarray(self.values, dtype=complex)
        if v.shape != self.grid.shape:
            raise ValueError(f"values shape {v.shape} does not match grid {self.grid.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("field values must be finite")
        self.values = v

    @classmethod
    def from_analytic(cls, grid, f: AnalyticField) -> "SampledField":
        return cls(grid, f.value(grid.points()), f)

    def copy(self, values=None) -> "SampledField":
        v = self.values.copy() if values is None else values
        return SampledField(self.grid, v, self.analytic if values is None else None)

    def scaled(self, t: complex) -> "SampledField":
        an = None if self.analytic is None else FieldSum([(t, self.analytic)])
        return SampledField(self.grid, t * self.values, an)

    def modulus(self) -> "SampledField":
        return SampledField(self.grid, np.abs(self.values).astype(complex))

    def lp_norm(self, p: float) -> float:
        w = self.grid.weights if isinstance(self.grid, RadialGrid) else self.grid.cell_volume
        return float(np.sum(w * np.abs(self.values) ** p)) ** (1.0 / p)

    def l2_sq(self) -> float:
        return self.lp_norm(2.0) ** 2

    def evaluate(self, x) -> np.ndarray:
        """Values at arbitrary points: analytic if present, else a cubic spline."""
        x = np.asarray(x, dtype=float)
        if self.analytic is not None:
            return self.analytic.value(x)
        if isinstance(self.grid, RadialGrid):
            r = np.sqrt(np.sum(x * x, axis=-1))
            from scipy.interpolate import CubicSpline

            rr = self.grid.nodes
            cs_re = CubicSpline(np.concatenate([-rr[::-1], rr]),
                                np.concatenate([self.values.real[::-1], self.values.real]))
            cs_im = CubicSpline(np.concatenate([-rr[::-1], rr]),
                                np.concatenate([self.values.imag[::-1], self.values.imag]))
            out = cs_re(r) + 1j * cs_im(r)
            return np.where(r <= self.grid.radius, out, 0.0)
        return _spline_eval(self, x)


def _spline_eval(u: SampledField, x: np.ndarray) -> np.ndarray:
    from scipy.ndimage import map_coordinates

    g = u.grid
    idx = (x + g.half_width) / g.h
    coords = np.moveaxis(idx, -1, 0).reshape(3, -1)
    re = map_coordinates(u.values.real, coords, order=3, mode="constant", cval=0.0)
    im = map_coordinates(u.values.imag, coords, order=3, mode="constant", cval=0.0)
    return (re + 1j * im).reshape(x.shape[:-1])


# ---------------------------------------------------------------------------
# local calculus

_D1 = np.array([1.0, -8.0, 0.0, 8.0, -1.0]) / 12.0
_D2 = np.array([-1.0, 16.0, -30.0, 16.0, -1.0]) / 12.0


def _grid_derivatives(u: SampledField, x):
    g = u.grid
    if not isinstance(g, CartesianGrid):
        raise StencilError("finite-difference fallback needs a Cartesian grid")
    idx = g.index_of(x)
    if idx is None:
        raise StencilError("point is not a grid node and the field has no analytic form")
    if min(idx) < 2 or max(idx) > g.n - 3:
        raise StencilError("boundary node: 4th-order stencil does not fit")
    i, j, k = idx
    v = u.values
    h = g.h
    sl = np.arange(-2, 3)
    grad = np.empty(3, dtype=complex)
    hess = np.empty((3, 3), dtype=complex)
    lines = [v[i + sl, j, k], v[i, j + sl, k], v[i, j, k + sl]]
    for a in range(3):
        grad[a] = _D1 @ lines[a] / h
        hess[a, a] = _D2 @ lines[a] / h ** 2
    for a in range(3):
        for b in range(a + 1, 3):
            acc = 0.0
            for p, cp in zip(sl, _D1):
                for q, cq in zip(sl, _D1):
                    if cp == 0 or cq == 0:
                        continue
                    off = [0, 0, 0]
                    off[a] += p
                    off[b] += q
                    acc += cp * cq * v[i + off[0], j + off[1], k + off[2]]
            hess[a, b] = hess[b, a] = acc / h ** 2
    return v[i, j, k], grad, hess


def _local_data(u: SampledField, x):
    x = np.asarray(x, dtype=float)
    if u.analytic is not None:
        return u.analytic.value(x), u.analytic.gradient(x), u.analytic.hessian(x)
    return _grid_derivatives(u, x)


def _as_field(u):
    if isinstance(u, AnalyticField):
        return SampledField(RadialGrid(4, 1.0), np.zeros(4), u)
    return u


def covariant_gradient(A: VectorPotential, u, x) -> np.ndarray:
    """``(grad - i A) u`` at ``x``.

    Analytic derivatives are used when available; otherwise ``x`` must be an
    interior grid node and 4th-order central differences are used.
    """
    u = _as_field(u)
    val, grad, _ = _local_data(u, x)
    return grad - 1j * A.evaluate(np.asarray(x, dtype=float)) * val


def magnetic_laplacian(A: VectorPotential, u, x) -> complex:
    """``-(grad - i A)^2 u = -lap u + i u div A + 2 i A.grad u + |A|^2 u``."""
    u = _as_field(u)
    x = np.asarray(x, dtype=float)
    val, grad, hess = _local_data(u, x)
    a = A.evaluate(x)
    div = A.divergence(x)
    return complex(-np.trace(hess) + 1j * val * div + 2j * (a @ grad) + (a @ a) * val)


def magnetic_hessian(A: VectorPotential, u, x) -> np.ndarray:
    """Magnetic Hessian whose trace is ``-magnetic_laplacian``."""
    u = _as_field(u)
    x = np.asarray(x, dtype=float)
    val, grad, hess = _local_data(u, x)
    a = A.evaluate(x)
    J = A.jacobian(x)
    sym = 0.5 * (J + J.T)
    H = (hess - 1j * np.outer(grad, a) - 1j * np.outer(a, grad)
         - 1j * sym * val - np.outer(a, a) * val)
    return 0.5 * (H + H.T)


def isometry_check(A: VectorPotential, rotations: Sequence[np.ndarray],
                   pairs: Sequence[tuple], tol: float = 1e-12) -> tuple[bool, float]:
    """Max of ``|g(x-y).A(g(x+y)/2) - (x-y).A((x+y)/2)|`` over samples."""
    dev = 0.0
    for g in rotations:
        g = np.asarray(g, dtype=float)
        for x, y in pairs:
            x = np.asarray(x, dtype=float)
            y = np.asarray(y, dtype=float)
            lhs = (g @ (x - y)) @ A.evaluate(g @ (0.5 * (x + y)))
            rhs = (x - y) @ A.evaluate(0.5 * (x + y))
            dev = max(dev, abs(lhs - rhs))
    return dev <= tol, dev


def gauge_translate(u: SampledField, xi, eta) -> SampledField:
    """``v(x) = exp(i eta.x) u(x + xi)`` on the same grid.

    On-lattice shifts of a Cartesian field are exact index shifts with zero
    fill; other shifts use the analytic form or a cubic spline.
    """
    xi = np.asarray(xi, dtype=float)
    eta = np.asarray(eta, dtype=float)
    g = u.grid
    X = g.points()
    phase = np.exp(1j * (X @ eta))
    if isinstance(g, CartesianGrid) and u.analytic is None:
        j = xi / g.h
        if np.all(np.abs(j - np.rint(j)) < 1e-9):
            s = np.rint(j).astype(int)
            out = np.zeros_like(u.values)
            src = [slice(max(0, k), g.n + min(0, k)) for k in s]
            dst = [slice(max(0, -k), g.n - max(0, k)) for k in s]
            out[tuple(dst)] = u.values[tuple(src)]
            return SampledField(g, phase * out)
    an = None
    if u.analytic is not None:
        an = _TranslatedField(u.analytic, xi, eta)
        return SampledField.from_analytic(g, an)
    return SampledField(g, phase * u.evaluate(X + xi))


class _TranslatedField(AnalyticField):
    def __init__(self, base: AnalyticField, xi, eta):
        self.base, self.xi, self.eta = base, xi, eta

    def value(self, x):
        x = np.asarray(x, dtype=float)
        return np.exp(1j * (x @ self.eta)) * self.base.value(x + self.xi)

    def gradient(self, x):
        x = np.asarray(x, dtype=float)
        e = np.exp(1j * (x @ self.eta))
        b = self.base.value(x + self.xi)
        return e[..., None] * (self.base.gradient(x + self.xi) + 1j * self.eta * b[..., None])

    def hessian(self, x):
        x = np.asarray(x, dtype=float)
        e = np.exp(1j * (x @ self.eta))[..., None, None]
        b = self.base.value(x + self.xi)[..., None, None]
        g = self.base.gradient(x + self.xi)
        H = self.base.hessian(x + self.xi)
        ie = 1j * self.eta
        return e * (H + g[..., :, None] * ie + ie[:, None] * g[..., None, :]
                    + b * np.outer(ie, ie))


# ---------------------------------------------------------------------------
# CSV formats


def read_potential_csv(path: str, lipschitz_bound: float | None = None) -> TabulatedPotential:
    """Read ``x,y,z,Ax,Ay,Az`` rows on a uniform lattice (any row order)."""
    data = _read_csv(path, ["x", "y", "z", "Ax", "Ay", "Az"])
    axes = [np.unique(data[:, k]) for k in range(3)]
    shape = tuple(len(a) for a in axes)
    if np.prod(shape) != len(data):
        raise ValueError("potential table is not a full lattice")
    for a in axes:
        if len(a) > 2 and not np.allclose(np.diff(a), a[1] - a[0], rtol=1e-9, atol=0):
            raise ValueError("potential table is not uniform")
    idx = [np.searchsorted(axes[k], data[:, k]) for k in range(3)]
    vals = np.empty(shape + (3,))
    vals[idx[0], idx[1], idx[2]] = data[:, 3:6]
    return TabulatedPotential(axes, vals, lipschitz_bound)


def write_potential_csv(path: str, A: VectorPotential, grid: CartesianGrid,
                        comments: list[str] | None = None) -> None:
    X = grid.points().reshape(-1, 3)
    V = A.evaluate(X)
    rows = np.concatenate([X, V], axis=1)
    _write_csv(path, ["x", "y", "z", "Ax", "Ay", "Az"], rows, comments)


def read_field_csv(path: str) -> SampledField:
    """Read ``x,y,z,re,im`` rows.

    The rows form either a symmetric cube ``-L + h*j`` or, for radial fields,
    the cell-centred nodes ``(j + 1/2) h`` on the positive x-axis.
    """
    data = _read_csv(path, ["x", "y", "z", "re", "im"])
    if len(data) >= 4 and np.all(data[:, 1:3] == 0.0) and len(np.unique(data[:, 0])) == len(data):
        order = np.argsort(data[:, 0])
        x = data[order, 0]
        h = x[1] - x[0]
        grid = RadialGrid(len(x), float(len(x) * h))
        if np.allclose(grid.nodes, x, rtol=0, atol=1e-9 * grid.radius):
            return SampledField(grid, data[order, 3] + 1j * data[order, 4])
    axis = np.unique(data[:, 0])
    n = len(axis)
    grid = CartesianGrid(n, float(-axis[0]))
    if not np.allclose(grid.axis, axis, atol=1e-9 * grid.half_width):
        raise ValueError("field lattice must be -L + h*j, j = 0..n-1, on each axis")
    if len(data) != n ** 3:
        raise ValueError("field table is not a full n^3 lattice")
    idx = [np.rint((data[:, k] + grid.half_width) / grid.h).astype(int) for k in range(3)]
    vals = np.empty(grid.shape, dtype=complex)
    vals[idx[0], idx[1], idx[2]] = data[:, 3] + 1j * data[:, 4]
    return SampledField(grid, vals)


def write_field_csv(path: str, u: SampledField, comments: list[str] | None = None) -> None:
    """Write ``x,y,z,re,im`` rows (radial fields on the positive x-axis)."""
    X = u.grid.points().reshape(-1, 3)
    v = u.values.reshape(-1)
    rows = np.concatenate([X, v.real[:, None], v.imag[:, None]], axis=1)
    _write_csv(path, ["x", "y", "z", "re", "im"], rows, comments)


def _read_csv(path: str, header: list[str]) -> np.ndarray:
    from .io import read_csv_table

    head, data = read_csv_table(path)
    if [h.strip() for h in head] != header:
        raise ValueError(f"expected header {','.join(header)}, got {','.join(head)}")
    return data


def _write_csv(path: str, header: list[str], rows: np.ndarray,
               comments: list[str] | None = None) -> None:
    from .io import write_csv_rows

    write_csv_rows(path, header, rows, comments)
