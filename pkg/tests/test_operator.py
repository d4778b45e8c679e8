import math

import numpy as np
import pytest
from scipy import integrate

from fracmag.energy import discrete_form
from fracmag.field import (ConstantField, FieldSum, GaussianField, LinearPotential, RadialGrid,
                           RadialPotential, SampledField, ZeroPotential)
from fracmag.kernel import FracParams
from fracmag.operator import (CapabilityError, QuadratureSpec, apply_local_limit,
                              apply_regularized, apply_symbol_nonmagnetic, apply_truncated,
                              symbol_gaussian)

GAUSS = GaussianField(0.5)
ZERO = ZeroPotential()
ORIGIN = np.zeros(3)


def test_quadrature_spec_validation():
    with pytest.raises(ValueError):
        QuadratureSpec(eps=-1.0)
    with pytest.raises(ValueError):
        QuadratureSpec(eps=2.0, r_far=1.0)
    with pytest.raises(ValueError):
        QuadratureSpec(n_radial=4)
    with pytest.raises(ValueError):
        QuadratureSpec(n_angular=27)


def test_constant_field():
    for s, m in ((0.5, 1.0), (0.3, 2.0), (0.99, 1.0)):
        v = apply_regularized(FracParams(s, m), ZERO, ConstantField(1.0), ORIGIN).value
        assert v == pytest.approx(m ** (2 * s), rel=1e-12)


@pytest.mark.parametrize("s", [0.3, 0.5, 0.7])
@pytest.mark.parametrize("m", [0.5, 1.0])
@pytest.mark.parametrize("x", [ORIGIN, np.array([0.5, 0.0, 0.0])])
def test_oracle_agreement(s, m, x):
    p = FracParams(s, m)
    o = apply_symbol_nonmagnetic(p, GAUSS, x)
    r = apply_regularized(p, ZERO, GAUSS, x)
    assert abs(r.value - o) <= 1e-3 * abs(o)
    assert r.est_err <= 1e-6 * abs(o)


def test_reality_for_real_fields():
    v = apply_regularized(FracParams(0.6, 1.0), ZERO, GAUSS, np.array([0.3, -0.2, 0.1])).value
    assert abs(v.imag) <= 1e-10 * abs(v)


def test_linearity():
    p = FracParams(0.4, 1.0)
    A = LinearPotential(np.diag([0.2, 0.1, 0.3]))
    u = GaussianField(0.6, center=(0.1, 0, 0), amplitude=1 + 1j)
    v = GaussianField(0.3, center=(0, -0.2, 0.1), wavevector=(0.2, 0, 0))
    a, b = 0.7 - 0.2j, -1.3
    x = np.array([0.2, 0.1, -0.3])
    lhs = apply_regularized(p, A, FieldSum([(a, u), (b, v)]), x).value
    rhs = a * apply_regularized(p, A, u, x).value + b * apply_regularized(p, A, v, x).value
    assert abs(lhs - rhs) <= 1e-10 * abs(rhs)


def test_odd_field_vanishes_at_centre():
    p = FracParams(0.5, 1.0)
    c = np.array([0.7, 0.2, 0.0])
    odd = FieldSum([(1.0, GaussianField(0.5, center=c)), (-1.0, GaussianField(0.5, center=-c))])
    q = QuadratureSpec(eps=0.05)
    assert abs(apply_truncated(p, ZERO, odd, ORIGIN, q).value.real) <= 1e-12
    assert abs(apply_regularized(p, ZERO, odd, ORIGIN).value) <= 1e-12


@pytest.mark.parametrize("s", [0.3, 0.5])
def test_truncated_converges_to_regularized(s):
    # for smooth u the excluded ball contributes O(eps^(2 - 2s))
    p = FracParams(s, 1.0)
    ref = apply_regularized(p, ZERO, GAUSS, ORIGIN).value
    eps = np.array([0.2, 0.1, 0.05, 0.025])
    diffs = [abs(apply_truncated(p, ZERO, GAUSS, ORIGIN, QuadratureSpec(eps=e)).value - ref)
             for e in eps]
    assert np.all(np.diff(diffs) < 0)
    slope = np.polyfit(np.log(eps), np.log(diffs), 1)[0]
    assert slope == pytest.approx(2 - 2 * s, abs=0.1)


def test_truncated_needs_positive_eps():
    with pytest.raises(ValueError):
        apply_truncated(FracParams(0.5), ZERO, GAUSS, ORIGIN, QuadratureSpec())


def test_local_limit_examples():
    assert apply_local_limit(1.0, ZERO, GAUSS, ORIGIN) == pytest.approx(4.0)
    assert apply_local_limit(1.7, ZERO, ConstantField(1.0), np.ones(3)) == pytest.approx(1.7 ** 2)
    assert symbol_gaussian(1.0, 1.0, GAUSS, ORIGIN) == pytest.approx(4.0, rel=1e-10)


def test_operator_near_local_limit():
    p = FracParams(0.99, 1.0)
    v = apply_regularized(p, ZERO, GAUSS, ORIGIN).value
    assert abs(v - 4.0) <= 0.05 * 4.0


def test_symbol_massless_limit():
    # pure fractional Laplacian of exp(-|x|^2/2) at 0: 4 pi int k^(2+2s) e^{-k^2/2} dk / (2 pi)^(3/2)
    s = 0.5
    exact = 4 * math.pi * 2 ** (s + 0.5) * math.gamma(s + 1.5) / (2 * math.pi) ** 1.5
    assert symbol_gaussian(s, 1e-6, GAUSS, ORIGIN) == pytest.approx(exact, rel=1e-6)
    assert symbol_gaussian(s, 0.0, GAUSS, ORIGIN) == pytest.approx(exact, rel=1e-12)


def test_symbol_rejects_unsupported_fields():
    with pytest.raises(CapabilityError):
        apply_symbol_nonmagnetic(FracParams(0.5), GaussianField(0.5, wavevector=(1, 0, 0)), ORIGIN)
    with pytest.raises(CapabilityError):
        apply_symbol_nonmagnetic(FracParams(0.5), object(), ORIGIN)


def test_plancherel_against_energy_norm():
    s = 0.5
    grid = RadialGrid(60, 10.0)
    u = SampledField.from_analytic(grid, GAUSS)
    n = discrete_form(FracParams(s, 1.0), ZERO, grid).report(u.values).norm_sq
    f = lambda k: 4 * np.pi * k ** 2 * (k ** 2 + 1) ** s * np.exp(-k ** 2)
    assert n == pytest.approx(integrate.quad(f, 0, np.inf, epsrel=1e-12)[0], rel=1e-3)


@pytest.mark.parametrize("A", [ZERO, RadialPotential.constant(0.2)])
def test_weak_strong_consistency(A):
    # a(u, v) from the discrete form against <A u, v>_{L^2} from pointwise values
    p = FracParams(0.5, 1.0)
    grid = RadialGrid(48, 9.0)
    u, v = GaussianField(0.5), GaussianField(0.8)
    form = discrete_form(p, A, grid)
    U = SampledField.from_analytic(grid, u).values
    V = SampledField.from_analytic(grid, v).values
    weak = form.inner(V, form.apply(U))
    Au = np.array([apply_regularized(p, A, u, np.array([r, 0, 0])).value for r in grid.nodes])
    strong = np.sum(grid.weights * np.conj(V) * Au).real
    assert weak == pytest.approx(strong, rel=1e-2)
