import math

import numpy as np
import pytest
from scipy import integrate, special

from fracmag.kernel import (FracParams, constants, extension_kernel, extension_mass,
                            extension_mass_outside, kernel_mass, levy_density,
                            sandwich_constants)
from fracmag.specfun import DomainError, theta


def test_fracparams_derived_fields():
    p = FracParams(0.5, 1.0)
    assert p.nu == 2.0 and p.crit_exp == 3.0
    for s in (0.01, 0.5, 0.99):
        q = FracParams(s, 2.0)
        assert 1.5 < q.nu < 2.5 and 2.0 < q.crit_exp < 6.0
    assert FracParams(0.6).crit_exp > 3.0


@pytest.mark.parametrize("s, m", [(0.0, 1.0), (1.0, 1.0), (0.5, -1.0)])
def test_fracparams_invalid(s, m):
    with pytest.raises(DomainError):
        FracParams(s, m)


def test_constants_at_one_half():
    c = constants(FracParams(0.5))
    assert c.c_s == pytest.approx(1 / math.pi ** 2, rel=1e-13)
    assert c.C_s == pytest.approx(1 / (2 * math.pi ** 2), rel=1e-13)
    assert c.kappa_s == pytest.approx(1.0, rel=1e-13)


@pytest.mark.parametrize("s", [0.1, 0.37, 0.5, 0.8, 0.95])
def test_constant_identities(s):
    c = constants(FracParams(s))
    nu = (3 + 2 * s) / 2
    assert c.C_s == pytest.approx(c.c_s * 2 ** (-nu + 1) / math.gamma(nu), rel=1e-13)
    assert c.C_prime_s == pytest.approx(c.kappa_s / (2 * s) * c.C_s, rel=1e-13)
    assert min(c.c_s, c.C_s, c.kappa_s, c.C_prime_s, c.p_s) > 0


def test_constant_limit_s_to_one():
    s = 0.999
    assert constants(FracParams(s)).C_s / (1 - s) == pytest.approx(math.sqrt(2) / math.pi ** 1.5,
                                                                   abs=1e-3)
    assert constants(FracParams(s)).C_s < 1e-2 * constants(FracParams(0.5)).C_s


def test_levy_density_values():
    p = FracParams(0.5, 1.0)
    assert levy_density(p, 1.0) == pytest.approx(constants(p).C_s * special.kv(2, 1.0), rel=1e-12)
    c_s = constants(FracParams(0.4)).c_s
    assert levy_density(FracParams(0.4, 1e-4), 1.0) / c_s == pytest.approx(1.0, abs=1e-2)
    assert levy_density(FracParams(0.4, 0.0), 2.0) == pytest.approx(c_s / 2 ** 3.8, rel=1e-13)
    r = np.logspace(-3, 1.5, 100)
    assert np.all(np.diff(levy_density(p, r)) < 0)
    with pytest.raises(DomainError):
        levy_density(p, 0.0)


@pytest.mark.parametrize("s, m, target", [(0.5, 1.0, 0.5), (0.9, 1.0, 0.9), (0.5, 2.0, 0.25)])
def test_kernel_mass_examples(s, m, target):
    assert kernel_mass(FracParams(s, m)) == pytest.approx(target, abs=1e-8)


def test_kernel_mass_against_scipy():
    # (2 pi / 3) C_s m^nu int r^(5-2s)/2 K_nu(mr) dr with scipy's Bessel function
    s, m = 0.3, 1.5
    p = FracParams(s, m)
    f = lambda r: r ** ((5 - 2 * s) / 2) * special.kv(p.nu, m * r)
    val = integrate.quad(f, 0, np.inf, epsabs=0, epsrel=1e-12, limit=200)[0]
    oracle = 2 * math.pi / 3 * constants(p).C_s * m ** p.nu * val
    assert kernel_mass(p) == pytest.approx(oracle, rel=1e-9)


def test_extension_kernel_formula_and_symmetry():
    p = FracParams(0.3, 1.2)
    x = np.array([0.3, -0.4, 1.1])
    t = 0.7
    rho = math.sqrt(x @ x + t * t)
    c = constants(p)
    expected = (c.C_prime_s * p.m ** p.nu * t ** (2 * p.s) * rho ** (-p.nu)
                * special.kv(p.nu, p.m * rho))
    assert extension_kernel(p, x, t) == pytest.approx(expected, rel=1e-11)
    assert extension_kernel(p, -x, t) == extension_kernel(p, x, t)
    with pytest.raises(DomainError):
        extension_kernel(p, x, 0.0)


@pytest.mark.parametrize("t", [0.1, 1.0, 5.0])
@pytest.mark.parametrize("s, m", [(0.5, 1.0), (0.3, 1.0), (0.7, 2.0)])
def test_extension_mass_is_theta(s, m, t):
    assert extension_mass(FracParams(s, m), t) == pytest.approx(theta(s, m * t), abs=1e-6)


def test_extension_mass_outside_oracle():
    p = FracParams(0.5, 1.0)
    c = constants(p)
    t, delta = 1e-3, 0.5

    def f(r):
        rho = math.sqrt(r * r + t * t)
        return 4 * math.pi * r * r * c.C_prime_s * t * rho ** -2 * special.kv(2, rho)

    oracle = integrate.quad(f, delta, np.inf, epsabs=0, epsrel=1e-11, limit=200)[0]
    assert extension_mass_outside(p, t, delta) == pytest.approx(oracle, rel=1e-8)


@pytest.mark.parametrize("s", [0.3, 0.5, 0.7])
def test_extension_concentrates(s):
    # the mass outside a ball decays like t^(2s)
    p = FracParams(s, 1.0)
    a, b = extension_mass_outside(p, 1e-4, 0.5), extension_mass_outside(p, 1e-5, 0.5)
    assert a / b == pytest.approx(10 ** (2 * s), rel=1e-3)
    assert extension_mass_outside(p, 1e-7 ** (1 / (2 * s)), 0.5) < 1e-6


def test_sandwich_constants():
    p = FracParams(0.6, 1.0)
    c1, c2 = sandwich_constants(p, 2.0)
    assert 0 < c1 <= c2 < np.inf
    r = np.linspace(0.01, 4.0, 50)
    v = special.kv(p.nu, p.m * r) * r ** p.nu
    assert np.all(v >= c1 * (1 - 1e-6)) and np.all(v <= c2 * (1 + 1e-6))
