import math

import numpy as np
import pytest

from fracmag.bbm import bbm_sweep, mollifier_moments, operator_limit_sweep, smooth_cutoff
from fracmag.field import (CartesianGrid, ConstantField, GaussianField, LinearPotential,
                           RadialGrid, RadialPotential, SampledField, ZeroPotential)
from fracmag.specfun import DomainError

GAUSS = GaussianField(0.5)
C17 = CartesianGrid(17, 6.0)
S_LIST = (0.7, 0.9, 0.99)


def test_smooth_cutoff():
    r = np.linspace(0, 5, 501)
    c = smooth_cutoff(r, 2.0)
    assert np.all(c[r <= 2.0] == 1.0) and np.all(c[r >= 4.0] == 0.0)
    assert np.all(np.diff(c) <= 0)
    assert smooth_cutoff(3.0, 2.0) == pytest.approx(0.5)


def test_mollifier_moments():
    rows = mollifier_moments([0.5, 0.9, 0.99], 1.0, 2.0)
    assert [s for s, _, _ in rows] == [0.5, 0.9, 0.99]
    for s, I1, _ in rows:
        assert I1 == pytest.approx(s, abs=1e-8)
    I2 = [abs(r[2]) for r in rows]
    assert I2[2] < I2[1] < I2[0]
    m = 2.0
    for s, I1, _ in mollifier_moments([0.3, 0.6], m, 1.0):
        assert I1 == pytest.approx(s * m ** (2 * s - 2), abs=1e-8)
    with pytest.raises(DomainError):
        mollifier_moments([0.5], 1.0, 0.0)


def test_sweep_requires_increasing_s():
    u = SampledField.from_analytic(CartesianGrid(9, 4.0), GAUSS)
    with pytest.raises(DomainError):
        bbm_sweep(ZeroPotential(), u, [0.9, 0.7], 1.0)
    with pytest.raises(DomainError):
        bbm_sweep(ZeroPotential(), u, [], 1.0)
    with pytest.raises(DomainError):
        bbm_sweep(ZeroPotential(), SampledField.from_analytic(RadialGrid(10, 4.0), GAUSS), [0.9], 1.0)


def test_sweep_zero_potential():
    res = bbm_sweep(ZeroPotential(), SampledField.from_analytic(C17, GAUSS), S_LIST, 1.0)
    assert res.local_energy == pytest.approx(1.5 * math.pi ** 1.5, rel=1e-5)
    assert abs(res.seminorm_energy[-1] / res.local_energy - 1) <= 0.1
    assert res.rel_gap[2] < res.rel_gap[1] < res.rel_gap[0]
    assert all(e >= 0 for e in res.seminorm_energy)
    assert res.rows()[0] == (0.7, res.seminorm_energy[0], res.local_energy, res.rel_gap[0])


def test_sweep_linear_and_radial_potentials():
    u = SampledField.from_analytic(C17, GAUSS)
    for A in (LinearPotential(np.diag([0.3, 0.3, 0.3])), RadialPotential.constant(0.2)):
        res = bbm_sweep(A, u, S_LIST, 1.0)
        assert np.all(np.diff(res.rel_gap) < 0) and res.rel_gap[-1] <= 0.1


def test_sweep_bounded_domain():
    u = SampledField.from_analytic(C17, GAUSS)
    res = bbm_sweep(LinearPotential(np.diag([0.3, 0.3, 0.3])), u, S_LIST, 1.0, domain_radius=2.5)
    assert res.local_energy < bbm_sweep(ZeroPotential(), u, [0.99], 1.0).local_energy * 1.2
    assert np.all(np.diff(res.rel_gap) < 0) and res.rel_gap[-1] <= 0.1


def test_operator_limit_gaussian():
    rows = operator_limit_sweep(ZeroPotential(), GAUSS, np.zeros(3), S_LIST, 1.0)
    gaps = [g for _, _, g in rows]
    assert gaps[2] < gaps[1] < gaps[0]
    assert abs(rows[-1][1] - 4.0) <= 0.05 * 4.0


def test_operator_limit_constant():
    (_, v, gap), = operator_limit_sweep(ZeroPotential(), ConstantField(1.0), np.ones(3), [0.99], 1.0)
    assert v == pytest.approx(1.0, rel=1e-12) and gap <= 1e-12


def test_operator_limit_radial_potential():
    A = RadialPotential.constant(0.2)
    rows = operator_limit_sweep(A, GAUSS, np.array([1.0, 0.0, 0.0]), [0.8, 0.99], 1.0)
    assert rows[1][2] < rows[0][2]
