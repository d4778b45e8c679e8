"""Compute a radial ground state of the fractional power problem.

Minimizes the magnetic fractional energy on the unit L^2 sphere with
``|u|^p`` nonlinearity, then checks the weak Euler-Lagrange residual and
the mass scaling of the minimal energy.
"""
from fracmag.energy import weak_residual
from fracmag.field import GaussianField, RadialGrid, SampledField, ZeroPotential
from fracmag.kernel import FracParams
from fracmag.solver import MinimizeConfig, minimize_power

p = FracParams(0.75, 1.0)
A = ZeroPotential()
grid = RadialGrid(40, 8.0)
print(f"s={p.s}, critical exponent {p.crit_exp:.4f}")

gs1 = minimize_power(p, A, MinimizeConfig(grid, p_exp=2.5))
gs2 = minimize_power(p, A, MinimizeConfig(grid, p_exp=2.5, constraint=2.0))
print(f"E(1) = {gs1.energy:.6f}  after {gs1.iters} iterations, residual {gs1.residual:.2e}")
print(f"E(2) = {gs2.energy:.6f}")
print(f"subadditivity E(2) <= 2 E(1): {gs2.energy <= 2 * gs1.energy}")
tests = [SampledField.from_analytic(grid, GaussianField(a)) for a in (0.25, 0.5, 1.0, 2.0)]
r = weak_residual(p, A, gs1.u, ("power", 2.5), tests + [gs1.u], gs1.multiplier)
print(f"weak residual against Gaussian test functions: {r:.2e}")
print("energy trace:", " ".join(f"{e:.4f}" for e in gs1.trace[:: max(1, len(gs1.trace) // 8)]))
