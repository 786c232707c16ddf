import math

import numpy as np
import pytest
from scipy import integrate, optimize

from coulombgas import _kernels as K
from coulombgas.analysis import wasserstein1_1d
from coulombgas.errors import NonConfining, NonNormalized
from coulombgas.equilibrium import (SEMICIRCLE_ENERGY, UNIFORM_DISK_ENERGY,
                                    UNIFORM_SPHERE_ENERGY, GridMeasure, closed_form,
                                    default_bound, energy_of_measure, law_on_grid, level_spread,
                                    minimize_discrete, project_simplex, solve_grid)
from coulombgas.geometry import Domain
from coulombgas.model import EnsembleSpec, preset

from oracles import two_charge_scan


def test_semicircle_normalized_and_value_at_zero():
    law = closed_form("semicircle")
    mass = integrate.quad(lambda x: float(law.density(x)), -1, 1, epsabs=1e-13)[0]
    assert abs(mass - 1) < 1e-10
    assert float(law.density(0.0)) == pytest.approx(2 / np.pi)
    assert law.cdf(0.0) == pytest.approx(0.5)


@pytest.mark.parametrize("kind", ["uniform-disk", "stereographic"])
def test_planar_laws_normalized(kind):
    law = closed_form(kind)
    f = lambda r: 2 * np.pi * r * float(law.density(complex(r)))
    mass = integrate.quad(f, 0, 1, epsabs=1e-13)[0] + integrate.quad(f, 1, np.inf, epsabs=1e-13)[0]
    assert abs(mass - 1) < 1e-10


def test_stereographic_unit_disk_mass():
    law = closed_form("stereographic")
    assert float(law.radial_cdf(1.0)) == pytest.approx(0.5, abs=1e-15)
    assert law.mean(lambda z: (np.abs(z) < 1).astype(float), points=1 << 14) == \
        pytest.approx(0.5, abs=1e-2)


def test_circle_boundary_means():
    law = closed_form("circle-boundary")
    assert abs(law.mean(np.real)) < 1e-12
    assert law.mean(lambda z: np.abs(z) ** 2) == pytest.approx(1.0)


def test_grid_measure_check():
    with pytest.raises(NonNormalized):
        GridMeasure(Domain("line"), [0, 1, 2], [0.6, 0.6]).check()


@pytest.mark.parametrize("law,name,exact", [
    ("semicircle", "gue", SEMICIRCLE_ENERGY),
    ("uniform-disk", "ginibre", UNIFORM_DISK_ENERGY),
    ("uniform-sphere", "spherical", UNIFORM_SPHERE_ENERGY)])
def test_closed_form_energies(law, name, exact):
    spec = preset(name, n=1).replace(beta=1.0)
    edges = {"semicircle": np.linspace(-1, 1, 2049), "uniform-disk": np.linspace(0, 1, 2049),
             "uniform-sphere": np.linspace(-1, 1, 2049)}[law]
    assert energy_of_measure(spec, law_on_grid(law, edges)) == pytest.approx(exact, abs=1e-3)


def test_energy_grows_with_concentration():
    spec = preset("gue", n=1).replace(beta=1.0)
    es = []
    for a in (1.0, 0.3, 0.1, 0.03):
        edges = np.linspace(-a, a, 257)
        es.append(energy_of_measure(spec, GridMeasure(Domain("line"), edges, np.full(256, 1 / 256))))
    assert all(e2 > e1 for e1, e2 in zip(es[:-1], es[1:]))


def test_project_simplex():
    rng = np.random.default_rng(0)
    for _ in range(20):
        v = rng.standard_normal(30)
        p = project_simplex(v)
        assert p.min() >= 0 and abs(p.sum() - 1) < 1e-12
        ref = optimize.minimize(lambda w: np.sum((w - v) ** 2), np.full(30, 1 / 30),
                                constraints=[{"type": "eq", "fun": lambda w: w.sum() - 1}],
                                bounds=[(0, None)] * 30, method="SLSQP", options={"ftol": 1e-14})
        assert np.max(np.abs(p - ref.x)) < 1e-5


def test_solve_line_density_at_zero():
    spec = preset("gue", n=1).replace(beta=1.0)
    m = solve_grid(spec, 512, edges=np.linspace(-1.5, 1.5, 513))
    d0 = np.interp(0.0, m.nodes, m.density)
    assert abs(d0 - 2 / np.pi) < 0.01
    assert np.max(np.abs(m.weights - m.weights[::-1])) < 1e-8
    m.check()


def test_solve_conductor_outer_shell():
    m = solve_grid(preset("conductor", n=1), 256)
    outer = m.weights[m.edges[:-1] >= 0.98 - 1e-12].sum()
    assert outer >= 0.95


def test_solver_cross_validation_and_level():
    spec = preset("ginibre", n=1).replace(beta=1.0)
    m = solve_grid(spec, 512)
    ref = energy_of_measure(spec, law_on_grid("uniform-disk", m.edges))
    assert m.energy <= ref + 2e-4
    assert abs(m.energy - UNIFORM_DISK_ENERGY) < 1e-3
    assert level_spread(spec, m) < 1e-3


def test_zero_potential_line_not_confining():
    with pytest.raises(NonConfining):
        default_bound(EnsembleSpec(Domain("line"), n=1))
    with pytest.raises(NonConfining):
        minimize_discrete(EnsembleSpec(Domain("plane"), n=3), 3)


@pytest.mark.parametrize("name", ["gue", "ginibre", "quaternion-ginibre", "spherical",
                                  "circular", "cauchy-normal"])
def test_discrete_gradient_vs_finite_differences(name):
    rng = np.random.default_rng(1)
    spec = preset(name, n=1)
    kern, _, pot, c = spec.codes
    n = 7
    x = rng.standard_normal((n, 3))
    if spec.domain.kind == "line":
        x[:, 1:] = 0
    elif spec.domain.planar:
        x[:, 2] = 0
        x[:, 1] += 0.3 * np.sign(x[:, 1])
    grad = np.zeros((n, 3))
    K.discrete_energy_grad(np.ascontiguousarray(x), kern, pot, c, float(n), grad)
    h = 1e-6
    dims = {"line": [0], "sphere": [0, 1, 2], "circle": [0, 1]}.get(spec.domain.kind, [0, 1])
    tmp = np.zeros((n, 3))
    for i in range(n):
        for d in dims:
            xp, xm = x.copy(), x.copy()
            xp[i, d] += h
            xm[i, d] -= h
            fd = (K.discrete_energy_grad(xp, kern, pot, c, float(n), tmp)
                  - K.discrete_energy_grad(xm, kern, pot, c, float(n), tmp)) / (2 * h)
            assert fd == pytest.approx(grad[i, d], rel=1e-6, abs=1e-6)


def test_descent_monotone():
    r = minimize_discrete(preset("gue", n=1), 40, restarts=1, keep_history=True)
    assert np.all(np.diff(r.history) <= 1e-12)


def test_two_charges_on_line():
    r = minimize_discrete(preset("gue", n=1).replace(beta=1.0), 2)
    a = two_charge_scan()
    assert a == pytest.approx(1 / math.sqrt(8), abs=1e-6)
    assert np.sort(r.points) == pytest.approx([-a, a], abs=1e-6)


def test_two_charges_on_sphere_antipodal():
    r = minimize_discrete(preset("spherical", n=1), 2)
    assert np.linalg.norm(r.points[0] - r.points[1]) == pytest.approx(2, abs=1e-6)


def _sphere_oracle(n, starts, seed=0):
    rng = np.random.default_rng(seed)

    def energy(ang):
        t, p = ang[:n], ang[n:]
        x = np.stack([np.sin(t) * np.cos(p), np.sin(t) * np.sin(p), np.cos(t)], -1)
        d = np.linalg.norm(x[:, None] - x[None], axis=-1)[np.triu_indices(n, 1)]
        return -np.sum(np.log(d))
    best = np.inf
    for _ in range(starts):
        a0 = np.concatenate([np.arccos(rng.uniform(-1, 1, n)), rng.uniform(0, 2 * np.pi, n)])
        best = min(best, optimize.minimize(energy, a0, method="BFGS").fun)
    return best


def test_octahedron():
    r = minimize_discrete(preset("spherical", n=1).replace(beta=1.0), 6)
    assert r.energy == pytest.approx(-9 * math.log(2), abs=1e-9)
    assert r.energy == pytest.approx(_sphere_oracle(6, 200), abs=1e-6)


def test_discrete_law_approaches_grid_law():
    spec = preset("gue", n=1)
    m = solve_grid(spec, 1024)
    d = [wasserstein1_1d(minimize_discrete(spec, n).points, m) for n in (32, 64, 128)]
    assert d[0] > d[1] > d[2]
