import math

import numpy as np
import pytest

from coulombgas.equilibrium import (UNIFORM_SPHERE_ENERGY, GridMeasure, law_on_grid,
                                    solve_grid)
from coulombgas.errors import InfiniteEntropy
from coulombgas.gas import ChainSettings
from coulombgas.geometry import Domain
from coulombgas.model import preset
from coulombgas.thermo import (assemble_ti, auto_shift, default_alphas, entropy,
                               integrate_ti, mean_pair_W, mu0_grid, product_mean_W,
                               sandwich_check, trial_upper_bound)

from oracles import circle_pair_mean_W, ginibre_log_z, gue_log_z

FAST = ChainSettings(sweeps=6000, burn_in=1000)


def test_alpha_grid():
    a = default_alphas()
    assert a[0] == 0 and a[-1] == 1 and np.all(np.diff(a) > 0)


def test_alpha_zero_is_product_mean():
    s = preset("gue", n=8)
    gas, err = mean_pair_W(s, 0.0, ChainSettings(sweeps=20000, burn_in=1000), seed=3)
    ref, rerr = product_mean_W(s)
    assert abs(gas - ref) < 2 * math.hypot(err, rerr)


def test_two_charge_circle_against_quadrature():
    oracle = circle_pair_mean_W()
    assert oracle == pytest.approx(-1.0, abs=1e-10)
    s = preset("circular", n=2)
    est, err = mean_pair_W(s, 1.0, ChainSettings(sweeps=101000, burn_in=1000), seed=0)
    assert abs(est - oracle) < 2 * err


def test_constant_W_free_energy():
    a = default_alphas()
    r = assemble_ti(a, np.full(a.size, 3.0), np.zeros(a.size), n=10)
    assert r.free_energy_estimate == pytest.approx((1 - 1 / 10) * 3.0 / 2)
    assert r.concave


def test_shift_removed_exactly():
    a = default_alphas()
    gp = 5 - a
    r0 = assemble_ti(a, gp, np.full(a.size, 0.01), n=10)
    r1 = assemble_ti(a, gp + 2.0, np.full(a.size, 0.01), n=10, shift=2.0)
    assert r1.gamma_at_1 == pytest.approx(r0.gamma_at_1)
    assert np.allclose(r1.gamma_prime, r0.gamma_prime)


def test_nonmonotone_warns():
    from coulombgas.errors import NonMonotoneWarning
    a = default_alphas(5)
    with pytest.warns(NonMonotoneWarning):
        r = assemble_ti(a, [1.0, 0.9, 1.5, 0.8, 0.7], np.full(5, 0.01), n=10)
    assert not r.concave


@pytest.mark.parametrize("name,exact", [("gue", gue_log_z), ("ginibre", ginibre_log_z)])
def test_ti_against_exact_partition_function(name, exact):
    n = 8
    r = integrate_ti(preset(name, n=n), settings=ChainSettings(sweeps=20000, burn_in=2000),
                     seed=1, threads=4)
    ref = -exact(n) / n ** 2
    assert abs(r.free_energy_estimate - ref) < 3 * r.free_energy_err + 2e-3 * abs(ref)
    assert r.concave


def test_ti_shift_consistency():
    s = preset("ginibre", n=6)
    r0 = integrate_ti(s, settings=FAST, seed=2, shift=0.0, threads=4)
    r1 = integrate_ti(s, settings=FAST, seed=2, shift=4.0, threads=4)
    assert abs(r0.free_energy_estimate - r1.free_energy_estimate) < \
        3 * math.hypot(r0.free_energy_err, r1.free_energy_err)


def test_auto_shift_positive_W():
    s = preset("gue", n=4)
    assert auto_shift(s) >= 0


@pytest.mark.parametrize("name", ["gue", "ginibre", "spherical"])
def test_sandwich(name):
    rep = sandwich_check(preset(name, n=16), FAST, seed=0)
    assert rep.passed, rep


def test_mu0_has_zero_entropy():
    for name in ("gue", "ginibre", "spherical"):
        s = preset(name, n=4)
        assert abs(entropy(s, mu0_grid(s)).value) < 1e-3


@pytest.mark.parametrize("name", ["gue", "ginibre", "conductor", "spherical"])
def test_entropy_nonpositive(name):
    s = preset(name, n=4)
    if name == "spherical":
        m = law_on_grid("uniform-sphere", np.linspace(-1, 1, 65))
        m.weights = m.weights * np.linspace(0.5, 1.5, 64)
        m.weights /= m.weights.sum()
    elif name == "conductor":
        m = GridMeasure(Domain("disk"), np.linspace(0, 1, 65), np.linspace(1, 3, 64) / 128)
    else:
        m = solve_grid(s.replace(beta=1.0), 256)
    assert entropy(s, m).value <= 1e-9


def test_atom_has_infinite_entropy():
    s = preset("conductor", n=4)
    m = GridMeasure(Domain("disk"), [0.0, 0.5, 1.0, 1.0], [0.0, 0.0, 1.0])
    with pytest.raises(InfiniteEntropy):
        entropy(s, m)


def test_uniform_sphere_trial_bound():
    s = preset("spherical", n=20)
    m = law_on_grid("uniform-sphere", np.linspace(-1, 1, 513))
    assert abs(entropy(s, m).value) < 1e-9
    assert trial_upper_bound(s, m) == pytest.approx((1 - 1 / 20) * 2 * UNIFORM_SPHERE_ENERGY,
                                                    abs=1e-4)


def test_trial_bound_dominates_ti():
    n = 16
    s = preset("gue", n=n)
    r = integrate_ti(s, settings=FAST, seed=0, threads=4)
    trial = law_on_grid("semicircle", np.linspace(-1, 1, 1025))
    assert trial_upper_bound(s, trial) >= r.free_energy_estimate - 2 * r.free_energy_err
    assert r.plugin_lower_bound <= r.free_energy_estimate + 2 * r.free_energy_err
