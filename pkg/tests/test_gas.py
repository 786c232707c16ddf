import math

import numpy as np
import pytest
from scipy import stats

from coulombgas import _kernels as K
from coulombgas.errors import BadSettings
from coulombgas.gas import (ChainSettings, adapt_step, advance, check_energy, init_chain,
                            load_checkpoint, run, run_chains, save_checkpoint, sweep)
from coulombgas.model import preset, total_energy
from coulombgas.thermo import batch_means

from oracles import conductor_mean_abs2


def test_settings_validation():
    with pytest.raises(BadSettings):
        ChainSettings(sweeps=10, burn_in=20).validate()
    with pytest.raises(BadSettings):
        ChainSettings(thinning=0).validate()


def test_disk_initial_points_inside():
    st = init_chain(preset("conductor", n=50), seed=3)
    assert np.all(np.abs(st.points) <= 1)


def test_single_particle_variance():
    s = preset("gue", n=1)
    res = run(s, ChainSettings(sweeps=101000, burn_in=1000), seed=11)
    x = res.points[:, 0]
    assert len(x) == 100000
    assert abs(np.var(x) / 0.25 - 1) < 0.02


def test_same_seed_same_trajectory():
    s = preset("ginibre", n=10)
    cfg = ChainSettings(sweeps=300, burn_in=100)
    a, b = run(s, cfg, seed=5), run(s, cfg, seed=5)
    assert np.array_equal(a.points, b.points)
    assert not np.array_equal(a.points, run(s, cfg, seed=6).points)


def test_shift_leaves_trajectory_unchanged():
    s = preset("gue", n=12)
    cfg = ChainSettings(sweeps=400, burn_in=100)
    a = run(s, cfg, seed=9)
    b = run(s.replace(shift=3.7), cfg, seed=9)
    assert np.array_equal(a.points, b.points)
    assert np.allclose(b.k_values - a.k_values, 12 * 11 * 3.7 / 2)


def test_metropolis_detailed_balance_two_states():
    # one charge hopping between two sites; the sweep kernel proposes the other site
    a, b = 0.2, 0.9
    beta = 2.0
    kern, reg, pot, c = preset("gue", n=1).codes
    rng = np.random.default_rng(0)
    xyz = np.zeros((1, 3))
    xyz[0, 0] = a
    acc = np.zeros(1, dtype=np.bool_)
    inside = np.ones(1, dtype=np.bool_)
    steps = 200000
    occ = {a: 0, b: 0}
    moves = {a: 0, b: 0}
    logu = np.log(rng.random(steps))
    for t in range(steps):
        here = a if xyz[0, 0] == a else b
        cand = np.array([[b if here == a else a, 0.0, 0.0]])
        occ[here] += 1
        K.sweep(xyz, cand, inside, logu[t:t + 1], kern, reg, pot, c, beta, 1.0, acc)
        moves[here] += int(acc[0])
    pi = {x: math.exp(-beta * x * x) for x in (a, b)}
    z = pi[a] + pi[b]
    p_ab, p_ba = moves[a] / occ[a], moves[b] / occ[b]
    assert p_ab == pytest.approx(min(1, pi[b] / pi[a]), abs=0.01)
    assert p_ba == 1.0
    flux_ab = pi[a] / z * p_ab
    flux_ba = pi[b] / z * p_ba
    assert flux_ab == pytest.approx(flux_ba, rel=0.02)
    assert occ[a] / steps == pytest.approx(pi[a] / z, abs=0.01)


def test_infinite_delta_rejected_zero_delta_accepted():
    s = preset("gue", n=2)
    kern, reg, pot, c = s.codes
    acc = np.zeros(2, dtype=np.bool_)
    xyz = np.array([[0.1, 0, 0], [0.5, 0, 0]])
    # particle 0 onto particle 1 (coincidence), particle 1 onto its mirror image (delta 0)
    cand = np.array([[0.5, 0, 0], [0.5, 0, 0]])
    K.sweep(xyz, cand, np.ones(2, dtype=np.bool_), np.array([-1e-300, -1e-300]),
            kern, reg, pot, c, 2.0, 1.0, acc)
    assert not acc[0] and acc[1]


def test_two_charge_circle_gap_law():
    s = preset("circular", n=2)
    res = run(s, ChainSettings(sweeps=501000, burn_in=1000, thinning=5), seed=1)
    gap = np.mod(res.points[:, 0] - res.points[:, 1], 2 * np.pi)
    assert len(gap) == 100000
    ks = stats.kstest(gap, lambda t: (t - np.sin(t)) / (2 * np.pi)).statistic
    assert ks < 0.02


def test_adapt_step_rules():
    st = init_chain(preset("gue", n=4), ChainSettings(step=0.1))
    st.window_accepted, st.window_proposed = 10, 10
    adapt_step(st, 0.35)
    assert st.step > 0.1
    st.step = 0.1
    st.window_accepted, st.window_proposed = 0, 10
    adapt_step(st, 0.35)
    assert st.step < 0.1
    st.step = 0.1
    st.window_accepted, st.window_proposed = 35, 100
    adapt_step(st, 0.35)
    assert st.step == pytest.approx(0.1, rel=1e-15)


def test_burn_in_only_gives_empty_sample():
    res = run(preset("gue", n=8), ChainSettings(sweeps=200, burn_in=200), seed=0)
    assert len(res) == 0 and res.points.shape == (0, 8)
    assert math.isfinite(res.step)


def test_cached_energy_consistent():
    s = preset("quaternion-ginibre", n=16)
    st = init_chain(s, seed=2)
    for _ in range(300):
        sweep(s, st)
    assert st.energy == pytest.approx(total_energy(s, st.points), rel=1e-8)
    assert check_energy(s, st) < 1e-8


def test_checkpoint_round_trip(tmp_path):
    s = preset("spherical", n=10)
    cfg = ChainSettings(sweeps=300, burn_in=50)
    whole = init_chain(s, cfg, seed=4)
    advance(s, whole, cfg)
    part = init_chain(s, cfg, seed=4)
    advance(s, part, cfg, until=120)
    path = tmp_path / "ck.json"
    save_checkpoint(path, part)
    back = load_checkpoint(path, s)[0]
    advance(s, back, cfg)
    assert np.array_equal(whole.points, back.points)
    assert back.sweep_count == 300


def test_chains_deterministic_across_threads():
    s = preset("gue", n=8)
    cfg = ChainSettings(sweeps=200, burn_in=50)
    a = run_chains(s, cfg, seed=1, chains=4, threads=1)
    b = run_chains(s, cfg, seed=1, chains=4, threads=4)
    assert all(np.array_equal(x.points, y.points) for x, y in zip(a, b))


def test_conductor_second_moment_exact():
    n = 32
    res = run(preset("conductor", n=n), ChainSettings(sweeps=22000, burn_in=2000), seed=3)
    m2 = np.mean(np.abs(res.points) ** 2, axis=1)
    mean, se = batch_means(m2)
    assert abs(mean - conductor_mean_abs2(n)) < 4 * se + 1e-3


def test_no_drift_from_semicircle_start():
    from coulombgas.equilibrium import closed_form
    s = preset("gue", n=32)
    cfg = ChainSettings(sweeps=4000, burn_in=0, step=0.15)
    st = init_chain(s, cfg, seed=8)
    st.points[:] = np.sort(closed_form("semicircle").sample(np.random.default_rng(8), 32))
    st.xyz[:, 0] = st.points
    check_energy(s, st, tol=np.inf)
    trace = np.asarray(advance(s, st, cfg, keep=False)[4])
    y = trace.reshape(40, -1).mean(1)
    fit = stats.linregress(np.arange(40), y)
    assert fit.pvalue > 0.05
