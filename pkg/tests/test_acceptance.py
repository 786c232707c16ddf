"""End-to-end acceptance checks, one test per criterion.

Each test records a single PASS/FAIL line (printed in the terminal summary)
and then asserts. Run standalone with ``python3 tests/test_acceptance.py``.
"""
import math
import os
import sys
import time

import numpy as np
import pytest

from coulombgas import analysis as an
from coulombgas import equilibrium as eq
from coulombgas.gas import ChainSettings, run, run_chains
from coulombgas.geometry import stereographic
from coulombgas.model import preset
from coulombgas.rmt import sample_eigenvalues
from coulombgas.thermo import integrate_ti, sandwich_check

from oracles import conductor_mean_abs2, ginibre_log_z, gue_log_z

THREADS = max(1, min(8, os.cpu_count() or 1))


def _pool(results):
    return np.concatenate([r.points.ravel() for r in results])


def test_c01_semicircle_matrices(criterion):
    t0 = time.perf_counter()
    rng = np.random.default_rng(101)
    law = eq.closed_form("semicircle")
    out, ok = [], True
    for cls in ("real-symmetric", "complex-hermitian"):
        ev = np.concatenate([sample_eigenvalues(cls, 200, rng).real for _ in range(64)])
        ks = an.ks_distance(ev, law)
        h = 0.05
        d0 = np.mean(np.abs(ev) < h) / (2 * h)
        ok &= ks < 0.05 and abs(d0 - 2 / np.pi) < 0.05
        out.append(f"{cls} KS={ks:.4f} rho(0)={d0:.4f}")
    dt = time.perf_counter() - t0
    ok &= dt < 120
    criterion(1, ok, "; ".join(out) + f"; {dt:.1f}s (< 0.05, |.-2/pi| < 0.05, < 120s)")
    assert ok


def test_c02_semicircle_gas(criterion):
    res = run(preset("gue", n=128), ChainSettings(sweeps=6000, burn_in=1000, thinning=5), seed=202)
    x = res.points.ravel()
    ks = an.ks_distance(x, eq.closed_form("semicircle"))
    m2 = float(np.mean(x ** 2))
    ok = ks < 0.05 and abs(m2 - 0.25) <= 0.01
    criterion(2, ok, f"KS={ks:.4f} (< 0.05); <x^2>={m2:.5f} (0.25 +- 0.01)")
    assert ok


def test_c03_circular_law(criterion):
    rng = np.random.default_rng(303)
    z = np.concatenate([sample_eigenvalues("complex-general", 200, rng) for _ in range(4)])
    err = an.radial_cdf(z).sup_error(eq.closed_form("uniform-disk"))
    mr = an.mean_resultant_length(z)
    ok = err < 0.05 and mr < 0.1
    criterion(3, ok, f"radial sup error={err:.4f} (< 0.05); resultant length={mr:.4f} (< 0.1)")
    assert ok


def test_c04_quaternion_ginibre_gas(criterion):
    res = run_chains(preset("quaternion-ginibre", n=128),
                     ChainSettings(sweeps=4000, burn_in=1000, thinning=10), seed=404,
                     chains=4, threads=THREADS)
    z = _pool(res)
    err = an.radial_cdf(z).sup_error(eq.closed_form("uniform-disk"))
    s = an.strip_fraction(z, 0.02)
    ref = an.uniform_disk_strip(0.02)
    ok = err < 0.07 and s < ref
    criterion(4, ok, f"radial sup error={err:.4f} (< 0.07); |Im|<0.02 fraction={s:.5f} "
                     f"(< uniform {ref:.5f})")
    assert ok


def test_c05_line_solver(criterion):
    spec = preset("gue", n=1).replace(beta=1.0)
    m = eq.solve_grid(spec, 512)
    law = eq.closed_form("semicircle")
    inner = np.abs(m.nodes) < 0.9
    lerr = float(np.max(np.abs(m.density[inner] - law.density(m.nodes[inner]))))
    de = abs(m.energy - eq.SEMICIRCLE_ENERGY)
    ok = m.residual < 1e-3 and lerr < 0.02 and de < 1e-3
    criterion(5, ok, f"residual={m.residual:.2e} (< 1e-3); Linf(|x|<0.9)={lerr:.2e} (< 0.02); "
                     f"|E-E0|={de:.2e} (< 1e-3)")
    assert ok


def test_c06_disk_solver(criterion):
    m = eq.solve_grid(preset("ginibre", n=1).replace(beta=1.0), 512)
    de = abs(m.energy - eq.UNIFORM_DISK_ENERGY)
    c = eq.solve_grid(preset("conductor", n=1), 512)
    outer = float(c.weights[c.edges[:-1] >= 0.98 - 1e-12].sum())
    ok = de < 1e-3 and outer >= 0.95
    criterion(6, ok, f"|E-0.375|={de:.2e} (< 1e-3); conductor outer-2% mass={outer:.4f} (>= 0.95)")
    assert ok


def test_c07_free_energy(criterion):
    cfg = ChainSettings(sweeps=6000, burn_in=1000)
    parts, ok = [], True
    for name, e0, lz in (("gue", eq.SEMICIRCLE_ENERGY, gue_log_z),
                         ("ginibre", eq.UNIFORM_DISK_ENERGY, ginibre_log_z)):
        spec = preset(name, n=64)
        exact = -lz(64) / 64 ** 2 / spec.beta
        r = integrate_ti(spec, settings=cfg, seed=707, threads=THREADS)
        rel = r.free_energy_estimate / spec.beta / e0 - 1
        ok &= abs(rel) < 0.05 and r.concave
        sw = [sandwich_check(preset(name, n=n), cfg, seed=708).passed for n in (16, 32, 64)]
        ok &= all(sw)
        parts.append(f"{name} F/beta={r.free_energy_estimate / spec.beta:.5f} vs E0={e0:.5f} "
                     f"({100 * rel:+.2f}%, need 5%; exact N=64 value {exact:.5f}) concave={r.concave} sandwich={sw}")
    criterion(7, ok, "; ".join(parts))
    assert ok


def test_c08_sphere(criterion):
    res = run_chains(preset("spherical", n=100),
                     ChainSettings(sweeps=3000, burn_in=1000, thinning=20), seed=808,
                     chains=4, threads=THREADS)
    p = np.concatenate([r.points.reshape(-1, 3) for r in res])
    counts, _ = an.sphere_cells(p)
    _, pval = an.uniformity_chi2(counts)
    z = stereographic(p)
    ks = an.radial_cdf(z).sup_error(eq.closed_form("stereographic"))
    f = an.mass_fraction(z, 1.0)
    ok = pval > 0.01 and ks < 0.05 and abs(f - 0.5) <= 0.03
    criterion(8, ok, f"20-cell chi2 p={pval:.3f} (> 0.01); stereographic KS={ks:.4f} (< 0.05); "
                     f"unit-disk mass={f:.4f} (0.5 +- 0.03)")
    assert ok


def test_c09_conductor(criterion):
    res = run_chains(preset("conductor", n=128),
                     ChainSettings(sweeps=6000, burn_in=1000, thinning=10), seed=909,
                     chains=4, threads=THREADS)
    z = _pool(res)
    re = float(np.mean(z.real))
    a2 = float(np.mean(np.abs(z) ** 2))
    outer = 1 - an.mass_fraction(z, 0.95)
    ok = abs(re) <= 0.02 and abs(a2 - 1) <= 0.02
    criterion(9, ok, f"<Re z>={re:+.4f} (0 +- 0.02); <|z|^2>={a2:.4f} (1 +- 0.02); "
                     f"fraction |z|>0.95={outer:.4f}; exact N=128 <|z|^2>="
                     f"{conductor_mean_abs2(128):.4f}")
    assert ok


def test_c10_lln(criterion):
    stats = {}
    for n in (16, 64, 256):
        res = run_chains(preset("gue", n=n), ChainSettings(sweeps=1500, burn_in=500, thinning=5),
                         seed=1000 + n, chains=32, threads=THREADS)
        stats[n] = [an.chain_statistic(r.points, "x2") for r in res]
    rep = an.lln_test(stats, "x2", 0.25)
    ok = rep.variance_decreasing
    v = ", ".join(f"N={n}: {s:.2e}" for n, s in zip(rep.ns, rep.variances))
    criterion(10, ok, f"across-chain variance {v} (decreasing); mean at N=256 "
                      f"{rep.means[-1]:.5f} vs 0.25 (within 2 se: {rep.converged})")
    assert ok


def test_c11_property_suites(criterion):
    import test_equilibrium
    import test_gas
    import test_model
    import test_rmt
    import test_thermo
    checks = {
        "detailed balance": [test_gas.test_metropolis_detailed_balance_two_states],
        "delta energy": [lambda k=k: test_model.test_delta_energy_vs_recompute(k)
                         for k in ("gue", "ginibre", "spherical", "circular", "conductor",
                                   "quaternion-ginibre")],
        "shift invariance": [test_gas.test_shift_leaves_trajectory_unchanged,
                             test_model.test_shift_adds_constant_to_k],
        "eigensolvers": [lambda s=s: test_rmt.test_hermitian_vs_bisection_oracle(s)
                         for s in range(5)]
        + [lambda s=s: test_rmt.test_general_vs_reference_and_trace(s) for s in range(4)],
        "gradient": [lambda k=k: test_equilibrium.test_discrete_gradient_vs_finite_differences(k)
                     for k in ("gue", "ginibre", "quaternion-ginibre", "spherical", "circular",
                               "cauchy-normal")],
        "entropy": [lambda k=k: test_thermo.test_entropy_nonpositive(k)
                    for k in ("gue", "ginibre", "conductor", "spherical")]
        + [test_thermo.test_mu0_has_zero_entropy],
        "N=2 quadrature": [test_gas.test_two_charge_circle_gap_law,
                           test_thermo.test_two_charge_circle_against_quadrature],
    }
    status = {}
    for name, fns in checks.items():
        try:
            for f in fns:
                f()
            status[name] = True
        except AssertionError:
            status[name] = False
    ok = all(status.values())
    criterion(11, ok, ", ".join(f"{k}: {'ok' if v else 'FAIL'}" for k, v in status.items()))
    assert ok


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-v", "-s"] + sys.argv[1:]))
