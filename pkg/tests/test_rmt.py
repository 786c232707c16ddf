import numpy as np
import pytest
from scipy import stats

from coulombgas.errors import NotHermitian
from coulombgas.rmt import (CLASSES, PRESET_CLASS, entry_variances, eigenvalues_general,
                            eigenvalues_hermitian, pair_conjugates, quaternion_embed,
                            sample_eigenvalues, sample_matrix, symplectic_unit)

from oracles import bisection_eigenvalues, match_spectra


def test_preset_parameters():
    assert [(PRESET_CLASS[k].beta, PRESET_CLASS[k].kappa) for k in ("goe", "gue", "gse")] \
        == [(1, 1), (2, 2), (4, 2)]
    assert (PRESET_CLASS["ginibre"].beta, PRESET_CLASS["ginibre"].kappa) == (2, 2)
    assert (PRESET_CLASS["quaternion-ginibre"].beta, PRESET_CLASS["quaternion-ginibre"].kappa) == (2, 1)


def test_real_symmetric_single_entry_variance():
    rng = np.random.default_rng(0)
    x = np.array([sample_matrix("real-symmetric", 1, rng)[0, 0].real for _ in range(100000)])
    assert abs(np.var(x) / 0.5 - 1) < 0.02


def test_real_symmetric_entries_centered():
    rng = np.random.default_rng(1)
    m = np.array([sample_matrix("real-symmetric", 2, rng).real for _ in range(100000)])
    sd = np.sqrt([[0.25, 0.125], [0.125, 0.25]])
    assert np.all(np.abs(m.mean(0)) < 3 * sd / np.sqrt(1e5))


@pytest.mark.parametrize("name", ["complex-hermitian", "complex-general"])
def test_variances_match_table(name):
    rng = np.random.default_rng(2)
    n = 4
    ms = np.array([sample_matrix(name, n, rng) for _ in range(20000)])
    var = entry_variances(CLASSES[name], n)
    off = ms[:, 0, 1]
    key = "off" if name == "complex-hermitian" else "entry"
    assert np.var(off.real) == pytest.approx(var[key], rel=0.05)
    assert np.var(off.imag) == pytest.approx(var[key], rel=0.05)
    if name == "complex-hermitian":
        assert np.var(ms[:, 0, 0].real) == pytest.approx(var["diag"], rel=0.05)


@pytest.mark.parametrize("name", ["real-symmetric", "complex-hermitian", "quaternion-self-dual"])
def test_hermitian_classes_exactly_hermitian(name):
    m = sample_matrix(name, 6, np.random.default_rng(3))
    assert np.max(np.abs(m - m.conj().T)) == 0.0


@pytest.mark.parametrize("name", ["quaternion-self-dual", "quaternion-general"])
def test_quaternion_symmetry(name):
    n = 5
    m = sample_matrix(name, n, np.random.default_rng(4))
    J = symplectic_unit(n)
    assert np.max(np.abs(m - J @ m.conj() @ np.linalg.inv(J))) < 1e-14


def test_quaternion_embed_examples():
    q = np.zeros((4, 3, 3))
    q[0] = np.eye(3)
    assert np.array_equal(quaternion_embed(q), np.eye(6))
    q = np.zeros((4, 2, 2))
    q[0] = np.diag([2.0, -1.0])
    assert np.array_equal(quaternion_embed(q), np.diag([2.0, -1.0, 2.0, -1.0]))
    q = np.random.default_rng(5).standard_normal((4, 2, 2))
    m = quaternion_embed(q)
    J = symplectic_unit(2)
    assert np.max(np.abs(m - J @ m.conj() @ np.linalg.inv(J))) < 1e-14


def test_hermitian_small_examples():
    assert np.allclose(eigenvalues_hermitian(np.eye(3)), [1, 1, 1])
    assert np.allclose(eigenvalues_hermitian([[0, 1], [1, 0]]), [-1, 1], atol=1e-15)
    with pytest.raises(NotHermitian):
        eigenvalues_hermitian([[0, 1], [0, 0]])


@pytest.mark.parametrize("seed", range(5))
def test_hermitian_vs_bisection_oracle(seed):
    rng = np.random.default_rng(seed)
    n = 4 + seed
    g = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    m = g + g.conj().T
    ev = eigenvalues_hermitian(m)
    assert np.all(np.diff(ev) >= 0)
    assert np.max(np.abs(ev - bisection_eigenvalues(m))) < 1e-8
    assert abs(ev.sum() - np.trace(m).real) < 1e-9 * np.linalg.norm(m)


def test_general_examples():
    assert match_spectra(eigenvalues_general(np.diag([1, 2j])), [1, 2j]) < 1e-12
    assert np.max(np.abs(eigenvalues_general([[0, 1], [0, 0]]))) < 1e-12
    assert match_spectra(eigenvalues_general([[0, 1], [1, 0]]), [-1, 1]) < 1e-12


@pytest.mark.parametrize("seed", range(4))
def test_general_vs_reference_and_trace(seed):
    rng = np.random.default_rng(10 + seed)
    n = 30
    m = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    ev = eigenvalues_general(m)
    assert abs(ev.sum() - np.trace(m)) < 1e-7 * np.linalg.norm(m)
    # characteristic polynomial oracle: det(m - lambda) vanishes relative to its scale
    assert match_spectra(ev, np.linalg.eigvals(m)) < 1e-8


def test_quaternion_general_conjugate_closure():
    rng = np.random.default_rng(6)
    m = sample_matrix("quaternion-general", 20, rng)
    ev = eigenvalues_general(m)
    reps, resid = pair_conjugates(ev)
    assert resid < 1e-6
    assert len(reps) == 20
    assert len(sample_eigenvalues("quaternion-general", 20, rng)) == 20


def test_self_dual_degenerate():
    ev = sample_eigenvalues("quaternion-self-dual", 10, np.random.default_rng(7))
    assert len(ev) == 10 and np.all(ev.imag == 0)


def test_orthogonal_invariance_in_distribution():
    rng = np.random.default_rng(8)
    n = 20
    a, b = [], []
    for _ in range(100):
        m = sample_matrix("real-symmetric", n, rng)
        q, _ = np.linalg.qr(rng.standard_normal((n, n)))
        a.append(eigenvalues_hermitian(m))
        b.append(eigenvalues_hermitian(q.T @ sample_matrix("real-symmetric", n, rng) @ q))
    assert stats.ks_2samp(np.concatenate(a), np.concatenate(b)).pvalue > 0.05
