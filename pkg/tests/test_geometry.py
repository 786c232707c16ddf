import numpy as np
import pytest

from coulombgas.errors import DomainMismatch, UnboundedDomain
from coulombgas.geometry import (Domain, candidates, chordal_distance, contains,
                                 inverse_stereographic, propose, stereographic,
                                 uniform_sample)


def test_parse_and_str():
    assert Domain.parse("disk:2") == Domain("disk", 2.0)
    assert Domain.parse("Sphere").kind == "sphere"
    assert str(Domain("disk", 1.0)) == "disk:1"
    with pytest.raises(ValueError):
        Domain("torus")


def test_uniform_disk_inner_fraction():
    rng = np.random.default_rng(1)
    z = uniform_sample(Domain("disk"), rng, 200000)
    assert abs(np.mean(np.abs(z) < 0.5) - 0.25) < 0.01


def test_uniform_circle_mean_cos():
    rng = np.random.default_rng(2)
    t = uniform_sample(Domain("circle"), rng, 200000)
    assert abs(np.mean(np.cos(t))) < 0.01
    assert np.all((t >= 0) & (t < 2 * np.pi))


def test_uniform_sphere_on_surface_and_centered():
    rng = np.random.default_rng(3)
    p = uniform_sample(Domain("sphere"), rng, 100000)
    assert np.allclose(np.linalg.norm(p, axis=1), 1, atol=1e-12)
    assert np.all(np.abs(p.mean(0)) < 0.01)


@pytest.mark.parametrize("kind", ["line", "plane"])
def test_uniform_unbounded_raises(kind):
    with pytest.raises(UnboundedDomain):
        uniform_sample(Domain(kind), np.random.default_rng(0), 3)


def test_zero_step_returns_start():
    rng = np.random.default_rng(0)
    for d, x in [(Domain("line"), 0.3), (Domain("plane"), 0.1 + 0.2j),
                 (Domain("circle"), 1.0)]:
        y = propose(d, x, 0.0, rng, min_step=0.0)
        assert y == x


def test_sphere_proposal_stays_on_sphere():
    rng = np.random.default_rng(4)
    p = uniform_sample(Domain("sphere"), rng, 1000)
    q = propose(Domain("sphere"), p, 0.7, rng)
    assert np.allclose(np.linalg.norm(q, axis=1), 1, atol=1e-12)


def test_circle_wraps():
    rng = np.random.default_rng(5)
    x = np.full(10000, 6.2)
    y = propose(Domain("circle"), x, 1.0, rng)
    assert np.all(contains(Domain("circle"), y))


def test_disk_outside_candidate_is_null_move():
    rng = np.random.default_rng(6)
    d = Domain("disk")
    x = np.full(5000, 0.99 + 0j)
    cand, inside = candidates(d, x, 0.5, rng)
    y = propose(d, x, 0.5, np.random.default_rng(6))
    assert np.all(np.abs(y) <= 1)
    assert np.all(y[~inside] == x[~inside])
    assert 0 < np.mean(inside) < 1


def test_proposal_symmetric_on_line():
    # increments of the random walk are symmetric in distribution
    rng = np.random.default_rng(7)
    y = propose(Domain("line"), np.zeros(200000), 1.0, rng)
    assert abs(np.mean(y)) < 0.01
    assert abs(np.mean(y ** 3)) < 0.05


def test_chordal_examples():
    n, s = np.array([0, 0, 1.0]), np.array([0, 0, -1.0])
    e = np.array([1.0, 0, 0])
    assert chordal_distance(n, s) == pytest.approx(2)
    assert chordal_distance(n, n) == 0
    assert chordal_distance(n, e) == pytest.approx(np.sqrt(2))


def test_chordal_rejects_off_sphere():
    with pytest.raises(DomainMismatch):
        chordal_distance([0, 0, 2.0], [0, 0, 1.0])
    with pytest.raises(DomainMismatch):
        chordal_distance([0, 0, 1.0], [0, 0, 1.0], Domain("plane"))


def test_stereographic_round_trip():
    rng = np.random.default_rng(8)
    z = rng.standard_normal(1000) + 1j * rng.standard_normal(1000)
    p = inverse_stereographic(z)
    assert np.allclose(np.linalg.norm(p, axis=-1), 1)
    assert np.allclose(stereographic(p), z, atol=1e-10)
