"""Statistics of sampled configurations: histograms, linear statistics, law of
large numbers checks, distribution distances and planar/spherical summaries.

Sample arrays follow the native layouts of :mod:`coulombgas.geometry`; planar
statistics act on complex numbers (circle points via e^{i theta}, sphere
points via stereographic projection, see :func:`geometry.to_complex`).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import stats

from .errors import InsufficientChains
from .geometry import TWO_PI, Domain, to_complex


# ---------------------------------------------------------------------------
# histograms

@dataclass
class DensityEstimate:
    """Binned empirical measure; ``density`` integrates to 1 against ``measure``."""
    domain: Domain
    scheme: str                 # "line", "radial", "angle", "sphere-cells"
    edges: np.ndarray
    counts: np.ndarray
    density: np.ndarray
    measure: np.ndarray         # length/area of every bin
    samples: int

    @property
    def centers(self) -> np.ndarray:
        return 0.5 * (self.edges[:-1] + self.edges[1:])

    @property
    def widths(self) -> np.ndarray:
        return np.diff(self.edges)

    @property
    def total(self) -> float:
        return float(np.sum(self.density * self.measure))


def default_bins(m: int) -> int:
    return max(1, math.ceil(math.sqrt(m)))


def _finish(domain, scheme, edges, counts, measure):
    m = int(counts.sum())
    with np.errstate(divide="ignore", invalid="ignore"):
        dens = np.where(measure > 0, counts / (m * measure), 0.0) if m else np.zeros(counts.size)
    return DensityEstimate(domain, scheme, edges, counts, dens, measure, m)


def histogram(samples, bins: int | None = None, range=None,
              domain: Domain | None = None) -> DensityEstimate:
    """1-D histogram of real samples (line) or angles (circle)."""
    x = np.asarray(samples, dtype=float).ravel()
    domain = domain or Domain("line")
    if domain.kind == "circle" and range is None:
        range = (0.0, TWO_PI)
    if range is None:
        range = (float(x.min()), float(x.max())) if x.size else (0.0, 1.0)
        if range[0] == range[1]:
            range = (range[0] - 0.5, range[1] + 0.5)
    counts, edges = np.histogram(x, bins=bins or default_bins(x.size), range=range)
    scheme = "angle" if domain.kind == "circle" else "line"
    return _finish(domain, scheme, edges, counts, np.diff(edges))


def radial_histogram(samples, bins: int | None = None, rmax: float | None = None,
                     domain: Domain | None = None) -> DensityEstimate:
    """Histogram of |z| with densities per unit area (annuli)."""
    r = np.abs(np.asarray(samples)).ravel()
    if rmax is None:
        rmax = float(r.max()) if r.size and r.max() > 0 else 1.0
    counts, edges = np.histogram(r, bins=bins or default_bins(r.size), range=(0.0, rmax))
    return _finish(domain or Domain("plane"), "radial", edges, counts,
                   np.pi * np.diff(edges ** 2))


def sphere_cells(points, bands: int = 5, sectors: int = 4):
    """Counts in ``bands * sectors`` equal-area cells (equal-height z bands cut
    into azimuthal sectors). Returns (counts, cell index of every point)."""
    p = np.asarray(points, dtype=float).reshape(-1, 3)
    zb = np.clip(((p[:, 2] + 1) / 2 * bands).astype(int), 0, bands - 1)
    phi = np.mod(np.arctan2(p[:, 1], p[:, 0]), TWO_PI)
    sb = np.clip((phi / TWO_PI * sectors).astype(int), 0, sectors - 1)
    cell = zb * sectors + sb
    return np.bincount(cell, minlength=bands * sectors), cell


def sphere_histogram(points, bands: int = 5, sectors: int = 4) -> DensityEstimate:
    counts, _ = sphere_cells(points, bands, sectors)
    k = bands * sectors
    return _finish(Domain("sphere"), "sphere-cells", np.arange(k + 1, dtype=float), counts,
                   np.full(k, 4 * np.pi / k))


def uniformity_chi2(counts):
    """Pearson chi-square test of equal cell probabilities: (statistic, p)."""
    res = stats.chisquare(np.asarray(counts, dtype=float))
    return float(res.statistic), float(res.pvalue)


# ---------------------------------------------------------------------------
# test functions and linear statistics

@dataclass(frozen=True)
class TestFunction:
    name: str
    f: Callable = field(compare=False)

    def __call__(self, z):
        return self.f(z)


def _shell(a, b, width):
    def f(z):
        r = np.abs(z)
        # smoothed indicator of a <= r <= b
        return 0.5 * (np.tanh((r - a) / width) - np.tanh((r - b) / width))
    return f


def test_function(name: str) -> TestFunction:
    """Library: one, re, im, x, x2, abs, abs2, cheb:<k>, shell:<a>:<b>[:<width>].

    Functions take complex coordinates; ``x`` and ``x2`` are Re z and (Re z)^2
    (on the line these are lambda and lambda^2).
    """
    key = name.strip().lower()
    table = {
        "one": lambda z: np.ones(np.shape(z)),
        "re": lambda z: np.real(z),
        "im": lambda z: np.imag(z),
        "x": lambda z: np.real(z),
        "x2": lambda z: np.real(z) ** 2,
        "abs": lambda z: np.abs(z),
        "abs2": lambda z: np.abs(z) ** 2,
    }
    if key in table:
        return TestFunction(key, table[key])
    if key.startswith("const:"):
        c = float(key.split(":")[1])
        return TestFunction(key, lambda z: np.full(np.shape(z), c))
    if key.startswith("cheb:"):
        k = int(key.split(":")[1])
        coef = np.zeros(k + 1)
        coef[k] = 1
        return TestFunction(key, lambda z: np.polynomial.chebyshev.chebval(np.real(z), coef))
    if key.startswith("shell:"):
        parts = [float(t) for t in key.split(":")[1:]]
        a, b = parts[:2]
        width = parts[2] if len(parts) > 2 else 0.02
        return TestFunction(key, _shell(a, b, width))
    raise KeyError(f"unknown test function {name!r}")


def _as_function(f) -> Callable:
    return test_function(f) if isinstance(f, str) else f


def linear_statistic(config, f, domain: Domain | None = None) -> float:
    """<f>_N = mean of f over the particles of one configuration.

    ``config`` is a ParticleConfig or an array of native points; without a
    domain, real or complex arrays are used as they are.
    """
    pts = getattr(config, "points", config)
    f = _as_function(f)
    z = to_complex(domain, pts) if domain is not None else np.asarray(pts)
    return float(np.mean(f(z)))


def chain_statistic(points, f, domain: Domain | None = None) -> float:
    """Average of <f>_N over the kept samples of one chain, shape (S, N)."""
    pts = np.asarray(points)
    f = _as_function(f)
    z = to_complex(domain, pts) if domain is not None else pts
    return float(np.mean(f(z)))


@dataclass
class LLNReport:
    ns: list
    means: np.ndarray
    variances: np.ndarray
    stderrs: np.ndarray
    target: float
    converged: bool
    variance_decreasing: bool

    @property
    def passed(self) -> bool:
        return self.converged and self.variance_decreasing


def lln_test(chains_by_n: dict, f, target: float, domain: Domain | None = None,
             min_chains: int = 16) -> LLNReport:
    """Law of large numbers check across N.

    ``chains_by_n`` maps N to a list of per-chain samples: either arrays of
    points (one configuration or a stack of them per chain) or already
    computed scalars <f>_N. Passes if the mean at the largest N is within two
    standard errors of ``target`` and the across-chain variance does not
    increase with N.
    """
    if len(chains_by_n) < 3:
        raise InsufficientChains(f"need >= 3 values of N, got {len(chains_by_n)}")
    f = _as_function(f)
    ns = sorted(chains_by_n)
    means, vars_, ses = [], [], []
    for n in ns:
        chains = chains_by_n[n]
        if len(chains) < min_chains:
            raise InsufficientChains(f"N={n}: {len(chains)} chains < {min_chains}")
        vals = np.array([c if np.ndim(c) == 0 and not isinstance(c, complex)
                         else chain_statistic(c, f, domain) for c in chains], dtype=float)
        means.append(vals.mean())
        v = vals.var(ddof=1)
        vars_.append(v)
        ses.append(math.sqrt(v / vals.size))
    means, vars_, ses = map(np.asarray, (means, vars_, ses))
    tol = 2 * ses[-1] + 1e-12 * max(1.0, abs(target))
    conv = bool(abs(means[-1] - target) <= tol)
    dec = bool(np.all(np.diff(vars_) <= 1e-300))
    return LLNReport(ns, means, vars_, ses, float(target), conv, dec)


# ---------------------------------------------------------------------------
# distances between distributions

def ks_distance(samples, cdf) -> float:
    """sup |empirical CDF - cdf| (``cdf`` callable or a LimitLaw)."""
    x = np.asarray(samples, dtype=float).ravel()
    fn = cdf.cdf if hasattr(cdf, "cdf") else cdf
    return float(stats.kstest(x, fn).statistic)


def _gl01(k=8):
    gx, gw = np.polynomial.legendre.leggauss(k)
    return 0.5 * (gx + 1), 0.5 * gw


def wasserstein1_1d(samples, law) -> float:
    """W1 between the empirical law of ``samples`` and ``law``.

    ``law`` is another sample array, a callable quantile function, or an
    object with ``ppf``. Uses the quantile (order statistics) coupling
    W1 = int_0^1 |F^-1(u) - G^-1(u)| du.
    """
    x = np.sort(np.asarray(samples, dtype=float).ravel())
    m = x.size
    if isinstance(law, (np.ndarray, list, tuple)):
        y = np.asarray(law, dtype=float).ravel()
        if y.size == m:
            return float(np.mean(np.abs(x - np.sort(y))))
        return float(stats.wasserstein_distance(x, y))
    ppf = law.ppf if hasattr(law, "ppf") else law
    u, w = _gl01()
    grid = (np.arange(m)[:, None] + u[None, :]) / m
    q = ppf(grid.ravel()).reshape(grid.shape)
    return float(np.sum(np.abs(x[:, None] - q) * w[None, :]) / m)


# ---------------------------------------------------------------------------
# planar and spherical summaries

@dataclass
class RadialCDF:
    r: np.ndarray       # sorted radii
    cdf: np.ndarray     # empirical CDF just after each radius

    def __call__(self, t):
        return np.searchsorted(self.r, t, side="right") / max(self.r.size, 1)

    def sup_error(self, law_cdf) -> float:
        """sup_t |F_emp(t) - law_cdf(t)|."""
        fn = law_cdf.radial_cdf if hasattr(law_cdf, "radial_cdf") else law_cdf
        return float(stats.kstest(self.r, fn).statistic)


def radial_cdf(samples) -> RadialCDF:
    r = np.sort(np.abs(np.asarray(samples)).ravel())
    return RadialCDF(r, np.arange(1, r.size + 1) / max(r.size, 1))


def mean_resultant_length(samples) -> float:
    """|mean of z/|z||; near 0 for rotation-invariant samples."""
    z = np.asarray(samples, dtype=complex).ravel()
    z = z[z != 0]
    return float(np.abs(np.mean(z / np.abs(z)))) if z.size else 0.0


def mass_fraction(samples, r: float) -> float:
    """Fraction of points with |z| < r."""
    a = np.abs(np.asarray(samples)).ravel()
    return float(np.mean(a < r))


def strip_fraction(samples, delta: float) -> float:
    """Fraction of points with |Im z| < delta."""
    return float(np.mean(np.abs(np.imag(np.asarray(samples))).ravel() < delta))


def uniform_disk_strip(delta: float) -> float:
    """Uniform-disk probability of |Im z| < delta (delta <= 1)."""
    d = min(max(delta, 0.0), 1.0)
    return 2 * (d * math.sqrt(1 - d * d) + math.asin(d)) / math.pi


def two_point_diag(samples, radius: float) -> float:
    """Fraction of ordered particle pairs with both ends in |z| <= radius,
    averaged over configurations (rows of ``samples``)."""
    a = np.abs(np.asarray(samples))
    if a.ndim == 1:
        a = a[None, :]
    n = a.shape[1]
    if n < 2:
        raise ValueError("pair statistics need N >= 2")
    k = np.sum(a <= radius, axis=1).astype(float)
    return float(np.mean(k * (k - 1) / (n * (n - 1))))


def plot_table(est: DensityEstimate, law=None):
    """Rows (x, density, law_density) for a density estimate.

    1-D estimates use the bin centres; radial ones compare densities per unit
    area at the annulus centres.
    """
    x = est.centers
    ref = np.full(x.shape, np.nan)
    if law is not None:
        if est.scheme == "line":
            ref = law.density(x)
        elif est.scheme == "radial":
            # average law density over each annulus
            ref = np.diff(law.radial_cdf(est.edges)) / est.measure
        elif est.scheme == "sphere-cells":
            ref = np.full(x.shape, 1 / (4 * np.pi))
        elif est.scheme == "angle":
            ref = np.full(x.shape, 1 / TWO_PI)
    return np.column_stack([x, est.density, ref])


# keep pytest from collecting these when imported into test modules
TestFunction.__test__ = False
test_function.__test__ = False
