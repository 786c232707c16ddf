"""Free energy of the gas by thermodynamic integration in the coupling alpha.

With Z(alpha) = E_{mu0^N}[exp(-alpha K)] (mu0 the normalized one-particle law
exp(-U)), define

    Gamma_N(alpha) = 2 / (N (N - 1)) * (-ln Z(alpha)).

Then Gamma_N(0) = 0, Gamma_N'(alpha) is the mean pair value of W in the gas
at coupling alpha, Gamma_N is concave, and

    -N^-2 ln Z(1) = (1 - 1/N) / 2 * Gamma_N(1).

Everything here is beta-scaled (W = beta G + v(x) + v(y) + shift).
"""
from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from .equilibrium import (GridMeasure, _GL_W, _GL_X, energy_of_measure, kernel_matrix,
                          potential_averages)
from .errors import BadSettings, InfiniteEntropy, NonMonotoneWarning
from .gas import ChainSettings, chain_seeds, run, thread_budget
from .geometry import TWO_PI, Domain, embed, uniform_sample
from .model import EnsembleSpec, w_minimum

N_BATCHES = 32


def default_alphas(points: int = 17) -> np.ndarray:
    """Chebyshev-type grid on [0, 1], dense near alpha = 0."""
    k = np.arange(points)
    a = 1.0 - np.cos(0.5 * np.pi * k / (points - 1))
    a[0], a[-1] = 0.0, 1.0
    return a


def auto_shift(spec: EnsembleSpec) -> float:
    """A constant making W positive (0 if the sampled minimum already is)."""
    wmin = w_minimum(spec.replace(shift=0.0))
    return 0.0 if wmin > 0 else 1.0 - wmin


def batch_means(x, batches: int = N_BATCHES):
    """Mean and batch-means standard error of a correlated series."""
    x = np.asarray(x, dtype=float)
    if x.size < 2 * batches:
        batches = max(2, x.size // 2)
    if x.size < 4:
        raise BadSettings(f"need at least 4 samples for error bars, got {x.size}")
    m = x.size // batches
    bm = x[x.size - m * batches:].reshape(batches, m).mean(axis=1)
    return float(x.mean()), float(bm.std(ddof=1) / math.sqrt(batches))


# ---------------------------------------------------------------------------
# the one-particle reference law mu0 ~ exp(-U)

def _radial_U(spec: EnsembleSpec):
    """Angle-averaged U as a function of the radius, or None if unavailable."""
    b = spec.beta

    def vr(r):
        r = np.asarray(r, dtype=float)
        return spec.potential(np.stack([r, np.zeros_like(r), np.zeros_like(r)], -1))

    reg = spec.regular.kind
    if reg == "zero":
        return lambda r: b * vr(r)
    if reg == "cauchy":
        return lambda r: b * (0.5 * np.log1p(np.asarray(r) ** 2) + vr(r))
    # -ln(2 r |sin t|) averages to -ln r over the angle
    with np.errstate(divide="ignore"):
        return lambda r: b * (-np.log(np.asarray(r, dtype=float)) + vr(r))


def _line_U(spec: EnsembleSpec):
    def u(x):
        x = np.asarray(x, dtype=float)
        return spec.U(np.stack([x, np.zeros_like(x), np.zeros_like(x)], -1))
    return u


def log_z0(spec: EnsembleSpec) -> float:
    """ln of the one-particle normalization  int exp(-U) over the domain."""
    d = spec.domain
    if d.kind == "line":
        u = _line_U(spec)
        umin = float(u(0.0))
        val = integrate.quad(lambda x: math.exp(umin - float(u(x))), -np.inf, np.inf, limit=200)[0]
        return math.log(val) - umin
    if d.kind == "circle" and spec.potential.kind == "zero":
        return math.log(TWO_PI)
    if d.kind == "sphere":
        return math.log(4 * np.pi)
    if d.kind == "circle":
        u = lambda t: float(spec.U(embed(d, np.array(t))))
        return math.log(integrate.quad(lambda t: math.exp(-u(t)), 0, TWO_PI, limit=200)[0])
    if spec.regular.kind == "halfplane":
        # exp(-U) = (2|y|)^beta exp(-beta V); V must be quadratic to separate
        if spec.potential.kind != "quadratic":
            raise BadSettings("half-plane regular part needs a quadratic potential")
        b, c = spec.beta, spec.potential.c
        fx = integrate.quad(lambda x: math.exp(-b * c * x * x), -np.inf, np.inf)[0]
        fy = 2 * integrate.quad(lambda y: (2 * y) ** b * math.exp(-b * c * y * y), 0, np.inf)[0]
        return math.log(fx * fy)
    u = _radial_U(spec)
    rmax = d.radius if d.kind == "disk" else np.inf
    val = integrate.quad(lambda r: TWO_PI * r * math.exp(-float(u(r))), 0, rmax, limit=400)[0]
    return math.log(val)


def sample_mu0(spec: EnsembleSpec, rng: np.random.Generator, size: int) -> np.ndarray:
    """Exact draws from mu0 ~ exp(-U) (native points)."""
    d, b = spec.domain, spec.beta
    pot, reg = spec.potential, spec.regular.kind
    if d.bounded and pot.kind == "zero" and reg == "zero":
        return uniform_sample(d, rng, size)
    if pot.kind == "quadratic" and d.kind in ("line", "plane"):
        s = math.sqrt(1.0 / (2 * b * pot.c))
        if d.kind == "line" and reg == "zero":
            return s * rng.standard_normal(size)
        if reg == "zero":
            return s * (rng.standard_normal(size) + 1j * rng.standard_normal(size))
        if reg == "halfplane":
            y = np.sqrt(rng.gamma((b + 1) / 2, 1.0 / (b * pot.c), size))
            y *= rng.choice([-1.0, 1.0], size)
            return s * rng.standard_normal(size) + 1j * y
    if d.kind == "plane" and pot.kind == "cauchylog" and reg == "cauchy":
        if b <= 1:
            raise BadSettings("mu0 ~ (1+|z|^2)^-beta is normalizable only for beta > 1")
        t = rng.uniform(size=size) ** (-1.0 / (b - 1)) - 1.0
        return np.sqrt(t) * np.exp(1j * rng.uniform(0, TWO_PI, size))
    raise BadSettings(f"no exact mu0 sampler for {spec.name or spec}")


def _radial_edges(rmax: float, m: int) -> np.ndarray:
    if rmax <= 8:
        return np.linspace(0, rmax, m + 1)
    inner = np.linspace(0, 4, m // 2 + 1)
    return np.concatenate([inner, np.geomspace(4, rmax, m - m // 2 + 1)[1:]])


def mu0_grid(spec: EnsembleSpec, m: int = 2000, depth: float = 60.0) -> GridMeasure:
    """Cell discretization of mu0 (line, or rotation-invariant planar U)."""
    d = spec.domain
    if d.kind == "sphere" or (d.kind == "circle" and spec.potential.kind == "zero"):
        lo, hi = (-1.0, 1.0) if d.kind == "sphere" else (0.0, TWO_PI)
        return GridMeasure(d, np.linspace(lo, hi, m + 1), np.full(m, 1.0 / m))
    if d.kind == "line":
        u = _line_U(spec)
        umin = float(u(0.0))
        L = 1.0
        while float(min(u(L), u(-L))) - umin < depth:
            L *= 1.5
        edges = np.linspace(-L, L, m + 1)
        x = 0.5 * (edges[:-1] + edges[1:])[:, None] + 0.5 * np.diff(edges)[:, None] * _GL_X
        w = np.sum(_GL_W * np.exp(umin - u(x)), 1) * np.diff(edges)
    elif d.planar and spec.regular.kind != "halfplane":
        u = _radial_U(spec)
        u0 = float(u(0.0))
        if d.kind == "disk":
            R = d.radius
        else:
            R = 1.0
            while float(u(R)) - u0 - 2 * math.log(R) < depth:
                R *= 1.5
        edges = _radial_edges(R, m)
        x = 0.5 * (edges[:-1] + edges[1:])[:, None] + 0.5 * np.diff(edges)[:, None] * _GL_X
        w = np.sum(_GL_W * x * np.exp(u0 - u(x)), 1) * np.diff(edges)
    else:
        raise BadSettings(f"mu0 on {d} with {spec.regular.kind} regular part is not gridded")
    return GridMeasure(d, edges, w / w.sum())


def product_mean_W(spec: EnsembleSpec, method: str = "auto", resolution: int = 2000,
                   samples: int = 400_000, seed: int = 0):
    """mu0 x mu0 (W) and an error estimate.

    ``quadrature``: cell-averaged kernel on a grid discretization of mu0 (the
    log singularity handled exactly); the error is the change from halving the
    resolution. ``montecarlo``: independent exact pairs from mu0.
    """
    gridable = spec.domain.kind in ("line", "sphere") or (
        spec.domain.kind == "circle" and spec.potential.kind == "zero") or (
        spec.domain.planar and spec.regular.kind != "halfplane")
    if method == "auto":
        method = "quadrature" if gridable else "montecarlo"
    if method == "quadrature":
        def at(m):
            g = mu0_grid(spec, m)
            gk = kernel_matrix(spec, g.edges)
            va = potential_averages(spec, g.edges)
            w = g.weights
            return spec.beta * (w @ gk @ w + 2 * w @ va) + spec.shift
        fine = at(resolution)
        return float(fine), float(abs(fine - at(resolution // 2)))
    rng = np.random.default_rng(seed)
    a = embed(spec.domain, sample_mu0(spec, rng, samples))
    b = embed(spec.domain, sample_mu0(spec, rng, samples))
    vals = spec.W(a, b)
    return float(vals.mean()), float(vals.std(ddof=1) / math.sqrt(samples))


# ---------------------------------------------------------------------------
# thermodynamic integration

def mean_pair_W(spec: EnsembleSpec, alpha: float, settings: ChainSettings | None = None,
                seed=0, chains: int = 1, batches: int = N_BATCHES):
    """Gamma_N'(alpha): chain average of 2 K / (N (N - 1)) with a batch-means
    standard error (pooled over ``chains`` independent chains)."""
    n = spec.n
    if n < 2:
        raise BadSettings("pair averages need N >= 2")
    settings = settings or ChainSettings()
    seeds = chain_seeds(seed, chains) if not isinstance(seed, np.random.SeedSequence) else [seed]
    means, errs = [], []
    for s in seeds:
        res = run(spec, settings, s, alpha)
        y = 2.0 * res.k_values / (n * (n - 1))
        mu, se = batch_means(y, batches)
        means.append(mu)
        errs.append(se)
    k = len(means)
    return float(np.mean(means)), float(math.sqrt(np.sum(np.square(errs))) / k)


def trapezoid_weights(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    h = np.diff(x)
    w = np.zeros_like(x)
    w[:-1] += h / 2
    w[1:] += h / 2
    return w


@dataclass
class TIResult:
    alphas: np.ndarray
    gamma_prime: np.ndarray          # of the unshifted W
    stderr: np.ndarray
    gamma_at_1: float
    gamma_err: float
    free_energy_estimate: float      # -N^-2 ln Z(1)
    free_energy_err: float
    n: int
    shift: float = 0.0
    concave: bool = True
    info: dict = field(default_factory=dict)

    @property
    def plugin_lower_bound(self) -> float:
        """(1 - 1/N)/2 Gamma_N'(1): a lower bound by concavity of Gamma_N."""
        return (1 - 1 / self.n) / 2 * float(self.gamma_prime[-1])


def assemble_ti(alphas, gamma_prime, stderr, n: int, shift: float = 0.0) -> TIResult:
    """Integrate Gamma' (measured with W + shift) and remove the shift."""
    alphas = np.asarray(alphas, dtype=float)
    gp = np.asarray(gamma_prime, dtype=float)
    se = np.asarray(stderr, dtype=float)
    if alphas[0] != 0.0 or alphas[-1] != 1.0 or np.any(np.diff(alphas) <= 0):
        raise BadSettings("alpha grid must increase from 0 to 1")
    tw = trapezoid_weights(alphas)
    g1 = float(tw @ gp) - shift
    gerr = float(math.sqrt(tw ** 2 @ se ** 2))
    fac = (1 - 1 / n) / 2
    jump = np.diff(gp)
    noise = 2 * np.sqrt(se[1:] ** 2 + se[:-1] ** 2)
    concave = bool(np.all(jump <= noise))
    if not concave:
        bad = int(np.argmax(jump - noise))
        warnings.warn(f"Gamma' rises between alpha={alphas[bad]:.4g} and {alphas[bad + 1]:.4g} "
                      f"by {jump[bad]:.3g} (> 2 sigma = {noise[bad]:.3g})", NonMonotoneWarning,
                      stacklevel=2)
    return TIResult(alphas, gp - shift, se, g1, gerr, fac * g1, fac * gerr, n, shift, concave)


def integrate_ti(spec: EnsembleSpec, alphas=None, settings: ChainSettings | None = None,
                 seed: int = 0, chains: int = 1, threads: int | None = None,
                 shift: float | str = "auto") -> TIResult:
    """Estimate -N^-2 ln Z(1) by integrating Gamma_N' over the alpha grid.

    One chain family per alpha, run concurrently (the grid's ordering fixes
    the seeds, so results do not depend on the thread count).
    """
    alphas = default_alphas() if alphas is None else np.asarray(alphas, dtype=float)
    settings = settings or ChainSettings()
    if shift == "auto":
        shift = auto_shift(spec)
    shifted = spec.replace(shift=spec.shift + float(shift))
    seeds = chain_seeds(seed, len(alphas))

    def one(i):
        return mean_pair_W(shifted, float(alphas[i]), settings, seeds[i], chains)

    nthreads = thread_budget(threads)
    if nthreads > 1:
        with ThreadPoolExecutor(nthreads) as ex:
            vals = list(ex.map(one, range(len(alphas))))
    else:
        vals = [one(i) for i in range(len(alphas))]
    gp = np.array([v[0] for v in vals])
    se = np.array([v[1] for v in vals])
    # the caller's own shift is part of W; only the added one is removed
    out = assemble_ti(alphas, gp, se, spec.n, float(shift))
    out.info = {"shift_added": float(shift), "seed": seed, "chains": chains,
                "sweeps": settings.sweeps, "burn_in": settings.burn_in}
    return out


@dataclass
class SandwichReport:
    gas_mean: float
    gas_err: float
    product_mean: float
    product_err: float
    passed: bool


def sandwich_check(spec: EnsembleSpec, settings: ChainSettings | None = None, seed: int = 0,
                   chains: int = 1, alpha: float = 1.0, shift: float | str = "auto") -> SandwichReport:
    """Check mu2(W) <= mu0 x mu0 (W) within 2 combined standard errors.

    Both sides use the same positive shift of W.
    """
    if shift == "auto":
        shift = auto_shift(spec)
    sp = spec.replace(shift=spec.shift + float(shift))
    lhs, le = mean_pair_W(sp, alpha, settings, seed, chains)
    rhs, re = product_mean_W(sp)
    ok = 0 < lhs and lhs <= rhs + 2 * math.hypot(le, re)
    return SandwichReport(lhs, le, rhs, re, bool(ok))


# ---------------------------------------------------------------------------
# entropy and the variational upper bound

@dataclass
class EntropyEstimate:
    value: float
    log_z0: float
    method: str = "grid quadrature"


def _cell_mean(domain: Domain, edges, f) -> np.ndarray:
    a, b = edges[:-1], edges[1:]
    x = 0.5 * (a + b)[:, None] + 0.5 * (b - a)[:, None] * _GL_X
    if domain.planar:
        wt = _GL_W * x
        tot = wt.sum(1, keepdims=True)
        wt = np.where(tot > 0, wt / np.where(tot > 0, tot, 1), 1.0 / _GL_W.size)
    else:
        wt = np.broadcast_to(_GL_W / 2, x.shape)
    with np.errstate(invalid="ignore"):
        return np.sum(np.where(wt > 0, wt * f(x), 0.0), 1)


def _u_on_coordinate(spec: EnsembleSpec):
    d = spec.domain
    if d.kind == "line":
        return _line_U(spec)
    if d.kind == "sphere":
        return lambda z: np.zeros_like(z)
    if d.kind == "circle":
        return lambda t: spec.U(embed(d, t))
    return _radial_U(spec)


def entropy(spec: EnsembleSpec, m: GridMeasure) -> EntropyEstimate:
    """S(rho) = -int ln(d rho / d mu0) d rho for a piecewise-uniform density.

    Planar measures are rotation-invariant, so U enters through its angular
    average. The value is <= 0 up to quadrature error.
    """
    m.check()
    w = m.weights
    meas = m.cell_measure()
    if np.any((w > 0) & (meas <= 0)):
        raise InfiniteEntropy("measure has an atom; no density w.r.t. mu0")
    lz = log_z0(spec)
    pos = w > 0
    with np.errstate(divide="ignore"):
        ubar = _cell_mean(spec.domain, m.edges, _u_on_coordinate(spec))
    s = -np.sum(w[pos] * np.log(w[pos] / meas[pos])) - lz - np.sum(w[pos] * ubar[pos])
    return EntropyEstimate(float(s), lz)


def trial_upper_bound(spec: EnsembleSpec, trial: GridMeasure, n: int | None = None) -> float:
    """(1 - 1/N) E(rho) - S(rho) / N with E(rho) = 1/2 rho x rho (W).

    An upper bound on -N^-2 ln Z(1) for every N (Gibbs variational principle
    applied to the product trial state rho^N).
    """
    n = spec.n if n is None else n
    s = entropy(spec, trial).value
    e = spec.beta * energy_of_measure(spec, trial) + spec.shift / 2
    return (1 - 1 / n) * e - s / n
