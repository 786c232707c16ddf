"""Metropolis sampler for log-gas Gibbs measures.

The chain targets

    mu_alpha(dx) ~ exp(-alpha K(x) - sum_k U(x_k)) dx_1 ... dx_N,

which at ``alpha = 1`` is the physical measure exp(-total_energy). One sweep
is N single-particle random-walk updates in particle order. Step sizes adapt
only during burn-in, so the kept part of the chain uses a fixed kernel.
"""
from __future__ import annotations

import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import _kernels as K
from .errors import BadSettings
from .geometry import Domain, as_points, candidates, embed, uniform_sample
from .model import EnsembleSpec, ParticleConfig, energy_parts

DRIFT_CHECK_EVERY = 1000


@dataclass
class ChainSettings:
    sweeps: int = 2000
    burn_in: int = 500
    thinning: int = 1
    target_acceptance: float = 0.35
    adapt_interval: int = 25
    initializer: str = "auto"          # auto | uniform | gaussian
    init_scale: float = 1 / math.sqrt(2)
    step: float | None = None

    def validate(self):
        if self.sweeps < 0 or self.burn_in < 0:
            raise BadSettings("sweeps and burn_in must be non-negative")
        if self.burn_in > self.sweeps:
            raise BadSettings(f"burn_in ({self.burn_in}) exceeds sweeps ({self.sweeps})")
        if self.thinning < 1:
            raise BadSettings("thinning must be >= 1")
        if not 0 < self.target_acceptance < 1:
            raise BadSettings("target_acceptance must lie in (0, 1)")
        if self.adapt_interval < 1:
            raise BadSettings("adapt_interval must be >= 1")
        if self.initializer not in ("auto", "uniform", "gaussian"):
            raise BadSettings(f"unknown initializer {self.initializer!r}")
        if not self.init_scale > 0:
            raise BadSettings("init_scale must be positive")
        return self


@dataclass
class ChainState:
    spec: EnsembleSpec
    points: np.ndarray
    xyz: np.ndarray
    rng: np.random.Generator
    alpha: float = 1.0
    step: float = 0.1
    k: float = 0.0            # cached K^(N)
    u: float = 0.0            # cached sum_k U(x_k)
    accepted: int = 0
    proposed: int = 0
    window_accepted: int = 0
    window_proposed: int = 0
    sweep_count: int = 0
    seed: object = None
    max_drift: float = 0.0

    @property
    def energy(self) -> float:
        """Physical total energy K + sum U (alpha = 1)."""
        return self.k + self.u

    @property
    def target_energy(self) -> float:
        return self.alpha * self.k + self.u

    @property
    def config(self) -> ParticleConfig:
        return ParticleConfig(self.points.copy(), self.energy)

    @property
    def acceptance(self) -> float:
        return self.accepted / self.proposed if self.proposed else math.nan


def _energies(spec: EnsembleSpec, xyz):
    kern, reg, pot, c = spec.codes
    sg, sv, sf = K.energy_parts(xyz, kern, reg, pot, c)
    n = xyz.shape[0]
    k = spec.beta * (sg + (n - 1) * sv) + spec.shift * n * (n - 1) / 2
    u = spec.beta * (sf + sv)
    return k, u


def _make_rng(seed):
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def initial_points(spec: EnsembleSpec, settings: ChainSettings, rng) -> np.ndarray:
    d = spec.domain
    how = settings.initializer
    if how == "auto":
        how = "uniform" if d.bounded else "gaussian"
    if how == "uniform":
        return uniform_sample(d, rng, spec.n)
    if d.kind == "line":
        return settings.init_scale * rng.standard_normal(spec.n)
    if d.planar:
        g = rng.standard_normal((spec.n, 2)) * settings.init_scale
        z = g[:, 0] + 1j * g[:, 1]
        if d.kind == "disk":
            z = np.where(np.abs(z) < d.radius, z, z / np.abs(z) * d.radius * 0.999)
        return z
    raise BadSettings(f"gaussian initializer is not defined on {d}")


def init_chain(spec: EnsembleSpec, settings: ChainSettings | None = None, seed=0,
               alpha: float = 1.0) -> ChainState:
    settings = (settings or ChainSettings()).validate()
    if alpha < 0:
        raise BadSettings("alpha must be >= 0")
    rng = _make_rng(seed)
    pts = initial_points(spec, settings, rng)
    xyz = np.ascontiguousarray(embed(spec.domain, pts))
    k, u = _energies(spec, xyz)
    if not (math.isfinite(u) and (math.isfinite(k) or alpha == 0)):
        raise BadSettings("initial configuration has infinite energy")
    step = settings.step if settings.step is not None else _default_step(spec)
    return ChainState(spec, pts, xyz, rng, alpha=float(alpha), step=step, k=k, u=u,
                      seed=seed if not isinstance(seed, np.random.Generator) else None)


def _default_step(spec: EnsembleSpec) -> float:
    return min(spec.domain.scale, 1.0 / math.sqrt(spec.n))


def sweep(spec: EnsembleSpec, state: ChainState) -> ChainState:
    """N single-particle Metropolis updates (in place); returns ``state``."""
    n = spec.n
    cand, inside = candidates(spec.domain, state.points, state.step, state.rng)
    cxyz = np.ascontiguousarray(embed(spec.domain, cand))
    logu = np.log(state.rng.random(n))
    acc = np.zeros(n, dtype=np.bool_)
    kern, reg, pot, c = spec.codes
    dk, du, nacc = K.sweep(state.xyz, cxyz, np.ascontiguousarray(inside), logu,
                           kern, reg, pot, c, spec.beta, state.alpha, acc)
    if nacc:
        state.points[acc] = cand[acc]
    state.k += dk
    state.u += du
    state.accepted += nacc
    state.proposed += n
    state.window_accepted += nacc
    state.window_proposed += n
    state.sweep_count += 1
    if state.sweep_count % DRIFT_CHECK_EVERY == 0:
        check_energy(spec, state)
    return state


def check_energy(spec: EnsembleSpec, state: ChainState, tol: float = 1e-6) -> float:
    """Recompute cached energies from scratch; raises if the drift exceeds ``tol``."""
    k, u = _energies(spec, state.xyz)
    if not math.isfinite(k):
        state.k, state.u = k, u
        return 0.0
    drift = abs((state.k + state.u) - (k + u)) / (1.0 + abs(k + u))
    state.max_drift = max(state.max_drift, drift)
    if drift > tol:
        raise RuntimeError(f"cached energy drifted by {drift:.3e}")
    state.k, state.u = k, u
    return drift


def adapt_step(state: ChainState, target_acceptance: float) -> ChainState:
    """Multiplicative step update from the acceptance seen since the last call."""
    if state.window_proposed:
        rate = state.window_accepted / state.window_proposed
        state.step *= math.exp(2.0 * (rate - target_acceptance))
        state.step = min(max(state.step, 1e-6), state.spec.domain.scale)
    state.window_accepted = 0
    state.window_proposed = 0
    return state


@dataclass
class RunResult:
    """Kept samples of one chain plus diagnostics."""
    points: np.ndarray                  # (n_samples, N) native points
    sweeps: np.ndarray                  # sweep index of every sample
    k_values: np.ndarray                # K^(N) at every sample
    energies: np.ndarray                # total energy at every sample
    energy_trace: np.ndarray            # total energy after every post-burn-in sweep
    acceptance: float
    step: float
    autocorr_time: float
    state: ChainState = field(repr=False, default=None)

    @property
    def configs(self) -> list:
        return [ParticleConfig(p, e) for p, e in zip(self.points, self.energies)]

    def __len__(self):
        return len(self.points)


def integrated_autocorr_time(x, c: float = 5.0) -> float:
    """Integrated autocorrelation time with Sokal's self-consistent window."""
    x = np.asarray(x, dtype=float)
    n = len(x)
    if n < 4 or np.var(x) == 0:
        return 1.0
    y = x - x.mean()
    f = np.fft.rfft(y, n=2 * n)
    acf = np.fft.irfft(f * np.conj(f))[:n]
    acf /= acf[0]
    tau = 2.0 * np.cumsum(acf) - 1.0
    for m in range(1, n):
        if m >= c * tau[m]:
            return float(max(tau[m], 1.0))
    return float(max(tau[-1], 1.0))


def advance(spec: EnsembleSpec, state: ChainState, settings: ChainSettings,
            until: int | None = None, keep: bool = True):
    """Run ``state`` forward to sweep ``until`` (default ``settings.sweeps``).

    Returns lists (points, sweeps, k_values, energies, energy_trace) of what
    was kept along the way.
    """
    until = settings.sweeps if until is None else min(until, settings.sweeps)
    pts, idx, ks, es, trace = [], [], [], [], []
    while state.sweep_count < until:
        sweep(spec, state)
        s = state.sweep_count
        if s <= settings.burn_in:
            if s % settings.adapt_interval == 0:
                adapt_step(state, settings.target_acceptance)
            if s == settings.burn_in:
                state.window_accepted = state.window_proposed = 0
                state.accepted = state.proposed = 0
            continue
        trace.append(state.energy)
        if keep and (s - settings.burn_in) % settings.thinning == 0:
            pts.append(state.points.copy())
            idx.append(s)
            ks.append(state.k)
            es.append(state.energy)
    return pts, idx, ks, es, trace


def _stack(domain: Domain, pts, n):
    if pts:
        return np.array(pts)
    shape = (0, n, 3) if domain.kind == "sphere" else (0, n)
    return np.zeros(shape, dtype=complex if domain.planar else float)


def run_chain(spec: EnsembleSpec, settings: ChainSettings, state: ChainState) -> RunResult:
    settings.validate()
    pts, idx, ks, es, trace = advance(spec, state, settings)
    trace = np.asarray(trace)
    return RunResult(_stack(spec.domain, pts, spec.n), np.asarray(idx, dtype=int),
                     np.asarray(ks), np.asarray(es), trace, state.acceptance, state.step,
                     integrated_autocorr_time(trace), state)


def run(spec: EnsembleSpec, settings: ChainSettings | None = None, seed=0,
        alpha: float = 1.0) -> RunResult:
    """Burn in, then collect thinned samples from one chain."""
    settings = (settings or ChainSettings()).validate()
    return run_chain(spec, settings, init_chain(spec, settings, seed, alpha))


def chain_seeds(seed: int, chains: int):
    return np.random.SeedSequence(seed).spawn(chains)


def thread_budget(threads: int | None = None) -> int:
    if threads is not None:
        return max(1, int(threads))
    env = os.environ.get("COULOMBGAS_THREADS")
    return max(1, int(env)) if env else 1


def run_chains(spec: EnsembleSpec, settings: ChainSettings | None = None, seed: int = 0,
               chains: int = 1, threads: int | None = None, alpha: float = 1.0) -> list:
    """Independent chains on disjoint streams, returned in chain-id order."""
    settings = (settings or ChainSettings()).validate()
    seeds = chain_seeds(seed, chains)
    work = [lambda s=s: run(spec, settings, s, alpha) for s in seeds]
    nthreads = thread_budget(threads)
    if nthreads == 1 or chains == 1:
        return [w() for w in work]
    with ThreadPoolExecutor(nthreads) as pool:
        return list(pool.map(lambda w: w(), work))


# ---------------------------------------------------------------------------
# checkpoints

def state_to_dict(state: ChainState) -> dict:
    pts = state.points
    if state.spec.domain.kind == "sphere":
        coords = pts.tolist()
    elif state.spec.domain.planar:
        coords = [[float(z.real), float(z.imag)] for z in pts]
    else:
        coords = [float(x) for x in pts]
    seed = state.seed
    if isinstance(seed, np.random.SeedSequence):
        seed = {"entropy": int(seed.entropy), "spawn_key": list(seed.spawn_key)}
    return {
        "points": coords, "alpha": state.alpha, "step": state.step,
        "accepted": state.accepted, "proposed": state.proposed,
        "window_accepted": state.window_accepted, "window_proposed": state.window_proposed,
        "sweep_count": state.sweep_count, "seed": seed,
        "rng_state": state.rng.bit_generator.state,
    }


def state_from_dict(spec: EnsembleSpec, data: dict) -> ChainState:
    d = spec.domain
    if d.kind == "sphere":
        pts = np.array(data["points"], dtype=float)
    elif d.planar:
        a = np.array(data["points"], dtype=float).reshape(-1, 2)
        pts = a[:, 0] + 1j * a[:, 1]
    else:
        pts = np.array(data["points"], dtype=float)
    pts = as_points(d, pts)
    rng = np.random.default_rng()
    rng.bit_generator.state = data["rng_state"]
    xyz = np.ascontiguousarray(embed(d, pts))
    k, u = _energies(spec, xyz)
    seed = data.get("seed")
    if isinstance(seed, dict):
        seed = np.random.SeedSequence(seed["entropy"], spawn_key=tuple(seed["spawn_key"]))
    return ChainState(spec, pts, xyz, rng, alpha=data["alpha"], step=data["step"], k=k, u=u,
                      accepted=data["accepted"], proposed=data["proposed"],
                      window_accepted=data["window_accepted"],
                      window_proposed=data["window_proposed"],
                      sweep_count=data["sweep_count"], seed=seed)


def save_checkpoint(path, states, extra: dict | None = None):
    states = states if isinstance(states, (list, tuple)) else [states]
    body = {"chains": [state_to_dict(s) for s in states]}
    if extra:
        body.update(extra)
    tmp = f"{path}.tmp"
    with open(tmp, "w") as fh:
        json.dump(body, fh)
    os.replace(tmp, path)


def load_checkpoint(path, spec: EnsembleSpec) -> list:
    with open(path) as fh:
        body = json.load(fh)
    return [state_from_dict(spec, c) for c in body["chains"]]
