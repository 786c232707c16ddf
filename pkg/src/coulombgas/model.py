"""Pair kernels, one-particle potentials and the Hamiltonians of a log-gas.

Conventions: for an :class:`EnsembleSpec` with inverse temperature ``beta``

    w = beta G,   u = beta F,   v = beta V,
    W(x, y) = w(x, y) + v(x) + v(y) + shift,
    U(x) = u(x) + v(x),
    total_energy = sum_{i<j} w + sum_k (u + N v)        (beta times H^(N))
    k_energy     = 1/2 sum_{j != k} W = sum_{i<j} (w + shift) + (N-1) sum_k v

so that ``total_energy == k_energy + sum_k U`` for ``shift == 0``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import integrate

from . import _kernels as K
from .errors import DomainMismatch
from .geometry import Domain, as_points, contains, embed

KERNELS = {"freelog": K.FREELOG, "image": K.IMAGE, "spherelog": K.SPHERELOG}
REGULAR = {"zero": K.REG_ZERO, "halfplane": K.REG_HALFPLANE, "cauchy": K.REG_CAUCHY}
POTENTIALS = {"zero": K.POT_ZERO, "quadratic": K.POT_QUADRATIC, "cauchylog": K.POT_CAUCHY}


@dataclass(frozen=True)
class PairKernel:
    """G(x, y): ``freelog`` -ln|x-y|, ``image`` -ln|x-y| - ln|x-y*|,
    ``spherelog`` -ln of the chordal distance."""
    kind: str = "freelog"

    def __post_init__(self):
        if self.kind not in KERNELS:
            raise ValueError(f"unknown pair kernel {self.kind!r}")

    def __call__(self, a, b):
        """Evaluate on embedded (..., 3) coordinates."""
        a = np.asarray(a, dtype=float)
        b = np.asarray(b, dtype=float)
        with np.errstate(divide="ignore"):
            d2 = np.sum((a - b) ** 2, axis=-1)
            g = np.where(d2 < K.COINCIDENT2, np.inf, -0.5 * np.log(np.maximum(d2, 1e-300)))
            if self.kind == "image":
                bm = b * np.array([1.0, -1.0, 1.0])
                e2 = np.sum((a - bm) ** 2, axis=-1)
                g = g + np.where(e2 < K.COINCIDENT2, np.inf,
                                 -0.5 * np.log(np.maximum(e2, 1e-300)))
        return g


@dataclass(frozen=True)
class RegularPart:
    """F(x): ``zero``, ``halfplane`` -ln(2|Im x|), ``cauchy`` 1/2 ln(1+|x|^2)."""
    kind: str = "zero"

    def __post_init__(self):
        if self.kind not in REGULAR:
            raise ValueError(f"unknown regular part {self.kind!r}")

    def __call__(self, a):
        a = np.asarray(a, dtype=float)
        if self.kind == "halfplane":
            y = np.abs(a[..., 1])
            with np.errstate(divide="ignore"):
                return np.where(y == 0, np.inf, -np.log(2 * np.maximum(y, 1e-300)))
        if self.kind == "cauchy":
            return 0.5 * np.log1p(a[..., 0] ** 2 + a[..., 1] ** 2)
        return np.zeros(a.shape[:-1])


@dataclass(frozen=True)
class ExternalPotential:
    """V(x): ``zero``, ``quadratic`` c|x|^2, ``cauchylog`` 1/2 ln(1+|x|^2)."""
    kind: str = "zero"
    c: float = 0.0

    def __post_init__(self):
        if self.kind not in POTENTIALS:
            raise ValueError(f"unknown potential {self.kind!r}")

    def __call__(self, a):
        a = np.asarray(a, dtype=float)
        r2 = a[..., 0] ** 2 + a[..., 1] ** 2
        if self.kind == "quadratic":
            return self.c * r2
        if self.kind == "cauchylog":
            return 0.5 * np.log1p(r2)
        return np.zeros(a.shape[:-1])


@dataclass(frozen=True)
class EnsembleSpec:
    domain: Domain
    kernel: PairKernel = field(default_factory=PairKernel)
    regular: RegularPart = field(default_factory=RegularPart)
    potential: ExternalPotential = field(default_factory=ExternalPotential)
    beta: float = 2.0
    n: int = 1
    kappa: float = 0.0
    shift: float = 0.0
    name: str | None = None

    def __post_init__(self):
        if not self.beta > 0:
            raise ValueError(f"beta must be positive, got {self.beta}")
        if int(self.n) != self.n or self.n < 1:
            raise ValueError(f"n must be a positive integer, got {self.n}")
        if self.kernel.kind == "spherelog" and self.domain.kind != "sphere":
            raise DomainMismatch("spherelog kernel lives on the sphere")
        if self.kernel.kind == "image" and not self.domain.planar:
            raise DomainMismatch("image kernel needs a planar domain")
        if self.domain.kind == "sphere" and self.potential.kind != "zero":
            raise DomainMismatch("sphere ensembles take no external potential")

    def replace(self, **kw) -> "EnsembleSpec":
        return replace(self, **kw)

    @property
    def codes(self):
        return (KERNELS[self.kernel.kind], REGULAR[self.regular.kind],
                POTENTIALS[self.potential.kind], float(self.potential.c))

    # beta-scaled pieces on embedded coordinates
    def w(self, a, b):
        return self.beta * self.kernel(a, b)

    def v(self, a):
        return self.beta * self.potential(a)

    def u(self, a):
        return self.beta * self.regular(a)

    def W(self, a, b):
        return self.w(a, b) + self.v(a) + self.v(b) + self.shift

    def U(self, a):
        return self.u(a) + self.v(a)


@dataclass
class ParticleConfig:
    points: np.ndarray
    cached_energy: float = math.nan


def _xyz(spec: EnsembleSpec, pts) -> np.ndarray:
    pts = as_points(spec.domain, pts)
    if not np.all(contains(spec.domain, pts, tol=1e-10)):
        raise DomainMismatch(f"points outside {spec.domain}")
    return np.ascontiguousarray(embed(spec.domain, pts))


def _points_of(config):
    return config.points if isinstance(config, ParticleConfig) else config


def make_config(spec: EnsembleSpec, points) -> ParticleConfig:
    pts = as_points(spec.domain, points)
    return ParticleConfig(pts, total_energy(spec, pts))


def _scalar_or_array(out, x):
    return out[0] if out.size == 1 and np.ndim(x) <= 1 else out


def pair_w(spec: EnsembleSpec, x, y):
    """beta-free kernel value G(x, y); +inf at coincidence."""
    d = spec.domain
    out = spec.kernel(embed(d, as_points(d, x)), embed(d, as_points(d, y)))
    return _scalar_or_array(out, x)


def combined_W(spec: EnsembleSpec, x, y):
    d = spec.domain
    a = embed(d, as_points(d, x))
    b = embed(d, as_points(d, y))
    return _scalar_or_array(spec.W(a, b), x)


def one_particle_U(spec: EnsembleSpec, x):
    d = spec.domain
    return _scalar_or_array(spec.U(embed(d, as_points(d, x))), x)


def energy_parts(spec: EnsembleSpec, config):
    """(sum_{i<j} G, sum V, sum F) for a configuration, all beta-free."""
    kern, reg, pot, c = spec.codes
    return K.energy_parts(_xyz(spec, _points_of(config)), kern, reg, pot, c)


def _check_n(spec, pts):
    if len(pts) != spec.n:
        raise DomainMismatch(f"config has {len(pts)} points, spec expects {spec.n}")


def total_energy(spec: EnsembleSpec, config) -> float:
    """beta H^(N) = sum_{i<j} beta G + sum_k (beta F + N beta V)."""
    pts = as_points(spec.domain, _points_of(config))
    _check_n(spec, pts)
    n = len(pts)
    sg, sv, sf = energy_parts(spec, pts)
    return spec.beta * (sg + sf + n * sv) + spec.shift * n * (n - 1) / 2


def k_energy(spec: EnsembleSpec, config) -> float:
    """K^(N) = 1/2 sum_{j != k} W(x_j, x_k)."""
    pts = as_points(spec.domain, _points_of(config))
    _check_n(spec, pts)
    n = len(pts)
    sg, sv, _ = energy_parts(spec, pts)
    return spec.beta * (sg + (n - 1) * sv) + spec.shift * n * (n - 1) / 2


def delta_energy(spec: EnsembleSpec, config, index: int, candidate) -> float:
    """Change of ``total_energy`` when particle ``index`` moves to ``candidate``. O(N)."""
    pts = as_points(spec.domain, _points_of(config))
    if not 0 <= index < len(pts):
        raise IndexError(index)
    xyz = _xyz(spec, pts)
    c = embed(spec.domain, as_points(spec.domain, candidate))[0]
    if not np.all(contains(spec.domain, as_points(spec.domain, candidate), tol=1e-10)):
        return math.inf
    kern, reg, pot, cc = spec.codes
    dg, dv, df = K.delta_parts(xyz, index, c[0], c[1], c[2], kern, reg, pot, cc)
    return spec.beta * (dg + df + len(pts) * dv)


# ---------------------------------------------------------------------------
# presets

def preset(name: str, n: int = 64, beta: float | None = None) -> EnsembleSpec:
    """Named ensembles: goe, gue, gse, circular, ginibre, quaternion-ginibre,
    spherical, cauchy-normal, conductor."""
    key = name.strip().lower().replace("_", "-")
    line = Domain("line")
    plane = Domain("plane")
    table = {
        "goe": dict(domain=line, potential=ExternalPotential("quadratic", 1.0), beta=1.0, kappa=1.0),
        "gue": dict(domain=line, potential=ExternalPotential("quadratic", 1.0), beta=2.0, kappa=2.0),
        "gse": dict(domain=line, potential=ExternalPotential("quadratic", 1.0), beta=4.0, kappa=2.0),
        "circular": dict(domain=Domain("circle"), beta=2.0, kappa=0.0),
        "ginibre": dict(domain=plane, potential=ExternalPotential("quadratic", 0.5), beta=2.0, kappa=2.0),
        "quaternion-ginibre": dict(domain=plane, kernel=PairKernel("image"),
                                   regular=RegularPart("halfplane"),
                                   potential=ExternalPotential("quadratic", 1.0), beta=2.0, kappa=1.0),
        "spherical": dict(domain=Domain("sphere"), kernel=PairKernel("spherelog"), beta=2.0),
        "cauchy-normal": dict(domain=plane, regular=RegularPart("cauchy"),
                              potential=ExternalPotential("cauchylog"), beta=2.0),
        "conductor": dict(domain=Domain("disk", 1.0), beta=2.0),
    }
    if key not in table:
        raise KeyError(f"unknown preset {name!r}; choose from {sorted(table)}")
    kw = table[key]
    if beta is not None:
        kw = dict(kw, beta=float(beta))
    return EnsembleSpec(n=n, name=key, **kw)


PRESETS = ("goe", "gue", "gse", "circular", "ginibre", "quaternion-ginibre",
           "spherical", "cauchy-normal", "conductor")


# ---------------------------------------------------------------------------
# condition checks (C1)-(C5)

def _probe_points(domain: Domain, rng, m: int):
    """Heavy-tailed probe points covering the domain."""
    if domain.kind == "line":
        return rng.standard_cauchy(m)
    if domain.kind == "plane":
        r = np.sqrt(rng.uniform(size=m) ** -2.0 - 1.0)
        return r * np.exp(2j * np.pi * rng.uniform(size=m))
    from .geometry import uniform_sample
    return uniform_sample(domain, rng, m)


def _log_proposal_density(domain: Domain, pts):
    """log density of the probe distribution w.r.t. the uniform measure dx."""
    if domain.kind == "line":
        return -np.log(np.pi * (1 + pts ** 2))
    if domain.kind == "plane":
        # radial tail P(r > R) = (1 + R^2)^(-1/2)
        r2 = np.abs(pts) ** 2
        return np.log(1.0 / (2 * np.pi)) - 1.5 * np.log1p(r2)
    return np.zeros(len(pts))


def _truncated_mass(spec: EnsembleSpec, radius: float) -> float:
    """Integral of exp(-U) over the part of the domain within ``radius``."""
    d = spec.domain

    def panels(rmax):
        if rmax <= 1e-2:
            return [(0.0, rmax)]
        edges = np.concatenate([[0.0], np.geomspace(1e-2, rmax, 30)])
        return list(zip(edges[:-1], edges[1:]))

    if d.kind == "line":
        def f_line(r):
            pts = embed(d, np.array([r, -r]))
            return float(np.sum(np.exp(-spec.U(pts))))
        return sum(integrate.quad(f_line, a, b, limit=200)[0] for a, b in panels(radius))
    if d.kind in ("plane", "disk"):
        rmax = min(radius, d.radius) if d.kind == "disk" else radius
        phis, wts = np.polynomial.legendre.leggauss(64)
        phis = np.pi * (phis + 1)
        wts = np.pi * wts

        def ring(r):
            z = r * np.exp(1j * phis)
            return r * float(np.sum(wts * np.exp(-spec.U(embed(d, z)))))

        return sum(integrate.quad(ring, a, b, limit=200)[0] for a, b in panels(rmax))
    if d.kind == "circle":
        return integrate.quad(lambda t: math.exp(-float(spec.U(embed(d, np.array([t])))[0])),
                              0, 2 * np.pi, limit=200)[0]
    # sphere: U is zero-potential by construction; integrate over z in [-1, 1]
    return integrate.quad(
        lambda zc: 2 * np.pi * math.exp(-float(spec.U(np.array([[math.sqrt(max(0, 1 - zc * zc)), 0, zc]]))[0])),
        -1, 1)[0]


@dataclass
class ConditionReport:
    results: dict
    details: dict

    @property
    def all_pass(self) -> bool:
        return all(v == "pass" for v in self.results.values())

    def __getitem__(self, key):
        return self.results[key]


def w_minimum(spec: EnsembleSpec, rng=None, m: int = 4000) -> float:
    """Sampled minimum of W over probe pairs (a lower-bound estimate of W_0)."""
    rng = np.random.default_rng(0) if rng is None else rng
    d = spec.domain
    a = embed(d, _probe_points(d, rng, m))
    b = embed(d, _probe_points(d, rng, m))
    if d.kind in ("line", "plane"):
        # add a compact cloud where the minimum of confined kernels sits
        a = np.concatenate([a, embed(d, _probe_points(d, rng, m) * 0.05)])
        b = np.concatenate([b, embed(d, _probe_points(d, rng, m) * 0.05)])
    vals = spec.W(a, b)
    return float(np.min(vals[np.isfinite(vals)]))


def validate_conditions(spec: EnsembleSpec, probes: int = 2000, seed: int = 0) -> ConditionReport:
    """Numerical spot checks of (C1)-(C5); each result is pass, fail or inconclusive."""
    rng = np.random.default_rng(seed)
    d = spec.domain
    res, det = {}, {}

    # (C1) symmetry on random pairs (plus mirror symmetry for the image kernel)
    a = embed(d, _probe_points(d, rng, probes))
    b = embed(d, _probe_points(d, rng, probes))
    wab, wba = spec.W(a, b), spec.W(b, a)
    ok = np.isfinite(wab)
    err = float(np.max(np.abs(wab[ok] - wba[ok]) / (1 + np.abs(wab[ok]))))
    if spec.kernel.kind == "image":
        flip = np.array([1.0, -1.0, 1.0])
        err = max(err, float(np.max(np.abs(spec.kernel(a * flip, b * flip) - spec.kernel(a, b))
                                    [ok] / (1 + np.abs(wab[ok])))))
    res["C1"] = "pass" if err < 1e-12 else "fail"
    det["C1"] = {"max_relative_asymmetry": err}

    # (C2) integrability of exp(-U): truncated integrals must settle
    if d.bounded:
        mass = _truncated_mass(spec, np.inf if d.kind != "disk" else d.radius)
        res["C2"] = "pass" if np.isfinite(mass) and mass > 0 else "fail"
        det["C2"] = {"mass": mass}
    else:
        radii = [1e1, 1e2, 1e3, 1e4]
        masses = [_truncated_mass(spec, r) for r in radii]
        last_tail = masses[-1] - masses[-2]
        if masses[-1] > 0 and last_tail < 1e-6 * masses[-1]:
            res["C2"] = "pass"
        elif last_tail > 0.1 * masses[-1] or not np.isfinite(masses[-1]):
            res["C2"] = "fail"
        else:
            res["C2"] = "inconclusive"
        det["C2"] = {"radii": radii, "truncated_mass": masses}

    # (C3) lower semicontinuity holds by construction: every kernel is continuous
    # off the diagonal and +inf on it; the potentials are continuous
    res["C3"] = "pass"
    det["C3"] = {"reason": "continuous kernels with +inf at coincidence"}

    # (C4) W in L1(exp(-U) dx x exp(-U) dy): importance-sampled mean of |W|
    x = _probe_points(d, rng, 20 * probes)
    y = _probe_points(d, rng, 20 * probes)
    ex, ey = embed(d, x), embed(d, y)
    with np.errstate(over="ignore", invalid="ignore"):
        lw = -spec.U(ex) - spec.U(ey) - _log_proposal_density(d, x) - _log_proposal_density(d, y)
        wts = np.exp(lw)
        vals = np.abs(spec.W(ex, ey)) * wts
    good = np.isfinite(vals)
    if np.mean(good) < 0.999:
        res["C4"] = "fail"
        det["C4"] = {"nonfinite_fraction": float(1 - np.mean(good))}
    else:
        mean = float(np.mean(vals))
        se = float(np.std(vals) / math.sqrt(len(vals)))
        res["C4"] = "pass" if np.isfinite(mean) and se < 0.1 * max(mean, 1e-12) else "inconclusive"
        det["C4"] = {"estimate": mean, "stderr": se}

    # (C5) confinement: W_-(x) = min_y W(x, y) must grow on far-field rings
    if d.bounded:
        res["C5"] = "pass"
        det["C5"] = {"reason": "bounded domain"}
    else:
        radii = [1e1, 1e2, 1e3]
        mins = [_w_minus_on_ring(spec, r) for r in radii]
        grows = all(m2 > m1 for m1, m2 in zip(mins[:-1], mins[1:])) and mins[-1] - mins[0] > 1.0
        res["C5"] = "pass" if grows else "fail"
        det["C5"] = {"radii": radii, "w_minus": mins}
    return ConditionReport(res, det)


def _w_minus_on_ring(spec: EnsembleSpec, radius: float) -> float:
    d = spec.domain
    rs = np.concatenate([[0.0], np.geomspace(1e-3, 1e7, 161)])
    if d.kind == "line":
        xs = np.array([radius, -radius])
        ys = np.concatenate([rs, -rs])
    else:
        xs = radius * np.exp(2j * np.pi * np.arange(8) / 8 + 0.1)
        ang = np.exp(2j * np.pi * np.arange(24) / 24)
        ys = (rs[:, None] * ang[None, :]).ravel()
    best = np.inf
    for x in xs:
        near = x + np.geomspace(1e-3, 10, 40) * (np.exp(1j * np.linspace(0, 2 * np.pi, 5))[:, None]
                                               if d.kind != "line" else 1.0)
        yy = np.concatenate([ys, np.ravel(near).real if d.kind == "line" else np.ravel(near)])
        vals = spec.W(embed(d, np.full(yy.shape, x)), embed(d, yy))
        best = min(best, float(np.min(vals)))
    return best
