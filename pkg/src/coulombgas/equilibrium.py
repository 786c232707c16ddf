"""Equilibrium measures of the energy functional

    eps(rho) = 1/2 rho x rho (G) + rho(V)

computed two ways (cell-discretized measures on a grid, and point charges),
plus the closed-form limit laws used as references.

All energies here are beta-free (``eps``); multiply by beta for the
beta-scaled quantities used by the free-energy code.

Grid discretizations, by domain:

    line    cells [e_i, e_{i+1}] in x, uniform density inside each cell
    circle  cells in the angle
    plane   annuli [r_i, r_{i+1}] (rotation-invariant measures only)
    disk    annuli, outer edge = disk radius
    sphere  zonal bands [z_i, z_{i+1}] (axially symmetric measures only)

Cell-to-cell kernel averages are exact (closed forms or, on the circle, a
a smooth remainder on the circle); the singular self-cell term included.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.special import xlogy

from . import _kernels as K
from .errors import BadSettings, NoConvergence, NonConfining, NonNormalized
from .geometry import TWO_PI, Domain, as_points, embed, uniform_sample
from .model import EnsembleSpec

SUPPORT_FLOOR = 1e-8
_GL_X, _GL_W = np.polynomial.legendre.leggauss(8)


# ---------------------------------------------------------------------------
# closed-form laws

LAW_KINDS = ("semicircle", "uniform-disk", "stereographic", "circle-boundary",
             "uniform-sphere")


def _bisect(f, target, lo, hi, iters=80):
    target = np.asarray(target, dtype=float)
    lo = np.full(target.shape, lo, dtype=float)
    hi = np.full(target.shape, hi, dtype=float)
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        below = f(mid) < target
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
    return 0.5 * (lo + hi)


@dataclass(frozen=True)
class LimitLaw:
    """Closed-form equilibrium measure.

    ``density`` takes native points: reals for the semicircle, complex numbers
    for the planar laws, unit 3-vectors for the uniform sphere. The circle
    boundary law is singular; its ``density`` raises.

    ``cdf`` is the 1-D CDF (semicircle) and ``radial_cdf`` the CDF of |lambda|
    (planar laws; for the sphere, of the stereographic modulus).
    """
    kind: str

    def __post_init__(self):
        if self.kind not in LAW_KINDS:
            raise ValueError(f"unknown law {self.kind!r}; choose from {LAW_KINDS}")

    @property
    def support(self) -> str:
        return {"semicircle": "[-1, 1]", "uniform-disk": "|z| <= 1",
                "stereographic": "C", "circle-boundary": "|z| = 1",
                "uniform-sphere": "S^2"}[self.kind]

    @property
    def domain(self) -> Domain:
        return {"semicircle": Domain("line"), "uniform-disk": Domain("plane"),
                "stereographic": Domain("plane"), "circle-boundary": Domain("disk"),
                "uniform-sphere": Domain("sphere")}[self.kind]

    def density(self, x):
        k = self.kind
        if k == "semicircle":
            x = np.asarray(x, dtype=float)
            return np.where(np.abs(x) < 1, 2 / np.pi * np.sqrt(np.clip(1 - x * x, 0, None)), 0.0)
        if k == "uniform-sphere":
            x = np.asarray(x, dtype=float)
            return np.full(x.shape[:-1], 1 / (4 * np.pi))
        if k == "circle-boundary":
            raise ValueError("circle-boundary law has no density w.r.t. area")
        r2 = np.abs(np.asarray(x)) ** 2
        if k == "uniform-disk":
            return np.where(r2 <= 1, 1 / np.pi, 0.0)
        return 1 / (np.pi * (1 + r2) ** 2)

    def cdf(self, x):
        if self.kind != "semicircle":
            raise ValueError(f"{self.kind} has no 1-D CDF; use radial_cdf")
        x = np.clip(np.asarray(x, dtype=float), -1, 1)
        return 0.5 + (x * np.sqrt(1 - x * x) + np.arcsin(x)) / np.pi

    def ppf(self, u):
        if self.kind != "semicircle":
            raise ValueError(f"{self.kind} has no 1-D quantile function")
        return _bisect(self.cdf, u, -1.0, 1.0)

    def radial_cdf(self, r):
        r = np.asarray(r, dtype=float)
        k = self.kind
        if k == "semicircle":
            return np.clip(2 * self.cdf(r) - 1, 0, 1)
        if k == "uniform-disk":
            return np.clip(r, 0, 1) ** 2
        if k == "circle-boundary":
            return np.where(r >= 1, 1.0, 0.0)
        r2 = np.clip(r, 0, None) ** 2
        return np.where(np.isinf(r2), 1.0, r2 / (1 + r2))

    def radial_ppf(self, u):
        u = np.asarray(u, dtype=float)
        k = self.kind
        if k == "uniform-disk":
            return np.sqrt(u)
        if k == "circle-boundary":
            return np.ones_like(u)
        if k == "semicircle":
            return self.ppf(0.5 + 0.5 * u)
        with np.errstate(divide="ignore"):
            return np.sqrt(u / (1 - u))

    def sample(self, rng: np.random.Generator, size: int):
        """Exact draws (inverse CDF in the radius, uniform angle)."""
        u = rng.uniform(size=size)
        if self.kind == "semicircle":
            return self.ppf(u)
        if self.kind == "uniform-sphere":
            return uniform_sample(Domain("sphere"), rng, size)
        return self.radial_ppf(u) * np.exp(1j * rng.uniform(0, TWO_PI, size))

    def mean(self, f, points: int = 4096) -> float:
        """Expectation of a test function under the law, by quadrature.

        ``f`` is evaluated on native points (reals, complex numbers or unit
        3-vectors). Radial quadrature uses Gauss-Legendre in the radial CDF
        variable and a uniform angular rule, so it is exact for trigonometric
        polynomials of degree < ``points`` in the angle.
        """
        k = self.kind
        if k == "circle-boundary":
            phi = (np.arange(points) + 0.5) * TWO_PI / points
            return float(np.mean(f(np.exp(1j * phi))))
        if k == "semicircle":
            # x = cos t maps the semicircle to weight (2/pi) sin^2 t dt
            t = (np.arange(points) + 0.5) * np.pi / points
            return float(np.sum(f(np.cos(t)) * np.sin(t) ** 2) * 2 / points)
        nr = max(16, int(math.sqrt(points)))
        na = max(16, points // nr)
        gx, gw = np.polynomial.legendre.leggauss(nr)
        u = 0.5 * (gx + 1)
        phi = (np.arange(na) + 0.5) * TWO_PI / na
        if k == "uniform-sphere":
            z = 2 * u - 1
            s = np.sqrt(1 - z * z)
            p = np.stack(np.broadcast_arrays(s[:, None] * np.cos(phi), s[:, None] * np.sin(phi),
                                             z[:, None]), axis=-1)
            vals = f(p)
        else:
            vals = f(self.radial_ppf(u)[:, None] * np.exp(1j * phi))
        return float(np.sum(0.5 * gw[:, None] * vals) / na)


def closed_form(kind: str) -> LimitLaw:
    return LimitLaw(kind.strip().lower().replace("_", "-"))


# Exact energies eps of the closed-form laws for the presets' potentials.
SEMICIRCLE_ENERGY = 3 / 8 + math.log(2) / 2
UNIFORM_DISK_ENERGY = 3 / 8
UNIFORM_SPHERE_ENERGY = 0.5 * (0.5 - math.log(2))


# ---------------------------------------------------------------------------
# grid measures

@dataclass
class GridMeasure:
    """Piecewise-uniform probability measure on the cells between ``edges``.

    The coordinate is x (line), angle (circle), radius (plane, disk) or
    height z (sphere). ``weights[i]`` is the mass of cell i.
    """
    domain: Domain
    edges: np.ndarray
    weights: np.ndarray
    energy: float | None = None
    residual: float | None = None
    iterations: int = 0
    info: dict = field(default_factory=dict)

    def __post_init__(self):
        self.edges = np.asarray(self.edges, dtype=float)
        self.weights = np.asarray(self.weights, dtype=float)
        if self.edges.ndim != 1 or self.edges.size != self.weights.size + 1:
            raise ValueError("need len(edges) == len(weights) + 1")
        if np.any(np.diff(self.edges) < 0):
            raise ValueError("edges must be non-decreasing")

    @property
    def nodes(self) -> np.ndarray:
        return 0.5 * (self.edges[:-1] + self.edges[1:])

    @property
    def widths(self) -> np.ndarray:
        return np.diff(self.edges)

    def cell_measure(self) -> np.ndarray:
        """Reference (length or area) measure of every cell."""
        a, b = self.edges[:-1], self.edges[1:]
        if self.domain.planar:
            return np.pi * (b * b - a * a)
        if self.domain.kind == "sphere":
            return TWO_PI * (b - a)
        return b - a

    @property
    def density(self) -> np.ndarray:
        """Cell densities w.r.t. length (line, circle) or area (others)."""
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(self.weights > 0, self.weights / self.cell_measure(), 0.0)

    def check(self, tol: float = 1e-12):
        if np.any(self.weights < 0) or abs(self.weights.sum() - 1) > tol:
            raise NonNormalized(f"weights sum to {self.weights.sum():.17g}, min {self.weights.min():.3g}")

    def cdf(self, x):
        """CDF of the coordinate, piecewise linear between the edges."""
        cum = np.concatenate([[0.0], np.cumsum(self.weights)])
        return np.interp(x, self.edges, cum, left=0.0, right=1.0)

    def ppf(self, u):
        cum = np.concatenate([[0.0], np.cumsum(self.weights)])
        cum /= cum[-1]
        u = np.asarray(u, dtype=float)
        i = np.clip(np.searchsorted(cum, u, side="left") - 1, 0, self.weights.size - 1)
        w = self.weights[i]
        with np.errstate(divide="ignore", invalid="ignore"):
            t = np.where(w > 0, (u - cum[i]) / w, 0.0)
        return self.edges[i] + np.clip(t, 0, 1) * (self.edges[i + 1] - self.edges[i])

    def moment(self, f) -> float:
        """Integral of f(coordinate) against the measure (8-point rule per cell)."""
        a, b = self.edges[:-1], self.edges[1:]
        x = 0.5 * (a + b)[:, None] + 0.5 * (b - a)[:, None] * _GL_X
        if self.domain.planar:
            wt = _GL_W * x
            wt = wt / np.where(wt.sum(1, keepdims=True) > 0, wt.sum(1, keepdims=True), 1)
            deg = (b - a) == 0
            wt[deg] = 1.0 / _GL_W.size
        else:
            wt = np.broadcast_to(_GL_W / 2, x.shape)
        return float(np.sum(self.weights[:, None] * wt * f(x)))


def law_on_grid(law: LimitLaw | str, edges, domain: Domain | None = None) -> GridMeasure:
    """Cell masses of a closed-form law (differences of its CDF)."""
    law = closed_form(law) if isinstance(law, str) else law
    edges = np.asarray(edges, dtype=float)
    if law.kind == "semicircle":
        w = np.diff(law.cdf(edges))
        dom = Domain("line")
    elif law.kind == "uniform-sphere":
        w = np.diff((np.clip(edges, -1, 1) + 1) / 2)
        dom = Domain("sphere")
    elif law.kind == "circle-boundary":
        # unit mass in the cell whose upper edge is 1
        w = np.zeros(edges.size - 1)
        w[np.searchsorted(edges, 1.0, side="left") - 1] = 1.0
        dom = Domain("disk")
    else:
        w = np.diff(law.radial_cdf(edges))
        w[-1] += 1.0 - w.sum()
        dom = law.domain
    w = np.clip(w, 0, None)
    return GridMeasure(domain or dom, edges, w / w.sum())


# -- cell-averaged kernels ----------------------------------------------------

def _phi(t):
    """Second antiderivative of ln|t| with phi(0) = 0."""
    return 0.5 * xlogy(t * t, np.abs(t)) - 0.75 * t * t


def _line_kernel(edges):
    a, b = edges[:-1], edges[1:]
    h = b - a
    A, B = a[:, None], b[:, None]
    C, D = a[None, :], b[None, :]
    num = _phi(B - C) - _phi(A - C) - _phi(B - D) + _phi(A - D)
    den = h[:, None] * h[None, :]
    with np.errstate(divide="ignore", invalid="ignore"):
        g = -num / den
    # degenerate (point) cells: the self term diverges
    deg = h == 0
    if np.any(deg):
        mid = 0.5 * (A + B) - 0.5 * (C + D)
        pt = -np.log(np.abs(mid))
        g = np.where(deg[:, None] | deg[None, :], pt, g)
    return g


def _mean_log_annulus(a, b):
    """E[ln r] for r uniform (by area) in the annulus [a, b]."""
    d = b * b - a * a
    with np.errstate(divide="ignore", invalid="ignore"):
        m = (xlogy(b * b, b) - xlogy(a * a, a)) / d - 0.5
    return np.where(d > 0, m, np.log(b))


def _annulus_self(a, b):
    """E[-ln max(r, s)] for r, s iid uniform in the annulus [a, b]."""
    def prim(s):
        return (xlogy(s ** 4, s) / 4 - s ** 4 / 16
                - a * a * (xlogy(s * s, s) / 2 - s * s / 4))
    d = b * b - a * a
    with np.errstate(divide="ignore", invalid="ignore"):
        v = -4.0 / (d * d) * (prim(b) - prim(a))
    return np.where(d > 0, v, -np.log(b))


def _radial_kernel(edges):
    a, b = edges[:-1], edges[1:]
    ml = _mean_log_annulus(a, b)
    m = a.size
    i, j = np.indices((m, m))
    # Newton: the log potential of a ring at radius s is -ln max(r, s)
    g = -ml[np.maximum(i, j)]
    g[np.diag_indices(m)] = _annulus_self(a, b)
    return g


def _band_prim(s, p):
    # integral of (s - p) ln s ds
    return 0.5 * xlogy(s * s, s) - 0.25 * s * s - p * (xlogy(s, s) - s)


def _mean_xlog(lo, hi):
    # mean of ln s for s uniform in [lo, hi]
    L = hi - lo
    with np.errstate(divide="ignore", invalid="ignore"):
        m = ((xlogy(hi, hi) - hi) - (xlogy(lo, lo) - lo)) / L
    return np.where(L > 0, m, np.log(np.where(L > 0, 1.0, lo)))


def _sphere_kernel(edges):
    a, b = edges[:-1], edges[1:]
    L = b - a
    up = _mean_xlog(1 + a, 1 + b)      # E ln(1 + z)
    dn = _mean_xlog(1 - b, 1 - a)      # E ln(1 - z)
    m = a.size
    i, j = np.indices((m, m))
    hi, lo = np.maximum(i, j), np.minimum(i, j)
    g = -0.5 * (up[hi] + dn[lo])
    with np.errstate(divide="ignore", invalid="ignore"):
        e_up = 2 / L ** 2 * (_band_prim(1 + b, 1 + a) - _band_prim(1 + a, 1 + a))
        e_dn = 2 / L ** 2 * (_band_prim(1 - a, 1 - b) - _band_prim(1 - b, 1 - b))
    g[np.diag_indices(m)] = np.where(L > 0, -0.5 * (e_up + e_dn), -0.5 * (up + dn))
    return g


def _pair_cells(lo_i, hi_i, lo_j, hi_j):
    """Cell average of -ln|x - y| for x in [lo_i, hi_i], y in [lo_j, hi_j]."""
    num = _phi(hi_i - lo_j) - _phi(lo_i - lo_j) - _phi(hi_i - hi_j) + _phi(lo_i - hi_j)
    return -num / ((hi_i - lo_i) * (hi_j - lo_j))


def _circle_kernel(edges):
    """Cell averages of -ln|e^{ia} - e^{ib}|.

    Writes -ln|2 sin(t/2)| = -ln|t| + r(t) with r smooth on |t| < 2 pi; the
    first part uses the exact line formula after wrapping the cell offset into
    (-pi, pi], the second an 8x8 Gauss-Legendre rule.
    """
    a, b = edges[:-1], edges[1:]
    h = b - a
    c = 0.5 * (a + b)
    d = np.mod(c[:, None] - c[None, :] + np.pi, TWO_PI) - np.pi
    hi, hj = h[:, None], h[None, :]
    g = _pair_cells(d - hi / 2, d + hi / 2, -hj / 2, hj / 2)
    gw = _GL_W / 2
    for k in range(_GL_X.size):
        for l in range(_GL_X.size):
            t = d + 0.5 * (hi * _GL_X[k] - hj * _GL_X[l])
            g -= gw[k] * gw[l] * np.log(np.sinc(t / TWO_PI))
    return g


def _kernel_factor(spec: EnsembleSpec) -> float:
    # For conjugation-symmetric rotation-invariant measures the mirror term
    # averages exactly like the direct one.
    return 2.0 if spec.kernel.kind == "image" else 1.0


def kernel_matrix(spec: EnsembleSpec, edges) -> np.ndarray:
    kind = spec.domain.kind
    edges = np.asarray(edges, dtype=float)
    if kind == "line":
        g = _line_kernel(edges)
    elif kind == "circle":
        g = _circle_kernel(edges)
    elif kind == "sphere":
        g = _sphere_kernel(edges)
    else:
        g = _radial_kernel(edges)
    return _kernel_factor(spec) * g


def potential_averages(spec: EnsembleSpec, edges) -> np.ndarray:
    """Cell averages of V (8-point Gauss-Legendre; area-weighted for annuli)."""
    edges = np.asarray(edges, dtype=float)
    a, b = edges[:-1], edges[1:]
    x = 0.5 * (a + b)[:, None] + 0.5 * (b - a)[:, None] * _GL_X
    kind = spec.domain.kind
    if kind == "sphere":
        return np.zeros(a.size)
    pts = embed(spec.domain, x) if kind in ("line", "circle") else embed(spec.domain, x.astype(complex))
    v = spec.potential(pts)
    if spec.domain.planar:
        wt = _GL_W * x
        tot = wt.sum(1, keepdims=True)
        wt = np.where(tot > 0, wt / np.where(tot > 0, tot, 1), 1.0 / _GL_W.size)
    else:
        wt = np.broadcast_to(_GL_W / 2, x.shape)
    return np.sum(wt * v, axis=1)


def energy_of_measure(spec: EnsembleSpec, m: GridMeasure, kernel=None, vavg=None) -> float:
    """eps(rho) = 1/2 sum_ij w_i G_ij w_j + sum_i w_i V_i for a grid measure."""
    if m.domain.kind != spec.domain.kind:
        raise ValueError(f"measure lives on {m.domain}, spec on {spec.domain}")
    m.check()
    g = kernel_matrix(spec, m.edges) if kernel is None else kernel
    v = potential_averages(spec, m.edges) if vavg is None else vavg
    w = m.weights
    with np.errstate(invalid="ignore"):
        e = 0.5 * w @ (g @ w) + w @ v
    return float(e) if np.isfinite(e) else math.inf


# -- solver -------------------------------------------------------------------

def support_guess(spec: EnsembleSpec) -> float:
    """Rough support radius of the minimizer (exact for quadratic V)."""
    pot = spec.potential
    if pot.kind == "quadratic" and pot.c > 0:
        if spec.domain.kind == "line":
            return 1 / math.sqrt(pot.c)
        return math.sqrt(_kernel_factor(spec) / (2 * pot.c))
    return 1.0


def default_bound(spec: EnsembleSpec, margin: float = 5.0) -> float:
    """Truncation radius for unbounded domains: the region V <= V(guess) + margin."""
    dom = spec.domain
    if dom.kind == "disk":
        return dom.radius
    if dom.kind in ("line", "plane"):
        if spec.potential.kind == "zero":
            raise NonConfining(f"zero potential on the unbounded {dom} does not confine")
        r0 = support_guess(spec)
        vmax = float(spec.potential(np.array([r0, 0.0, 0.0]))) + margin

        def v(r):
            return spec.potential(np.stack([r, np.zeros_like(r), np.zeros_like(r)], -1))
        return float(_bisect(v, np.array(vmax), r0, 1e6 * r0))
    raise ValueError(f"{dom} is compact; no truncation bound")


def default_edges(spec: EnsembleSpec, m: int, bound: float | None = None) -> np.ndarray:
    kind = spec.domain.kind
    if kind == "sphere":
        return np.linspace(-1.0, 1.0, m + 1)
    if kind == "circle":
        return np.linspace(0.0, TWO_PI, m + 1)
    R = default_bound(spec) if bound is None else float(bound)
    if kind == "line":
        return np.linspace(-R, R, m + 1)
    return np.linspace(0.0, R, m + 1)


def project_simplex(v: np.ndarray) -> np.ndarray:
    """Euclidean projection onto the probability simplex (sort and threshold)."""
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    k = np.arange(1, v.size + 1)
    rho = np.nonzero(u - css / k > 0)[0][-1]
    return np.maximum(v - css[rho] / (rho + 1), 0.0)


def el_residual(g, vavg, w, floor: float = SUPPORT_FLOOR):
    """Euler-Lagrange residual: (max |phi - level| on the support, level, phi)."""
    phi = g @ w + vavg
    supp = w > floor
    level = float(np.sum(w[supp] * phi[supp]) / np.sum(w[supp]))
    return float(np.max(np.abs(phi[supp] - level))), level, phi


def _kkt_polish(g, vavg, w, tol, rounds=60):
    """Active-set Newton step: solve the KKT system on the current support,
    dropping cells that go negative and adding cells whose potential dips
    below the level."""
    m = w.size
    S = w > SUPPORT_FLOOR
    best = w
    for _ in range(rounds):
        idx = np.nonzero(S)[0]
        k = idx.size
        A = np.zeros((k + 1, k + 1))
        A[:k, :k] = g[np.ix_(idx, idx)]
        A[:k, k] = -1.0
        A[k, :k] = 1.0
        rhs = np.concatenate([-vavg[idx], [1.0]])
        try:
            sol = np.linalg.solve(A, rhs)
        except np.linalg.LinAlgError:
            break
        x = sol[:k]
        if np.any(x < 0):
            S[idx[x < 0]] = False
            if not S.any():
                break
            continue
        cand = np.zeros(m)
        cand[idx] = x
        phi = g @ cand + vavg
        level = sol[k]
        best = cand
        low = (~S) & (phi < level - 0.1 * tol)
        if not low.any():
            break
        S[np.argmin(np.where(low, phi - level, np.inf))] = True
    return best


def _lipschitz(g, iters=200, seed=0):
    m = g.shape[0]
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(m)
    lam = 1.0
    for _ in range(iters):
        x -= x.mean()
        y = g @ x
        y -= y.mean()
        lam = np.linalg.norm(y) / np.linalg.norm(x)
        x = y / np.linalg.norm(y)
    return 1.05 * lam


def solve_grid(spec: EnsembleSpec, resolution: int = 512, iterations: int = 20000,
               tol: float = 1e-3, edges=None, bound: float | None = None,
               polish: bool = True, symmetric: bool | None = None) -> GridMeasure:
    """Minimize the discretized energy over the simplex of cell weights.

    Accelerated projected gradient (sort-and-threshold simplex projection)
    followed, if requested, by an active-set polish of the KKT system.
    Converged when the Euler-Lagrange residual is below ``tol``.
    """
    if resolution < 2 or iterations < 1 or not tol > 0:
        raise BadSettings("need resolution >= 2, iterations >= 1, tol > 0")
    if edges is None:
        edges = default_edges(spec, resolution, bound)
    edges = np.asarray(edges, dtype=float)
    g = kernel_matrix(spec, edges)
    vavg = potential_averages(spec, edges)
    m = vavg.size
    if symmetric is None:
        symmetric = spec.domain.kind == "line" and np.allclose(edges, -edges[::-1]) \
            and np.allclose(vavg, vavg[::-1], rtol=1e-13, atol=1e-13)
    L = _lipschitz(g)
    w = np.full(m, 1.0 / m)
    y = w.copy()
    t = 1.0
    res = math.inf
    it = 0
    for it in range(1, iterations + 1):
        w_new = project_simplex(y - (g @ y + vavg) / L)
        if symmetric:
            w_new = 0.5 * (w_new + w_new[::-1])
        t_new = 0.5 * (1 + math.sqrt(1 + 4 * t * t))
        y = w_new + (t - 1) / t_new * (w_new - w)
        # restart momentum when the objective goes up
        if (w_new - w) @ (g @ w_new + vavg) > 0:
            y = w_new.copy()
            t_new = 1.0
        w, t = w_new, t_new
        if it % 50 == 0:
            res = el_residual(g, vavg, w)[0]
            if res < tol:
                break
    method = "projected-gradient"
    if polish:
        wp = _kkt_polish(g, vavg, w.copy(), tol)
        if symmetric:
            wp = 0.5 * (wp + wp[::-1])
        wp = np.clip(wp, 0, None)
        wp /= wp.sum()
        rp = el_residual(g, vavg, wp)[0]
        e_old = 0.5 * w @ g @ w + w @ vavg
        e_new = 0.5 * wp @ g @ wp + wp @ vavg
        if e_new <= e_old + 1e-14 and rp <= max(res, el_residual(g, vavg, w)[0]):
            w, method = wp, "projected-gradient+kkt"
    res, level, _ = el_residual(g, vavg, w)
    if not res < tol:
        raise NoConvergence(f"Euler-Lagrange residual {res:.3g} >= tol {tol:g} after {it} iterations")
    out = GridMeasure(spec.domain, edges, w, iterations=it,
                      info={"method": method, "level": level, "lipschitz": L})
    out.energy = energy_of_measure(spec, out, g, vavg)
    out.residual = res
    return out


def level_spread(spec: EnsembleSpec, m: GridMeasure) -> float:
    """Standard deviation of U + V over the support (mass-weighted)."""
    g = kernel_matrix(spec, m.edges)
    v = potential_averages(spec, m.edges)
    phi = g @ m.weights + v
    s = m.weights > SUPPORT_FLOOR
    p = m.weights[s] / m.weights[s].sum()
    mu = p @ phi[s]
    return float(math.sqrt(max(p @ (phi[s] - mu) ** 2, 0.0)))


# ---------------------------------------------------------------------------
# point charges

@dataclass
class ChargeConfig:
    """n equal point charges (weight 1/n each) in native coordinates."""
    domain: Domain
    points: np.ndarray
    energy: float
    residual: float
    iterations: int
    restart: int
    history: np.ndarray | None = None

    @property
    def n(self) -> int:
        return len(self.points)


class _Charges:
    """Coordinates, projection and tangent gradient for one domain."""

    def __init__(self, spec: EnsembleSpec, n: int):
        self.spec = spec
        self.n = n
        kern, _, pot, c = spec.codes
        self.kern, self.pot, self.c = kern, pot, c
        self.kind = spec.domain.kind
        self._grad = np.zeros((n, 3))

    def to_xyz(self, x):
        kind = self.kind
        if kind == "line":
            out = np.zeros((self.n, 3))
            out[:, 0] = x
            return out
        if kind == "circle":
            return np.stack([np.cos(x), np.sin(x), np.zeros(self.n)], -1)
        if kind == "sphere":
            return x
        out = np.zeros((self.n, 3))
        out[:, :2] = x
        return out

    def eval(self, x):
        """Energy (beta-free, sum G + n sum V) and its gradient in x-coords."""
        xyz = np.ascontiguousarray(self.to_xyz(x))
        e = K.discrete_energy_grad(xyz, self.kern, self.pot, self.c, float(self.n), self._grad)
        gr = self._grad
        kind = self.kind
        if kind == "line":
            return e, gr[:, 0].copy()
        if kind == "circle":
            return e, -np.sin(x) * gr[:, 0] + np.cos(x) * gr[:, 1]
        if kind == "sphere":
            return e, gr - np.sum(gr * x, 1, keepdims=True) * x
        return e, gr[:, :2].copy()

    def project(self, x):
        kind = self.kind
        if kind == "circle":
            return np.mod(x, TWO_PI)
        if kind == "sphere":
            return x / np.linalg.norm(x, axis=1, keepdims=True)
        if kind == "disk":
            r = np.linalg.norm(x, axis=1, keepdims=True)
            R = self.spec.domain.radius
            return np.where(r > R, x * (R / np.where(r > 0, r, 1)), x)
        return x

    def residual(self, x, grad):
        """Max force per charge, with the outward normal removed at the wall."""
        f = grad
        if self.kind == "disk":
            R = self.spec.domain.radius
            r = np.linalg.norm(x, axis=1)
            on = r >= R * (1 - 1e-9)
            nrm = x / np.where(r > 0, r, 1)[:, None]
            push = -np.sum(f * nrm, 1)
            f = f.copy()
            blocked = on & (push > 0)
            f[blocked] += (push[blocked])[:, None] * nrm[blocked]
        f = np.abs(f) if f.ndim == 1 else np.linalg.norm(f, axis=1)
        return float(np.max(f)) / self.n

    def start(self, rng):
        n, kind = self.n, self.kind
        if kind == "line":
            return np.sort(rng.standard_normal(n)) * 0.5 * support_guess(self.spec)
        if kind == "plane":
            return rng.standard_normal((n, 2)) * 0.5 * support_guess(self.spec)
        if kind == "circle":
            return uniform_sample(self.spec.domain, rng, n)
        if kind == "sphere":
            return uniform_sample(self.spec.domain, rng, n)
        z = uniform_sample(self.spec.domain, rng, n)
        return np.stack([z.real, z.imag], -1)

    def native(self, x):
        if self.kind in ("plane", "disk"):
            return x[:, 0] + 1j * x[:, 1]
        return np.array(x, copy=True)


def _descend(ch: _Charges, x, iterations, tol, keep_history=False):
    """Projected gradient descent, Barzilai-Borwein trial steps with Armijo
    backtracking; the energy never increases between accepted iterates."""
    e, g = ch.eval(x)
    hist = [e] if keep_history else None
    eta = 1e-3 / ch.n
    x_old = g_old = None
    res = ch.residual(x, g)
    it = 0
    for it in range(1, iterations + 1):
        if res < tol:
            it -= 1
            break
        if x_old is not None:
            s = (x - x_old).ravel()
            yv = (g - g_old).ravel()
            sy = s @ yv
            eta = s @ s / sy if sy > 0 else 2 * eta
            eta = min(max(eta, 1e-14), 1e3)
        for _ in range(60):
            xn = ch.project(x - eta * g)
            en, gn = ch.eval(xn)
            # angles wrap, so on the circle measure the step before wrapping
            dec = eta * (g @ g) if ch.kind == "circle" else np.sum(g * (x - xn))
            if np.isfinite(en) and en <= e - 1e-4 * dec:
                break
            eta *= 0.5
        else:
            break
        x_old, g_old = x, g
        x, e, g = xn, en, gn
        res = ch.residual(x, g)
        if keep_history:
            hist.append(e)
    return x, e, res, it, hist


def minimize_discrete(spec: EnsembleSpec, n: int, iterations: int = 20000,
                      tol: float = 1e-6, restarts: int = 4, seed: int = 0,
                      threads: int = 1, strict: bool = True,
                      keep_history: bool = False) -> ChargeConfig:
    """Minimum of sum_{i<j} w + n sum v over n charges (best of ``restarts``).

    The reported ``energy`` is beta times the beta-free discrete energy;
    ``residual`` is the largest force per charge (divided by n), tangential on
    the sphere and at the disk wall.
    """
    if n < 2:
        raise BadSettings("minimize_discrete needs n >= 2")
    if spec.domain.kind in ("line", "plane") and spec.potential.kind == "zero":
        raise NonConfining(f"zero potential on {spec.domain}: charges escape to infinity")
    seeds = np.random.SeedSequence(seed).spawn(restarts)

    def one(k):
        ch = _Charges(spec, n)
        rng = np.random.default_rng(seeds[k])
        x0 = ch.start(rng)
        x, e, res, it, hist = _descend(ch, x0, iterations, tol, keep_history)
        return e, k, ch.native(x), res, it, hist

    if threads > 1:
        with ThreadPoolExecutor(threads) as ex:
            runs = list(ex.map(one, range(restarts)))
    else:
        runs = [one(k) for k in range(restarts)]
    e, k, pts, res, it, hist = min(runs, key=lambda r: (r[0], r[1]))
    if strict and not res < tol:
        raise NoConvergence(f"force residual {res:.3g} >= tol {tol:g} after {it} iterations")
    return ChargeConfig(spec.domain, as_points(spec.domain, pts), spec.beta * e, res, it, k,
                        None if hist is None else np.asarray(hist) * spec.beta)
