"""Sample spaces, uniform sampling and symmetric random-walk proposals.

Native point representations (arrays of points stack along axis 0):

    line    float
    circle  float angle in [0, 2 pi)
    plane   complex
    disk    complex with |z| <= radius
    sphere  unit 3-vector, shape (3,)

Every domain also has an embedding into R^3 (see :func:`embed`) in which the
Euclidean distance is the distance the log kernels use: |x - y| on the line and
plane, |e^{i a} - e^{i b}| on the circle and the chordal distance on the sphere.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainMismatch, UnboundedDomain

KINDS = ("line", "circle", "plane", "disk", "sphere")
TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class Domain:
    kind: str
    radius: float = 1.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown domain kind {self.kind!r}")
        if self.kind == "disk" and not self.radius > 0:
            raise ValueError("disk radius must be positive")

    @classmethod
    def parse(cls, text: str) -> "Domain":
        """Parse the config tag: ``line | circle | plane | disk:R | sphere``."""
        text = text.strip().lower()
        if text.startswith("disk"):
            _, _, r = text.partition(":")
            return cls("disk", float(r) if r else 1.0)
        return cls(text)

    def __str__(self):
        if self.kind == "disk":
            return f"disk:{self.radius:g}"
        return self.kind

    @property
    def bounded(self) -> bool:
        return self.kind in ("circle", "disk", "sphere")

    @property
    def planar(self) -> bool:
        return self.kind in ("plane", "disk")

    @property
    def scale(self) -> float:
        """Upper clamp for proposal step sizes."""
        return {"line": 5.0, "plane": 5.0, "circle": np.pi,
                "disk": 2.0 * self.radius, "sphere": 2.0}[self.kind]

    def empty(self, n: int) -> np.ndarray:
        if self.kind == "sphere":
            return np.zeros((n, 3))
        if self.planar:
            return np.zeros(n, dtype=complex)
        return np.zeros(n)


def as_points(domain: Domain, pts) -> np.ndarray:
    """Coerce to the native array layout of ``domain`` (copy)."""
    if domain.kind == "sphere":
        a = np.array(pts, dtype=float).reshape(-1, 3)
    elif domain.planar:
        a = np.array(pts, dtype=complex).reshape(-1)
    else:
        a = np.array(pts, dtype=complex).reshape(-1)
        if np.any(a.imag != 0):
            raise DomainMismatch(f"{domain} points must be real")
        a = a.real.copy()
    return a


def contains(domain: Domain, pts, tol: float = 1e-12) -> np.ndarray:
    pts = np.asarray(pts)
    if domain.kind == "sphere":
        return np.abs(np.linalg.norm(pts.reshape(-1, 3), axis=-1) - 1.0) <= tol
    if domain.kind == "disk":
        return np.abs(pts) <= domain.radius + tol
    if domain.kind == "circle":
        return (pts >= 0) & (pts < TWO_PI)
    if domain.kind == "line":
        return np.isreal(pts) & np.isfinite(pts)
    return np.isfinite(pts)


def embed(domain: Domain, pts) -> np.ndarray:
    """Map native points to R^3, shape (..., 3)."""
    pts = np.asarray(pts)
    if domain.kind == "sphere":
        return np.array(pts, dtype=float)
    out = np.zeros(pts.shape + (3,))
    if domain.kind == "circle":
        out[..., 0] = np.cos(pts)
        out[..., 1] = np.sin(pts)
    elif domain.kind == "line":
        out[..., 0] = np.real(pts)
    else:
        out[..., 0] = pts.real
        out[..., 1] = pts.imag
    return out


def to_complex(domain: Domain, pts) -> np.ndarray:
    """Complex coordinate used for CSV output and planar statistics.

    The sphere is projected stereographically so that the equator lands on
    the unit circle and the south pole on the origin.
    """
    pts = np.asarray(pts)
    if domain.kind == "sphere":
        return stereographic(pts)
    if domain.kind == "circle":
        return np.exp(1j * pts)
    return pts.astype(complex)


def from_complex(domain: Domain, z) -> np.ndarray:
    z = np.asarray(z, dtype=complex)
    if domain.kind == "sphere":
        return inverse_stereographic(z)
    if domain.kind == "circle":
        return np.mod(np.angle(z), TWO_PI)
    if domain.kind == "line":
        return z.real.copy()
    return z


def stereographic(p) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        return (p[..., 0] + 1j * p[..., 1]) / (1.0 - p[..., 2])


def inverse_stereographic(z) -> np.ndarray:
    z = np.asarray(z, dtype=complex)
    r2 = np.abs(z) ** 2
    out = np.empty(z.shape + (3,))
    out[..., 0] = 2 * z.real / (1 + r2)
    out[..., 1] = 2 * z.imag / (1 + r2)
    out[..., 2] = (r2 - 1) / (r2 + 1)
    return out


def uniform_sample(domain: Domain, rng: np.random.Generator, size=None):
    """Draw from the normalized uniform reference measure of a bounded domain."""
    if not domain.bounded:
        raise UnboundedDomain(f"{domain} has no normalizable uniform measure")
    shape = () if size is None else (size,) if np.isscalar(size) else tuple(size)
    if domain.kind == "circle":
        return rng.uniform(0.0, TWO_PI, shape)
    if domain.kind == "disk":
        r = domain.radius * np.sqrt(rng.uniform(0.0, 1.0, shape))
        return r * np.exp(1j * rng.uniform(0.0, TWO_PI, shape))
    g = rng.standard_normal(shape + (3,))
    return g / np.linalg.norm(g, axis=-1, keepdims=True)


def candidates(domain: Domain, x, step: float, rng: np.random.Generator):
    """Raw symmetric random-walk candidates for every point in ``x``.

    Returns ``(cand, inside)``. Disk candidates that leave the disk are kept
    as-is and flagged ``inside=False``; the sampler treats them as rejected
    moves, which keeps the proposal kernel symmetric.
    """
    x = np.asarray(x)
    n = x.shape[0] if x.ndim else 1
    kind = domain.kind
    inside = np.ones(n, dtype=bool)
    if kind == "line":
        cand = x + step * rng.standard_normal(x.shape)
    elif kind == "circle":
        cand = np.mod(x + step * rng.standard_normal(x.shape), TWO_PI)
        # mod can round up to exactly 2 pi
        cand = np.where(cand >= TWO_PI, 0.0, cand)
    elif kind in ("plane", "disk"):
        g = rng.standard_normal(x.shape + (2,))
        cand = x + step * (g[..., 0] + 1j * g[..., 1])
        if kind == "disk":
            inside = np.atleast_1d(np.abs(cand) <= domain.radius)
    else:
        g = step * rng.standard_normal(x.shape)
        g -= np.sum(g * x, axis=-1, keepdims=True) * x
        cand = x + g
        cand /= np.linalg.norm(cand, axis=-1, keepdims=True)
    return cand, inside


def propose(domain: Domain, x, step: float, rng: np.random.Generator,
            min_step: float = 1e-6):
    """Symmetric random-walk proposal from ``x`` (scalar point or array).

    Line/plane: isotropic Gaussian of scale ``step``. Circle: wrapped Gaussian
    angle increment. Sphere: tangent-space Gaussian renormalized to the unit
    sphere. Disk: Gaussian increment; a candidate outside the disk becomes a
    null move (the start point is returned).
    """
    step = max(float(step), min_step)
    single = domain.kind == "sphere" and np.ndim(x) == 1 or np.ndim(x) == 0
    xa = np.atleast_2d(x) if domain.kind == "sphere" else np.atleast_1d(x)
    if step == 0.0:
        out = xa.copy()
    else:
        out, inside = candidates(domain, xa, step, rng)
        if not np.all(inside):
            out = np.where(inside, out, xa)
    return out[0] if single else out


def chordal_distance(p, q, domain: Domain | None = None):
    """Euclidean distance in R^3 between points of the unit sphere."""
    if domain is not None and domain.kind != "sphere":
        raise DomainMismatch("chordal distance is defined on the sphere only")
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if p.shape[-1:] != (3,) or q.shape[-1:] != (3,):
        raise DomainMismatch("chordal distance needs unit 3-vectors")
    if np.any(np.abs(np.linalg.norm(p, axis=-1) - 1) > 1e-9) or \
            np.any(np.abs(np.linalg.norm(q, axis=-1) - 1) > 1e-9):
        raise DomainMismatch("points are not on the unit sphere")
    return np.linalg.norm(p - q, axis=-1)
