"""Gaussian matrix ensembles and self-contained eigensolvers.

Sampling follows m(dM) ~ exp(-kappa N Tr V(M)) with V(M) = M^dagger M. The
entry variances come from expanding the trace into independent real entries;
quaternion matrices use their 2n x 2n complex embedding

    [[ A,       B     ],
     [ -conj B, conj A]],   J = [[0, I], [-I, 0]],  M = J conj(M) J^-1.

Eigenvalues come from cyclic complex Jacobi rotations (Hermitian input) or
Householder-Hessenberg reduction followed by single-shift complex QR.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from .errors import NoConvergence, NotHermitian


@dataclass(frozen=True)
class MatrixClass:
    name: str
    beta: int
    kappa: int
    hermitian: bool
    quaternion: bool


REAL_SYMMETRIC = MatrixClass("real-symmetric", 1, 1, True, False)
COMPLEX_HERMITIAN = MatrixClass("complex-hermitian", 2, 2, True, False)
QUATERNION_SELF_DUAL = MatrixClass("quaternion-self-dual", 4, 2, True, True)
COMPLEX_GENERAL = MatrixClass("complex-general", 2, 2, False, False)
QUATERNION_GENERAL = MatrixClass("quaternion-general", 2, 1, False, True)

CLASSES = {c.name: c for c in (REAL_SYMMETRIC, COMPLEX_HERMITIAN, QUATERNION_SELF_DUAL,
                               COMPLEX_GENERAL, QUATERNION_GENERAL)}
# matrix ensemble behind each line/plane gas preset
PRESET_CLASS = {"goe": REAL_SYMMETRIC, "gue": COMPLEX_HERMITIAN, "gse": QUATERNION_SELF_DUAL,
                "ginibre": COMPLEX_GENERAL, "quaternion-ginibre": QUATERNION_GENERAL}


def entry_variances(mc: MatrixClass, n: int) -> dict:
    """Variance of each independent real component, keyed by entry type.

    real-symmetric      exp(-N Tr M^2):          diag 1/(2N), off 1/(4N)
    complex-hermitian   exp(-2N Tr M^2):         diag 1/(4N), off re/im 1/(8N)
    quaternion-self-dual exp(-2N Tr_2n M^2):     diag 1/(8N), off components 1/(16N)
    complex-general     exp(-N Tr M^dagger M):   re/im 1/(2N)
    quaternion-general  exp(-N Tr_2n M^dagger M): components 1/(4N)
    """
    n = float(n)
    return {
        "real-symmetric": {"diag": 1 / (2 * n), "off": 1 / (4 * n)},
        "complex-hermitian": {"diag": 1 / (4 * n), "off": 1 / (8 * n)},
        "quaternion-self-dual": {"diag": 1 / (8 * n), "off": 1 / (16 * n)},
        "complex-general": {"entry": 1 / (2 * n)},
        "quaternion-general": {"entry": 1 / (4 * n)},
    }[mc.name]


def quaternion_embed(q, n: int | None = None) -> np.ndarray:
    """Embed a quaternion matrix given as real components ``q[0..3]`` of shape
    (4, n, n), q = a + b i + c j + d k, as the 2n x 2n complex matrix
    [[A, B], [-conj B, conj A]] with A = a + i b, B = c + i d."""
    q = np.asarray(q, dtype=float)
    if q.ndim == 2 and q.shape[0] == 4:
        q = q.reshape(4, 1, 1)
    if n is not None and q.shape[1:] != (n, n):
        raise ValueError(f"expected components of shape (4, {n}, {n})")
    a = q[0] + 1j * q[1]
    b = q[2] + 1j * q[3]
    return np.block([[a, b], [-b.conj(), a.conj()]])


def symplectic_unit(n: int) -> np.ndarray:
    eye = np.eye(n)
    z = np.zeros((n, n))
    return np.block([[z, eye], [-eye, z]])


def sample_matrix(mc: MatrixClass | str, n: int, rng: np.random.Generator) -> np.ndarray:
    """One draw from the Gaussian ensemble of class ``mc`` (size n, or 2n embedded)."""
    if isinstance(mc, str):
        mc = CLASSES[mc]
    if n < 1:
        raise ValueError("n must be >= 1")
    var = entry_variances(mc, n)
    if mc.name == "real-symmetric":
        g = rng.standard_normal((n, n)) * math.sqrt(var["off"])
        m = np.triu(g, 1)
        m = m + m.T
        m[np.diag_indices(n)] = rng.standard_normal(n) * math.sqrt(var["diag"])
        return m.astype(complex)
    if mc.name == "complex-hermitian":
        return _hermitian(rng, n, var)
    if mc.name == "complex-general":
        s = math.sqrt(var["entry"])
        return s * (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n)))
    if mc.name == "quaternion-general":
        s = math.sqrt(var["entry"])
        return quaternion_embed(s * rng.standard_normal((4, n, n)))
    # quaternion self-dual Hermitian: A Hermitian, B complex antisymmetric
    a = _hermitian(rng, n, var)
    s = math.sqrt(var["off"])
    g = np.triu(s * (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))), 1)
    b = g - g.T
    return np.block([[a, b], [-b.conj(), a.conj()]])


def _hermitian(rng, n, var):
    s = math.sqrt(var["off"])
    g = np.triu(s * (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))), 1)
    m = g + g.conj().T
    m[np.diag_indices(n)] = rng.standard_normal(n) * math.sqrt(var["diag"])
    return m


# ---------------------------------------------------------------------------
# Hermitian: cyclic complex Jacobi

@njit(cache=True, nogil=True)
def _jacobi_sweeps(a, tol, max_sweeps):
    n = a.shape[0]
    fro = 0.0
    for i in range(n):
        for j in range(n):
            fro += a[i, j].real ** 2 + a[i, j].imag ** 2
    fro = math.sqrt(fro)
    if fro == 0.0:
        return 0
    for sweep in range(max_sweeps):
        off = 0.0
        for p in range(n):
            for q in range(p + 1, n):
                off += a[p, q].real ** 2 + a[p, q].imag ** 2
        off = math.sqrt(2.0 * off)
        if off <= tol * fro:
            return sweep
        for p in range(n - 1):
            for q in range(p + 1, n):
                g = a[p, q]
                ag = abs(g)
                if ag <= 1e-300 or ag < 1e-18 * fro:
                    continue
                ph = g / ag
                app = a[p, p].real
                aqq = a[q, q].real
                tau = (aqq - app) / (2.0 * ag)
                if tau >= 0:
                    t = 1.0 / (tau + math.sqrt(1.0 + tau * tau))
                else:
                    t = -1.0 / (-tau + math.sqrt(1.0 + tau * tau))
                c = 1.0 / math.sqrt(1.0 + t * t)
                s = t * c
                # U = diag(1, conj(ph)) @ [[c, s], [-s, c]] on the (p, q) plane
                upp = c + 0j
                upq = s + 0j
                uqp = -s * ph.conjugate()
                uqq = c * ph.conjugate()
                for k in range(n):
                    akp = a[k, p]
                    akq = a[k, q]
                    a[k, p] = akp * upp + akq * uqp
                    a[k, q] = akp * upq + akq * uqq
                for k in range(n):
                    apk = a[p, k]
                    aqk = a[q, k]
                    a[p, k] = upp.conjugate() * apk + uqp.conjugate() * aqk
                    a[q, k] = upq.conjugate() * apk + uqq.conjugate() * aqk
                a[p, q] = 0.0
                a[q, p] = 0.0
                a[p, p] = a[p, p].real
                a[q, q] = a[q, q].real
    return -1


def eigenvalues_hermitian(m, tol: float = 1e-13, max_sweeps: int = 100,
                          check_tol: float = 1e-12) -> np.ndarray:
    """All eigenvalues of a Hermitian matrix, ascending."""
    a = np.array(m, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError("square matrix required")
    scale = max(1.0, float(np.max(np.abs(a)))) if a.size else 1.0
    if np.max(np.abs(a - a.conj().T), initial=0.0) > check_tol * scale:
        raise NotHermitian("matrix is not Hermitian within tolerance")
    a = 0.5 * (a + a.conj().T)
    if _jacobi_sweeps(a, tol, max_sweeps) < 0:
        raise NoConvergence(f"Jacobi did not converge in {max_sweeps} sweeps")
    return np.sort(np.diag(a).real)


# ---------------------------------------------------------------------------
# general: Householder to Hessenberg, then shifted QR

@njit(cache=True, nogil=True)
def _hessenberg(a):
    n = a.shape[0]
    for k in range(n - 2):
        alpha = 0.0
        for i in range(k + 1, n):
            alpha += a[i, k].real ** 2 + a[i, k].imag ** 2
        alpha = math.sqrt(alpha)
        if alpha == 0.0:
            continue
        x0 = a[k + 1, k]
        phase = x0 / abs(x0) if abs(x0) > 0 else 1.0 + 0j
        v = np.zeros(n - k - 1, dtype=np.complex128)
        for i in range(k + 1, n):
            v[i - k - 1] = a[i, k]
        v[0] += phase * alpha
        vn = 0.0
        for i in range(v.shape[0]):
            vn += v[i].real ** 2 + v[i].imag ** 2
        if vn == 0.0:
            continue
        # H = I - 2 v v^H / (v^H v); apply from the left then the right
        for j in range(n):
            s = 0j
            for i in range(v.shape[0]):
                s += v[i].conjugate() * a[k + 1 + i, j]
            s = 2.0 * s / vn
            for i in range(v.shape[0]):
                a[k + 1 + i, j] -= v[i] * s
        for i in range(n):
            s = 0j
            for j in range(v.shape[0]):
                s += a[i, k + 1 + j] * v[j]
            s = 2.0 * s / vn
            for j in range(v.shape[0]):
                a[i, k + 1 + j] -= s * v[j].conjugate()
        for i in range(k + 2, n):
            a[i, k] = 0.0


@njit(cache=True, nogil=True)
def _wilkinson(a, b, c, d):
    # eigenvalue of [[a, b], [c, d]] closer to d
    tr = 0.5 * (a + d)
    det = a * d - b * c
    disc = np.sqrt(tr * tr - det + 0j)
    l1 = tr + disc
    l2 = tr - disc
    return l1 if abs(l1 - d) < abs(l2 - d) else l2


@njit(cache=True, nogil=True)
def _hqr(h, eig, max_iter_per_eig):
    n = h.shape[0]
    eps = 2.220446049250313e-16
    hi = n - 1
    its = 0
    while hi >= 0:
        if hi == 0:
            eig[0] = h[0, 0]
            break
        l = hi
        while l > 0:
            s = abs(h[l, l]) + abs(h[l - 1, l - 1])
            if s == 0.0:
                s = 1.0
            if abs(h[l, l - 1]) <= eps * s:
                h[l, l - 1] = 0.0
                break
            l -= 1
        if l == hi:
            eig[hi] = h[hi, hi]
            hi -= 1
            its = 0
            continue
        its += 1
        if its > max_iter_per_eig:
            return False
        if its % 10 == 0:
            # exceptional shift breaks cycles
            mu = h[hi, hi] + (0.75 + 0.4375j) * abs(h[hi, hi - 1])
        else:
            mu = _wilkinson(h[hi - 1, hi - 1], h[hi - 1, hi], h[hi, hi - 1], h[hi, hi])
        m = hi - l + 1
        cs = np.empty(m - 1, dtype=np.float64)
        sn = np.empty(m - 1, dtype=np.complex128)
        for k in range(l, hi + 1):
            h[k, k] -= mu
        for k in range(l, hi):
            x = h[k, k]
            y = h[k + 1, k]
            r = math.sqrt(x.real ** 2 + x.imag ** 2 + y.real ** 2 + y.imag ** 2)
            if r == 0.0:
                c = 1.0
                s = 0j
            else:
                ax = abs(x)
                if ax == 0.0:
                    c = 0.0
                    s = y.conjugate() / abs(y)
                else:
                    c = ax / r
                    s = (x / ax) * y.conjugate() / r
            cs[k - l] = c
            sn[k - l] = s
            # rows k, k+1: G = [[c, s], [-conj s, c]]
            for j in range(k, hi + 1):
                t1 = h[k, j]
                t2 = h[k + 1, j]
                h[k, j] = c * t1 + s * t2
                h[k + 1, j] = -s.conjugate() * t1 + c * t2
        for k in range(l, hi):
            c = cs[k - l]
            s = sn[k - l]
            top = min(k + 2, hi)
            for i in range(l, top + 1):
                t1 = h[i, k]
                t2 = h[i, k + 1]
                h[i, k] = c * t1 + s.conjugate() * t2
                h[i, k + 1] = -s * t1 + c * t2
        for k in range(l, hi + 1):
            h[k, k] += mu
    return True


def eigenvalues_general(m, max_iter_per_eig: int = 60) -> np.ndarray:
    """All eigenvalues of a square complex matrix (unsorted)."""
    h = np.array(m, dtype=complex)
    if h.ndim != 2 or h.shape[0] != h.shape[1]:
        raise ValueError("square matrix required")
    n = h.shape[0]
    eig = np.zeros(n, dtype=complex)
    if n == 0:
        return eig
    _hessenberg(h)
    if not _hqr(h, eig, max_iter_per_eig):
        raise NoConvergence("shifted QR hit its iteration cap")
    return eig


def pair_conjugates(eig, tol: float = 1e-7):
    """Split a spectrum closed under conjugation into one representative per
    pair (Im >= 0). Returns (representatives, max pairing residual)."""
    eig = np.asarray(eig, dtype=complex)
    scale = max(1.0, float(np.max(np.abs(eig)))) if eig.size else 1.0
    upper = np.sort_complex(eig[eig.imag > tol * scale])
    lower = np.sort_complex(eig[eig.imag < -tol * scale].conj())
    real = np.sort(eig[np.abs(eig.imag) <= tol * scale].real)
    resid = 0.0
    if len(upper) != len(lower) or len(real) % 2:
        resid = np.inf
    else:
        if len(upper):
            resid = float(np.max(np.abs(_match(upper, lower))))
        if len(real):
            resid = max(resid, float(np.max(np.abs(real[0::2] - real[1::2]))))
    reps = np.concatenate([upper, real[0::2].astype(complex)]) if np.isfinite(resid) else upper
    return reps, resid


def _match(a, b):
    # greedy nearest matching; sets are small and well separated
    b = list(b)
    out = []
    for z in a:
        k = int(np.argmin(np.abs(np.asarray(b) - z)))
        out.append(z - b.pop(k))
    return np.asarray(out)


def sample_eigenvalues(mc: MatrixClass | str, n: int, rng: np.random.Generator) -> np.ndarray:
    """Eigenvalues of one sampled matrix, one entry per eigenvalue of the
    n x n (quaternion) matrix: quaternion self-dual spectra are de-doubled,
    quaternion-general spectra reduced to Im >= 0 representatives."""
    if isinstance(mc, str):
        mc = CLASSES[mc]
    m = sample_matrix(mc, n, rng)
    if mc.hermitian:
        ev = eigenvalues_hermitian(m)
        if mc.quaternion:
            pairs = ev.reshape(-1, 2)
            if np.max(np.abs(pairs[:, 0] - pairs[:, 1])) > 1e-7 * max(1.0, np.max(np.abs(ev))):
                raise NoConvergence("self-dual spectrum is not doubly degenerate")
            ev = pairs.mean(axis=1)
        return ev.astype(complex)
    ev = eigenvalues_general(m)
    if mc.quaternion:
        reps, resid = pair_conjugates(ev, tol=1e-7)
        if not resid < 1e-6:
            raise NoConvergence(f"quaternion spectrum not closed under conjugation ({resid:.2e})")
        return reps
    return ev
