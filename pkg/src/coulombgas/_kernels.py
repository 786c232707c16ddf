"""Compiled inner loops for the pair energies.

All routines take points already embedded in R^3 and return beta-free pieces
(sum of G over pairs, sum of V, sum of F); the caller applies beta, the
(N-1) vs N weighting of V and the coupling alpha.
"""
import math

import numpy as np
from numba import njit

FREELOG, IMAGE, SPHERELOG = 0, 1, 2
REG_ZERO, REG_HALFPLANE, REG_CAUCHY = 0, 1, 2
POT_ZERO, POT_QUADRATIC, POT_CAUCHY = 0, 1, 2

# squared distance below which two charges count as coincident (|d| < 1e-14)
COINCIDENT2 = 1e-28


@njit(cache=True, nogil=True)
def pair_g(kernel, x1, y1, z1, x2, y2, z2):
    dx = x1 - x2
    dz = z1 - z2
    dy = y1 - y2
    d2 = dx * dx + dy * dy + dz * dz
    if d2 < COINCIDENT2:
        return math.inf
    g = -0.5 * math.log(d2)
    if kernel == IMAGE:
        sy = y1 + y2
        e2 = dx * dx + sy * sy + dz * dz
        if e2 < COINCIDENT2:
            return math.inf
        g -= 0.5 * math.log(e2)
    return g


@njit(cache=True, nogil=True)
def one_v(pot, c, x, y, z):
    if pot == POT_QUADRATIC:
        return c * (x * x + y * y)
    if pot == POT_CAUCHY:
        return 0.5 * math.log1p(x * x + y * y)
    return 0.0


@njit(cache=True, nogil=True)
def one_f(reg, x, y, z):
    if reg == REG_HALFPLANE:
        ay = abs(y)
        if ay == 0.0:
            return math.inf
        return -math.log(2.0 * ay)
    if reg == REG_CAUCHY:
        return 0.5 * math.log1p(x * x + y * y)
    return 0.0


@njit(cache=True, nogil=True)
def energy_parts(xyz, kernel, reg, pot, c):
    """Return (sum_{i<j} G, sum_k V, sum_k F)."""
    n = xyz.shape[0]
    sg = 0.0
    sv = 0.0
    sf = 0.0
    for i in range(n):
        sv += one_v(pot, c, xyz[i, 0], xyz[i, 1], xyz[i, 2])
        sf += one_f(reg, xyz[i, 0], xyz[i, 1], xyz[i, 2])
        for j in range(i + 1, n):
            sg += pair_g(kernel, xyz[i, 0], xyz[i, 1], xyz[i, 2],
                         xyz[j, 0], xyz[j, 1], xyz[j, 2])
    return sg, sv, sf


@njit(cache=True, nogil=True)
def pair_sum_one(xyz, i, x, y, z, kernel):
    """Sum over j != i of G(point, x_j)."""
    s = 0.0
    for j in range(xyz.shape[0]):
        if j != i:
            s += pair_g(kernel, x, y, z, xyz[j, 0], xyz[j, 1], xyz[j, 2])
    return s


@njit(cache=True, nogil=True)
def delta_parts(xyz, i, x, y, z, kernel, reg, pot, c):
    """Changes (dG, dV, dF) when particle i moves to (x, y, z)."""
    g_new = pair_sum_one(xyz, i, x, y, z, kernel)
    if g_new == math.inf:
        dg = math.inf
    else:
        dg = g_new - pair_sum_one(xyz, i, xyz[i, 0], xyz[i, 1], xyz[i, 2], kernel)
    dv = one_v(pot, c, x, y, z) - one_v(pot, c, xyz[i, 0], xyz[i, 1], xyz[i, 2])
    f_new = one_f(reg, x, y, z)
    if f_new == math.inf:
        df = math.inf
    else:
        df = f_new - one_f(reg, xyz[i, 0], xyz[i, 1], xyz[i, 2])
    return dg, dv, df


@njit(cache=True, nogil=True)
def sweep(xyz, cand, inside, logu, kernel, reg, pot, c, beta, alpha, accepted):
    """One pass of single-particle Metropolis updates, particle order 0..N-1.

    The target is exp(-alpha K - sum U) with K = beta sum G + beta (N-1) sum V
    and U = beta (F + V). ``xyz`` is updated in place; returns (dK, dU, nacc).
    """
    n = xyz.shape[0]
    dk_tot = 0.0
    du_tot = 0.0
    nacc = 0
    for i in range(n):
        accepted[i] = False
        if not inside[i]:
            continue
        dg, dv, df = delta_parts(xyz, i, cand[i, 0], cand[i, 1], cand[i, 2],
                                 kernel, reg, pot, c)
        du = beta * (df + dv)
        dk = beta * dg + beta * (n - 1) * dv
        if alpha > 0.0:
            d = alpha * dk + du
        else:
            d = du
        if d != d or d == math.inf:
            continue
        if d <= 0.0 or logu[i] < -d:
            xyz[i, 0] = cand[i, 0]
            xyz[i, 1] = cand[i, 1]
            xyz[i, 2] = cand[i, 2]
            accepted[i] = True
            dk_tot += dk
            du_tot += du
            nacc += 1
    return dk_tot, du_tot, nacc


@njit(cache=True, nogil=True)
def discrete_energy_grad(xyz, kernel, pot, c, nv, grad):
    """Zero-temperature energy sum_{i<j} G + nv * sum V and its R^3 gradient."""
    n = xyz.shape[0]
    e = 0.0
    for i in range(n):
        grad[i, 0] = 0.0
        grad[i, 1] = 0.0
        grad[i, 2] = 0.0
    for i in range(n):
        xi = xyz[i, 0]
        yi = xyz[i, 1]
        zi = xyz[i, 2]
        if pot == POT_QUADRATIC:
            e += nv * c * (xi * xi + yi * yi)
            grad[i, 0] += nv * 2.0 * c * xi
            grad[i, 1] += nv * 2.0 * c * yi
        elif pot == POT_CAUCHY:
            r2 = xi * xi + yi * yi
            e += nv * 0.5 * math.log1p(r2)
            grad[i, 0] += nv * xi / (1.0 + r2)
            grad[i, 1] += nv * yi / (1.0 + r2)
        for j in range(i + 1, n):
            dx = xi - xyz[j, 0]
            dy = yi - xyz[j, 1]
            dz = zi - xyz[j, 2]
            d2 = dx * dx + dy * dy + dz * dz
            if d2 < COINCIDENT2:
                return math.inf
            e -= 0.5 * math.log(d2)
            gx = -dx / d2
            gy = -dy / d2
            gz = -dz / d2
            grad[i, 0] += gx
            grad[i, 1] += gy
            grad[i, 2] += gz
            grad[j, 0] -= gx
            grad[j, 1] -= gy
            grad[j, 2] -= gz
            if kernel == IMAGE:
                sy = yi + xyz[j, 1]
                e2 = dx * dx + sy * sy + dz * dz
                if e2 < COINCIDENT2:
                    return math.inf
                e -= 0.5 * math.log(e2)
                grad[i, 0] -= dx / e2
                grad[j, 0] += dx / e2
                grad[i, 1] -= sy / e2
                grad[j, 1] -= sy / e2
                grad[i, 2] -= dz / e2
                grad[j, 2] += dz / e2
    return e


def warmup():
    """Trigger compilation of the hot kernels on tiny inputs."""
    xyz = np.zeros((2, 3))
    xyz[1, 0] = 1.0
    energy_parts(xyz, 0, 0, 0, 0.0)
    sweep(xyz.copy(), xyz.copy(), np.ones(2, dtype=np.bool_), np.zeros(2),
          0, 0, 0, 0.0, 1.0, 1.0, np.zeros(2, dtype=np.bool_))
