"""Compiled inner loops for the radius iteration.

Geometry codes: 0 = Euclidean (radii), 1 = hyperbolic (decay values).
Hyperbolic kernels also take ``co`` = 1 - decay, kept separately because a
tiny circle's decay sits within a few ulps of 1.  Euclidean kernels ignore it.
"""

import math

import numpy as np
from numba import njit

EUCLIDEAN_CODE = 0
HYPERBOLIC_CODE = 1


@njit(cache=True)
def face_angle(geom, rv, ru, rw, yv, yu, yw):
    # half-angle sine^2 (num/den) and cosine^2 (cnum/den) kept apart so that
    # angles near pi keep full precision
    if geom == 0:
        num = ru * rw
        cnum = rv * (rv + ru + rw)
    else:
        # 1 - rv*ru*rw expanded as a sum of non-negative parts
        num = rv * yu * yw
        cnum = yv * (yv + rv * yu + rv * ru * yw)
    if num < 0.0:
        num = 0.0
    if cnum < 0.0:
        cnum = 0.0
    return 2.0 * math.atan2(math.sqrt(num), math.sqrt(cnum))


@njit(cache=True)
def vertex_angle_sum(geom, offs, nbrs, closed, radii, co, v):
    lo = offs[v]
    hi = offs[v + 1]
    n = hi - lo
    total = 0.0
    last = n if closed[v] else n - 1
    rv = radii[v]
    yv = co[v]
    for j in range(last):
        u = nbrs[lo + j]
        w = nbrs[lo + (j + 1) % n]
        total += face_angle(geom, rv, radii[u], radii[w], yv, co[u], co[w])
    return total


@njit(cache=True)
def angle_sums(geom, offs, nbrs, closed, radii, co):
    out = np.zeros(closed.shape[0])
    for v in range(closed.shape[0]):
        out[v] = vertex_angle_sum(geom, offs, nbrs, closed, radii, co, v)
    return out


@njit(cache=True)
def max_residual(geom, offs, nbrs, closed, free, radii, co):
    worst = 0.0
    for v in range(closed.shape[0]):
        if free[v]:
            d = abs(vertex_angle_sum(geom, offs, nbrs, closed, radii, co, v) - 2.0 * math.pi)
            if d > worst:
                worst = d
    return worst


@njit(cache=True)
def _uniform_update(geom, r, theta, k):
    beta = math.sin(theta / (2.0 * k))
    delta = math.sin(math.pi / k)
    if geom == 0:
        if beta >= 1.0:
            return r
        rhat = beta * r / (1.0 - beta)
        return rhat * (1.0 - delta) / delta
    # hyperbolic: s = sqrt(decay); effective uniform petal decay xp
    s = math.sqrt(r)
    xp = (s - beta) / (s * (1.0 - beta * s))
    if xp < 0.0:
        xp = 0.0
    elif xp >= 1.0:
        return r
    a = 1.0 - xp
    snew = 2.0 * delta / (a + math.sqrt(a * a + 4.0 * delta * delta * xp))
    return snew * snew


@njit(cache=True)
def gs_sweeps(geom, offs, nbrs, closed, free, radii, co, tol, max_sweeps, history):
    """Gauss-Seidel uniform-neighbour sweeps in ascending vertex order.

    Returns (sweeps, residual).  When ``history`` has positive length the true
    residual after every sweep is stored there (and checked every sweep).
    """
    nv = closed.shape[0]
    track = history.shape[0] > 0
    res = max_residual(geom, offs, nbrs, closed, free, radii, co)
    if res <= tol:
        return 0, res
    sweeps = 0
    while sweeps < max_sweeps:
        est = 0.0
        for v in range(nv):
            if not free[v]:
                continue
            theta = vertex_angle_sum(geom, offs, nbrs, closed, radii, co, v)
            d = abs(theta - 2.0 * math.pi)
            if d > est:
                est = d
            k = offs[v + 1] - offs[v]
            radii[v] = _uniform_update(geom, radii[v], theta, k)
            if geom == 1:
                co[v] = 1.0 - radii[v]
        sweeps += 1
        if track:
            res = max_residual(geom, offs, nbrs, closed, free, radii, co)
            if sweeps <= history.shape[0]:
                history[sweeps - 1] = res
            if res <= tol:
                break
        elif est <= tol or sweeps % 64 == 0:
            res = max_residual(geom, offs, nbrs, closed, free, radii, co)
            if res <= tol:
                break
    if not track:
        res = max_residual(geom, offs, nbrs, closed, free, radii, co)
    return sweeps, res
