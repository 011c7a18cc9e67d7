"""Packing labels: Thurston-style radius iteration in Euclidean and hyperbolic geometry."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import _kernels as K
from .complex import Triangulation
from .errors import BoundaryVertex, MaxIterExceeded, NoInteriorVertices

log = logging.getLogger(__name__)

EUCLIDEAN = "EUCLIDEAN"
HYPERBOLIC = "HYPERBOLIC"
_GEOM_CODE = {EUCLIDEAN: K.EUCLIDEAN_CODE, HYPERBOLIC: K.HYPERBOLIC_CODE}

DEFAULT_TOL = 1e-10
DEFAULT_MAX_ITER = 10 ** 6
TWO_PI = 2.0 * math.pi


@dataclass
class SolveReport:
    iterations: int
    final_residual: float
    converged: bool
    method: str = "uniform"
    history: list[float] = field(default_factory=list)

    def to_dict(self):
        return {"iterations": int(self.iterations),
                "final_residual": float(self.final_residual),
                "converged": bool(self.converged),
                "method": self.method}


@dataclass
class PackingLabel:
    """Per-vertex radii.  Hyperbolic labels hold decay values exp(-2h)."""
    geometry: str
    radii: np.ndarray
    fixed: np.ndarray  # True where the radius is a boundary condition
    # 1 - decay at full precision (hyperbolic only); tiny circles have decays
    # within a few ulps of 1, where 1 - radii would keep too few digits
    codecay: np.ndarray | None = None

    def co(self) -> np.ndarray:
        """Array for the kernels' ``co`` argument (1 - decay, or radii if Euclidean)."""
        if self.geometry != HYPERBOLIC:
            return self.radii
        plain = 1.0 - self.radii
        c = self.codecay
        if c is None or c.shape != plain.shape:
            return plain
        # trust the stored value only where it still agrees with the decay
        return np.where(np.abs(c - plain) <= 1e-15, c, plain)

    def hyperbolic_radii(self) -> np.ndarray:
        if self.geometry != HYPERBOLIC:
            raise ValueError("not a hyperbolic label")
        with np.errstate(divide="ignore"):
            h = -0.5 * np.log(self.radii)
        small = self.radii > 0.5
        h[small] = -0.5 * np.log1p(-self.co()[small])
        return h

    def copy(self) -> "PackingLabel":
        co = None if self.codecay is None else self.codecay.copy()
        return PackingLabel(self.geometry, self.radii.copy(), self.fixed.copy(), co)


def angle_sum(T: Triangulation, L: PackingLabel, v: int) -> float:
    if not T.closed[v]:
        raise BoundaryVertex(f"vertex {v} is on the boundary")
    offs, nbrs, closed = T.csr
    return float(K.vertex_angle_sum(_GEOM_CODE[L.geometry], offs, nbrs, closed, L.radii, L.co(), v))


def angle_sums(T: Triangulation, L: PackingLabel) -> np.ndarray:
    offs, nbrs, closed = T.csr
    return K.angle_sums(_GEOM_CODE[L.geometry], offs, nbrs, closed, L.radii, L.co())


def residual(T: Triangulation, L: PackingLabel) -> float:
    """max over free interior vertices of |angle sum - 2 pi|."""
    offs, nbrs, closed = T.csr
    free = closed & ~L.fixed
    return float(K.max_residual(_GEOM_CODE[L.geometry], offs, nbrs, closed, free, L.radii, L.co()))


def _boundary_values(T: Triangulation, values, default) -> np.ndarray:
    out = np.full(T.vertex_count, np.nan)
    bdry = list(T.boundary_vertices)
    if values is None:
        out[bdry] = default
    elif np.isscalar(values):
        out[bdry] = float(values)
    elif isinstance(values, dict):
        for v in bdry:
            out[v] = float(values[v])
    else:
        arr = np.asarray(values, dtype=float)
        if arr.shape[0] == T.vertex_count:
            out[bdry] = arr[bdry]
        elif arr.shape[0] == len(bdry):
            out[bdry] = arr
        else:
            raise ValueError("boundary values must cover every boundary vertex")
    return out


def solve_euclidean(T: Triangulation, boundary_radii, tol: float = DEFAULT_TOL,
                    max_iter: int = DEFAULT_MAX_ITER, accelerate: bool = False,
                    init=None, history: bool = False, strict: bool = False):
    """Euclidean label with prescribed boundary radii and angle sum 2 pi inside."""
    if not T.interior_vertices:
        raise NoInteriorVertices("complex has no interior vertex")
    if not T.boundary_vertices:
        raise ValueError("Euclidean solve needs a nonempty boundary")
    radii = _boundary_values(T, boundary_radii, 1.0)
    bd = np.array(T.boundary_vertices)
    if np.any(radii[bd] <= 0):
        raise ValueError("boundary radii must be positive")
    fixed = ~np.array(T.closed)
    start = float(np.mean(radii[bd])) if init is None else None
    if init is None:
        radii[~fixed] = start
    else:
        radii[~fixed] = np.asarray(init, dtype=float)[~fixed]
    L = PackingLabel(EUCLIDEAN, radii, fixed)
    return _solve(T, L, tol, max_iter, accelerate, history, strict)


def solve_hyperbolic(T: Triangulation, boundary_decay=None, tol: float = DEFAULT_TOL,
                     max_iter: int = DEFAULT_MAX_ITER, accelerate: bool = False,
                     init=None, history: bool = False, strict: bool = False):
    """Hyperbolic label; boundary decay values default to 0 (horocycles)."""
    if not T.interior_vertices:
        raise NoInteriorVertices("complex has no interior vertex")
    if not T.boundary_vertices:
        raise ValueError("hyperbolic solve needs a nonempty boundary")
    radii = _boundary_values(T, boundary_decay, 0.0)
    bd = np.array(T.boundary_vertices)
    if np.any((radii[bd] < 0) | (radii[bd] >= 1)):
        raise ValueError("boundary decay values must lie in [0, 1)")
    fixed = ~np.array(T.closed)
    if init is None:
        radii[~fixed] = 0.5
    else:
        radii[~fixed] = np.asarray(init, dtype=float)[~fixed]
    L = PackingLabel(HYPERBOLIC, radii, fixed)
    return _solve(T, L, tol, max_iter, accelerate, history, strict)


def solve_max_hyperbolic(T: Triangulation, tol: float = DEFAULT_TOL,
                         max_iter: int = DEFAULT_MAX_ITER, accelerate: bool = False,
                         **kw):
    """Maximal packing label: every boundary circle a horocycle."""
    return solve_hyperbolic(T, None, tol, max_iter, accelerate, **kw)


def _kco(L: PackingLabel) -> np.ndarray:
    # the array the kernels update in place alongside the radii
    return L.codecay if L.geometry == HYPERBOLIC else L.radii


def _solve(T, L, tol, max_iter, accelerate, history, strict):
    geom = _GEOM_CODE[L.geometry]
    offs, nbrs, closed = T.csr
    free = closed & ~L.fixed
    if L.geometry == HYPERBOLIC:
        L.codecay = np.ascontiguousarray(L.co(), dtype=float)
    if accelerate:
        sweeps, res, hist = _newton(T, L, tol, max_iter)
        method = "newton"
    else:
        buf = np.zeros(min(max_iter, 100000) if history else 0)
        sweeps, res = K.gs_sweeps(geom, offs, nbrs, closed, free, L.radii, _kco(L), tol, max_iter, buf)
        hist = list(buf[:min(sweeps, buf.shape[0])]) if history else []
        method = "uniform"
    report = SolveReport(int(sweeps), float(res), bool(res <= tol), method, hist)
    log.debug("%s solve V=%d: %s", L.geometry, T.vertex_count, report)
    if strict and not report.converged:
        raise MaxIterExceeded(f"residual {res:.3g} > tol {tol:.3g} after {sweeps} iterations",
                              L, report)
    return L, report


# -- accelerated solve -------------------------------------------------------

def face_angles_and_grads(geometry: str, rv, ru, rw, yv=None, yu=None, yw=None):
    """Apex angle at v and its derivatives with respect to log-radii of v, u, w.

    Hyperbolic inputs are decay values, optionally with their complements
    ``y = 1 - decay``; derivatives are with respect to log(decay).
    """
    if geometry == EUCLIDEAN:
        num = ru * rw
        cnum = rv * (rv + ru + rw)
        dv = -rv / (rv + ru) - rv / (rv + rw)
        du = rv / (rv + ru)
        dw = rv / (rv + rw)
    else:
        if yv is None:
            yv, yu, yw = 1.0 - rv, 1.0 - ru, 1.0 - rw
        a = yv + rv * yu  # 1 - rv*ru without cancellation
        b = yv + rv * yw
        num = rv * yu * yw
        cnum = yv * (yv + rv * yu + rv * ru * yw)
        dv = 1.0 + rv * ru / a + rv * rw / b
        with np.errstate(divide="ignore", invalid="ignore"):
            du = -ru * yv / (yu * a)
            dw = -rw * yv / (yw * b)
    sn = np.sqrt(np.maximum(num, 0.0))
    cs = np.sqrt(np.maximum(cnum, 0.0))
    alpha = 2.0 * np.arctan2(sn, cs)
    with np.errstate(divide="ignore", invalid="ignore"):
        g = sn / cs  # tan(alpha/2)
    g = np.where(np.isfinite(g), g, 0.0)
    return alpha, g * dv, g * du, g * dw


def _to_var(hyper: bool, r: np.ndarray, y: np.ndarray | None = None):
    """Newton variable and d(log r)/d(variable) per vertex.

    Hyperbolic: u = log tanh(h/2) = log(y) - 2 log(1 + sqrt(x)), precise for
    both huge (x -> 0) and tiny (y -> 0) circles.
    """
    if not hyper:
        return np.log(r), np.ones_like(r)
    if y is None:
        y = 1.0 - r
    with np.errstate(divide="ignore", invalid="ignore"):
        s = np.sqrt(r)
        ly = np.where(r < 0.5, np.log1p(-r), np.log(y))
        u = ly - 2.0 * np.log1p(s)
        d = -y / s
    return u, np.where(np.isfinite(d), d, 0.0)


def _from_var(hyper: bool, u: np.ndarray):
    """Inverse of :func:`_to_var`: (radius or decay, 1 - decay)."""
    if not hyper:
        r = np.exp(u)
        return r, r
    tau = np.exp(u)  # tanh(h/2)
    m = -np.expm1(u)  # 1 - tau
    p = 1.0 + tau
    return (m / p) ** 2, 4.0 * tau / (p * p)


def _newton(T: Triangulation, L: PackingLabel, tol: float, max_iter: int):
    geom = _GEOM_CODE[L.geometry]
    offs, nbrs, closed = T.csr
    free = closed & ~L.fixed
    r, co = L.radii, _kco(L)
    # a few plain sweeps tame the starting point
    pre, res = K.gs_sweeps(geom, offs, nbrs, closed, free, r, co, tol, min(20, max_iter),
                           np.zeros(0))
    hist = [res]
    if res <= tol:
        return pre, res, hist
    F = T.face_array
    idx = np.full(T.vertex_count, -1, dtype=np.int64)
    fv = np.flatnonzero(free)
    idx[fv] = np.arange(fv.size)
    n = fv.size
    rot = [(0, 1, 2), (1, 2, 0), (2, 0, 1)]
    it = 0
    stalls = 0
    hyper = L.geometry == HYPERBOLIC
    # Newton variable: log r (Euclidean) or log tanh(h/2) (hyperbolic); it is
    # the state carried between steps, radii and co are derived from it
    var, _ = _to_var(hyper, r, co if hyper else None)
    while it < max_iter and res > tol:
        it += 1
        with np.errstate(divide="ignore", invalid="ignore"):
            dlog = -co / np.sqrt(r) if hyper else np.ones_like(r)
        dlog[~np.isfinite(dlog)] = 0.0
        rows, cols, vals = [], [], []
        theta = np.zeros(T.vertex_count)
        for i, j, k in rot:
            v, u, w = F[:, i], F[:, j], F[:, k]
            alpha, dv, du, dw = face_angles_and_grads(L.geometry, r[v], r[u], r[w],
                                                      co[v], co[u], co[w])
            np.add.at(theta, v, alpha)
            for tgt, d in ((v, dv), (u, du), (w, dw)):
                m = (idx[v] >= 0) & (idx[tgt] >= 0)
                rows.append(idx[v[m]])
                cols.append(idx[tgt[m]])
                vals.append(d[m] * dlog[tgt[m]])
        J = sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                          shape=(n, n))
        rhs = TWO_PI - theta[fv]
        try:
            step = spla.spsolve(J.tocsc(), rhs, permc_spec="MMD_AT_PLUS_A")
        except RuntimeError:
            step = np.full(n, np.nan)
        if not np.all(np.isfinite(step)):
            log.debug("newton: singular system, falling back to sweeps")
            break
        u0 = var[fv]
        t = 1.0
        biggest = float(np.abs(step).max())
        if biggest > 2.0:
            t = 2.0 / biggest
        # merit is the 2-norm of the defect, for which the Newton step is a
        # descent direction; the stopping rule stays on the max norm
        merit = float(rhs @ rhs)
        accepted = False
        old_r, old_co = r[fv].copy(), co[fv].copy()
        for _ in range(40):
            trial = u0 + t * step
            if hyper:
                # u < 0 always; each circle goes at most half way to a horocycle
                trial = np.minimum(trial, 0.5 * u0)
            r[fv], c = _from_var(hyper, trial)
            if hyper:
                co[fv] = c
            dft = TWO_PI - K.angle_sums(geom, offs, nbrs, closed, r, co)[fv]
            new_merit = float(dft @ dft)
            if np.isfinite(new_merit) and new_merit < (1.0 - 1e-4 * t) * merit:
                accepted = True
                break
            t *= 0.5
        if accepted:
            var[fv] = trial
            new_res = float(np.abs(dft).max())
        else:
            r[fv] = old_r
            if hyper:
                co[fv] = old_co
            stalls += 1
            if stalls > 2:
                break
            K.gs_sweeps(geom, offs, nbrs, closed, free, r, co, tol, 50, np.zeros(0))
            var, _ = _to_var(hyper, r, co if hyper else None)
            new_res = float(K.max_residual(geom, offs, nbrs, closed, free, r, co))
        log.debug("newton %d: t=%.3g |step|=%.3g res=%.3g", it, t, biggest, new_res)
        res = new_res
        hist.append(res)
    if res > tol and it < max_iter:
        # finish with the provable scheme if Newton stalled
        extra, res = K.gs_sweeps(geom, offs, nbrs, closed, free, r, co, tol, max_iter - it,
                                 np.zeros(0))
        it += extra
        hist.append(res)
    return pre + it, res, hist


def solve_sphere(T: Triangulation, puncture: int | None = None, tol: float = DEFAULT_TOL,
                 max_iter: int = DEFAULT_MAX_ITER, accelerate: bool = False,
                 center: bool = True):
    """Spherical packing of a sphere complex by puncturing one vertex.

    The rest is maximally packed in the unit disc, projected to the sphere, and
    the puncture receives the complementary (northern) hemisphere.  With
    ``center`` the result is Möbius-normalized so that tangency points have
    centroid 0, which makes symmetric complexes produce symmetric packings.
    """
    from . import layout as lay
    from .complex import is_sphere, remove_vertices
    from .errors import NotASphere

    if not is_sphere(T):
        raise NotASphere("complex is not a triangulated sphere")
    if puncture is None:
        puncture = max(range(T.vertex_count), key=lambda v: (T.degree(v), -v))
    if T.degree(puncture) < 3:
        raise ValueError("puncture vertex must have degree >= 3")
    Tp, remap = remove_vertices(T, [puncture])
    if Tp.interior_vertices:
        L, report = solve_max_hyperbolic(Tp, tol, max_iter, accelerate)
        check = True
    else:
        L = PackingLabel(HYPERBOLIC, np.zeros(Tp.vertex_count), np.ones(Tp.vertex_count, bool))
        report = SolveReport(0, 0.0, True, "trivial")
        check = False
    disc = lay.layout(Tp, L, check=check and report.converged)
    cs, rs = lay.disc_to_sphere(disc.centers, disc.radii)
    centers = np.zeros((T.vertex_count, 3))
    radii = np.zeros(T.vertex_count)
    keep = remap >= 0
    centers[keep] = cs[remap[keep]]
    radii[keep] = rs[remap[keep]]
    centers[puncture] = (0.0, 0.0, 1.0)
    radii[puncture] = math.pi / 2
    P = lay.Packing(T, "SPHERE", centers, radii, meta={"report": report, "puncture": int(puncture)})
    if center:
        P = lay.center_packing(P)
        P.meta["report"] = report
        P.meta["puncture"] = int(puncture)
    return P
