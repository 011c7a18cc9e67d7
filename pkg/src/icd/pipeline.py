"""End-to-end intrinsic circle domain computation and its diagnostics.

Stages: cookie-cutter cut-out (plus boundary refinement), one hyperbolic solve
per boundary cycle with that cycle coned off by an ideal vertex, caps welded
onto every cycle, a spherical solve of the closed complex, and a three-point
normalization.  Vertex ids of the cut-out survive every stage.
"""

from __future__ import annotations

import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import geom
from .complex import CAP, IDEAL, INSERTED, Triangulation, add_ideal_vertex, is_sphere, remove_vertices
from .cookie import CutoutResult, DomainSpec, hex_cutout, refine_cutout
from .errors import (
    MissingComponent,
    NotSphereAfterWelds,
    PackingError,
    StageError,
)
from .label import DEFAULT_TOL, SolveReport, solve_max_hyperbolic, solve_sphere
from .layout import Packing, carrier_map, dilatations, layout, normalize_three_points
from .weld import BoundaryParam, fuchsian_boundary_param, make_cap, packed_param, weld

log = logging.getLogger(__name__)

SOUTH = (0.0, 0.0, -1.0)
DEFAULT_TARGETS = (SOUTH, (1.0, 0.0, 0.0), (0.0, 1.0, 0.0))

OMEGA = "omega"
ROLE_IDEAL = "ideal"
ROLE_CAP = "cap"


@dataclass
class PipelineConfig:
    epsilon: float = 2.0 ** -5
    tol: float = DEFAULT_TOL
    max_iter: int = 10 ** 6
    refine_layers: int = 1
    normalize_points: tuple | None = None   # three plane points in the domain
    normalize_targets: tuple = DEFAULT_TARGETS
    cap_mode: str = "packed"
    accelerate: bool = True
    threads: int = 0
    emit: tuple = ("json",)

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.refine_layers < 0:
            raise ValueError("refine_layers must be >= 0")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        if self.normalize_points is not None and len(self.normalize_points) != 3:
            raise ValueError("normalization needs exactly three points")


@dataclass
class IntrinsicResult:
    sphere_packing: Packing
    omega_vertices: list[int]
    component_discs: dict[int, dict]
    reports: dict[str, SolveReport]
    diagnostics: dict
    cutout: CutoutResult
    config: PipelineConfig
    roles: list[str] = field(default_factory=list)

    @property
    def converged(self) -> bool:
        return all(r.converged for r in self.reports.values())

    def map_points(self, z) -> np.ndarray:
        """Sphere images of plane points of the domain through the carrier map."""
        return map_points(self, z)


def _threads(cfg: PipelineConfig) -> int:
    n = cfg.threads
    if n <= 0:
        env = os.environ.get("ICD_THREADS", "0")
        try:
            n = int(env)
        except ValueError:
            n = 0
    if n <= 0:
        n = os.cpu_count() or 1
    return max(1, n)


def _stage(name, fn, *args, **kw):
    try:
        return fn(*args, **kw)
    except PackingError as exc:
        raise StageError(name, exc) from exc


def _fuchsian(T: Triangulation, cycle: list[int], cfg: PipelineConfig):
    Tc = add_ideal_vertex(T, cycle)
    vB = T.vertex_count
    L, rep = solve_max_hyperbolic(Tc, cfg.tol, cfg.max_iter, cfg.accelerate)
    return fuchsian_boundary_param(Tc, L, vB, start=cycle[0], tol=cfg.tol), rep


def deepest_vertex(T: Triangulation, emb=None, ref=None) -> int:
    """A vertex of maximal combinatorial depth.

    With an embedding, ties go to the vertex nearest the mean of the deepest
    ones, then to the smallest angle measured from ``ref`` (a vertex), so the
    choice follows rotations of the domain.
    """
    depth = T.bfs_depth(T.boundary_vertices)
    cand = np.flatnonzero(depth == int(depth.max()))
    if emb is None or cand.size == 1:
        return int(cand[0])
    z = np.asarray(emb)[cand]
    m = z.mean()
    d = z - m
    dirn = complex(emb[ref]) - m if ref is not None else 1.0
    dirn = dirn / abs(dirn) if abs(dirn) > 1e-12 else 1.0
    ang = np.mod(np.round(np.angle(d / dirn) / (2 * math.pi), 9), 1.0)
    ang[np.abs(d) < 1e-12] = 0.0
    key = sorted(range(cand.size), key=lambda i: (round(float(abs(d[i])), 9), float(ang[i])))
    return int(cand[key[0]])


def _deepest(cut: CutoutResult) -> int:
    return deepest_vertex(cut.complex, cut.embedding, cut.cycle_map[cut.domain.outer_index][0])


def run(domain: DomainSpec, cfg: PipelineConfig | None = None, weld_warp: dict | None = None) -> IntrinsicResult:
    """Approximate the intrinsic circle domain of ``domain``.

    ``weld_warp`` maps component ids to monotone circle maps applied to that
    component's parametrization before welding; it exists only to build
    deliberately wrong results for negative controls.
    """
    cfg = cfg or PipelineConfig()
    cut = _stage("cutout", hex_cutout, domain, cfg.epsilon)
    cut = _stage("refine", refine_cutout, cut, cfg.refine_layers)
    T = cut.complex
    comps = sorted(cut.cycle_map)
    reports: dict[str, SolveReport] = {}

    # (2) one parametrization per boundary cycle
    params: dict[int, BoundaryParam] = {}
    if len(comps) == 1:
        k = comps[0]
        cyc = cut.cycle_map[k]
        hub = _deepest(cut)
        params[k], reports[f"fuchsian[{k}]"] = _stage("fuchsian", packed_param, T, cyc, hub, cfg.tol,
                                                      with_report=True)
    else:
        def job(k):
            return _stage("fuchsian", _fuchsian, T, cut.cycle_map[k], cfg)
        workers = min(_threads(cfg), len(comps))
        if workers > 1:
            with ThreadPoolExecutor(max_workers=workers) as ex:
                outs = list(ex.map(job, comps))
        else:
            outs = [job(k) for k in comps]
        for k, (p, rep) in zip(comps, outs):
            params[k] = p
            reports[f"fuchsian[{k}]"] = rep

    # (3) caps welded one by one onto the evolving complex
    cur = T
    discs: dict[int, dict] = {}
    for k in comps:
        p = params[k]
        wp = p if not weld_warp or k not in weld_warp else p.warped(weld_warp[k])
        cap, cparam = _stage("cap", make_cap, p, None, cfg.cap_mode, cfg.tol)
        rec = _stage("weld", weld, cur, wp, cap, cparam)
        n0 = cur.vertex_count
        right = [int(v) for v in rec.right_map]
        ins_cap = [v for v in rec.inserted_vertices if CAP in rec.merged.marks[v]]
        ins_omega = [v for v in rec.inserted_vertices if CAP not in rec.merged.marks[v]]
        discs[k] = {
            "component": k,
            "cycle": list(cut.cycle_map[k]),
            "ideal": right[0],
            "cap_vertices": sorted(right + ins_cap),
            "seam_omega": ins_omega,
            "param": p,
            "cap_param": BoundaryParam(tuple((right[v], t) for v, t in cparam.entries)),
            "warped": wp is not p,
            "first_new": n0,
        }
        cur = rec.merged
    if not is_sphere(cur):
        raise StageError("weld", NotSphereAfterWelds(f"welded complex is not a sphere: {cur!r}"))

    # (5) spherical packing, punctured at the deepest vertex of the cut-out
    puncture = _deepest(cut)
    P = _stage("sphere", solve_sphere, cur, puncture, cfg.tol, cfg.max_iter, cfg.accelerate)
    reports["sphere"] = P.meta["report"]
    P.anchors = P.centers.copy()

    roles = [OMEGA] * cur.vertex_count
    for d in discs.values():
        for v in d["cap_vertices"]:
            roles[v] = ROLE_CAP
        roles[d["ideal"]] = ROLE_IDEAL
    omega = [v for v in range(cur.vertex_count) if roles[v] == OMEGA]

    # (6) normalization
    vs = _normal_vertices(cut, discs, cfg)
    P = _stage("normalize", normalize_three_points, P, *vs, cfg.normalize_targets)
    P.meta["normal_vertices"] = [int(v) for v in vs]

    res = IntrinsicResult(P, omega, discs, reports, {}, cut, cfg, roles)
    # (7) diagnostics
    res.diagnostics = _stage("diagnostics", diagnostics, res)
    return res


def _normal_vertices(cut: CutoutResult, discs: dict, cfg: PipelineConfig) -> list[int]:
    T = cut.complex
    if cfg.normalize_points is not None:
        vs = []
        for z in cfg.normalize_points:
            z = complex(z) if np.isscalar(z) else complex(*z)
            if not bool(cut.domain.contains(np.array([z]))[0]):
                raise ValueError(f"normalization point {z} is not in the domain")
            vs.append(int(np.argmin(np.abs(cut.embedding - z))))
        if len(set(vs)) < 3:
            raise ValueError("normalization points select the same circle twice")
        return vs
    outer = cut.cycle_map[cut.domain.outer_index]
    return [_deepest(cut), outer[0], outer[len(outer) // 3]]


# -- geometry helpers --------------------------------------------------------------

def rotation_to_south(n) -> np.ndarray:
    """Proper rotation matrix taking the unit vector ``n`` to the south pole."""
    a = np.asarray(n, dtype=float)
    a = a / np.linalg.norm(a)
    b = np.array(SOUTH)
    v = np.cross(a, b)
    c = float(a @ b)
    s = float(np.linalg.norm(v))
    if s < 1e-15:
        return np.eye(3) if c > 0 else np.diag([1.0, -1.0, -1.0])
    k = v / s
    Kx = np.array([[0, -k[2], k[1]], [k[2], 0, -k[0]], [-k[1], k[0], 0]])
    return np.eye(3) + s * Kx + (1 - c) * Kx @ Kx


def seam_edges(P: Packing, roles: list[str], disc: dict) -> np.ndarray:
    """Edges joining this component's cap side to omega circles."""
    capset = set(disc["cap_vertices"]) | {disc["ideal"]}
    out = []
    for u in sorted(capset):
        for v in P.complex.flowers[u]:
            if roles[v] == OMEGA:
                out.append((u, v))
    return np.array(out, dtype=np.int64).reshape(-1, 2)


def component_cap(P: Packing, roles: list[str], disc: dict):
    """Fitted spherical cap of a complementary component and its roundness."""
    E = seam_edges(P, roles, disc)
    pts = P.tangency_points(E)
    hub = P.centers[disc["ideal"]]
    R = rotation_to_south(hub)
    z = geom.inverse_stereographic(pts @ R.T)
    circ, roundness = geom.fit_circle(z)
    c, rho = geom.plane_circle_to_cap(complex(circ.center), circ.radius)
    c = R.T @ c
    if float(geom.sphere_distance(c, hub)) > rho:
        c, rho = -c, math.pi - rho
    return c, rho, roundness


def annulus_modulus(caps) -> float:
    (c1, r1), (c2, r2) = caps
    delta = geom.inversive_distance_caps(c1, r1, c2, r2)
    return math.acosh(abs(delta)) / (2 * math.pi)


def diagnostics(res: IntrinsicResult) -> dict:
    P = res.sphere_packing
    T = res.cutout.complex
    out: dict = {}
    comp = {}
    caps = []
    for k, d in sorted(res.component_discs.items()):
        c, rho, rnd = component_cap(P, res.roles, d)
        caps.append((c, rho))
        comp[str(k)] = {"roundness": rnd, "cap_center": [float(x) for x in c], "cap_radius": rho,
                        "cap_size": len(d["cap_vertices"]) + 1, "cycle_length": len(d["cycle"])}
    out["components"] = comp
    if len(caps) == 2:
        out["annulus_modulus"] = annulus_modulus(caps)
    tr = P.tangency_residuals()
    out["tangency_residual"] = float(tr.max())
    out["max_degree"] = int(P.complex.max_degree)
    out["vertex_count"] = int(P.complex.vertex_count)
    out["cutout_vertices"] = int(T.vertex_count)
    out["dilatation"] = dilatation_report(res)
    return out


def dilatation_report(res: IntrinsicResult, max_depth: int | None = None) -> dict:
    """Per-face dilatation of the carrier map from the cut-out to the sphere, by depth."""
    T = res.cutout.complex
    src = Packing(T, geom.PLANE, res.cutout.embedding, np.full(T.vertex_count, res.cutout.mesh))
    faces = np.array(T.faces, dtype=np.int64)
    cm = carrier_map(src, res.sphere_packing, faces=faces)
    K = dilatations(cm)
    depth = T.bfs_depth(T.boundary_vertices)
    fdepth = depth[faces].min(axis=1)
    top = int(fdepth.max()) if max_depth is None else max_depth
    rows = []
    for dd in range(top + 1):
        sel = K[fdepth >= dd]
        if sel.size == 0:
            break
        rows.append({"depth": dd, "faces": int(sel.size), "max": float(sel.max()),
                     "median": float(np.median(sel))})
    interior = K[fdepth >= 1]
    return {"faces": int(K.size), "max": float(K.max()), "median": float(np.median(K)),
            "median_interior": float(np.median(interior)) if interior.size else float("nan"),
            "by_depth": rows}


# -- verification ---------------------------------------------------------------

def _realized(chart_seam, hub_circle, chart_pts) -> np.ndarray:
    """Args/2pi of points after mapping the fitted seam circle to the unit circle
    and the hub's hyperbolic centre to 0."""
    circ, _ = geom.fit_circle(chart_seam)
    c0, R = complex(circ.center), circ.radius
    hc, hr = hub_circle
    w = (complex(hc) - c0) / R
    h, _ = geom.hyperbolic_center(w, hr / R)
    if not np.isfinite(h):
        h = w
    phi = geom.disc_automorphism(h)
    img = phi((np.asarray(chart_pts) - c0) / R)
    return np.mod(np.angle(img) / (2 * math.pi), 1.0)


def _circ_residual(realized: np.ndarray, expected: np.ndarray) -> float:
    d = np.mod(realized - expected + 0.5, 1.0) - 0.5
    shift = math.atan2(np.sin(2 * math.pi * d).mean(), np.cos(2 * math.pi * d).mean()) / (2 * math.pi)
    d = np.mod(d - shift + 0.5, 1.0) - 0.5
    return float(np.abs(d).max())


def verify_intrinsic(res: IntrinsicResult, component: int) -> float:
    """Max deviation between where the cycle of ``component`` sits around its disc and
    where the Fuchsian parametrization says it should.

    The geometry of omega together with this one disc is rebuilt (its hyperbolic
    maximal packing when other components exist, the sphere packing otherwise)
    and read in a chart where the fitted disc boundary is the unit circle and
    the disc's centre circle sits at 0.
    """
    if component not in res.component_discs:
        raise MissingComponent(component)
    d = res.component_discs[component]
    P = res.sphere_packing
    S = P.complex
    roles = res.roles
    cyc = d["cycle"]
    expected = np.mod(-d["param"].starting_at(cyc[0]).ts, 1.0)
    capside = set(d["cap_vertices"]) | {d["ideal"]}
    if len(res.component_discs) == 1:
        hub = P.centers[d["ideal"]]
        R = rotation_to_south(hub)
        to_chart = lambda p: geom.inverse_stereographic(np.asarray(p) @ R.T)
        E = seam_edges(P, roles, d)
        seam = to_chart(P.tangency_points(E))
        hc, hr = geom.cap_to_plane_circle(R @ hub, float(P.radii[d["ideal"]]))
        pts = []
        for v in cyc:
            nb = [u for u in S.flowers[v] if u in capside]
            tp = to_chart(P.tangency_points([(v, u) for u in nb]))
            pts.append(np.mean(tp) if tp.size else np.nan)
        pts = np.array(pts)
    else:
        drop = [v for k, e in res.component_discs.items() if k != component
                for v in list(e["cap_vertices"]) + [e["ideal"]]]
        sub, remap = remove_vertices(S, drop)
        L, rep = solve_max_hyperbolic(sub, res.config.tol, res.config.max_iter, True)
        cap_new = {int(remap[v]) for v in capside}
        region = set(cap_new)
        for v in list(cap_new):
            region.update(sub.flowers[v])
        hub = int(remap[d["ideal"]])
        D = layout(sub, L, anchor=(hub, sub.flowers[hub][0]), region=region)
        E = [(u, v) for u in sorted(cap_new) for v in sub.flowers[u] if v not in cap_new]
        seam = D.tangency_points(E)
        hc, hr = D.centers[hub], D.radii[hub]
        pts = []
        for v in cyc:
            w = int(remap[v])
            nb = [u for u in sub.flowers[w] if u in cap_new]
            pts.append(np.mean(D.tangency_points([(w, u) for u in nb])))
        pts = np.array(pts)
    realized = _realized(seam, (hc, hr), pts)
    return _circ_residual(realized, expected)


# -- symmetry and point evaluation -------------------------------------------------

def map_points(res: IntrinsicResult, z) -> np.ndarray:
    """Carrier-map images of domain points (barycentric in the cut-out triangle, radially projected)."""
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    T = res.cutout.complex
    emb = res.cutout.embedding
    F = np.array(T.faces, dtype=np.int64)
    A, B, C = emb[F[:, 0]], emb[F[:, 1]], emb[F[:, 2]]
    out = np.zeros((z.size, 3))
    X = res.sphere_packing.centers
    for i, p in enumerate(z):
        den = ((B - A).conjugate() * (C - A)).imag
        l1 = ((p - A).conjugate() * (C - A)).imag / den
        l2 = ((B - A).conjugate() * (p - A)).imag / den
        l0 = 1 - l1 - l2
        score = np.minimum(np.minimum(l0, l1), l2)
        f = int(np.argmax(score))
        if score[f] < -1e-9:
            raise ValueError(f"point {p} is not covered by the cut-out carrier")
        q = l0[f] * X[F[f, 0]] + l1[f] * X[F[f, 1]] + l2[f] * X[F[f, 2]]
        out[i] = q / np.linalg.norm(q)
    return out


def _circumcircle(z1, z2, z3):
    a, b = z2 - z1, z3 - z1
    c = z1 + (np.abs(a) ** 2 * b - np.abs(b) ** 2 * a) / (np.conj(a) * b - a * np.conj(b))
    return c, np.abs(z1 - c)


def limit_points(c1: complex, r1: float, c2: complex, r2: float) -> tuple[complex, complex]:
    """Common inverse points of two disjoint plane circles (first inside circle 1)."""
    d = abs(c2 - c1)
    u = (c2 - c1) / d
    b = r1 * r1 + d * d - r2 * r2
    disc = math.sqrt(max(b * b - 4 * d * d * r1 * r1, 0.0))
    x1, x2 = (b - disc) / (2 * d), (b + disc) / (2 * d)
    return c1 + u * x1, c1 + u * x2


def _free_pole(X: np.ndarray, rho: np.ndarray, n: int = 4096) -> np.ndarray:
    # fibonacci points; keep the one farthest outside every cap
    k = np.arange(n) + 0.5
    z = 1 - 2 * k / n
    phi = math.pi * (3 - math.sqrt(5)) * k
    s = np.sqrt(1 - z * z)
    G = np.column_stack([s * np.cos(phi), s * np.sin(phi), z])
    gap = np.arccos(np.clip(G @ X.T, -1, 1)) - rho[None, :]
    return G[int(np.argmax(gap.min(axis=1)))]


def symmetry_deviation(res: IntrinsicResult, order: int = 6, center: complex = 0j) -> dict:
    """Check invariance under the rotation of order ``order`` about ``center``.

    The circle at ``center`` and the outer disc's centre circle are both fixed
    by the symmetry, so it is an elliptic Möbius map whose fixed points are
    the limit points of that pair.  Sending those to 0 and infinity makes it a
    rotation of the plane.  Returns the worst centre deviation of cut-out
    circles relative to their radius, the median, and the radius mismatch.
    """
    cut = res.cutout
    emb = cut.embedding
    n = cut.complex.vertex_count
    scale = cut.mesh
    key = lambda z: (int(round(z.real / scale * 64)), int(round(z.imag / scale * 64)))
    index = {key(z): v for v, z in enumerate(emb)}
    rot = np.exp(2j * math.pi / order)
    sigma = np.array([index.get(key(center + (z - center) * rot), -1) for z in emb])
    if (sigma < 0).any():
        raise ValueError(f"cut-out is not {order}-fold symmetric ({int((sigma < 0).sum())} misses)")
    v0 = int(np.argmin(np.abs(emb - center)))
    outer = res.component_discs[cut.domain.outer_index]["ideal"]
    P = res.sphere_packing
    R = rotation_to_south(-_free_pole(P.centers, P.radii))
    X = P.centers @ R.T
    plane = [geom.cap_to_plane_circle(X[v], float(P.radii[v])) for v in range(n)]
    c = np.array([p[0] for p in plane])
    r = np.array([p[1] for p in plane])
    ch, rh = geom.cap_to_plane_circle(X[outer], float(P.radii[outer]))
    p, q = limit_points(c[v0], r[v0], ch, rh)
    M = lambda z: (z - p) / (z - q)
    w = np.exp(2j * math.pi * np.arange(3) / 3)[:, None]
    cc, rr = _circumcircle(*M(c[None, :] + r[None, :] * w))
    best = None
    for sgn in (1, -1):
        e = np.exp(sgn * 2j * math.pi / order)
        dev = np.abs(cc[sigma] - e * cc) / rr[sigma]
        if best is None or dev.max() < best.max():
            best = dev
    return {"max": float(best.max()), "median": float(np.median(best)),
            "radius_spread": float(np.max(np.abs(rr[sigma] - rr) / rr))}
