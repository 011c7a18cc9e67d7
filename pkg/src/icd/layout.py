"""Laying out labels as circle packings, Möbius normalization and carrier maps."""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from . import geom
from .complex import Triangulation
from .errors import (
    DegenerateFace,
    DegenerateTriple,
    MismatchedComplexes,
    UnconvergedLabel,
)
from .geom import DISC, PLANE, SPHERE, Circle3, MobiusMap
from .label import EUCLIDEAN, HYPERBOLIC, PackingLabel, residual

LAYOUT_LABEL_TOL = 1e-8


@dataclass
class Packing:
    """Circles of a complex in a geometric model.

    PLANE/DISC: ``centers`` complex, ``radii`` Euclidean.  SPHERE: ``centers``
    unit vectors (N, 3), ``radii`` angular.  ``decay`` is kept for DISC layouts
    (0 marks a horocycle).  ``anchors`` are sphere points transported as points
    by every Möbius map applied to the packing; they start at the circle centres.
    """
    complex: Triangulation
    model: str
    centers: np.ndarray
    radii: np.ndarray
    label: PackingLabel | None = None
    decay: np.ndarray | None = None
    anchors: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.model == SPHERE and self.anchors is None:
            self.anchors = np.array(self.centers, dtype=float, copy=True)

    def circle(self, v: int) -> Circle3:
        c = self.centers[v]
        return Circle3(c if self.model == SPHERE else complex(c), float(self.radii[v]), self.model)

    def __len__(self):
        return len(self.radii)

    def tangency_residuals(self, edges=None) -> np.ndarray:
        """|dist(centres) - (r_u + r_v)| / (r_u + r_v) per edge in the model metric."""
        E = np.array(self.complex.edges if edges is None else edges, dtype=np.int64).reshape(-1, 2)
        u, v = E[:, 0], E[:, 1]
        s = self.radii[u] + self.radii[v]
        if self.model == SPHERE:
            d = geom.sphere_distance(self.centers[u], self.centers[v])
        else:
            d = np.abs(self.centers[u] - self.centers[v])
        return np.abs(d - s) / s

    def tangency_points(self, edges) -> np.ndarray:
        E = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
        u, v = E[:, 0], E[:, 1]
        if self.model == SPHERE:
            return geom.sphere_point_toward(self.centers[u], self.centers[v], self.radii[u])
        d = self.centers[v] - self.centers[u]
        return self.centers[u] + d / np.abs(d) * self.radii[u]

    def apply_mobius(self, M: MobiusMap) -> "Packing":
        """Image under a Möbius map (SPHERE model only; the map acts via the chart)."""
        if self.model != SPHERE:
            raise ValueError("apply_mobius expects a sphere packing")
        c, r = transform_caps(M, self.centers, self.radii)
        anchors = M.apply_sphere(self.anchors)
        return Packing(self.complex, SPHERE, c, r, self.label, None, anchors, dict(self.meta))

    def to_dict(self) -> dict:
        circles = []
        for v in range(len(self.radii)):
            c = self.centers[v]
            if self.model == SPHERE:
                center = [float(x) for x in c]
            else:
                center = [float(c.real), float(c.imag)]
            circles.append({"vertex": v, "center": center, "radius": float(self.radii[v])})
        return {"model": self.model, "circles": circles, "complex": self.complex.to_text()}

    @classmethod
    def from_dict(cls, d: dict) -> "Packing":
        T = Triangulation.from_text(d["complex"])
        model = d["model"]
        circles = sorted(d["circles"], key=lambda c: c["id"] if "id" in c else c["vertex"])
        if model == SPHERE:
            centers = np.array([c["center"] for c in circles], dtype=float).reshape(-1, 3)
        else:
            centers = np.array([complex(*c["center"][:2]) for c in circles])
        radii = np.array([c["radius"] for c in circles], dtype=float)
        return cls(T, model, centers, radii)


# -- sphere cap transforms ---------------------------------------------------

def transform_caps(M: MobiusMap, centers: np.ndarray, radii: np.ndarray):
    """Vectorized exact image of spherical caps under a Möbius map."""
    centers = np.asarray(centers, dtype=float).reshape(-1, 3)
    radii = np.asarray(radii, dtype=float)
    n = centers.shape[0]
    if n == 0:
        return centers.copy(), radii.copy()
    helper = np.where(np.abs(centers[:, :1]) < 0.9, [[1.0, 0.0, 0.0]], [[0.0, 1.0, 0.0]])
    e1 = np.cross(centers, helper)
    e1 /= np.linalg.norm(e1, axis=1, keepdims=True)
    e2 = np.cross(centers, e1)
    phi = 0.3 + 2 * np.pi * np.arange(3) / 3
    pts = (np.cos(radii)[:, None, None] * centers[:, None, :]
           + np.sin(radii)[:, None, None] * (np.cos(phi)[None, :, None] * e1[:, None, :]
                                              + np.sin(phi)[None, :, None] * e2[:, None, :]))
    q = M.apply_sphere(pts)
    inside = M.apply_sphere(centers)
    nrm = np.cross(q[:, 1] - q[:, 0], q[:, 2] - q[:, 0])
    nrm /= np.linalg.norm(nrm, axis=1, keepdims=True)
    dist = np.einsum("nkj,nj->n", q, nrm) / 3.0
    flip = np.einsum("nj,nj->n", inside, nrm) < dist
    nrm[flip] *= -1
    rad = np.mean(geom.sphere_distance(nrm[:, None, :], q), axis=1)
    return nrm, rad


def disc_to_sphere(centers: np.ndarray, radii: np.ndarray):
    """Stereographic images of plane discs as caps (vectorized)."""
    centers = np.asarray(centers, dtype=complex)
    radii = np.asarray(radii, dtype=float)
    t = np.abs(centers)
    u = np.where(t > 0, centers / np.where(t > 0, t, 1), 1.0 + 0j)
    p1 = geom.stereographic(u * (t - radii))
    p2 = geom.stereographic(u * (t + radii))
    ang = geom.sphere_distance(p1, p2)
    m = p1 + p2
    out_c = m / np.linalg.norm(m, axis=1, keepdims=True).clip(1e-300)
    out_r = 0.5 * ang
    bad = ang >= math.pi - 1e-6
    for k in np.flatnonzero(bad):
        c, r = geom.plane_circle_to_cap(centers[k], radii[k])
        out_c[k], out_r[k] = c, r
    return out_c, out_r


# -- layout ------------------------------------------------------------------

def _default_anchor(T: Triangulation, L: PackingLabel):
    if L.geometry == HYPERBOLIC:
        cands = [v for v in T.interior_vertices] + [v for v in T.boundary_vertices if L.radii[v] > 0]
    else:
        cands = list(T.interior_vertices) or [0]
    v0 = cands[0] if cands else 0
    return v0, T.flowers[v0][0]


def _place_euclid(za, zb, ra, rb, rc):
    alpha = geom.euclidean_angle(ra, rb, rc)
    d = zb - za
    return za + (ra + rc) * (d / abs(d)) * complex(math.cos(alpha), math.sin(alpha))


def _rho(decay, co=None):
    """Euclidean radius of the origin-centred circle, tanh(h/2)."""
    s = math.sqrt(decay)
    if co is None:
        return (1.0 - s) / (1.0 + s)
    return co / ((1.0 + s) * (1.0 + s))


def _place_in_frame(theta, xa, xc, ya=None, yc=None):
    """Circle tangent to the origin-centred circle of decay xa, in direction theta."""
    ya = 1.0 - xa if ya is None else ya
    yc = 1.0 - xc if yc is None else yc
    sa = math.sqrt(xa)
    inner = _rho(xa, ya)
    # tanh(h_a/2 + h_c) - tanh(h_a/2), free of cancellation for tiny circles
    tc = yc / (1.0 + xc)
    diff = tc * (2.0 * sa / (1.0 + sa)) * (1.0 + inner) / (1.0 + inner * tc)
    u = complex(math.cos(theta), math.sin(theta))
    return u * (inner + diff / 2.0), diff / 2.0


def _place_hyp(ca, ra, xa, cb, rb, xb, xc, ya=None, yb=None, yc=None):
    """Place circle c of face (a, b, c), counter-clockwise, given a and b in the disc."""
    if xa > 0:
        return _place_from_pivot(ca, ra, cb, rb, xa, xb, xc, +1, ya, yb, yc)
    if xb > 0:
        return _place_from_pivot(cb, rb, ca, ra, xb, xa, xc, -1, yb, ya, yc)
    # a and b both horocycles: send a's ideal point to infinity in the upper half-plane
    yc = 1.0 - xc if yc is None else yc
    zeta = ca / abs(ca)
    G = MobiusMap(1j, 1j * zeta, -1, zeta)
    top = complex(G(zeta * (1.0 - 2.0 * ra))).imag
    bi = geom.mobius_apply(G, Circle3(complex(cb), float(rb), PLANE))
    xbc = complex(bi.center).real
    if xc == 0:
        c_img = Circle3(complex(xbc + top, top / 2.0), top / 2.0, PLANE)
    else:
        c_img = Circle3(complex(xbc + top * math.sqrt(yc), top * (1.0 + xc) / 2.0),
                        top * yc / 2.0, PLANE)
    out = geom.mobius_apply(G.inverse(), c_img)
    return complex(out.center), out.radius


def _disc_move(h: complex, c: complex, r: float) -> tuple[complex, float]:
    """Image of the circle (c, r) under z -> (z - h) / (1 - conj(h) z), in plain complex arithmetic."""
    if h == 0:
        return c, r
    hb = h.conjugate()
    f = lambda z: (z - h) / (1.0 - hb * z)
    off = 1.0 / hb - c
    zs = c + r * r / off.conjugate()
    w0 = f(zs)
    return w0, abs(f(c - r * off / abs(off)) - w0)


def _place_from_pivot(cp, rp, cq, rq, xp, xq, xc, sign, yp=None, yq=None, yc=None):
    # pivot p finite; q the other known circle; sign +1 when (p, q, c) is ccw
    hc, _ = geom.hyperbolic_center(cp, rp)
    qc, _ = _disc_move(hc, complex(cq), float(rq))
    theta_q = math.atan2(qc.imag, qc.real)
    if sign > 0:
        alpha = geom.hyperbolic_angle(xp, xq, xc, yp, yq, yc)
    else:
        alpha = geom.hyperbolic_angle(xp, xc, xq, yp, yc, yq)
    c0, r0 = _place_in_frame(theta_q + sign * alpha, xp, xc, yp, yc)
    return _disc_move(-hc, c0, r0)


def layout(T: Triangulation, L: PackingLabel, anchor=None, check: bool = True,
           region=None, order=None) -> Packing:
    """Place every circle once by breadth-first traversal of faces.

    Euclidean labels give a PLANE packing with the anchor's first vertex at 0 and
    second on the positive real axis; hyperbolic labels give a DISC packing with
    the first anchor circle hyperbolically centred at 0.  ``region`` restricts
    the traversal to faces whose vertices all lie in the given set.  ``order``
    permutes the face-id tie-break (used to test well-definedness).
    """
    if check:
        res = residual(T, L)
        if not res <= LAYOUT_LABEL_TOL:
            raise UnconvergedLabel(f"label residual {res:.3g} too large for layout")
    if anchor is None:
        anchor = _default_anchor(T, L)
    v0, v1 = anchor
    if not T.has_edge(v0, v1):
        raise ValueError(f"anchor {anchor} is not an edge")
    n = T.vertex_count
    centers = np.full(n, np.nan + 0j)
    radii = np.full(n, np.nan)
    r = L.radii
    hyper = L.geometry == HYPERBOLIC
    yco = L.co() if hyper else None

    if not hyper:
        centers[v0] = 0.0
        centers[v1] = r[v0] + r[v1]
        radii[v0], radii[v1] = r[v0], r[v1]
    else:
        x0, x1 = r[v0], r[v1]
        y0, y1 = yco[v0], yco[v1]
        if x0 > 0:
            centers[v0], radii[v0] = 0j, _rho(x0, y0)
            centers[v1], radii[v1] = _place_in_frame(0.0, x0, x1, y0, y1)
        elif x1 > 0:
            centers[v1], radii[v1] = 0j, _rho(x1, y1)
            centers[v0], radii[v0] = _place_in_frame(math.pi, x1, x0, y1, y0)
        else:
            centers[v0], radii[v0] = -0.5 + 0j, 0.5
            centers[v1], radii[v1] = 0.5 + 0j, 0.5

    faces = T.faces
    fidx = T.face_index()
    allowed = None if region is None else set(int(v) for v in region)
    start = fidx[(v0, v1)] if (v0, v1) in fidx else fidx[(v1, v0)]
    rank = np.arange(len(faces)) if order is None else np.asarray(order)
    seen = np.zeros(len(faces), dtype=bool)
    seen[start] = True
    queue = deque([start])
    while queue:
        f = queue.popleft()
        a, b, c = faces[f]
        known = [not np.isnan(radii[x]) for x in (a, b, c)]
        if not all(known):
            if sum(known) < 2:
                raise RuntimeError("layout reached a face with fewer than two placed circles")
            # rotate so the unknown vertex comes last
            while not (known[0] and known[1]):
                a, b, c = b, c, a
                known = known[1:] + known[:1]
            if hyper:
                centers[c], radii[c] = _place_hyp(centers[a], radii[a], r[a],
                                                  centers[b], radii[b], r[b], r[c],
                                                  yco[a], yco[b], yco[c])
            else:
                centers[c] = _place_euclid(centers[a], centers[b], r[a], r[b], r[c])
                radii[c] = r[c]
        nbr_faces = []
        for x, y in ((a, b), (b, c), (c, a)):
            g = fidx.get((y, x))
            if g is not None and not seen[g]:
                if allowed is not None and not all(w in allowed for w in faces[g]):
                    continue
                nbr_faces.append(g)
        for g in sorted(nbr_faces, key=lambda k: rank[k]):
            seen[g] = True
            queue.append(g)
    model = DISC if hyper else PLANE
    return Packing(T, model, centers, radii, L, r.copy() if hyper else None)


# -- Möbius normalization ---------------------------------------------------

def normalize_three_points(P: Packing, v1: int, v2: int, v3: int, targets) -> Packing:
    """Apply the Möbius map sending the anchors of v1, v2, v3 to ``targets``."""
    if len({v1, v2, v3}) < 3:
        raise DegenerateTriple("vertices must be distinct")
    targets = np.asarray(targets, dtype=float).reshape(3, 3)
    if min(np.linalg.norm(targets[0] - targets[1]), np.linalg.norm(targets[1] - targets[2]),
           np.linalg.norm(targets[0] - targets[2])) < 1e-12:
        raise DegenerateTriple("targets must be distinct")
    src = P.anchors[[v1, v2, v3]]
    try:
        M = geom.mobius_from_sphere_points(src, targets)
    except geom.DegenerateInput as exc:
        raise DegenerateTriple(str(exc)) from exc
    out = P.apply_mobius(M)
    out.meta["normalization"] = M.coefficients
    return out


def boost_towards(n: np.ndarray, lam: float) -> MobiusMap:
    """Loxodromic-free boost along axis ``n``: points flow away from ``n`` when lam < 1."""
    p, q = geom.sphere_to_homogeneous(np.asarray(n, dtype=float))
    s = math.sqrt(abs(p) ** 2 + abs(q) ** 2)
    p, q = p / s, q / s
    U = MobiusMap(np.conj(p), np.conj(q), -q, p)
    D = MobiusMap(math.sqrt(lam), 0, 0, 1.0 / math.sqrt(lam))
    return U.inverse() @ D @ U


def conformal_barycenter_map(points: np.ndarray, tol: float = 1e-14, max_iter: int = 500) -> MobiusMap:
    """Möbius map after which the given sphere points have centroid 0."""
    pts = np.asarray(points, dtype=float).reshape(-1, 3)
    M = MobiusMap.identity()
    cur = pts
    for _ in range(max_iter):
        m = cur.mean(axis=0)
        nm = float(np.linalg.norm(m))
        if nm < tol:
            break
        beta = min(0.5 * nm, 0.9)
        B = boost_towards(m / nm, (1.0 - beta) / (1.0 + beta))
        M = B @ M
        cur = M.apply_sphere(pts)
    return M


def center_packing(P: Packing) -> Packing:
    """Symmetrizing normalization: tangency points get centroid 0."""
    E = np.array(P.complex.edges)
    tp = P.tangency_points(E)
    M = conformal_barycenter_map(tp)
    out = P.apply_mobius(M)
    out.meta["centering"] = M.coefficients
    return out


# -- carrier maps ---------------------------------------------------------------

@dataclass
class CarrierMap:
    """Per-face affine maps between the carriers of two packings.

    ``linear[f]`` maps orthonormal coordinates of the source face's plane to
    the target space (2-D or 3-D); for sphere targets the affine map goes to
    the inscribed polyhedron face and is followed by radial projection.
    """
    faces: np.ndarray
    linear: np.ndarray
    src_points: np.ndarray
    dst_points: np.ndarray
    radial: bool

    def __len__(self):
        return len(self.faces)

    def __getitem__(self, f):
        return self.linear[f]

    def apply(self, f: int, bary) -> np.ndarray:
        """Image of a point with barycentric coordinates ``bary`` in face f."""
        w = np.asarray(bary, dtype=float)
        q = w @ self.dst_points[f]
        if self.radial:
            q = q / np.linalg.norm(q)
        return q


def _as_real(points: np.ndarray) -> np.ndarray:
    if np.iscomplexobj(points):
        return np.stack([points.real, points.imag], axis=-1)
    return np.asarray(points, dtype=float)


def carrier_map(P_src: Packing, P_dst: Packing, faces=None) -> CarrierMap:
    if (P_src.complex.vertex_count != P_dst.complex.vertex_count
            or P_src.complex.flowers != P_dst.complex.flowers):
        if faces is None:
            raise MismatchedComplexes("packings have different complexes")
    F = np.array(P_src.complex.faces if faces is None else faces, dtype=np.int64).reshape(-1, 3)
    S = _as_real(P_src.centers)[F]
    D = _as_real(P_dst.centers)[F]
    return CarrierMap(F, affine_parts(S, D), S, D, P_dst.model == SPHERE)


def affine_parts(S: np.ndarray, D: np.ndarray) -> np.ndarray:
    """Linear parts of triangle-to-triangle affine maps (source in its own plane frame)."""
    Es = np.stack([S[:, 1] - S[:, 0], S[:, 2] - S[:, 0]], axis=-1)  # (F, k, 2)
    Ed = np.stack([D[:, 1] - D[:, 0], D[:, 2] - D[:, 0]], axis=-1)  # (F, m, 2)
    Q, R = np.linalg.qr(Es)
    det = R[:, 0, 0] * R[:, 1, 1]
    Rinv = np.zeros_like(R)
    with np.errstate(divide="ignore", invalid="ignore"):
        Rinv[:, 0, 0] = 1.0 / R[:, 0, 0]
        Rinv[:, 1, 1] = 1.0 / R[:, 1, 1]
        Rinv[:, 0, 1] = -R[:, 0, 1] / det
    Rinv[det == 0] = np.nan
    return Ed @ Rinv


def dilatation(face_map) -> float:
    """Ratio of the larger to the smaller singular value of an affine part."""
    A = np.asarray(face_map, dtype=float)
    s = np.linalg.svd(A, compute_uv=False)
    if not np.all(np.isfinite(s)) or s[-1] <= 1e-300 or s[-1] < 1e-14 * s[0]:
        raise DegenerateFace("face map is degenerate")
    return float(s[0] / s[-1])


def dilatations(cmap: CarrierMap) -> np.ndarray:
    """Vectorized :func:`dilatation` over all faces (inf for degenerate faces)."""
    A = cmap.linear
    ok = np.all(np.isfinite(A.reshape(len(A), -1)), axis=1)
    out = np.full(len(A), np.inf)
    if ok.any():
        s = np.linalg.svd(A[ok], compute_uv=False)
        with np.errstate(divide="ignore"):
            out[ok] = np.where(s[:, -1] > 0, s[:, 0] / s[:, -1], np.inf)
    return out
