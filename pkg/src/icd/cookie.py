"""Hexagonal cut-out packings of planar domains.

The regular hexagonal packing with circles of radius ``eps`` (lattice spacing
``2 eps``, one row along the real axis through 0) is restricted to circles
whose closed discs lie in the domain, then pruned to a clean connected
triangulation.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import shapely
from shapely.geometry import LineString, Polygon

from .complex import Triangulation, boundary_cycles, build_from_faces
from .errors import ComponentNotSeparated, DomainError, Empty, NoInterior

CIRCLE = "circle"
POLYGON = "polygon"

_W = complex(0.5, math.sqrt(3) / 2)


@dataclass
class Component:
    kind: str
    center: complex = 0j
    radius: float = 0.0
    points: np.ndarray | None = None
    outer: bool = False

    def __post_init__(self):
        if self.kind == CIRCLE:
            if not self.radius > 0:
                raise DomainError("circle radius must be positive")
            self.center = complex(self.center)
        elif self.kind == POLYGON:
            pts = np.asarray(self.points, dtype=complex).ravel()
            if pts.size >= 2 and pts[0] == pts[-1]:
                pts = pts[:-1]
            if pts.size < 3:
                raise DomainError("polygon needs at least three vertices")
            poly = Polygon(np.column_stack([pts.real, pts.imag]))
            if not LineString(np.column_stack([np.r_[pts.real, pts[0].real],
                                               np.r_[pts.imag, pts[0].imag]])).is_simple:
                raise DomainError("polygon is self-intersecting")
            if poly.area == 0:
                raise DomainError("polygon is degenerate")
            self.points = pts
            self.center = complex(poly.centroid.x, poly.centroid.y)
        else:
            raise DomainError(f"unknown component type {self.kind!r}")

    @property
    def _shape(self):
        if self.kind == CIRCLE:
            return shapely.Point(self.center.real, self.center.imag).buffer(self.radius, 256)
        return Polygon(np.column_stack([self.points.real, self.points.imag]))

    def inside(self, z: np.ndarray) -> np.ndarray:
        """Strictly inside the Jordan curve."""
        z = np.asarray(z, dtype=complex)
        if self.kind == CIRCLE:
            return np.abs(z - self.center) < self.radius
        return shapely.contains_xy(self._shape, z.real, z.imag)

    def boundary_distance(self, z: np.ndarray) -> np.ndarray:
        z = np.asarray(z, dtype=complex)
        if self.kind == CIRCLE:
            return np.abs(np.abs(z - self.center) - self.radius)
        ring = self._shape.exterior
        return shapely.distance(ring, shapely.points(z.real, z.imag))

    def representative_point(self) -> complex:
        if self.kind == CIRCLE:
            return self.center
        p = self._shape.representative_point()
        return complex(p.x, p.y)

    def transformed(self, a: complex, b: complex) -> "Component":
        """Image under the similarity z -> a z + b."""
        if self.kind == CIRCLE:
            return Component(CIRCLE, a * self.center + b, abs(a) * self.radius, outer=self.outer)
        return Component(POLYGON, points=a * self.points + b, outer=self.outer)

    def to_dict(self) -> dict:
        if self.kind == CIRCLE:
            d = {"type": CIRCLE, "center": [self.center.real, self.center.imag],
                 "radius": self.radius}
        else:
            d = {"type": POLYGON, "points": [[p.real, p.imag] for p in self.points]}
        if self.outer:
            d["outer"] = True
        return d


@dataclass
class DomainSpec:
    """Bounded finitely connected domain: inside the outer curve, outside the holes."""
    components: list[Component]
    holes_are_complement: bool = True

    def __post_init__(self):
        if not self.components:
            raise DomainError("domain needs at least one component")
        flagged = [i for i, c in enumerate(self.components) if c.outer]
        if len(flagged) > 1:
            raise DomainError("more than one outer component")
        if flagged:
            self.outer_index = flagged[0]
        else:
            self.outer_index = self._detect_outer()
        outer = self.components[self.outer_index]
        shapes = [c._shape for c in self.components]
        for i, ci in enumerate(self.components):
            if i == self.outer_index:
                continue
            if not shapes[self.outer_index].contains(shapes[i]):
                raise DomainError(f"component {i} is not inside the outer boundary")
            for j in range(i + 1, len(self.components)):
                if j != self.outer_index and shapes[i].intersects(shapes[j]):
                    raise DomainError(f"components {i} and {j} overlap")
        self.outer = outer

    def _detect_outer(self) -> int:
        shapes = [c._shape for c in self.components]
        if len(shapes) == 1:
            return 0
        cands = [i for i, s in enumerate(shapes)
                 if all(s.contains(t) for j, t in enumerate(shapes) if j != i)]
        if len(cands) != 1:
            raise DomainError("cannot identify the outer boundary; only bounded domains are supported")
        return cands[0]

    @property
    def holes(self) -> list[int]:
        return [i for i in range(len(self.components)) if i != self.outer_index]

    def disc_fits(self, z: np.ndarray, r: float) -> np.ndarray:
        """Closed disc of radius r about each point lies in the open domain."""
        z = np.asarray(z, dtype=complex)
        ok = self.outer.inside(z) & (self.outer.boundary_distance(z) > r)
        for k in self.holes:
            c = self.components[k]
            ok &= ~c.inside(z) & (c.boundary_distance(z) > r)
        return ok

    def contains(self, z) -> np.ndarray:
        return self.disc_fits(z, 0.0)

    def transformed(self, a: complex, b: complex = 0j) -> "DomainSpec":
        return DomainSpec([c.transformed(a, b) for c in self.components], self.holes_are_complement)

    def to_dict(self) -> dict:
        return {"components": [c.to_dict() for c in self.components],
                "holes_are_complement": self.holes_are_complement}

    @classmethod
    def from_dict(cls, d: dict) -> "DomainSpec":
        comps = []
        for c in d["components"]:
            kind = c.get("type")
            if kind == CIRCLE:
                x, y = c["center"]
                comps.append(Component(CIRCLE, complex(float(x), float(y)), float(c["radius"]),
                                       outer=bool(c.get("outer", False))))
            elif kind == POLYGON:
                pts = np.array([complex(float(x), float(y)) for x, y in c["points"]])
                comps.append(Component(POLYGON, points=pts, outer=bool(c.get("outer", False))))
            else:
                raise DomainError(f"unknown component type {kind!r}")
        hac = d.get("holes_are_complement", True)
        if hac is not True:
            raise DomainError("only holes_are_complement = true is supported")
        return cls(comps, True)

    @classmethod
    def from_json(cls, text: str) -> "DomainSpec":
        return cls.from_dict(json.loads(text))

    @classmethod
    def disc(cls, center=0j, radius=1.0) -> "DomainSpec":
        return cls([Component(CIRCLE, center, radius)])

    @classmethod
    def annulus(cls, inner: float, outer: float = 1.0, center=0j) -> "DomainSpec":
        return cls([Component(CIRCLE, center, outer), Component(CIRCLE, center, inner)])


@dataclass
class CutoutResult:
    complex: Triangulation
    embedding: np.ndarray
    mesh: float
    cycle_map: dict[int, list[int]]
    domain: DomainSpec | None = None
    lattice: np.ndarray | None = None  # axial (q, r) per vertex; -1 rows for refined vertices
    meta: dict = field(default_factory=dict)


# -- lattice ------------------------------------------------------------------

def hex_lattice(xmin, xmax, ymin, ymax, eps):
    """Axial coordinates and positions of lattice points covering a box."""
    h = 2.0 * eps
    rmin = int(math.floor(ymin / (h * _W.imag))) - 1
    rmax = int(math.ceil(ymax / (h * _W.imag))) + 1
    qs, rs = [], []
    for r in range(rmin, rmax + 1):
        q0 = int(math.floor(xmin / h - r * 0.5)) - 1
        q1 = int(math.ceil(xmax / h - r * 0.5)) + 1
        q = np.arange(q0, q1 + 1)
        qs.append(q)
        rs.append(np.full(q.size, r))
    q = np.concatenate(qs)
    r = np.concatenate(rs)
    return q, r, h * (q + r * _W)


def lattice_faces(q: np.ndarray, r: np.ndarray) -> list[tuple[int, int, int]]:
    index = {(int(a), int(b)): i for i, (a, b) in enumerate(zip(q, r))}
    faces = []
    for (a, b), i in index.items():
        for s, t in (((a + 1, b), (a, b + 1)), ((a + 1, b - 1), (a + 1, b))):
            j = index.get(s)
            k = index.get(t)
            if j is not None and k is not None:
                faces.append((i, j, k))
    faces.sort()
    return faces


# -- pruning --------------------------------------------------------------------

def _fans(faces_at_v: list[tuple[int, int]]) -> list[list[tuple[int, int]]]:
    """Group (u, w) petals around a vertex into maximal fans."""
    succ = {u: w for u, w in faces_at_v}
    pred = {w: u for u, w in faces_at_v}
    left = set(succ)
    fans = []
    for start in sorted(succ):
        if start not in left:
            continue
        # walk back to the beginning of the fan
        u = start
        while u in pred and pred[u] in left and pred[u] != start:
            u = pred[u]
        fan = []
        while u in left:
            left.discard(u)
            fan.append((u, succ[u]))
            u = succ[u]
        fans.append(fan)
    return fans


def prune(faces, embedding, edges: Sequence = ()) -> tuple[Triangulation, np.ndarray, np.ndarray]:
    """Reduce raw triangles to one connected triangulated surface.

    Vertices in no face (isolated points, pendant and dangling edges) are
    dropped; pinch vertices are split per fan; the largest component survives
    (ties: lowest smallest vertex id).  Returns the complex, its embedding and
    the original id of every surviving vertex.  ``edges`` are accepted for
    callers holding a 1-skeleton; they never survive without a face.
    """
    if isinstance(faces, Triangulation):
        faces = faces.faces
    emb = np.asarray(embedding)
    faces = [tuple(int(x) for x in f) for f in faces]
    origin = list(range(len(emb)))
    banned: set[int] = set()
    while True:
        faces = [f for f in faces if not (set(f) & banned)]
        if not faces:
            raise Empty("nothing survives pruning")
        # split pinch vertices
        at = {}
        for a, b, c in faces:
            at.setdefault(a, []).append((b, c))
            at.setdefault(b, []).append((c, a))
            at.setdefault(c, []).append((a, b))
        relabel: dict[tuple[int, int], int] = {}
        for v in sorted(at):
            fans = _fans(at[v])
            if len(fans) > 1:
                fans.sort(key=lambda fan: min(min(p) for p in fan))
                for fan in fans[1:]:
                    nv = len(origin)
                    origin.append(origin[v])
                    for p in fan:
                        relabel[(v, p[0])] = nv
        if relabel:
            new_faces = []
            for a, b, c in faces:
                a2 = relabel.get((a, b), a)
                b2 = relabel.get((b, c), b)
                c2 = relabel.get((c, a), c)
                new_faces.append((a2, b2, c2))
            faces = new_faces
        # components by shared vertices
        parent = {}

        def find(x):
            while parent.setdefault(x, x) != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        for a, b, c in faces:
            ra, rb, rc = find(a), find(b), find(c)
            parent[rb] = ra
            parent[find(rc)] = ra
        groups: dict[int, set[int]] = {}
        for v in parent:
            groups.setdefault(find(v), set()).add(v)
        best = max(groups.values(), key=lambda g: (len(g), -min(g)))
        faces = [f for f in faces if f[0] in best]
        # a pinch whose copies all stayed in one component would put two circles in one place
        seen_origin: dict[int, int] = {}
        clash = set()
        for v in sorted(best):
            o = origin[v]
            if o in seen_origin:
                clash.add(o)
            seen_origin[o] = v
        if clash:
            banned |= {v for v in best if origin[v] in clash}
            continue
        break
    keep = sorted(best, key=lambda v: origin[v])
    remap = {v: i for i, v in enumerate(keep)}
    T = build_from_faces([(remap[a], remap[b], remap[c]) for a, b, c in faces], len(keep))
    orig = np.array([origin[v] for v in keep], dtype=np.int64)
    return T, emb[orig], orig


# -- cycle association ----------------------------------------------------------

def winding_number(poly: np.ndarray, z: complex) -> int:
    d = np.asarray(poly, dtype=complex) - z
    ang = np.angle(np.roll(d, -1) / d)
    return int(round(ang.sum() / (2 * math.pi)))


def signed_area(poly: np.ndarray) -> float:
    p = np.asarray(poly, dtype=complex)
    q = np.roll(p, -1)
    return 0.5 * float(np.sum(p.real * q.imag - q.real * p.imag))


def associate_cycles(domain: DomainSpec, T: Triangulation, emb: np.ndarray) -> dict[int, list[int]]:
    cycles = boundary_cycles(T)
    holes = domain.holes
    hole_pts = {k: domain.components[k].representative_point() for k in holes}
    out: dict[int, list[int]] = {}
    for cyc in cycles:
        poly = emb[cyc]
        if signed_area(poly) > 0:
            if domain.outer_index in out:
                raise DomainError("two positively oriented boundary cycles")
            out[domain.outer_index] = cyc
            continue
        inside = [k for k in holes if winding_number(poly, hole_pts[k]) != 0]
        if len(inside) != 1:
            if inside:
                raise ComponentNotSeparated(inside[1], f"components {inside} share one boundary cycle")
            raise DomainError("boundary cycle surrounds no complementary component; refine the mesh")
        if inside[0] in out:
            raise ComponentNotSeparated(inside[0])
        out[inside[0]] = cyc
    for k in holes:
        if k not in out:
            raise ComponentNotSeparated(k)
    if domain.outer_index not in out:
        raise ComponentNotSeparated(domain.outer_index)
    return {k: _rotate_to_anchor(domain, k, out[k], emb) for k in sorted(out)}


def _rotate_to_anchor(domain: DomainSpec, k: int, cyc: list[int], emb: np.ndarray) -> list[int]:
    """Start each cycle at a vertex chosen by a rotation-equivariant rule.

    The reference direction points from the outer component's centre to the
    component's centre.  The outer component uses the direction to the first
    hole whose centre differs from its own (the positive real axis if none).
    """
    ck = domain.components[k].center
    co = domain.outer.center
    ref = ck - co
    if k == domain.outer_index:
        off = [c.center - co for c in domain.components if abs(c.center - co) > 1e-12]
        ref = off[0] if off else 0j
    ref = ref / abs(ref) if abs(ref) > 1e-12 else 1.0 + 0j
    # angles in turns, rounded before wrapping so a vertex on the ray reads 0
    ang = np.mod(np.round(np.angle((emb[cyc] - ck) / ref) / (2 * math.pi), 9), 1.0)
    i = int(np.argmin(ang))
    return cyc[i:] + cyc[:i]


# -- main operations --------------------------------------------------------------

def hex_cutout(domain: DomainSpec, epsilon: float) -> CutoutResult:
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    xmin, ymin, xmax, ymax = domain.outer._shape.bounds
    q, r, z = hex_lattice(xmin, xmax, ymin, ymax, epsilon)
    ok = domain.disc_fits(z, epsilon)
    if not ok.any():
        raise NoInterior("no circle of the hexagonal packing fits in the domain")
    q, r, z = q[ok], r[ok], z[ok]
    order = np.lexsort((q, r))
    q, r, z = q[order], r[order], z[order]
    faces = lattice_faces(q, r)
    if not faces:
        if domain.holes:
            raise ComponentNotSeparated(domain.holes[0], "no triangle of circles fits; mesh too coarse")
        raise NoInterior("no triangle of circles fits in the domain")
    T, emb, orig = prune(faces, z)
    cmap = associate_cycles(domain, T, emb)
    lat = np.column_stack([q[orig], r[orig]])
    return CutoutResult(T, emb, float(epsilon), cmap, domain, lat)


def boundary_refine(T: Triangulation, layers: int, embedding=None):
    """Red-green refinement of the faces touching the boundary, ``layers`` times.

    Each layer splits every edge of faces incident to a boundary vertex (so the
    boundary spacing halves); faces with two split edges are split fully and
    faces with one split edge are bisected, which yields the degree-7 seam
    vertices.  Returns the complex, or (complex, embedding) when an embedding
    is given.
    """
    emb = None if embedding is None else np.asarray(embedding, dtype=complex)
    for _ in range(layers):
        T, emb, _ = _refine_once(T, emb)
    return T if embedding is None else (T, emb)


def _refine_once(T: Triangulation, emb):
    bset = set(T.boundary_vertices)
    faces = list(T.faces)
    red = [bool(set(f) & bset) for f in faces]
    split = set()
    for f, isred in zip(faces, red):
        if isred:
            split |= {tuple(sorted(e)) for e in ((f[0], f[1]), (f[1], f[2]), (f[2], f[0]))}
    changed = True
    while changed:
        changed = False
        for i, f in enumerate(faces):
            if red[i]:
                continue
            es = [tuple(sorted(e)) for e in ((f[0], f[1]), (f[1], f[2]), (f[2], f[0]))]
            if sum(e in split for e in es) >= 2:
                red[i] = True
                split |= set(es)
                changed = True
    n = T.vertex_count
    mid = {e: n + i for i, e in enumerate(sorted(split))}
    out = []
    for f, isred in zip(faces, red):
        a, b, c = f
        ab, bc, ca = (mid.get(tuple(sorted(e))) for e in ((a, b), (b, c), (c, a)))
        if isred:
            out += [(a, ab, ca), (b, bc, ab), (c, ca, bc), (ab, bc, ca)]
        elif ab is not None:
            out += [(a, ab, c), (ab, b, c)]
        elif bc is not None:
            out += [(b, bc, a), (bc, c, a)]
        elif ca is not None:
            out += [(c, ca, b), (ca, a, b)]
        else:
            out.append(f)
    marks = list(T.marks) + [frozenset()] * len(mid)
    T2 = build_from_faces(out, n + len(mid), marks)
    if emb is not None:
        extra = np.array([(emb[a] + emb[b]) / 2 for (a, b) in sorted(split)], dtype=complex)
        emb = np.concatenate([emb, extra])
    return T2, emb, sorted(split)


def refine_cutout(cut: CutoutResult, layers: int, extend: bool = True) -> CutoutResult:
    """Refine a cut-out near its boundary, ``layers`` times.

    Each layer applies one step of :func:`boundary_refine`.  With ``extend``
    (and a known domain) the layer is then grown outward with the circles of
    the hexagonal packing one level finer whose closed discs still fit in the
    domain, so the small boundary circles reach towards the boundary instead
    of only subdividing the existing carrier.  ``lattice`` holds axial
    coordinates in units of the finest spacing.
    """
    if layers <= 0:
        return cut
    T, emb = cut.complex, cut.embedding
    lat = None if cut.lattice is None else np.asarray(cut.lattice, dtype=np.int64)
    eps = cut.mesh
    for _ in range(layers):
        T, emb2, split = _refine_once(T, emb)
        if lat is not None:
            old = 2 * lat
            lat = np.concatenate([old, np.array([old[a] + old[b] for a, b in split],
                                                dtype=np.int64).reshape(-1, 2) // 2])
        emb = emb2
        eps = eps / 2.0
        if extend and cut.domain is not None and lat is not None:
            T, emb, lat = _grow(cut.domain, T, emb, lat, eps)
    cmap = associate_cycles(cut.domain, T, emb) if cut.domain is not None else {}
    if lat is None:
        lat = np.full((T.vertex_count, 2), -1, dtype=np.int64)
    return CutoutResult(T, emb, cut.mesh, cmap, cut.domain, lat,
                        dict(cut.meta, refine=layers, finest=eps))


def _grow(domain: DomainSpec, T: Triangulation, emb: np.ndarray, lat: np.ndarray, eps: float):
    cycles = boundary_cycles(T)
    polys = [Polygon([(p.real, p.imag) for p in emb[c]]) for c in cycles]
    areas = [signed_area(emb[c]) for c in cycles]
    shell = [polys[i] for i in range(len(cycles)) if areas[i] > 0]
    holes = [polys[i] for i in range(len(cycles)) if areas[i] <= 0]
    carrier = shell[0]
    for h in holes:
        carrier = carrier.difference(h)
    xmin, ymin, xmax, ymax = domain.outer._shape.bounds
    q, r, z = hex_lattice(xmin, xmax, ymin, ymax, eps)
    ok = domain.disc_fits(z, eps)
    q, r, z = q[ok], r[ok], z[ok]
    faces = lattice_faces(q, r)
    if not faces:
        return T, emb, lat
    F = np.array(faces, dtype=np.int64)
    cen = z[F].mean(axis=1)
    outside = ~shapely.contains_xy(carrier, cen.real, cen.imag)
    F = F[outside]
    if F.size == 0:
        return T, emb, lat
    index = {(int(a), int(b)): i for i, (a, b) in enumerate(lat)}
    ids = np.full(q.size, -1, dtype=np.int64)
    new_emb = list(emb)
    new_lat = [tuple(x) for x in lat]
    used = np.unique(F)
    for k in used:
        key = (int(q[k]), int(r[k]))
        v = index.get(key)
        if v is None:
            v = len(new_emb)
            index[key] = v
            new_emb.append(z[k])
            new_lat.append(key)
        ids[k] = v
    all_faces = list(T.faces) + [tuple(int(ids[x]) for x in f) for f in F]
    emb_all = np.array(new_emb, dtype=complex)
    T2, emb2, orig = prune(all_faces, emb_all)
    return T2, emb2, np.array(new_lat, dtype=np.int64)[orig]
