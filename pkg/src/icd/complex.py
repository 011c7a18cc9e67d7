"""Combinatorial triangulations stored as ordered vertex flowers.

A flower lists the neighbours of a vertex in counter-clockwise order.  For an
interior vertex the list is a closed cycle (first neighbour not repeated); for
a boundary vertex it is an open chain whose first entry is the next vertex
along the positively oriented boundary and whose last entry is the previous
one.  Faces around ``v`` are ``(v, f[j], f[j+1])``, all counter-clockwise.
"""

from __future__ import annotations

from collections import deque
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    Disconnected,
    InconsistentOrientation,
    NonManifold,
    NotABoundaryCycle,
)

ORIGINAL = "ORIGINAL"
IDEAL = "IDEAL"
CAP = "CAP"
INSERTED = "INSERTED"


class Triangulation:
    """Immutable oriented triangulated surface (sphere, disc or multiply connected)."""

    def __init__(self, flowers, closed, marks=None):
        self.flowers = tuple(tuple(int(u) for u in f) for f in flowers)
        self.closed = tuple(bool(c) for c in closed)
        if marks is None:
            marks = [frozenset()] * len(self.flowers)
        self.marks = tuple(frozenset(m) for m in marks)
        if not (len(self.flowers) == len(self.closed) == len(self.marks)):
            raise ValueError("flowers, closed and marks must have equal length")

    # -- basic views -------------------------------------------------------
    @property
    def vertex_count(self) -> int:
        return len(self.flowers)

    def __len__(self):
        return len(self.flowers)

    def __eq__(self, other):
        if not isinstance(other, Triangulation):
            return NotImplemented
        return self.flowers == other.flowers and self.closed == other.closed

    def __hash__(self):
        return hash((self.flowers, self.closed))

    def __repr__(self):
        return (f"Triangulation(V={self.vertex_count}, E={self.edge_count}, "
                f"F={self.face_count}, chi={self.euler_characteristic})")

    def degree(self, v: int) -> int:
        return len(self.flowers[v])

    def is_interior(self, v: int) -> bool:
        return self.closed[v]

    def petals(self, v: int) -> list[tuple[int, int]]:
        """Consecutive neighbour pairs (u, w) so that (v, u, w) is a face."""
        f = self.flowers[v]
        n = len(f)
        if self.closed[v]:
            return [(f[j], f[(j + 1) % n]) for j in range(n)]
        return [(f[j], f[j + 1]) for j in range(n - 1)]

    @cached_property
    def interior_vertices(self) -> tuple[int, ...]:
        return tuple(v for v in range(self.vertex_count) if self.closed[v])

    @cached_property
    def boundary_vertices(self) -> tuple[int, ...]:
        return tuple(v for v in range(self.vertex_count) if not self.closed[v])

    @cached_property
    def faces(self) -> tuple[tuple[int, int, int], ...]:
        """Each face once, rotated so its smallest vertex comes first; sorted."""
        out = set()
        for v in range(self.vertex_count):
            for u, w in self.petals(v):
                if v < u and v < w:
                    out.add((v, u, w))
        return tuple(sorted(out))

    @cached_property
    def edges(self) -> tuple[tuple[int, int], ...]:
        return tuple(sorted((v, u) for v in range(self.vertex_count)
                            for u in self.flowers[v] if v < u))

    @property
    def face_count(self) -> int:
        return len(self.faces)

    @property
    def edge_count(self) -> int:
        return len(self.edges)

    @cached_property
    def boundary_edge_count(self) -> int:
        return sum(1 for v in self.boundary_vertices)

    @property
    def euler_characteristic(self) -> int:
        return self.vertex_count - self.edge_count + self.face_count

    @cached_property
    def max_degree(self) -> int:
        return max((len(f) for f in self.flowers), default=0)

    def has_edge(self, u: int, v: int) -> bool:
        return v in self.flowers[u]

    def face_index(self) -> dict[tuple[int, int], int]:
        """Map directed edge (a, b) to the index of the face on its left."""
        idx = {}
        for k, (a, b, c) in enumerate(self.faces):
            idx[(a, b)] = k
            idx[(b, c)] = k
            idx[(c, a)] = k
        return idx

    @cached_property
    def csr(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(offsets, neighbours, closed) arrays for the numeric kernels."""
        offs = np.zeros(self.vertex_count + 1, dtype=np.int64)
        offs[1:] = np.cumsum([len(f) for f in self.flowers])
        nbrs = np.fromiter((u for f in self.flowers for u in f), dtype=np.int64,
                           count=int(offs[-1]))
        closed = np.array(self.closed, dtype=np.bool_)
        return offs, nbrs, closed

    @cached_property
    def face_array(self) -> np.ndarray:
        return np.array(self.faces, dtype=np.int64).reshape(-1, 3)

    def with_marks(self, marks) -> "Triangulation":
        return Triangulation(self.flowers, self.closed, marks)

    def vertices_marked(self, tag: str) -> list[int]:
        return [v for v, m in enumerate(self.marks) if tag in m]

    # -- graph utilities ---------------------------------------------------
    def bfs_depth(self, sources: Iterable[int]) -> np.ndarray:
        """Combinatorial distance to the nearest source vertex (-1 if unreachable)."""
        depth = np.full(self.vertex_count, -1, dtype=np.int64)
        queue = deque()
        for s in sources:
            if depth[s] < 0:
                depth[s] = 0
                queue.append(s)
        while queue:
            v = queue.popleft()
            for u in self.flowers[v]:
                if depth[u] < 0:
                    depth[u] = depth[v] + 1
                    queue.append(u)
        return depth

    # -- serialization -----------------------------------------------------
    def to_text(self) -> str:
        lines = [f"V {self.vertex_count}"]
        for v, f in enumerate(self.flowers):
            kind = "interior" if self.closed[v] else "boundary"
            lines.append(" ".join([f"F {v} {kind}"] + [str(u) for u in f]))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "Triangulation":
        lines = [ln.split() for ln in text.splitlines() if ln.strip()]
        if not lines or lines[0][0] != "V":
            raise ValueError("complex text must start with 'V <n>'")
        n = int(lines[0][1])
        flowers: list[list[int] | None] = [None] * n
        closed = [False] * n
        for parts in lines[1:]:
            if parts[0] != "F":
                raise ValueError(f"unexpected record {parts[0]!r}")
            v = int(parts[1])
            if parts[2] not in ("interior", "boundary"):
                raise ValueError(f"bad vertex kind {parts[2]!r}")
            closed[v] = parts[2] == "interior"
            flowers[v] = [int(u) for u in parts[3:]]
        if any(f is None for f in flowers):
            raise ValueError("missing flower records")
        return cls(flowers, closed)


def build_from_faces(faces: Sequence[Sequence[int]], vertex_count: int | None = None,
                     marks=None) -> Triangulation:
    """Assemble flowers from oriented triangles and check surface invariants."""
    faces = [tuple(int(x) for x in f) for f in faces]
    if not faces:
        raise Disconnected("no faces")
    n = vertex_count if vertex_count is not None else 1 + max(max(f) for f in faces)

    directed: dict[tuple[int, int], int] = {}
    undirected: dict[tuple[int, int], int] = {}
    for f in faces:
        a, b, c = f
        if len({a, b, c}) != 3:
            raise NonManifold(f"degenerate face {f}")
        for x, y, z in ((a, b, c), (b, c, a), (c, a, b)):
            key = (min(x, y), max(x, y))
            undirected[key] = undirected.get(key, 0) + 1
            if undirected[key] > 2:
                raise NonManifold(f"edge {key} lies in more than two faces")
            if (x, y) in directed:
                raise InconsistentOrientation(f"directed edge {(x, y)} used twice")
            directed[(x, y)] = z

    # per-vertex successor maps: in face (v, a, b), a -> b around v
    succ: list[dict[int, int]] = [dict() for _ in range(n)]
    for a, b, c in faces:
        succ[a][b] = c
        succ[b][c] = a
        succ[c][a] = b

    flowers = []
    closed = []
    for v in range(n):
        nxt = succ[v]
        if not nxt:
            raise Disconnected(f"vertex {v} lies in no face")
        targets = set(nxt.values())
        starts = [u for u in nxt if u not in targets]
        if len(starts) > 1:
            raise NonManifold(f"vertex {v} has {len(starts)} fans")
        if starts:
            u = starts[0]
            chain = [u]
            while u in nxt:
                u = nxt[u]
                chain.append(u)
            is_closed = False
        else:
            u0 = min(nxt)
            chain = [u0]
            u = nxt[u0]
            while u != u0:
                chain.append(u)
                u = nxt[u]
            is_closed = True
        if len(chain) - (0 if is_closed else 1) != len(nxt):
            raise NonManifold(f"vertex {v} is a pinch point")
        flowers.append(chain)
        closed.append(is_closed)

    T = Triangulation(flowers, closed, marks)
    depth = T.bfs_depth([0])
    if (depth < 0).any():
        raise Disconnected("1-skeleton is not connected")
    return T


def boundary_cycles(T: Triangulation) -> list[list[int]]:
    """Positively oriented boundary cycles, each starting at its smallest vertex."""
    seen = set()
    cycles = []
    for v0 in T.boundary_vertices:
        if v0 in seen:
            continue
        cyc = [v0]
        seen.add(v0)
        v = T.flowers[v0][0]
        while v != v0:
            if v in seen or T.closed[v]:
                raise NonManifold(f"boundary walk from {v0} is not a simple cycle")
            cyc.append(v)
            seen.add(v)
            v = T.flowers[v][0]
        cycles.append(cyc)
    return cycles


def _check_cycle(T: Triangulation, cycle: Sequence[int]):
    n = len(cycle)
    if n < 3:
        raise NotABoundaryCycle(f"cycle of length {n} cannot be capped")
    for i, v in enumerate(cycle):
        if not (0 <= v < T.vertex_count) or T.closed[v]:
            raise NotABoundaryCycle(f"vertex {v} is not a boundary vertex")
        if T.flowers[v][0] != cycle[(i + 1) % n]:
            raise NotABoundaryCycle("cycle does not follow the positive boundary orientation")
    for c in boundary_cycles(T):
        if set(c) == set(cycle):
            return
    raise NotABoundaryCycle("cycle is not a full boundary component")


def add_ideal_vertex(T: Triangulation, cycle: Sequence[int], tag: str = IDEAL) -> Triangulation:
    """Cone off one boundary cycle with a new vertex (appended with id V)."""
    cycle = list(cycle)
    _check_cycle(T, cycle)
    n = T.vertex_count
    faces = list(T.faces)
    m = len(cycle)
    for i in range(m):
        a, b = cycle[i], cycle[(i + 1) % m]
        faces.append((b, a, n))
    marks = list(T.marks) + [frozenset({tag})]
    return build_from_faces(faces, n + 1, marks)


def remove_vertices(T: Triangulation, drop: Iterable[int]) -> tuple[Triangulation, np.ndarray]:
    """Delete vertices and their faces; return the compacted complex and old->new map.

    Removed vertices map to -1.
    """
    drop = set(int(v) for v in drop)
    keep = [v for v in range(T.vertex_count) if v not in drop]
    remap = np.full(T.vertex_count, -1, dtype=np.int64)
    remap[keep] = np.arange(len(keep))
    faces = [(remap[a], remap[b], remap[c]) for a, b, c in T.faces
             if a not in drop and b not in drop and c not in drop]
    marks = [T.marks[v] for v in keep]
    return build_from_faces(faces, len(keep), marks), remap


def is_sphere(T: Triangulation) -> bool:
    return not T.boundary_vertices and T.euler_characteristic == 2


# -- standard small complexes used throughout tests and caps ---------------

def tetrahedron() -> Triangulation:
    return build_from_faces([(0, 1, 2), (0, 3, 1), (1, 3, 2), (2, 3, 0)])


def octahedron() -> Triangulation:
    # 0/5 poles, 1..4 equator counter-clockwise seen from pole 0
    faces = []
    for i in range(4):
        a, b = 1 + i, 1 + (i + 1) % 4
        faces.append((0, a, b))
        faces.append((5, b, a))
    return build_from_faces(faces)


def flower(n: int) -> Triangulation:
    """Hub 0 with petals 1..n."""
    return build_from_faces([(0, 1 + i, 1 + (i + 1) % n) for i in range(n)])


def hex_disc(rings: int) -> tuple[Triangulation, np.ndarray]:
    """Hexagonal patch of the regular hex lattice with ``rings`` rings around vertex 0.

    Returns the complex and lattice positions (unit spacing).  The boundary
    cycle has length ``6 * rings``.
    """
    if rings < 1:
        raise ValueError("rings must be >= 1")
    # axial coordinates (q, r); lattice point q + r * w, w = exp(i pi/3)
    pts = []
    for q in range(-rings, rings + 1):
        for r in range(-rings, rings + 1):
            if abs(q) <= rings and abs(r) <= rings and abs(q + r) <= rings:
                pts.append((q, r))
    pts.sort(key=lambda p: (max(abs(p[0]), abs(p[1]), abs(p[0] + p[1])),
                            _axial_angle(p)))
    index = {p: i for i, p in enumerate(pts)}
    faces = []
    for (q, r), i in index.items():
        up = ((q + 1, r), (q, r + 1))
        dn = ((q + 1, r - 1), (q + 1, r))
        for a, b in (up, dn):
            if a in index and b in index:
                faces.append((i, index[a], index[b]))
    w = np.exp(1j * np.pi / 3)
    pos = np.array([q + r * w for q, r in pts])
    return build_from_faces(faces, len(pts)), pos


def _axial_angle(p):
    w = np.exp(1j * np.pi / 3)
    z = p[0] + p[1] * w
    if z == 0:
        return -1.0
    return float(np.angle(z) % (2 * np.pi))
