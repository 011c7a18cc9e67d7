"""Combinatorial welding: boundary parametrizations, caps and seam stitching.

A :class:`BoundaryParam` lists the vertices of one boundary cycle in the
positive boundary direction of their complex (complex on the left) with
strictly increasing ``t`` in [0, 1).  Welding pastes two such cycles with the
trivial correspondence ``t -> -t``: walking along the first cycle is walking
backwards along the second.
"""

from __future__ import annotations

import bisect
import io
import math
from dataclasses import dataclass, field

import numpy as np

from . import geom
from .complex import CAP, IDEAL, INSERTED, Triangulation, boundary_cycles, build_from_faces, hex_disc
from .errors import (
    AngleSumNot2Pi,
    EmptyParam,
    IncompatibleOrientation,
    UnconvergedLabel,
)
from .label import DEFAULT_TOL, HYPERBOLIC, PackingLabel, angle_sums, solve_max_hyperbolic

MATCH_FRACTION = 0.4


@dataclass(frozen=True)
class BoundaryParam:
    entries: tuple[tuple[int, float], ...]
    orientation: int = 1

    def __post_init__(self):
        ents = tuple((int(v), float(t)) for v, t in self.entries)
        object.__setattr__(self, "entries", ents)
        ts = [t for _, t in ents]
        if any(not 0.0 <= t < 1.0 for t in ts):
            raise ValueError("t values must lie in [0, 1)")
        # strictly increasing around the cycle: at most one descent (the wrap)
        descents = sum(1 for i in range(len(ts)) if ts[i] >= ts[(i + 1) % len(ts)])
        if len(ts) > 1 and descents != 1:
            raise ValueError("t values must increase strictly around the cycle")
        if self.orientation not in (1, -1):
            raise ValueError("orientation must be +1 or -1")

    def __len__(self):
        return len(self.entries)

    @property
    def vertices(self) -> list[int]:
        return [v for v, _ in self.entries]

    @property
    def ts(self) -> np.ndarray:
        return np.array([t for _, t in self.entries])

    def gaps(self) -> np.ndarray:
        """Gap from each entry to the next, cyclically; sums to 1."""
        t = self.ts
        return np.mod(np.roll(t, -1) - t, 1.0) if len(t) > 1 else np.ones(1)

    def median_gap(self) -> float:
        return float(np.median(self.gaps()))

    def rotated(self, start: int) -> "BoundaryParam":
        """Same param listed from entry ``start`` with that entry at t = 0."""
        n = len(self.entries)
        t0 = self.entries[start][1]
        ents = [(v, (t - t0) % 1.0) for v, t in self.entries[start:] + self.entries[:start]]
        return BoundaryParam(tuple(ents), self.orientation)

    def starting_at(self, vertex: int) -> "BoundaryParam":
        return self.rotated(self.vertices.index(vertex))

    def warped(self, fn) -> "BoundaryParam":
        """Apply a monotone circle map to the t values (used for negative controls)."""
        ents = [(v, float(fn(t)) % 1.0) for v, t in self.entries]
        return BoundaryParam(tuple(ents), self.orientation)

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("vertex,t\n")
        for v, t in self.entries:
            buf.write(f"{v},{t!r}\n")
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str, orientation: int = 1) -> "BoundaryParam":
        rows = [ln.strip() for ln in text.strip().splitlines() if ln.strip()]
        if rows and rows[0].startswith("vertex"):
            rows = rows[1:]
        ents = []
        for ln in rows:
            v, t = ln.split(",")
            ents.append((int(v), float(t)))
        return cls(tuple(ents), orientation)

    @classmethod
    def uniform(cls, vertices, phase: float = 0.0) -> "BoundaryParam":
        n = len(vertices)
        if n == 0:
            raise EmptyParam("no vertices")
        ts = [(phase + k / n) % 1.0 for k in range(n)]
        return cls(tuple(zip(vertices, ts)))


@dataclass
class WeldRecord:
    merged: Triangulation
    inserted_vertices: list[int]
    left_map: np.ndarray
    right_map: np.ndarray
    matched: int = 0
    degree_bound: int = 0
    meta: dict = field(default_factory=dict)


# -- parametrizations ----------------------------------------------------------

def fuchsian_boundary_param(T_capped: Triangulation, L: PackingLabel, v_B: int,
                            start: int | None = None, tol: float = DEFAULT_TOL) -> BoundaryParam:
    """Arclength positions of the tangency points around the ideal circle ``v_B``.

    Read off the label alone: the apex angles at ``v_B`` are accumulated around
    its flower and normalized to total 1.  Entries follow the positive boundary
    direction of the complex with ``v_B`` removed (the reverse of the flower);
    ``start`` picks the vertex at t = 0 (default: the first petal).
    """
    if L.geometry != HYPERBOLIC:
        raise ValueError("Fuchsian parametrization needs a hyperbolic label")
    if not T_capped.closed[v_B]:
        raise ValueError(f"vertex {v_B} is not interior")
    sums = angle_sums(T_capped, L)
    others = [v for v in T_capped.interior_vertices if v != v_B]
    res = float(np.abs(sums[others] - 2 * math.pi).max()) if others else 0.0
    if not res <= 1e-8:
        raise UnconvergedLabel(f"label residual {res:.3g}")
    x = L.radii
    petals = T_capped.flowers[v_B]
    k = len(petals)
    alpha = np.array([geom.hyperbolic_angle(x[v_B], x[petals[j]], x[petals[(j + 1) % k]])
                      for j in range(k)])
    total = float(alpha.sum())
    if abs(total - 2 * math.pi) > 10 * max(tol, 1e-12) and abs(total - 2 * math.pi) > 1e-8:
        raise AngleSumNot2Pi(f"angle sum at {v_B} is {total!r}")
    cum = np.concatenate([[0.0], np.cumsum(alpha)[:-1]]) / total
    # positive boundary order: u_0, u_{k-1}, ..., u_1 with t = -cum mod 1
    order = [0] + list(range(k - 1, 0, -1))
    ents = [(petals[j], float((-cum[j]) % 1.0)) for j in order]
    P = BoundaryParam(tuple(ents))
    return P if start is None else P.starting_at(start)


def cap_rings(param: BoundaryParam, target_spacing_hint: float | None = None) -> int:
    spacing = param.median_gap() if target_spacing_hint is None else float(target_spacing_hint)
    if not spacing > 0:
        raise ValueError("spacing must be positive")
    return max(1, int(round(1.0 / (6.0 * spacing))))


def make_cap(param: BoundaryParam, target_spacing_hint: float | None = None,
             mode: str = "uniform", tol: float = DEFAULT_TOL):
    """Hexagonal disc whose boundary spacing matches the median gap of ``param``.

    ``mode="uniform"`` returns evenly spaced t on the cap boundary;
    ``mode="packed"`` reads t from the cap's own maximal packing (tangency
    points of the boundary horocycles seen from the centre vertex).  The centre
    vertex is tagged IDEAL, the rest CAP.
    """
    if len(param) < 3:
        raise EmptyParam("a cap needs a param with at least 3 entries")
    rings = cap_rings(param, target_spacing_hint)
    T, _ = hex_disc(rings)
    marks = [frozenset({IDEAL})] + [frozenset({CAP})] * (T.vertex_count - 1)
    T = T.with_marks(marks)
    cyc = boundary_cycles(T)[0]
    if mode == "uniform":
        return T, BoundaryParam.uniform(cyc)
    if mode != "packed":
        raise ValueError(f"unknown cap mode {mode!r}")
    return T, packed_param(T, cyc, 0, tol)


def packed_param(T: Triangulation, cycle, hub: int, tol: float = DEFAULT_TOL, with_report: bool = False):
    """Boundary param of a disc complex from its maximal packing, seen from ``hub``.

    With ``with_report`` the solver report is returned as well.
    """
    from .layout import layout

    L, rep = solve_max_hyperbolic(T, tol=tol, accelerate=True)
    P = layout(T, L, anchor=(hub, T.flowers[hub][0]))
    ang = np.angle(P.centers[list(cycle)]) / (2 * math.pi)
    t = np.mod(ang - ang[0], 1.0)
    param = BoundaryParam(tuple(zip(cycle, t)))
    return (param, rep) if with_report else param


# -- welding ---------------------------------------------------------------------

def _check_param(T: Triangulation, param: BoundaryParam, side: str):
    if len(param) == 0:
        raise EmptyParam(f"{side} param is empty")
    if len(param) < 3:
        raise EmptyParam(f"{side} param has fewer than 3 entries")
    cyc = param.vertices
    if param.orientation != 1:
        raise IncompatibleOrientation(f"{side} param must follow the positive boundary direction")
    n = len(cyc)
    for i, v in enumerate(cyc):
        if not 0 <= v < T.vertex_count or T.closed[v]:
            raise IncompatibleOrientation(f"{side}: vertex {v} is not a boundary vertex")
        if T.flowers[v][0] != cyc[(i + 1) % n]:
            raise IncompatibleOrientation(f"{side}: param does not follow the positive boundary")
    if not any(set(c) == set(cyc) for c in boundary_cycles(T)):
        raise IncompatibleOrientation(f"{side}: param is not a whole boundary cycle")


def _local_gaps(t: np.ndarray) -> np.ndarray:
    n = len(t)
    fwd = np.mod(np.roll(t, -1) - t, 1.0)
    return 0.5 * (fwd + np.roll(fwd, 1)) if n > 1 else np.ones(1)


def _circ(a, b):
    d = abs(a - b) % 1.0
    return min(d, 1.0 - d)


def _match(ta: np.ndarray, tc: np.ndarray) -> list[tuple[int, int]]:
    """Greedy order-preserving matching; (0, 0) is always matched."""
    ga, gc = _local_gaps(ta), _local_gaps(tc)
    cand = []
    tcl = list(tc)
    for i, t in enumerate(ta):
        k = bisect.bisect_left(tcl, t)
        for j in {(k - 1) % len(tc), k % len(tc)}:
            d = _circ(t, tc[j])
            if d < MATCH_FRACTION * min(ga[i], gc[j]):
                cand.append((d, i, j))
    cand.sort()
    usedA, usedC = {0}, {0}
    pairs = [(0, 0)]
    for d, i, j in cand:
        if i in usedA or j in usedC:
            continue
        usedA.add(i)
        usedC.add(j)
        pairs.append((i, j))
    pairs.sort()
    kept = [pairs[0]]
    for i, j in pairs[1:]:
        if j > kept[-1][1]:
            kept.append((i, j))
    return kept


def _zigzag(poly: list[int]) -> list[tuple[int, int, int]]:
    """Triangulate a ccw polygon whose base edge is poly[-1] -> poly[0]."""
    lo, hi = 0, len(poly) - 1
    out = []
    step = 0
    while hi - lo >= 2:
        if step % 2 == 0:
            out.append((poly[lo], poly[lo + 1], poly[hi]))
            lo += 1
        else:
            out.append((poly[lo], poly[hi - 1], poly[hi]))
            hi -= 1
        step += 1
    return out


def weld(A: Triangulation, paramA: BoundaryParam, B: Triangulation, paramB: BoundaryParam,
         right_tag: str | None = CAP) -> WeldRecord:
    """Paste the cycle of ``paramA`` to the cycle of ``paramB`` with t -> -t.

    The t = 0 entries of both params are aligned and always joined.  Other
    vertices pair up when their t values differ by less than 0.4 of the local
    gap; each unpaired vertex gets a partner inserted into the edge of the
    opposite cycle it faces (ears triangulated as zigzags to keep degrees
    low).  A band of triangles then joins partners, so A and B keep their
    vertex sets and the merged complex has ids ``A`` | ``B`` (+|A|) | inserted.
    """
    _check_param(A, paramA, "left")
    _check_param(B, paramB, "right")
    pa = paramA.rotated(0)
    pb = paramB.rotated(0)
    nA, nB = A.vertex_count, B.vertex_count
    av = pa.vertices
    ta = pa.ts
    # B walked backwards: c_0 = b_0, c_1 = b_{n-1}, ...
    bv = pb.vertices
    tb = pb.ts
    corder = [0] + list(range(len(bv) - 1, 0, -1))
    cv = [nA + bv[k] for k in corder]
    tc = np.array([(-tb[k]) % 1.0 for k in corder])

    # decisions use t rounded to a fixed grid so symmetric inputs weld symmetrically
    ta = np.mod(np.round(ta, 9), 1.0)
    tc = np.mod(np.round(tc, 9), 1.0)
    pairs = _match(ta, tc)
    m, n = len(av), len(cv)
    nxt = nA + nB
    inserted = []
    ins_marks = []
    stations: list[tuple[int, int, float, float]] = []  # (A-side id, B-side id, tA, tB)
    a_ears: dict[int, list[int]] = {}   # A edge index i (a_i -> a_{i+1}) -> inserted ids
    c_ears: dict[int, list[int]] = {}   # C edge index j (c_j -> c_{j+1}) -> inserted ids
    right_marks = frozenset({INSERTED} | ({right_tag} if right_tag else set()))
    for s, (i1, j1) in enumerate(pairs):
        i2, j2 = pairs[s + 1] if s + 1 < len(pairs) else (m, n)
        stations.append((av[i1], cv[j1], ta[i1], tc[j1]))
        ia = list(range(i1 + 1, i2))
        jc = list(range(j1 + 1, j2))
        ev = [(ta[i], 0, i) for i in ia] + [(tc[j], 1, j) for j in jc]
        ev.sort()
        cur_i, cur_j = i1, j1
        for t, side, k in ev:
            if side == 0:
                # A vertex k unpaired: new vertex on C edge cur_j -> cur_j + 1
                x = nxt
                nxt += 1
                inserted.append(x)
                ins_marks.append(right_marks)
                c_ears.setdefault(cur_j, []).append(x)
                stations.append((av[k], x, t, t))
                cur_i = k
            else:
                x = nxt
                nxt += 1
                inserted.append(x)
                ins_marks.append(frozenset({INSERTED}))
                a_ears.setdefault(cur_i, []).append(x)
                stations.append((x, cv[k], t, t))
                cur_j = k

    faces = [tuple(f) for f in A.faces]
    faces += [(a + nA, b + nA, c + nA) for a, b, c in B.faces]
    for i, xs in a_ears.items():
        faces += _zigzag([av[i]] + xs + [av[(i + 1) % m]])
    for j, xs in c_ears.items():
        # C edge c_j -> c_{j+1} is B edge c_{j+1} -> c_j; inserts reverse
        faces += _zigzag([cv[(j + 1) % n]] + xs[::-1] + [cv[j]])
    K = len(stations)
    for k in range(K):
        p0, q0, s0, u0 = stations[k]
        p1, q1, s1, u1 = stations[(k + 1) % K]
        d_a = _circ(s0, u1)
        d_b = _circ(s1, u0)
        # ties (uniform seams) always take the same diagonal: shift invariant
        use_a = d_a <= d_b + 1e-12
        if use_a:
            faces += [(p1, p0, q1), (p0, q0, q1)]
        else:
            faces += [(p1, p0, q0), (p1, q0, q1)]

    marks = list(A.marks) + list(B.marks) + ins_marks
    merged = build_from_faces(faces, nxt, marks)
    bound = max(A.max_degree, B.max_degree) + 4
    return WeldRecord(merged, inserted, np.arange(nA), np.arange(nB) + nA,
                      matched=len(pairs), degree_bound=bound,
                      meta={"stations": K})
