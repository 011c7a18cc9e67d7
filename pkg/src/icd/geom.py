"""Geometric primitives for tangency packings.

Hyperbolic radii are carried as *decay* values ``x = exp(-2h)``: ``x = 0`` is a
horocycle and ``x -> 1`` a vanishing circle.  Spherical circles are caps given
by a unit centre vector and an angular radius.  Möbius maps act on the Riemann
sphere; sphere points are handled through homogeneous coordinates so the north
pole never needs a special case.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import (
    DegenerateInput,
    GeometryError,
    ImageIsLine,
    InfiniteApexRadius,
    NonPositiveRadius,
    TriangleTooLarge,
)

PLANE = "PLANE"
DISC = "DISC"
SPHERE = "SPHERE"

_CLAMP_TOL = 1e-14


def _asin_sqrt(q: float) -> float:
    # 2*asin(sqrt(q)) with a guarded domain
    if q < -_CLAMP_TOL or q > 1.0 + _CLAMP_TOL:
        raise GeometryError(f"half-angle argument {q!r} outside [0, 1]")
    return 2.0 * math.asin(math.sqrt(min(max(q, 0.0), 1.0)))


def _half_angle(num: float, cnum: float) -> float:
    # 2*atan2: exact near pi, where asin(sqrt(q)) loses half the digits
    return 2.0 * math.atan2(math.sqrt(max(num, 0.0)), math.sqrt(max(cnum, 0.0)))


# -- radii conversions -----------------------------------------------------

def decay_from_radius(h: float) -> float:
    """Hyperbolic radius -> decay ``exp(-2h)`` (inf -> 0)."""
    if h < 0:
        raise NonPositiveRadius(h)
    return 0.0 if math.isinf(h) else math.exp(-2.0 * h)


def radius_from_decay(x: float) -> float:
    if not 0.0 <= x < 1.0:
        raise GeometryError(f"decay {x!r} outside [0, 1)")
    return math.inf if x == 0.0 else -0.5 * math.log(x)


# -- tangency-triangle angles ---------------------------------------------

def euclidean_angle(r_v: float, r_u: float, r_w: float) -> float:
    """Angle at the centre of ``v`` in a triple of mutually tangent circles."""
    if min(r_v, r_u, r_w) <= 0 or not all(map(math.isfinite, (r_v, r_u, r_w))):
        raise NonPositiveRadius((r_v, r_u, r_w))
    return _half_angle(r_u * r_w, r_v * (r_v + r_u + r_w))


def hyperbolic_angle(x_v: float, x_u: float, x_w: float,
                     y_v: float | None = None, y_u: float | None = None,
                     y_w: float | None = None) -> float:
    """Hyperbolic analogue of :func:`euclidean_angle` on decay values.

    ``x_u`` and ``x_w`` may be 0 (horocycles); ``x_v`` must be positive.  The
    optional ``y`` arguments are the complements ``1 - x`` at full precision.
    """
    if x_v <= 0.0:
        raise InfiniteApexRadius("apex circle must have finite radius")
    for x in (x_v, x_u, x_w):
        if not 0.0 <= x < 1.0:
            raise GeometryError(f"decay {x!r} outside [0, 1)")
    y_v = 1.0 - x_v if y_v is None else y_v
    y_u = 1.0 - x_u if y_u is None else y_u
    y_w = 1.0 - x_w if y_w is None else y_w
    return _half_angle(x_v * y_u * y_w, y_v * (y_v + x_v * y_u + x_v * x_u * y_w))


def spherical_angle(r_v: float, r_u: float, r_w: float) -> float:
    if min(r_v, r_u, r_w) <= 0:
        raise NonPositiveRadius((r_v, r_u, r_w))
    if max(r_v + r_u, r_v + r_w, r_u + r_w) >= math.pi:
        raise TriangleTooLarge((r_v, r_u, r_w))
    q = math.sin(r_u) * math.sin(r_w) / (math.sin(r_v + r_u) * math.sin(r_v + r_w))
    if q > 1.0 + _CLAMP_TOL:
        raise TriangleTooLarge((r_v, r_u, r_w))
    return _asin_sqrt(q)


# -- circles ---------------------------------------------------------------

@dataclass(frozen=True)
class Circle3:
    """Circle in one of the three models.

    ``center`` is a complex number for PLANE/DISC and a unit 3-vector for SPHERE.
    ``radius`` is Euclidean for PLANE/DISC and angular for SPHERE.
    """
    center: complex | np.ndarray
    radius: float
    model: str = PLANE

    def __post_init__(self):
        if not self.radius > 0:
            raise NonPositiveRadius(self.radius)
        if self.model == SPHERE:
            object.__setattr__(self, "center", np.asarray(self.center, dtype=float))
            if self.radius >= math.pi:
                raise GeometryError("spherical radius must be < pi")
        elif self.model == DISC:
            if abs(self.center) + self.radius > 1.0 + 1e-12:
                raise GeometryError("disc circle leaves the unit disc")
        elif self.model != PLANE:
            raise GeometryError(f"unknown model {self.model!r}")


# -- stereographic projection ----------------------------------------------

def stereographic(z) -> np.ndarray:
    """Plane -> unit sphere; 0 -> south pole, unit circle -> equator, inf -> north pole.

    Accepts scalars or arrays; returns shape ``(..., 3)``.
    """
    z = np.asarray(z, dtype=complex)
    out = np.empty(z.shape + (3,))
    inf = ~np.isfinite(z)
    zz = np.where(inf, 0, z)
    m = np.abs(zz) ** 2
    out[..., 0] = 2 * zz.real / (m + 1)
    out[..., 1] = 2 * zz.imag / (m + 1)
    out[..., 2] = (m - 1) / (m + 1)
    out[inf] = (0.0, 0.0, 1.0)
    return out


def inverse_stereographic(p) -> complex | np.ndarray:
    """Unit sphere -> plane (north pole -> complex inf)."""
    p = np.asarray(p, dtype=float)
    den = 1.0 - p[..., 2]
    with np.errstate(divide="ignore", invalid="ignore"):
        z = (p[..., 0] + 1j * p[..., 1]) / den
    z = np.where(den <= 1e-300, complex(np.inf, 0), z)
    return z[()] if z.ndim == 0 else z


def sphere_to_homogeneous(p) -> np.ndarray:
    """Sphere points -> projective pairs ``(num, den)`` with z = num/den, shape (..., 2)."""
    p = np.asarray(p, dtype=float)
    x, y, zc = p[..., 0], p[..., 1], p[..., 2]
    south = zc <= 0
    num = np.where(south, x + 1j * y, 1 + zc)
    den = np.where(south, 1 - zc + 0j, x - 1j * y)
    return np.stack([num, den], axis=-1)


def homogeneous_to_sphere(h) -> np.ndarray:
    h = np.asarray(h, dtype=complex)
    p, q = h[..., 0], h[..., 1]
    s = p * np.conj(q)
    a, b = np.abs(p) ** 2, np.abs(q) ** 2
    n = a + b
    return np.stack([2 * s.real / n, 2 * s.imag / n, (a - b) / n], axis=-1)


def sphere_distance(p, q) -> np.ndarray:
    """Great-circle distance, accurate for nearby points too."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    c = np.linalg.norm(np.cross(p, q), axis=-1)
    return np.arctan2(c, np.sum(p * q, axis=-1))


def sphere_point_toward(p, q, angle):
    """Point at arc length ``angle`` from ``p`` along the great circle to ``q``."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    t = q - np.sum(p * q, axis=-1, keepdims=True) * p
    nt = np.linalg.norm(t, axis=-1, keepdims=True)
    t = t / np.where(nt == 0, 1.0, nt)
    a = np.asarray(angle)[..., None]
    return np.cos(a) * p + np.sin(a) * t


# -- Möbius maps ------------------------------------------------------------

class MobiusMap:
    """z -> (a z + b) / (c z + d), stored with determinant 1."""

    __slots__ = ("m",)

    def __init__(self, a, b=None, c=None, d=None):
        if b is None:
            m = np.array(a, dtype=complex).reshape(2, 2)
        else:
            m = np.array([[a, b], [c, d]], dtype=complex)
        det = m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0]
        if abs(det) < 1e-300:
            raise DegenerateInput("singular Möbius matrix")
        self.m = m / np.sqrt(det)

    @classmethod
    def identity(cls):
        return cls(1, 0, 0, 1)

    @property
    def coefficients(self):
        return tuple(complex(v) for v in self.m.ravel())

    def __matmul__(self, other: "MobiusMap") -> "MobiusMap":
        return MobiusMap(self.m @ other.m)

    def inverse(self) -> "MobiusMap":
        a, b, c, d = self.m.ravel()
        return MobiusMap(d, -b, -c, a)

    def __call__(self, z):
        a, b, c, d = self.m.ravel()
        z = np.asarray(z, dtype=complex)
        inf = ~np.isfinite(z)
        zz = np.where(inf, 0, z)
        num = a * zz + b
        den = c * zz + d
        with np.errstate(divide="ignore", invalid="ignore"):
            w = num / den
        w = np.where(den == 0, complex(np.inf, 0), w)
        if c != 0:
            w = np.where(inf, a / c, w)
        else:
            w = np.where(inf, complex(np.inf, 0), w)
        return w[()] if w.ndim == 0 else w

    def apply_sphere(self, p) -> np.ndarray:
        """Act on unit-sphere points through the stereographic chart."""
        h = sphere_to_homogeneous(p)
        h2 = h @ self.m.T
        return homogeneous_to_sphere(h2)

    @property
    def pole(self) -> complex:
        a, b, c, d = self.m.ravel()
        return complex(np.inf) if c == 0 else complex(-d / c)

    def __repr__(self):
        a, b, c, d = self.coefficients
        return f"MobiusMap({a:.6g}, {b:.6g}, {c:.6g}, {d:.6g})"


def mobius_from_points(z: Sequence[complex], w: Sequence[complex]) -> MobiusMap:
    """Unique Möbius map with z[k] -> w[k] for three distinct points (inf allowed)."""
    return _to_standard(w).inverse() @ _to_standard(z)


def _to_standard(z) -> MobiusMap:
    # map z1, z2, z3 -> 0, 1, inf
    z1, z2, z3 = (complex(v) for v in z)
    fin = [math.isfinite(abs(v)) for v in (z1, z2, z3)]
    if not fin[0]:
        return MobiusMap(0, z2 - z3, 1, -z3)
    if not fin[1]:
        return MobiusMap(1, -z1, 1, -z3)
    if not fin[2]:
        return MobiusMap(1, -z1, 0, z2 - z1)
    if min(abs(z1 - z2), abs(z2 - z3), abs(z1 - z3)) == 0:
        raise DegenerateInput("points must be distinct")
    return MobiusMap(z2 - z3, -z1 * (z2 - z3), z2 - z1, -z3 * (z2 - z1))


def mobius_from_sphere_points(p: np.ndarray, q: np.ndarray) -> MobiusMap:
    """Möbius map carrying sphere points p[k] to q[k], k = 0..2."""
    hp = sphere_to_homogeneous(p)
    hq = sphere_to_homogeneous(q)
    return _homog_standard(hq).inverse() @ _homog_standard(hp)


def _homog_standard(h) -> MobiusMap:
    # z_k = p_k / q_k ; map to 0, 1, inf using homogeneous brackets [z_i, z_j]
    (p1, q1), (p2, q2), (p3, q3) = h
    br = lambda pa, qa, pb, qb: pa * qb - pb * qa
    if min(abs(br(p1, q1, p2, q2)), abs(br(p2, q2, p3, q3)), abs(br(p1, q1, p3, q3))) < 1e-300:
        raise DegenerateInput("points must be distinct")
    # f(z) = [z,z1][z2,z3] / ([z,z3][z2,z1])
    k1 = br(p2, q2, p3, q3)
    k2 = br(p2, q2, p1, q1)
    # [z, z1] = p q1 - p1 q ; as a row acting on (p, q): (q1, -p1)
    return MobiusMap(k1 * q1, -k1 * p1, k2 * q3, -k2 * p3)


def disc_automorphism(center: complex) -> MobiusMap:
    """Disc automorphism sending ``center`` to 0."""
    c = complex(center)
    if abs(c) >= 1:
        raise DegenerateInput("centre must lie inside the unit disc")
    return MobiusMap(1, -c, -c.conjugate(), 1)


def mobius_apply(M: MobiusMap, circle: Circle3) -> Circle3:
    """Exact image of a plane/disc circle (or a sphere cap) under ``M``."""
    if circle.model == SPHERE:
        return _apply_cap(M, circle)
    z0 = complex(circle.center)
    r = float(circle.radius)
    a, b, c, d = M.m.ravel()
    if c == 0:
        return Circle3(complex(M(z0)), r * abs(a / d), circle.model)
    pole = -d / c
    off = pole - z0
    if abs(abs(off) - r) <= 1e-14 * max(1.0, r):
        raise ImageIsLine("circle passes through the pole of the map")
    # reflection of the pole in the circle maps to the image centre
    zs = z0 + r * r / off.conjugate()
    w0 = complex(M(zs))
    # any point on the circle, chosen away from the pole direction
    edge = z0 - r * off / abs(off)
    rad = abs(complex(M(edge)) - w0)
    return Circle3(w0, rad, circle.model)


def cap_boundary_points(center, radius, k=3, phase=0.3):
    c = np.asarray(center, dtype=float)
    e1 = np.cross(c, [1.0, 0.0, 0.0] if abs(c[0]) < 0.9 else [0.0, 1.0, 0.0])
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(c, e1)
    phi = phase + 2 * np.pi * np.arange(k) / k
    return (np.cos(radius) * c[None, :]
            + np.sin(radius) * (np.cos(phi)[:, None] * e1 + np.sin(phi)[:, None] * e2))


def cap_through_points(q: np.ndarray, inside: np.ndarray) -> tuple[np.ndarray, float]:
    """Cap bounded by the circle through three sphere points, on the side of ``inside``."""
    n = np.cross(q[1] - q[0], q[2] - q[0])
    nn = np.linalg.norm(n)
    if nn == 0:
        raise DegenerateInput("collinear cap points")
    n /= nn
    dist = float(np.mean(q @ n))
    if float(inside @ n) < dist:
        n = -n
    return n, float(np.mean(sphere_distance(n, q)))


def _apply_cap(M: MobiusMap, cap: Circle3) -> Circle3:
    pts = cap_boundary_points(cap.center, cap.radius)
    q = M.apply_sphere(pts)
    inside = M.apply_sphere(cap.center)
    c, rho = cap_through_points(q, inside)
    return Circle3(c, rho, SPHERE)


def plane_circle_to_cap(center: complex, radius: float) -> tuple[np.ndarray, float]:
    """Stereographic image of a plane disc (bounded side) as (centre, angular radius)."""
    center = complex(center)
    u = center / abs(center) if abs(center) > 0 else 1.0 + 0j
    t = abs(center)
    # signed arc length from the south pole along the meridian through u
    s1 = 2.0 * math.atan(t - radius)
    s2 = 2.0 * math.atan(t + radius)
    s = 0.5 * (s1 + s2)
    return stereographic(u * math.tan(0.5 * s)), 0.5 * (s2 - s1)


def cap_to_plane_circle(center, radius) -> tuple[complex, float]:
    """Inverse of :func:`plane_circle_to_cap`; fails when the cap contains the north pole."""
    c = np.asarray(center, dtype=float)
    if float(sphere_distance(c, [0.0, 0.0, 1.0])) <= radius:
        raise ImageIsLine("cap contains or touches the projection pole")
    # points of the cap boundary on the meridian through its centre
    lon = math.atan2(c[1], c[0]) if abs(c[0]) + abs(c[1]) > 0 else 0.0
    colat = math.acos(max(-1.0, min(1.0, -c[2])))  # angle from south pole
    a, b = colat - radius, colat + radius
    za = math.tan(a / 2.0)
    zb = math.tan(b / 2.0)
    u = complex(math.cos(lon), math.sin(lon))
    return u * (za + zb) / 2.0, abs(zb - za) / 2.0


# -- hyperbolic disc helpers -------------------------------------------------

def disc_circle(point: complex, decay: float) -> tuple[complex, float]:
    """Euclidean (centre, radius) of the hyperbolic circle with given centre and decay."""
    s = math.sqrt(decay)
    rho = (1.0 - s) / (1.0 + s)
    if point == 0:
        return 0j, rho
    out = mobius_apply(disc_automorphism(point).inverse(), Circle3(0j, rho, PLANE))
    return complex(out.center), out.radius


def hyperbolic_center(center: complex, radius: float) -> tuple[complex, float]:
    """(hyperbolic centre point, decay) of a Euclidean circle inside the unit disc."""
    center = complex(center)
    t = abs(center)
    u = center / t if t > 0 else 1.0 + 0j
    a, b = t - radius, t + radius
    if b >= 1.0:
        return complex(np.nan, np.nan), 0.0
    # decay = e^{-2h} with h = atanh(b) - atanh(a)
    decay = ((1.0 - b) / (1.0 + b)) * ((1.0 + a) / (1.0 - a))
    m = 0.5 * (math.atanh(a) + math.atanh(b))
    return u * math.tanh(m), decay


def horocycle(ideal: complex, radius: float) -> tuple[complex, float]:
    """Horocycle at unit-modulus ideal point with Euclidean radius."""
    return ideal * (1.0 - radius), radius


# -- fits and invariants -------------------------------------------------

def fit_circle(points) -> tuple[Circle3, float]:
    """Least-squares circle through plane points and its roundness.

    Roundness is (max d_i - min d_i) / radius with d_i the distances to the fitted
    centre; it is 0 for exactly concyclic input.
    """
    z = np.asarray(points, dtype=complex).ravel()
    if z.size < 3:
        raise DegenerateInput("need at least three points")
    shift = z.mean()
    w = z - shift
    scale = np.abs(w).max()
    if scale == 0:
        raise DegenerateInput("coincident points")
    w = w / scale
    A = np.column_stack([w.real, w.imag, np.ones(w.size)])
    rhs = np.abs(w) ** 2
    sol, *_ = np.linalg.lstsq(A, rhs, rcond=None)
    c = 0.5 * (sol[0] + 1j * sol[1])
    r2 = sol[2] + abs(c) ** 2
    sv = np.linalg.svd(A, compute_uv=False)
    if r2 <= 0 or sv[-1] < 1e-12 * sv[0]:
        raise DegenerateInput("points are collinear")
    # Gauss-Newton polish of the geometric residual
    for _ in range(20):
        d = np.abs(w - c)
        if np.any(d == 0):
            break
        J = np.column_stack([-(w - c).real / d, -(w - c).imag / d, -np.ones(w.size)])
        res = d - np.sqrt(r2) if r2 > 0 else d
        step, *_ = np.linalg.lstsq(J, -res, rcond=None)
        c = c + step[0] + 1j * step[1]
        r2 = (np.sqrt(r2) + step[2]) ** 2
        if np.abs(step).max() < 1e-15:
            break
    d = np.abs(w - c)
    r = float(np.sqrt(r2))
    roundness = float((d.max() - d.min()) / r)
    return Circle3(complex(c * scale + shift), r * scale, PLANE), roundness


def inversive_distance_caps(c1, r1, c2, r2) -> float:
    """Inversive distance of two spherical caps (> 1 for disjoint, = 1 tangent)."""
    d = float(sphere_distance(c1, c2))
    return (math.cos(r1) * math.cos(r2) - math.cos(d)) / (math.sin(r1) * math.sin(r2))


def cross_ratio(z1, z2, z3, z4) -> complex:
    return ((z1 - z3) * (z2 - z4)) / ((z1 - z4) * (z2 - z3))


def sphere_cross_ratio(p) -> complex:
    """Cross ratio of four sphere points computed in homogeneous coordinates."""
    h = sphere_to_homogeneous(np.asarray(p))
    br = lambda i, j: h[i, 0] * h[j, 1] - h[j, 0] * h[i, 1]
    return complex((br(0, 2) * br(1, 3)) / (br(0, 3) * br(1, 2)))
