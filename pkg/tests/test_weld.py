import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from icd.complex import INSERTED, add_ideal_vertex, boundary_cycles, build_from_faces, flower, hex_disc, is_sphere
from icd.errors import AngleSumNot2Pi, EmptyParam, IncompatibleOrientation
from icd.label import solve_hyperbolic, solve_max_hyperbolic
from icd.layout import layout
from icd.weld import BoundaryParam, cap_rings, fuchsian_boundary_param, make_cap, packed_param, weld


def circ_diff(a, b):
    d = np.mod(np.asarray(a) - np.asarray(b), 1.0)
    return np.minimum(d, 1 - d)


def disc_with_param(rings, phase=0.0):
    T, _ = hex_disc(rings)
    cyc = boundary_cycles(T)[0]
    return T, BoundaryParam.uniform(cyc, phase)


@pytest.mark.parametrize("n", [4, 6])
def test_symmetric_flower_param(n):
    T = flower(n)
    L, _ = solve_max_hyperbolic(T)
    p = fuchsian_boundary_param(T, L, 0)
    assert len(p) == n
    g = p.gaps()
    np.testing.assert_allclose(g, 1 / n, atol=1e-10)


def test_perturbed_flower_against_layout():
    T = flower(6)
    x = np.zeros(7)
    x[1] = math.exp(-2.0)
    L, rep = solve_hyperbolic(T, x)
    assert rep.converged
    p = fuchsian_boundary_param(T, L, 0, start=1)
    P = layout(T, L, anchor=(0, 1))
    tp = P.tangency_points([(0, v) for v in range(1, 7)])
    # clockwise turn from petal 1, in turns
    want = np.mod(-(np.angle(tp) - np.angle(tp[0])) / (2 * math.pi), 1.0)
    got = dict(p.entries)
    np.testing.assert_allclose(circ_diff([got[v] for v in range(1, 7)], want), 0, atol=1e-8)


def test_param_angle_sum_checked():
    T = flower(6)
    L, _ = solve_max_hyperbolic(T)
    L.radii[0] = 0.5  # petals are fixed, so only the hub sum is off
    with pytest.raises(AngleSumNot2Pi):
        fuchsian_boundary_param(T, L, 0, tol=1e-10)


@pytest.mark.parametrize("n,rings", [(6, 1), (12, 2)])
def test_make_cap_sizes(n, rings):
    cap, cp = make_cap(BoundaryParam.uniform(list(range(n))))
    assert cap_rings(BoundaryParam.uniform(list(range(n)))) == rings
    assert len(boundary_cycles(cap)[0]) == 6 * rings
    assert len(cp) == 6 * rings


def test_make_cap_uses_median_gap():
    t = np.r_[np.arange(10) * 0.1, 0.005 + np.arange(10) * 0.1]
    t = np.sort(t)
    p = BoundaryParam(tuple(zip(range(20), t)))
    assert p.gaps().min() <= 0.0051 and p.median_gap() == pytest.approx(0.05, abs=1e-9)
    assert cap_rings(p) == round(1 / (6 * p.median_gap()))


def test_two_triangles():
    A = build_from_faces([(0, 1, 2)])
    B = build_from_faces([(0, 1, 2)])
    rec = weld(A, BoundaryParam.uniform([0, 1, 2]), B, BoundaryParam.uniform([0, 1, 2]))
    S = rec.merged
    assert S.euler_characteristic == 2 and is_sphere(S)
    assert S.vertex_count <= 6


def test_two_hex_discs_aligned():
    A, pa = disc_with_param(1)
    B, pb = disc_with_param(1)
    rec = weld(A, pa, B, pb)
    assert is_sphere(rec.merged)
    assert rec.merged.vertex_count == 14
    assert not rec.inserted_vertices
    assert rec.merged.max_degree <= 8


def test_half_gap_offset_inserts():
    # anchors stay joined; every other B entry sits half a gap off its A partner
    A, pa = disc_with_param(1)
    B, _ = hex_disc(1)
    cb = boundary_cycles(B)[0]
    pb = BoundaryParam(tuple(zip(cb, np.r_[0.0, np.arange(1, 6) / 6 + 1 / 12])))
    rec = weld(A, pa, B, pb)
    assert is_sphere(rec.merged)
    assert len(rec.inserted_vertices) > 0
    assert rec.merged.max_degree <= rec.degree_bound


def test_param_validation():
    A, pa = disc_with_param(1)
    with pytest.raises(EmptyParam):
        weld(A, BoundaryParam(()), A, pa)
    rev = BoundaryParam.uniform(pa.vertices[::-1])
    with pytest.raises(IncompatibleOrientation):
        weld(A, rev, A, pa)


def test_csv_round_trip():
    p = BoundaryParam(((3, 0.0), (5, 0.25), (9, 0.7)))
    text = p.to_csv()
    assert text.splitlines()[0] == "vertex,t"
    assert BoundaryParam.from_csv(text) == p


@given(st.integers(1, 3), st.integers(1, 3), st.floats(0, 0.999),
       st.lists(st.floats(0.2, 1.0), min_size=18, max_size=18))
def test_weld_random_params_gives_sphere(ra, rb, phase, w):
    A, _ = hex_disc(ra)
    B, _ = hex_disc(rb)
    ca, cb = boundary_cycles(A)[0], boundary_cycles(B)[0]
    ta = np.cumsum(np.r_[0, w[: len(ca) - 1]])
    ta = ta / (ta[-1] + w[len(ca) - 1])
    pa = BoundaryParam(tuple(zip(ca, ta)))
    pb = BoundaryParam.uniform(cb, phase)
    rec = weld(A, pa, B, pb)
    S = rec.merged
    assert is_sphere(S)
    assert S.vertex_count == A.vertex_count + B.vertex_count + len(rec.inserted_vertices)
    assert S.max_degree <= rec.degree_bound
    assert all(INSERTED in S.marks[v] for v in rec.inserted_vertices)
    assert rec.matched >= 1


def test_packed_param_of_hex_disc_is_sixfold():
    T, _ = hex_disc(3)
    cyc = boundary_cycles(T)[0]
    p = packed_param(T, cyc, 0)
    t = p.ts
    # corner vertices of the hex disc are a sixth of a turn apart
    corners = [i for i, v in enumerate(cyc) if T.degree(v) == 3]
    d = np.diff(np.r_[t[corners], t[corners[0]] + 1])
    np.testing.assert_allclose(d, 1 / 6, atol=1e-9)
