import pytest
from hypothesis import given, strategies as st

from icd.complex import (IDEAL, Triangulation, add_ideal_vertex, boundary_cycles, build_from_faces,
                         flower, hex_disc, is_sphere, octahedron, remove_vertices, tetrahedron)
from icd.errors import InconsistentOrientation, NonManifold, NotABoundaryCycle


def counts(T):
    return T.vertex_count, T.edge_count, T.face_count, T.euler_characteristic


def annulus_band():
    T, _ = hex_disc(2)
    A, _ = remove_vertices(T, [0])
    return A


def test_tetrahedron_counts():
    assert counts(tetrahedron()) == (4, 6, 4, 2)
    assert is_sphere(tetrahedron())


def test_single_face():
    T = build_from_faces([(0, 1, 2)])
    assert T.euler_characteristic == 1
    assert boundary_cycles(T) == [[0, 1, 2]]


def test_hex_flower_counts():
    T = flower(6)
    assert counts(T) == (7, 12, 6, 1)
    (cyc,) = boundary_cycles(T)
    assert len(cyc) == 6
    # flower order: consecutive petals share a face with the hub
    for a, b in zip(cyc, cyc[1:] + cyc[:1]):
        assert T.has_edge(a, b)
    assert not is_sphere(T)


def test_annulus_band_has_two_cycles():
    A = annulus_band()
    assert A.euler_characteristic == 0
    assert sorted(len(c) for c in boundary_cycles(A)) == [6, 12]


def test_capped_flower():
    T = flower(6)
    S = add_ideal_vertex(T, boundary_cycles(T)[0])
    assert counts(S) == (8, 18, 12, 2)
    assert is_sphere(S)
    assert IDEAL in S.marks[7]


def test_capped_triangle_is_tetrahedron():
    T = build_from_faces([(0, 1, 2)])
    S = add_ideal_vertex(T, [0, 1, 2])
    assert counts(S) == counts(tetrahedron())


def test_cap_one_annulus_cycle():
    A = annulus_band()
    cyc = boundary_cycles(A)[0]
    D = add_ideal_vertex(A, cyc)
    assert D.euler_characteristic == 1
    assert len(boundary_cycles(D)) == 1


def test_reversed_cycle_rejected():
    T = flower(6)
    cyc = boundary_cycles(T)[0]
    with pytest.raises(NotABoundaryCycle):
        add_ideal_vertex(T, cyc[::-1])


def test_bad_orientation_and_nonmanifold():
    with pytest.raises(InconsistentOrientation):
        build_from_faces([(0, 1, 2), (0, 1, 3)])
    with pytest.raises(NonManifold):
        build_from_faces([(0, 1, 2), (1, 0, 3), (0, 1, 4)])


def test_text_round_trip():
    T = octahedron()
    assert Triangulation.from_text(T.to_text()) == T


@given(st.integers(1, 6))
def test_hex_disc_euler_and_boundary(k):
    T, pos = hex_disc(k)
    assert T.euler_characteristic == 1
    assert len(boundary_cycles(T)[0]) == 6 * k
    assert T.vertex_count == 1 + 3 * k * (k + 1)
    assert T.max_degree <= 6


@given(st.integers(3, 12))
def test_flower_capped_is_sphere(n):
    T = flower(n)
    S = add_ideal_vertex(T, boundary_cycles(T)[0])
    assert is_sphere(S) and S.euler_characteristic == 2
