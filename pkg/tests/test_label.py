import math
import time

import numpy as np
import pytest
from hypothesis import given, strategies as st

from icd import geom
from icd.complex import add_ideal_vertex, boundary_cycles, flower, hex_disc, octahedron, tetrahedron
from icd.errors import NoInteriorVertices, NotASphere
from icd.label import (EUCLIDEAN, HYPERBOLIC, PackingLabel, angle_sum, residual, solve_euclidean,
                       solve_hyperbolic, solve_max_hyperbolic, solve_sphere)
from icd.complex import build_from_faces


def label(T, geometry, radii):
    r = np.asarray(radii, dtype=float)
    return PackingLabel(geometry, r, ~np.array(T.closed))


def test_angle_sum_examples():
    T = flower(6)
    assert angle_sum(T, label(T, EUCLIDEAN, np.ones(7)), 0) == pytest.approx(2 * math.pi, abs=1e-14)
    T4 = flower(4)
    r = np.ones(5)
    r[0] = math.sqrt(2) - 1
    assert angle_sum(T4, label(T4, EUCLIDEAN, r), 0) == pytest.approx(2 * math.pi, abs=1e-14)
    x = np.zeros(7)
    x[0] = 0.25
    assert angle_sum(T, label(T, HYPERBOLIC, x), 0) == pytest.approx(2 * math.pi, abs=1e-14)


@pytest.mark.parametrize("n", range(4, 13))
def test_uniform_flower_euclidean_hub(n):
    L, rep = solve_euclidean(flower(n), 1.0)
    assert rep.converged
    assert L.radii[0] == pytest.approx(1 / math.sin(math.pi / n) - 1, abs=1e-8)


@pytest.mark.parametrize("accelerate", [False, True])
def test_hex_flower_max_hyperbolic(accelerate):
    L, rep = solve_max_hyperbolic(flower(6), accelerate=accelerate)
    assert rep.converged and rep.final_residual <= 1e-10
    assert L.hyperbolic_radii()[0] == pytest.approx(math.log(2), abs=1e-8)


def _two_deep_oracle():
    # sixfold symmetry leaves two unknowns: hub h0 and ring radius h1
    from scipy.optimize import brentq

    x = geom.decay_from_radius
    ang = geom.hyperbolic_angle

    def ring_sum(h0, h1):
        return (2 * ang(x(h1), x(h0), x(h1)) + 2 * ang(x(h1), x(h1), 0.0)
                + 2 * ang(x(h1), 0.0, 0.0) - 2 * math.pi)

    def h1_of(h0):
        return brentq(lambda h1: ring_sum(h0, h1), 1e-6, 20.0)

    h0 = brentq(lambda h: 6 * ang(x(h), x(h1_of(h)), x(h1_of(h))) - 2 * math.pi, 1e-3, 5.0)
    return h0, h1_of(h0)


def test_two_deep_hub_against_symmetric_oracle():
    T, _ = hex_disc(2)
    L, rep = solve_max_hyperbolic(T)
    assert residual(T, L) <= 1e-10
    h = L.hyperbolic_radii()
    h0, h1 = _two_deep_oracle()
    assert h[0] == pytest.approx(h0, abs=1e-8)
    np.testing.assert_allclose(h[1:7], h1, atol=1e-8)
    # a second generation of finite petals shrinks the hub
    assert h[0] < math.log(2)


def test_newton_matches_uniform_sweeps():
    T, _ = hex_disc(4)
    L1, r1 = solve_max_hyperbolic(T)
    L2, r2 = solve_max_hyperbolic(T, accelerate=True)
    assert r2.method == "newton"
    np.testing.assert_allclose(L1.radii, L2.radii, rtol=1e-8)


def test_no_interior():
    with pytest.raises(NoInteriorVertices):
        solve_euclidean(build_from_faces([(0, 1, 2)]), 1.0)


def test_sphere_tetrahedron_and_octahedron():
    for v in range(4):
        P = solve_sphere(tetrahedron(), v)
        np.testing.assert_allclose(P.radii, math.acos(-1 / 3) / 2, atol=1e-6)
    P = solve_sphere(octahedron(), 0)
    np.testing.assert_allclose(P.radii, math.pi / 4, atol=1e-6)


def test_sphere_capped_flower_tangency():
    T = flower(6)
    S = add_ideal_vertex(T, boundary_cycles(T)[0])
    P = solve_sphere(S, 0)
    d = geom.sphere_distance(P.centers[[e[0] for e in S.edges]], P.centers[[e[1] for e in S.edges]])
    s = np.array([P.radii[a] + P.radii[b] for a, b in S.edges])
    assert np.abs(d - s).max() <= 1e-8


def test_sphere_rejects_disc():
    with pytest.raises(NotASphere):
        solve_sphere(flower(6), 0)


@given(st.lists(st.floats(0.05, 20.0), min_size=6, max_size=6))
def test_random_boundary_radii_converge(bd):
    T = flower(6)
    L, rep = solve_euclidean(T, np.r_[1.0, bd])
    assert rep.converged and abs(angle_sum(T, L, 0) - 2 * math.pi) <= 1e-10


@given(st.lists(st.floats(0.0, 0.9), min_size=12, max_size=12))
def test_random_boundary_decay_converge(bd):
    T, _ = hex_disc(2)
    x = np.zeros(T.vertex_count)
    x[list(T.boundary_vertices)] = bd
    L, rep = solve_hyperbolic(T, x, accelerate=True)
    assert rep.converged and residual(T, L) <= 1e-10


def test_large_complex_runtime():
    T, _ = hex_disc(57)  # about 10^4 vertices
    t0 = time.perf_counter()
    L, rep = solve_max_hyperbolic(T, accelerate=True)
    assert rep.converged and residual(T, L) <= 1e-10
    assert time.perf_counter() - t0 < 30


# -- precision for tiny hyperbolic circles ---------------------------------

def _tiny_flower_label(h_hub, h_petal, exact):
    T = flower(6)
    h = np.full(7, h_petal)
    h[0] = h_hub
    x = np.exp(-2 * h)
    L = PackingLabel(HYPERBOLIC, x, np.array([False] + [True] * 6))
    if exact:
        L.codecay = -np.expm1(-2 * h)
    return T, L


def test_tiny_circles_follow_euclidean_limit():
    # hyperbolic geometry is Euclidean to O(h^2) at this scale
    hp = 3e-8
    euclid = 6 * geom.euclidean_angle(0.8 * hp, hp, hp)
    T, L = _tiny_flower_label(0.8 * hp, hp, exact=True)
    assert angle_sum(T, L, 0) == pytest.approx(euclid, abs=1e-11)
    # the decays alone cannot resolve these circles to that accuracy
    T, L = _tiny_flower_label(0.8 * hp, hp, exact=False)
    assert abs(angle_sum(T, L, 0) - euclid) > 1e-11


def test_newton_variable_round_trip():
    from icd.label import _from_var, _to_var
    h = np.array([1e-9, 1e-6, 0.3, 5.0, 17.0])
    x, y = np.exp(-2 * h), -np.expm1(-2 * h)
    u, _ = _to_var(True, x, y)
    # log(1 - e^-h) - log(1 + e^-h), each piece in its accurate form
    lo = np.where(h > 1, np.log1p(-np.exp(-h)), np.log(-np.expm1(-h)))
    np.testing.assert_allclose(u, lo - np.log1p(np.exp(-h)), rtol=1e-13)
    x2, y2 = _from_var(True, u)
    np.testing.assert_allclose(x2, x, rtol=1e-13)
    np.testing.assert_allclose(y2, y, rtol=1e-12)


def test_stale_codecay_is_ignored():
    T, L = _tiny_flower_label(2e-6, 2e-6, exact=True)
    L.radii[0] = 0.25  # edited behind the label's back
    assert L.co()[0] == 0.75
    assert L.co()[1] == L.codecay[1]


def test_max_packing_with_tiny_circles_reaches_tol():
    # petals pinned at tiny radii force h ~ 1e-6 for every interior circle
    T, _ = hex_disc(6)
    bd = {v: math.exp(-2 * 2e-6) for v in T.boundary_vertices}
    L, rep = solve_hyperbolic(T, bd, tol=1e-12, accelerate=True)
    assert rep.converged and residual(T, L) <= 1e-12
    h = L.hyperbolic_radii()
    assert h[list(T.interior_vertices)].max() < 1e-5
