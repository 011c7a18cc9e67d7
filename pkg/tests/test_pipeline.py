import math

import numpy as np
import pytest

from icd.cookie import CIRCLE, Component, DomainSpec
from icd.errors import MissingComponent, StageError
from icd.pipeline import (PipelineConfig, _threads, dilatation_report, limit_points, map_points, run,
                          symmetry_deviation, verify_intrinsic)

EPS = 2.0 ** -4


@pytest.fixture(scope="module")
def disc():
    return run(DomainSpec.disc(), PipelineConfig(epsilon=EPS))


@pytest.fixture(scope="module")
def annulus():
    return run(DomainSpec.annulus(0.3), PipelineConfig(epsilon=EPS))


def test_disc_result_shape(disc):
    assert disc.converged
    P = disc.sphere_packing
    assert set(disc.roles) == {"omega", "cap", "ideal"}
    assert disc.roles.count("ideal") == 1
    # cap_vertices include the hub
    assert len(disc.omega_vertices) + sum(len(d["cap_vertices"]) for d in disc.component_discs.values()) \
        == P.complex.vertex_count
    assert disc.diagnostics["tangency_residual"] <= 1e-6
    assert disc.diagnostics["components"]["0"]["roundness"] < 0.1
    np.testing.assert_allclose(np.linalg.norm(P.centers, axis=1), 1, atol=1e-12)


def test_normalization_targets(disc):
    P = disc.sphere_packing
    v = P.meta["normal_vertices"]
    np.testing.assert_allclose(P.anchors[v], disc.config.normalize_targets, atol=1e-9)


def test_annulus_has_two_discs(annulus):
    assert sorted(annulus.component_discs) == [0, 1]
    assert annulus.diagnostics["annulus_modulus"] > 0
    for k in (0, 1):
        assert verify_intrinsic(annulus, k) < 0.02


def test_verify_missing_component(disc):
    with pytest.raises(MissingComponent):
        verify_intrinsic(disc, 5)


def test_negative_control_is_caught():
    warp = lambda t: np.interp(np.mod(t, 1.0), [0, 0.5, 1], [0, 0.2, 1])
    bad = run(DomainSpec.disc(), PipelineConfig(epsilon=EPS), weld_warp={0: warp})
    assert bad.component_discs[0]["warped"]
    assert verify_intrinsic(bad, 0) > 0.1


def test_dilatation_report(annulus):
    rep = dilatation_report(annulus)
    assert rep["max"] >= rep["median"] >= 1.0
    assert [row["depth"] for row in rep["by_depth"]] == sorted(row["depth"] for row in rep["by_depth"])


def test_map_points(annulus):
    p = map_points(annulus, [0.5, -0.6j])
    np.testing.assert_allclose(np.linalg.norm(p, axis=1), 1)
    with pytest.raises(ValueError):
        map_points(annulus, [0.0])


def test_normalize_points_option():
    cfg = PipelineConfig(epsilon=EPS, normalize_points=(0j, 0.5 + 0j, 0.5j))
    res = run(DomainSpec.disc(), cfg)
    assert res.converged
    with pytest.raises(ValueError):
        run(DomainSpec.disc(), PipelineConfig(epsilon=EPS, normalize_points=(0j, 0.5, 3.0)))


def test_config_validation():
    for kw in ({"epsilon": 0}, {"tol": -1}, {"refine_layers": -1}, {"normalize_points": (0j,)}):
        with pytest.raises(ValueError):
            PipelineConfig(**kw)


def test_stage_errors_are_tagged():
    with pytest.raises(StageError) as exc:
        run(DomainSpec.annulus(0.05), PipelineConfig(epsilon=0.3, refine_layers=0))
    assert exc.value.stage == "cutout"


def test_threads_env(monkeypatch):
    monkeypatch.setenv("ICD_THREADS", "3")
    assert _threads(PipelineConfig()) == 3
    assert _threads(PipelineConfig(threads=2)) == 2
    monkeypatch.setenv("ICD_THREADS", "junk")
    assert _threads(PipelineConfig()) >= 1


def test_threaded_run_matches_serial(monkeypatch):
    dom = DomainSpec.annulus(0.3)
    a = run(dom, PipelineConfig(epsilon=EPS, threads=1))
    b = run(dom, PipelineConfig(epsilon=EPS, threads=2))
    np.testing.assert_array_equal(a.sphere_packing.centers, b.sphere_packing.centers)


def test_limit_points_are_inverse_pairs():
    p, q = limit_points(0j, 1.0, 3 + 1j, 0.5)
    c2 = 3 + 1j
    assert (p * np.conj(q)).real == pytest.approx(1.0)
    assert ((p - c2) * np.conj(q - c2)).real == pytest.approx(0.25)


def test_symmetry_of_threefold_domain():
    comps = [Component(CIRCLE, 0j, 1.0)] + [Component(CIRCLE, 0.5 * np.exp(2j * math.pi * k / 3), 0.2)
                                             for k in range(3)]
    res = run(DomainSpec(comps), PipelineConfig(epsilon=EPS / 2))
    dev = symmetry_deviation(res, order=3)
    assert dev["max"] < 1e-6
    with pytest.raises(ValueError):
        symmetry_deviation(res, order=4)
