import json
import math
import re
import xml.etree.ElementTree as ET

import numpy as np
import pytest

from icd import cli
from icd.complex import Triangulation, flower, tetrahedron
from icd.label import solve_euclidean, solve_sphere
from icd.layout import Packing, layout

DISC = {"components": [{"type": "circle", "center": [0, 0], "radius": 1}], "holes_are_complement": True}
ANNULUS = {"components": [{"type": "circle", "center": [0, 0], "radius": 1},
                          {"type": "circle", "center": [0, 0], "radius": 0.3}], "holes_are_complement": True}


@pytest.fixture
def domain_file(tmp_path):
    def make(d, name="dom.json"):
        p = tmp_path / name
        p.write_text(json.dumps(d))
        return str(p)
    return make


def circles(svg):
    root = ET.fromstring(svg.split("\n", 1)[1])
    return [(float(c.get("cx")), float(c.get("cy")), float(c.get("r")), c.get("class"))
            for c in root.iter("{http://www.w3.org/2000/svg}circle")]


def test_parse_args_defaults():
    a = cli.parse_args(["pack", "dom.json", "--mesh", "0.0625"])
    assert (a.command, a.input, a.mesh, a.tol, a.refine, a.format) == ("pack", "dom.json", 0.0625, 1e-10, 1, "json")
    assert cli.parse_args(["pack", "d.json"]).mesh == 0.03125
    a = cli.parse_args(["pack", "d.json", "--normalize", "0,0,0.5,0,0,0.5"])
    assert a.normalize == (0j, 0.5 + 0j, 0.5j)


@pytest.mark.parametrize("argv", [["pack"], ["pack", "d.json", "--mesh", "-1"], ["pack", "d.json", "--bogus"],
                                  ["pack", "d.json", "--refine", "x"], ["pack", "d.json", "--normalize", "1,2"],
                                  ["pack", "d.json", "--format", "png"], []])
def test_usage_errors(argv):
    with pytest.raises(SystemExit) as exc:
        cli.parse_args(argv)
    assert exc.value.code != 0


def test_missing_input_file(tmp_path):
    assert cli.main(["pack", str(tmp_path / "nope.json")]) != 0


def test_render_hex_flower():
    T = flower(6)
    L, _ = solve_euclidean(T, 1.0)
    svg = cli.render_svg(layout(T, L), "PLANE")
    cs = circles(svg)
    assert len(cs) == 7
    # deterministic order by vertex id
    assert re.findall(r'id="c(\d+)"', svg) == [str(i) for i in range(7)]


def test_render_flower_is_symmetric():
    T = flower(6)
    L, _ = solve_euclidean(T, 1.0)
    cs = circles(cli.render_svg(layout(T, L, anchor=(0, 1)), "PLANE"))
    z = np.array([complex(x, y) for x, y, _, _ in cs])
    rot = z * np.exp(1j * math.pi / 3)
    for w in rot:
        assert np.abs(z - w).min() < 1e-6


def test_render_tetrahedron_views():
    P = solve_sphere(tetrahedron(), 0)
    for view in ("STEREO_NORTH", "STEREO_SOUTH"):
        cs = circles(cli.render_svg(P, view))
        assert len(cs) == 4
        assert sum(c[3] == "disc" for c in cs) >= 3


def test_render_pole_rules():
    # octahedron circles centred at the poles: one contains each pole
    from icd.complex import octahedron
    P = solve_sphere(octahedron(), 0)
    n = np.array([0.0, 0.0, 1.0])
    R = np.eye(3)
    kinds = [k for _, _, k in cli.project_packing(P, "STEREO_NORTH")]
    inside = [float(np.arccos(np.clip(c @ n, -1, 1))) < r for c, r in zip(P.centers, P.radii)]
    assert [k == "exterior" for k in kinds] == inside


def test_render_empty():
    P = Packing(Triangulation([], []), "PLANE", np.zeros(0, complex), np.zeros(0))
    svg = cli.render_svg(P)
    assert circles(svg) == []


def test_pack_json_round_trip(domain_file, tmp_path):
    out = tmp_path / "res.json"
    assert cli.main(["pack", domain_file(ANNULUS), "--mesh", "0.0625", "--out", str(out)]) == 0
    text = out.read_text()
    d = json.loads(text)
    assert d["schema"] == 1 and len(d["components"]) == 2
    assert set(d["meta"]) >= {"mesh", "tol", "versions"}
    ids = [c["id"] for c in d["circles"]]
    assert ids == list(range(len(ids)))
    assert {c["role"] for c in d["circles"]} <= {"omega", "ideal", "cap"}
    assert sum(c["role"] == "ideal" for c in d["circles"]) == 2
    assert json.dumps(json.loads(text), indent=1) + "\n" == text
    P = Packing.from_dict(d)
    assert len(P.radii) == len(ids) and P.complex.vertex_count == len(ids)


def test_pack_svg_and_weld_dump(domain_file, tmp_path):
    out = tmp_path / "o" / "disc"
    assert cli.main(["pack", domain_file(DISC), "--mesh", "0.0625", "--format", "both",
                     "--out", str(out), "--dump-weld"]) == 0
    svg = (tmp_path / "o" / "disc.svg").read_text()
    d = json.loads((tmp_path / "o" / "disc.json").read_text())
    assert len(circles(svg)) == len(d["circles"])
    csv = (tmp_path / "o" / "disc.weld-0.csv").read_text().splitlines()
    assert csv[0] == "vertex,t" and len(csv) > 10


def test_render_and_cutout_commands(domain_file, tmp_path):
    res = tmp_path / "r.json"
    cli.main(["pack", domain_file(DISC), "--mesh", "0.0625", "--out", str(res)])
    assert cli.main(["render", str(res), "--view", "STEREO_SOUTH", "--out", str(tmp_path / "r.svg")]) == 0
    assert (tmp_path / "r.svg").exists()
    assert cli.main(["cutout", domain_file(DISC), "--mesh", "0.3", "--refine", "0",
                     "--out", str(tmp_path / "c.json")]) == 0
    c = json.loads((tmp_path / "c.json").read_text())
    assert len(c["circles"]) == 7


def test_verify_command(domain_file, tmp_path):
    out = tmp_path / "v.json"
    assert cli.main(["verify", domain_file(ANNULUS), "--mesh", "0.0625", "--out", str(out)]) == 0
    v = json.loads(out.read_text())["diagnostics"]["verify"]
    assert set(v) == {"0", "1"} and max(v.values()) < 0.02


def test_bad_domain_exit_code(domain_file):
    bad = {"components": [{"type": "polygon", "points": [[0, 0], [1, 1], [1, 0], [0, 1]]}]}
    assert cli.main(["pack", domain_file(bad)]) != 0
