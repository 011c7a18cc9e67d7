"""Command line front end: ``icd pack|verify|render|cutout``."""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__, geom
from .cookie import DomainSpec, hex_cutout, refine_cutout
from .errors import PackingError
from .layout import Packing

PLANE_VIEW = "PLANE"
STEREO_NORTH = "STEREO_NORTH"
STEREO_SOUTH = "STEREO_SOUTH"
VIEWS = (PLANE_VIEW, STEREO_NORTH, STEREO_SOUTH)

SCHEMA = 1
_POLE_TOL = 1e-9

log = logging.getLogger("icd")


# -- argument parsing ----------------------------------------------------------------

def _positive_float(s: str) -> float:
    try:
        v = float(s)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {s!r}")
    if not (v > 0 and math.isfinite(v)):
        raise argparse.ArgumentTypeError(f"must be a positive number: {s!r}")
    return v


def _nonneg_int(s: str) -> int:
    try:
        v = int(s)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {s!r}")
    if v < 0:
        raise argparse.ArgumentTypeError(f"must be >= 0: {s!r}")
    return v


def _points(s: str):
    try:
        vals = [float(x) for x in s.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected x1,y1,x2,y2,x3,y3: {s!r}")
    if len(vals) != 6 or not all(map(math.isfinite, vals)):
        raise argparse.ArgumentTypeError(f"expected six numbers x1,y1,x2,y2,x3,y3: {s!r}")
    return tuple(complex(vals[i], vals[i + 1]) for i in (0, 2, 4))


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="icd", description="Intrinsic circle domains by circle packing.")
    p.add_argument("--version", action="version", version=f"icd {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, with_weld=True):
        sp.add_argument("input", help="domain JSON file")
        sp.add_argument("--mesh", type=_positive_float, default=2.0 ** -5, help="circle radius of the hex packing")
        sp.add_argument("--tol", type=_positive_float, default=1e-10, help="angle-sum tolerance")
        sp.add_argument("--refine", type=_nonneg_int, default=1, help="boundary refinement layers")
        sp.add_argument("--out", help="output path (extension is replaced per format)")
        sp.add_argument("--format", choices=("json", "svg", "both"), default="json")
        sp.add_argument("-v", "--verbose", action="store_true")
        if with_weld:
            sp.add_argument("--normalize", type=_points, help="x1,y1,x2,y2,x3,y3: three domain points")
            sp.add_argument("--dump-weld", action="store_true", help="write boundary params as CSV")

    common(sub.add_parser("pack", help="compute the intrinsic circle domain packing"))
    common(sub.add_parser("verify", help="pack and certify every component"))
    common(sub.add_parser("cutout", help="hexagonal cut-out only"), with_weld=False)
    r = sub.add_parser("render", help="render a packing JSON as SVG")
    r.add_argument("input", help="packing or result JSON")
    r.add_argument("--view", choices=VIEWS, default=None)
    r.add_argument("--out")
    r.add_argument("-v", "--verbose", action="store_true")
    return p


def parse_args(argv=None) -> argparse.Namespace:
    return build_parser().parse_args(argv)


# -- SVG ----------------------------------------------------------------------------

def _fmt(x: float) -> str:
    return f"{x:.10g}" if x != 0 else "0"


def project_packing(P: Packing, view: str):
    """Plane images (centre, radius, kind) of every circle for a view.

    kind is ``disc`` for ordinary circles, ``exterior`` when the cap contains
    the projection pole (the image is the outside of the drawn circle) and
    ``clipped`` when its boundary passes through the pole (the image is a
    line; drawn as a zero-radius marker at the foot of the line).
    """
    n = len(P.radii)
    out = []
    if P.model != geom.SPHERE:
        for v in range(n):
            c = complex(P.centers[v])
            out.append((c, float(P.radii[v]), "disc"))
        return out
    flip = np.diag([1.0, -1.0, -1.0]) if view == STEREO_SOUTH else np.eye(3)
    north = np.array([0.0, 0.0, 1.0])
    for v in range(n):
        c = flip @ np.asarray(P.centers[v], dtype=float)
        rho = float(P.radii[v])
        d = float(geom.sphere_distance(c, north))
        if abs(d - rho) <= _POLE_TOL:
            # boundary through the pole: marker at the point of the line nearest 0
            far = geom.sphere_point_toward(c, -north, rho) if d > 1e-12 else c
            out.append((complex(geom.inverse_stereographic(far)), 0.0, "clipped"))
        elif d < rho:
            cc, rr = geom.cap_to_plane_circle(-c, math.pi - rho)
            out.append((cc, rr, "exterior"))
        else:
            cc, rr = geom.cap_to_plane_circle(c, rho)
            out.append((cc, rr, "disc"))
    return out


_FILL = {"omega": "#cfe3f5", "cap": "#e6e6e6", "ideal": "#f2c9c4", None: "none"}


def render_svg(P: Packing, view: str | None = None, roles=None, size: int = 800) -> str:
    """SVG text with one circle element per packing circle, in vertex order."""
    if view is None:
        view = STEREO_NORTH if P.model == geom.SPHERE else PLANE_VIEW
    if view not in VIEWS:
        raise ValueError(f"unknown view {view!r}")
    items = project_packing(P, view) if len(P.radii) else []
    finite = [(c, r) for c, r, k in items if k == "disc"]
    if finite:
        xs = [c.real - r for c, r in finite] + [c.real + r for c, r in finite]
        ys = [c.imag - r for c, r in finite] + [c.imag + r for c, r in finite]
        x0, x1, y0, y1 = min(xs), max(xs), min(ys), max(ys)
    else:
        x0, x1, y0, y1 = -1.0, 1.0, -1.0, 1.0
    w = max(x1 - x0, y1 - y0, 1e-12)
    pad = 0.05 * w
    vb = (x0 - pad, -(y1 + pad), (x1 - x0) + 2 * pad, (y1 - y0) + 2 * pad)
    stroke = w / 2000.0
    lines = ['<?xml version="1.0" encoding="UTF-8"?>',
             f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" '
             f'viewBox="{" ".join(_fmt(v) for v in vb)}">',
             f'<g stroke="#1f3b57" stroke-width="{_fmt(stroke)}">']
    for v, (c, r, kind) in enumerate(items):
        role = roles[v] if roles is not None else None
        fill = "none" if kind != "disc" else _FILL.get(role, "none")
        attrs = (f'id="c{v}" cx="{_fmt(c.real)}" cy="{_fmt(-c.imag)}" r="{_fmt(r)}" '
                 f'fill="{fill}" class="{kind}{" " + role if role else ""}"')
        lines.append(f"<circle {attrs}/>")
    lines.append("</g>")
    lines.append("</svg>")
    return "\n".join(lines) + "\n"


# -- JSON ---------------------------------------------------------------------------

def _clean(x):
    if isinstance(x, dict):
        return {str(k): _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if isinstance(x, (np.floating, float)):
        x = float(x)
        return x if math.isfinite(x) else None
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, np.bool_):
        return bool(x)
    return x


def result_dict(res) -> dict:
    import scipy

    P = res.sphere_packing
    cfg = res.config
    circles = [{"id": v, "role": res.roles[v], "center": [float(x) for x in P.centers[v]],
                "radius": float(P.radii[v])} for v in range(len(P.radii))]
    comps = []
    for k, d in sorted(res.component_discs.items()):
        diag = res.diagnostics.get("components", {}).get(str(k), {})
        h = d["ideal"]
        comps.append({
            "component": k,
            "outer": k == res.cutout.domain.outer_index,
            "ideal": h,
            "ideal_circle": {"center": [float(x) for x in P.centers[h]], "radius": float(P.radii[h])},
            "cap_vertices": [int(v) for v in d["cap_vertices"]],
            "cycle": [int(v) for v in d["cycle"]],
            "fitted_cap": {"center": diag.get("cap_center"), "radius": diag.get("cap_radius")},
            "roundness": diag.get("roundness"),
        })
    return _clean({
        "schema": SCHEMA,
        "meta": {"mesh": cfg.epsilon, "tol": cfg.tol, "refine": cfg.refine_layers,
                 "cap_mode": cfg.cap_mode,
                 "normal_vertices": P.meta.get("normal_vertices"),
                 "versions": {"icd": __version__, "numpy": np.__version__, "scipy": scipy.__version__}},
        "model": P.model,
        "circles": circles,
        "components": comps,
        "reports": {k: r.to_dict() for k, r in sorted(res.reports.items())},
        "diagnostics": res.diagnostics,
        "complex": P.complex.to_text(),
    })


def emit_json(res) -> str:
    return json.dumps(result_dict(res), indent=1) + "\n"


def packing_from_json(text: str) -> tuple[Packing, list | None]:
    d = json.loads(text)
    roles = None
    if "circles" in d and d["circles"] and "role" in d["circles"][0]:
        roles = [c["role"] for c in sorted(d["circles"], key=lambda c: c.get("id", c.get("vertex")))]
    return Packing.from_dict(d), roles


def cutout_dict(cut) -> dict:
    circles = []
    finest = cut.meta.get("finest", cut.mesh)
    T = cut.complex
    for v in range(T.vertex_count):
        z = complex(cut.embedding[v])
        circles.append({"id": v, "center": [z.real, z.imag], "radius": _cutout_radius(cut, v, finest)})
    return _clean({"schema": SCHEMA, "meta": {"mesh": cut.mesh, "refine": cut.meta.get("refine", 0)},
                   "model": geom.PLANE, "circles": circles,
                   "components": [{"component": k, "cycle": c} for k, c in sorted(cut.cycle_map.items())],
                   "complex": T.to_text()})


def _cutout_radius(cut, v, finest):
    # half the shortest incident edge: the lattice radius at that vertex's level
    z = cut.embedding
    d = min(abs(z[u] - z[v]) for u in cut.complex.flowers[v])
    return float(d / 2.0)


# -- commands -------------------------------------------------------------------------

def _write(path: str | None, suffix: str, text: str):
    if path is None:
        sys.stdout.write(text)
        return
    p = Path(path)
    if p.suffix.lower() in (".json", ".svg"):
        p = p.with_suffix(suffix)
    else:
        p = Path(str(p) + suffix)
    p.parent.mkdir(parents=True, exist_ok=True)
    p.write_text(text)


def _load_domain(path: str) -> DomainSpec:
    return DomainSpec.from_json(Path(path).read_text())


def _config(args):
    from .pipeline import PipelineConfig

    return PipelineConfig(epsilon=args.mesh, tol=args.tol, refine_layers=args.refine,
                          normalize_points=args.normalize)


def _emit(res, args):
    if args.format in ("json", "both"):
        _write(args.out, ".json", emit_json(res))
    if args.format in ("svg", "both"):
        if args.out is None and args.format == "both":
            sys.stdout.write("\n")
        _write(args.out, ".svg", render_svg(res.sphere_packing, STEREO_NORTH, res.roles))
    if getattr(args, "dump_weld", False):
        for k, d in sorted(res.component_discs.items()):
            text = d["param"].to_csv()
            if args.out is None:
                sys.stderr.write(f"# component {k}\n{text}")
            else:
                _write(args.out, f".weld-{k}.csv", text)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "render":
            P, roles = packing_from_json(Path(args.input).read_text())
            _write(args.out, ".svg", render_svg(P, args.view, roles))
            return 0
        domain = _load_domain(args.input)
        if args.command == "cutout":
            cut = refine_cutout(hex_cutout(domain, args.mesh), args.refine)
            if args.format in ("json", "both"):
                _write(args.out, ".json", json.dumps(cutout_dict(cut), indent=1) + "\n")
            if args.format in ("svg", "both"):
                P = Packing(cut.complex, geom.PLANE, cut.embedding,
                            np.array([c["radius"] for c in cutout_dict(cut)["circles"]]))
                _write(args.out, ".svg", render_svg(P, PLANE_VIEW, ["omega"] * len(P.radii)))
            return 0
        from .pipeline import run, verify_intrinsic

        cfg = _config(args)
        res = run(domain, cfg)
        if args.command == "verify":
            res.diagnostics["verify"] = {str(k): verify_intrinsic(res, k) for k in sorted(res.component_discs)}
        _emit(res, args)
        if not res.converged:
            log.error("a stage did not converge")
            return 1
        return 0
    except (OSError, json.JSONDecodeError) as exc:
        print(f"icd: error: {exc}", file=sys.stderr)
        return 2
    except (PackingError, ValueError) as exc:
        print(f"icd: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
