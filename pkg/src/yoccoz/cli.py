"""Command line front end.

    yoccoz <command> [--config run.json] [overrides] --out DIR

Commands: render, trace-ray, build-partition, extract-boxmap, build-nest,
verify, modulus.  A run is configured by one JSON file whose keys are the
fields of RunConfig; flags override single keys.  Every report carries the
tool version, truncation sizes, horizons and resolutions.

Exit codes: 0 pass, 2 horizon-inconclusive, 3 check failure, 4 unsupported
configuration.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import math
import os
import sys
import time
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .errors import (CheckFailed, HorizonExhausted, InvalidArgument, RenormalizationDetected,
                     UnsupportedConfiguration, YoccozError)
from .poly import Polynomial, equipotential_curve, green_array

SUITES = ("round", "covering", "halffactor", "sublemma", "grotzsch", "fixtures")
EXIT_PASS, EXIT_HORIZON, EXIT_FAIL, EXIT_UNSUPPORTED = 0, 2, 3, 4


@dataclass
class RunConfig:
    # polynomial: exactly one of these
    polynomial: dict | None = None       # {"degree": d, "coeffs": [[re, im], ...]}
    c: str | float | None = None         # z^2 + c, strings kept exact
    fibonacci_bits: int | None = None    # z^2 + c_Fib from the kneading bisection
    h0: float | None = None
    n_pc: int = 2000
    horizon: int = 20000
    resolution: int = 512
    piece_resolution: int = 256
    n_theta: int = 256
    levels: int = 5
    depth: int = 3
    angles: list = field(default_factory=lambda: ["1/3", "2/3"])
    render_size: int = 512
    render_half_width: float | None = None
    measure: bool = True
    suite: list = field(default_factory=lambda: list(SUITES[:5]))
    resolutions: list = field(default_factory=lambda: [256, 512])
    fixtures: list = field(default_factory=list)
    annulus: dict | None = None
    deterministic: bool = False
    out: str = "out"

    _POSITIVE_INT = ("n_pc", "horizon", "resolution", "piece_resolution", "n_theta",
                     "render_size", "fibonacci_bits")

    @classmethod
    def from_dict(cls, data):
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(data) - names)
        if unknown:
            raise InvalidArgument(f"unknown config keys: {', '.join(unknown)}")
        cfg = cls(**data)
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def validate(self):
        for name in self._POSITIVE_INT:
            v = getattr(self, name)
            if v is not None and (isinstance(v, bool) or not isinstance(v, int) or v <= 0):
                raise InvalidArgument(f"{name} must be a positive integer, got {v!r}")
        for name in ("h0", "render_half_width"):
            v = getattr(self, name)
            if v is not None and not (isinstance(v, (int, float)) and v > 0 and math.isfinite(v)):
                raise InvalidArgument(f"{name} must be positive, got {v!r}")
        if not isinstance(self.levels, int) or self.levels < 0:
            raise InvalidArgument("levels must be a non-negative integer")
        if not isinstance(self.depth, int) or self.depth < 0:
            raise InvalidArgument("depth must be a non-negative integer")
        if not self.resolutions or any(not isinstance(r, int) or r <= 0 for r in self.resolutions):
            raise InvalidArgument("resolutions must be positive integers")
        bad = sorted(set(self.suite) - set(SUITES))
        if bad:
            raise InvalidArgument(f"unknown suites: {', '.join(bad)}")
        given = [k for k in ("polynomial", "c", "fibonacci_bits") if getattr(self, k) is not None]
        if len(given) > 1:
            raise InvalidArgument(f"give one polynomial source, not {', '.join(given)}")

    def polynomial_obj(self):
        if self.polynomial is not None:
            return Polynomial.from_json(self.polynomial)
        if self.fibonacci_bits is not None:
            from .kneading import fibonacci_parameter

            return Polynomial.quadratic(fibonacci_parameter(self.fibonacci_bits))
        if self.c is not None:
            return Polynomial.quadratic(self.c)
        raise InvalidArgument("no polynomial given (polynomial, c or fibonacci_bits)")

    def to_json(self):
        return {f.name: getattr(self, f.name) for f in dataclasses.fields(self)}


# --- report plumbing ----------------------------------------------------------------

def _clean(x):
    """JSON-safe copy: complex -> [re, im], non-finite floats -> strings."""
    if isinstance(x, dict):
        return {str(k): _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if isinstance(x, (complex, np.complexfloating)):
        return [_clean(float(x.real)), _clean(float(x.imag))]
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if math.isfinite(x) else str(x)
    if isinstance(x, np.bool_):
        return bool(x)
    if isinstance(x, np.ndarray):
        return _clean(x.tolist())
    return x


def _meta(cfg, command, **extra):
    meta = {"tool": "yoccoz", "version": __version__, "command": command,
            "config": cfg.to_json(), "n_pc": cfg.n_pc, "horizon": cfg.horizon,
            "resolution": cfg.resolution, **extra}
    if not cfg.deterministic:
        meta["timestamp"] = time.strftime("%Y-%m-%dT%H:%M:%S%z")
    return meta


def write_json(path, payload):
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "w") as fh:
        json.dump(_clean(payload), fh, indent=2, sort_keys=True)
        fh.write("\n")


def _fit(cfg, poly=None):
    from .puzzle import YoccozPuzzle

    poly = poly or cfg.polynomial_obj()
    return YoccozPuzzle(h0=cfg.h0, resolution=cfg.resolution, n_pc=cfg.n_pc,
                        horizon=cfg.horizon).fit(poly)


# --- render --------------------------------------------------------------------------

def render_green(poly, grid):
    """Potential on the grid cells; zero on the filled Julia set (to the cap)."""
    g, _ = green_array(poly, grid.centers())
    return g


def cmd_render(cfg):
    from .raster import Grid, save_png
    from .rays import trace_ray
    from .angles import RationalAngle

    poly = cfg.polynomial_obj()
    half = cfg.render_half_width or 1.1 * poly.escape_radius / 2
    grid = Grid.square(0, half, cfg.render_size)
    g = render_green(poly, grid)
    overlays = []
    for a in cfg.angles:
        ray = trace_ray(poly, RationalAngle(a), 1e-6)
        overlays.append(ray.trace)
    if cfg.h0 is not None:
        overlays.append(equipotential_curve(poly, cfg.h0))
    # log scale keeps the structure near K visible
    image = np.log1p(g / max(g.max(), 1e-300) * 1e3)
    path = os.path.join(cfg.out, "render.png")
    os.makedirs(cfg.out, exist_ok=True)
    save_png(path, image, overlays, grid)
    write_json(os.path.join(cfg.out, "render.json"),
               {"meta": _meta(cfg, "render", grid=grid.to_json()), "image": "render.png",
                "polynomial": poly.to_json(), "overlays": list(cfg.angles)})
    return EXIT_PASS


# --- rays ------------------------------------------------------------------------------

def cmd_trace_ray(cfg):
    from .angles import RationalAngle
    from .rays import landing_point, trace_ray, write_rays_jsonl

    poly = cfg.polynomial_obj()
    rays = []
    for a in cfg.angles:
        theta = RationalAngle(a)
        ray = trace_ray(poly, theta, 1e-6)
        if ray.landing_point is None or not ray.landing_converged:
            land, ok = landing_point(poly, theta)
            ray = dataclasses.replace(ray, landing_point=land, landing_converged=ok)
        rays.append(ray)
    os.makedirs(cfg.out, exist_ok=True)
    with open(os.path.join(cfg.out, "rays.jsonl"), "w") as fh:
        write_rays_jsonl(rays, fh)
    write_json(os.path.join(cfg.out, "rays.json"),
               {"meta": _meta(cfg, "trace-ray"), "count": len(rays), "file": "rays.jsonl"})
    return EXIT_PASS


# --- partition ---------------------------------------------------------------------------

def cmd_build_partition(cfg):
    from .raster import save_png
    from .puzzle import realize_piece

    puzzle = _fit(cfg)
    eng = puzzle.engine_
    base = puzzle.base_
    pieces = []
    for ci in range(puzzle.n_critical):
        for m in range(cfg.depth + 1):
            p = eng.critical_piece(ci, m)
            mask = realize_piece(eng, p, cfg.piece_resolution)
            pieces.append({**p.with_raster(mask, 0).to_json(), "critical": ci,
                           "ambiguous_cells": mask.meta.get("ambiguous_cells")})
    os.makedirs(cfg.out, exist_ok=True)
    labels = base.label_array(base.grid.centers()).astype(float)
    save_png(os.path.join(cfg.out, "partition.png"), labels, base.boundary_polylines(), base.grid)
    write_json(os.path.join(cfg.out, "partition.json"),
               {"meta": _meta(cfg, "build-partition", piece_resolution=cfg.piece_resolution),
                "partition": base.to_json(), "pieces": pieces})
    return EXIT_PASS


# --- box mapping -----------------------------------------------------------------------

def cmd_extract_boxmap(cfg):
    from .boxmap import audit_box_mapping, extract_box_mapping, is_renormalizable, persistently_recurrent

    puzzle = _fit(cfg)
    code = EXIT_PASS
    report = {"meta": _meta(cfg, "extract-boxmap")}
    verdicts = is_renormalizable(puzzle)
    report["renormalization"] = [v.to_json() for v in verdicts]
    if any(v.verdict == "RENORMALIZABLE-AT-HORIZON" for v in verdicts):
        write_json(os.path.join(cfg.out, "boxmap.json"), report)
        raise RenormalizationDetected("critical point is renormalizable at the horizon",
                                      period=verdicts[0].period, depth=verdicts[0].depth)
    bm = extract_box_mapping(puzzle, resolution=cfg.piece_resolution)
    report["boxmap"] = bm.to_json()
    try:
        report["audit"] = audit_box_mapping(bm)
    except CheckFailed as exc:
        report["audit"] = {"pass": False, "clause": exc.clause, "message": str(exc)}
        code = EXIT_FAIL
    report["persistence"] = [persistently_recurrent(bm, ci).to_json()
                             for ci in range(puzzle.n_critical)]
    write_json(os.path.join(cfg.out, "boxmap.json"), report)
    return code


# --- nest -----------------------------------------------------------------------------------

def cmd_build_nest(cfg):
    from .boxmap import is_renormalizable
    from .modulus import measure_nest, nest_grotzsch
    from .nest import NestRecord, build_nest, write_nest

    puzzle = _fit(cfg)
    os.makedirs(cfg.out, exist_ok=True)
    verdicts = is_renormalizable(puzzle)
    for v in verdicts:
        if v.verdict == "RENORMALIZABLE-AT-HORIZON":
            write_json(os.path.join(cfg.out, "nest.json"),
                       {"meta": _meta(cfg, "build-nest"),
                        "renormalization": [w.to_json() for w in verdicts],
                        "levels": []})
            raise RenormalizationDetected(
                f"critical point {v.critical} is renormalizable at the horizon (period {v.period})",
                period=v.period, depth=v.depth)
    rec = build_nest(puzzle, levels=cfg.levels)
    extra = {}
    if cfg.measure and cfg.levels > 0:
        extra["geometry"] = measure_nest(rec, puzzle, cfg.n_theta, cfg.piece_resolution)
        extra["grotzsch"] = [r.to_json() for r in nest_grotzsch(rec, puzzle, cfg.n_theta)]
    write_nest(rec, cfg.out)
    payload = rec.to_json()
    payload.update(extra)
    payload["meta"] = _meta(cfg, "build-nest", n_theta=cfg.n_theta,
                            piece_resolution=cfg.piece_resolution)
    payload["renormalization"] = [w.to_json() for w in verdicts]
    write_json(os.path.join(cfg.out, "nest.json"), payload)
    with open(os.path.join(cfg.out, "nest_golden.csv"), "w") as fh:
        fh.write(rec.golden())
    if any(not c["pass"] for c in rec.checks):
        return EXIT_FAIL
    if any(not r["pass"] for r in extra.get("grotzsch", [])):
        return EXIT_FAIL
    if rec.stopped is not None or len(rec.levels) < cfg.levels + 1:
        return EXIT_HORIZON
    return EXIT_PASS


# --- verification suite -------------------------------------------------------------------

def _round_suite(cfg):
    from .modulus import modulus, round_annulus

    out = []
    for q in (2, 4, 10):
        truth = math.log(q) / (2 * math.pi)
        vals = {r: modulus(round_annulus(1 / q, 1.0, r)) for r in cfg.resolutions}
        errs = {r: abs(v - truth) / truth for r, v in vals.items()}
        out.append({"check": "round", "inputs": {"R_over_r": q}, "values": vals,
                    "truth": truth, "relative_error": errs, "tolerance": 0.02,
                    "pass": all(e < 0.02 for e in errs.values()),
                    "resolutions": cfg.resolutions})
    return out


def _covering_suite(cfg):
    from .modulus import covering_pair, modulus

    outer = lambda w: (w.real / 1.0) ** 2 + (w.imag / 0.8) ** 2 < 1
    inner = lambda w: np.abs(w - 0.1) < 0.3
    out = []
    for r in cfg.resolutions:
        base, up = covering_pair(outer, inner, 2, r)
        mb, mu = modulus(base), modulus(up)
        ratio = mu / mb
        out.append({"check": "covering", "inputs": {"k": 2, "resolution": r},
                    "values": {"base": mb, "pullback": mu, "ratio": ratio},
                    "tolerance": 0.03, "pass": abs(ratio - 0.5) / 0.5 < 0.03})
    return out


def _halffactor_suite(cfg):
    from .modulus import halffactor_check, halffactor_family

    out = []
    for r in cfg.resolutions:
        for i, (V, B) in enumerate(halffactor_family(r)):
            rep = halffactor_check(V, B)
            out.append({**rep.to_json(), "inputs": {"case": i}})
    return out


def _sublemma_suite(cfg):
    from .modulus import sublemma_check, sublemma_family

    out = []
    for name, pred in sublemma_family().items():
        per_d = {}
        for r in cfg.resolutions:
            mB = None
            for d in (2, 3, 4):
                rep = sublemma_check(d, pred, r, mod_B=mB)
                mB = rep.values["mod_B"]
                per_d.setdefault(d, {})[r] = rep.values["C_implied"]
        for d, by_res in per_d.items():
            vals = list(by_res.values())
            spread = (max(vals) - min(vals)) / max(abs(vals[-1]), 1e-300)
            out.append({"check": "sublemma", "inputs": {"B": name, "d": d},
                        "values": by_res, "relative_spread": spread, "tolerance": 0.10,
                        "pass": all(math.isfinite(v) for v in vals) and spread <= 0.10,
                        "resolutions": cfg.resolutions})
    return out


def _grotzsch_suite(cfg):
    from .modulus import AnnulusRegion, grotzsch_check, round_annulus, unit_grid
    from .raster import GridMask

    out = []
    for r in cfg.resolutions:
        g = unit_grid(r, 1.05)
        z = np.abs(g.centers())
        for label, radii in (("adjacent", (1.0, 0.5, 0.25)), ("separated", (1.0, 0.6, 0.4, 0.2))):
            masks = [GridMask(g, z < radii[0])] + [GridMask(g, z <= q) for q in radii[1:]]
            preds = [lambda w, q=radii[0]: np.abs(w) < q] + \
                    [lambda w, q=q: np.abs(w) <= q for q in radii[1:]]
            if label == "adjacent":
                pairs = [(0, 1), (1, 2)]
            else:
                pairs = [(0, 1), (2, 3)]
            rings = [AnnulusRegion(masks[a], masks[b], {}, preds[a], preds[b]) for a, b in pairs]
            enc = AnnulusRegion(masks[0], masks[-1], {}, preds[0], preds[-1])
            rep = grotzsch_check(rings, enc)
            out.append({**rep.to_json(), "inputs": {"family": label, "radii": radii}})
    return out


def _fixture_suite(cfg):
    from .modulus import AnnulusRegion, unit_grid
    from .raster import GridMask

    out = []
    for path in cfg.fixtures:
        data = np.load(path)
        outer, inner = data["outer"].astype(bool), data["inner"].astype(bool)
        g = unit_grid(outer.shape[0], float(data["half_width"]) if "half_width" in data else 1.05)
        entry = {"check": "annulus-audit", "inputs": {"fixture": os.path.basename(path)}}
        try:
            region = AnnulusRegion(GridMask(g, outer), GridMask(g, inner))
            entry["values"] = region.check()
            entry["pass"] = True
        except (CheckFailed, InvalidArgument) as exc:
            entry["pass"] = False
            entry["clause"] = getattr(exc, "clause", None) or "annulus-containment"
            entry["message"] = str(exc)
        out.append(entry)
    return out


_SUITE_FNS = {"round": _round_suite, "covering": _covering_suite,
              "halffactor": _halffactor_suite, "sublemma": _sublemma_suite,
              "grotzsch": _grotzsch_suite, "fixtures": _fixture_suite}


def cmd_verify(cfg):
    if len(cfg.resolutions) < 2:
        raise InvalidArgument("verify needs two resolutions")
    suites = list(cfg.suite)
    if cfg.fixtures and "fixtures" not in suites:
        suites.append("fixtures")
    checks = []
    for name in suites:
        checks.extend(_SUITE_FNS[name](cfg))
    failed = [c for c in checks if not c["pass"]]
    summary = {"suites": suites, "checks": len(checks), "failed": len(failed),
               "failed_clauses": sorted({c.get("clause") or c["check"] for c in failed}),
               "pass": not failed}
    write_json(os.path.join(cfg.out, "verify.json"),
               {"meta": _meta(cfg, "verify", resolutions=cfg.resolutions),
                "summary": summary, "checks": checks})
    return EXIT_PASS if not failed else EXIT_FAIL


# --- modulus ------------------------------------------------------------------------------------

def cmd_modulus(cfg):
    from .modulus import (AnnulusRegion, modulus, piece_modulus, refined_modulus, round_annulus,
                          unit_grid)
    from .raster import GridMask

    spec = cfg.annulus or {"kind": "round", "r": 0.5, "R": 1.0}
    kind = spec.get("kind")
    res = cfg.resolution
    result = {"inputs": spec}
    if kind == "round":
        r, R = float(spec["r"]), float(spec["R"])
        ref = refined_modulus(lambda n: round_annulus(r, R, n), res)
        result.update(ref.to_json(), truth=math.log(R / r) / (2 * math.pi))
    elif kind == "masks":
        outer = np.load(spec["outer"]).astype(bool)
        inner = np.load(spec["inner"]).astype(bool)
        g = unit_grid(outer.shape[0], float(spec.get("half_width", 1.05)))
        region = AnnulusRegion(GridMask(g, outer), GridMask(g, inner))
        result.update(value=modulus(region), resolution=outer.shape[0],
                      audit=region.audit(), note="fixed raster: no refinement possible")
    elif kind == "pieces":
        puzzle = _fit(cfg)
        eng = puzzle.engine_
        ci = int(spec.get("critical", 0))
        outer = eng.critical_piece(ci, int(spec["outer_depth"]))
        inner = eng.critical_piece(ci, int(spec["inner_depth"]))
        coarse = piece_modulus(puzzle, outer, inner, cfg.n_theta)
        fine = piece_modulus(puzzle, outer, inner, 2 * cfg.n_theta)
        change = abs(fine - coarse) / max(abs(fine), 1e-300)
        result.update(value=fine, coarse=coarse, n_theta=2 * cfg.n_theta,
                      relative_change=change, accepted=change < 0.03)
    else:
        raise InvalidArgument(f"unknown annulus kind {kind!r}")
    write_json(os.path.join(cfg.out, "modulus.json"),
               {"meta": _meta(cfg, "modulus", n_theta=cfg.n_theta), "result": result})
    accepted = result.get("accepted", True)
    return EXIT_PASS if accepted else EXIT_FAIL


COMMANDS = {"render": cmd_render, "trace-ray": cmd_trace_ray,
            "build-partition": cmd_build_partition, "extract-boxmap": cmd_extract_boxmap,
            "build-nest": cmd_build_nest, "verify": cmd_verify, "modulus": cmd_modulus}


# --- argument parsing ---------------------------------------------------------------------------

def _csv_list(conv):
    def parse(s):
        return [conv(x) for x in s.split(",") if x]
    return parse


def build_parser():
    parser = argparse.ArgumentParser(prog="yoccoz", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"yoccoz {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="run configuration (JSON)")
        p.add_argument("--out", help="output directory")
        p.add_argument("--c", dest="c", help="parameter of z^2 + c")
        p.add_argument("--poly", dest="polynomial", type=json.loads,
                       help='polynomial JSON {"degree": d, "coeffs": [[re, im], ...]}')
        p.add_argument("--fibonacci-bits", type=int)
        p.add_argument("--h0", type=float)
        p.add_argument("--n-pc", type=int)
        p.add_argument("--horizon", type=int)
        p.add_argument("--resolution", type=int)
        p.add_argument("--piece-resolution", type=int)
        p.add_argument("--n-theta", type=int)
        p.add_argument("--levels", type=int)
        p.add_argument("--depth", type=int)
        p.add_argument("--angle", dest="angles", action="append")
        p.add_argument("--render-size", type=int)
        p.add_argument("--suite", type=_csv_list(str))
        p.add_argument("--resolutions", type=_csv_list(int))
        p.add_argument("--fixture", dest="fixtures", action="append")
        p.add_argument("--annulus", type=json.loads)
        p.add_argument("--no-measure", dest="measure", action="store_false", default=None)
        p.add_argument("--deterministic", action="store_true", default=None)
    return parser


def config_from_args(args):
    data = {}
    if args.config:
        with open(args.config) as fh:
            data = json.load(fh)
    for key, value in vars(args).items():
        if key in ("command", "config") or value is None:
            continue
        data[key] = value
    # a polynomial flag replaces any polynomial source of the file
    for key in ("c", "polynomial", "fibonacci_bits"):
        if getattr(args, key, None) is not None:
            for other in ("c", "polynomial", "fibonacci_bits"):
                if other != key:
                    data.pop(other, None)
    return RunConfig.from_dict(data)


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = config_from_args(args)
        code = COMMANDS[args.command](cfg)
    except YoccozError as exc:
        print(f"yoccoz {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code
    except (OSError, json.JSONDecodeError) as exc:
        print(f"yoccoz {args.command}: {exc}", file=sys.stderr)
        return EXIT_FAIL
    return code


if __name__ == "__main__":
    sys.exit(main())
