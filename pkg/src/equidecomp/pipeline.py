"""Experiment orchestration: seeded end-to-end runs with JSON reports.

A run executes generator sampling, window/mask construction, the cube
discrepancy fit, flow stages, toast layers, integer rounding, Voronoi
matching (optionally with non-null pre-selection) and the box-dimension
trend, collecting per-stage metrics with their provenance (measured vs
configured).  Reports are deterministic functions of the configuration:
the report hash excludes wall-clock timings, and artifacts are written
atomically.
"""
from __future__ import annotations

import hashlib
import json
import math
import os
import random
import tempfile
import time
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any

import numpy as np

from . import __version__
from .discrepancy import cube_discrepancy_sweep
from .discrete import build_discrete_set
from .errors import ConfigError, EquidecompError, WindowTooSmallError
from .fixedpoint import DEFAULT_BITS, from_float
from .generators import sample_generators
from .matching import (assign_pieces, box_dimension_estimate, build_voronoi,
                       choose_voronoi_r, path_flow_cell_aggregate,
                       preselect_nonnull, verify_equidecomposition)
from .regions import Box, Disk, Region, Strip, Union
from .schedule import make_schedule
from .sequence import (round_sequence, stage_values_for_layers,
                       verify_rounding)
from .toast import build_layers, tilde_remove, validate_toast
from .window import Window


def region_from_config(obj: dict[str, Any], bits: int) -> Region:
    """Regions in configs use plain fractions of the torus (floats quantized
    once to fixed point) or exact hex fields."""
    kind = obj["kind"]
    m = 1 << bits

    def fx(v):
        if isinstance(v, str):
            return int(v, 16)
        return from_float(float(v), bits)

    if kind == "disk":
        if "radius" in obj:
            radius = fx(obj["radius"])
        else:
            radius = int(math.sqrt(float(obj["area"]) / math.pi) * m)
        return Disk(tuple(fx(c) for c in obj["center"]), radius, bits)
    if kind == "box":
        if "sides" in obj:
            sides = tuple(fx(s) for s in obj["sides"])
        else:
            side = int(math.sqrt(float(obj["area"])) * m)
            sides = (side, side)
        corner = tuple(fx(c) for c in obj["corner"])
        if obj.get("centered"):
            corner = tuple((c - s // 2) % m for c, s in zip(corner, sides))
        return Box(corner, sides, bits)
    if kind == "strip":
        return Strip(fx(obj["a"]), fx(obj["b"]), obj["k"], bits)
    if kind == "union":
        return Union(region_from_config(obj["left"], bits),
                     region_from_config(obj["right"], bits))
    raise ConfigError(f"unknown region kind {kind!r}")


@dataclass
class ExperimentConfig:
    seed: int = 1
    k: int = 2
    d: int = 3
    bits: int = DEFAULT_BITS
    W: int = 64
    freeness_radius: int = 64
    regionA: dict[str, Any] = field(default_factory=lambda: {
        "kind": "disk", "center": [0.25, 0.25], "area": 0.19})
    regionB: dict[str, Any] = field(default_factory=lambda: {
        "kind": "box", "corner": [0.75, 0.25], "area": 0.19,
        "centered": True})
    schedule: dict[str, Any] = field(default_factory=lambda: {
        "preset": "relaxed", "depth": 1, "r": [8], "r_prime": [2],
        "r0_prime": 2})
    roles: str = "J"
    tilde: bool = False
    stages: list[int] = field(default_factory=lambda: [5])
    gate_mode: str = "measured"
    focus_margin: int | None = None
    voronoi_r_start: int = 2
    voronoi_r_max: int = 32
    preselect: bool = False
    preselect_spacing: int | None = None
    discrepancy_radii: list[int] = field(default_factory=lambda: [4, 8, 16])
    discrepancy_anchors: int = 8
    box_dim: bool = True
    box_dim_resolutions: list[int] = field(default_factory=lambda: [64, 128, 256])
    render_cells: int = 256
    point_budget: int = 80_000_000
    out_dir: str | None = None

    @staticmethod
    def from_json(obj: dict[str, Any]) -> "ExperimentConfig":
        cfg = ExperimentConfig()
        for key, val in obj.items():
            if not hasattr(cfg, key):
                raise ConfigError(f"unknown config field {key!r}")
            setattr(cfg, key, val)
        cfg.validate()
        return cfg

    def validate(self) -> None:
        if self.d < 2:
            raise ConfigError("rounding requires d >= 2 (no triangles in d=1)")
        if self.k < 1:
            raise ConfigError("k must be >= 1")
        if len(self.stages) < self.schedule.get("depth", 1) * len(self.roles):
            # one stage per layer in arrival order
            raise ConfigError(
                f"need {self.schedule.get('depth', 1) * len(self.roles)} "
                f"stages for roles {self.roles!r} at this depth")
        mmax = max(self.stages)
        if (1 << mmax) - 1 >= self.W:
            raise ConfigError(
                f"stage {mmax} needs half-width above {(1 << mmax) - 1}")
        side = 2 * self.W + 1
        if side ** self.d > self.point_budget:
            raise ConfigError("window exceeds the point budget")

    def to_json(self) -> dict[str, Any]:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


def json_default(o: Any):
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.floating):
        return float(o)
    if isinstance(o, np.bool_):
        return bool(o)
    if isinstance(o, Fraction):
        return str(o)
    if isinstance(o, (tuple, set)):
        return list(o)
    return str(o)


def canonical_json(obj: Any) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"),
                      default=json_default)


def report_hash(report: dict[str, Any]) -> str:
    scrubbed = {k: v for k, v in report.items()
                if k not in ("timings", "hash", "versions")}
    return hashlib.sha256(canonical_json(scrubbed).encode()).hexdigest()


def atomic_write(path: str, text: str) -> None:
    dirname = os.path.dirname(os.path.abspath(path))
    os.makedirs(dirname, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=dirname, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as f:
            f.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def run(config: ExperimentConfig) -> dict[str, Any]:
    """Execute the pipeline; returns the report (and writes artifacts when
    out_dir is set)."""
    config.validate()
    t_all = time.time()
    timings: dict[str, float] = {}
    report: dict[str, Any] = {"config": config.to_json(), "stages": {}}

    def clock(name, fn):
        t0 = time.time()
        out = fn()
        timings[name] = round(time.time() - t0, 3)
        return out

    gen = clock("generators", lambda: sample_generators(
        config.seed, config.k, config.d, config.bits, config.freeness_radius))
    report["stages"]["generators"] = {
        "redraws": gen.redraws, "freeness_radius": config.freeness_radius,
        "provenance": "measured"}

    arng = random.Random(("anchor", config.seed))
    anchor = tuple(arng.getrandbits(config.bits) for _ in range(config.k))
    shapeA = region_from_config(config.regionA, config.bits)
    shapeB = region_from_config(config.regionB, config.bits)
    w = clock("window", lambda: Window(gen, anchor, config.W, shapeA, shapeB,
                                       point_budget=config.point_budget))
    countA = int(w.maskA.sum())
    countB = int(w.maskB.sum())
    report["stages"]["window"] = {
        "points": w.side ** w.d, "A_points": countA, "B_points": countB,
        "provenance": "measured"}

    def _sweep():
        radii = config.discrepancy_radii
        reach = max(radii) + 1
        rng = random.Random(("anchors", config.seed))
        lim = config.W - reach
        if lim < 0:
            raise WindowTooSmallError("discrepancy radii exceed the window")
        anchors = [tuple(rng.randrange(-lim, lim + 1) for _ in range(w.d))
                   for _ in range(config.discrepancy_anchors)]
        return cube_discrepancy_sweep(w, shapeA, radii, anchors)

    sweep = clock("discrepancy", _sweep)
    fitted_c = sweep.fitted_constant
    report["stages"]["discrepancy"] = dict(sweep.to_json(),
                                           provenance="measured")

    sched = make_schedule(**config.schedule)
    report["stages"]["schedule"] = dict(sched.to_json(),
                                        provenance="configured")
    depth = config.schedule.get("depth", sched.depth)
    seq = clock("toast", lambda: build_layers(w, sched, depth,
                                              roles=config.roles))
    if config.tilde:
        seq = tilde_remove(seq)
    validation = clock("toast_validation", lambda: validate_toast(seq))
    report["stages"]["toast"] = {
        "validation_passed": validation["passed"],
        "witnesses": validation["witnesses"][:5],
        "clipped_excluded": validation["clipped_excluded"],
        "max_cardinality": validation["max_cardinality"],
        "layers": validation["layers"],
        "provenance": "measured"}

    focus = None
    if config.focus_margin is not None:
        focus = w.valid_mask(config.focus_margin)
    vals = clock("flow_values", lambda: stage_values_for_layers(
        w, seq, config.stages, focus))
    res = clock("rounding", lambda: round_sequence(
        w, seq, config.stages, vals, gate_mode=config.gate_mode,
        fitted_c=fitted_c, eps=None if fitted_c is None else 0.4,
        focus=focus))
    rverify = verify_rounding(w, res)
    report["stages"]["rounding"] = dict(res.to_json(), verify=rverify,
                                        provenance="measured")

    def _match():
        r, vor, cert = choose_voronoi_r(
            w, res.flow, res.resolved, config.voronoi_r_start,
            config.voronoi_r_max, preselect_margin=config.preselect)
        cell_filter = cert.pop("pass_mask", None)
        extra = None
        maskA = maskB = None
        presel = {}
        if config.preselect:
            pa0 = assign_pieces(w, res.flow, vor, res.resolved,
                                cell_filter=cell_filter)
            offs = pa0.used_offsets()
            sel, edge_deltas, info = preselect_nonnull(
                w, offs, r, res.resolved, config.preselect_spacing)
            extra = path_flow_cell_aggregate(w, vor, edge_deltas)
            maskA = w.maskA.copy()
            maskB = w.maskB.copy()
            for t, p in sel.items():
                maskA[w.index_of(p)] = False
                img = tuple(a + b for a, b in zip(p, t))
                maskB[w.index_of(img)] = False
            presel = {"selected": sel, "info": info}
        pa = assign_pieces(w, res.flow, vor, res.resolved, extra_flow=extra,
                           maskA=maskA, maskB=maskB, cell_filter=cell_filter)
        if config.preselect and presel["selected"]:
            for t, p in presel["selected"].items():
                pa.assignment[p] = tuple(a + b for a, b in zip(p, t))
                pa.pieces.setdefault(t, []).append(p)
                pa.preselected.setdefault(t, []).append(p)
            for v in pa.pieces.values():
                v.sort()
        return r, vor, cert, pa, presel

    r, vor, cert, pa, presel = clock("matching", _match)
    mverify = verify_equidecomposition(pa, w, trust=res.resolved)
    locality_radius = ((1 << max(config.stages)) - 1) + 6 * r + 2
    valid_region = w.valid_mask(min(locality_radius, w.W - 1))
    mverify_valid = verify_equidecomposition(pa, w, trust=valid_region)
    report["stages"]["matching"] = {
        "voronoi_r": r, "certificate": cert, "pieces": pa.to_json(),
        "verify": mverify,
        "declared_locality_radius": locality_radius,
        "b_coverage_of_resolved": mverify["b_coverage"],
        "b_coverage_of_valid_region": mverify_valid["b_coverage"],
        "preselect": {k: (len(v["selected"]) if k == "selected" else v)
                      for k, v in presel.items()} if presel else None,
        "provenance": "measured"}

    if config.box_dim and w.k == 2:
        bd = clock("box_dim", lambda: box_dimension_estimate(
            pa, w, config.box_dim_resolutions, config.render_cells,
            trust=res.resolved))
        report["stages"]["box_dim"] = dict(bd, provenance="measured")

    report["passed"] = bool(
        rverify["passed"] and mverify["passed"]
        and report["stages"]["toast"]["validation_passed"])
    report["timings"] = dict(timings, total=round(time.time() - t_all, 3))
    report["versions"] = {"equidecomp": __version__, "numpy": np.__version__}
    report["hash"] = report_hash(report)
    if config.out_dir:
        atomic_write(os.path.join(config.out_dir, "report.json"),
                     json.dumps(report, indent=1, default=json_default))
        assignment_doc = {
            "config_hash": report["hash"],
            "r": pa.r,
            "pieces": {",".join(map(str, k)): [list(p) for p in v]
                       for k, v in sorted(pa.pieces.items())},
            "unresolved_count": len(pa.unresolved),
        }
        atomic_write(os.path.join(config.out_dir, "assignment.json"),
                     json.dumps(assignment_doc, default=json_default))
    report["_objects"] = {"window": w, "assignment": pa, "rounding": res,
                          "toast": seq}
    return report
