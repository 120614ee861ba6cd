"""Single entry point: wires JSON experiment configs to module operations.

Every run writes a deterministic bundle into --out: report.json + report.csv
(long format), any binary fields, and a sha256 manifest.  Exit codes: 0 on
success, 2 on configuration errors, 3 on numerical failures (the message
names the operation and the offending input).
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field as dc_field
from typing import Optional

import numpy as np

from . import auxmetric, certify, cubature, ineqlab, pde, weights
from .errors import (BracketFailure, ConfigError, Degenerate, DomainError,
                     EllipticityViolation, InsufficientSamples, NoConvergence,
                     NotPSD, QuadratureNonConvergence, SingularSample)

NUMERICAL_ERRORS = (BracketFailure, Degenerate, DomainError, EllipticityViolation,
                    InsufficientSamples, NoConvergence, NotPSD,
                    QuadratureNonConvergence, SingularSample)

BUILTIN_WEIGHTS = {
    "identity": {"kind": "constant", "n": 3, "d": 2, "mat": [[1.0, 0.0], [0.0, 1.0]]},
    "rank-one-radial": {"kind": "rank_one_radial", "n": 3, "d": 2},
    "diag-poly": {"kind": "scalar_diag", "n": 3, "d": 2, "entries": [
        {"kind": "poly_scalar", "n": 3, "coeffs": [0.0, 1.0]},
        {"kind": "poly_scalar", "n": 3, "coeffs": [0.0, 0.0, 1.0]}]},
    "diag-ordered": {"kind": "scalar_diag", "n": 3, "d": 2, "entries": [
        {"kind": "poly_scalar", "n": 3, "coeffs": [0.0, 1.0]},
        {"kind": "poly_scalar", "n": 3, "coeffs": [0.0, 1.0, 1.0]}]},
    "power-13": {"kind": "power", "n": 3, "d": 2,
                 "A": [[2.0, 0.5], [0.5, 1.0]], "gamma": [1.0, 3.0]},
}


@dataclass
class ExperimentConfig:
    """Resolved configuration of one run; embedded verbatim in every output."""

    subcommand: str
    weight: Optional[dict] = None
    family: Optional[dict] = None
    grid: Optional[dict] = None
    quad: dict = dc_field(default_factory=lambda: {"tol": 1e-6, "max_level": 7})
    seed: int = 1
    out: str = "out"
    threads: int = 1
    params: dict = dc_field(default_factory=dict)

    def to_jsonable(self) -> dict:
        return {"subcommand": self.subcommand, "weight": self.weight,
                "family": self.family, "grid": self.grid, "quad": self.quad,
                "seed": self.seed, "out": self.out, "threads": self.threads,
                "params": self.params}


def load_weight(spec: str) -> weights.MatrixWeight:
    if spec in BUILTIN_WEIGHTS:
        return weights.from_config(BUILTIN_WEIGHTS[spec])
    if not os.path.exists(spec):
        raise ConfigError(f"weight descriptor {spec!r} is neither a builtin "
                          f"({', '.join(sorted(BUILTIN_WEIGHTS))}) nor a file")
    with open(spec, encoding="utf-8") as fh:
        return weights.from_config(json.load(fh))


def _weight_cfg(spec: str) -> dict:
    if spec in BUILTIN_WEIGHTS:
        return BUILTIN_WEIGHTS[spec]
    with open(spec, encoding="utf-8") as fh:
        return json.load(fh)


def load_family(spec: Optional[str], default: Optional[dict] = None) -> cubature.CubeFamily:
    if spec is None:
        cfg = default or {"generator": "dyadic", "box": 8.0, "count": 16,
                          "r_min": 0.5, "r_max": 4.0}
        return cubature.CubeFamily(**cfg)
    if os.path.exists(spec):
        with open(spec, encoding="utf-8") as fh:
            return cubature.CubeFamily.from_config(json.load(fh))
    try:
        return cubature.CubeFamily.from_config(json.loads(spec))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"family spec {spec!r} is neither a file nor inline JSON") from exc


def write_manifest(out_dir: str, paths: list) -> str:
    lines = []
    for p in sorted(paths):
        h = hashlib.sha256()
        with open(p, "rb") as fh:
            h.update(fh.read())
        lines.append(f"{h.hexdigest()}  {os.path.basename(p)}")
    mpath = os.path.join(out_dir, "manifest.txt")
    with open(mpath, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
    return mpath


def _finish(report: ineqlab.Report, cfg: ExperimentConfig, extra_paths=()) -> int:
    os.makedirs(cfg.out, exist_ok=True)
    paths = report.write(cfg.out) + list(extra_paths)
    write_manifest(cfg.out, paths)
    return 0


# ---------------------------------------------------------------------------
# subcommand runners
# ---------------------------------------------------------------------------

def run_certify(cfg: ExperimentConfig) -> int:
    W = weights.from_config(cfg.weight)
    fam = cubature.CubeFamily.from_config(cfg.family)
    cls = cfg.params["class"]
    p = float(cfg.params.get("p", 2.0))
    report = ineqlab.Report(cfg.to_jsonable())
    wname = cfg.weight.get("kind", "weight")
    if cls == "cross":
        res = certify.cross_checks(W, p, fam, seed=cfg.seed)
        report.add_result("cross", res)
        for name, rep in res["reports"].items():
            if rep is not None:
                report.add_row("certify", wname, f"{name}_estimate", "-",
                               rep["constant_estimate"])
                report.add_row("certify", wname, f"{name}_passed", "-",
                               float(rep["passed"]))
        report.add_result("disagreements", res["disagreements"])
    else:
        runner = {
            "bp": lambda: certify.bp_constant(W, p, fam, seed=cfg.seed, stability=True),
            "bp-det": lambda: certify.bp_det_check(W, p, fam, seed=cfg.seed, stability=True),
            "nd": lambda: certify.nd_check(W, fam),
            "ainf": lambda: certify.ainf_profile(W, cfg.params.get("eps", (0.1, 0.25, 0.5)),
                                                 fam, seed=cfg.seed, stability=True),
            "a2inf": lambda: certify.a2inf_constant(W, fam, stability=True),
            "apinf": lambda: certify.apinf_constant(W, p, fam, seed=cfg.seed, stability=True),
            "nc": lambda: certify.nc_constant(
                W, cfg.params.get("centers") or [c.center for c in fam.cubes()[:4]]),
            "rbm": lambda: certify.rbm_constant(W, fam, stability=True),
        }.get(cls)
        if runner is None:
            raise ConfigError(f"unknown certifier class {cls!r}")
        rep = runner()
        report.add_result(cls, rep.to_jsonable())
        per_cube = rep.details.get("per_cube", [])
        cubes = fam.cubes() if len(per_cube) == len(fam.cubes()) else None
        for i, v in enumerate(per_cube):
            where = list(cubes[i].center) + [cubes[i].r] if cubes else i
            report.add_row("certify", wname, f"{cls}_per_cube", where, v)
        report.add_row("certify", wname, f"{cls}_estimate", "-", rep.constant_estimate)
        report.add_row("certify", wname, f"{cls}_passed", "-", float(rep.passed))
    return _finish(report, cfg)


def _boxgrid_from_cfg(cfg: ExperimentConfig) -> auxmetric.BoxGrid:
    g = cfg.grid or {}
    return auxmetric.BoxGrid(L=float(g.get("L", 2.0)), m=int(g.get("m", 12)))


def run_aux(cfg: ExperimentConfig) -> int:
    W = weights.from_config(cfg.weight)
    grid = _boxgrid_from_cfg(cfg)
    kind = cfg.params.get("kind", "lower")
    fld = auxmetric.aux_field(W, grid, kind=kind)
    report = ineqlab.Report(cfg.to_jsonable())
    report.add_result("kind", kind)
    report.add_result("min", float(fld.values.min()))
    report.add_result("max", float(fld.values.max()))
    os.makedirs(cfg.out, exist_ok=True)
    bpath = os.path.join(cfg.out, f"aux_{kind}.field")
    auxmetric.save_field_binary(bpath, fld)
    cpath = os.path.join(cfg.out, f"aux_{kind}.csv")
    auxmetric.field_to_csv(cpath, fld)
    nodes = grid.nodes()
    for i in range(0, grid.size, max(1, grid.size // 64)):
        report.add_row("aux", cfg.weight.get("kind", "weight"), f"m_{kind}",
                       nodes[i], fld.values[i])
    return _finish(report, cfg, [bpath, cpath])


def run_agmon(cfg: ExperimentConfig) -> int:
    W = weights.from_config(cfg.weight)
    grid = _boxgrid_from_cfg(cfg)
    kind = cfg.params.get("kind", "lower")
    norm = cfg.params.get("norm", "linf")
    src = cfg.params.get("source") or [grid.m // 2] * grid.n
    fld = auxmetric.aux_field(W, grid, kind=kind)
    dist = auxmetric.agmon_field(fld, tuple(int(s) for s in src), norm=norm)
    report = ineqlab.Report(cfg.to_jsonable())
    report.add_result("kind", kind)
    report.add_result("norm", norm)
    report.add_result("max_distance", float(dist.values.max()))
    os.makedirs(cfg.out, exist_ok=True)
    bpath = os.path.join(cfg.out, f"agmon_{kind}.field")
    auxmetric.save_field_binary(bpath, auxmetric.AuxField(
        grid=grid, values=np.maximum(dist.values, 1e-300), kind=f"d_{kind}"))
    nodes = grid.nodes()
    for i in range(0, grid.size, max(1, grid.size // 64)):
        report.add_row("agmon", cfg.weight.get("kind", "weight"), f"d_{kind}",
                       nodes[i], dist.values[i])
    return _finish(report, cfg, [bpath])


def _grid3_from_cfg(cfg: ExperimentConfig) -> pde.Grid3:
    g = cfg.grid or {}
    return pde.Grid3(L=float(g.get("L", 2.0)), N=int(g.get("N", 13)))


def run_green(cfg: ExperimentConfig) -> int:
    W = weights.from_config(cfg.weight)
    grid = _grid3_from_cfg(cfg)
    pole = tuple(int(v) for v in cfg.params.get("pole") or [grid.N // 2] * 3)
    op = pde.assemble(W, None, grid)
    solver = pde.DirectSolver(op) if grid.N <= 20 else None
    gf = pde.green_field(op, pole, solver=solver)
    report = ineqlab.Report(cfg.to_jsonable())
    report.add_result("pole", list(pole))
    report.add_result("residual", gf.residual)
    os.makedirs(cfg.out, exist_ok=True)
    bpath = os.path.join(cfg.out, "green.field")
    pde.save_green_binary(bpath, gf)
    # CSV slice: the axis lines through the pole
    wname = cfg.weight.get("kind", "weight")
    norms = np.linalg.norm(gf.blocks, ord=2, axis=(1, 2))
    for axis in range(3):
        for i in range(grid.N):
            multi = list(pole)
            multi[axis] = i
            idx = grid.index(multi)
            report.add_row("green", wname, f"norm_axis{axis}", grid.node(idx),
                           norms[idx])
    return _finish(report, cfg, [bpath])


def run_decay(cfg: ExperimentConfig) -> int:
    W = weights.from_config(cfg.weight)
    grid = _grid3_from_cfg(cfg)
    pole = tuple(int(v) for v in cfg.params.get("pole") or [grid.N // 2] * 3)
    op_v = pde.assemble(W, None, grid)
    op_0 = pde.assemble(None, None, grid, d=W.d)
    solver_v = pde.DirectSolver(op_v) if grid.N <= 20 else None
    solver_0 = pde.DirectSolver(op_0) if grid.N <= 20 else None
    gv = pde.green_field(op_v, pole, solver=solver_v)
    g0 = pde.green_field(op_0, pole, solver=solver_0)
    bgrid = grid.to_boxgrid()
    fld = auxmetric.aux_field(W, bgrid, kind="lower")
    dist = auxmetric.agmon_field(fld, gv.pole)
    fit = ineqlab.envelope_fit(gv, dist, projector="norm", mode="upper")
    p = float(cfg.params.get("p", 2.0))
    q = min(p, 2.9)  # n = 3 exponent window
    alpha = 2.0 - 3.0 / q
    report = ineqlab.Report(cfg.to_jsonable())
    report.add_result("upper_fit", fit.to_jsonable())
    wname = cfg.weight.get("kind", "weight")
    report.add_row("decay", wname, "eps_hat", "-", fit.eps_hat)
    report.add_row("decay", wname, "r2", "-", fit.r2)
    try:
        diff = ineqlab.difference_bound_fit(gv, g0, W, alpha)
        report.add_result("difference_fit", diff)
        report.add_row("decay", wname, "difference_exponent", "-",
                       diff["fitted_exponent"])
    except InsufficientSamples as exc:
        report.add_result("difference_fit", f"skipped: {exc}")
    return _finish(report, cfg)


def run_fp(cfg: ExperimentConfig) -> int:
    W = weights.from_config(cfg.weight)
    grid = _boxgrid_from_cfg(cfg)
    form = cfg.params.get("form", "lower")
    count = int(cfg.params.get("count", 6))
    fields = ineqlab.test_function_library(grid, W.d, count=count, seed=cfg.seed)
    if form == "lower":
        aux = auxmetric.aux_field(W, grid, kind="lower")
    elif form == "upper":
        aux = auxmetric.aux_field(W, grid, kind="upper")
    else:
        aux = auxmetric.aux_field(weights.NormDiagWeight(base=W), grid, kind="lower")
    report = ineqlab.Report(cfg.to_jsonable())
    wname = cfg.weight.get("kind", "weight")
    ratios = []
    for i, f in enumerate(fields):
        ratio = ineqlab.fp_ratio(W, f, form, aux=aux)
        ratios.append(ratio)
        report.add_row("fp", wname, f"ratio_{form}", i, ratio)
    report.add_result("ratios", ratios)
    report.add_result("max_ratio", max(ratios))
    return _finish(report, cfg)


def run_poincare(cfg: ExperimentConfig) -> int:
    W = weights.from_config(cfg.weight)
    cube_spec = cfg.params.get("cube") or [0.0, 0.0, 0.0, 1.0]
    Q = cubature.Cube(center=np.asarray(cube_spec[:3], dtype=float),
                      r=float(cube_spec[3]))
    report = ineqlab.Report(cfg.to_jsonable())
    wname = cfg.weight.get("kind", "weight")
    ratios = []
    for comp in range(W.d):
        for axis in range(3):
            u = ineqlab.linear_component(axis, comp, W.d)
            ratio = ineqlab.poincare_ratio(W, Q, u)
            ratios.append(ratio)
            report.add_row("poincare", wname, "ratio", u.label, ratio)
    report.add_result("ratios", ratios)
    return _finish(report, cfg)


def run_counterexample(cfg: ExperimentConfig) -> int:
    R_list = [float(v) for v in cfg.params.get("R") or (10.0, 20.0, 40.0, 80.0)]
    report = ineqlab.Report(cfg.to_jsonable())
    res = ineqlab.counterexample_fp_failure(R_list)
    ctrl = ineqlab.counterexample_fp_failure(R_list, control=True)
    report.add_result("fp_failure", res)
    report.add_result("fp_control", ctrl)
    for row in res["rows"]:
        report.add_row("counterexample", "rank_one_radial", "fp_ratio",
                       row["R"], row["ratio"])
    for row in ctrl["rows"]:
        report.add_row("counterexample", "identity", "fp_ratio",
                       row["R"], row["ratio"])
    report.add_row("counterexample", "rank_one_radial", "slope", "-", res["slope"])
    report.add_row("counterexample", "identity", "slope", "-", ctrl["slope"])
    return _finish(report, cfg)


def run_landscape(cfg: ExperimentConfig) -> int:
    W = weights.from_config(cfg.weight)
    grid = _grid3_from_cfg(cfg)
    probes = cfg.params.get("probes")
    if probes is None:
        mid = grid.N // 2
        count = int(cfg.params.get("n_probes", 3))
        offsets = [(0, 0, 0), (-mid // 2, 0, 0), (0, -mid // 2, 0), (0, 0, -mid // 2),
                   (mid // 3, mid // 3, 0), (0, mid // 3, mid // 3),
                   (mid // 3, 0, mid // 3), (-mid // 3, -mid // 3, 0),
                   (0, -mid // 3, -mid // 3), (mid // 2, 0, 0)]
        probes = [(mid + a, mid + b, mid + c) for a, b, c in offsets[:count]]
    op = pde.assemble(W, None, grid)
    solver = pde.DirectSolver(op) if grid.N <= 20 else None
    report = ineqlab.Report(cfg.to_jsonable())
    wname = cfg.weight.get("kind", "weight")
    for pr in probes:
        res = pde.landscape(op, tuple(int(v) for v in pr), solver=solver)
        report.add_result(f"probe_{tuple(pr)}", res)
        report.add_row("landscape", wname, "u", res["x"], res["u"])
        report.add_row("landscape", wname, "c_lower", res["x"], res["c_lower"])
        report.add_row("landscape", wname, "c_upper", res["x"], res["c_upper"])
    return _finish(report, cfg)


def run_all(cfg: ExperimentConfig) -> int:
    """The experiment catalog end-to-end, with per-stage wall budgets."""
    scale = cfg.params.get("scale", "quick")
    budget = float(cfg.params.get("budget", 30.0)) * 60.0
    t0 = time.time()
    report = ineqlab.Report(cfg.to_jsonable())
    out_paths: list = []
    os.makedirs(cfg.out, exist_ok=True)

    quick = scale == "quick"
    fam = cubature.CubeFamily(generator="dyadic", box=4.0, count=8 if quick else 24,
                              r_min=1.0 if quick else 0.5, r_max=2.0 if quick else 4.0)
    grid3 = pde.Grid3(L=2.0, N=13 if quick else 27)
    bgrid = auxmetric.BoxGrid(L=1.5, m=8 if quick else 16)

    catalog = {"identity": weights.from_config(BUILTIN_WEIGHTS["identity"]),
               "rank_one_radial": weights.from_config(BUILTIN_WEIGHTS["rank-one-radial"]),
               "diag_poly": weights.from_config(BUILTIN_WEIGHTS["diag-poly"])}

    def s_certify(rows):
        for name, W in catalog.items():
            rep = certify.bp_constant(W, 2.0, fam, seed=cfg.seed)
            rows.append(("certify", name, "bp_estimate", "-", rep.constant_estimate))
            nd = certify.nd_check(W, fam)
            rows.append(("certify", name, "nd_estimate", "-", nd.constant_estimate))

    def s_aux(rows):
        for name in ("identity", "diag_poly"):
            fld = auxmetric.aux_field(catalog[name], bgrid, kind="lower")
            path = os.path.join(cfg.out, f"aux_{name}.field")
            auxmetric.save_field_binary(path, fld)
            out_paths.append(path)
            rows.append(("aux", name, "m_lower_min", "-", float(fld.values.min())))
            rows.append(("aux", name, "m_lower_max", "-", float(fld.values.max())))

    def s_agmon(rows):
        fld = auxmetric.aux_field(catalog["diag_poly"], bgrid, kind="lower")
        dist = auxmetric.agmon_field(fld, (bgrid.m // 2,) * 3)
        rows.append(("agmon", "diag_poly", "max_distance", "-",
                     float(dist.values.max())))

    def s_green(rows):
        op = pde.assemble(catalog["identity"], None, grid3)
        gf = pde.green_field(op, (grid3.N // 2,) * 3,
                             solver=pde.DirectSolver(op) if grid3.N <= 20 else None)
        path = os.path.join(cfg.out, "green_identity.field")
        pde.save_green_binary(path, gf)
        out_paths.append(path)
        rows.append(("green", "identity", "residual", "-", gf.residual))

    def s_resolvent(rows):
        err = pde.resolvent_identity_check(catalog["diag_poly"], pde.Grid3(L=2.0, N=13),
                                           (6, 6, 6), x_list=[(3, 3, 3), (9, 8, 7)])
        rows.append(("resolvent", "diag_poly", "max_rel_error", "-", err))

    def s_fp(rows):
        fields = ineqlab.test_function_library(bgrid, 2, count=3, seed=cfg.seed)
        aux = auxmetric.aux_field(catalog["identity"], bgrid, kind="lower")
        for i, f in enumerate(fields):
            rows.append(("fp", "identity", "ratio_lower", i,
                         ineqlab.fp_ratio(catalog["identity"], f, "lower", aux=aux)))

    def s_poincare(rows):
        Q = cubature.Cube(center=np.zeros(3), r=1.0)
        u = ineqlab.linear_component(0, 0, 2)
        rows.append(("poincare", "identity", "ratio", u.label,
                     ineqlab.poincare_ratio(catalog["identity"], Q, u)))

    def s_counterexample(rows):
        Rs = [5.0, 10.0, 20.0] if quick else [10.0, 20.0, 40.0, 80.0]
        res = ineqlab.counterexample_fp_failure(Rs)
        rows.append(("counterexample", "rank_one_radial", "slope", "-", res["slope"]))
        for row in res["rows"]:
            rows.append(("counterexample", "rank_one_radial", "fp_ratio",
                         row["R"], row["ratio"]))

    def s_landscape(rows):
        op = pde.assemble(catalog["diag_poly"], None, grid3)
        solver = pde.DirectSolver(op) if grid3.N <= 20 else None
        mid = grid3.N // 2
        res = pde.landscape(op, (mid, mid, mid), solver=solver)
        rows.append(("landscape", "diag_poly", "u", res["x"], res["u"]))

    stages = [("certify", s_certify), ("aux", s_aux), ("agmon", s_agmon),
              ("green", s_green), ("resolvent", s_resolvent), ("fp", s_fp),
              ("poincare", s_poincare), ("counterexample", s_counterexample),
              ("landscape", s_landscape)]

    # each stage appends to its own row buffer; buffers merge in stage order
    # so threaded execution stays byte-deterministic
    buffers: dict = {name: [] for name, _ in stages}
    skipped: dict = {}

    def exec_stage(name, fn):
        if time.time() - t0 > budget:
            skipped[name] = True
            return
        fn(buffers[name])

    if cfg.threads > 1:
        with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
            futs = [pool.submit(exec_stage, name, fn) for name, fn in stages]
            for fut in futs:
                fut.result()
    else:
        for name, fn in stages:
            exec_stage(name, fn)

    for name, _fn in stages:
        if skipped.get(name):
            report.add_row("all", "-", f"{name}_skipped_budget", "-", 1.0)
        for row in buffers[name]:
            report.add_row(*row)

    return _finish(report, cfg, out_paths)


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="mwlab",
        description="Numerical laboratory for matrix-weighted Schroedinger systems")
    ap.add_argument("--config", help="JSON config file (flags override its fields)")
    sub = ap.add_subparsers(dest="subcommand")

    def common(p):
        p.add_argument("--weight", default="identity",
                       help="builtin name or weight-descriptor JSON file")
        p.add_argument("--out", default="out")
        p.add_argument("--seed", type=int, default=1)
        p.add_argument("--threads", type=int, default=1)

    p = sub.add_parser("certify", help="run a class certifier over a cube family")
    common(p)
    p.add_argument("--class", dest="cls", required=True,
                   choices=["bp", "bp-det", "nd", "ainf", "a2inf", "apinf",
                            "nc", "rbm", "cross"])
    p.add_argument("--p", type=float, default=2.0)
    p.add_argument("--family", help="cube-family JSON (file or inline)")

    p = sub.add_parser("aux", help="sample an auxiliary function on a box grid")
    common(p)
    p.add_argument("--grid", default="2.0,12", help="L,m")
    p.add_argument("--kind", default="lower", choices=["lower", "upper"])

    p = sub.add_parser("agmon", help="geodesic distance field of an auxiliary function")
    common(p)
    p.add_argument("--grid", default="2.0,12")
    p.add_argument("--kind", default="lower", choices=["lower", "upper"])
    p.add_argument("--source", help="i,j,k (defaults to the grid center)")
    p.add_argument("--norm", default="linf", choices=["linf", "l2"])

    p = sub.add_parser("green", help="fundamental-matrix block at one pole")
    common(p)
    p.add_argument("--grid", default="13,2.0", help="N,L")
    p.add_argument("--pole", help="i,j,k (defaults to the grid center)")

    p = sub.add_parser("decay", help="fit decay envelopes of a Green field")
    common(p)
    p.add_argument("--grid", default="21,3.0", help="N,L")
    p.add_argument("--pole")
    p.add_argument("--p", type=float, default=2.0)

    p = sub.add_parser("fp", help="Fefferman-Phong-type ratios on a grid")
    common(p)
    p.add_argument("--grid", default="2.0,12")
    p.add_argument("--form", default="lower", choices=["lower", "norm", "upper"])
    p.add_argument("--count", type=int, default=6)

    p = sub.add_parser("poincare", help="matrix Poincare ratio on a cube")
    common(p)
    p.add_argument("--cube", default="0,0,0,1", help="cx,cy,cz,r")

    p = sub.add_parser("counterexample", help="rank-one radial failure experiments")
    common(p)
    p.add_argument("--fp", action="store_true", default=True)
    p.add_argument("--R", default="10,20,40,80")

    p = sub.add_parser("landscape", help="landscape function vs auxiliary comparands")
    common(p)
    p.add_argument("--grid", default="13,2.0")
    p.add_argument("--probes", type=int, default=3)

    p = sub.add_parser("all", help="run the experiment catalog end-to-end")
    common(p)
    p.add_argument("--scale", default="quick", choices=["quick", "full"])
    p.add_argument("--budget", type=float, default=30.0, help="minutes")
    return ap


def _parse_pair(text: str, kinds) -> dict:
    parts = text.split(",")
    return {k: t(v) for (k, t), v in zip(kinds, parts)}


def config_from_args(args: argparse.Namespace) -> ExperimentConfig:
    base: dict = {}
    if getattr(args, "config", None):
        with open(args.config, encoding="utf-8") as fh:
            base = json.load(fh)
    sub = args.subcommand or base.get("subcommand")
    if sub is None:
        raise ConfigError("no subcommand given")
    cfg = ExperimentConfig(subcommand=sub)
    cfg.weight = base.get("weight")
    cfg.family = base.get("family")
    cfg.grid = base.get("grid")
    cfg.seed = int(base.get("seed", 1))
    cfg.out = base.get("out", "out")
    cfg.threads = int(base.get("threads", 1))
    cfg.params = dict(base.get("params", {}))

    if hasattr(args, "weight") and args.weight is not None:
        cfg.weight = _weight_cfg(args.weight)
    if getattr(args, "out", None):
        cfg.out = args.out
    if getattr(args, "seed", None) is not None:
        cfg.seed = args.seed
    if getattr(args, "threads", None) is not None:
        cfg.threads = args.threads

    if sub == "certify":
        cfg.params["class"] = args.cls
        cfg.params["p"] = args.p
        cfg.family = load_family(getattr(args, "family", None),
                                 default=cfg.family).to_config()
    if sub in ("aux", "agmon", "fp"):
        g = _parse_pair(args.grid, [("L", float), ("m", int)])
        cfg.grid = g
    if sub in ("green", "decay", "landscape"):
        g = _parse_pair(args.grid, [("N", int), ("L", float)])
        cfg.grid = g
    if sub in ("aux", "agmon"):
        cfg.params["kind"] = args.kind
    if sub == "agmon":
        cfg.params["norm"] = args.norm
        if args.source:
            cfg.params["source"] = [int(v) for v in args.source.split(",")]
    if sub in ("green", "decay") and getattr(args, "pole", None):
        cfg.params["pole"] = [int(v) for v in args.pole.split(",")]
    if sub == "decay":
        cfg.params["p"] = args.p
    if sub == "fp":
        cfg.params["form"] = args.form
        cfg.params["count"] = args.count
    if sub == "poincare":
        cfg.params["cube"] = [float(v) for v in args.cube.split(",")]
    if sub == "counterexample":
        cfg.params["R"] = [float(v) for v in args.R.split(",")]
    if sub == "landscape":
        cfg.params["n_probes"] = getattr(args, "probes", 3)
    if sub == "all":
        cfg.params["scale"] = args.scale
        cfg.params["budget"] = args.budget
    if cfg.weight is None:
        cfg.weight = BUILTIN_WEIGHTS["identity"]
    return cfg


RUNNERS = {
    "certify": run_certify,
    "aux": run_aux,
    "agmon": run_agmon,
    "green": run_green,
    "decay": run_decay,
    "fp": run_fp,
    "poincare": run_poincare,
    "counterexample": run_counterexample,
    "landscape": run_landscape,
    "all": run_all,
}


def run(argv=None) -> int:
    ap = build_parser()
    if argv is None:
        argv = sys.argv[1:]
    if not argv:
        ap.print_usage(sys.stderr)
        return 2
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code not in (0, None) else 0
    if args.subcommand is None and not getattr(args, "config", None):
        ap.print_usage(sys.stderr)
        return 2
    try:
        cfg = config_from_args(args)
    except (ConfigError, FileNotFoundError, json.JSONDecodeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    try:
        return RUNNERS[cfg.subcommand](cfg)
    except NUMERICAL_ERRORS as exc:
        print(f"numerical failure in {cfg.subcommand!r}: {type(exc).__name__}: {exc}",
              file=sys.stderr)
        return 3
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2


def main() -> None:  # console entry point
    raise SystemExit(run())


if __name__ == "__main__":
    main()
