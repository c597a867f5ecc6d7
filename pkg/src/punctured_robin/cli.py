"""Batch command-line front end.

Every command reads an optional JSON config file, applies flag overrides,
validates the whole configuration, and only then computes.  Results are
written atomically (temporary file plus rename) as CSV with 17 significant
digits or as JSON carrying ``schema_version``.

Exit codes: 0 success, 2 configuration error, 3 solver non-convergence,
4 computed result disagrees with its prediction.
"""
from __future__ import annotations

import argparse
import copy
import csv
import io
import json
import math
import os
import sys
import tempfile
import warnings

import numpy as np

from . import __version__
from .asymptotics import (DegenerateCaseInput, GradientCaseInput, PredictedCriticalPoint,
                          expansion_grad, expansion_robin, predict_count, predict_degenerate_case,
                          predict_gradient_case, remainder_budget)
from .critical import (FullDomain, MultistartConfig, compare_to_prediction,
                       detect_degenerate_ring, find_critical_points)
from .domains import (Ball, PerturbedEllipsoid, PuncturedDomain, StarShaped2D, ValidityWarning,
                      unit_directions)
from .ellipsoid import DEFAULT_DELTAS, run_study
from .errors import InvalidInputError, NonConvergenceError, RobinError
from .exact_kernels import KernelContext, robin_ball
from .harmonic import Resolution, RobinEvaluator, mfs_system, robin_gradient, robin_hessian
from .identities import DEFAULT_SEED, IDENTITIES, run_suite

SCHEMA_VERSION = 1

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER, EXIT_MISMATCH = 0, 2, 3, 4

COMMANDS = ("robin-field", "critical-points", "validate-identities", "ellipsoid-study",
            "convergence-study")

# Keys accepted per command besides the common ones.
COMMON_KEYS = {"command", "domain", "hole", "resolution", "output", "format", "seed"}
COMMAND_KEYS = {
    "robin-field": {"grid_size", "slice"},
    "critical-points": {"n_grid", "outer_n_grid", "critical_tol", "ring_bracket"},
    "validate-identities": {"dims", "n_samples"},
    "ellipsoid-study": {"dim", "alpha", "deltas"},
    "convergence-study": {"eps_list", "ring_factor", "sample_radius", "n_angles"},
}
DEFAULTS = {
    "domain": {"type": "ball", "radius": 1.0, "dim": 2},
    "format": "csv",
    "seed": 0,
    "grid_size": 101,
    "slice": 0.0,
    "critical_tol": 1e-7,
    "dims": [2, 3],
    "n_samples": 20,
    "dim": 2,
    "alpha": [1.0, 2.0],
    "deltas": list(DEFAULT_DELTAS),
    "eps_list": [3e-2, 1e-2, 3e-3],
    "ring_factor": 10.0,
    "n_angles": 16,
}


class ConfigError(Exception):
    """Raised for unusable configurations; maps to exit code 2."""


# ---------------------------------------------------------------- config

def _parse_value(text):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def _set_dotted(cfg, key, value):
    node = cfg
    parts = key.split(".")
    for p in parts[:-1]:
        node = node.setdefault(p, {})
        if not isinstance(node, dict):
            raise ConfigError(f"cannot set {key!r}: {p!r} is not a mapping")
    node[parts[-1]] = value


def load_config(args) -> dict:
    """Merge defaults, the config file and flag overrides."""
    cfg = {}
    if args.config:
        if not os.path.isfile(args.config):
            raise ConfigError(f"config file {args.config!r} does not exist")
        with open(args.config, encoding="utf-8") as fh:
            try:
                cfg = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"config file is not valid JSON: {exc}") from None
        if not isinstance(cfg, dict):
            raise ConfigError("config file must hold a JSON object")
    if cfg.get("command", args.command) != args.command:
        raise ConfigError(f"config is for {cfg['command']!r}, not {args.command!r}")
    cfg["command"] = args.command
    for item in args.set or ():
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        key, value = item.split("=", 1)
        _set_dotted(cfg, key.strip(), _parse_value(value))
    if args.output is not None:
        cfg["output"] = args.output
    if args.format is not None:
        cfg["format"] = args.format
    if args.seed is not None:
        cfg["seed"] = args.seed
    if args.hole_center is not None or args.hole_radius is not None:
        hole = dict(cfg.get("hole") or {})
        if args.hole_center is not None:
            hole["center"] = [float(v) for v in args.hole_center.split(",")]
        if args.hole_radius is not None:
            hole["radius"] = args.hole_radius
        cfg["hole"] = hole
    out = copy.deepcopy(DEFAULTS)
    out = {k: v for k, v in out.items() if k in COMMON_KEYS | COMMAND_KEYS[args.command]}
    out.update(cfg)
    return out


def _build_outer(spec):
    if not isinstance(spec, dict) or "type" not in spec:
        raise ConfigError("domain must be an object with a 'type'")
    kind = spec["type"]
    args = {k: v for k, v in spec.items() if k != "type"}
    try:
        if kind == "ball":
            return Ball(float(args.pop("radius", 1.0)), int(args.pop("dim", 2)), **args)
        if kind == "ellipsoid":
            return PerturbedEllipsoid(tuple(args.pop("alpha")), float(args.pop("delta")), **args)
        if kind == "star2d":
            return StarShaped2D(tuple(args.pop("coeffs")), **args)
    except (KeyError, TypeError) as exc:
        raise ConfigError(f"bad {kind!r} domain: {exc}") from None
    raise ConfigError(f"unknown domain type {kind!r}")


def _build_domain(cfg):
    outer = _build_outer(cfg["domain"])
    hole = cfg.get("hole")
    if not hole:
        return outer, outer
    if cfg["command"] == "convergence-study" and "radius" not in hole:
        # The sweep sets the radius; build with the largest one for validation.
        hole = dict(hole, radius=max(cfg["eps_list"]))
    try:
        center, radius = hole["center"], float(hole["radius"])
    except (KeyError, TypeError) as exc:
        raise ConfigError(f"hole needs 'center' and 'radius': {exc}") from None
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ValidityWarning)
        return outer, PuncturedDomain(outer, tuple(center), radius)


def _build_resolution(cfg, dim):
    knobs = cfg.get("resolution") or {}
    if not isinstance(knobs, dict):
        raise ConfigError("resolution must be an object")
    try:
        return Resolution.for_dim(dim, **knobs)
    except TypeError as exc:
        raise ConfigError(f"bad resolution: {exc}") from None


def validate(cfg) -> dict:
    """Check a merged config and build its objects; raises ConfigError."""
    command = cfg["command"]
    unknown = set(cfg) - COMMON_KEYS - COMMAND_KEYS[command]
    if unknown:
        raise ConfigError(f"unknown config keys for {command}: {sorted(unknown)}")
    if not cfg.get("output"):
        raise ConfigError("an output path is required (--output or 'output')")
    if cfg["format"] not in ("csv", "json"):
        raise ConfigError("format must be 'csv' or 'json'")
    if not isinstance(cfg["seed"], int):
        raise ConfigError("seed must be an integer")
    out_dir = os.path.dirname(os.path.abspath(cfg["output"]))
    if not os.path.isdir(out_dir):
        raise ConfigError(f"output directory {out_dir!r} does not exist")
    built = {}
    try:
        if command in ("robin-field", "critical-points", "convergence-study"):
            built["outer"], built["domain"] = _build_domain(cfg)
            built["resolution"] = _build_resolution(cfg, built["outer"].dim)
        if command == "robin-field":
            n = cfg["grid_size"]
            if not isinstance(n, int) or n < 2:
                raise ConfigError("grid_size must be an integer >= 2")
        elif command == "critical-points":
            for key in ("n_grid", "outer_n_grid"):
                if cfg.get(key) is not None and (not isinstance(cfg[key], int) or cfg[key] < 0):
                    raise ConfigError(f"{key} must be a non-negative integer")
            rb = cfg.get("ring_bracket")
            if rb is not None and (len(rb) != 2 or not 0 <= rb[0] < rb[1]):
                raise ConfigError("ring_bracket must be [r0, r1] with 0 <= r0 < r1")
        elif command == "validate-identities":
            dims = cfg["dims"]
            if not dims or any(d not in IDENTITIES for d in dims):
                raise ConfigError(f"dims must be a subset of {sorted(IDENTITIES)}")
            if not isinstance(cfg["n_samples"], int) or cfg["n_samples"] < 1:
                raise ConfigError("n_samples must be a positive integer")
        elif command == "ellipsoid-study":
            dim, alpha = cfg["dim"], cfg["alpha"]
            if len(alpha) != dim:
                raise ConfigError("alpha needs one entry per dimension")
            for d in cfg["deltas"]:
                PerturbedEllipsoid(tuple(alpha), float(d))
            built["resolution"] = _build_resolution(cfg, dim)
        elif command == "convergence-study":
            if not isinstance(built["domain"], PuncturedDomain):
                raise ConfigError("convergence-study needs a hole centre (radius is taken from eps_list)")
            eps_list = [float(e) for e in cfg["eps_list"]]
            if not eps_list or not all(0 < e < 1 for e in eps_list):
                raise ConfigError("eps_list must hold values in (0, 1)")
            P = built["domain"].center
            radii = [cfg["sample_radius"]] * len(eps_list) if cfg.get("sample_radius") \
                else [cfg["ring_factor"] * e for e in eps_list]
            for e, r in zip(eps_list, radii):
                if r <= e:
                    raise ConfigError("sample ring must lie outside the hole")
                with warnings.catch_warnings():
                    warnings.simplefilter("ignore", ValidityWarning)
                    PuncturedDomain(built["outer"], tuple(P), r)
    except InvalidInputError as exc:
        raise ConfigError(str(exc)) from None
    return built


# ---------------------------------------------------------------- output

def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return "%.17g" % v
    return "" if v is None else str(v)


def _jsonable(v):
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, np.ndarray):
        return _jsonable(v.tolist())
    if isinstance(v, (np.bool_, bool)):
        return bool(v)
    if isinstance(v, np.integer):
        return int(v)
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return v if math.isfinite(v) else str(v)
    return v


def _write_atomic(path, text):
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _csv_text(header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def _emit(cfg, header, rows, payload):
    if cfg["format"] == "csv":
        text = _csv_text(header, rows)
    else:
        # The output path is left out so reruns to another file stay byte-identical.
        manifest = {k: v for k, v in cfg.items() if k != "output"}
        doc = {"schema_version": SCHEMA_VERSION, "command": cfg["command"], "config": manifest}
        doc.update(payload)
        text = json.dumps(_jsonable(doc), indent=2) + "\n"
    _write_atomic(cfg["output"], text)


# ---------------------------------------------------------------- commands

def cmd_robin_field(cfg, built):
    """Robin function on a uniform grid; points outside the domain are omitted."""
    domain = built["domain"]
    ev = RobinEvaluator(domain, built["resolution"])
    n, dim = cfg["grid_size"], domain.dim
    lo, hi = ev.bounds
    axes = [np.linspace(lo[k], hi[k], n) for k in range(2)]
    gx, gy = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([gx.ravel(), gy.ravel()], axis=1)
    if dim == 3:
        pts = np.column_stack([pts, np.full(len(pts), float(cfg["slice"]))])
    pts = pts[ev.inside(pts)]
    vals = ev.values(pts) if len(pts) else np.zeros(0)
    names = ["x", "y", "z"][:dim]
    rows = [list(p) + [v] for p, v in zip(pts, vals)]
    _emit(cfg, names + ["robin"], rows, {"points": pts, "robin": vals})
    return EXIT_OK


def _outer_predictions(outer, res, n_grid, seed):
    ev = RobinEvaluator(outer, res)
    pts = find_critical_points(ev, FullDomain(), MultistartConfig(n_grid=n_grid, rng_seed=seed))
    return pts


def _predictions(outer, domain, res, cfg):
    """Predicted critical points of the punctured domain and the predicted count."""
    P, eps, dim = domain.center, domain.hole_radius, domain.dim
    ctx = KernelContext.for_dim(dim)
    outer_n = cfg.get("outer_n_grid")
    outer_pts = _outer_predictions(outer, res, 64 if outer_n is None else outer_n, cfg["seed"])
    g = robin_gradient(outer, P, res)
    info = {"grad_R_at_P": g, "outer_critical_points": len(outer_pts)}
    gnorm = float(np.linalg.norm(g))
    if gnorm > cfg["critical_tol"]:
        near = [predict_gradient_case(GradientCaseInput(eps, g, P), ctx)]
        keep = outer_pts
        count = predict_count(len(outer_pts), True)
    else:
        H = robin_hessian(outer, P, res)
        info["hessian_R_at_P"] = H
        near = predict_degenerate_case(DegenerateCaseInput(eps, H, P), ctx)
        keep = [p for p in outer_pts if np.linalg.norm(p.location - P) > 1e-4 * outer.diameter]
        m = sum(1 for lam in np.linalg.eigvalsh(H) if lam > 0)
        count = predict_count(len(outer_pts), False, m)
    far = [PredictedCriticalPoint(p.location, p.sign_index, "outer critical point",
                                  float(np.linalg.norm(p.location - P)), P) for p in keep]
    return near + far, count, info


def _point_record(p):
    return {"location": p.location, "robin": p.robin_value, "grad_norm": p.grad_norm,
            "eigenvalues": p.eigenvalues, "morse_index": p.morse_index,
            "sign_index": p.sign_index, "degenerate": p.degenerate}


def cmd_critical_points(cfg, built):
    """Critical points of the Robin function, with predictions when a hole is present."""
    outer, domain, res = built["outer"], built["domain"], built["resolution"]
    dim = domain.dim
    ev = RobinEvaluator(domain, res)
    payload = {"degenerate_ring": None, "predicted": [], "comparison": None}
    status = EXIT_OK
    concentric = (isinstance(domain, PuncturedDomain) and isinstance(outer, Ball)
                  and np.linalg.norm(domain.center) == 0)
    found = []
    if concentric:
        eps = domain.hole_radius
        bracket = cfg.get("ring_bracket") or (2 * eps + ev.hole_margin, outer.radius - 2 * ev.outer_margin)
        radius = detect_degenerate_ring(ev, domain.center, bracket)
        payload["degenerate_ring"] = None if radius is None else {"center": domain.center, "radius": radius}
        payload["predicted_count"] = "inf"
        if radius is None:
            status = EXIT_MISMATCH
    else:
        seeds = ()
        if isinstance(domain, PuncturedDomain):
            predicted, count, info = _predictions(outer, domain, res, cfg)
            seeds = tuple(p.location for p in predicted if ev.inside(p.location))
            payload["predicted"] = [
                {"location": p.location, "expected_index": p.expected_index, "source": p.source,
                 "leading_scale": p.leading_scale} for p in predicted]
            payload["predicted_count"] = count
            payload["outer"] = info
        diag = {}
        starts = MultistartConfig(seeds=seeds, n_grid=cfg.get("n_grid"), rng_seed=cfg["seed"])
        found = find_critical_points(ev, FullDomain(), starts, diagnostics=diag)
        payload["diagnostics"] = diag
        if isinstance(domain, PuncturedDomain):
            R_P = float(mfs_system(outer, res).robin(domain.center[None])[0])
            report = compare_to_prediction(found, predicted, robin_at_P=R_P)
            payload["comparison"] = {"pairs": report.pairs, "unmatched_found": report.unmatched_found,
                                     "unmatched_predicted": report.unmatched_predicted}
            if len(found) != count:
                status = EXIT_MISMATCH
    payload["found"] = [_point_record(p) for p in found]
    payload["found_count"] = len(found)
    header = ["x", "y", "z"][:dim] + ["robin", "grad_norm", "morse_index", "sign_index", "degenerate"] \
        + [f"eig_{k + 1}" for k in range(dim)]
    rows = [list(p.location) + [p.robin_value, p.grad_norm, p.morse_index, p.sign_index, p.degenerate]
            + list(p.eigenvalues) for p in found]
    _emit(cfg, header, rows, payload)
    return status


def cmd_validate_identities(cfg, built):
    """Closed-form boundary identities against quadrature."""
    seed = cfg["seed"] or DEFAULT_SEED
    checks = run_suite(tuple(cfg["dims"]), cfg["n_samples"], seed)
    header = ["name", "dim", "eps", "x1", "x2", "x3", "lhs", "rhs", "abs_err", "rel_err",
              "nodes_used", "kind", "ratio", "passed"]
    rows = []
    for c in checks:
        x = list(c.x) + [None] * (3 - len(c.x))
        scalar = np.ndim(c.lhs_quadrature) == 0
        rows.append([c.name, c.dim, c.eps] + x + [
            c.lhs_quadrature if scalar else None, c.rhs_closed_form if scalar else None,
            c.abs_err, c.rel_err, c.nodes_used, c.kind, c.ratio, c.passed])
    records = [{"name": c.name, "dim": c.dim, "x": c.x, "eps": c.eps, "lhs": c.lhs_quadrature,
                "rhs": c.rhs_closed_form, "abs_err": c.abs_err, "rel_err": c.rel_err,
                "nodes_used": c.nodes_used, "kind": c.kind, "ratio": c.ratio, "passed": c.passed}
               for c in checks]
    _emit(cfg, header, rows, {"checks": records})
    return EXIT_OK if all(c.passed for c in checks) else EXIT_MISMATCH


def cmd_ellipsoid_study(cfg, built):
    """Hessian eigenvalues at the centre of perturbed balls versus the linear prediction."""
    study = run_study(cfg["dim"], tuple(cfg["alpha"]), tuple(cfg["deltas"]), built["resolution"])
    header = ["delta", "i", "alpha_i", "numeric", "predicted", "residual", "ratio",
              "first_order", "first_order_residual", "off_diagonal", "grad_norm"]
    rows = []
    for k, d in enumerate(study.delta_grid):
        for i in range(study.dim):
            rows.append([d, i + 1, study.alpha[i], study.numeric[k][i], study.predicted[k][i],
                         study.residuals[k][i], study.ratios[k][i], study.first_order[k][i],
                         study.first_order_residuals[k][i], study.off_diagonal[k], study.grad_norm[k]])
    payload = {"delta_grid": study.delta_grid, "numeric": study.numeric, "predicted": study.predicted,
               "residuals": study.residuals, "ratios": study.ratios, "first_order": study.first_order,
               "first_order_residuals": study.first_order_residuals, "failures": study.failures,
               "ratios_decreasing": study.ratios_decreasing()}
    _emit(cfg, header, rows, payload)
    if study.failures:
        return EXIT_SOLVER
    return EXIT_OK if study.ratios_decreasing() else EXIT_MISMATCH


def _outer_callables(outer, res):
    if isinstance(outer, Ball):
        ctx = KernelContext.for_dim(outer.dim)
        return (lambda x: robin_ball(x, ctx, outer.radius),
                lambda x: robin_ball(x, ctx, outer.radius, order=1))
    system = mfs_system(outer, res)
    return (lambda x: system.robin(np.asarray(x)[None])[0],
            lambda x: system.robin_gradient(np.asarray(x)[None])[0])


def _slope(eps, err):
    eps, err = np.asarray(eps), np.asarray(err)
    ok = err > 0
    if ok.sum() < 2:
        return math.nan
    return float(np.polyfit(np.log(eps[ok]), np.log(err[ok]), 1)[0])


def cmd_convergence_study(cfg, built):
    """Expansion of the punctured-domain Robin function against the solver."""
    outer, res = built["outer"], built["resolution"]
    P = built["domain"].center
    dim = outer.dim
    R_out, dR_out = _outer_callables(outer, res)
    dirs = unit_directions(dim, cfg["n_angles"])
    rows, summary = [], []
    for eps in sorted(float(e) for e in cfg["eps_list"]):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", ValidityWarning)
            pd = PuncturedDomain(outer, tuple(P), eps)
        system = mfs_system(pd, res)
        radius = cfg.get("sample_radius") or cfg["ring_factor"] * eps
        pts = P + radius * dirs
        vals = system.robin(pts)
        grads = system.robin_gradient(pts)
        r_err, g_err = [], []
        for x, v, g in zip(pts, vals, grads):
            er = abs(v - expansion_robin(x, pd, R_out))
            eg = float(np.linalg.norm(g - expansion_grad(x, pd, dR_out)))
            br = remainder_budget("robin", x, pd).magnitude
            bg = remainder_budget("grad", x, pd).magnitude
            rows.append([eps, *x, v, er, eg, br, bg])
            r_err.append(er)
            g_err.append(eg)
        summary.append({"eps": eps, "radius": radius, "max_robin_error": max(r_err),
                        "max_grad_error": max(g_err),
                        "robin_constant": max(r_err) / remainder_budget("robin", pts[0], pd).magnitude,
                        "grad_constant": max(g_err) / remainder_budget("grad", pts[0], pd).magnitude})
    eps_arr = [s["eps"] for s in summary]
    payload = {"summary": summary,
               "robin_slope": _slope(eps_arr, [s["max_robin_error"] for s in summary]),
               "grad_slope": _slope(eps_arr, [s["max_grad_error"] for s in summary])}
    header = ["eps"] + ["x", "y", "z"][:dim] + ["robin_solver", "robin_error", "grad_error",
                                                "robin_budget", "grad_budget"]
    _emit(cfg, header, rows, payload)
    return EXIT_OK


HANDLERS = {
    "robin-field": cmd_robin_field,
    "critical-points": cmd_critical_points,
    "validate-identities": cmd_validate_identities,
    "ellipsoid-study": cmd_ellipsoid_study,
    "convergence-study": cmd_convergence_study,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="punctured-robin",
        description="Robin function of domains with a small hole: fields, critical points and checks.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "robin-field": "Robin function on a grid (CSV x,y[,z],robin)",
        "critical-points": "critical points with predictions and matching",
        "validate-identities": "closed-form boundary identities by quadrature",
        "ellipsoid-study": "Hessian eigenvalues of perturbed balls",
        "convergence-study": "small-hole expansions against the solver",
    }
    for name in COMMANDS:
        p = sub.add_parser(name, help=helps[name])
        p.add_argument("--config", help="JSON config file")
        p.add_argument("-o", "--output", help="output file")
        p.add_argument("--format", choices=("csv", "json"))
        p.add_argument("--seed", type=int)
        p.add_argument("--hole-center", help="comma separated coordinates of P")
        p.add_argument("--hole-radius", type=float, help="hole radius eps")
        p.add_argument("--set", action="append", metavar="KEY=VALUE",
                       help="override a config entry; VALUE is parsed as JSON, dotted keys allowed")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args)
        built = validate(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return HANDLERS[args.command](cfg, built)
    except NonConvergenceError as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except (RobinError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
