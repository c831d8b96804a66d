"""Command-line interface.

Shadows travel as JSON documents (see ``pencil.serialize``); matrices and
vectors are inline JSON or ``@file`` references to JSON/CSV files. Check
subcommands encode their boolean verdict in the exit code (0 = true).
"""
from __future__ import annotations

import argparse
import json
import math
import sys
from fractions import Fraction

import numpy as np

from . import convert, harness, ops, pencil, reduce, validate
from .errors import SpectraError


def _load_json_arg(text: str):
    if text.startswith("@"):
        path = text[1:]
        if path.endswith(".csv"):
            return np.loadtxt(path, delimiter=",", ndmin=2).tolist()
        with open(path, "r", encoding="utf-8") as fh:
            return json.load(fh)
    return json.loads(text)


def _matrix_arg(text: str) -> np.ndarray:
    return np.atleast_2d(np.asarray(_load_json_arg(text), dtype=float))


def _vector_arg(text: str) -> np.ndarray:
    return np.asarray(_load_json_arg(text), dtype=float).reshape(-1)


def _fraction_arg(text: str):
    if text in ("inf", "Inf", "INF"):
        return math.inf
    return Fraction(text)


def _write_shadow(shadow, path: str) -> None:
    if path == "-":
        sys.stdout.write(pencil.serialize(shadow) + "\n")
    else:
        pencil.save(shadow, path)


def _read_shadow(path: str):
    return pencil.load(path)


def _cmd_op(args) -> int:
    verb = args.verb
    if verb in ("sum", "intersect", "product", "lpsum", "convhull"):
        first = _read_shadow(args.inputs[0])
        second = _read_shadow(args.inputs[1])
        if verb == "sum":
            result = ops.minkowski_sum(first, second)
        elif verb == "intersect":
            result = ops.intersect(first, second)
        elif verb == "product":
            result = ops.cartesian_product(first, second)
        elif verb == "lpsum":
            result = ops.lp_sum(first, second, _fraction_arg(args.p))
        else:
            hull = ops.convex_hull(first, second)
            print(json.dumps({"exact": hull.exact}))
            result = hull.shadow
    else:
        shadow = _read_shadow(args.inputs[0])
        if verb == "translate":
            result = ops.translate(shadow, _vector_arg(args.vector))
        elif verb == "map":
            result = ops.linear_map(shadow, _matrix_arg(args.matrix))
        elif verb == "invmap":
            result = ops.linear_inverse_map(shadow, _matrix_arg(args.matrix))
        elif verb == "cone":
            hull = ops.conic_hull(shadow)
            print(json.dumps({"exact": hull.exact}))
            result = hull.shadow
        elif verb == "polymap":
            vertices = [np.asarray(v, dtype=float) for v in _load_json_arg(args.vertices)]
            hull = ops.polytopic_map(shadow, ops.PolytopicMap(tuple(vertices)))
            print(json.dumps({"exact": hull.exact}))
            result = hull.shadow
        else:
            raise SpectraError(f"unknown op verb {verb!r}")
    _write_shadow(result, args.out)
    return 0


def _cmd_check(args) -> int:
    shadow = _read_shadow(args.input)
    if args.verb == "empty":
        verdict, margin = validate.is_empty(shadow)
        print(json.dumps({"empty": verdict, "margin": margin}))
        return 0 if verdict else 1
    if args.verb == "member":
        verdict, margin = validate.contains_point(shadow, _vector_arg(args.point))
        print(json.dumps({"member": verdict, "margin": margin}))
        return 0 if verdict else 1
    report = validate.is_bounded(shadow)
    print(json.dumps({
        "bounded": report.bounded,
        "branch": report.branch,
        "rank_p": report.rank_p,
        "rank_q": report.rank_q,
        "rank_pq": report.rank_pq,
        "eps_b": report.eps_b,
    }))
    return 0 if report.bounded else 1


def _cmd_convert(args) -> int:
    spec = _load_json_arg(args.input) if args.input else {}
    verb = args.verb
    if verb == "hpoly":
        shadow = convert.from_hpolyhedron(convert.HPolyhedron(
            np.asarray(spec["A"], dtype=float), np.asarray(spec["b"], dtype=float)))
    elif verb == "ellipsoid":
        shadow = convert.from_ellipsoid(convert.Ellipsoid(
            np.asarray(spec["c"], dtype=float), np.asarray(spec["Q"], dtype=float)))
    elif verb == "zonotope":
        shadow = convert.from_zonotope(convert.Zonotope(
            np.asarray(spec["c"], dtype=float), np.asarray(spec["G"], dtype=float)))
    elif verb == "cz":
        shadow = convert.from_ellipsotope(convert.constrained_zonotope(
            np.asarray(spec["c"], dtype=float), np.asarray(spec["G"], dtype=float),
            np.asarray(spec["A"], dtype=float) if "A" in spec else None,
            np.asarray(spec["b"], dtype=float) if "b" in spec else None))
    elif verb == "etope":
        shadow = convert.from_ellipsotope(convert.Ellipsotope(
            _fraction_arg(str(spec["p"])),
            np.asarray(spec["c"], dtype=float),
            np.asarray(spec["G"], dtype=float),
            np.asarray(spec["A"], dtype=float) if "A" in spec else None,
            np.asarray(spec["b"], dtype=float) if "b" in spec else None,
            tuple(tuple(grp) for grp in spec.get("index_sets", ()))))
    elif verb == "ball":
        shadow = convert.from_pnorm_ball(args.dim, _fraction_arg(args.p))
    else:
        raise SpectraError(f"unknown convert verb {verb!r}")
    _write_shadow(shadow, args.out)
    return 0


def _cmd_reduce(args) -> int:
    shadow = _read_shadow(args.input)
    if args.strategy == "lowrank":
        cfg = reduce.ReductionConfig(target_size=args.target_size, strategy="lowrank",
                                     isotropic=args.isotropic)
        result = reduce.lowrank_reduce(shadow, cfg)
    else:
        result = reduce.polyhedral_approx(shadow, args.target_size, seed=args.seed)
    _write_shadow(result, args.out)
    return 0


def _load_system(spec: dict) -> harness.LinearSystem:
    return harness.LinearSystem(
        np.asarray(spec["A"], dtype=float),
        np.asarray(spec["B"], dtype=float),
        np.asarray(spec["L"], dtype=float),
        np.asarray(spec["C"], dtype=float),
        np.asarray(spec["F"], dtype=float),
    )


def _cmd_estimate(args) -> int:
    if args.system:
        spec = _load_json_arg(args.system)
        system = _load_system(spec)
        dim = system.n_x
    else:
        system = harness.random_system(args.random_dim, args.seed)
        dim = args.random_dim
    x0_set, w_set, v_set = harness.default_uncertainty_sets(dim)
    run = harness.EstimationRun(system, x0_set, w_set, v_set, horizon=args.horizon,
                                reduce_every=args.reduce_every,
                                reduce_target=args.target_size, seed=args.seed)
    gen = np.random.default_rng(args.seed)
    x0 = gen.uniform(-1.0, 1.0, dim)
    inputs = [gen.uniform(-0.5, 0.5, dim) for _ in range(args.horizon)]
    dists = [gen.uniform(-1.0, 1.0, dim) for _ in range(args.horizon)]
    noises = []
    for _ in range(args.horizon):
        raw = gen.standard_normal(dim)
        noises.append(0.5 * gen.uniform() * raw / max(1.0, float(np.linalg.norm(raw))))
    states, measurements = harness.simulate_linear_system(system, x0, inputs, dists, noises)
    _, logs = harness.run_estimation(run, measurements, inputs, truth=states,
                                     log_volume=args.log_volume)
    _write_logs(logs, args.out)
    return 0


def _cmd_reach(args) -> int:
    spec = _load_json_arg(args.config)
    run = harness.ReachRun(
        np.asarray(spec["A"], dtype=float),
        np.asarray(spec["B"], dtype=float),
        np.asarray(spec["x_bar0"], dtype=float),
        np.asarray(spec["u_bar"], dtype=float),
        tuple(np.asarray(q, dtype=float) for q in spec["Q_list"]),
        tuple(np.asarray(u, dtype=float) for u in spec["U_list"]),
        _fraction_arg(str(spec["p1"])),
        _fraction_arg(str(spec["p2"])),
        int(spec["horizon"]),
    )
    sets, logs = harness.run_reach(run)
    if args.sets_dir:
        import os

        os.makedirs(args.sets_dir, exist_ok=True)
        for k, shadow in enumerate(sets):
            pencil.save(shadow, os.path.join(args.sets_dir, f"X_{k}.json"))
    _write_logs(logs, args.out)
    return 0


def _write_logs(logs, path: str) -> None:
    lines = [json.dumps(log.to_json()) for log in logs]
    text = "\n".join(lines) + "\n"
    if path == "-":
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)


def _cmd_volume(args) -> int:
    shadow = _read_shadow(args.input)
    est = harness.estimate_volume(shadow, k_dirs=args.dirs, seed=args.seed)
    print(json.dumps({"volume": est.value, "half_width": est.half_width,
                      "degenerate": est.degenerate}))
    return 0


def _cmd_plot(args) -> int:
    shadow = _read_shadow(args.input)
    points = harness.emit_plot_data(shadow, k_dirs=args.dirs)
    text = harness.plot_csv(points)
    if args.out == "-":
        sys.stdout.write(text)
    else:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="spectra",
                                     description="Spectrahedral-shadow set toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    op = sub.add_parser("op", help="apply a set operation")
    op.add_argument("verb", choices=["translate", "map", "invmap", "sum", "intersect",
                                     "product", "lpsum", "cone", "convhull", "polymap"])
    op.add_argument("inputs", nargs="+", help="input shadow file(s)")
    op.add_argument("--vector", "-b", help="translation vector (JSON or @file)")
    op.add_argument("--matrix", "-T", help="matrix (JSON or @file)")
    op.add_argument("--vertices", help="list of vertex matrices for polymap")
    op.add_argument("--p", help="rational p for lpsum, e.g. 3/2 or inf")
    op.add_argument("--out", "-o", default="-", help="output shadow file (default stdout)")
    op.set_defaults(func=_cmd_op)

    check = sub.add_parser("check", help="validate a shadow (exit code = verdict)")
    check.add_argument("verb", choices=["empty", "member", "bounded"])
    check.add_argument("input")
    check.add_argument("--point", help="point for the member check")
    check.set_defaults(func=_cmd_check)

    conv = sub.add_parser("convert", help="convert a classical set description")
    conv.add_argument("verb", choices=["hpoly", "ellipsoid", "zonotope", "cz", "etope", "ball"])
    conv.add_argument("--in", dest="input", help="source description (JSON or @file)")
    conv.add_argument("--dim", type=int, help="ball dimension")
    conv.add_argument("--p", help="ball exponent, e.g. 2, 3/2, inf")
    conv.add_argument("--out", "-o", default="-")
    conv.set_defaults(func=_cmd_convert)

    red = sub.add_parser("reduce", help="reduce representation complexity")
    red.add_argument("--in", dest="input", required=True)
    red.add_argument("--strategy", choices=["lowrank", "poly"], default="lowrank")
    red.add_argument("--target-size", type=int, required=True)
    red.add_argument("--isotropic", action="store_true")
    red.add_argument("--seed", type=int, default=0)
    red.add_argument("--out", "-o", default="-")
    red.set_defaults(func=_cmd_reduce)

    est = sub.add_parser("estimate", help="run set-membership estimation")
    est.add_argument("--system", help="system matrices (JSON or @file)")
    est.add_argument("--random-dim", type=int, default=2,
                     help="generate a random system of this dimension instead")
    est.add_argument("--horizon", type=int, required=True)
    est.add_argument("--reduce-every", type=int, default=None)
    est.add_argument("--target-size", type=int, default=24)
    est.add_argument("--seed", type=int, default=0)
    est.add_argument("--log-volume", action="store_true",
                     help="record a planar volume estimate per step (2-D only)")
    est.add_argument("--out", default="-", help="JSONL step log path")
    est.set_defaults(func=_cmd_estimate)

    rch = sub.add_parser("reach", help="run Lp-sum reachability")
    rch.add_argument("--config", required=True, help="run configuration (JSON or @file)")
    rch.add_argument("--out", default="-", help="JSONL step log path")
    rch.add_argument("--sets-dir", help="directory to store per-step shadow files")
    rch.set_defaults(func=_cmd_reach)

    vol = sub.add_parser("volume", help="estimate the volume of a bounded shadow")
    vol.add_argument("--in", dest="input", required=True)
    vol.add_argument("--dirs", type=int, default=128)
    vol.add_argument("--seed", type=int, default=0)
    vol.set_defaults(func=_cmd_volume)

    plot = sub.add_parser("plot", help="emit boundary points as CSV")
    plot.add_argument("--in", dest="input", required=True)
    plot.add_argument("--dirs", type=int, default=64)
    plot.add_argument("--out", "-o", default="-")
    plot.set_defaults(func=_cmd_plot)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "strategy", None) == "poly":
        args.strategy = "polyhedral"
    try:
        return args.func(args)
    except SpectraError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
