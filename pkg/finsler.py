import argparse
import sys

import numpy as np

from builtin_metrics import builtin_names, resolve_metric
from checks import classify, reproduce_examples, run_identity_suite
from geometry import TENSOR_NAMES, FinslerGeometry
from identities import identity_residuals
from metric_dsl import PointState, pretty
from nullity import (
    KERNEL_SLOTS,
    TENSOR_KINDS,
    conullity,
    grid_scan,
    kernel_space,
    nullity_space,
    subspace_equal,
    subspace_leq,
)
from utils import (
    FinslerError,
    get_default_orders,
    logger,
    parse_orders,
    set_verbosity,
    write_csv,
    write_json,
)
from utils.config import CLASS_TOL, COND_MAX, DEFAULT_BOX, IDENTITY_TOL, RANK_TOL
from utils.sampling import parse_grid, parse_point


def _index_label(name, index):
    return "{}[{}]".format(name, ",".join(str(i + 1) for i in index))


def _fmt(value):
    return "{: .12g}".format(value)


def _print_subspace(title, S, N=None):
    print("{}: dim {} of {}  (gap {:.3e} / {:.3e}, residual {:.3e})".format(
        title, S.rank, S.n, S.gap[0], S.gap[1], S.residual))
    for col in range(S.rank):
        line = "  h-frame  [" + ", ".join(_fmt(v) for v in S.basis[:, col]) + "]"
        print(line)
        if N is not None:
            t = S.tangent_basis(N)[:, col]
            print("  tangent  [" + ", ".join(_fmt(v) for v in t) + "]")


def _report(metric, points, tensors=None, subspaces=None, residuals=None, verdicts=None, summary=None):
    return {
        "metric": metric,
        "points": [str(p) for p in points],
        "tensors": tensors or {},
        "subspaces": subspaces or {},
        "residuals": residuals or {},
        "verdicts": verdicts or {},
        "summary": summary or {},
    }


def _base_point(spec, point):
    if point is not None:
        return point
    n = spec.dim
    x = tuple(0.5 * sum(spec.box("x", i + 1, DEFAULT_BOX)) for i in range(n))
    y = tuple(0.5 * sum(spec.box("y", i + 1, DEFAULT_BOX)) for i in range(n))
    return PointState(x, y)


# subcommands


def cmd_tensors(args):
    spec = resolve_metric(args.metric)
    names = args.tensor or TENSOR_NAMES
    bundle = FinslerGeometry(spec, args.point, args.orders, args.cond_max).bundle(names)

    print("metric {}: {} = {}".format(spec.name, spec.kind, pretty(spec.expr)))
    print("point  {}   orders {}".format(args.point, bundle.orders))
    print("E = {}   F = {}   cond(g) = {}".format(
        "-" if bundle.E is None else _fmt(bundle.E), "-" if bundle.F is None else _fmt(bundle.F),
        "-" if bundle.cond is None else "{:.3e}".format(bundle.cond)))
    rows = []
    for name, value in bundle.tensors().items():
        value = np.atleast_1d(np.asarray(value, dtype=float))
        threshold = 1e-12 * max(bundle.scale(name), 1e-300) if name != "E" else -1.0
        shown = 0
        print("\n{} {}".format(name, "x".join(str(s) for s in value.shape)))
        for index in np.ndindex(*value.shape):
            rows.append((name, ",".join(str(i + 1) for i in index), value[index]))
            if abs(value[index]) > threshold:
                print("  {:<18} {}".format(_index_label(name, index), _fmt(value[index])))
                shown += 1
        if not shown:
            print("  (all zero)")

    residuals = {k: v for k, v in identity_residuals(bundle).items() if v is not None}
    summary = {"orders": list(bundle.orders), "E": bundle.E, "F": bundle.F, "cond": bundle.cond,
               "references": bundle.references}
    if args.json:
        tensors = {name: np.asarray(value).tolist() for name, value in bundle.tensors().items()}
        write_json(args.json, _report(spec.name, [args.point], tensors, residuals=residuals, summary=summary))
    if args.csv:
        write_csv(args.csv, ["tensor", "index", "value"], rows)
    return 0


def cmd_nullity(args):
    spec = resolve_metric(args.metric)
    bundle = FinslerGeometry(spec, args.point, args.orders, args.cond_max).bundle()
    subspaces = {}
    summary = {}
    if args.mode in ("nullity", "compare"):
        S = nullity_space(bundle, args.tensor, args.rank_tol)
        co = conullity(bundle, S, args.rank_tol)
        subspaces["nullity"] = S.to_dict()
        subspaces["nullity"]["tangent_basis"] = S.tangent_basis(bundle.N).T.tolist()
        subspaces["conullity"] = co.to_dict()
        summary["mu"] = S.rank
        print("mu({}) = {} at {}".format(args.tensor, S.rank, args.point))
        _print_subspace("nullity", S, bundle.N)
        _print_subspace("conullity", co)
    if args.mode in ("kernel", "compare"):
        K = kernel_space(bundle, args.tensor, args.rank_tol)
        subspaces["kernel"] = K.to_dict()
        subspaces["kernel"]["tangent_basis"] = K.tangent_basis(bundle.N).T.tolist()
        summary["kernel_dim"] = K.rank
        print("dim Ker({}) = {} at {}".format(args.tensor, K.rank, args.point))
        _print_subspace("kernel", K, bundle.N)
    if args.mode == "compare":
        S_in_K = subspace_leq(S, K, args.rank_tol)
        equal = S_in_K and subspace_equal(S, K, args.rank_tol)
        summary.update({"nullity<=kernel": S_in_K, "equal": equal, "strict": S_in_K and not equal})
        print("nullity <= kernel: {}   equal: {}   strict: {}".format(S_in_K, equal, S_in_K and not equal))

    if args.json:
        write_json(args.json, _report(spec.name, [args.point], subspaces=subspaces, summary=summary))
    if args.csv:
        rows = []
        for label, sub in subspaces.items():
            for k, vec in enumerate(sub["basis"]):
                rows.append([label, sub["dim"], k + 1] + list(vec))
        write_csv(args.csv, ["space", "dim", "vector"] + ["a{}".format(i + 1) for i in range(spec.dim)], rows)
    return 0


def cmd_scan(args):
    spec = resolve_metric(args.metric)
    kinds = tuple(args.tensor or TENSOR_KINDS)
    base = _base_point(spec, args.point)
    report = grid_scan(spec, args.grid, base, kinds, args.rank_tol, args.orders, workers=args.workers,
                       ray_check=not args.no_ray, cond_max=args.cond_max, progress=not args.quiet)

    print("{:>5}  {:<48} {}  checks".format("#", "point", "  ".join("{:>9}".format(k) for k in kinds)))
    for r in report.records:
        mus = "  ".join("{:>9}".format(r.mu.get(k, "-")) for k in kinds)
        status = "ok" if r.in_domain and not r.failures else (r.error or ", ".join(r.failures))
        print("{:>5}  {:<48} {}  {}".format(r.index, str(r.point), mus, status))
    for kind in kinds:
        s = report.summary[kind]
        print("mu({}) takes {} ; {} transition(s)".format(kind, s["values"], len(s["transitions"])))
        for t in s["transitions"]:
            print("  {} -> {} between {} and {}".format(t["from_mu"], t["to_mu"], t["from_point"], t["to_point"]))
    print("{} rejected, {} skipped near an excluded locus".format(report.rejected, report.skipped))

    if args.json:
        summary = dict(report.summary)
        summary["rejected"] = report.rejected
        summary["skipped"] = report.skipped
        out = _report(spec.name, [r.point for r in report.records], summary=summary)
        out["records"] = [r.to_dict() for r in report.records]
        write_json(args.json, out)
    if args.csv:
        rows = [
            [r.index, str(r.point), r.in_domain] + [r.mu.get(k) for k in kinds] + [";".join(r.failures)]
            for r in report.records
        ]
        write_csv(args.csv, ["index", "point", "in_domain"] + ["mu_" + k for k in kinds] + ["failures"], rows)
    return 1 if report.failures else 0


def cmd_verify(args):
    spec = resolve_metric(args.metric)
    report = run_identity_suite(spec, args.points, args.seed, args.tol, args.orders, args.rank_tol,
                                args.cond_max, progress=not args.quiet)
    print("{:<24} {:<8} {:>12}  worst point".format("identity", "status", "residual"))
    for name, check in report.checks.items():
        print("{:<24} {:<8} {:>12.3e}  {}".format(name, check.status, check.max_residual, check.worst_point or "-"))
    print("{}: {}".format(spec.name, "all identities pass" if report.passed else "FAILED " + ", ".join(report.failures)))

    if args.json:
        residuals = {name: check.to_dict() for name, check in report.checks.items()}
        summary = {"passed": report.passed, "tol": report.tol, "seed": args.seed}
        write_json(args.json, _report(spec.name, report.points, residuals=residuals, summary=summary))
    if args.csv:
        rows = [[n, c.status, c.max_residual, c.tol, c.worst_point, c.evaluated, c.skipped]
                for n, c in report.checks.items()]
        write_csv(args.csv, ["identity", "status", "max_residual", "tol", "worst_point", "evaluated", "skipped"], rows)
    return 0 if report.passed else 1


def cmd_classify(args):
    spec = resolve_metric(args.metric)
    result = classify(spec, args.points, args.seed, args.class_tol, args.orders, args.cond_max,
                      progress=not args.quiet)
    print("{:<48} {:>12} {:>12}  verdict".format("point", "|Gb|/scale", "|L|/scale"))
    for v in result.verdicts:
        print("{:<48} {:>12.3e} {:>12.3e}  {}".format(str(v.point), v.berwald_measure, v.landsberg_measure, v.verdict))
    print("{}: {}".format(spec.name, result.consensus))

    if args.json:
        verdicts = {"consensus": result.consensus, "points": [v.to_dict() for v in result.verdicts]}
        summary = {"tol": result.tol, "consistent": result.consistent, "seed": args.seed}
        write_json(args.json, _report(spec.name, [v.point for v in result.verdicts], verdicts=verdicts,
                                      summary=summary))
    if args.csv:
        rows = [[str(v.point), v.verdict, v.berwald_measure, v.landsberg_measure, v.lambda_measure,
                 v.max_berwald, v.max_landsberg] for v in result.verdicts]
        write_csv(args.csv, ["point", "verdict", "berwald", "landsberg", "lambda", "max_Gb", "max_L"], rows)
    return 0 if result.consistent else 1


def cmd_reproduce(args):
    items = reproduce_examples(args.orders, args.points, args.seed, args.tol, progress=not args.quiet)
    for item in items:
        print("[{}] {:<22} {}".format("pass" if item.passed else "FAIL", item.key, item.detail))
    passed = all(item.passed for item in items)
    print("{} of {} item(s) pass".format(sum(item.passed for item in items), len(items)))
    if args.json:
        verdicts = {item.key: item.to_dict() for item in items}
        write_json(args.json, _report("examples", [], verdicts=verdicts, summary={"passed": passed}))
    if args.csv:
        write_csv(args.csv, ["item", "passed", "detail"], [[i.key, i.passed, i.detail] for i in items])
    return 0 if passed else 1


COMMANDS = {
    "tensors": cmd_tensors,
    "nullity": cmd_nullity,
    "scan": cmd_scan,
    "verify": cmd_verify,
    "classify": cmd_classify,
    "reproduce": cmd_reproduce,
}


def get_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    common.add_argument("-q", "--quiet", action="store_true", help="warnings only, no progress bars")
    common.add_argument(
        "--orders",
        type=parse_orders,
        help="jet truncation orders Dx,Dy (default: $FINSLER_DEFAULT_ORDERS or 2,6)",
    )
    common.add_argument("--tol", type=float, default=IDENTITY_TOL, help="identity residual tolerance")
    common.add_argument("--rank-tol", type=float, default=RANK_TOL, help="relative singular value threshold")
    common.add_argument("--class-tol", type=float, default=CLASS_TOL, help="Berwald/Landsberg threshold")
    common.add_argument("--cond-max", type=float, default=COND_MAX, help="largest accepted cond(g)")
    common.add_argument("--json", help="write a JSON report ('-' for stdout)")
    common.add_argument("--csv", help="write a CSV report ('-' for stdout)")

    metric = argparse.ArgumentParser(add_help=False)
    metric.add_argument(
        "--metric",
        required=True,
        help="metric file or built-in: {}".format(", ".join(builtin_names())),
    )

    point = argparse.ArgumentParser(add_help=False)
    point.add_argument("--point", type=parse_point, required=True, help='e.g. "x=0,1,0,0;y=1,1,1,1"')

    sampled = argparse.ArgumentParser(add_help=False)
    sampled.add_argument("--points", type=int, default=20, help="number of random in-domain points")
    sampled.add_argument("--seed", type=int, default=0)

    parser = argparse.ArgumentParser(description="Finsler tensors, nullity spaces and identity checks")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("tensors", parents=[common, metric, point], help="evaluate tensors at a point")
    p.add_argument("--tensor", action="append", choices=TENSOR_NAMES, help="restrict to these tensors")

    p = sub.add_parser("nullity", parents=[common, metric, point], help="nullity or kernel space at a point")
    p.add_argument("--tensor", choices=TENSOR_KINDS, default="chern-h")
    p.add_argument("--mode", choices=["nullity", "kernel", "compare"], default="nullity")

    p = sub.add_parser("scan", parents=[common, metric], help="nullity indices over a grid")
    p.add_argument("--grid", type=parse_grid, required=True, help='e.g. "y3=1.5:2.5:5,x1=0:1:3"')
    p.add_argument("--point", type=parse_point, help="values of the coordinates not on the grid")
    p.add_argument("--tensor", action="append", choices=TENSOR_KINDS)
    p.add_argument("--workers", type=int, default=1, help="processes evaluating grid points")
    p.add_argument("--no-ray", action="store_true", help="skip the y -> 2y invariance check")

    sub.add_parser("verify", parents=[common, metric, sampled], help="identity suite at random points")
    sub.add_parser("classify", parents=[common, metric, sampled], help="Berwald / Landsberg verdicts")

    p = sub.add_parser("reproduce", parents=[common], help="golden example suite")
    p.add_argument("--points", type=int, default=20)
    p.add_argument("--seed", type=int, default=7)
    return parser


def main(argv=None):
    parser = get_parser()
    args = parser.parse_args(argv)

    if args.verbose:
        set_verbosity("DEBUG")
    elif args.quiet:
        set_verbosity("WARNING")
    if args.command == "nullity" and args.mode != "nullity" and args.tensor not in KERNEL_SLOTS:
        parser.error("--mode {} needs --tensor {}".format(args.mode, " or ".join(KERNEL_SLOTS)))
    if getattr(args, "points", 1) < 1:
        parser.error("--points must be at least 1")
    if getattr(args, "workers", 1) < 1:
        parser.error("--workers must be at least 1")

    try:
        if args.orders is None:
            args.orders = get_default_orders()
        return COMMANDS[args.command](args)
    except FinslerError as e:
        logger.error("%s", e)
        return e.exit_code


if __name__ == "__main__":
    sys.exit(main())
