"""Command-line interface.

Verbs: ``match`` (two point sets -> correspondence report), ``dgm``
(deformable matching -> report + transform), ``bench`` (experiment suites ->
CSV/JSON tables), ``verify`` (disturbed-minimum curve -> CSV).

Exit codes: 0 success (including warning-flagged runs), 1 usage error,
2 runtime/schema error. All artifacts are written atomically and runs are
byte-reproducible from the same inputs and seed when timing output is
disabled (--no-timing).
"""

import argparse
import csv
import json
import os
import sys
import tempfile
from dataclasses import dataclass

import numpy as np

from . import bench as bench_mod
from .core import InlierPartition, load_pointset, metrics
from .deformable import DgmConfig, dgm_solve
from .features import ShapeContextConfig
from .outliers import RemovalConfig, match_with_removal
from .solver import SolverConfig

USAGE_EXIT, RUNTIME_EXIT = 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


@dataclass
class Command:
    verb: str
    a: str = None
    b: str = None
    gt: str = None
    out: str = None
    k: int = None
    ratio: float = None
    method: str = "zac"
    removal: str = "on"
    mode: str = "rigid"
    rotation_invariant: bool = False
    lambda0: float = 1.0
    lambda1: float = 1.0
    lambda2: float = 1.0
    beta: float = 2.0
    lambda_r: float = 3.0
    seed: int = None
    suite: str = None
    trials: int = None
    inliers: int = None
    outliers: int = 4
    max_disturb: int = 5
    timing: bool = True

    def canonical(self):
        """Canonical argument vector; parsing it reproduces this command."""
        args = [self.verb]
        for flag, value, default in (
                ("--a", self.a, None), ("--b", self.b, None),
                ("--gt", self.gt, None), ("--out", self.out, None),
                ("--k", self.k, None), ("--ratio", self.ratio, None),
                ("--method", self.method, "zac"),
                ("--removal", self.removal, "on"),
                ("--mode", self.mode, "rigid"),
                ("--lambda0", self.lambda0, 1.0),
                ("--lambda1", self.lambda1, 1.0),
                ("--lambda2", self.lambda2, 1.0),
                ("--beta", self.beta, 2.0),
                ("--lambda-r", self.lambda_r, 3.0),
                ("--seed", self.seed, None),
                ("--suite", self.suite, None),
                ("--trials", self.trials, None),
                ("--inliers", self.inliers, None),
                ("--outliers", self.outliers, 4),
                ("--max-disturb", self.max_disturb, 5)):
            if value is not None and value != default:
                args.extend([flag, str(value)])
        if self.rotation_invariant:
            args.append("--rotation-invariant")
        if not self.timing:
            args.append("--no-timing")
        return args


def _build_parser():
    parser = _Parser(prog="zeromatch", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="verb", required=True)

    def common(p, files=True):
        if files:
            p.add_argument("--a", required=True, help="side-A point set JSON")
            p.add_argument("--b", required=True, help="side-B point set JSON")
            p.add_argument("--gt", help="ground-truth partition JSON")
        p.add_argument("--out", help="output artifact path")
        p.add_argument("--k", type=int, help="assignment cardinality")
        p.add_argument("--ratio", type=float,
                       help="k = floor(ratio * min(m, n))")
        p.add_argument("--method", choices=("zac", "zacr"), default="zac")
        p.add_argument("--lambda0", type=float, default=1.0)
        p.add_argument("--lambda1", type=float, default=1.0)
        p.add_argument("--lambda2", type=float, default=1.0)
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--no-timing", dest="timing", action="store_false",
                       help="omit wall-clock fields for reproducible bytes")

    p_match = sub.add_parser("match", help="match two point sets")
    common(p_match)
    p_match.add_argument("--removal", choices=("on", "off"), default="on")
    p_match.add_argument("--rotation-invariant", action="store_true")

    p_dgm = sub.add_parser("dgm", help="deformable matching")
    common(p_dgm)
    p_dgm.add_argument("--mode", choices=("rigid", "nonrigid"), default="rigid")
    p_dgm.add_argument("--removal", choices=("on", "off"), default="on")
    p_dgm.add_argument("--beta", type=float, default=2.0)
    p_dgm.add_argument("--lambda-r", dest="lambda_r", type=float, default=3.0)

    p_bench = sub.add_parser("bench", help="run an experiment suite")
    common(p_bench, files=False)
    p_bench.add_argument("--suite", required=True,
                         choices=bench_mod.EXPERIMENTS)
    p_bench.add_argument("--trials", type=int, default=None)
    p_bench.add_argument("--inliers", type=int, default=None)

    p_verify = sub.add_parser("verify",
                              help="disturbed-minimum verification curve")
    common(p_verify, files=False)
    p_verify.add_argument("--a", help="side-A point set JSON (optional)")
    p_verify.add_argument("--b", help="side-B point set JSON (optional)")
    p_verify.add_argument("--gt", help="ground-truth partition JSON")
    p_verify.add_argument("--max-disturb", dest="max_disturb", type=int,
                          default=5)
    p_verify.add_argument("--trials", type=int, default=1)
    p_verify.add_argument("--inliers", type=int, default=10)
    p_verify.add_argument("--outliers", type=int, default=4)
    return parser


def parse_args(argv):
    """Parse an argument vector into a validated Command."""
    ns = _build_parser().parse_args(argv)
    fields = {f: getattr(ns, f) for f in vars(ns)}
    cmd = Command(**fields)
    if cmd.k is not None and cmd.k < 1:
        raise UsageError(f"--k must be >= 1, got {cmd.k}")
    if cmd.ratio is not None and not 0.0 < cmd.ratio <= 1.0:
        raise UsageError(f"--ratio must be in (0, 1], got {cmd.ratio}")
    if cmd.k is not None and cmd.ratio is not None:
        raise UsageError("give either --k or --ratio, not both")
    if cmd.trials is not None and cmd.trials < 1:
        raise UsageError("--trials must be >= 1")
    if cmd.max_disturb < 0:
        raise UsageError("--max-disturb must be >= 0")
    if cmd.seed is None:
        env = os.environ.get("ZEROMATCH_SEED", "").strip()
        cmd.seed = int(env) if env else 0
    return cmd


def _atomic_write(path, text):
    directory = os.path.dirname(os.path.abspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-zeromatch-")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _write_json(path, obj):
    _atomic_write(path, json.dumps(obj, indent=1, sort_keys=True) + "\n")
    with open(path, "r", encoding="utf-8") as fh:
        json.load(fh)  # schema self-check: artifact must parse back


def _load_gt(path):
    with open(path, "r", encoding="utf-8") as fh:
        obj = json.load(fh)
    try:
        return InlierPartition(
            inliers_a=set(obj["inliersA"]), outliers_a=set(obj["outliersA"]),
            inliers_b=set(obj["inliersB"]), outliers_b=set(obj["outliersB"]),
            tau={int(i): int(a) for i, a in obj["tau"].items()})
    except KeyError as exc:
        raise ValueError(f"{path}: ground truth is missing field {exc}") from exc


def _resolve_k(cmd, m, n):
    if cmd.k is not None:
        return cmd.k
    ratio = cmd.ratio if cmd.ratio is not None else 1.0
    return max(1, int(np.floor(ratio * min(m, n))))


def _solver_config():
    return SolverConfig()


def _cmd_match(cmd):
    pts_a = load_pointset(cmd.a)
    pts_b = load_pointset(cmd.b)
    from .core import build_problem
    prob = build_problem(pts_a, pts_b,
                         ShapeContextConfig(rotation_invariant=cmd.rotation_invariant),
                         lambda0=cmd.lambda0, lambda1=cmd.lambda1,
                         lambda2=cmd.lambda2)
    k = _resolve_k(cmd, prob.m, prob.n)
    removal_cfg = RemovalConfig(method=cmd.method, solver=_solver_config())
    if cmd.removal == "on":
        res = match_with_removal(prob, k, removal_cfg)
        rep, part, warnings = res.report, res.partition, res.warnings
    else:
        from .solver import frank_wolfe_zac, frank_wolfe_zacr
        solve = frank_wolfe_zacr if cmd.method == "zacr" else frank_wolfe_zac
        rep = solve(prob, k, removal_cfg.solver)
        part, warnings = None, []

    P_bin = prob.to_input_orientation(rep.final_binary.mat)
    pairs = [[int(i), int(a)] for i, a in np.argwhere(P_bin == 1.0)]
    report = {
        "method": cmd.method, "removal": cmd.removal, "k": rep.k_final,
        "iterations": rep.iterations,
        "objectiveTrace": rep.objective_trace,
        "pairs": pairs,
        "warnings": warnings,
    }
    if part is not None:
        if prob.swapped:
            part = InlierPartition(
                inliers_a=part.inliers_b, outliers_a=part.outliers_b,
                inliers_b=part.inliers_a, outliers_b=part.outliers_a,
                tau={a: i for i, a in part.tau.items()})
        report["partition"] = part.to_json_obj()
    if cmd.timing:
        report["elapsedSeconds"] = rep.elapsed
    if cmd.gt:
        mm = metrics(P_bin, _load_gt(cmd.gt))
        report["metrics"] = {"recall": mm.recall, "precision": mm.precision,
                             "fMeasure": mm.f_measure}
    _write_json(cmd.out or "match_report.json", report)
    return 0


def _cmd_dgm(cmd):
    pts_a = load_pointset(cmd.a)
    pts_b = load_pointset(cmd.b)
    k = _resolve_k(cmd, len(pts_a), len(pts_b)) if cmd.k or cmd.ratio \
        else max(1, int(0.5 * min(len(pts_a), len(pts_b))))
    cfg = DgmConfig(mode=cmd.mode, beta=cmd.beta, lambda_r=cmd.lambda_r,
                    removal=(cmd.removal == "on"),
                    removal_config=RemovalConfig(method=cmd.method,
                                                 solver=_solver_config()),
                    lambda0=cmd.lambda0, lambda1=cmd.lambda1,
                    lambda2=cmd.lambda2)
    res = dgm_solve(pts_a, pts_b, k, cfg)
    pairs = [[int(i), int(a)] for i, a in res.report.final_binary.pairs()]
    report = {
        "mode": cmd.mode, "k": res.report.k_final, "rounds": res.rounds,
        "pairs": pairs, "warnings": res.warnings,
        "transform": res.transform.to_json_obj(),
    }
    if res.partition is not None:
        report["partition"] = res.partition.to_json_obj()
    if cmd.timing:
        report["elapsedSeconds"] = res.report.elapsed
    if cmd.gt:
        gt = _load_gt(cmd.gt)
        mm = metrics(res.report.final_binary.mat, gt)
        from .deformable import normalize_points, transform_error
        An, _, _ = normalize_points(pts_a.points)
        Bn, _, _ = normalize_points(pts_b.points)
        err = transform_error(res.transform.inner, An, gt, Bn)
        report["metrics"] = {"recall": mm.recall, "precision": mm.precision,
                             "fMeasure": mm.f_measure, "avgError": err}
    _write_json(cmd.out or "dgm_report.json", report)
    return 0


def _cmd_bench(cmd):
    cfg = bench_mod.ExperimentConfig(
        name=cmd.suite, seed=cmd.seed, trials=cmd.trials, inliers=cmd.inliers,
        include_timing=cmd.timing)
    rows = bench_mod.run_experiment(cfg)
    out = cmd.out or f"{cmd.suite}.csv"
    bench_mod.write_rows_csv(rows, out)
    base, _ = os.path.splitext(out)
    bench_mod.write_rows_json(rows, base + ".json")
    with open(out, "r", encoding="utf-8") as fh:
        header = fh.readline().strip()
    if header != ",".join(bench_mod.CSV_COLUMNS):  # pragma: no cover
        raise ValueError("bench CSV failed schema self-check")
    for (config_id, metric), (mean, std) in bench_mod.summarize(rows).items():
        print(f"{cmd.suite} {config_id} {metric}: {mean:.6f} +- {std:.6f}")
    return 0


def _cmd_verify(cmd):
    if cmd.a and cmd.b and cmd.gt:
        inst = bench_mod.SynthInstance(pts_a=load_pointset(cmd.a),
                                       pts_b=load_pointset(cmd.b),
                                       gt=_load_gt(cmd.gt))
    else:
        inst = bench_mod.premise_instance(seed=cmd.seed, inliers=cmd.inliers,
                                          outliers=cmd.outliers)
    curve = bench_mod.verify_condition(inst, cmd.max_disturb,
                                       trials=cmd.trials, seed=cmd.seed,
                                       solver_config=_solver_config())
    means = curve.mean(axis=0)
    lines = ["d,value"]
    lines += [f"{d},{float(means[d])!r}" for d in range(cmd.max_disturb + 1)]
    _atomic_write(cmd.out or "verify_curve.csv", "\n".join(lines) + "\n")
    return 0


_EXECUTORS = {"match": _cmd_match, "dgm": _cmd_dgm, "bench": _cmd_bench,
              "verify": _cmd_verify}


def execute(cmd):
    """Run a parsed Command; returns the process exit status."""
    try:
        return _EXECUTORS[cmd.verb](cmd)
    except (ValueError, OSError, KeyError) as exc:
        print(f"zeromatch: error: {exc}", file=sys.stderr)
        return RUNTIME_EXIT


def main(argv=None):
    argv = sys.argv[1:] if argv is None else argv
    try:
        cmd = parse_args(argv)
    except UsageError as exc:
        print(f"zeromatch: usage error: {exc}", file=sys.stderr)
        return USAGE_EXIT
    return execute(cmd)


if __name__ == "__main__":
    sys.exit(main())
