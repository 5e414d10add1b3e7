"""Command-line driver: ``stablecluster {generate,solve,verify,bench}``."""

from __future__ import annotations

import argparse
import gc
import json
import math
import statistics
import sys
import time
from pathlib import Path
from typing import List, Optional, Sequence

import numpy as np

from .clustering import same_partition
from .coreset import solve_via_coreset
from .dp import solve_dp, fill_table
from .errors import BudgetError, InfeasibleError, ParameterError, StableClusterError, UnsupportedEngineError
from .geometry import EUCLIDEAN, L1, Objective, format_float, read_points_csv, resolve_metric
from .local_search import local_search_kmedian, resolve_threads
from .mst import build_merge_tree, minimum_spanning_tree
from .oracle import CENTER_SUBSETS_MAX, PARTITION_MAX_K, PARTITION_MAX_N, brute_force_optimal
from .stability import StableInstance, certify, generate_stable_instance, spread

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_PARAMETER = 2
EXIT_IO = 3


class InputError(Exception):
    """Unreadable or malformed input file."""


def dumps(obj, indent: int = 2) -> str:
    """JSON with every float written to 17 significant digits; non-finite floats become strings."""

    def enc(v, level):
        pad = " " * (indent * (level + 1))
        end = " " * (indent * level)
        if isinstance(v, dict):
            if not v:
                return "{}"
            items = [f"{pad}{json.dumps(str(key))}: {enc(val, level + 1)}" for key, val in v.items()]
            return "{\n" + ",\n".join(items) + "\n" + end + "}"
        if isinstance(v, (list, tuple)):
            if not v:
                return "[]"
            if all(not isinstance(x, (dict, list, tuple)) for x in v):
                return "[" + ", ".join(enc(x, level + 1) for x in v) + "]"
            return "[\n" + ",\n".join(pad + enc(x, level + 1) for x in v) + "\n" + end + "]"
        if isinstance(v, np.ndarray):
            return enc(v.tolist(), level)
        if isinstance(v, (bool, np.bool_)):
            return "true" if v else "false"
        if isinstance(v, (int, np.integer)):
            return str(int(v))
        if isinstance(v, (float, np.floating)):
            f = float(v)
            if math.isfinite(f):
                return format_float(f)
            return json.dumps("nan" if math.isnan(f) else ("inf" if f > 0 else "-inf"))
        if v is None:
            return "null"
        return json.dumps(str(v) if not isinstance(v, str) else v)

    return enc(obj, 0) + "\n"


def _emit(obj, path: Optional[str]) -> None:
    text = dumps(obj)
    if path:
        try:
            Path(path).write_text(text)
        except OSError as exc:
            raise InputError(f"cannot write {path}: {exc}") from exc
    else:
        sys.stdout.write(text)


def _load_points(path: str) -> np.ndarray:
    try:
        return read_points_csv(path)
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc
    except ParameterError as exc:
        raise InputError(str(exc)) from exc


def _load_sidecar(path: Optional[str]) -> Optional[dict]:
    if not path:
        return None
    try:
        return json.loads(Path(path).read_text())
    except (OSError, ValueError) as exc:
        raise InputError(f"cannot read sidecar {path}: {exc}") from exc


def _metric(args, objective: Objective, d: int, alpha: Optional[float]):
    if args.metric == "auto" and objective is Objective.MEANS:
        return EUCLIDEAN  # squared Euclidean cost regardless of norm choice
    return resolve_metric(args.metric, d, args.epsilon, alpha)


# -- generate -------------------------------------------------------------


def cmd_generate(args) -> int:
    inst = generate_stable_instance(args.k, args.n, args.d, args.alpha, seed=args.seed)
    try:
        side = inst.save(args.out, args.sidecar)
    except OSError as exc:
        raise InputError(f"cannot write instance: {exc}") from exc
    _emit({"points": str(args.out), "sidecar": str(side), "certified": inst.certificate["passed"],
           "spread": inst.spread}, None)
    return EXIT_OK


# -- solve ----------------------------------------------------------------


def _cross_check(P, k, objective, m, result) -> dict:
    n = P.shape[0]
    if n <= PARTITION_MAX_N and k <= PARTITION_MAX_K:
        mode = "partition"
    elif math.comb(n, k) <= CENTER_SUBSETS_MAX:
        mode = "centers"
    else:
        return {"oracle_run": False, "reason": "instance exceeds oracle limits"}
    oracle = brute_force_optimal(P, k, objective, m, mode=mode)
    agrees = same_partition(oracle.labels, result.labels)
    return {"oracle_run": True, "mode": mode, "agrees": bool(agrees), "oracle_cost": oracle.total_cost}


def cmd_solve(args) -> int:
    P = _load_points(args.input)
    side = _load_sidecar(args.sidecar)
    alpha = args.alpha if args.alpha is not None else (side or {}).get("alpha_target")
    objective = Objective(args.objective)
    if args.engine is not None and args.algorithm != "local":
        raise ParameterError("--engine only applies to --algorithm local")
    if args.dump_merge_tree and args.algorithm != "dp":
        raise ParameterError("--dump-merge-tree only applies to --algorithm dp")
    m = _metric(args, objective, P.shape[1], alpha)
    threads = resolve_threads(args.threads)
    t0 = time.perf_counter()
    if args.algorithm == "dp":
        result, table = solve_dp(P, args.k, objective, m)
        if args.dump_merge_tree:
            _emit(table.tree.to_json(), args.dump_merge_tree)
        record_extra = {"insertions": table.insertions}
    elif args.algorithm == "local":
        if objective is not Objective.MEDIAN:
            raise ParameterError("local search solves the median objective only")
        result, iterations = local_search_kmedian(
            P, args.k, m, seed=args.seed, engine=args.engine or "naive", threads=threads)
        record_extra = {}
    elif args.algorithm == "coreset":
        result = solve_via_coreset(P, args.k, objective, m, eps=args.coreset_eps)
        record_extra = {}
    else:
        result = brute_force_optimal(P, args.k, objective, m, mode=args.oracle_mode)
        record_extra = {}
    elapsed = 1e3 * (time.perf_counter() - t0)
    if not result.timings:
        result.timings = {"solve_ms": elapsed}
    if alpha is not None and result.k > 0:
        cert = certify(P, result.labels, result.centers, float(alpha), m)
        result.stability_certified = bool(cert["passed"])
    name = {"local": "local_search", "oracle": "oracle"}.get(args.algorithm, args.algorithm)
    record = result.to_json(name, include_timings=not args.no_timings)
    record.update(record_extra)
    if args.cross_check:
        record["cross_check"] = _cross_check(P, args.k, objective, m, result)
    _emit(record, args.output)
    return EXIT_OK


# -- verify ---------------------------------------------------------------


def cmd_verify(args) -> int:
    P = _load_points(args.input)
    sidecar = args.sidecar or str(Path(args.input).with_suffix(".json"))
    side = _load_sidecar(sidecar)
    labels = np.asarray(side["labels"], dtype=np.int64)
    centers = np.asarray(side["centers"], dtype=np.float64)
    alpha = args.alpha if args.alpha is not None else float(side["alpha_target"])
    m = resolve_metric(args.metric if args.metric != "auto" else "euclidean", P.shape[1], args.epsilon)
    report = certify(P, labels, centers, alpha, m)
    report["spread"] = spread(P) if P.shape[0] > 1 else None
    _emit(report, args.output)
    return EXIT_OK if report["passed"] else EXIT_CHECK_FAILED


# -- bench ----------------------------------------------------------------


def _parse_sizes(text: str) -> List[int]:
    try:
        sizes = [int(float(v)) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ParameterError(f"bad size list {text!r}") from None
    if not sizes or min(sizes) < 1:
        raise ParameterError("sizes must be positive")
    return sizes


def _bench_table(rows: Sequence[dict]) -> str:
    head = f"{'n':>10}  {'median_ms':>12}  {'ratio':>7}  {'insertions':>12}  {'bound':>12}"
    lines = [head, "-" * len(head)]
    for r in rows:
        ratio = "-" if r["ratio"] is None else f"{r['ratio']:.3f}"
        lines.append(f"{r['n']:>10}  {r['median_ms']:>12.2f}  {ratio:>7}  {r['insertions']:>12}  {r['bound']:>12}")
    return "\n".join(lines)


def run_dp_bench(sizes, k=5, repeats=5, seed=0, alpha=None, objective="means", d=2) -> List[dict]:
    """Median DP wall time per size; the spanning tree is built once per size and excluded."""
    alpha = 2.0 + math.sqrt(3.0) + 0.3 if alpha is None else alpha
    rows, prev = [], None
    for i, n in enumerate(sizes):
        inst = generate_stable_instance(k, n, d, alpha, seed=seed + i)
        P = inst.points
        tree = build_merge_tree(minimum_spanning_tree(P, EUCLIDEAN))
        m = EUCLIDEAN if Objective(objective) is Objective.MEANS else L1
        times = []
        fill_table(P - P.mean(axis=0), tree, k, Objective(objective), m)  # untimed warm-up
        for _ in range(repeats):
            gc.collect()
            gc.disable()  # keep collector pauses out of the measurement
            try:
                t0 = time.perf_counter()
                table = fill_table(P - P.mean(axis=0), tree, k, Objective(objective), m)
                times.append(1e3 * (time.perf_counter() - t0))
            finally:
                gc.enable()
        med = statistics.median(times)
        rows.append({
            "n": n, "times_ms": times, "median_ms": med,
            "ratio": None if prev is None else med / prev,
            "insertions": table.insertions, "bound": n * math.ceil(math.log2(n)) if n > 1 else 0,
        })
        prev = med
    return rows


def run_iteration_check(sizes, k=5, seed=0, alpha=None, d=2) -> List[dict]:
    """Local-search swap counts against ``10 k log2(n * spread)`` on the generator family."""
    alpha = 2.0 + math.sqrt(3.0) + 0.3 if alpha is None else alpha
    rows = []
    for i, n in enumerate(sizes):
        inst = generate_stable_instance(k, n, d, alpha, seed=seed + 1000 + i)
        _, iterations = local_search_kmedian(inst.points, k, L1, seed=seed)
        bound = 10.0 * k * math.log2(n * spread(inst.points, L1))
        rows.append({"n": n, "iterations": iterations, "bound": bound, "within": iterations <= bound})
    return rows


def cmd_bench(args) -> int:
    if args.algorithm != "dp":
        raise ParameterError("bench supports --algorithm dp")
    rows = run_dp_bench(_parse_sizes(args.n), args.k, args.repeats, args.seed, args.alpha, args.objective)
    print(_bench_table(rows))
    worst = max((r["ratio"] for r in rows if r["ratio"] is not None), default=None)
    record = {"algorithm": "dp", "k": args.k, "objective": args.objective, "repeats": args.repeats,
              "rows": rows, "max_doubling_ratio": worst}
    if args.local_n:
        checks = run_iteration_check(_parse_sizes(args.local_n), args.k, args.seed, args.alpha)
        for r in checks:
            print(f"local search n={r['n']}: {r['iterations']} swaps (bound {r['bound']:.1f})")
        record["local_search"] = checks
    _emit(record, args.output)
    return EXIT_OK


# -- parser ---------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="stablecluster", description="Exact clustering of stable instances.")
    sub = ap.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write a certified stable instance")
    g.add_argument("--k", type=int, required=True)
    g.add_argument("--n", type=int, required=True)
    g.add_argument("--d", type=int, default=2)
    g.add_argument("--alpha", type=float, default=6.0)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True, help="points CSV path")
    g.add_argument("--sidecar", help="sidecar JSON path (default: CSV path with .json)")
    g.set_defaults(func=cmd_generate)

    s = sub.add_parser("solve", help="cluster a point set")
    s.add_argument("--input", required=True)
    s.add_argument("--k", type=int, required=True)
    s.add_argument("--objective", choices=[o.value for o in Objective], default="means")
    s.add_argument("--metric", default="auto", choices=["auto", "euclidean", "l1", "polyhedral"])
    s.add_argument("--epsilon", type=float, default=0.05, help="polyhedral approximation slack")
    s.add_argument("--algorithm", choices=["dp", "local", "coreset", "oracle"], default="dp")
    s.add_argument("--engine", choices=["naive", "accelerated"])
    s.add_argument("--oracle-mode", choices=["partition", "centers"], default="partition")
    s.add_argument("--coreset-eps", type=float, default=1.0)
    s.add_argument("--alpha", type=float, help="stability level used for --metric auto and certification")
    s.add_argument("--sidecar", help="instance sidecar JSON (supplies alpha)")
    s.add_argument("--seed", type=int)
    s.add_argument("--threads", type=int)
    s.add_argument("--output")
    s.add_argument("--no-timings", action="store_true")
    s.add_argument("--cross-check", action="store_true")
    s.add_argument("--dump-merge-tree", metavar="PATH")
    s.set_defaults(func=cmd_solve)

    v = sub.add_parser("verify", help="check stability certificates of an instance")
    v.add_argument("--input", required=True)
    v.add_argument("--sidecar")
    v.add_argument("--alpha", type=float)
    v.add_argument("--metric", default="euclidean", choices=["auto", "euclidean", "l1", "polyhedral"])
    v.add_argument("--epsilon", type=float, default=0.05)
    v.add_argument("--output")
    v.set_defaults(func=cmd_verify)

    b = sub.add_parser("bench", help="time the dynamic program across sizes")
    b.add_argument("--algorithm", default="dp")
    b.add_argument("--k", type=int, default=5)
    b.add_argument("--n", default="10000,20000,40000,80000")
    b.add_argument("--repeats", type=int, default=5)
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--alpha", type=float)
    b.add_argument("--objective", choices=[o.value for o in Objective], default="means")
    b.add_argument("--local-n", default="", help="sizes for the local-search swap-count check")
    b.add_argument("--output")
    b.set_defaults(func=cmd_bench)
    return ap


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ParameterError, InfeasibleError, BudgetError, UnsupportedEngineError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARAMETER
    except StableClusterError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARAMETER


if __name__ == "__main__":
    sys.exit(main())
