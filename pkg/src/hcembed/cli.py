"""Command-line surface: gen, cluster, eval, bench, oracle.

Exit codes: 0 success, 1 I/O error, 2 bad parameters or malformed input,
3 algorithm failure.  Every output file gets a ``<output>.manifest.json``
sidecar that fully reconstructs the run.
"""

from __future__ import annotations

import argparse
import json
import resource
import sys
import time
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import __version__, errors, oracle
from .algos import ALGORITHMS, HcConfig, run_algorithm
from .dataset import gen_mixture, load_dataset, save_dataset
from .dendrogram import deserialize, serialize
from .measures import Measure, build_feature_maps
from .objectives import evaluate_tree
from .partitioner import PartitionConfig

_PARAM_ERRORS = (
    errors.InvalidParamError,
    errors.FormatError,
    errors.EmptyDatasetError,
    errors.MeasureMismatchError,
    errors.DimensionMismatchError,
    errors.ZeroVectorError,
    errors.MissingLabelsError,
    errors.NonBinaryTreeError,
    errors.TooLargeError,
    errors.InfeasibleError,
)

OBJECTIVES = ("mw", "ckmm", "dasgupta", "mw_plus", "ckmm_plus")


def _fmt2(value: float) -> str:
    """Two-decimal table format in the .NN style (negatives keep their sign)."""
    text = f"{value:.2f}"
    if text.startswith("0."):
        return text[1:]
    if text.startswith("-0."):
        return "-" + text[2:]
    return text


def _peak_rss_kb() -> int:
    return int(resource.getrusage(resource.RUSAGE_SELF).ru_maxrss)


def _write_manifest(output: Path, payload: dict) -> None:
    Path(str(output) + ".manifest.json").write_text(
        json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _measure_from_args(args) -> Measure:
    return Measure(kind=args.measure, gamma=args.gamma, rbf_features=args.rbf_features)


def _load_from_args(args):
    return load_dataset(args.data, args.format, label_col=args.label_col,
                        has_header=args.header)


def _partition_from_args(args) -> PartitionConfig:
    return PartitionConfig(delta=args.delta, iterations=args.iterations,
                           noise_variance=args.noise, rounding=args.rounding,
                           restarts=args.restarts, eta0=args.eta0)


def _manifest_base(args, command: str, started: float) -> dict:
    skip = {"func", "argv"}
    flags = {k: v for k, v in vars(args).items() if k not in skip}
    return {
        "tool": f"hcembed {__version__}",
        "command": command,
        "argv": list(getattr(args, "argv", [])),
        "args": flags,
        "wall_clock_s": time.perf_counter() - started,
        "peak_rss_kb": _peak_rss_kb(),
    }


def cmd_gen(args) -> int:
    started = time.perf_counter()
    ds = gen_mixture(args.clusters, args.per, args.dim, args.sep, args.seed)
    if args.no_labels:
        ds.labels = None
    save_dataset(ds, args.output, args.format)
    _write_manifest(Path(args.output), _manifest_base(args, "gen", started))
    print(f"wrote {ds.n} x {ds.d} dataset to {args.output} ({args.format})")
    return 0


def cmd_cluster(args) -> int:
    started = time.perf_counter()
    ds = _load_from_args(args)
    measure = _measure_from_args(args) if args.measure else None
    config = HcConfig(algorithm=args.algo, theta=args.theta,
                      partition=_partition_from_args(args), seed=args.seed)
    tree = run_algorithm(ds, measure, config)
    Path(args.output).write_bytes(serialize(tree))
    _write_manifest(Path(args.output), _manifest_base(args, "cluster", started))
    print(f"wrote tree with {tree.n_leaves} leaves to {args.output}")
    return 0


def _report_table(report) -> str:
    rows = [
        ("objective", report.objective_kind),
        ("n", str(report.n)),
        ("Q", f"{report.q_value:.6g}"),
        ("Q_bound", f"{report.q_upper:.6g}"),
        ("E[Q(T_R)]", f"{report.q_random_expected:.6g}"),
        ("alpha/alpha*", f"{_fmt2(report.alpha)}/{_fmt2(report.alpha_star)}"),
    ]
    if report.degenerate:
        rows.append(("degenerate", "yes"))
    if report.dendrogram_purity is not None:
        rows.append(("purity", f"{report.dendrogram_purity:.4f}"))
    width = max(len(k) for k, _ in rows)
    return "\n".join(f"{k.ljust(width)}  {v}" for k, v in rows)


def cmd_eval(args) -> int:
    started = time.perf_counter()
    ds = _load_from_args(args)
    tree = deserialize(Path(args.tree).read_bytes())
    if tree.n_leaves != ds.n:
        raise errors.DimensionMismatchError(
            f"tree has {tree.n_leaves} leaves but dataset has {ds.n} rows")
    measure = _measure_from_args(args)
    maps = build_feature_maps(ds, measure, seed=args.seed)
    labels = ds.labels if args.dp else None
    if args.dp and ds.labels is None:
        raise errors.MissingLabelsError("--dp needs a dataset with labels")
    report = evaluate_tree(tree, maps, args.objective, labels=labels)
    print(_report_table(report))
    if args.output:
        Path(args.output).write_text(
            json.dumps(report.to_dict(), indent=2) + "\n", encoding="utf-8")
        _write_manifest(Path(args.output), _manifest_base(args, "eval", started))
    return 0


def _parse_algo_token(token: str) -> tuple[str, dict]:
    """'bppc:delta=0,theta=64' -> ('bppc', {'delta': 0.0, 'theta': 64})."""
    name, _, raw = token.partition(":")
    overrides: dict = {}
    if raw:
        for piece in raw.split(","):
            key, _, value = piece.partition("=")
            if not key or not value:
                raise errors.InvalidParamError(f"bad algorithm token {token!r}")
            try:
                parsed = int(value)
            except ValueError:
                try:
                    parsed = float(value)
                except ValueError:
                    parsed = value
            overrides[key] = parsed
    if name not in ALGORITHMS:
        raise errors.InvalidParamError(f"unknown algorithm {name!r}")
    return name, overrides


def bench_run(ds, measure: Measure, tokens: list[str], objective: str,
              reps: int, seed: int, base: HcConfig | None = None,
              with_purity: bool = False) -> dict:
    """Run algorithms x repetitions, scoring alpha*/alpha per run.

    The upper bound and random-tree expectation are computed once per
    instance and reused.  Partial failures are recorded per row.
    """
    maps = build_feature_maps(ds, measure, seed=seed)
    bound = None
    expectation = None
    rows = []
    for token in tokens:
        name, overrides = _parse_algo_token(token)
        part_overrides = {k: v for k, v in overrides.items()
                          if k in ("delta", "iterations", "noise_variance",
                                   "rounding", "restarts", "eta0")}
        theta = int(overrides.get("theta", base.theta if base else 512))
        stars, alphas, purities, walls = [], [], [], []
        error = None
        for rep in range(reps):
            rep_seed = int(np.random.SeedSequence([seed, rep]).generate_state(1)[0])
            base_part = base.partition if base else PartitionConfig(delta=0.1)
            part = PartitionConfig(**{**asdict(base_part), **part_overrides,
                                      "seed": 0, "learning_rates": None})
            config = HcConfig(algorithm=name, theta=theta, partition=part,
                              seed=rep_seed)
            t0 = time.perf_counter()
            try:
                tree = run_algorithm(ds, measure, config)
            except errors.HCEmbedError as exc:
                error = f"{type(exc).__name__}: {exc}"
                break
            walls.append(time.perf_counter() - t0)
            report = evaluate_tree(tree, maps, objective,
                                   bound=bound, expectation=expectation)
            bound = report.q_upper
            expectation = report.q_random_expected
            stars.append(report.alpha_star)
            alphas.append(report.alpha)
            if with_purity and ds.labels is not None:
                from .objectives import dendrogram_purity
                purities.append(dendrogram_purity(tree, ds.labels))
        row = {"algorithm": token, "reps": len(stars), "error": error}
        if stars:
            row.update({
                "alpha_star_mean": float(np.mean(stars)),
                "alpha_star_std": float(np.std(stars)),
                "alpha_mean": float(np.mean(alphas)),
                "alpha_std": float(np.std(alphas)),
                "wall_clock_mean_s": float(np.mean(walls)),
                "alpha_star_runs": stars,
            })
            if purities:
                row["purity_mean"] = float(np.mean(purities))
                row["purity_runs"] = purities
        rows.append(row)
    ok = [r for r in rows if r["error"] is None and r["reps"] > 0]
    ok.sort(key=lambda r: -r["alpha_star_mean"])
    failed = [r for r in rows if r not in ok]
    return {"objective": objective, "reps": reps, "seed": seed,
            "rows": ok + failed}


def _bench_table(result: dict) -> str:
    header = f"{'algorithm':<24} {'alpha*':>13} {'alpha':>13} {'wall_s':>8}"
    lines = [header, "-" * len(header)]
    for row in result["rows"]:
        if row["error"] is not None:
            lines.append(f"{row['algorithm']:<24} FAILED: {row['error']}")
            continue
        star = f"{_fmt2(row['alpha_star_mean'])} ± {_fmt2(row['alpha_star_std'])}"
        alpha = f"{_fmt2(row['alpha_mean'])} ± {_fmt2(row['alpha_std'])}"
        line = f"{row['algorithm']:<24} {star:>13} {alpha:>13} {row['wall_clock_mean_s']:>8.2f}"
        if "purity_mean" in row:
            line += f"  DP={row['purity_mean']:.3f}"
        lines.append(line)
    return "\n".join(lines)


def cmd_bench(args) -> int:
    started = time.perf_counter()
    ds = _load_from_args(args)
    measure = _measure_from_args(args)
    tokens = [t.strip() for t in args.algos.split(",") if t.strip()]
    if not tokens:
        raise errors.InvalidParamError("no algorithms given")
    base = HcConfig(theta=args.theta, partition=_partition_from_args(args),
                    seed=args.seed)
    result = bench_run(ds, measure, tokens, args.objective, args.reps,
                       args.seed, base=base, with_purity=args.dp)
    print(_bench_table(result))
    if args.output:
        Path(args.output).write_text(json.dumps(result, indent=2) + "\n",
                                     encoding="utf-8")
        _write_manifest(Path(args.output), _manifest_base(args, "bench", started))
    succeeded = any(r["error"] is None and r["reps"] > 0 for r in result["rows"])
    return 0 if succeeded else 3


def cmd_oracle(args) -> int:
    ds = _load_from_args(args)
    measure = _measure_from_args(args)
    from .measures import pairwise_matrix
    W = pairwise_matrix(measure, ds.points)
    limit = oracle.ExhaustiveLimit(max_n_trees=args.max_n, max_n_sat=args.max_n)
    if args.mode == "treeopt":
        tree, value = oracle.exhaustive_tree_opt(W, args.objective, limit)
        print(f"OPT[{args.objective}] = {value:.9g} over "
              f"{oracle.count_binary_trees(ds.n)} trees")
        if args.output:
            Path(args.output).write_bytes(serialize(tree))
    elif args.mode == "max2sat":
        s_idx, value = oracle.exhaustive_balanced_max2sat(W, limit)
        print(f"OPT_SAT = {value:.9g} at S = {s_idx.tolist()}")
    elif args.mode == "mcrandom":
        mean, stderr = oracle.monte_carlo_random_tree(W, args.objective,
                                                      args.samples, args.seed)
        print(f"E[Q(T_R)] ~ {mean:.9g} ± {stderr:.3g} (n={args.samples} samples)")
    else:
        raise errors.InvalidParamError(f"unknown oracle mode {args.mode!r}")
    return 0


def _add_common(parser: argparse.ArgumentParser, *, needs_data: bool = True):
    parser.add_argument("--seed", type=int, default=0, help="master RNG seed")
    parser.add_argument("--threads", type=int, default=None,
                        help="cap BLAS worker threads")
    parser.add_argument("--format", choices=("csv", "f32"), default="csv",
                        help="dataset file format")
    if needs_data:
        parser.add_argument("data", help="dataset path")
        parser.add_argument("--label-col", type=int, default=None,
                            help="CSV column holding class labels")
        parser.add_argument("--header", action="store_true",
                            help="CSV has a header row to skip")


def _add_measure(parser: argparse.ArgumentParser):
    parser.add_argument("--measure", choices=("cossim", "l2sq", "rbf"),
                        default=None, help="similarity/distance measure")
    parser.add_argument("--gamma", type=float, default=1.0, help="rbf bandwidth")
    parser.add_argument("--rbf-features", type=int, default=1024,
                        help="random Fourier feature count")


def _add_partition(parser: argparse.ArgumentParser):
    parser.add_argument("--theta", type=int, default=512,
                        help="average-linkage base-case size")
    parser.add_argument("--delta", type=float, default=0.1,
                        help="bisection imbalance in [0, 0.5]")
    parser.add_argument("--iterations", type=int, default=200,
                        help="projected gradient iterations")
    parser.add_argument("--noise", type=float, default=0.1,
                        help="variance of the Gaussian start")
    parser.add_argument("--rounding", choices=("topk", "randomized"),
                        default="topk", help="relaxation rounding mode")
    parser.add_argument("--restarts", type=int, default=3,
                        help="independent gradient-descent restarts")
    parser.add_argument("--eta0", type=float, default=None,
                        help="base learning rate (default: auto scale)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hcembed",
                                     description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="cmd", required=True)

    p = sub.add_parser("gen", help="synthesize a Gaussian-mixture dataset")
    _add_common(p, needs_data=False)
    p.add_argument("--clusters", type=int, required=True)
    p.add_argument("--per", type=int, required=True, help="points per cluster")
    p.add_argument("--dim", type=int, required=True)
    p.add_argument("--sep", type=float, default=0.0, help="center sphere radius")
    p.add_argument("--no-labels", action="store_true")
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("cluster", help="run one clustering algorithm")
    _add_common(p)
    _add_measure(p)
    _add_partition(p)
    p.add_argument("--algo", choices=ALGORITHMS, required=True)
    p.add_argument("-o", "--output", required=True, help="tree JSON path")
    p.set_defaults(func=cmd_cluster)

    p = sub.add_parser("eval", help="score a tree against a dataset")
    _add_common(p)
    _add_measure(p)
    p.add_argument("--tree", required=True, help="tree JSON path")
    p.add_argument("--objective", choices=OBJECTIVES, default="ckmm")
    p.add_argument("--dp", action="store_true", help="also report dendrogram purity")
    p.add_argument("-o", "--output", default=None, help="report JSON path")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("bench", help="algorithms x repetitions scoreboard")
    _add_common(p)
    _add_measure(p)
    _add_partition(p)
    p.add_argument("--algos", required=True,
                   help="comma list; params via name:key=value,key=value")
    p.add_argument("--objective", choices=OBJECTIVES, default="ckmm")
    p.add_argument("--reps", type=int, default=5)
    p.add_argument("--dp", action="store_true")
    p.add_argument("-o", "--output", default=None)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("oracle", help="ad-hoc brute-force verification runs")
    p.add_argument("mode", choices=("treeopt", "max2sat", "mcrandom"))
    _add_common(p)
    _add_measure(p)
    p.add_argument("--objective", choices=OBJECTIVES, default="ckmm")
    p.add_argument("--samples", type=int, default=1000)
    p.add_argument("--max-n", type=int, default=20)
    p.add_argument("-o", "--output", default=None)
    p.set_defaults(func=cmd_oracle)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    effective = list(argv) if argv is not None else sys.argv[1:]
    args = parser.parse_args(effective)
    args.argv = effective
    if getattr(args, "measure", "sentinel") is None and args.cmd in ("eval", "bench", "oracle"):
        args.measure = "l2sq"
    limiter = None
    if getattr(args, "threads", None):
        try:
            from threadpoolctl import threadpool_limits
            limiter = threadpool_limits(limits=args.threads)
        except ImportError:
            pass
    try:
        return args.func(args)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except _PARAM_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except errors.HCEmbedError as exc:
        print(f"algorithm failure: {exc}", file=sys.stderr)
        return 3
    finally:
        if limiter is not None:
            limiter.unregister()


if __name__ == "__main__":
    sys.exit(main())
