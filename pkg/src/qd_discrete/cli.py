"""Command-line front end.

Commands: run, sweep, compare, diagnose-correlation, brute-force.
Exit codes: 0 success, 1 configuration error, 2 runtime error.
The QD_DISCRETE_THREADS environment variable caps evaluation workers.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .benchmarks import brute_force_archive
from .config import ResolvedConfig, build_problem, grid_value_type, parse_config
from .diagnostics import correlation_diagnostic
from .errors import ConfigError
from .io import (
    emit_outputs,
    read_final_metric,
    write_repertoire_csv,
)
from .scheduler import (
    METRICS_COLUMNS,
    build_tessellation,
    run as run_loop,
    spawn_streams,
    sweep as sweep_loop,
)
from .stats import wilcoxon_signed_rank


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qd-discrete",
        description="Quality-diversity optimization over discrete search spaces.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute one configured run")
    p_run.add_argument("--config", required=True, help="path to the config file")
    p_run.add_argument("--out", default=None, help="output directory (overrides [output] out_dir)")

    p_sweep = sub.add_parser("sweep", help="grid sweep over config values x seeds")
    p_sweep.add_argument("--config", required=True)
    p_sweep.add_argument(
        "--grid",
        action="append",
        required=True,
        metavar="KEY=V1,V2,...",
        help="grid over a run-config key; repeat for multiple keys",
    )
    p_sweep.add_argument("--seeds", type=int, default=5, help="seeds per grid point")
    p_sweep.add_argument("--out", required=True)

    p_cmp = sub.add_parser("compare", help="Wilcoxon comparison of two run collections")
    p_cmp.add_argument("--runs", nargs=2, required=True, metavar=("DIR_A", "DIR_B"))
    p_cmp.add_argument("--metric", default="qd_score", choices=list(METRICS_COLUMNS)[3:])

    p_diag = sub.add_parser(
        "diagnose-correlation", help="correlate true vs estimated flip improvements"
    )
    p_diag.add_argument("--config", required=True)
    p_diag.add_argument("--samples", type=int, default=100)
    p_diag.add_argument("--out", required=True, help="report CSV path")
    p_diag.add_argument("--weights", default="fitness", choices=("fitness", "random"))
    p_diag.add_argument("--bins", type=int, default=20)

    p_bf = sub.add_parser("brute-force", help="enumerate the space and dump the oracle archive")
    p_bf.add_argument("--config", required=True)
    p_bf.add_argument("--out", required=True)
    return parser


def _resolve_out_dir(args_out, resolved: ResolvedConfig) -> Path:
    out = args_out or resolved.output.out_dir
    if not out:
        raise ConfigError("no output directory: pass --out or set [output] out_dir")
    return Path(out)


def _progress_printer(log_every: int):
    if log_every <= 0:
        return None

    def progress(iteration, metrics):
        if iteration % log_every == 0:
            row = dict(zip(metrics.columns, metrics.rows[-1]))
            print(
                f"iter {row['iteration']} evals {row['evaluations']} "
                f"qd_score {row['qd_score']:.6g} coverage {row['coverage']:.4f}",
                flush=True,
            )

    return progress


def _cmd_run(args) -> int:
    resolved = parse_config(args.config, tool_version=__version__)
    out_dir = _resolve_out_dir(args.out, resolved)
    problem = build_problem(resolved.problem)
    repertoire, metrics = run_loop(
        problem, resolved.run, progress=_progress_printer(resolved.output.log_every)
    )
    paths = emit_outputs(repertoire, metrics, resolved, out_dir)
    print(
        f"run complete: qd_score {repertoire.qd_score():.6g} "
        f"coverage {repertoire.coverage():.4f} -> {paths['metrics'].parent}"
    )
    return 0


def _parse_grid(entries) -> dict[str, list]:
    grid: dict[str, list] = {}
    for entry in entries:
        if "=" not in entry:
            raise ConfigError(f"grid entry must look like KEY=V1,V2,..., got {entry!r}")
        key, _, values = entry.partition("=")
        key = key.strip()
        cast = grid_value_type(key)
        try:
            grid[key] = [cast(v.strip()) for v in values.split(",") if v.strip()]
        except ValueError as exc:
            raise ConfigError(f"grid entry {entry!r}: {exc}") from exc
        if not grid[key]:
            raise ConfigError(f"grid entry {entry!r} lists no values")
    return grid


def _cmd_sweep(args) -> int:
    resolved = parse_config(args.config, tool_version=__version__)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    grid = _parse_grid(args.grid)
    problem = build_problem(resolved.problem)

    def on_run(result, repertoire, metrics, cfg):
        run_resolved = ResolvedConfig(
            problem=resolved.problem,
            run=cfg,
            output=resolved.output,
            provenance=resolved.provenance,
        )
        emit_outputs(repertoire, metrics, run_resolved, out_dir / f"run_{result.run_index:03d}")

    results = sweep_loop(problem, resolved.run, grid, args.seeds, on_run=on_run)

    keys = list(grid)
    table = out_dir / "sweep_results.csv"
    with open(table, "w", encoding="utf-8", newline="") as fh:
        fh.write(",".join(["run_index", *keys, "seed_index", "run_seed", "status", "qd_score", "coverage"]) + "\n")
        for r in results:
            status = "ok" if r.error is None else "error"
            qd = "" if r.qd_score is None else format(r.qd_score, ".17g")
            cov = "" if r.coverage is None else format(r.coverage, ".17g")
            fh.write(
                ",".join(
                    [
                        str(r.run_index),
                        *[str(r.overrides[k]) for k in keys],
                        str(r.seed_index),
                        str(r.run_seed),
                        status,
                        qd,
                        cov,
                    ]
                )
                + "\n"
            )
    n_failed = sum(r.error is not None for r in results)
    print(f"sweep complete: {len(results)} runs ({n_failed} failed) -> {table}")
    return 0


def _collect_run_metrics(run_dir: Path) -> list[Path]:
    direct = run_dir / "metrics.csv"
    if direct.is_file():
        return [direct]
    found = sorted(run_dir.glob("*/metrics.csv"))
    if not found:
        raise ConfigError(f"no metrics.csv found under {run_dir}")
    return found


def _cmd_compare(args) -> int:
    dir_a, dir_b = (Path(p) for p in args.runs)
    paths_a = _collect_run_metrics(dir_a)
    paths_b = _collect_run_metrics(dir_b)
    if len(paths_a) != len(paths_b):
        raise ConfigError(
            f"run collections differ in size: {len(paths_a)} vs {len(paths_b)}"
        )
    a = np.array([read_final_metric(p, args.metric) for p in paths_a])
    b = np.array([read_final_metric(p, args.metric) for p in paths_b])
    result = wilcoxon_signed_rank(a, b)

    writer = sys.stdout
    writer.write(f"pair,{args.metric}_a,{args.metric}_b,difference\n")
    for i, (va, vb) in enumerate(zip(a, b)):
        writer.write(f"{i},{va:.17g},{vb:.17g},{vb - va:.17g}\n")
    writer.write(f"statistic_w_minus,{result.statistic:.17g}\n")
    writer.write(f"p_value_one_sided_b_gt_a,{result.p_value:.17g}\n")
    writer.write(f"n_effective,{result.n_effective}\n")
    writer.write(f"method,{result.method}\n")
    writer.write(f"degenerate,{int(result.degenerate)}\n")
    return 0


def _cmd_diagnose(args) -> int:
    resolved = parse_config(args.config, tool_version=__version__)
    problem = build_problem(resolved.problem)
    rng = np.random.default_rng(resolved.run.seed)
    report = correlation_diagnostic(
        problem,
        n_samples=args.samples,
        weights_mode=args.weights,
        rng=rng,
        n_bins=args.bins,
    )
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", encoding="utf-8", newline="") as fh:
        fh.write("sample,rho\n")
        for i, rho in enumerate(report.rho):
            fh.write(f"{i},{'' if np.isnan(rho) else format(rho, '.17g')}\n")
        fh.write("\n")
        fh.write("bin_lo,bin_hi,count\n")
        for j in range(report.hist_counts.size):
            fh.write(
                f"{report.hist_edges[j]:.6g},{report.hist_edges[j + 1]:.6g},"
                f"{report.hist_counts[j]}\n"
            )
    print(
        f"correlation diagnostic: {report.n_defined}/{report.n_samples} defined, "
        f"mean rho {report.mean_rho:.4f}, median {report.median_rho:.4f} -> {out}"
    )
    return 0


def _cmd_brute_force(args) -> int:
    resolved = parse_config(args.config, tool_version=__version__)
    problem = build_problem(resolved.problem)
    streams = spawn_streams(resolved.run.seed)
    tessellation = build_tessellation(problem, resolved.run, streams.init)
    oracle = brute_force_archive(problem, tessellation)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_repertoire_csv(oracle, out_dir / "repertoire.csv")
    print(
        f"oracle archive: qd_score {oracle.qd_score():.6g} "
        f"coverage {oracle.coverage():.4f} -> {out_dir / 'repertoire.csv'}"
    )
    return 0


_COMMANDS = {
    "run": _cmd_run,
    "sweep": _cmd_sweep,
    "compare": _cmd_compare,
    "diagnose-correlation": _cmd_diagnose,
    "brute-force": _cmd_brute_force,
}


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # runtime failure
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
