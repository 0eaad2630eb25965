"""Command-line interface: ``planecluster {run,grid,synth,kmeans,devstats}``.

Exit codes: 0 success, 2 input error, 3 solver failure, 4 run stopped at
``max_iter`` without converging.
"""
from __future__ import annotations

import argparse
import configparser
import csv
import logging
import sys
import time
from pathlib import Path

import numpy as np
from joblib import Parallel, delayed
from sklearn.cluster import KMeans

from .core import PlaneClusteringError, TooFewSamplesError
from .datasets import GROUP_SIZES, SCALINGS, SynthSpec, generate_synthetic, load_csv, save_csv, scale_features
from .engine import ASSIGNMENT_RULES, INIT_METHODS, TERMINATIONS, EngineConfig, run
from .kernels import KERNEL_KINDS, KernelSpec, kernel_matrix
from .losses import PRESET_NAMES, LossSpec, Preset
from .metrics import accuracy, mutual_information
from .report import RunReport, cluster_deviation_stats, write_devstats
from .solvers import NonDecreasingStepError, SolveConfig

EXIT_OK, EXIT_INPUT, EXIT_SOLVER, EXIT_NONCONVERGED = 0, 2, 3, 4
DEFAULT_C_GRID = "-8:7"
DEFAULT_MU_GRID = "-10:5"

logger = logging.getLogger("planecluster")


class InputError(Exception):
    pass


def _preset(text: str) -> str:
    name = text.lower()
    if name not in PRESET_NAMES:
        raise argparse.ArgumentTypeError(f"unknown preset {text!r}; valid presets: {', '.join(PRESET_NAMES)}")
    return name


def parse_power_grid(text: str) -> list[float]:
    """``"a:b"`` gives ``2**a .. 2**b``; a comma list gives its values as-is."""
    text = text.strip()
    try:
        if ":" in text:
            lo, hi = (int(p) for p in text.split(":"))
            if hi < lo:
                raise ValueError
            return [2.0**i for i in range(lo, hi + 1)]
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad grid {text!r}; use 'lo:hi' exponents or a comma list") from None


def _add_model_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--data", required=True, help="CSV file of samples")
    p.add_argument("--unlabelled", action="store_true", help="the CSV has no trailing label column")
    p.add_argument("--k", type=int, help="number of clusters (default: number of truth classes)")
    p.add_argument("--preset", type=_preset, default="rfdpc")
    p.add_argument("--delta", type=float, default=0.3)
    p.add_argument("--s", type=float, default=-0.2)
    p.add_argument("--kernel", choices=KERNEL_KINDS, default="linear")
    p.add_argument("--scaling", choices=SCALINGS, default="minmax")
    p.add_argument("--init", choices=INIT_METHODS, default="nng")
    p.add_argument("--neighbors", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--termination", choices=TERMINATIONS, default="both")
    p.add_argument("--assignment", choices=ASSIGNMENT_RULES, default="simplified")
    p.add_argument("--max-iter", type=int, default=100)
    p.add_argument("--report", help="write the JSON run report here")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="planecluster", description="Plane-based clustering.")
    parser.add_argument("--config", help="INI file whose [planecluster] keys provide option defaults")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="cluster a dataset once")
    _add_model_args(p)
    p.add_argument("--c", type=float, default=1.0, help="between-cluster weight (within weight 1)")
    p.add_argument("--c-w", type=float)
    p.add_argument("--c-b", type=float)
    p.add_argument("--gamma1", type=float, default=1.0)
    p.add_argument("--gamma2", type=float, default=1.0)
    p.add_argument("--mu", type=float, default=1.0)
    p.add_argument("--labels-out", help="write 1-based labels, one per line")

    p = sub.add_parser("grid", help="best-accuracy parameter search")
    _add_model_args(p)
    p.add_argument("--c-grid", type=parse_power_grid, default=DEFAULT_C_GRID)
    p.add_argument("--gamma-grid", type=parse_power_grid, default=DEFAULT_C_GRID, help="rfdpc: gamma1 = gamma2 values")
    p.add_argument("--mu-grid", type=parse_power_grid, default=DEFAULT_MU_GRID, help="gaussian kernel widths")
    p.add_argument("--table", help="write every grid point as CSV")
    p.add_argument("--jobs", type=int, default=1)

    p = sub.add_parser("synth", help="write a synthetic three-plane group")
    p.add_argument("--group", choices=sorted(GROUP_SIZES), required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)

    p = sub.add_parser("kmeans", help="k-means baseline over random restarts")
    p.add_argument("--data", required=True)
    p.add_argument("--unlabelled", action="store_true")
    p.add_argument("--k", type=int)
    p.add_argument("--restarts", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--scaling", choices=SCALINGS, default="minmax")
    p.add_argument("--jobs", type=int, default=1)

    p = sub.add_parser("devstats", help="per-cluster deviation statistics of a run report as CSV")
    p.add_argument("--report", required=True)
    p.add_argument("--out", required=True)
    return parser


def _config_defaults(path: str) -> dict:
    cp = configparser.ConfigParser()
    if not cp.read(path):
        raise InputError(f"cannot read config file {path}")
    section = cp["planecluster"] if cp.has_section("planecluster") else cp.defaults()
    return {key.replace("-", "_"): value for key, value in section.items()}


def parse_args(argv=None) -> argparse.Namespace:
    """Parse ``argv``; values from ``--config`` act as defaults that flags override."""
    parser = build_parser()
    pre = argparse.ArgumentParser(add_help=False, allow_abbrev=False)
    pre.add_argument("--config")
    known, rest = pre.parse_known_args(argv)
    if known.config and rest:
        defaults = _config_defaults(known.config)
        command = next((a for a in rest if a in parser._subparsers._group_actions[0].choices), None)
        if command is not None:
            subparser = parser._subparsers._group_actions[0].choices[command]
            dests = {a.dest for a in subparser._actions}
            unknown = sorted(set(defaults) - dests)
            if unknown:
                raise InputError(f"unknown config keys for '{command}': {', '.join(unknown)}")
            for action in subparser._actions:
                if action.dest in defaults:
                    action.required = False
                    if action.type is not None:
                        defaults[action.dest] = action.type(defaults[action.dest])
            subparser.set_defaults(**defaults)
    return parser.parse_args(argv)


# ------------------------------------------------------------------- helpers


def _load(args):
    data = load_csv(args.data, has_labels=not args.unlabelled)
    k = args.k
    if k is None:
        if data.truth_labels is None:
            raise InputError("--k is required for unlabelled data")
        k = int(np.unique(data.truth_labels).size)
    return scale_features(data, args.scaling), k


def _spec(preset: str, c, c_w, c_b, gamma1, gamma2, args) -> LossSpec:
    params = dict(delta=args.delta, s=args.s, gamma1=gamma1, gamma2=gamma2)
    if c_w is not None:
        params["c_w"] = c_w
    if c_b is not None:
        params["c_b"] = c_b
    return LossSpec.from_preset(preset, c=c, **params)


def _engine(args, k) -> EngineConfig:
    return EngineConfig(
        n_clusters=k,
        init=args.init,
        n_neighbors=args.neighbors,
        random_state=args.seed,
        termination=args.termination,
        max_iter=args.max_iter,
        assignment=args.assignment,
        solve=SolveConfig(),
    )


def execute(data, spec: LossSpec, config: EngineConfig, kernel: KernelSpec) -> RunReport:
    """Run the engine on ``data`` (kernel-mapped if requested) and build its report."""
    start = time.perf_counter()
    X = data.samples if kernel.kind == "linear" else kernel_matrix(data.samples, data.samples, kernel)
    state, trace = run(X, spec, config)
    elapsed = int(round(1000 * (time.perf_counter() - start)))
    ac = mi = None
    if data.truth_labels is not None:
        ac = accuracy(state.labels, data.truth_labels)
        mi = mutual_information(state.labels, data.truth_labels)
    params = spec.params()
    if kernel.kind == "gaussian":
        params["mu"] = kernel.mu
    return RunReport(
        preset=spec.preset.value,
        params=params,
        ac=ac,
        mi=mi,
        iterations=state.iteration,
        termination_reason=state.termination_reason,
        converged=state.converged,
        objective_trace=[float(g) for g in trace.objectives],
        per_cluster_stats=cluster_deviation_stats(X, state.labels, state.planes, spec.deviation_kind),
        wall_time_ms=elapsed,
        labels=[int(v) + 1 for v in state.labels],
        dataset=data.name,
    )


def grid_points(args) -> list[dict]:
    """Parameter combinations searched for the chosen preset."""
    preset = Preset(args.preset)
    cs = [None] if preset is Preset.KPC else list(args.c_grid)
    gammas = list(args.gamma_grid) if preset is Preset.RFDPC else [1.0]
    mus = list(args.mu_grid) if args.kernel == "gaussian" else [None]
    points = []
    for c in cs:
        for g in gammas:
            for mu in mus:
                points.append({"c": c, "gamma": g, "mu": mu})
    return points


def _grid_point(data, k, args, point) -> dict:
    preset = Preset(args.preset)
    c = point["c"]
    if preset is Preset.RFDPC:
        spec = _spec(args.preset, None, c, c, point["gamma"], point["gamma"], args)
    else:
        spec = _spec(args.preset, c, None, None, 1.0, 1.0, args)
    kernel = KernelSpec(args.kernel, point["mu"] if point["mu"] is not None else 1.0)
    row = dict(point)
    try:
        report = execute(data, spec, _engine(args, k), kernel)
    except (PlaneClusteringError, np.linalg.LinAlgError, ValueError) as exc:
        row.update(ac=None, mi=None, error=f"{type(exc).__name__}: {exc}", report=None)
        return row
    row.update(ac=report.ac, mi=report.mi, error="", report=report)
    return row


def best_row(rows: list[dict]):
    """Highest AC, ties broken by MI, then by grid order."""
    ok = [r for r in rows if r["report"] is not None]
    if not ok:
        return None
    return max(ok, key=lambda r: (r["ac"] if r["ac"] is not None else -1.0, r["mi"] if r["mi"] is not None else -1.0, -rows.index(r)))


# ------------------------------------------------------------------ commands


def cmd_run(args) -> int:
    data, k = _load(args)
    spec = _spec(args.preset, args.c, args.c_w, args.c_b, args.gamma1, args.gamma2, args)
    report = execute(data, spec, _engine(args, k), KernelSpec(args.kernel, args.mu))
    print(report.summary())
    if args.report:
        report.save(args.report)
    if args.labels_out:
        Path(args.labels_out).write_text("".join(f"{v}\n" for v in report.labels))
    return EXIT_OK if report.converged else EXIT_NONCONVERGED


def cmd_grid(args) -> int:
    data, k = _load(args)
    if data.truth_labels is None:
        raise InputError("grid search needs truth labels to score grid points")
    points = grid_points(args)
    rows = Parallel(n_jobs=args.jobs)(delayed(_grid_point)(data, k, args, p) for p in points)
    if args.table:
        with Path(args.table).open("w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["c", "gamma", "mu", "ac", "mi", "iterations", "termination", "error"])
            for r in rows:
                rep = r["report"]
                writer.writerow([
                    "" if r["c"] is None else r["c"],
                    r["gamma"] if args.preset == "rfdpc" else "",
                    "" if r["mu"] is None else r["mu"],
                    "" if r["ac"] is None else f"{r['ac']:.2f}",
                    "" if r["mi"] is None else f"{r['mi']:.2f}",
                    "" if rep is None else rep.iterations,
                    "" if rep is None else rep.termination_reason,
                    r["error"],
                ])
    failed = sum(r["report"] is None for r in rows)
    best = best_row(rows)
    print(f"{len(rows)} grid points evaluated, {failed} failed")
    if best is None:
        print("every grid point failed", file=sys.stderr)
        return EXIT_SOLVER
    print(f"best: {best['report'].summary()} params={best['report'].params}")
    if args.report:
        best["report"].save(args.report)
    return EXIT_OK


def cmd_synth(args) -> int:
    data = generate_synthetic(SynthSpec.for_group(args.group, args.seed))
    save_csv(data, args.out)
    print(f"wrote {data.n_samples} samples to {args.out}")
    return EXIT_OK


def _kmeans_once(X, k, seed) -> np.ndarray:
    return KMeans(n_clusters=k, init="random", n_init=1, random_state=seed).fit(X).labels_


def cmd_kmeans(args) -> int:
    data, k = _load(args)
    if k < 2:
        raise InputError("k must be at least 2")
    if k > data.n_samples:
        raise TooFewSamplesError(f"{data.n_samples} samples cannot form {k} clusters")
    seeds = [int(s.generate_state(1)[0]) for s in np.random.SeedSequence(args.seed).spawn(args.restarts)]
    labels = Parallel(n_jobs=args.jobs)(delayed(_kmeans_once)(data.samples, k, s) for s in seeds)
    if data.truth_labels is None:
        print(f"kmeans: {args.restarts} restarts done (no truth labels to score)")
        return EXIT_OK
    ac = np.array([accuracy(l, data.truth_labels) for l in labels])
    mi = np.array([mutual_information(l, data.truth_labels) for l in labels])
    print(f"kmeans AC(%): {ac.mean():.2f}±{ac.std():.2f}  MI(%): {mi.mean():.2f}±{mi.std():.2f}")
    return EXIT_OK


def cmd_devstats(args) -> int:
    report = RunReport.load(args.report)
    write_devstats(report, args.out)
    print(f"wrote {len(report.per_cluster_stats)} cluster rows to {args.out}")
    return EXIT_OK


COMMANDS = {"run": cmd_run, "grid": cmd_grid, "synth": cmd_synth, "kmeans": cmd_kmeans, "devstats": cmd_devstats}


def main(argv=None) -> int:
    try:
        args = parse_args(argv)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (NonDecreasingStepError, np.linalg.LinAlgError) as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except (InputError, PlaneClusteringError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
