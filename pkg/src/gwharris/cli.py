"""Command-line interface: ``gwharris <command> ...``.

Exit codes: 0 success, 2 usage error, 3 data error, 4 rejection budget exhausted.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import sys
from pathlib import Path

from . import __version__
from .estimators import (REFERENCE_CORRECTOR, BiasCorrector, DegenerateFit, corrected_estimates,
                         fit_bias_corrector, per_tree_lambdas, uniform_node_values)
from .excursion import QuantileTable, build_quantile_table
from .experiments import SCENARIOS, ExperimentConfig, load_config, run_experiment, write_experiment
from .simulate import (DEFAULT_MAX_ROUNDS, ConfigError, Forest, RejectionBudgetExceeded, binary_offspring,
                       derive_seed, explicit_offspring, geometric_offspring, master_seed,
                       parse_offspring_config, simulate_forest)
from .trees import harris_walk, read_tree

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_BUDGET = 0, 2, 3, 4


class UsageError(Exception):
    pass


class LockMismatch(ValueError):
    pass


def sha256_file(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def parse_sizes(spec: str) -> list[int]:
    """``1000x100`` is 100 trees of 1000 nodes; comma-separated terms are concatenated."""
    sizes: list[int] = []
    try:
        for term in spec.replace(" ", "").split(","):
            if not term:
                continue
            n, _, count = term.partition("x")
            sizes.extend([int(n)] * (int(count) if count else 1))
    except ValueError:
        raise UsageError(f"bad size specification {spec!r}") from None
    if not sizes or min(sizes) < 1:
        raise UsageError("sizes must be positive integers")
    return sizes


def _floats(text: str) -> list[float]:
    try:
        return [float(x) for x in text.replace(",", " ").split()]
    except ValueError:
        raise UsageError(f"expected a list of numbers, got {text!r}") from None


def _ints(text: str) -> list[int]:
    return [int(x) for x in _floats(text)]


def _out(args, default: str) -> Path:
    return Path(args.out) if args.out else Path(default)


def _emit(text: str, args) -> None:
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)


# ---------------------------------------------------------------------------
# commands

def cmd_simulate(args) -> int:
    if args.offspring:
        dist = parse_offspring_config(Path(args.offspring).read_text())
    elif args.geometric:
        dist = geometric_offspring()
    elif args.probs:
        dist = explicit_offspring(_floats(args.probs))
    elif args.binary_sigma2 is not None:
        dist = binary_offspring(args.binary_sigma2)
    else:
        raise UsageError("choose an offspring law: --binary-sigma2, --geometric, --probs or --offspring")
    if not dist.critical:
        raise ConfigError(f"offspring mean is {dist.mean}, the law must be critical")
    forest = simulate_forest(dist, parse_sizes(args.sizes), args.seed, args.jobs, args.max_rounds)
    out = forest.save(_out(args, "forest"))
    print(f"wrote {forest.N} trees to {out}")
    return EXIT_OK


def cmd_harris(args) -> int:
    if args.tree:
        path = harris_walk(read_tree(args.tree))
        if args.out:
            path.to_csv(args.out)
        else:
            sys.stdout.write("k,walk\n" + "".join(f"{k},{v}\n" for k, v in enumerate(path.walk.tolist())))
        return EXIT_OK
    forest = Forest.load(args.forest)
    out = _out(args, "harris")
    out.mkdir(parents=True, exist_ok=True)
    for i, tree in enumerate(forest):
        harris_walk(tree).to_csv(out / f"harris_{i:05d}.csv")
    print(f"wrote {forest.N} Harris paths to {out}")
    return EXIT_OK


def cmd_table_build(args) -> int:
    table = build_quantile_table(args.samples, args.grid, args.seed, args.jobs)
    out = _out(args, "table.txt")
    table.save(out)
    print(f"table {table.table_id}: M={table.M} m={table.m} mean={table.mean:.6f} var={table.variance:.6f} -> {out}")
    return EXIT_OK


def _calibrate_corrector(args, seed):
    dists = [binary_offspring(s * s) for s in _floats(args.sigmas)]
    return fit_bias_corrector(dists, _ints(args.sizes), args.replicates, seed, args.min_sigma)


def cmd_calibrate_bias(args) -> int:
    corrector = _calibrate_corrector(args, args.seed)
    out = _out(args, "corrector.json")
    corrector.save(out)
    print(f"a={corrector.a:.6f} b={corrector.b:.6f} -> {out}")
    return EXIT_OK


def cmd_calibrate(args) -> int:
    """Build a table and a corrector into one directory and pin both in lock.json."""
    out = _out(args, "calibration")
    out.mkdir(parents=True, exist_ok=True)
    master = master_seed(args.seed)
    table = build_quantile_table(args.samples, args.grid, derive_seed(master, 0), args.jobs)
    table.save(out / "table.txt")
    corrector = _calibrate_corrector(args, derive_seed(master, 1))
    corrector.save(out / "corrector.json")
    lock = {"seed": master, "version": __version__, "table_id": table.table_id,
            "files": {name: sha256_file(out / name) for name in ("table.txt", "corrector.json")}}
    (out / "lock.json").write_text(json.dumps(lock, indent=2, sort_keys=True) + "\n")
    print(f"calibration bundle in {out}: table {table.table_id}, a={corrector.a:.6f} b={corrector.b:.6f}")
    return EXIT_OK


def verify_lock(lock_path, files: dict) -> None:
    """Check that each ``{name: path}`` matches the hash pinned in the lockfile."""
    pinned = json.loads(Path(lock_path).read_text())["files"]
    for name, path in files.items():
        if path is None:
            continue
        if name not in pinned:
            raise LockMismatch(f"{name} is not pinned in {lock_path}")
        if sha256_file(path) != pinned[name]:
            raise LockMismatch(f"{path} does not match the hash pinned in {lock_path}")


def cmd_estimate(args) -> int:
    table_path = None if args.no_table else args.table
    corrector_path = args.corrector
    lock = args.lock
    if args.bundle:
        bundle = Path(args.bundle)
        table_path = None if args.no_table else (table_path or bundle / "table.txt")
        corrector_path = corrector_path or bundle / "corrector.json"
        lock = lock or bundle / "lock.json"
    if table_path is None and not args.no_table:
        raise UsageError("give --table FILE, --bundle DIR or --no-table")
    if lock is None:
        # a lockfile sitting next to the artifacts is always honoured
        for candidate in (table_path, corrector_path):
            if candidate and (Path(candidate).parent / "lock.json").exists():
                lock = Path(candidate).parent / "lock.json"
                break
    if lock is not None:
        verify_lock(lock, {"table.txt": table_path, "corrector.json": corrector_path})
    forest = Forest.load(args.forest)
    table = QuantileTable.load(table_path) if table_path else None
    corrector = BiasCorrector.load(corrector_path) if corrector_path else REFERENCE_CORRECTOR
    seed = master_seed(args.seed) if args.uniform_node else args.seed
    un = uniform_node_values(forest, seed) if args.uniform_node else None
    report = corrected_estimates(forest, per_tree_lambdas(forest), corrector, table, un, seed)
    _emit(report.to_text(), args)
    return EXIT_OK


def cmd_experiment(args) -> int:
    if args.config:
        cfg = load_config(args.config)
    else:
        over = {"seed": args.seed, "replicates": args.replicates, "table": args.table,
                "corrector": args.corrector, "mask": args.mask}
        for key, conv in (("sigmas", _floats), ("sizes", _ints), ("forest_sizes", _ints),
                          ("outliers", _floats), ("noise", _floats)):
            value = getattr(args, key)
            if value is not None:
                over[key] = conv(value)
        if args.scenario is None:
            raise UsageError("give a scenario or --config")
        cfg = ExperimentConfig.for_scenario(args.scenario, **over)
    if args.seed is not None:
        cfg.seed = args.seed
    if args.scenario and args.scenario != cfg.scenario:
        raise UsageError(f"scenario {args.scenario!r} conflicts with config scenario {cfg.scenario!r}")
    out = Path(args.out) if args.out else Path(cfg.out)
    written = write_experiment(run_experiment(cfg, args.jobs), out)
    print("wrote " + ", ".join(str(p) for p in written))
    return EXIT_OK


def cmd_html_analyze(args) -> int:
    from .ingest import lambda_of_document, read_html_tree

    rows = ["source,nodes,height,lambda_hat"]
    for name in args.files:
        doc = read_html_tree(name)
        rows.append(f"{name},{doc.n},{int(doc.tree.heights().max())},{lambda_of_document(doc):.17g}")
        if args.harris_dir:
            Path(args.harris_dir).mkdir(parents=True, exist_ok=True)
            harris_walk(doc.tree).to_csv(Path(args.harris_dir) / (Path(name).stem + ".csv"))
    _emit("\n".join(rows) + "\n", args)
    return EXIT_OK


def cmd_wiki_history(args) -> int:
    from .ingest import detect_spikes, monthly_series, parse_month, read_manifest

    if args.manifest:
        records = read_manifest(args.manifest)
    elif args.article:
        from .fetch import RevisionFetcher
        fetcher = RevisionFetcher(args.cache, args.endpoint, args.user_agent)
        records = fetcher.fetch(args.article)
    else:
        raise UsageError("give --manifest FILE or --article TITLE")
    month_range = None
    if args.start or args.end:
        if not (args.start and args.end):
            raise UsageError("--from and --to go together")
        month_range = (parse_month(args.start), parse_month(args.end))
    history = monthly_series(records, month_range)
    if len(history.months) >= 3:
        detect_spikes(history, args.sensitivity)
    _emit(history.to_csv(), args)
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser

def build_parser() -> argparse.ArgumentParser:
    def global_flags(p, default):
        p.add_argument("--seed", type=int, default=default(None), help="master seed (random if omitted)")
        p.add_argument("--jobs", type=int, default=default(1), help="worker processes for replicate-level work")
        p.add_argument("--out", default=default(None), help="output file or directory")

    parser = argparse.ArgumentParser(prog="gwharris",
                                     description="Scale estimation for conditioned Galton-Watson trees.")
    global_flags(parser, lambda v: v)
    # repeated after the subcommand; SUPPRESS keeps values given before it
    common = argparse.ArgumentParser(add_help=False)
    global_flags(common, lambda v: argparse.SUPPRESS)
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", parents=[common], help="simulate a forest of conditioned trees")
    law = p.add_mutually_exclusive_group()
    law.add_argument("--binary-sigma2", type=float)
    law.add_argument("--geometric", action="store_true")
    law.add_argument("--probs", help="explicit offspring probabilities p0,p1,...")
    law.add_argument("--offspring", help="offspring config file (key = value lines)")
    p.add_argument("--sizes", required=True, help="e.g. 1000x100 or 20,50,100")
    p.add_argument("--max-rounds", type=int, default=DEFAULT_MAX_ROUNDS)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("harris", parents=[common], help="export Harris paths as CSV")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--tree")
    src.add_argument("--forest")
    p.set_defaults(func=cmd_harris)

    p = sub.add_parser("table", help="quantile table of the limit law")
    tsub = p.add_subparsers(dest="table_command", required=True)
    b = tsub.add_parser("build", parents=[common])
    b.add_argument("--samples", type=int, default=100_000)
    b.add_argument("--grid", type=int, default=1000)
    b.set_defaults(func=cmd_table_build)

    def calibration_args(q):
        q.add_argument("--sigmas", default="0.5,0.7,0.9")
        q.add_argument("--sizes", default="20,50,100,200,500")
        q.add_argument("--replicates", type=int, default=2000)
        q.add_argument("--min-sigma", type=float, default=0.5)

    p = sub.add_parser("calibrate-bias", parents=[common], help="fit the finite-size bias corrector")
    calibration_args(p)
    p.set_defaults(func=cmd_calibrate_bias)

    p = sub.add_parser("calibrate", parents=[common], help="build table + corrector and a lockfile")
    calibration_args(p)
    p.add_argument("--samples", type=int, default=100_000)
    p.add_argument("--grid", type=int, default=1000)
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("estimate", parents=[common], help="estimate 1/sigma from a forest")
    p.add_argument("--forest", required=True)
    p.add_argument("--table")
    p.add_argument("--no-table", action="store_true")
    p.add_argument("--corrector")
    p.add_argument("--bundle", help="directory written by the calibrate command")
    p.add_argument("--lock")
    p.add_argument("--uniform-node", action="store_true")
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("experiment", parents=[common], help="run a simulation scenario")
    p.add_argument("scenario", nargs="?", choices=SCENARIOS)
    p.add_argument("--config")
    p.add_argument("--replicates", type=int)
    p.add_argument("--sigmas")
    p.add_argument("--sizes")
    p.add_argument("--forest-sizes", dest="forest_sizes")
    p.add_argument("--outliers")
    p.add_argument("--noise")
    p.add_argument("--table")
    p.add_argument("--corrector")
    p.add_argument("--mask")
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("html", help="HTML documents as trees")
    hsub = p.add_subparsers(dest="html_command", required=True)
    a = hsub.add_parser("analyze", parents=[common])
    a.add_argument("files", nargs="+")
    a.add_argument("--harris-dir")
    a.set_defaults(func=cmd_html_analyze)

    p = sub.add_parser("wiki", help="revision histories")
    wsub = p.add_subparsers(dest="wiki_command", required=True)
    h = wsub.add_parser("history", parents=[common])
    h.add_argument("--manifest", help="local revision manifest CSV")
    h.add_argument("--article", help="article title to fetch")
    h.add_argument("--endpoint", default="https://en.wikipedia.org/w/api.php")
    h.add_argument("--cache", default="wiki_cache")
    h.add_argument("--user-agent", default="gwharris/0.1 (structural revision analysis)")
    h.add_argument("--from", dest="start", help="first month, YYYY-MM")
    h.add_argument("--to", dest="end", help="last month, YYYY-MM")
    h.add_argument("--sensitivity", type=float, default=5.0)
    h.set_defaults(func=cmd_wiki_history)
    return parser


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    if args.jobs < 1:
        print("error: --jobs must be at least 1", file=sys.stderr)
        return EXIT_USAGE
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except RejectionBudgetExceeded as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except (ConfigError, DegenerateFit, LockMismatch, OSError, ValueError, LookupError, RuntimeError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
