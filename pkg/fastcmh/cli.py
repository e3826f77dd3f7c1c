#!/usr/bin/env python3
"""
fastcmh command line

Mines significant intervals from text files, generates synthetic datasets and
runs the simulation benchmarks.

Usage:
    fastcmh --list                                    # List mining methods
    fastcmh mine --data D --labels Y --covariates C --out PREFIX [--method fastcmh]
    fastcmh gen standard --out PREFIX [--n 200 --L 1000 --K 2 --plant 250:5]
    fastcmh gen confounded --out PREFIX [--rho-con 0.9 --p-eps 0.1]
    fastcmh bench power|confounded|runtime|null|covariate-perm --out results.csv

File formats are described in FORMATS.md.
"""

import argparse
import logging
import re
import sys
import time
from dataclasses import dataclass, replace
from pathlib import Path
from typing import List, Optional

import numpy as np

from fastcmh import bench
from fastcmh._common import (
    BENCH_CONFOUNDED_P_CASE,
    BENCH_L,
    BENCH_N,
    BENCH_P1,
    BENCH_PLANT_ELL,
    BENCH_REPETITIONS,
    DEFAULT_ALPHA,
    DEFAULT_MU,
    DEFAULT_N_STEPS,
    METHOD_IDS,
    ConfigError,
    DatasetError,
    FastCMHError,
    OutputError,
    check_open_unit,
)
from fastcmh.baselines import MethodResult, load_registry, run_method
from fastcmh.interval_miner import Dataset, dataset_summary, filter_overlaps
from fastcmh.synth import ConfoundSpec, GenSpec, gen_confounded, gen_standard

logger = logging.getLogger(__name__)

TOKEN_SEPARATOR = re.compile(r"[,\s]+")
TSV_COLUMNS = ("tau", "ell", "x", "a", "x_by_category", "a_by_category", "T_cmh", "p_value")
DATA_SUFFIX = ".data.txt"
LABELS_SUFFIX = ".labels.txt"
COVARIATES_SUFFIX = ".covariates.txt"


# === INPUT ===

def _read_lines(path) -> List[str]:
    """Non-empty lines of a text file; trailing blank lines are ignored."""
    try:
        with open(path) as f:
            lines = f.read().splitlines()
    except OSError as e:
        raise DatasetError(f"cannot read file: {e.strerror}", path) from e
    while lines and not lines[-1].strip():
        lines.pop()
    if not lines:
        raise DatasetError("file is empty", path)
    for number, line in enumerate(lines, start=1):
        if not line.strip():
            raise DatasetError("blank line", path, number)
    return lines


def _tokens(line: str) -> List[str]:
    return [token for token in TOKEN_SEPARATOR.split(line.strip()) if token]


def _read_binary_matrix(path) -> np.ndarray:
    rows = []
    width = None
    for number, line in enumerate(_read_lines(path), start=1):
        tokens = _tokens(line)
        if width is None:
            width = len(tokens)
        elif len(tokens) != width:
            raise DatasetError(f"row has {len(tokens)} tokens, expected {width}", path, number)
        for token in tokens:
            if token not in ("0", "1"):
                raise DatasetError(f"non-binary token '{token}'", path, number)
        rows.append([int(token) for token in tokens])
    return np.asarray(rows, dtype=np.uint8)


def _read_column(path, kind: str) -> np.ndarray:
    values = []
    for number, line in enumerate(_read_lines(path), start=1):
        tokens = _tokens(line)
        if len(tokens) != 1:
            raise DatasetError(f"expected one {kind} per line, got {len(tokens)} tokens", path, number)
        token = tokens[0]
        if kind == "label":
            if token not in ("0", "1"):
                raise DatasetError(f"label must be 0 or 1, got '{token}'", path, number)
        elif not (token.isascii() and token.isdigit()):
            raise DatasetError(f"category must be a non-negative integer, got '{token}'", path, number)
        values.append(int(token))
    return np.asarray(values, dtype=np.int64)


def load_dataset(data_path, labels_path, covariates_path, transpose: bool = False) -> Dataset:
    """Read the three dataset files.

    The data file holds one sample per line (one position per line with
    transpose). K is max(category) + 1 and every category must occur.
    """
    bits = _read_binary_matrix(data_path)
    if transpose:
        bits = bits.T.copy()
    labels = _read_column(labels_path, "label")
    covariate = _read_column(covariates_path, "category")

    n = bits.shape[0]
    if labels.size != n:
        raise DatasetError(f"dimension mismatch: data has {n} samples, labels has {labels.size}", labels_path)
    if covariate.size != n:
        raise DatasetError(
            f"dimension mismatch: data has {n} samples, covariates has {covariate.size}", covariates_path
        )
    present = np.bincount(covariate)
    for category, size in enumerate(present):
        if size == 0:
            raise DatasetError(f"category {category} empty", covariates_path)
    return Dataset(bits, labels, covariate)


def _write_text(path, text: str) -> None:
    try:
        with open(path, "w") as f:
            f.write(text)
    except OSError as e:
        raise OutputError(f"cannot write file: {e.strerror}", path) from e


def write_dataset(dataset: Dataset, prefix) -> List[Path]:
    """Write <prefix>.data.txt, .labels.txt and .covariates.txt (space separated)."""
    paths = [Path(f"{prefix}{suffix}") for suffix in (DATA_SUFFIX, LABELS_SUFFIX, COVARIATES_SUFFIX)]
    _write_text(paths[0], "".join(" ".join(str(int(v)) for v in row) + "\n" for row in dataset.bits))
    _write_text(paths[1], "".join(f"{int(v)}\n" for v in dataset.labels))
    _write_text(paths[2], "".join(f"{int(v)}\n" for v in dataset.covariate))
    return paths


# === OUTPUT ===

def _number(value: float) -> str:
    return format(value, ".17g")


def format_tsv(significant) -> str:
    lines = ["\t".join(TSV_COLUMNS)]
    for item in significant:
        lines.append("\t".join((
            str(item.pattern.tau),
            str(item.pattern.ell),
            str(sum(item.x)),
            str(sum(item.a)),
            ",".join(str(v) for v in item.x),
            ",".join(str(v) for v in item.a),
            _number(item.statistic),
            _number(item.p_value),
        )))
    return "\n".join(lines) + "\n"


def format_summary(config: "RunConfig", dataset: Dataset, result: MethodResult, n_filtered: Optional[int]) -> str:
    summary = dataset_summary(dataset)
    fields = [
        ("method", config.method),
        ("alpha", repr(config.alpha)),
        ("mu", repr(config.mu)),
        ("n_steps", config.n_steps),
        ("max_ell", "none" if config.max_ell is None else config.max_ell),
        ("n", summary["n"]),
        ("L", summary["L"]),
        ("K", summary["K"]),
        ("n_per_category", ",".join(str(v) for v in summary["n_per_category"])),
        ("cases_per_category", ",".join(str(v) for v in summary["cases_per_category"])),
        ("delta_star", repr(result.delta)),
        ("testable", result.m_testable),
        ("patterns_visited", result.patterns_visited),
        ("prune_evaluations", result.prune_evaluations),
        ("vertex_evaluations", result.vertex_evaluations),
        ("significant_raw", len(result.significant)),
        ("significant_filtered", "none" if n_filtered is None else n_filtered),
        ("wall_time_seconds", f"{result.wall_time:.6f}"),
    ]
    return "".join(f"{key}\t{value}\n" for key, value in fields)


# === MINE ===

@dataclass
class RunConfig:
    data_path: str
    labels_path: str
    covariates_path: str
    out_prefix: str
    method: str = "fastcmh"
    alpha: float = DEFAULT_ALPHA
    mu: float = DEFAULT_MU
    n_steps: int = DEFAULT_N_STEPS
    max_ell: Optional[int] = None
    filter_overlaps: bool = True
    transpose: bool = False

    def validate(self) -> None:
        if self.method not in METHOD_IDS:
            raise ConfigError(f"unknown method '{self.method}'; choose one of {', '.join(METHOD_IDS)}")
        check_open_unit("alpha", self.alpha)
        if not self.mu > 0.0:
            raise ConfigError(f"mu must be positive, got {self.mu}")
        if self.n_steps < 2:
            raise ConfigError(f"n_steps must be at least 2, got {self.n_steps}")
        if self.max_ell is not None and self.max_ell < 1:
            raise ConfigError(f"max_ell must be positive, got {self.max_ell}")


def run(config: RunConfig) -> int:
    """Mine one dataset and write <out>.summary.txt, <out>.raw.tsv and <out>.filtered.tsv."""
    config.validate()
    dataset = load_dataset(config.data_path, config.labels_path, config.covariates_path, config.transpose)
    logger.info("loaded n=%d L=%d K=%d", dataset.n, dataset.L, dataset.K)
    result = run_method(
        config.method, dataset,
        alpha=config.alpha, max_ell=config.max_ell, mu=config.mu, n_steps=config.n_steps,
    )

    prefix = config.out_prefix
    _write_text(f"{prefix}.raw.tsv", format_tsv(result.significant))
    n_filtered = None
    if config.filter_overlaps:
        filtered = filter_overlaps(result.significant)
        n_filtered = len(filtered)
        _write_text(f"{prefix}.filtered.tsv", format_tsv(filtered))
    _write_text(f"{prefix}.summary.txt", format_summary(config, dataset, result, n_filtered))

    print(f"{config.method}: delta*={result.delta!r}, "
          f"{len(result.significant)} significant interval(s)")
    return 0


def _mine(args) -> int:
    config = RunConfig(
        data_path=args.data,
        labels_path=args.labels,
        covariates_path=args.covariates,
        out_prefix=args.out,
        method=args.method,
        alpha=args.alpha,
        mu=args.mu,
        n_steps=args.n_steps,
        max_ell=args.max_ell,
        filter_overlaps=not args.no_filter,
        transpose=args.transpose,
    )
    return run(config)


# === GEN ===

def _parse_plant(text: str):
    try:
        tau, ell = (int(part) for part in text.split(":"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"plant must look like TAU:ELL, got '{text}'") from None
    return tau, ell


def _gen(args) -> int:
    p_case = args.p_case
    if p_case is None:
        p_case = 0.8 if args.design == "standard" else BENCH_CONFOUNDED_P_CASE
    if args.design == "standard":
        plants = tuple(args.plant) if args.plant else ((args.L // 4, BENCH_PLANT_ELL),)
        spec = GenSpec(n=args.n, L=args.L, K=args.K, p1=args.p1, p_case=p_case,
                       plants=plants, seed=args.seed)
        dataset = gen_standard(spec)
        windows = spec.plants
    else:
        tau = args.tau if args.tau is not None else args.L // 4
        spec = ConfoundSpec(n=args.n, L=args.L, p1=args.p1, rho_sig=args.rho_sig, rho_con=args.rho_con,
                            tau=tau, ell=args.ell, p_case=p_case, p_eps=args.p_eps, seed=args.seed)
        dataset = gen_confounded(spec)
        windows = ((spec.tau, spec.ell),)

    paths = write_dataset(dataset, args.out)
    summary = dataset_summary(dataset)
    print(f"Generated {args.design} dataset: n={summary['n']}, L={summary['L']}, K={summary['K']}")
    print(f"  cases per category: {summary['cases_per_category']} of {summary['n_per_category']}")
    print(f"  planted windows: {', '.join(f'[{tau}, {tau + ell})' for tau, ell in windows)}")
    for path in paths:
        print(f"  wrote {path}")
    return 0


# === BENCH ===

def _float_list(text: str) -> tuple:
    return tuple(float(v) for v in text.split(","))


def _sweep_values(sweep: str, text: str) -> tuple:
    values = _float_list(text)
    if sweep in ("L", "n", "K"):
        return tuple(int(v) for v in values)
    return values


def _bench(args) -> int:
    methods = tuple(args.methods.split(",")) if args.methods else bench.DEFAULT_METHODS
    if args.experiment in ("power", "confounded", "runtime"):
        overrides = {"seed_base": args.seed_base, "alpha": args.alpha, "workers": args.workers,
                     "max_ell": args.max_ell}
        if args.repetitions is not None:
            overrides["repetitions"] = args.repetitions
        if args.methods:
            overrides["methods"] = methods
        grid = bench.default_grid(args.experiment, **overrides)
        if args.sweep:
            if not args.values:
                raise ConfigError("--sweep needs --values")
            grid = replace(grid, sweep=args.sweep, values=_sweep_values(args.sweep, args.values))
        elif args.values:
            grid = replace(grid, values=_sweep_values(grid.sweep, args.values))
        experiment = {
            "power": bench.power_experiment,
            "confounded": bench.confounded_experiment,
            "runtime": bench.runtime_experiment,
        }[args.experiment]
        table = experiment(grid)
    else:
        repetitions = args.repetitions if args.repetitions is not None else BENCH_REPETITIONS
        if args.data:
            if not (args.labels and args.covariates):
                raise ConfigError("--data needs --labels and --covariates")
            dataset = load_dataset(args.data, args.labels, args.covariates, args.transpose)
        else:
            dataset = gen_standard(GenSpec(n=BENCH_N, L=BENCH_L, K=2, p1=BENCH_P1, p_case=0.5,
                                           seed=args.seed_base))
        if args.experiment == "null":
            table = bench.null_fwer_experiment(dataset, repetitions, args.alpha, methods,
                                               seed=args.seed_base, max_ell=args.max_ell)
        else:
            table = bench.covariate_permutation_experiment(dataset, repetitions, args.alpha,
                                                           seed=args.seed_base, max_ell=args.max_ell)

    _write_text(args.out, table.to_csv(index=False))
    print(f"Wrote {len(table)} row(s) to {args.out}")
    return 0


# === ENTRY POINT ===

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fastcmh", description="Significant interval mining with categorical covariates")
    parser.add_argument("--list", "-l", action="store_true", help="List mining methods")
    parser.add_argument("--verbose", "-v", action="count", default=0, help="-v for info, -vv for debug logging")
    commands = parser.add_subparsers(dest="command")

    mine = commands.add_parser("mine", help="Mine significant intervals from files")
    mine.add_argument("--data", required=True, help="Binary data file")
    mine.add_argument("--labels", required=True, help="Labels file (one 0/1 per line)")
    mine.add_argument("--covariates", required=True, help="Covariates file (one category per line)")
    mine.add_argument("--out", required=True, help="Output prefix")
    mine.add_argument("--method", "-m", default="fastcmh", choices=METHOD_IDS)
    mine.add_argument("--alpha", type=float, default=DEFAULT_ALPHA)
    mine.add_argument("--mu", type=float, default=DEFAULT_MU)
    mine.add_argument("--n-steps", type=int, default=DEFAULT_N_STEPS)
    mine.add_argument("--max-ell", type=int, default=None)
    mine.add_argument("--no-filter", action="store_true", help="Skip the overlap-filtered output")
    mine.add_argument("--transpose", action="store_true", help="Data file holds one position per line")

    gen = commands.add_parser("gen", help="Generate a synthetic dataset")
    gen.add_argument("design", choices=("standard", "confounded"))
    gen.add_argument("--out", required=True, help="Output prefix")
    gen.add_argument("--n", type=int, default=BENCH_N)
    gen.add_argument("--L", type=int, default=BENCH_L)
    gen.add_argument("--K", type=int, default=2)
    gen.add_argument("--p1", type=float, default=BENCH_P1)
    gen.add_argument("--p-case", type=float, default=None,
                     help="window hit rate in cases (default 0.8 standard, 0.99 confounded)")
    gen.add_argument("--plant", type=_parse_plant, action="append", help="TAU:ELL (repeatable)")
    gen.add_argument("--rho-sig", type=float, default=0.0)
    gen.add_argument("--rho-con", type=float, default=0.9)
    gen.add_argument("--p-eps", type=float, default=0.1)
    gen.add_argument("--tau", type=int, default=None)
    gen.add_argument("--ell", type=int, default=BENCH_PLANT_ELL)
    gen.add_argument("--seed", type=int, default=0)

    bench_parser = commands.add_parser("bench", help="Run a simulation experiment")
    bench_parser.add_argument("experiment", choices=("power", "confounded", "runtime", "null", "covariate-perm"))
    bench_parser.add_argument("--out", required=True, help="CSV output path")
    bench_parser.add_argument("--repetitions", "-R", type=int, default=None)
    bench_parser.add_argument("--seed-base", type=int, default=0)
    bench_parser.add_argument("--alpha", type=float, default=DEFAULT_ALPHA)
    bench_parser.add_argument("--max-ell", type=int, default=None)
    bench_parser.add_argument("--methods", help="Comma-separated method ids")
    bench_parser.add_argument("--sweep", help="Field to sweep")
    bench_parser.add_argument("--values", help="Comma-separated sweep values")
    bench_parser.add_argument("--workers", type=int, default=1)
    bench_parser.add_argument("--data", help="Dataset for null/covariate-perm (default: generated)")
    bench_parser.add_argument("--labels")
    bench_parser.add_argument("--covariates")
    bench_parser.add_argument("--transpose", action="store_true")
    return parser


def list_methods() -> None:
    registry = load_registry()
    print("Available methods:")
    for method in sorted(registry["methods"], key=lambda m: m["order"]):
        print(f"  {method['id']}: {method['name']}")
        print(f"    {method['description']}")


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)

    level = logging.WARNING if args.verbose == 0 else logging.INFO if args.verbose == 1 else logging.DEBUG
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)

    if args.list:
        list_methods()
        return 0
    if args.command is None:
        parser.print_help()
        return 2

    handlers = {"mine": _mine, "gen": _gen, "bench": _bench}
    start = time.perf_counter()
    try:
        code = handlers[args.command](args)
    except FastCMHError as e:
        print(f"Error: {e}", file=sys.stderr)
        return 1
    logger.info("%s finished in %.2fs", args.command, time.perf_counter() - start)
    return code


if __name__ == "__main__":
    sys.exit(main())
