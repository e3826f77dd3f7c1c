"""
Simulation harness: power, confounded false detections, runtime scaling,
empirical FWER under permuted labels and the covariate-permutation check.

Each experiment returns a pandas DataFrame; the CLI writes it as CSV. All
columns except wall times are deterministic given the grid and seed base.
"""

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from scipy import stats

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
)
from fastcmh.baselines import MethodResult, run_method
from fastcmh.interval_miner import Dataset, Interval, filter_overlaps
from fastcmh.synth import ConfoundSpec, GenSpec, gen_confounded, gen_standard, make_rng, plant_windows

logger = logging.getLogger(__name__)

STANDARD_SWEEPS = ("p_case", "L", "n", "K", "p1")
CONFOUNDED_SWEEPS = ("rho_con", "rho_sig", "p_eps", "p_case", "L", "n")
DEFAULT_METHODS = ("fastcmh", "bonferroni-cmh", "fais-chi2")
CI_LEVEL = 0.95

PCASE_VALUES = (0.3, 0.5, 0.7, 0.8, 0.9)
RHO_CON_VALUES = (0.0, 0.3, 0.6, 0.9)
K_VALUES = (2, 4, 8, 12)
# divisible by 2K for every K in K_VALUES
K_SWEEP_N = 240

Spec = Union[GenSpec, ConfoundSpec]


def repetition_seed(seed_base: int, repetition: int) -> int:
    """64-bit seed of one repetition: SeedSequence([seed_base, repetition])."""
    state = np.random.SeedSequence([seed_base, repetition]).generate_state(1, dtype=np.uint64)
    return int(state[0])


def default_standard_spec(p_case: float = 0.5, L: int = BENCH_L) -> GenSpec:
    return GenSpec(
        n=BENCH_N, L=L, K=2, p1=BENCH_P1, p_case=p_case,
        plants=((L // 4, BENCH_PLANT_ELL),),
    )


def default_confounded_spec(rho_con: float = 0.9, L: int = BENCH_L) -> ConfoundSpec:
    return ConfoundSpec(
        n=BENCH_N, L=L, p1=BENCH_P1, rho_sig=0.0, rho_con=rho_con,
        tau=L // 4, ell=BENCH_PLANT_ELL, p_case=BENCH_CONFOUNDED_P_CASE,
    )


@dataclass(frozen=True)
class ExperimentGrid:
    """One sweep: R repetitions of base with the sweep field set to each value."""
    base: Spec
    sweep: str
    values: Tuple = ()
    repetitions: int = BENCH_REPETITIONS
    methods: Tuple[str, ...] = DEFAULT_METHODS
    seed_base: int = 0
    alpha: float = DEFAULT_ALPHA
    max_ell: Optional[int] = None
    mu: float = DEFAULT_MU
    n_steps: int = DEFAULT_N_STEPS
    workers: int = 1

    def validate(self) -> None:
        if self.repetitions < 1:
            raise ConfigError(f"repetitions must be at least 1, got {self.repetitions}")
        if self.workers < 1:
            raise ConfigError(f"workers must be at least 1, got {self.workers}")
        allowed = CONFOUNDED_SWEEPS if isinstance(self.base, ConfoundSpec) else STANDARD_SWEEPS
        if self.sweep not in allowed:
            raise ConfigError(f"cannot sweep '{self.sweep}' here; choose one of {', '.join(allowed)}")
        if not self.values:
            raise ConfigError("sweep needs at least one value")
        for method in self.methods:
            if method not in METHOD_IDS:
                raise ConfigError(f"unknown method: {method}")
        for value in self.values:
            self.spec_for(value, 0).validate()

    def spec_for(self, value, repetition: int) -> Spec:
        return replace(self.base, **{self.sweep: value, "seed": repetition_seed(self.seed_base, repetition)})

    def method_params(self) -> dict:
        return {"alpha": self.alpha, "max_ell": self.max_ell, "mu": self.mu, "n_steps": self.n_steps}


def _generate(spec: Spec) -> Dataset:
    if isinstance(spec, ConfoundSpec):
        return gen_confounded(spec)
    return gen_standard(spec)


def hits_window(result: MethodResult, windows: Sequence[Tuple[int, int]]) -> bool:
    """Any overlap-filtered interval overlaps one of the windows."""
    targets = [Interval(tau, ell) for tau, ell in windows]
    return any(
        item.pattern.overlaps(target)
        for item in filter_overlaps(result.significant)
        for target in targets
    )


def _result_row(result: MethodResult, **extra) -> dict:
    row = dict(extra)
    row.update(
        method=result.method,
        delta=result.delta,
        m_testable=result.m_testable,
        n_significant=len(result.significant),
        n_filtered=len(filter_overlaps(result.significant)),
        wall_time=result.wall_time,
    )
    row.update(result.counters())
    return row


def _run_repetition(task) -> List[dict]:
    grid, value, repetition = task
    spec = grid.spec_for(value, repetition)
    dataset = _generate(spec)
    windows = plant_windows(spec)
    rows = []
    for method in grid.methods:
        result = run_method(method, dataset, **grid.method_params())
        rows.append(_result_row(
            result, sweep=grid.sweep, value=value, repetition=repetition, seed=spec.seed,
            detected=hits_window(result, windows),
        ))
    return rows


def run_repetitions(grid: ExperimentGrid) -> pd.DataFrame:
    """One row per (value, repetition, method)."""
    grid.validate()
    tasks = [(grid, value, r) for value in grid.values for r in range(grid.repetitions)]
    if grid.workers > 1:
        with ProcessPoolExecutor(max_workers=grid.workers) as pool:
            batches = list(pool.map(_run_repetition, tasks))
    else:
        batches = []
        for task in tasks:
            if task[2] == 0:
                logger.info("sweep %s=%s", grid.sweep, task[1])
            batches.append(_run_repetition(task))

    frame = pd.DataFrame([row for batch in batches for row in batch])
    order = {method: i for i, method in enumerate(grid.methods)}
    value_order = {value: i for i, value in enumerate(grid.values)}
    frame["_value"] = frame["value"].map(value_order)
    frame["_method"] = frame["method"].map(order)
    frame = frame.sort_values(["_value", "repetition", "_method"], kind="stable")
    return frame.drop(columns=["_value", "_method"]).reset_index(drop=True)


def binomial_ci(successes: int, trials: int) -> Tuple[float, float]:
    interval = stats.binomtest(int(successes), int(trials)).proportion_ci(confidence_level=CI_LEVEL)
    return float(interval.low), float(interval.high)


def _rate_table(raw: pd.DataFrame, rate_column: str) -> pd.DataFrame:
    rows = []
    for (value, method), group in raw.groupby(["value", "method"], sort=False):
        hits = int(group["detected"].sum())
        low, high = binomial_ci(hits, len(group))
        rows.append({
            "method": method,
            "sweep": group["sweep"].iloc[0],
            "value": value,
            "repetitions": len(group),
            rate_column: hits / len(group),
            "ci_low": low,
            "ci_high": high,
            "mean_wall_time": float(group["wall_time"].mean()),
        })
    return pd.DataFrame(rows)


def power_experiment(grid: ExperimentGrid) -> pd.DataFrame:
    """Fraction of repetitions where a filtered hit overlaps the planted window."""
    if not isinstance(grid.base, GenSpec):
        raise ConfigError("power experiment needs a standard generator spec")
    return _rate_table(run_repetitions(grid), "power")


def confounded_experiment(grid: ExperimentGrid) -> pd.DataFrame:
    """Fraction of repetitions where a filtered hit overlaps the confounded window."""
    if not isinstance(grid.base, ConfoundSpec):
        raise ConfigError("confounded experiment needs a confounded generator spec")
    return _rate_table(run_repetitions(grid), "false_detection_rate")


def runtime_experiment(grid: ExperimentGrid) -> pd.DataFrame:
    """Mean wall time and work counters per (method, value)."""
    raw = run_repetitions(grid)
    rows = []
    for (value, method), group in raw.groupby(["value", "method"], sort=False):
        checks = int(group["prune_evaluations"].sum())
        vertices = int(group["vertex_evaluations"].sum())
        rows.append({
            "method": method,
            "sweep": grid.sweep,
            "value": value,
            "repetitions": len(group),
            "mean_wall_time": float(group["wall_time"].mean()),
            "prune_evaluations": checks,
            "vertex_evaluations": vertices,
            # methods without prune checks spend no vertex evaluations
            "vertices_per_check": vertices / checks if checks else 0.0,
            "patterns_visited": int(group["patterns_visited"].sum()),
        })
    return pd.DataFrame(rows)


def permute_within_categories(labels: np.ndarray, covariate: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Shuffle labels inside each category; per-category case counts are kept."""
    permuted = labels.copy()
    for category in np.unique(covariate):
        members = np.flatnonzero(covariate == category)
        permuted[members] = labels[rng.permutation(members)]
    return permuted


def fwer_bound(alpha: float, repetitions: int) -> float:
    """alpha plus three binomial standard errors."""
    return alpha + 3.0 * np.sqrt(alpha * (1.0 - alpha) / repetitions)


def null_fwer_experiment(
    dataset: Dataset,
    repetitions: int = BENCH_REPETITIONS,
    alpha: float = DEFAULT_ALPHA,
    methods: Sequence[str] = DEFAULT_METHODS,
    seed: int = 0,
    max_ell: Optional[int] = None,
) -> pd.DataFrame:
    """Empirical FWER over label permutations stratified by category."""
    if repetitions < 1:
        raise ConfigError(f"repetitions must be at least 1, got {repetitions}")
    false_hits = {method: 0 for method in methods}
    for r in range(repetitions):
        rng = make_rng(np.random.SeedSequence([seed, r]))
        null = dataset.with_labels(permute_within_categories(dataset.labels, dataset.covariate, rng))
        for method in methods:
            result = run_method(method, null, alpha=alpha, max_ell=max_ell)
            if result.significant:
                false_hits[method] += 1
    bound = fwer_bound(alpha, repetitions)
    rows = []
    for method in methods:
        fwer = false_hits[method] / repetitions
        low, high = binomial_ci(false_hits[method], repetitions)
        rows.append({
            "method": method,
            "repetitions": repetitions,
            "alpha": alpha,
            "fwer": fwer,
            "ci_low": low,
            "ci_high": high,
            "bound": bound,
            "fwer_passed": fwer <= bound,
        })
        logger.info("%s: empirical FWER %.3f (bound %.3f)", method, fwer, bound)
    return pd.DataFrame(rows)


def lower_tail_pvalue(observed: int, permuted: Sequence[int]) -> float:
    return (1 + sum(1 for count in permuted if count <= observed)) / (len(permuted) + 1)


def covariate_permutation_experiment(
    dataset: Dataset,
    repetitions: int = BENCH_REPETITIONS,
    alpha: float = DEFAULT_ALPHA,
    seed: int = 0,
    method: str = "fastcmh",
    max_ell: Optional[int] = None,
) -> pd.DataFrame:
    """Significant-interval counts with the observed covariate and with shuffled ones.

    Row 0 (kind "observed") carries the lower-tail p-value of the observed
    filtered count among the permuted filtered counts.
    """
    if repetitions < 1:
        raise ConfigError(f"repetitions must be at least 1, got {repetitions}")

    def count(data: Dataset) -> Tuple[int, int]:
        result = run_method(method, data, alpha=alpha, max_ell=max_ell)
        return len(result.significant), len(filter_overlaps(result.significant))

    observed_raw, observed_filtered = count(dataset)
    rows = []
    for r in range(repetitions):
        rng = make_rng(np.random.SeedSequence([seed, r]))
        raw, filtered = count(dataset.with_covariate(rng.permutation(dataset.covariate)))
        rows.append({"kind": "permutation", "repetition": r + 1, "n_significant": raw,
                     "n_filtered": filtered, "p_value": float("nan")})
    p_value = lower_tail_pvalue(observed_filtered, [row["n_filtered"] for row in rows])
    observed = {"kind": "observed", "repetition": 0, "n_significant": observed_raw,
                "n_filtered": observed_filtered, "p_value": p_value}
    logger.info("observed %d filtered intervals, lower-tail p=%.4f", observed_filtered, p_value)
    return pd.DataFrame([observed] + rows)


def default_grid(experiment: str, **overrides) -> ExperimentGrid:
    """Desk-scale grid of a named experiment; overrides replace grid fields."""
    if experiment == "power":
        grid = ExperimentGrid(base=default_standard_spec(), sweep="p_case", values=PCASE_VALUES)
    elif experiment == "confounded":
        grid = ExperimentGrid(base=default_confounded_spec(), sweep="rho_con", values=RHO_CON_VALUES)
    elif experiment == "runtime":
        base = replace(default_standard_spec(), n=K_SWEEP_N)
        grid = ExperimentGrid(
            base=base, sweep="K", values=K_VALUES, repetitions=1,
            methods=("fastcmh", "fais-cmh", "fais-chi2", "bonferroni-cmh"),
        )
    else:
        raise ConfigError(f"no default grid for experiment '{experiment}'")
    return replace(grid, **overrides) if overrides else grid
