"""
FastCMH and the comparison methods, behind one call signature.

Every method takes (dataset, alpha, max_ell, mu, n_steps) and returns a
MethodResult; METHOD_FUNCTIONS maps the ids listed in method_registry.json to
them.
"""

import json
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, List, Optional

import numpy as np
from scipy import stats

from fastcmh._common import DEFAULT_ALPHA, DEFAULT_MU, DEFAULT_N_STEPS, ConfigError, count_intervals
from fastcmh.interval_miner import Dataset, Interval, IntervalEnumerator, enumerate_intervals
from fastcmh.stats_core import PatternSupport, chi2_sf, cmh_statistic
from fastcmh.tarone_engine import SignificantPattern, new_state, significant_pass

logger = logging.getLogger(__name__)

REGISTRY_FILE = Path(__file__).parent / "method_registry.json"


def load_registry() -> dict:
    """Load the method registry."""
    with open(REGISTRY_FILE) as f:
        return json.load(f)


@dataclass
class MethodResult:
    method: str
    delta: float
    m_testable: int
    significant: List[SignificantPattern] = field(default_factory=list)
    patterns_visited: int = 0
    prune_evaluations: int = 0
    vertex_evaluations: int = 0
    wall_time: float = 0.0

    def counters(self) -> dict:
        return {
            "patterns_visited": self.patterns_visited,
            "prune_evaluations": self.prune_evaluations,
            "vertex_evaluations": self.vertex_evaluations,
        }


def _tarone_search(method: str, dataset: Dataset, alpha: float, max_ell, mu: float, n_steps: int, t_prune: str) -> MethodResult:
    start = time.perf_counter()
    mined = enumerate_intervals(dataset, new_state(alpha, mu, n_steps), max_ell=max_ell, t_prune=t_prune)
    enumerator = IntervalEnumerator(dataset, max_ell)
    significant = significant_pass(enumerator, mined.delta_star, alpha=alpha, t_prune=t_prune, trace=mined.trace)
    elapsed = time.perf_counter() - start
    logger.info(
        "%s: delta=%.4e testable=%d significant=%d (%.3fs)",
        method, mined.delta_star, mined.m_final, len(significant), elapsed,
    )
    return MethodResult(
        method=method,
        delta=mined.delta_star,
        m_testable=mined.m_final,
        significant=significant,
        patterns_visited=mined.trace.patterns_visited,
        prune_evaluations=mined.trace.prune_evaluations,
        vertex_evaluations=mined.trace.vertex_evaluations,
        wall_time=elapsed,
    )


def fastcmh(
    dataset: Dataset,
    alpha: float = DEFAULT_ALPHA,
    max_ell: Optional[int] = None,
    mu: float = DEFAULT_MU,
    n_steps: int = DEFAULT_N_STEPS,
) -> MethodResult:
    """Tarone-corrected CMH interval search with the O(K log K) pruning bound."""
    return _tarone_search("fastcmh", dataset, alpha, max_ell, mu, n_steps, "fast")


def fais_cmh(
    dataset: Dataset,
    alpha: float = DEFAULT_ALPHA,
    max_ell: Optional[int] = None,
    mu: float = DEFAULT_MU,
    n_steps: int = DEFAULT_N_STEPS,
) -> MethodResult:
    """Same search with the pruning bound found by enumerating all 2^K vertices."""
    return _tarone_search("fais-cmh", dataset, alpha, max_ell, mu, n_steps, "vertices")


def fais_chi2(
    dataset: Dataset,
    alpha: float = DEFAULT_ALPHA,
    max_ell: Optional[int] = None,
    mu: float = DEFAULT_MU,
    n_steps: int = DEFAULT_N_STEPS,
) -> MethodResult:
    """Tarone-corrected Pearson chi-squared search: the covariate is ignored."""
    return _tarone_search("fais-chi2", dataset.collapsed(), alpha, max_ell, mu, n_steps, "fast")


def bonferroni_cmh(
    dataset: Dataset,
    alpha: float = DEFAULT_ALPHA,
    max_ell: Optional[int] = None,
    mu: float = DEFAULT_MU,
    n_steps: int = DEFAULT_N_STEPS,
) -> MethodResult:
    """CMH test of every interval at alpha / |M|. mu and n_steps are unused."""
    start = time.perf_counter()
    counts = dataset.counts
    total = count_intervals(dataset.L, max_ell)
    delta = alpha / total
    # T at or above this is p <= delta; the margin absorbs vectorised rounding
    t_screen = stats.chi2.isf(delta, df=1) * (1.0 - 1e-9)

    categories = np.zeros((dataset.K, dataset.n))
    categories[dataset.covariate, np.arange(dataset.n)] = 1.0
    case_categories = categories * dataset.labels
    n = np.asarray(counts.n, dtype=float)[:, None]
    gamma = np.asarray(counts.gamma)[:, None]
    var_coef = np.asarray(counts.var_coef)[:, None]

    significant: List[SignificantPattern] = []
    for tau in range(dataset.L):
        cap = dataset.L - tau if max_ell is None else min(dataset.L - tau, max_ell)
        covered = np.logical_or.accumulate(dataset.bits[:, tau:tau + cap].astype(bool), axis=1).astype(float)
        x = categories @ covered
        a = case_categories @ covered
        num = (a - gamma * x).sum(axis=0)
        den = (var_coef * x * (1.0 - x / n)).sum(axis=0)
        with np.errstate(divide="ignore", invalid="ignore"):
            t_values = np.where(den > 0.0, num * num / np.where(den > 0.0, den, 1.0), 0.0)
        for offset in np.flatnonzero(t_values >= t_screen):
            support = PatternSupport(
                tuple(int(v) for v in x[:, offset]), tuple(int(v) for v in a[:, offset])
            )
            statistic = cmh_statistic(counts, support)
            p_value = chi2_sf(statistic)
            if p_value <= delta:
                significant.append(
                    SignificantPattern(Interval(tau, int(offset) + 1), statistic, p_value, support.x, support.a)
                )

    significant.sort(key=SignificantPattern.sort_key)
    elapsed = time.perf_counter() - start
    logger.info("bonferroni-cmh: |M|=%d delta=%.4e significant=%d (%.3fs)", total, delta, len(significant), elapsed)
    return MethodResult(
        method="bonferroni-cmh",
        delta=delta,
        m_testable=total,
        significant=significant,
        patterns_visited=total,
        wall_time=elapsed,
    )


METHOD_FUNCTIONS: Dict[str, Callable[..., MethodResult]] = {
    "fastcmh": fastcmh,
    "bonferroni-cmh": bonferroni_cmh,
    "fais-chi2": fais_chi2,
    "fais-cmh": fais_cmh,
}


def run_method(method: str, dataset: Dataset, **params) -> MethodResult:
    try:
        func = METHOD_FUNCTIONS[method]
    except KeyError:
        raise ConfigError(f"unknown method: {method}") from None
    return func(dataset, **params)
