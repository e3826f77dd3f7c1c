"""
Tarone-corrected significant pattern mining over any antitone pattern tree.

Pass 1 (mine) walks the tree depth-first, counts patterns whose minimum
attainable p-value Psi is below the running threshold delta, and lowers delta
along the grid 10^(-j*mu) whenever delta * |testable| exceeds alpha. Subtrees
are skipped when no descendant can become testable. The corrected threshold is
delta* = alpha / |testable|.

Pass 2 (significant_pass) re-walks the tree against delta* and reports the
patterns whose realised CMH p-value is at most delta*.

Enumerators must yield children whose per-category supports never exceed their
parent's (the pruning bound depends on it).
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Iterable, List, Optional, Protocol, Tuple

from fastcmh._common import (
    DEFAULT_MU,
    DEFAULT_N_STEPS,
    ConfigError,
    GridExhaustedError,
)
from fastcmh.prune import PruneChecker
from fastcmh.stats_core import (
    PatternSupport,
    StratifiedCounts,
    cmh_statistic,
    chi2_sf,
    min_attainable_pvalue,
)

logger = logging.getLogger(__name__)


# === THRESHOLD GRID ===

def grid_delta(j: int, mu: float) -> float:
    """The j-th tentative threshold. Every use of the grid goes through here."""
    return 10.0 ** (-j * mu)


def bucket_index(p: float, mu: float, n_steps: int) -> int:
    """Grid cell of a minimum attainable p-value.

    floor(-log10(p) / mu), clamped to n_steps - 1 and aligned with grid_delta so
    that p <= grid_delta(j) holds exactly when the index is >= j.
    """
    if p >= 1.0:
        return 0
    i = min(max(int(math.floor(-math.log10(p) / mu)), 0), n_steps - 1)
    while i + 1 < n_steps and grid_delta(i + 1, mu) >= p:
        i += 1
    while i > 0 and grid_delta(i, mu) < p:
        i -= 1
    return i


@dataclass
class TaroneState:
    """Running threshold, bucket histogram and testable count of one traversal."""
    alpha: float
    mu: float
    n_steps: int
    j: int = 0
    delta: float = 1.0
    buckets: List[int] = field(default_factory=list)
    m_testable: int = 0

    @property
    def grid_floor(self) -> float:
        return grid_delta(self.n_steps - 1, self.mu)

    def suffix_count(self) -> int:
        return sum(self.buckets[self.j:])


def new_state(alpha: float, mu: float = DEFAULT_MU, n_steps: int = DEFAULT_N_STEPS) -> TaroneState:
    if not 0.0 < alpha < 1.0:
        raise ConfigError(f"alpha must lie in (0, 1), got {alpha}")
    if not mu > 0.0 or math.isinf(mu):
        raise ConfigError(f"mu must be a positive step, got {mu}")
    if n_steps < 2:
        raise ConfigError(f"n_steps must be at least 2, got {n_steps}")
    return TaroneState(alpha=alpha, mu=mu, n_steps=n_steps, j=0, delta=grid_delta(0, mu), buckets=[0] * n_steps)


def register_testable(state: TaroneState, psi: float) -> bool:
    """Count a pattern testable at the current delta and restore delta * m <= alpha.

    Returns True when the pattern itself is no longer testable after the decay.
    """
    state.m_testable += 1
    state.buckets[bucket_index(psi, state.mu, state.n_steps)] += 1
    while state.delta * state.m_testable > state.alpha:
        state.m_testable -= state.buckets[state.j]
        state.j += 1
        if state.j >= state.n_steps:
            raise GridExhaustedError(
                f"threshold grid exhausted after {state.n_steps} steps of mu={state.mu}; "
                "increase n_steps or mu"
            )
        state.delta = grid_delta(state.j, state.mu)
        logger.debug("delta decayed to %.3e (j=%d, m=%d)", state.delta, state.j, state.m_testable)
    return psi > state.delta


# === PATTERN TREE ===

class PatternNode(Protocol):
    pattern: Any
    support: Tuple[int, ...]


class PatternEnumerator(Protocol):
    """A pattern tree with antitone per-category supports."""
    counts: StratifiedCounts

    def roots(self) -> Iterable[PatternNode]: ...

    def children(self, node: PatternNode) -> Iterable[PatternNode]: ...

    def report_support(self, node: PatternNode) -> PatternSupport: ...


def walk(enumerator: PatternEnumerator, visit: Callable[[PatternNode], bool]) -> None:
    """Depth-first traversal; visit(node) decides whether to descend."""
    stack = [(None, iter(enumerator.roots()))]
    while stack:
        parent_support, pending = stack[-1]
        node = next(pending, None)
        if node is None:
            stack.pop()
            continue
        if parent_support is not None:
            assert all(c <= p for c, p in zip(node.support, parent_support)), (
                f"child {node.pattern} has larger support than its parent"
            )
        if visit(node):
            stack.append((node.support, iter(enumerator.children(node))))


# === RESULTS ===

@dataclass
class MiningTrace:
    patterns_visited: int = 0
    pruned_subtrees: int = 0
    prune_evaluations: int = 0
    vertex_evaluations: int = 0
    registered: int = 0
    visits: Optional[List[Tuple[Any, float]]] = None


@dataclass
class MiningResult:
    delta_star: float
    m_final: int
    state: TaroneState
    trace: MiningTrace


@dataclass(frozen=True)
class SignificantPattern:
    pattern: Any
    statistic: float
    p_value: float
    x: Tuple[int, ...]
    a: Tuple[int, ...]

    def sort_key(self):
        return (self.p_value, self.pattern)


# === PASSES ===

def mine(
    enumerator: PatternEnumerator,
    state: TaroneState,
    t_prune: str = "fast",
    pruning: bool = True,
    record_visits: bool = False,
) -> MiningResult:
    """Threshold pass: returns delta* = alpha / |testable| (alpha when none)."""
    counts = enumerator.counts
    checker = PruneChecker(counts, t_prune)
    trace = MiningTrace(visits=[] if record_visits else None)

    def visit(node) -> bool:
        trace.patterns_visited += 1
        psi = min_attainable_pvalue(counts, node.support)
        if record_visits:
            trace.visits.append((node.pattern, psi))
        if psi <= state.delta:
            register_testable(state, psi)
            trace.registered += 1
        if not pruning or checker(node.support, state.delta):
            return True
        trace.pruned_subtrees += 1
        return False

    walk(enumerator, visit)
    trace.prune_evaluations = checker.evaluations
    trace.vertex_evaluations = checker.vertex_evaluations

    m_final = state.m_testable
    delta_star = state.alpha / m_final if m_final > 0 else state.alpha
    logger.info(
        "threshold pass: delta*=%.4e, testable=%d, visited=%d, pruned=%d",
        delta_star, m_final, trace.patterns_visited, trace.pruned_subtrees,
    )
    return MiningResult(delta_star=delta_star, m_final=m_final, state=state, trace=trace)


def significant_pass(
    enumerator: PatternEnumerator,
    delta_star: float,
    alpha: float = None,
    t_prune: str = "fast",
    trace: MiningTrace = None,
) -> List[SignificantPattern]:
    """Patterns with CMH p-value <= delta*, sorted by p then pattern.

    When alpha is given, testability is recounted at delta* itself; a recount
    that breaks delta* * count <= alpha (possible because delta* falls between
    grid points) is logged as a warning.
    """
    counts = enumerator.counts
    checker = PruneChecker(counts, t_prune)
    found: List[SignificantPattern] = []
    testable = 0

    def visit(node) -> bool:
        nonlocal testable
        if min_attainable_pvalue(counts, node.support) <= delta_star:
            testable += 1
            support = enumerator.report_support(node)
            statistic = cmh_statistic(counts, support)
            p_value = chi2_sf(statistic)
            if p_value <= delta_star:
                found.append(SignificantPattern(node.pattern, statistic, p_value, support.x, support.a))
        return checker(node.support, delta_star)

    walk(enumerator, visit)
    if trace is not None:
        trace.prune_evaluations += checker.evaluations
        trace.vertex_evaluations += checker.vertex_evaluations
    if alpha is not None and testable * delta_star > alpha:
        logger.warning(
            "%d patterns are testable at delta*=%.4e, so delta* x count = %.4f exceeds alpha=%.4f "
            "(grid granularity); consider a smaller mu",
            testable, delta_star, testable * delta_star, alpha,
        )
    found.sort(key=SignificantPattern.sort_key)
    return found


def full_testable_set(enumerator: PatternEnumerator, delta: float) -> List[Tuple[Any, float]]:
    """Every (pattern, Psi) with Psi <= delta, by exhaustive walk without pruning."""
    counts = enumerator.counts
    hits = []

    def visit(node) -> bool:
        psi = min_attainable_pvalue(counts, node.support)
        if psi <= delta:
            hits.append((node.pattern, psi))
        return True

    walk(enumerator, visit)
    return hits


def testable_visits(result: MiningResult) -> List[Tuple[Any, float]]:
    """Recorded visits testable at the final grid threshold."""
    if result.trace.visits is None:
        raise ValueError("mine() was run without record_visits=True")
    delta = result.state.delta
    return [(pattern, psi) for pattern, psi in result.trace.visits if psi <= delta]

