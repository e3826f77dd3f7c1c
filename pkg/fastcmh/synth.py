"""
Synthetic datasets with planted significant intervals.

Every generator draws from numpy's PCG64 bit generator seeded with the spec's
seed, in a fixed draw order, so a (spec, seed) pair always yields the same
dataset. Bench repetitions derive their seeds with
numpy.random.SeedSequence([seed_base, repetition]).
"""

import logging
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np

from fastcmh._common import BENCH_CONFOUNDED_P_CASE, InfeasibleSpecError, check_open_unit
from fastcmh.interval_miner import Dataset

logger = logging.getLogger(__name__)


def make_rng(seed) -> np.random.Generator:
    """PCG64 generator; seed may be an int or a SeedSequence."""
    return np.random.Generator(np.random.PCG64(seed))


def window_probability(p_case: float, ell: int) -> float:
    """Per-cell probability q with P(at least one 1 among ell cells) = p_case."""
    return 1.0 - (1.0 - p_case) ** (1.0 / ell)


def _check_window(tau: int, ell: int, L: int) -> None:
    if ell < 1 or tau < 0 or tau + ell > L:
        raise InfeasibleSpecError(f"plant [{tau}, {tau + ell}) does not fit in L={L}")


def _plant(bits: np.ndarray, rows: np.ndarray, tau: int, ell: int, q: float, rng: np.random.Generator) -> None:
    """Redraw the window cells of the selected rows from Bernoulli(q)."""
    count = int(rows.sum())
    bits[rows, tau:tau + ell] = rng.random((count, ell)) < q


# === STANDARD DESIGN ===

@dataclass(frozen=True)
class GenSpec:
    """Balanced design: n/K samples per category, half of them cases."""
    n: int
    L: int
    K: int
    p1: float
    p_case: float
    plants: Tuple[Tuple[int, int], ...] = ()
    seed: int = 0

    def validate(self) -> None:
        if self.K < 1 or self.n < 2 * self.K or self.n % (2 * self.K) != 0:
            raise InfeasibleSpecError(
                f"n={self.n} must be a positive multiple of 2K={2 * self.K} "
                "(equal cases and controls per category)"
            )
        if self.L < 1:
            raise InfeasibleSpecError(f"L must be positive, got {self.L}")
        check_open_unit("p1", self.p1)
        check_open_unit("p_case", self.p_case)
        for tau, ell in self.plants:
            _check_window(tau, ell, self.L)


def gen_standard(spec: GenSpec) -> Dataset:
    """Background Bernoulli(p1) with case windows enriched to hit rate p_case.

    Category i holds samples [i*n/K, (i+1)*n/K); the first half of each block
    are cases.
    """
    spec.validate()
    rng = make_rng(spec.seed)
    per_category = spec.n // spec.K
    half = per_category // 2
    covariate = np.repeat(np.arange(spec.K), per_category)
    labels = np.tile(np.r_[np.ones(half, dtype=np.uint8), np.zeros(half, dtype=np.uint8)], spec.K)

    bits = rng.random((spec.n, spec.L)) < spec.p1
    cases = labels == 1
    for tau, ell in spec.plants:
        _plant(bits, cases, tau, ell, window_probability(spec.p_case, ell), rng)
    logger.debug("generated standard dataset n=%d L=%d K=%d seed=%d", spec.n, spec.L, spec.K, spec.seed)
    return Dataset(bits.astype(np.uint8), labels, covariate)


# === CONFOUNDED DESIGN ===

def triple_pmf(rho_sig: float, rho_con: float) -> np.ndarray:
    """Joint pmf of three Bernoulli(0.5) bits, indexed by z1*4 + z2*2 + z3.

    corr(z1, z3) = rho_sig, corr(z2, z3) = rho_con, corr(z1, z2) = 0 and no
    three-way interaction. Raises InfeasibleSpecError when a cell is negative.
    """
    for name, rho in (("rho_sig", rho_sig), ("rho_con", rho_con)):
        if not -1.0 <= rho <= 1.0:
            raise InfeasibleSpecError(f"{name} must lie in [-1, 1], got {rho}")
    pmf = np.empty(8)
    for cell in range(8):
        s1, s2, s3 = (2 * ((cell >> shift) & 1) - 1 for shift in (2, 1, 0))
        pmf[cell] = (1.0 + rho_sig * s1 * s3 + rho_con * s2 * s3) / 8.0
        if pmf[cell] < -1e-12:
            z = ((cell >> 2) & 1, (cell >> 1) & 1, cell & 1)
            raise InfeasibleSpecError(
                f"rho_sig={rho_sig}, rho_con={rho_con} give P(z1,z2,z3={z}) = {pmf[cell]:.4f} < 0"
            )
    pmf = np.clip(pmf, 0.0, None)
    return pmf / pmf.sum()


def sample_bernoulli_triple(
    rho_sig: float, rho_con: float, rng: np.random.Generator, size: Optional[int] = None
) -> np.ndarray:
    """Draw (z1, z2, z3) triples; shape (3,) when size is None, else (size, 3)."""
    pmf = triple_pmf(rho_sig, rho_con)
    cells = rng.choice(8, size=1 if size is None else size, p=pmf)
    triples = np.stack([(cells >> 2) & 1, (cells >> 1) & 1, cells & 1], axis=1).astype(np.uint8)
    return triples[0] if size is None else triples


@dataclass(frozen=True)
class ConfoundSpec:
    """Two categories; a window tied to the category and, through it, to the label.

    The confounded window is enriched in samples with z5 = XOR(z2, z4) = 1.
    A genuine window, enriched in samples with z1 = 1, is planted only when
    genuine_tau is set.
    """
    n: int
    L: int
    p1: float
    rho_sig: float
    rho_con: float
    tau: int
    ell: int
    p_case: float = BENCH_CONFOUNDED_P_CASE
    p_eps: float = 0.1
    genuine_tau: Optional[int] = None
    genuine_ell: int = 5
    seed: int = 0

    def validate(self) -> None:
        if self.n < 2 or self.L < 1:
            raise InfeasibleSpecError(f"need n >= 2 and L >= 1, got n={self.n}, L={self.L}")
        check_open_unit("p1", self.p1)
        check_open_unit("p_case", self.p_case)
        if not 0.0 <= self.p_eps < 1.0:
            raise InfeasibleSpecError(f"p_eps must lie in [0, 1), got {self.p_eps}")
        _check_window(self.tau, self.ell, self.L)
        if self.genuine_tau is not None:
            _check_window(self.genuine_tau, self.genuine_ell, self.L)
        triple_pmf(self.rho_sig, self.rho_con)


@dataclass
class ConfoundedDraws:
    """Latent bits of a confounded dataset, one entry per sample."""
    z1: np.ndarray
    z2: np.ndarray
    z3: np.ndarray
    z4: np.ndarray
    z5: np.ndarray


def draw_confounded(spec: ConfoundSpec, rng: np.random.Generator) -> ConfoundedDraws:
    triples = sample_bernoulli_triple(spec.rho_sig, spec.rho_con, rng, size=spec.n)
    z4 = (rng.random(spec.n) < spec.p_eps).astype(np.uint8)
    z2 = triples[:, 1]
    return ConfoundedDraws(triples[:, 0], z2, triples[:, 2], z4, np.bitwise_xor(z2, z4))


def gen_confounded(spec: ConfoundSpec, return_draws: bool = False):
    """Dataset whose planted window is explained by the category.

    category = z2, label = z3. With return_draws=True returns
    (dataset, ConfoundedDraws).
    """
    spec.validate()
    rng = make_rng(spec.seed)
    draws = draw_confounded(spec, rng)
    bits = rng.random((spec.n, spec.L)) < spec.p1
    _plant(bits, draws.z5 == 1, spec.tau, spec.ell, window_probability(spec.p_case, spec.ell), rng)
    if spec.genuine_tau is not None:
        q = window_probability(spec.p_case, spec.genuine_ell)
        _plant(bits, draws.z1 == 1, spec.genuine_tau, spec.genuine_ell, q, rng)
    dataset = Dataset(bits.astype(np.uint8), draws.z3, draws.z2.astype(np.int64))
    logger.debug(
        "generated confounded dataset n=%d L=%d rho_con=%.2f p_eps=%.2f seed=%d",
        spec.n, spec.L, spec.rho_con, spec.p_eps, spec.seed,
    )
    if return_draws:
        return dataset, draws
    return dataset


def plant_windows(spec) -> Sequence[Tuple[int, int]]:
    """(tau, ell) of the windows a spec plants for detection scoring."""
    if isinstance(spec, ConfoundSpec):
        return ((spec.tau, spec.ell),)
    return tuple(spec.plants)
