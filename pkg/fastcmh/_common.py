"""
Shared constants, errors and small helpers for the fastcmh modules.
Import this module in other modules to reduce duplication.
"""

import math
import sys

# === CONSTANTS ===

DEFAULT_ALPHA = 0.05
DEFAULT_MU = 0.06
DEFAULT_N_STEPS = 500

# Brute-force guards
MAX_VERTEX_K = 20
MAX_GRID_K = 3
GRID_SIZE_GUARD = 10**6

# Smallest positive normal double; chi-squared tails saturate here
P_VALUE_FLOOR = sys.float_info.min

# Desk-scale bench defaults
BENCH_N = 200
BENCH_L = 1000
BENCH_REPETITIONS = 100
BENCH_P1 = 0.2
BENCH_PLANT_ELL = 5
# Window hit rate of the confounded plant; the background alone hits a
# BENCH_PLANT_ELL window with probability 1 - (1 - BENCH_P1)^5 ~ 0.67
BENCH_CONFOUNDED_P_CASE = 0.99

METHOD_IDS = ("fastcmh", "bonferroni-cmh", "fais-chi2", "fais-cmh")


# === ERRORS ===

class FastCMHError(Exception):
    """Base class for every error raised by the library."""


class ConfigError(FastCMHError):
    """Out-of-range run parameters."""


class GridExhaustedError(FastCMHError):
    """The threshold grid ran out of steps; mu or n_steps is too coarse."""


class SearchSpaceTooLargeError(FastCMHError):
    """A brute-force oracle was asked for more work than its guard allows."""


class InfeasibleSpecError(FastCMHError):
    """A generator specification cannot be realised."""


class DatasetError(FastCMHError):
    """Malformed or inconsistent dataset, optionally located in a file."""

    def __init__(self, message: str, path=None, line: int = None):
        self.path = path
        self.line = line
        location = ""
        if path is not None:
            location = f"{path}:{line}: " if line is not None else f"{path}: "
        super().__init__(f"{location}{message}")


class OutputError(FastCMHError):
    """A report or dataset file could not be written."""

    def __init__(self, message: str, path):
        self.path = path
        super().__init__(f"{path}: {message}")


# === VALIDATION HELPERS ===

def check_open_unit(name: str, value: float) -> float:
    """Require 0 < value < 1."""
    if not (0.0 < value < 1.0) or math.isnan(value):
        raise ConfigError(f"{name} must lie in (0, 1), got {value}")
    return value


def intervals_overlap(tau_a: int, ell_a: int, tau_b: int, ell_b: int) -> bool:
    """Half-open windows [tau, tau+ell) share at least one position."""
    return tau_a < tau_b + ell_b and tau_b < tau_a + ell_a


def count_intervals(L: int, max_ell: int = None) -> int:
    """Number of windows of length 1..max_ell inside L positions."""
    cap = L if max_ell is None else min(max_ell, L)
    return sum(L - ell + 1 for ell in range(1, cap + 1))
