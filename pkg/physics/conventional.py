"""
Beamsplitter-cascade baseline: splitter i reflects R_i of the light reaching it
to detector i and the fully transmitted light ends on detector n+1. Photons are
routed independently, so click counts follow a multinomial occupancy model.
"""

import itertools
import math
from typing import List, Sequence, Tuple

import numpy as np
from scipy import optimize

from models.schemas import SplitterConfig
from utils.errors import DomainError, UnsupportedError
from utils.logging import get_logger

logger = get_logger()

MAX_PHOTONS = 12
MAX_ASSIGNMENTS = 10**7
GRID_POINTS = 200


def routing_probs(cfg: SplitterConfig) -> List[float]:
    """P_i = R_i prod_{j<i} (1 - R_j) for i <= n, P_{n+1} = prod_j (1 - R_j)."""
    probabilities = []
    transmitted = 1.0
    for reflectivity in cfg.reflectivities:
        probabilities.append(reflectivity * transmitted)
        transmitted *= 1.0 - reflectivity
    probabilities.append(transmitted)
    return probabilities


def balanced_reflectivities(n: int) -> Tuple[float, ...]:
    """R_i = 1/(n + 2 - i): every detector receives 1/(n+1) of the light."""
    if n < 0:
        raise DomainError(f"splitter count must be non-negative, got {n}")
    return tuple(1.0 / (n + 2 - i) for i in range(1, n + 1))


def balanced_routing_probs(n: int) -> List[float]:
    return routing_probs(SplitterConfig(reflectivities=balanced_reflectivities(n)))


def weak_compositions(total: int, parts: int) -> List[Tuple[int, ...]]:
    """Ordered tuples of `parts` non-negative integers summing to `total`."""
    if parts == 0:
        return [()] if total == 0 else []
    if parts == 1:
        return [(total,)]
    return [(first,) + rest for first in range(total + 1) for rest in weak_compositions(total - first, parts - 1)]


def _check_probs(probabilities: Sequence[float]) -> None:
    if any(p < 0 for p in probabilities):
        raise DomainError("routing probabilities must be non-negative")
    if abs(math.fsum(probabilities) - 1.0) > 1e-12:
        raise DomainError(f"routing probabilities sum to {math.fsum(probabilities)}, not 1")


def avg_clicks(probabilities: Sequence[float], n_photons: int) -> float:
    """
    Mean number of clicking detectors for N photons.

    Multinomial sum N! sum_k k sum_{A with k nonzero entries} prod_i P_i^A_i / A_i!
    over occupations A of the n+1 detectors.

    Raises:
        DomainError: probabilities do not sum to 1
        UnsupportedError: N > 12
    """
    _check_probs(probabilities)
    if n_photons < 0:
        raise DomainError(f"photon number must be non-negative, got {n_photons}")
    if n_photons > MAX_PHOTONS:
        raise UnsupportedError(f"composition enumeration is limited to N <= {MAX_PHOTONS}")
    by_clicks = {}
    for occupation in weak_compositions(n_photons, len(probabilities)):
        k = sum(1 for a in occupation if a)
        weight = math.prod(p**a / math.factorial(a) for p, a in zip(probabilities, occupation))
        by_clicks.setdefault(k, []).append(weight)
    total = math.fsum(k * math.fsum(weights) for k, weights in by_clicks.items())
    return math.factorial(n_photons) * total


def avg_clicks_closed_form(probabilities: Sequence[float], n_photons: int) -> float:
    """sum_i (1 - (1 - P_i)^N): expected number of occupied detectors."""
    _check_probs(probabilities)
    return math.fsum(1.0 - (1.0 - p) ** n_photons for p in probabilities)


def avg_clicks_bruteforce(probabilities: Sequence[float], n_photons: int) -> float:
    """Expectation over every detector assignment of N distinguishable photons."""
    _check_probs(probabilities)
    detectors = len(probabilities)
    if detectors**n_photons > MAX_ASSIGNMENTS:
        raise UnsupportedError(f"{detectors}^{n_photons} assignments exceed {MAX_ASSIGNMENTS}")
    terms = [
        len(set(assignment)) * math.prod(probabilities[d] for d in assignment)
        for assignment in itertools.product(range(detectors), repeat=n_photons)
    ]
    return math.fsum(terms)


def equal_reflectivity_clicks(reflectivity: float, n: int, n_photons: int) -> float:
    return avg_clicks(routing_probs(SplitterConfig(reflectivities=(reflectivity,) * n)), n_photons)


def optimize_equal_reflectivity(n: int, n_photons: int, xtol: float = 1e-6) -> Tuple[float, float]:
    """
    Reflectivity R maximizing the mean clicks when all n splitters share R.

    A 200-point grid locates the maximum and checks unimodality; golden-section
    search then refines it, starting from the two neighbouring grid points.
    Flat or multimodal objectives return the best grid point.
    """
    if n < 1:
        raise DomainError(f"need at least one splitter, got {n}")
    grid = np.linspace(0.0, 1.0, GRID_POINTS + 2)[1:-1]
    values = np.array([equal_reflectivity_clicks(r, n, n_photons) for r in grid])
    best = int(np.argmax(values))
    if np.ptp(values) < 1e-12:
        return float(grid[best]), float(values[best])

    steps = np.sign(np.diff(values))
    steps = steps[steps != 0]
    changes = int(np.count_nonzero(np.diff(steps) != 0))
    unimodal = changes == 0 or (changes == 1 and steps[0] > 0)
    if not unimodal:
        logger.warning(f"Equal-reflectivity objective is not unimodal (n={n}, N={n_photons}); using the grid maximum")
        return float(grid[best]), float(values[best])

    lo = float(grid[max(best - 1, 0)])
    hi = float(grid[min(best + 1, len(grid) - 1)])
    try:
        result = optimize.minimize_scalar(
            lambda r: -equal_reflectivity_clicks(r, n, n_photons),
            bracket=(lo, hi),
            method="golden",
            tol=xtol,
        )
    except ValueError as e:
        logger.debug(f"Golden-section bracket rejected ({e}); using the grid maximum")
        return float(grid[best]), float(values[best])
    if not 0.0 <= result.x <= 1.0 or -result.fun < values[best]:
        return float(grid[best]), float(values[best])
    return float(result.x), float(-result.fun)


def response_curve(reflectivities: Sequence[float], photons: Sequence[int]) -> List[float]:
    """Mean clicks for each photon number through a fixed splitter cascade."""
    probabilities = routing_probs(SplitterConfig(reflectivities=tuple(reflectivities)))
    return [avg_clicks(probabilities, n_photons) for n_photons in photons]
