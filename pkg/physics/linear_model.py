"""
Frequency-domain model of the cascade in the linear regime (gamma = 1).

Each photon meets the emitters one at a time; an emitter that has subtracted
a photon drops out of the cascade and the pulse is reshaped by every emitter
it passes.
"""

import math
import threading
from typing import Dict, List, Sequence, Tuple

import numpy as np
from cachetools import LRUCache, cached
from cachetools.keys import hashkey

from models.schemas import LinearConfig, QuadratureConfig
from physics.numerics import quad_real
from physics.pulses import gaussian_h_freq
from utils.errors import DomainError
from utils.logging import get_logger

logger = get_logger()

_single_cache: LRUCache = LRUCache(maxsize=4096)
_single_lock = threading.Lock()


def _single_key(lam: int, cfg: LinearConfig, quad: QuadratureConfig = None):
    return hashkey(lam, cfg.delta_gamma, cfg.detuning, quad)


@cached(cache=_single_cache, key=_single_key, lock=_single_lock)
def p_subtract_single(lam: int, cfg: LinearConfig, quad: QuadratureConfig = None) -> float:
    """
    Probability that a single photon is subtracted by a cascade of lam emitters.

    P^lam = 1 - integral |Sigma_0^1(w)|^(2 lam) |h(w)|^2 dw with
    |Sigma_0^1(w)|^2 = w^2 / (1 + w^2).
    """
    if lam < 0:
        raise DomainError(f"emitter count must be non-negative, got {lam}")
    if lam == 0:
        return 0.0
    delta = cfg.delta_gamma
    sigma = math.sqrt(2.0) / delta
    half_width = 12.0 * sigma
    lo, hi = cfg.detuning - half_width, cfg.detuning + half_width

    def integrand(omega: float) -> float:
        keep = omega * omega / (1.0 + omega * omega)
        return keep**lam * abs(gaussian_h_freq(delta, cfg.detuning, omega)) ** 2

    survived = quad_real(integrand, lo, hi, quad, points=[0.0, cfg.detuning])
    value = 1.0 - survived
    return float(min(1.0, max(0.0, value)))


def enumerate_multisets(size: int, max_value: int) -> List[Tuple[int, ...]]:
    """All multisets of `size` elements from {0..max_value}, as non-decreasing tuples."""
    if size < 0 or max_value < 0:
        raise DomainError("size and max_value must be non-negative")
    result: List[Tuple[int, ...]] = []

    def extend(prefix: Tuple[int, ...], low: int) -> None:
        if len(prefix) == size:
            result.append(prefix)
            return
        for value in range(low, max_value + 1):
            extend(prefix + (value,), value)

    extend((), 0)
    return result


def _probabilities(n: int, cfg: LinearConfig, quad: QuadratureConfig = None) -> Dict[int, float]:
    return {lam: p_subtract_single(lam, cfg, quad) for lam in range(n + 1)}


def p_subtract_k_of_n(n_photons: int, k: int, cfg: LinearConfig, quad: QuadratureConfig = None) -> float:
    """
    Probability that exactly k of N photons are subtracted by n = cfg.n_emitters emitters.

    The k successes use cascades of n, n-1, ..., n-k+1 active emitters; each
    of the N-k failures happened while some number B(i) in 0..k of emitters had
    already fired, summed over multisets B.
    """
    n = cfg.n_emitters
    if n_photons < 0 or not 0 <= k <= min(n_photons, n):
        raise DomainError(f"invalid combination N={n_photons}, k={k}, n={n}")
    p = _probabilities(n, cfg, quad)
    if k == 0:
        return (1.0 - p[n]) ** n_photons

    successes = math.prod(p[n - m] for m in range(k))
    terms = [
        math.prod(1.0 - p[n - b] for b in multiset)
        for multiset in enumerate_multisets(n_photons - k, k)
    ]
    return successes * math.fsum(terms)


def outcome_distribution(n_photons: int, cfg: LinearConfig, quad: QuadratureConfig = None) -> List[float]:
    """P_{N,k}^n for k = 0..min(N, n)."""
    return [p_subtract_k_of_n(n_photons, k, cfg, quad) for k in range(min(n_photons, cfg.n_emitters) + 1)]


def avg_error(n_photons: int, cfg: LinearConfig, quad: QuadratureConfig = None) -> float:
    """Mean counting error sum_{k=0}^{min(n, N-2)} (k + 1 - N) P_{N,k}^n; never positive."""
    if n_photons < 1:
        raise DomainError(f"photon number must be positive, got {n_photons}")
    upper = min(cfg.n_emitters, n_photons - 2)
    terms = [(k + 1 - n_photons) * p_subtract_k_of_n(n_photons, k, cfg, quad) for k in range(upper + 1)]
    return math.fsum(terms)


def predicted_outcomes(n_photons: int, cfg: LinearConfig, quad: QuadratureConfig = None) -> List[float]:
    """
    Single-emitter outcome probabilities for photons arriving one at a time.

    P_0 = (1 - P)^N and P_j = (1 - P)^(j-1) P, P = P^1.
    """
    if n_photons < 1:
        raise DomainError(f"photon number must be positive, got {n_photons}")
    p = p_subtract_single(1, cfg, quad)
    return [(1.0 - p) ** n_photons] + [(1.0 - p) ** (j - 1) * p for j in range(1, n_photons + 1)]


def subtraction_curve(lambdas: Sequence[int], cfg: LinearConfig, quad: QuadratureConfig = None) -> List[float]:
    """P^lam for each cascade length."""
    return [p_subtract_single(lam, cfg, quad) for lam in lambdas]


def error_map(
    emitters: Sequence[int], photons: Sequence[int], cfg: LinearConfig, quad: QuadratureConfig = None
) -> np.ndarray:
    """avg_error over an (n, N) grid at fixed delta*gamma; rows follow `emitters`."""
    table = np.empty((len(emitters), len(photons)))
    for row, n in enumerate(emitters):
        cfg_n = cfg.model_copy(update={"n_emitters": n})
        for col, n_photons in enumerate(photons):
            table[row, col] = avg_error(n_photons, cfg_n, quad)
    logger.debug(f"Linear error map {len(emitters)}x{len(photons)} at delta_gamma={cfg.delta_gamma}")
    return table
