"""
Time-domain scattering elements of a single Lambda-emitter photon subtractor.

Elements are kept symbolic: a KernelTerm is a coefficient times Dirac deltas
pairing an output time with an input time, times exp(gamma * sum(t_in - t_out))
over its exponential pairs. Single-photon "keep" factors carry both a delta and
a smooth part; KernelTerm.expand() splits them so that every expanded term is a
pure product of deltas and one exponential. Indices are 0-based throughout;
photon i is the (i+1)-th arriving photon.
"""

import math
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
from typing import FrozenSet, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from utils.errors import DomainError, ScatteringMisuseError, UnsupportedError

# Output/input pair identified by a delta: (output index, input index)
DeltaPair = Tuple[int, int]
# Exponential pair: (input index entering with +, output index entering with -)
ExpPair = Tuple[int, int]

MAX_PHOTONS = 3


class Kernel(str, Enum):
    """Single-photon outcome."""
    SUBTRACT = "subtract"
    KEEP = "keep"


class FinalState(str, Enum):
    """Emitter ground state after the interaction."""
    STATE1 = "state1"
    STATE2 = "state2"


def sigma1(kind: Kernel, dt: float, gamma: float = 1.0) -> Tuple[float, complex]:
    """
    Single-photon kernel at dt = t' - t >= 0, split into (delta weight, smooth part).

    subtract: (0, -gamma e^{-gamma dt}); keep: (1 if dt == 0, -gamma e^{-gamma dt}).
    """
    if dt < 0:
        raise DomainError(f"output time precedes input time (dt={dt})")
    smooth = complex(-gamma * math.exp(-gamma * dt))
    weight = 1.0 if (Kernel(kind) == Kernel.KEEP and dt == 0) else 0.0
    return weight, smooth


def sigma1_freq(kind: Kernel, omega, gamma: float = 1.0):
    """Lorentzian transfer functions: subtract -gamma/(gamma + i w), keep i w/(gamma + i w)."""
    omega = np.asarray(omega, dtype=float)
    if Kernel(kind) == Kernel.SUBTRACT:
        return -gamma / (gamma + 1j * omega)
    return 1j * omega / (gamma + 1j * omega)


def is_interleaved(t: Sequence[float], tp: Sequence[float]) -> bool:
    """t_1 <= t'_1 <= t_2 <= t'_2 <= ... <= t_N <= t'_N."""
    merged = [x for pair in zip(t, tp) for x in pair]
    return all(a <= b for a, b in zip(merged, merged[1:]))


def green_fn(k: int, final: FinalState, t: Sequence[float], tp: Sequence[float], gamma: float = 1.0) -> complex:
    """
    Rotating-frame Green's function of k interacting photons.

    gamma^k exp(gamma sum_i (t_i - t'_i)) on the interleaved domain, 0 elsewhere.
    The final emitter state only fixes a phase that vanishes on resonance.

    Raises:
        DomainError: unsorted time arrays or wrong lengths
    """
    FinalState(final)
    if len(t) != k or len(tp) != k:
        raise DomainError(f"expected {k} input and {k} output times")
    if any(a > b for a, b in zip(t, t[1:])) or any(a > b for a, b in zip(tp, tp[1:])):
        raise DomainError("time arrays must be sorted")
    if not is_interleaved(t, tp):
        return 0j
    return complex(gamma**k * math.exp(gamma * sum(a - b for a, b in zip(t, tp))))


@dataclass(frozen=True)
class KernelTerm:
    """
    coefficient * prod deltas * exp(exp_rate * sum_{(i,o)} (t_i - t'_o)).

    keep_pairs lists exponential pairs (i, i) that stand for a full keep kernel
    delta(t'_i - t_i) - gamma e^{...}; the coefficient already holds the -gamma.
    """

    coefficient: complex
    delta_pairs: Tuple[DeltaPair, ...] = ()
    exp_rate: float = 1.0
    exp_pairs: Tuple[ExpPair, ...] = ()
    keep_pairs: FrozenSet[int] = frozenset()

    def expand(self) -> List["KernelTerm"]:
        """Split every keep factor into its delta and smooth alternatives."""
        terms = [self]
        for index in sorted(self.keep_pairs):
            split = []
            for term in terms:
                rest = tuple(p for p in term.exp_pairs if p != (index, index))
                split.append(
                    KernelTerm(
                        coefficient=term.coefficient / (-self.exp_rate),
                        delta_pairs=tuple(sorted(term.delta_pairs + ((index, index),))),
                        exp_rate=term.exp_rate,
                        exp_pairs=rest,
                    )
                )
                split.append(
                    KernelTerm(
                        coefficient=term.coefficient,
                        delta_pairs=term.delta_pairs,
                        exp_rate=term.exp_rate,
                        exp_pairs=term.exp_pairs,
                    )
                )
            terms = split
        return terms

    @property
    def is_expanded(self) -> bool:
        return not self.keep_pairs

    def smooth_value(self, t: Sequence[float], tp: Sequence[float]) -> complex:
        exponent = sum(t[i] - tp[o] for i, o in self.exp_pairs)
        return complex(self.coefficient * math.exp(self.exp_rate * exponent))


@dataclass(frozen=True)
class ScatterElement:
    """Sigma_j^N as a list of kernel terms; j = 0 means no photon subtracted."""

    n_photons: int
    j: int
    terms: Tuple[KernelTerm, ...]
    gamma: float = 1.0

    def expanded(self) -> List[KernelTerm]:
        return [sub for term in self.terms for sub in term.expand()]

    def sectors(self) -> List[FrozenSet[DeltaPair]]:
        """Distinct delta supports among the expanded terms."""
        seen = []
        for term in self.expanded():
            key = frozenset(term.delta_pairs)
            if key not in seen:
                seen.append(key)
        return seen


def compositions(total: int) -> List[Tuple[int, ...]]:
    """Ordered compositions of total into positive parts, lexicographic."""
    if total == 0:
        return [()]
    result = []
    for first in range(1, total + 1):
        for rest in compositions(total - first):
            result.append((first,) + rest)
    return result


def _composition_term(parts: Tuple[int, ...], n: int, j: int, gamma: float) -> KernelTerm:
    coefficient = 1.0 + 0j
    deltas: List[DeltaPair] = []
    exps: List[ExpPair] = []
    keep = set()
    start = 0
    for size in parts:
        coefficient *= -gamma
        if size == 1:
            exps.append((start, start))
            if start != j - 1:
                keep.add(start)
        else:
            for k in range(1, size):
                deltas.append((start + k - 1, start + k))
            exps.append((start, start + size - 1))
        start += size
    for trailing in range(start, n):
        deltas.append((trailing, trailing))
    return KernelTerm(
        coefficient=coefficient,
        delta_pairs=tuple(sorted(deltas)),
        exp_rate=gamma,
        exp_pairs=tuple(exps),
        keep_pairs=frozenset(keep),
    )


def mpk_expand(n: int, j: int, gamma: float = 1.0) -> List[KernelTerm]:
    """
    Full term list of Sigma_j^N.

    One term per ordered composition of J (J = j, or N when j = 0): parts of
    size 1 are single-photon kernels (subtract for photon j, keep otherwise),
    a part of size m > 1 starting at photon p is the multi-photon kernel
    -gamma prod_k delta(t_{p+k} - t'_{p+k-1}) exp(gamma (t_p - t'_{p+m-1})).
    The all-ones composition is the leading product term; photons after j
    pass through with identity deltas.

    Raises:
        UnsupportedError: N > 3
        DomainError: j outside 0..N
    """
    if not 1 <= n <= MAX_PHOTONS:
        raise UnsupportedError(f"scattering elements are available for 1 <= N <= {MAX_PHOTONS}, got {n}")
    if not 0 <= j <= n:
        raise DomainError(f"subtracted index {j} outside 0..{n}")
    total = n if j == 0 else j
    return [_composition_term(parts, n, j, gamma) for parts in compositions(total)]


@lru_cache(maxsize=64)
def scatter_element(n: int, j: int, gamma: float = 1.0) -> ScatterElement:
    return ScatterElement(n_photons=n, j=j, terms=tuple(mpk_expand(n, j, gamma)), gamma=gamma)


def identity_element(n: int) -> ScatterElement:
    """Pass-through element prod_i delta(t'_i - t_i), used as a no-interaction reference."""
    term = KernelTerm(coefficient=1.0 + 0j, delta_pairs=tuple((i, i) for i in range(n)), exp_rate=0.0)
    return ScatterElement(n_photons=n, j=0, terms=(term,), gamma=0.0)


def _on_support(pair: DeltaPair, t: Sequence[float], tp: Sequence[float], atol: float) -> bool:
    out, inp = pair
    return abs(tp[out] - t[inp]) <= atol


def eval_element(
    elem: ScatterElement,
    t: Sequence[float],
    tp: Sequence[float],
    sector: Optional[Iterable[DeltaPair]] = None,
    atol: float = 1e-12,
) -> complex:
    """
    Evaluate the smooth coefficient of one delta sector of an element.

    sector declares which deltas have been collapsed (default: none); the
    coordinates must satisfy them. The result sums the expanded terms whose
    delta set equals the sector. Outside the interleaved domain the value is 0.

    Raises:
        ScatteringMisuseError: coordinates lie on an undeclared delta support,
            or a declared delta is not satisfied
    """
    n = elem.n_photons
    if len(t) != n or len(tp) != n:
        raise DomainError(f"expected {n} input and {n} output times")
    declared = frozenset(tuple(p) for p in (sector or ()))
    for pair in declared:
        if not _on_support(pair, t, tp, atol):
            raise ScatteringMisuseError(f"declared delta {pair} is not satisfied by the coordinates")
    if not is_interleaved(t, tp):
        return 0j

    total = 0j
    for term in elem.expanded():
        pairs = frozenset(term.delta_pairs)
        if pairs == declared:
            total += term.smooth_value(t, tp)
        elif any(_on_support(p, t, tp, atol) for p in pairs - declared) and declared <= pairs:
            raise ScatteringMisuseError(
                f"coordinates lie on the support of delta(s) {sorted(pairs - declared)}; declare the collapsed sector"
            )
    return total
