"""
Exact single-emitter observables from the collapsed scattering terms.

The output amplitude of outcome j is evaluated on ordered output times: every
delta of an expanded kernel term puts an output time into an input slot and
every exponential pair integrates its input photon over its nested window in
closed form (WavePacket.interval). Probabilities and correlators are then at
most N-dimensional integrals over ordered chains of output times.

Times are in units of 1/gamma; the emitter rate is fixed to 1.
"""

import math
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from cachetools import LRUCache, cached
from cachetools.keys import hashkey

from models.schemas import PulseSpec, QuadratureConfig, TimeGrid
from physics.numerics import Chain, quad_chains, quad_real
from physics.pulses import AmplitudeFn, build_amplitude
from physics.scattering import KernelTerm, ScatterElement, identity_element, scatter_element
from utils.config import get_settings
from utils.errors import DegenerateStateError, DomainError, QuadratureConvergenceError, UnsupportedError
from utils.logging import get_logger, log_metric

logger = get_logger()

GAMMA = 1.0
MAX_PHOTONS = 3
# Photon number and outcome pairs with a two-photon correlator of the mode-1 photons
CORRELATOR_CASES = ((2, 0), (3, 0), (3, 3))
# Unconverged cubature is accepted when its own error estimate stays below this
ACCEPT_ERROR = 1e-5


@dataclass(frozen=True)
class OutcomeAmplitude:
    """
    Two-mode output amplitude g'_{N,j} on ordered output times.

    Photon j-1 (0-based) is the one the emitter moved to the second mode; j = 0
    means every photon stayed. Values vanish outside t'_1 <= ... <= t'_N and
    include 1/sqrt(measured input norm).
    """

    spec: PulseSpec
    j: int
    amplitude: AmplitudeFn
    terms: Tuple[KernelTerm, ...]
    gamma: float = GAMMA

    @property
    def n_photons(self) -> int:
        return self.spec.n_photons

    @property
    def scale(self) -> float:
        return self.amplitude.norm_factor / math.sqrt(self.amplitude.measured_norm)

    def eval(self, *tp):
        n = self.n_photons
        if len(tp) != n:
            raise DomainError(f"expected {n} output times, got {len(tp)}")
        tp = np.broadcast_arrays(*[np.asarray(t, dtype=float) for t in tp])
        shape = tp[0].shape
        ordered = np.ones(shape, dtype=bool)
        for left, right in zip(tp, tp[1:]):
            ordered &= left <= right

        packets = self.amplitude.wavepackets
        values: Dict[Tuple[int, int], np.ndarray] = {}
        filtered: Dict[Tuple[int, int], np.ndarray] = {}

        def value(packet: int, out: int) -> np.ndarray:
            if (packet, out) not in values:
                values[packet, out] = packets[packet](tp[out])
            return values[packet, out]

        def causal(packet: int, out: int) -> np.ndarray:
            if (packet, out) not in filtered:
                filtered[packet, out] = packets[packet].causal(tp[out], self.gamma)
            return filtered[packet, out]

        total = np.zeros(shape, dtype=complex)
        for product in self.amplitude.products:
            for term in self.terms:
                part = np.full(shape, product.weight * term.coefficient, dtype=complex)
                for out, inp in term.delta_pairs:
                    part = part * value(product.slots[inp], out)
                for inp, out in term.exp_pairs:
                    packet = product.slots[inp]
                    window = np.exp(self.gamma * (tp[inp] - tp[out])) * causal(packet, inp)
                    if inp > 0:
                        window = window - np.exp(self.gamma * (tp[inp - 1] - tp[out])) * causal(packet, inp - 1)
                    part = part * window
                total = total + part
        result = np.where(ordered, self.scale * total, 0.0)
        return result if shape else complex(result)

    __call__ = eval

    def intensity(self, *tp):
        return np.abs(self.eval(*tp)) ** 2


def _element(n: int, j: int, passthrough: bool) -> ScatterElement:
    if not passthrough:
        return scatter_element(n, j, GAMMA)
    if j == 0:
        return identity_element(n)
    return ScatterElement(n_photons=n, j=j, terms=(), gamma=0.0)


_amplitude_cache: LRUCache = LRUCache(maxsize=128)
_amplitude_lock = threading.Lock()


@cached(cache=_amplitude_cache, lock=_amplitude_lock)
def outcome_amplitude(spec: PulseSpec, j: int, passthrough: bool = False) -> OutcomeAmplitude:
    """
    Output amplitude of outcome j for the input state described by spec.

    passthrough replaces the emitter by the identity element, which leaves the
    input untouched (outcome 0 only; other outcomes are identically zero).

    Raises:
        UnsupportedError: N > 3
        DomainError: j outside 0..N
    """
    n = spec.n_photons
    if n > MAX_PHOTONS:
        raise UnsupportedError(f"analytic outputs are available for N <= {MAX_PHOTONS}, got {n}")
    if not 0 <= j <= n:
        raise DomainError(f"outcome {j} outside 0..{n}")
    element = _element(n, j, passthrough)
    return OutcomeAmplitude(
        spec=spec,
        j=j,
        amplitude=build_amplitude(spec),
        terms=tuple(element.expanded()),
        gamma=element.gamma if passthrough else GAMMA,
    )


def output_amplitude(spec: PulseSpec, j: int, tp: Sequence[float], passthrough: bool = False) -> complex:
    """g'_{N,j}(t'_1, ..., t'_N) at ordered output times."""
    if any(a > b for a, b in zip(tp, tp[1:])):
        raise DomainError("output times must be ordered")
    return complex(outcome_amplitude(spec, j, passthrough)(*tp))


def _cfg(cfg: Optional[QuadratureConfig]) -> QuadratureConfig:
    return cfg or QuadratureConfig.from_settings()


def _integrate(f: Callable[..., np.ndarray], chains: Sequence[Chain], cfg: QuadratureConfig) -> float:
    try:
        return float(np.real(quad_chains(f, chains, cfg, complex_valued=False)))
    except QuadratureConvergenceError as e:
        if e.error_estimate > ACCEPT_ERROR:
            raise
        logger.warning(f"Accepting unconverged cubature: {e}")
        return float(np.real(e.estimate))


def p_outcome(spec: PulseSpec, j: int, cfg: Optional[QuadratureConfig] = None, passthrough: bool = False) -> float:
    """
    Probability P_j^N that photon j was subtracted (j = 0: none was).

    Integral of |g'_{N,j}|^2 over the ordered output simplex.
    """
    amp = outcome_amplitude(spec, j, passthrough)
    lo, hi = spec.window(GAMMA)
    probability = _integrate(amp.intensity, [(lo, hi, spec.n_photons)], _cfg(cfg))
    log_metric("p_outcome", probability, tags=_tags(spec, j))
    return probability


def outcome_table(spec: PulseSpec, cfg: Optional[QuadratureConfig] = None) -> List[float]:
    """[P_0, ..., P_N]."""
    return [p_outcome(spec, j, cfg) for j in range(spec.n_photons + 1)]


def _tags(spec: PulseSpec, j: int) -> Dict[str, str]:
    return {"family": spec.family.value, "n_photons": str(spec.n_photons), "j": str(j), "delta": str(spec.delta)}


def _check_case(spec: PulseSpec, j: int) -> None:
    if (spec.n_photons, j) not in CORRELATOR_CASES:
        raise DomainError(
            f"correlators are defined for (N, j) in {list(CORRELATOR_CASES)}, got ({spec.n_photons}, {j})"
        )


def mode_photons(n: int, j: int) -> int:
    """Photons left in the first mode after outcome j."""
    return n if j == 0 else n - 1


def _inner(cfg: QuadratureConfig, spec: PulseSpec) -> QuadratureConfig:
    return cfg.scaled(10.0) if spec.n_photons == 3 else cfg


def _g2_value(spec: PulseSpec, j: int, t1: float, t2: float, cfg: QuadratureConfig, passthrough: bool) -> float:
    amp = outcome_amplitude(spec, j, passthrough)
    a, b = min(t1, t2), max(t1, t2)
    lo, hi = spec.window(GAMMA)
    if spec.n_photons == 2:
        return float(amp.intensity(a, b))
    inner = _inner(cfg, spec)
    if j == 0:
        return (
            _integrate(lambda u: amp.intensity(u, a, b), [(lo, a, 1)], inner)
            + _integrate(lambda u: amp.intensity(a, u, b), [(a, b, 1)], inner)
            + _integrate(lambda u: amp.intensity(a, b, u), [(b, hi, 1)], inner)
        )
    return _integrate(lambda s: amp.intensity(a, b, s), [(b, hi, 1)], inner)


_correlator_cache: LRUCache = LRUCache(maxsize=get_settings().correlator_cache_size)
_correlator_lock = threading.Lock()


def _correlator_key(spec, j, t1, t2, cfg=None, passthrough=False):
    return hashkey(spec, j, float(t1), float(t2), cfg, passthrough)


@cached(cache=_correlator_cache, key=_correlator_key, lock=_correlator_lock)
def correlator_G2(
    spec: PulseSpec,
    j: int,
    t1: float,
    t2: float,
    cfg: Optional[QuadratureConfig] = None,
    passthrough: bool = False,
) -> float:
    """
    Second-order correlation G2(t1, t2) of the photons left in the first mode.

    The remaining output photon, if any, is integrated out; the value is
    symmetric in (t1, t2) and not normalized by P_j.

    Raises:
        DomainError: (N, j) not one of (2, 0), (3, 0), (3, 3)
    """
    _check_case(spec, j)
    return _g2_value(spec, j, float(t1), float(t2), _cfg(cfg), passthrough)


def first_order(
    spec: PulseSpec, j: int, t: float, cfg: Optional[QuadratureConfig] = None, passthrough: bool = False
) -> float:
    """First-mode intensity G1(t, t) straight from the output amplitude."""
    _check_case(spec, j)
    cfg = _inner(_cfg(cfg), spec)
    amp = outcome_amplitude(spec, j, passthrough)
    lo, hi = spec.window(GAMMA)
    t = float(t)
    if spec.n_photons == 2:
        return _integrate(lambda u: amp.intensity(u, t), [(lo, t, 1)], cfg) + _integrate(
            lambda u: amp.intensity(t, u), [(t, hi, 1)], cfg
        )
    if j == 0:
        return (
            _integrate(lambda u, v: amp.intensity(u, v, t), [(lo, t, 2)], cfg)
            + _integrate(lambda u, v: amp.intensity(u, t, v), [(lo, t, 1), (t, hi, 1)], cfg)
            + _integrate(lambda u, v: amp.intensity(t, u, v), [(t, hi, 2)], cfg)
        )
    return _integrate(lambda u, s: amp.intensity(u, t, s), [(lo, t, 1), (t, hi, 1)], cfg) + _integrate(
        lambda u, s: amp.intensity(t, u, s), [(t, hi, 2)], cfg
    )


def _diagonal_integral(spec: PulseSpec, j: int, cfg: QuadratureConfig, passthrough: bool) -> float:
    amp = outcome_amplitude(spec, j, passthrough)
    lo, hi = spec.window(GAMMA)
    if spec.n_photons == 2:
        return _integrate(lambda t: amp.intensity(t, t), [(lo, hi, 1)], cfg)
    if j == 0:
        return _integrate(lambda u, t: amp.intensity(u, t, t), [(lo, hi, 2)], cfg) + _integrate(
            lambda t, u: amp.intensity(t, t, u), [(lo, hi, 2)], cfg
        )
    return _integrate(lambda t, s: amp.intensity(t, t, s), [(lo, hi, 2)], cfg)


def g2_zero(spec: PulseSpec, j: int, cfg: Optional[QuadratureConfig] = None, passthrough: bool = False) -> float:
    """
    Zero-delay second-order correlation of the first-mode photons after outcome j.

    With M first-mode photons and the correlators conditioned on j,
    g2(0) = (M-1)^2 int G2(t,t) dt / int (int G2(t,t') dt')^2 dt, which reduces
    to P_j int G2(t,t) dt / int G1(t)^2 dt. An unscattered N-photon Fock
    pulse gives 1 - 1/N.

    Raises:
        DegenerateStateError: denominator below 1e-30
    """
    _check_case(spec, j)
    cfg = _cfg(cfg)
    lo, hi = spec.window(GAMMA)
    probability = p_outcome(spec, j, cfg, passthrough)
    diagonal = _diagonal_integral(spec, j, cfg, passthrough)
    denominator = quad_real(
        lambda t: first_order(spec, j, t, cfg, passthrough) ** 2, lo, hi, cfg, points=list(spec.centers())
    )
    if denominator < 1e-30:
        raise DegenerateStateError(f"first-order normalization {denominator:.3e} is too small")
    value = probability * diagonal / denominator
    log_metric("g2_zero", value, tags=_tags(spec, j))
    return value


def g1_from_g2_check(
    spec: PulseSpec, j: int, t: float, cfg: Optional[QuadratureConfig] = None, passthrough: bool = False
) -> Tuple[float, float]:
    """
    G1(t, t) computed directly and from (1/(M-1)) int G2(t, t') dt'.

    The two agree to quadrature accuracy; the pair is returned for comparison.
    """
    _check_case(spec, j)
    cfg = _cfg(cfg)
    lo, hi = spec.window(GAMMA)
    lhs = first_order(spec, j, t, cfg, passthrough)
    m = mode_photons(spec.n_photons, j)
    integral = quad_real(
        lambda u: correlator_G2(spec, j, t, u, cfg, passthrough), lo, hi, cfg, points=[float(t), *spec.centers()]
    )
    return lhs, integral / (m - 1)


@dataclass(frozen=True)
class Correlator2:
    """G2 sampled on grid x grid; values[i, k] = G2(t_i, t_k)."""

    spec: PulseSpec
    j: int
    grid: TimeGrid
    values: np.ndarray

    @property
    def times(self) -> np.ndarray:
        return self.grid.times()

    def diagonal(self) -> np.ndarray:
        return np.diag(self.values).copy()

    def normalized(self) -> "Correlator2":
        """Copy scaled to unit peak, for display."""
        peak = float(np.max(np.abs(self.values)))
        if peak == 0.0:
            return self
        return replace(self, values=self.values / peak)


def _fill_rows(
    spec: PulseSpec, j: int, times: np.ndarray, rows: Sequence[int], cfg: QuadratureConfig, passthrough: bool
) -> Dict[Tuple[int, int], float]:
    out = {}
    for i in rows:
        for k in range(i, len(times)):
            out[i, k] = correlator_G2(spec, j, float(times[i]), float(times[k]), cfg, passthrough)
    return out


def correlator_grid(
    spec: PulseSpec,
    j: int,
    grid: TimeGrid,
    cfg: Optional[QuadratureConfig] = None,
    threads: int = 1,
    passthrough: bool = False,
) -> Correlator2:
    """Sample G2 on the grid; rows are split across worker threads and merged by index."""
    _check_case(spec, j)
    cfg = _cfg(cfg)
    times = grid.times()
    n = len(times)
    threads = max(1, int(threads))
    partitions = [list(range(start, n, threads)) for start in range(threads)]
    logger.info(f"Sampling G2 on {n}x{n} grid (N={spec.n_photons}, j={j}, delta={spec.delta}, threads={threads})")

    if threads == 1:
        chunks = [_fill_rows(spec, j, times, partitions[0], cfg, passthrough)]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            futures = [pool.submit(_fill_rows, spec, j, times, rows, cfg, passthrough) for rows in partitions if rows]
            chunks = [future.result() for future in futures]

    values = np.zeros((n, n))
    for chunk in chunks:
        for (i, k), value in chunk.items():
            values[i, k] = value
            values[k, i] = value
    return Correlator2(spec=spec, j=j, grid=grid, values=values)
