"""
Monte-Carlo wavefunction ensembles over the composed detector network.

Each trajectory evolves under H_eff = H - (i/2) sum L^dag L until its norm^2
falls below a pre-drawn uniform threshold; the jump time is then located by
bisection, a channel is drawn with weights ||L_k psi||^2 and a fresh threshold
is drawn. Trajectories are propagated in batches as columns of one state
matrix; a record is fully determined by (network, grid, seed, stream id,
batch size).

Channels are reported 1-based: 1..n are the subtraction channels, n+1 the
through channel feeding the final detector.
"""

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import stats
from tqdm import tqdm

from models.schemas import (
    ClickSummary,
    ErrorPoint,
    LinearConfig,
    OutcomeEstimate,
    PulseFamily,
    PulseSpec,
    ResponseCurve,
    ResponsePoint,
    TimeGrid,
)
from physics.linear_model import avg_error
from physics.numerics import rk4_step, rng_stream
from physics.slh import Network, default_time_grid, full_network
from utils.config import get_settings
from utils.errors import (
    BisectionMisuseError,
    DomainError,
    InsufficientStatisticsError,
    NumericalInstabilityError,
    ResolutionError,
)
from utils.logging import get_logger, log_event, log_metric

logger = get_logger()

MAX_RESPONSE_PHOTONS = 7
MAX_RESPONSE_EMITTERS = 5


@dataclass(frozen=True)
class JumpEvent:
    time: float
    channel: int


@dataclass(frozen=True, eq=False)
class TrajectoryRecord:
    """
    One realization.

    survival_trace holds (t, norm^2) samples of the unnormalized state; the
    norm restarts at 1 after every jump. final_state is normalized.
    """

    seed: int
    stream_id: int
    jumps: Tuple[JumpEvent, ...]
    final_state: np.ndarray
    survival_trace: np.ndarray

    def channel_times(self, channel: int) -> List[float]:
        return [jump.time for jump in self.jumps if jump.channel == channel]


def jump_time_bisect(
    norm_fn: Callable[[float], float], threshold: float, dt: float, depth: Optional[int] = None
) -> float:
    """
    Time within [0, dt] at which norm_fn drops below threshold.

    norm_fn(s) is the norm^2 after propagating s into the step. The bracket is
    halved `depth` times and its midpoint returned, so the error is below
    dt / 2^(depth + 1).

    Raises:
        BisectionMisuseError: threshold above the initial norm, or no crossing in the step
    """
    depth = get_settings().bisection_depth if depth is None else depth
    start = norm_fn(0.0)
    if threshold > start:
        raise BisectionMisuseError(f"threshold {threshold} is above the initial norm {start}")
    if norm_fn(dt) >= threshold:
        raise BisectionMisuseError(f"norm does not cross {threshold} within the step")
    lo, hi = 0.0, dt
    for _ in range(depth):
        mid = 0.5 * (lo + hi)
        if norm_fn(mid) < threshold:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


def _norms(psi: np.ndarray) -> np.ndarray:
    return np.sum(np.abs(psi) ** 2, axis=0)


class _Propagator:
    """Shared, read-only view of a network used by batch workers."""

    def __init__(self, network: Network, grid: TimeGrid):
        settings = get_settings()
        self.network = network
        self.grid = grid
        self.generator = network.effective_hamiltonian.apply
        self.jumps = network.jump_operators
        self.depth = settings.bisection_depth
        self.max_drop = settings.max_norm_drop
        self.stride = max(1, settings.trace_stride)

    def step(self, t: float, psi: np.ndarray, h: float) -> np.ndarray:
        return rk4_step(self.generator, t, psi, h)

    def _jump(self, t: float, psi: np.ndarray, rng: np.random.Generator) -> Tuple[np.ndarray, int]:
        branches = [op.apply(t, psi) for op in self.jumps]
        weights = np.array([np.real(np.vdot(b, b)) for b in branches])
        total = weights.sum()
        if not total > 0:
            raise NumericalInstabilityError(f"no jump channel is open at t={t}")
        channel = int(rng.choice(len(branches), p=weights / total))
        return branches[channel] / math.sqrt(weights[channel]), channel

    def advance_column(
        self,
        t: float,
        psi: np.ndarray,
        h: float,
        threshold: float,
        rng: np.random.Generator,
        events: List[JumpEvent],
    ) -> Tuple[np.ndarray, float]:
        """Propagate one column across a step in which its norm crosses the threshold."""
        while h > 1e-15:
            end = self.step(t, psi, h)
            if np.real(np.vdot(end, end)) >= threshold:
                return end, threshold
            start = psi

            def norm_at(s: float, t=t, start=start) -> float:
                state = self.step(t, start, s) if s > 0 else start
                return float(np.real(np.vdot(state, state)))

            tau = jump_time_bisect(norm_at, threshold, h, self.depth)
            t_jump = t + tau
            psi, channel = self._jump(t_jump, self.step(t, start, tau), rng)
            events.append(JumpEvent(time=t_jump, channel=channel + 1))
            threshold = rng.uniform()
            t, h = t_jump, h - tau
        return psi, threshold

    def run_batch(self, seeds: Sequence[Tuple[int, int]]) -> List[TrajectoryRecord]:
        width = len(seeds)
        rngs = [rng_stream(seed, stream) for seed, stream in seeds]
        thresholds = np.array([rng.uniform() for rng in rngs])
        psi = np.tile(self.network.initial_state.reshape(-1, 1), (1, width)).astype(complex)
        events: List[List[JumpEvent]] = [[] for _ in range(width)]
        times = self.grid.times()
        dt = self.grid.dt
        trace_times = [times[0]]
        trace_values = [_norms(psi)]

        for index in range(self.grid.n_steps):
            t = float(times[index])
            before = _norms(psi)
            after_state = self.step(t, psi, dt)
            if not np.all(np.isfinite(after_state)):
                raise NumericalInstabilityError(f"non-finite state at t={t + dt}")
            after = _norms(after_state)
            drop = (before - after) / before
            if np.any(drop > self.max_drop):
                raise ResolutionError(
                    f"norm^2 dropped by {float(np.max(drop)):.3f} in one step at t={t}; reduce the step {dt}"
                )
            for col in np.flatnonzero(after < thresholds):
                column, thresholds[col] = self.advance_column(t, psi[:, col], dt, thresholds[col], rngs[col], events[col])
                after_state[:, col] = column
            psi = after_state
            if (index + 1) % self.stride == 0 or index + 1 == self.grid.n_steps:
                trace_times.append(times[index + 1])
                trace_values.append(_norms(psi))

        trace_values = np.array(trace_values)
        trace_times = np.array(trace_times)
        records = []
        for col, (seed, stream) in enumerate(seeds):
            final = psi[:, col] / math.sqrt(_norms(psi[:, col : col + 1])[0])
            records.append(
                TrajectoryRecord(
                    seed=seed,
                    stream_id=stream,
                    jumps=tuple(events[col]),
                    final_state=final,
                    survival_trace=np.column_stack([trace_times, trace_values[:, col]]),
                )
            )
        return records


def run_trajectory(network: Network, grid: TimeGrid, seed: int, stream_id: Optional[int] = None) -> TrajectoryRecord:
    """
    Single trajectory; stream_id defaults to the seed.

    Raises:
        ResolutionError: norm^2 drops by more than settings.max_norm_drop in one step
    """
    stream = seed if stream_id is None else stream_id
    return _Propagator(network, grid).run_batch([(seed, stream)])[0]


def run_ensemble(
    network: Network,
    grid: TimeGrid,
    count: int,
    base_seed: int,
    batch_size: Optional[int] = None,
    threads: Optional[int] = None,
) -> List[TrajectoryRecord]:
    """
    `count` trajectories with streams base_seed .. base_seed + count - 1, in stream order.

    Batches run on a thread pool; results are merged by batch index, so the
    output does not depend on the thread count.
    """
    if count < 1:
        raise DomainError(f"trajectory count must be positive, got {count}")
    settings = get_settings()
    batch_size = batch_size or settings.batch_size
    threads = max(1, threads or settings.threads)
    seeds = [(base_seed, (base_seed + i) % 2**64) for i in range(count)]
    batches = [seeds[i : i + batch_size] for i in range(0, count, batch_size)]
    propagator = _Propagator(network, grid)
    started = time.perf_counter()
    logger.info(
        f"Running {count} trajectories (dim={network.layout.dim}, steps={grid.n_steps}, "
        f"batch={batch_size}, threads={threads})"
    )

    progress = tqdm(total=len(batches), desc="trajectories", unit="batch", disable=not settings.show_progress)
    results: Dict[int, List[TrajectoryRecord]] = {}
    with progress:
        if threads == 1:
            for index, batch in enumerate(batches):
                results[index] = propagator.run_batch(batch)
                progress.update(1)
        else:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                futures = {pool.submit(propagator.run_batch, batch): index for index, batch in enumerate(batches)}
                for future, index in futures.items():
                    results[index] = future.result()
                    progress.update(1)

    records = [record for index in range(len(batches)) for record in results[index]]
    elapsed = time.perf_counter() - started
    jumps = [len(record.jumps) for record in records]
    log_event(
        "ensemble_finished",
        {"trajectories": count, "mean_jumps": float(np.mean(jumps)), "max_jumps": int(max(jumps)), "seconds": elapsed},
    )
    log_metric("trajectories_per_second", count / max(elapsed, 1e-9), "1/s")
    return records


def summarize(record: TrajectoryRecord, n_emitters: int, n_photons: int) -> ClickSummary:
    """Detector clicks of one trajectory; the final detector only tells click from no click."""
    channels = [jump.channel for jump in record.jumps]
    subtraction = frozenset(c for c in channels if c <= n_emitters)
    repeated = [c for c in subtraction if channels.count(c) > 1]
    if repeated:
        logger.warning(f"Subtraction channel(s) {repeated} fired more than once (stream {record.stream_id})")
    final_click = (n_emitters + 1) in channels
    inferred = len(subtraction) + (1 if final_click else 0)
    return ClickSummary(
        subtraction_clicks=subtraction,
        final_detector_click=final_click,
        inferred_count=inferred,
        true_count=n_photons,
        error=inferred - n_photons,
    )


def classify_outcome(record: TrajectoryRecord, n_emitters: int = 1, resolution: float = 0.0) -> int:
    """
    Arrival index of the subtracted photon (0 when nothing was subtracted).

    Counts through-channel jumps that happened before the first subtraction
    jump; through jumps within `resolution` of it count as earlier.
    """
    subtraction = [jump.time for jump in record.jumps if jump.channel == 1]
    if not subtraction:
        return 0
    t_sub = subtraction[0]
    through = record.channel_times(n_emitters + 1)
    close = [t for t in through if abs(t - t_sub) <= resolution]
    if close:
        logger.warning(f"Ambiguous jump order at t={t_sub} (stream {record.stream_id}); counted as earlier")
    return 1 + sum(1 for t in through if t < t_sub or abs(t - t_sub) <= resolution)


def _binomial(count: int, total: int) -> Tuple[float, float, float, float]:
    p = count / total
    stderr = math.sqrt(p * (1.0 - p) / total)
    interval = stats.binomtest(count, total).proportion_ci(confidence_level=0.95, method="wilson")
    return p, stderr, float(interval.low), float(interval.high)


def estimate_outcomes(
    records: Sequence[TrajectoryRecord], n_photons: int, n_emitters: int = 1, resolution: float = 0.0
) -> OutcomeEstimate:
    """
    Outcome frequencies P_0..P_N of a single-emitter ensemble with Wilson intervals.

    Raises:
        DomainError: more than one emitter, or an empty ensemble
    """
    if n_emitters != 1:
        raise DomainError("outcome classification needs a single-emitter network")
    if not records:
        raise DomainError("empty ensemble")
    counts = [0] * (n_photons + 1)
    for record in records:
        j = classify_outcome(record, n_emitters, resolution)
        counts[min(j, n_photons)] += 1
    rows = [_binomial(c, len(records)) for c in counts]
    return OutcomeEstimate(
        n_photons=n_photons,
        n_trajectories=len(records),
        counts=counts,
        probabilities=[row[0] for row in rows],
        stderr=[row[1] for row in rows],
        ci_low=[row[2] for row in rows],
        ci_high=[row[3] for row in rows],
    )


@dataclass(frozen=True, eq=False)
class BinnedCorrelator:
    """
    Histogram estimate of G2(t1, t2) and G1(t) of the through-channel field.

    Both are densities per post-selected trajectory; G2 counts ordered pairs
    of distinct jumps, so it is symmetric.
    """

    edges: np.ndarray
    values: np.ndarray
    first_order: np.ndarray
    n_selected: int

    @property
    def bin_width(self) -> float:
        return float(self.edges[1] - self.edges[0])

    @property
    def centers(self) -> np.ndarray:
        return 0.5 * (self.edges[:-1] + self.edges[1:])

    def g2_zero(self) -> float:
        """int G2(t, t) dt / int G1(t)^2 dt from the diagonal bins."""
        diagonal = float(np.sum(np.diag(self.values))) * self.bin_width
        denominator = float(np.sum(self.first_order**2)) * self.bin_width
        if denominator <= 0:
            raise InsufficientStatisticsError("no through-channel jumps in the selected trajectories")
        return diagonal / denominator


def estimate_g2(
    records: Sequence[TrajectoryRecord],
    postselect: Callable[[TrajectoryRecord], bool],
    bin_width: float,
    window: Tuple[float, float],
    through_channel: int,
) -> BinnedCorrelator:
    """
    Binned G2 over the post-selected trajectories.

    Raises:
        InsufficientStatisticsError: fewer than settings.min_g2_trajectories selected
    """
    if bin_width <= 0:
        raise DomainError(f"bin width must be positive, got {bin_width}")
    selected = [record for record in records if postselect(record)]
    minimum = get_settings().min_g2_trajectories
    if len(selected) < minimum:
        raise InsufficientStatisticsError(f"{len(selected)} trajectories selected, need at least {minimum}")

    n_bins = max(1, int(math.ceil((window[1] - window[0]) / bin_width)))
    edges = window[0] + bin_width * np.arange(n_bins + 1)
    first, second, singles = [], [], []
    for record in selected:
        times = record.channel_times(through_channel)
        singles.extend(times)
        for a, ta in enumerate(times):
            for b, tb in enumerate(times):
                if a != b:
                    first.append(ta)
                    second.append(tb)
    pairs, _, _ = np.histogram2d(first, second, bins=[edges, edges])
    counts, _ = np.histogram(singles, bins=edges)
    area = bin_width * bin_width * len(selected)
    return BinnedCorrelator(
        edges=edges,
        values=pairs / area,
        first_order=counts / (bin_width * len(selected)),
        n_selected=len(selected),
    )


def mean_and_stderr(values: Sequence[float]) -> Tuple[float, float]:
    data = np.asarray(values, dtype=float)
    if len(data) < 2:
        return float(data.mean()), 0.0
    return float(data.mean()), float(data.std(ddof=1) / math.sqrt(len(data)))


def click_statistics(
    n_emitters: int,
    spec: PulseSpec,
    count: int,
    base_seed: int,
    batch_size: Optional[int] = None,
    threads: Optional[int] = None,
) -> List[ClickSummary]:
    """Click summaries of an ensemble for one input state and cascade."""
    network = full_network(spec, n_emitters)
    grid = default_time_grid(spec)
    records = run_ensemble(network, grid, count, base_seed, batch_size, threads)
    return [summarize(record, n_emitters, spec.n_photons) for record in records]


def response_curve(
    n_emitters: int,
    delta_gamma: float,
    photons: Sequence[int],
    count: int,
    base_seed: int,
    batch_size: Optional[int] = None,
    threads: Optional[int] = None,
) -> ResponseCurve:
    """
    Mean clicks versus input photon number for GaussianFock pulses.

    Raises:
        DomainError: N outside 1..7 or n outside 1..5
        DimensionCapError: network too large
    """
    if not 1 <= n_emitters <= MAX_RESPONSE_EMITTERS:
        raise DomainError(f"response curves support 1..{MAX_RESPONSE_EMITTERS} emitters, got {n_emitters}")
    if any(not 1 <= n <= MAX_RESPONSE_PHOTONS for n in photons):
        raise DomainError(f"response curves support 1..{MAX_RESPONSE_PHOTONS} photons, got {list(photons)}")
    points = []
    for n_photons in photons:
        spec = PulseSpec(family=PulseFamily.GAUSSIAN_FOCK, n_photons=n_photons, delta=delta_gamma)
        summaries = click_statistics(n_emitters, spec, count, base_seed, batch_size, threads)
        mean, stderr = mean_and_stderr([s.inferred_count for s in summaries])
        points.append(ResponsePoint(n_photons=n_photons, mean_clicks=mean, stderr=stderr))
    return ResponseCurve(n_emitters=n_emitters, delta_gamma=delta_gamma, n_trajectories=count, points=points)


def error_curve(
    n_emitters: int,
    delta_gammas: Sequence[float],
    n_photons: int,
    count: int,
    base_seed: int,
    batch_size: Optional[int] = None,
    threads: Optional[int] = None,
) -> List[ErrorPoint]:
    """Mean count error versus delta*gamma, with the linear-model prediction alongside."""
    points = []
    for delta_gamma in delta_gammas:
        spec = PulseSpec(family=PulseFamily.GAUSSIAN_FOCK, n_photons=n_photons, delta=delta_gamma)
        summaries = click_statistics(n_emitters, spec, count, base_seed, batch_size, threads)
        mean, stderr = mean_and_stderr([s.error for s in summaries])
        linear = avg_error(n_photons, LinearConfig(delta_gamma=delta_gamma, n_emitters=n_emitters))
        points.append(ErrorPoint(delta_gamma=delta_gamma, mean_error=mean, stderr=stderr, linear_error=linear))
    return points
