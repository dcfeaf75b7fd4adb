"""
One experiment per CLI subcommand.

Every runner turns an ExperimentConfig into a ResultTable with a fixed column
set. The delta*gamma sweep sets the pulse width in units of 1/gamma; the
analytic models fix gamma = 1.
"""

import itertools
from typing import Iterator, List, Tuple

from pydantic import ValidationError

from experiments.base import BaseExperiment, ExperimentMetadata
from experiments.results import ResultTable
from models.schemas import (
    CorrelatorMethod,
    ExperimentConfig,
    LinearConfig,
    LinearQuantity,
    PulseFamily,
    PulseSpec,
    TimeGrid,
)
from physics import conventional, linear_model, nonlinear_model, trajectory
from physics.slh import default_time_grid, full_network, network_layout
from utils.config import get_settings
from utils.logging import get_logger

logger = get_logger()

CORRELATE_WIDTHS = 3.0


def build_pulse(config: ExperimentConfig, **changes) -> PulseSpec:
    """The config pulse with `changes` applied, validated again."""
    return PulseSpec.model_validate({**config.pulse.model_dump(), **changes})


def sweep_pulses(config: ExperimentConfig) -> Iterator[Tuple[float, float, int, PulseSpec]]:
    """(delta_gamma, separation, N, pulse) over the whole sweep."""
    gamma = config.detector.gamma or 1.0
    for delta_gamma, separation, n_photons in itertools.product(
        config.sweep.delta_gamma, config.separations(), config.photon_numbers()
    ):
        pulse = build_pulse(config, delta=delta_gamma / gamma, n_photons=n_photons, separation=separation)
        yield delta_gamma, separation, n_photons, pulse


def _pulse_diagnostics(config: ExperimentConfig) -> List[str]:
    try:
        for _ in sweep_pulses(config):
            pass
    except ValidationError as e:
        return [f"pulse: {error['msg']}" for error in e.errors()]
    return []


def _unit_gamma(config: ExperimentConfig) -> List[str]:
    if config.detector.gamma != 1.0:
        return [f"detector.gamma: this experiment works in units of 1/gamma and needs gamma = 1, got {config.detector.gamma}"]
    return []


def _network_diagnostics(config: ExperimentConfig, emitters: List[int]) -> List[str]:
    """Problems that would stop a trajectory network from being built."""
    if config.pulse.family == PulseFamily.HERMITE_GAUSS_PAIR:
        return ["pulse.family: HermiteGaussPair has no cavity-release source; trajectory runs are unsupported"]
    diagnostics = []
    if any(n < 1 for n in emitters):
        diagnostics.append("detector.n_emitters: trajectory runs need at least one emitter")
    diagnostics.extend(_pulse_diagnostics(config))
    if diagnostics:
        return diagnostics
    cap = get_settings().hilbert_dim_cap
    for n in emitters:
        for n_photons in config.photon_numbers():
            dim = network_layout(build_pulse(config, n_photons=n_photons), n).dim
            if dim > cap:
                diagnostics.append(
                    f"detector.n_emitters: network with n={n}, N={n_photons} has dimension {dim} above the cap {cap}"
                )
    return diagnostics


def _response_diagnostics(config: ExperimentConfig) -> List[str]:
    diagnostics = _unit_gamma(config)
    if config.pulse.family != PulseFamily.GAUSSIAN_FOCK:
        diagnostics.append("pulse.family: response curves use GaussianFock pulses")
        return diagnostics
    n = config.detector.n_emitters
    if not 1 <= n <= trajectory.MAX_RESPONSE_EMITTERS:
        diagnostics.append(f"detector.n_emitters: response curves support 1..{trajectory.MAX_RESPONSE_EMITTERS}, got {n}")
    bad = [p for p in config.photon_numbers() if not 1 <= p <= trajectory.MAX_RESPONSE_PHOTONS]
    if bad:
        diagnostics.append(f"sweep.photons: response curves support 1..{trajectory.MAX_RESPONSE_PHOTONS}, got {bad}")
    return diagnostics or _network_diagnostics(config, [n])


class LinearExperiment(BaseExperiment):
    """Frequency-domain linear model: subtraction probabilities and mean count error."""

    def get_metadata(self) -> ExperimentMetadata:
        return ExperimentMetadata(
            name="linear",
            description="Linear-model mean count error or subtraction probability versus delta*gamma",
            columns=["delta_gamma", "n", "N", "avg_error"],
        )

    def _check(self, config: ExperimentConfig) -> List[str]:
        diagnostics = _unit_gamma(config)
        if config.linear.quantity == LinearQuantity.P_SUBTRACT and any(lam < 0 for lam in config.linear.lambdas):
            diagnostics.append("linear.lambdas: cascade lengths must be non-negative")
        return diagnostics

    def _execute(self, config: ExperimentConfig, threads: int) -> ResultTable:
        quad = config.quadrature
        detuning = config.pulse.detuning
        if config.linear.quantity == LinearQuantity.P_SUBTRACT:
            table = ResultTable(columns=["delta_gamma", "n", "lambda", "p_subtract"])
            n = config.detector.n_emitters
            for delta_gamma in config.sweep.delta_gamma:
                cfg = LinearConfig(delta_gamma=delta_gamma, detuning=detuning, n_emitters=n)
                for lam, p in zip(config.linear.lambdas, linear_model.subtraction_curve(config.linear.lambdas, cfg, quad)):
                    table.add_row(float(delta_gamma), n, lam, float(p))
            return table

        table = ResultTable(columns=self.metadata.columns)
        for delta_gamma in config.sweep.delta_gamma:
            cfg = LinearConfig(delta_gamma=delta_gamma, detuning=detuning)
            emitters, photons = config.emitter_counts(), config.photon_numbers()
            errors = linear_model.error_map(emitters, photons, cfg, quad)
            for row, n in enumerate(emitters):
                for col, n_photons in enumerate(photons):
                    table.add_row(float(delta_gamma), n, n_photons, float(errors[row, col]))
        return table


class OutcomesExperiment(BaseExperiment):
    """Exact single-emitter outcome probabilities next to the linear prediction."""

    def get_metadata(self) -> ExperimentMetadata:
        return ExperimentMetadata(
            name="outcomes",
            description="Single-emitter outcome probabilities P_j for N <= 3",
            columns=["delta_gamma", "separation", "N", "j", "probability", "linear_prediction"],
        )

    def _check(self, config: ExperimentConfig) -> List[str]:
        diagnostics = _unit_gamma(config) + _pulse_diagnostics(config)
        too_many = [n for n in config.photon_numbers() if n > nonlinear_model.MAX_PHOTONS]
        if too_many:
            diagnostics.append(f"sweep.photons: exact outcomes support N <= {nonlinear_model.MAX_PHOTONS}, got {too_many}")
        return diagnostics

    def _execute(self, config: ExperimentConfig, threads: int) -> ResultTable:
        table = ResultTable(columns=self.metadata.columns)
        for delta_gamma, separation, n_photons, pulse in sweep_pulses(config):
            probabilities = nonlinear_model.outcome_table(pulse, config.quadrature)
            linear = linear_model.predicted_outcomes(
                n_photons, LinearConfig(delta_gamma=delta_gamma, detuning=pulse.detuning), config.quadrature
            )
            for j, (p, predicted) in enumerate(zip(probabilities, linear)):
                table.add_row(float(delta_gamma), float(separation), n_photons, j, float(p), float(predicted))
        return table


class CorrelateExperiment(BaseExperiment):
    """Second-order correlation of the photons left in the input mode."""

    def get_metadata(self) -> ExperimentMetadata:
        return ExperimentMetadata(
            name="correlate",
            description="G2(t1, t2) after outcome j, exact or from trajectories",
            columns=["delta_gamma", "t1", "t2", "G2"],
        )

    def uses_trajectories(self, config: ExperimentConfig) -> bool:
        return config.correlate.method == CorrelatorMethod.TRAJECTORY

    def _check(self, config: ExperimentConfig) -> List[str]:
        j = config.correlate.outcome
        photons = config.photon_numbers()
        diagnostics = _unit_gamma(config)
        if config.correlate.method == CorrelatorMethod.ANALYTIC:
            diagnostics += _pulse_diagnostics(config)
            cases = [(n, j) for n in photons if (n, j) not in nonlinear_model.CORRELATOR_CASES]
            if cases:
                diagnostics.append(
                    f"correlate.outcome: exact correlators exist for (N, j) in {list(nonlinear_model.CORRELATOR_CASES)}, got {cases}"
                )
        else:
            if config.detector.n_emitters != 1:
                diagnostics.append("detector.n_emitters: outcome post-selection needs a single emitter")
            diagnostics += _network_diagnostics(config, [1])
            if any(j > n for n in photons):
                diagnostics.append(f"correlate.outcome: outcome {j} exceeds the photon number")
        if config.grid.t_start is not None and config.grid.t_end is not None and config.grid.t_end <= config.grid.t_start:
            diagnostics.append("grid.t_end: must be greater than grid.t_start")
        return diagnostics

    def _grid(self, config: ExperimentConfig, pulse: PulseSpec) -> TimeGrid:
        lo, hi = pulse.window(1.0, widths=CORRELATE_WIDTHS)
        t_start = lo if config.grid.t_start is None else config.grid.t_start
        t_end = hi if config.grid.t_end is None else config.grid.t_end
        return TimeGrid(t_start=t_start, t_end=t_end, n_points=config.grid.points)

    def _execute(self, config: ExperimentConfig, threads: int) -> ResultTable:
        table = ResultTable(columns=self.metadata.columns)
        j = config.correlate.outcome
        for delta_gamma, _, n_photons, pulse in sweep_pulses(config):
            grid = self._grid(config, pulse)
            key = f"g2_zero[delta_gamma={delta_gamma!r},N={n_photons}]"
            if config.correlate.method == CorrelatorMethod.ANALYTIC:
                surface = nonlinear_model.correlator_grid(pulse, j, grid, config.quadrature, threads)
                if config.correlate.normalize:
                    surface = surface.normalized()
                table.metadata[key] = repr(nonlinear_model.g2_zero(pulse, j, config.quadrature))
                times, values = surface.times, surface.values
            else:
                binned = self._binned(config, pulse, grid, threads)
                table.metadata[key] = repr(binned.g2_zero())
                table.metadata[f"selected[delta_gamma={delta_gamma!r},N={n_photons}]"] = str(binned.n_selected)
                times, values = binned.centers, binned.values
                if config.correlate.normalize and values.max() > 0:
                    values = values / values.max()
            for a, t1 in enumerate(times):
                for b, t2 in enumerate(times):
                    table.add_row(float(delta_gamma), float(t1), float(t2), float(values[a, b]))
        return table

    def _binned(self, config: ExperimentConfig, pulse: PulseSpec, grid: TimeGrid, threads: int):
        network = full_network(pulse, 1)
        records = trajectory.run_ensemble(
            network,
            default_time_grid(pulse),
            config.trajectory.count,
            config.trajectory.seed,
            self.batch_size(config),
            threads,
        )
        j = config.correlate.outcome
        bin_width = config.correlate.bin_width or pulse.delta / 10.0
        return trajectory.estimate_g2(
            records,
            lambda record: trajectory.classify_outcome(record, 1) == j,
            bin_width,
            (grid.t_start, grid.t_end),
            through_channel=2,
        )


class TrajectoryExperiment(BaseExperiment):
    """Click statistics of the full cascade from Monte-Carlo ensembles."""

    def get_metadata(self) -> ExperimentMetadata:
        return ExperimentMetadata(
            name="trajectory",
            description="Mean clicks, count error and single-emitter outcomes from trajectories",
            columns=["delta_gamma", "n", "N", "quantity", "value", "stderr"],
            uses_trajectories=True,
        )

    def _check(self, config: ExperimentConfig) -> List[str]:
        return _network_diagnostics(config, config.emitter_counts())

    def _execute(self, config: ExperimentConfig, threads: int) -> ResultTable:
        table = ResultTable(columns=self.metadata.columns)
        gamma = config.detector.gamma
        for n in config.emitter_counts():
            for delta_gamma, _, n_photons, pulse in sweep_pulses(config):
                network = full_network(pulse, n, gamma)
                records = trajectory.run_ensemble(
                    network,
                    default_time_grid(pulse, gamma),
                    config.trajectory.count,
                    config.trajectory.seed,
                    self.batch_size(config),
                    threads,
                )
                summaries = [trajectory.summarize(record, n, n_photons) for record in records]
                clicks, clicks_err = trajectory.mean_and_stderr([s.inferred_count for s in summaries])
                error, error_err = trajectory.mean_and_stderr([s.error for s in summaries])
                linear = linear_model.avg_error(
                    n_photons, LinearConfig(delta_gamma=delta_gamma, detuning=pulse.detuning, n_emitters=n), config.quadrature
                )
                row = (float(delta_gamma), n, n_photons)
                table.add_row(*row, "mean_clicks", clicks, clicks_err)
                table.add_row(*row, "mean_error", error, error_err)
                table.add_row(*row, "linear_error", float(linear), 0.0)
                if n == 1:
                    estimate = trajectory.estimate_outcomes(records, n_photons)
                    for j, (p, stderr) in enumerate(zip(estimate.probabilities, estimate.stderr)):
                        table.add_row(*row, f"P_{j}", float(p), float(stderr))
        return table


class ResponseExperiment(BaseExperiment):
    """Mean clicks versus input photon number for GaussianFock pulses."""

    def get_metadata(self) -> ExperimentMetadata:
        return ExperimentMetadata(
            name="response",
            description="Detector response curve from trajectories",
            columns=["delta_gamma", "N", "mean_clicks", "stderr"],
            uses_trajectories=True,
        )

    def _check(self, config: ExperimentConfig) -> List[str]:
        return _response_diagnostics(config)

    def _execute(self, config: ExperimentConfig, threads: int) -> ResultTable:
        table = ResultTable(columns=self.metadata.columns)
        for delta_gamma in config.sweep.delta_gamma:
            curve = trajectory.response_curve(
                config.detector.n_emitters,
                delta_gamma,
                config.photon_numbers(),
                config.trajectory.count,
                config.trajectory.seed,
                self.batch_size(config),
                threads,
            )
            for point in curve.points:
                table.add_row(float(delta_gamma), point.n_photons, point.mean_clicks, point.stderr)
        return table


class CompareExperiment(BaseExperiment):
    """Emitter cascade against beamsplitter trees with the same number of detectors."""

    def get_metadata(self) -> ExperimentMetadata:
        return ExperimentMetadata(
            name="compare",
            description="Mean clicks of the emitter cascade and of beamsplitter baselines",
            columns=["N", "scheme", "mean_clicks", "stderr"],
            uses_trajectories=True,
        )

    def _check(self, config: ExperimentConfig) -> List[str]:
        return _response_diagnostics(config)

    def _execute(self, config: ExperimentConfig, threads: int) -> ResultTable:
        n = config.detector.n_emitters
        photons = config.photon_numbers()
        curves = {
            delta_gamma: trajectory.response_curve(
                n, delta_gamma, photons, config.trajectory.count, config.trajectory.seed, self.batch_size(config), threads
            )
            for delta_gamma in config.sweep.delta_gamma
        }
        balanced = conventional.balanced_routing_probs(n)
        table = ResultTable(columns=self.metadata.columns)
        for index, n_photons in enumerate(photons):
            table.add_row(n_photons, "balanced", conventional.avg_clicks(balanced, n_photons), 0.0)
            reflectivity, clicks = conventional.optimize_equal_reflectivity(n, n_photons)
            table.add_row(n_photons, "equal_reflectivity", clicks, 0.0)
            table.metadata[f"equal_reflectivity[N={n_photons}]"] = repr(reflectivity)
            for delta_gamma, curve in curves.items():
                point = curve.points[index]
                table.add_row(n_photons, f"emitters[delta_gamma={delta_gamma!r}]", point.mean_clicks, point.stderr)
        return table


def default_experiments() -> List[BaseExperiment]:
    return [
        LinearExperiment(),
        OutcomesExperiment(),
        CorrelateExperiment(),
        TrajectoryExperiment(),
        ResponseExperiment(),
        CompareExperiment(),
    ]
