"""
Pydantic schemas for data validation and serialization.
Provides typed, validated inputs (pulses, grids, tolerances, experiment
configs) and serializable outputs (click summaries, outcome estimates,
response curves).
"""

import math
from enum import Enum
from typing import FrozenSet, List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from utils.config import get_settings


# Enums
class PulseFamily(str, Enum):
    """Families of N-photon input states."""
    GAUSSIAN_FOCK = "GaussianFock"
    SEPARATED_GAUSSIANS = "SeparatedGaussians"
    HERMITE_GAUSS_PAIR = "HermiteGaussPair"


class ExperimentKind(str, Enum):
    """CLI experiments."""
    LINEAR = "linear"
    OUTCOMES = "outcomes"
    CORRELATE = "correlate"
    TRAJECTORY = "trajectory"
    RESPONSE = "response"
    COMPARE = "compare"


class CorrelatorMethod(str, Enum):
    """How the correlate experiment obtains G2."""
    ANALYTIC = "analytic"
    TRAJECTORY = "trajectory"


class LinearQuantity(str, Enum):
    """Table produced by the linear experiment."""
    AVG_ERROR = "avg_error"
    P_SUBTRACT = "p_subtract"


# Numerical plumbing
class TimeGrid(BaseModel):
    """Uniform time grid in units of 1/gamma."""
    model_config = ConfigDict(frozen=True)

    t_start: float = Field(..., description="First grid time")
    t_end: float = Field(..., description="Last grid time")
    n_points: int = Field(..., ge=2, description="Number of grid points")

    @model_validator(mode="after")
    def _check_order(self) -> "TimeGrid":
        if not self.t_end > self.t_start:
            raise ValueError("t_end must be greater than t_start")
        return self

    @property
    def dt(self) -> float:
        return (self.t_end - self.t_start) / (self.n_points - 1)

    @property
    def n_steps(self) -> int:
        return self.n_points - 1

    def times(self) -> np.ndarray:
        return self.t_start + self.dt * np.arange(self.n_points)

    @classmethod
    def from_step(cls, t_start: float, t_end: float, dt: float) -> "TimeGrid":
        """Grid starting at t_start with spacing exactly dt, covering at least t_end."""
        n_steps = max(1, math.ceil((t_end - t_start) / dt - 1e-9))
        return cls(t_start=t_start, t_end=t_start + n_steps * dt, n_points=n_steps + 1)


class QuadratureConfig(BaseModel):
    """Tolerances of adaptive quadrature."""
    model_config = ConfigDict(frozen=True)

    abs_tol: float = Field(default=1e-10, ge=0, description="Absolute tolerance")
    rel_tol: float = Field(default=1e-8, ge=0, description="Relative tolerance")
    max_subdivisions: int = Field(default=2000, ge=1, description="Subdivision budget")

    @model_validator(mode="after")
    def _check_positive(self) -> "QuadratureConfig":
        if self.abs_tol <= 0 and self.rel_tol <= 0:
            raise ValueError("at least one of abs_tol, rel_tol must be positive")
        return self

    def scaled(self, factor: float) -> "QuadratureConfig":
        """Same budget, tolerances multiplied by factor (factor < 1 tightens)."""
        return QuadratureConfig(
            abs_tol=self.abs_tol * factor,
            rel_tol=max(self.rel_tol * factor, 5e-14) if self.rel_tol > 0 else 0.0,
            max_subdivisions=self.max_subdivisions,
        )

    @classmethod
    def from_settings(cls) -> "QuadratureConfig":
        settings = get_settings()
        return cls(
            abs_tol=settings.quad_abs_tol,
            rel_tol=settings.quad_rel_tol,
            max_subdivisions=settings.quad_max_subdivisions,
        )


# Physics inputs
class PulseSpec(BaseModel):
    """Declarative N-photon input state."""
    model_config = ConfigDict(frozen=True)

    family: PulseFamily = Field(default=PulseFamily.GAUSSIAN_FOCK, description="Input state family")
    n_photons: int = Field(default=1, ge=1, description="Photon number N")
    delta: float = Field(default=1.0, gt=0, description="Pulse width in units of 1/gamma")
    detuning: float = Field(default=0.0, description="Carrier detuning from the 1-3 transition")
    separation: float = Field(default=0.0, ge=0, description="Wavepacket spacing (SeparatedGaussians)")
    sign: int = Field(default=1, description="+1 bunched, -1 anti-bunched (HermiteGaussPair)")

    @field_validator("sign")
    @classmethod
    def _check_sign(cls, value: int) -> int:
        if value not in (1, -1):
            raise ValueError("sign must be +1 or -1")
        return value

    @model_validator(mode="after")
    def _check_family(self) -> "PulseSpec":
        if self.family == PulseFamily.HERMITE_GAUSS_PAIR and self.n_photons != 2:
            raise ValueError("HermiteGaussPair requires n_photons = 2")
        return self

    def centers(self) -> Tuple[float, ...]:
        """Temporal centers of the single-photon wavepackets."""
        if self.family == PulseFamily.SEPARATED_GAUSSIANS:
            return tuple((i + 1) * self.separation for i in range(self.n_photons))
        return (0.0,)

    def window(self, gamma: float = 1.0, widths: Optional[float] = None) -> Tuple[float, float]:
        """Integration window: pulse centers padded by widths * max(delta, 1/gamma)."""
        if widths is None:
            widths = get_settings().window_widths
        scale = max(self.delta, 1.0 / gamma) if gamma > 0 else self.delta
        centers = self.centers()
        return min(centers) - widths * scale, max(centers) + widths * scale


class LinearConfig(BaseModel):
    """Parameters of the frequency-domain linear model (gamma = 1)."""
    model_config = ConfigDict(frozen=True)

    delta_gamma: float = Field(..., gt=0, description="Pulse width times emitter rate")
    detuning: float = Field(default=0.0, description="(w0 - w13)/gamma")
    n_emitters: int = Field(default=1, ge=0, description="Emitters in the cascade")


class SplitterConfig(BaseModel):
    """Beamsplitter cascade routing photons to n+1 detectors."""
    model_config = ConfigDict(frozen=True)

    reflectivities: Tuple[float, ...] = Field(..., description="R_1..R_n")

    @field_validator("reflectivities")
    @classmethod
    def _check_range(cls, values: Tuple[float, ...]) -> Tuple[float, ...]:
        for value in values:
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"reflectivity {value} outside [0, 1]")
        return values


# Trajectory outputs
class ClickSummary(BaseModel):
    """Detector click pattern of one trajectory."""
    subtraction_clicks: FrozenSet[int] = Field(..., description="Channels 1..n that fired")
    final_detector_click: bool = Field(..., description="Through channel fired at least once")
    inferred_count: int = Field(..., ge=0, description="Number of clicking detectors")
    true_count: int = Field(..., ge=0, description="Input photon number N")
    error: int = Field(..., description="inferred_count - true_count")

    @model_validator(mode="after")
    def _check_count(self) -> "ClickSummary":
        expected = len(self.subtraction_clicks) + (1 if self.final_detector_click else 0)
        if self.inferred_count != expected:
            raise ValueError("inferred_count must equal the number of clicking detectors")
        if self.error != self.inferred_count - self.true_count:
            raise ValueError("error must equal inferred_count - true_count")
        return self


class OutcomeEstimate(BaseModel):
    """Monte-Carlo estimates of P_0..P_N with binomial intervals."""
    n_photons: int = Field(..., ge=1)
    n_trajectories: int = Field(..., ge=1)
    counts: List[int] = Field(..., description="Trajectories per outcome j = 0..N")
    probabilities: List[float] = Field(..., description="Estimated P_j")
    stderr: List[float] = Field(..., description="Binomial standard errors")
    ci_low: List[float] = Field(..., description="Lower 95% Wilson bound")
    ci_high: List[float] = Field(..., description="Upper 95% Wilson bound")


class ResponsePoint(BaseModel):
    """Mean clicks for one input photon number."""
    n_photons: int = Field(..., ge=1)
    mean_clicks: float
    stderr: float = Field(..., ge=0)


class ResponseCurve(BaseModel):
    """Detector response: mean clicks versus input photon number."""
    n_emitters: int = Field(..., ge=1)
    delta_gamma: float = Field(..., gt=0)
    n_trajectories: int = Field(..., ge=1)
    points: List[ResponsePoint] = Field(default_factory=list)


class ErrorPoint(BaseModel):
    """Mean count error at one delta*gamma, next to the linear-model value."""
    delta_gamma: float = Field(..., gt=0)
    mean_error: float = Field(..., description="Mean inferred_count - N over the ensemble")
    stderr: float = Field(..., ge=0)
    linear_error: float = Field(..., description="avg_error of the linear model")


# Experiment configuration sections
class DetectorSection(BaseModel):
    """Emitter cascade."""
    n_emitters: int = Field(default=1, ge=0, le=8, description="Emitters n")
    gamma: float = Field(default=1.0, ge=0, description="Emitter rate (time unit)")


class SweepSection(BaseModel):
    """Parameter sweeps; empty lists fall back to the pulse/detector values."""
    delta_gamma: List[float] = Field(default_factory=lambda: [1.0], description="delta * gamma values")
    photons: List[int] = Field(default_factory=list, description="Input photon numbers")
    separation: List[float] = Field(default_factory=list, description="Wavepacket spacings")
    emitters: List[int] = Field(default_factory=list, description="Cascade lengths")

    @field_validator("delta_gamma")
    @classmethod
    def _check_delta_gamma(cls, values: List[float]) -> List[float]:
        if not values:
            raise ValueError("delta_gamma sweep must not be empty")
        if any(v <= 0 for v in values):
            raise ValueError("delta_gamma values must be positive")
        return values

    @field_validator("photons", "emitters")
    @classmethod
    def _check_counts(cls, values: List[int]) -> List[int]:
        if any(v < 0 for v in values):
            raise ValueError("counts must be non-negative")
        return values


class TrajectorySection(BaseModel):
    """Monte-Carlo ensemble."""
    count: int = Field(default=2000, ge=1, description="Trajectories M per point")
    seed: Optional[int] = Field(default=None, ge=0, lt=2**64, description="Base seed")
    batch_size: Optional[int] = Field(default=None, ge=1, description="Overrides settings.batch_size")


class GridSection(BaseModel):
    """Sampling grid for correlators."""
    points: int = Field(default=61, ge=2)
    t_start: Optional[float] = None
    t_end: Optional[float] = None


class CorrelateSection(BaseModel):
    """Correlator experiment options."""
    outcome: int = Field(default=0, ge=0, description="Subtracted photon index j")
    method: CorrelatorMethod = Field(default=CorrelatorMethod.ANALYTIC)
    normalize: bool = Field(default=False, description="Scale the surface to unit peak")
    bin_width: Optional[float] = Field(default=None, gt=0, description="Histogram bin (trajectory method)")


class LinearSection(BaseModel):
    """Linear experiment options."""
    quantity: LinearQuantity = Field(default=LinearQuantity.AVG_ERROR)
    lambdas: List[int] = Field(default_factory=lambda: [0, 1, 2, 3, 4], description="Cascade lengths for p_subtract")


class OutputSection(BaseModel):
    """Where the result table goes."""
    path: Optional[str] = None


class ExperimentConfig(BaseModel):
    """A complete experiment description parsed from a config file."""
    experiment: ExperimentKind
    pulse: PulseSpec = Field(default_factory=PulseSpec)
    detector: DetectorSection = Field(default_factory=DetectorSection)
    sweep: SweepSection = Field(default_factory=SweepSection)
    trajectory: TrajectorySection = Field(default_factory=TrajectorySection)
    grid: GridSection = Field(default_factory=GridSection)
    correlate: CorrelateSection = Field(default_factory=CorrelateSection)
    linear: LinearSection = Field(default_factory=LinearSection)
    quadrature: Optional[QuadratureConfig] = None
    output: OutputSection = Field(default_factory=OutputSection)

    def photon_numbers(self) -> List[int]:
        return list(self.sweep.photons) or [self.pulse.n_photons]

    def emitter_counts(self) -> List[int]:
        return list(self.sweep.emitters) or [self.detector.n_emitters]

    def separations(self) -> List[float]:
        return list(self.sweep.separation) or [self.pulse.separation]
