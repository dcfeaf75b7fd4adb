"""
SLH description of the detector network.

Operators live on a labeled tensor-product space (3-level emitters, truncated
cavities) as sparse matrices times scalar time envelopes. Emitter triples are
composed with the series product into the cascade, and a shaped cavity source
is cascaded in front of it on the through channel.

Channel k (0-based) < n is the subtraction channel of emitter k+1; channel n
is the shared through channel.
"""

import math
from dataclasses import dataclass, field
from functools import cached_property, reduce
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import scipy.sparse as sp
from scipy import special
from scipy.integrate import cumulative_trapezoid

from models.schemas import PulseFamily, PulseSpec, TimeGrid
from physics.numerics import rk4_step
from physics.pulses import WavePacket, single_photon_modes
from utils.config import get_settings
from utils.errors import (
    ChannelMismatchError,
    DegenerateNetworkError,
    DimensionCapError,
    DomainError,
    UnsupportedSourceError,
)
from utils.logging import get_logger

logger = get_logger()

EMITTER_LEVELS = 3


def emitter_label(i: int) -> str:
    return f"emitter{i}"


def cavity_label(c: int) -> str:
    return f"cavity{c}"


@dataclass(frozen=True)
class HilbertLayout:
    """Ordered (label, dimension) subsystems; the first one is the most significant tensor factor."""

    subsystems: Tuple[Tuple[str, int], ...]

    def __post_init__(self):
        labels = [label for label, _ in self.subsystems]
        if len(set(labels)) != len(labels):
            raise DomainError(f"subsystem labels must be unique: {labels}")
        if any(dim < 1 for _, dim in self.subsystems):
            raise DomainError("subsystem dimensions must be positive")

    @property
    def labels(self) -> List[str]:
        return [label for label, _ in self.subsystems]

    @property
    def dims(self) -> List[int]:
        return [dim for _, dim in self.subsystems]

    @property
    def dim(self) -> int:
        return math.prod(self.dims)

    def has(self, label: str) -> bool:
        return label in self.labels

    def index(self, label: str) -> int:
        if label not in self.labels:
            raise DomainError(f"layout has no subsystem '{label}'")
        return self.labels.index(label)

    def embed(self, label: str, local) -> sp.csr_matrix:
        """Kronecker placement of a local operator on subsystem `label`."""
        position = self.index(label)
        dims = self.dims
        local = sp.csr_matrix(local, dtype=complex)
        if local.shape != (dims[position], dims[position]):
            raise DomainError(f"operator of shape {local.shape} does not fit '{label}' of dimension {dims[position]}")
        left = math.prod(dims[:position])
        right = math.prod(dims[position + 1:])
        return sp.kron(sp.kron(sp.identity(left, format="csr"), local), sp.identity(right, format="csr"), format="csr")

    def basis_index(self, levels: Dict[str, int]) -> int:
        """Index of the product basis state; levels are 0-based local indices, missing labels are 0."""
        index = 0
        for label, dim in self.subsystems:
            level = levels.get(label, 0)
            if not 0 <= level < dim:
                raise DomainError(f"level {level} outside 0..{dim - 1} for '{label}'")
            index = index * dim + level
        return index

    def product_state(self, levels: Dict[str, int]) -> np.ndarray:
        state = np.zeros(self.dim, dtype=complex)
        state[self.basis_index(levels)] = 1.0
        return state


@dataclass(frozen=True)
class Envelope:
    """Scalar time dependence; envelopes with equal labels are the same function."""

    label: str = "1"
    fn: Optional[Callable[[float], complex]] = field(default=None, compare=False)
    real: bool = True

    @property
    def is_constant(self) -> bool:
        return self.fn is None

    def __call__(self, t: float) -> complex:
        return 1.0 if self.fn is None else self.fn(t)

    def __mul__(self, other: "Envelope") -> "Envelope":
        if self.is_constant:
            return other
        if other.is_constant:
            return self
        a, b = self.fn, other.fn
        label = "*".join(sorted((self.label, other.label)))
        return Envelope(label=label, fn=lambda t: a(t) * b(t), real=self.real and other.real)

    def conj(self) -> "Envelope":
        if self.real:
            return self
        fn = self.fn
        return Envelope(label=f"conj({self.label})", fn=lambda t: np.conj(fn(t)), real=False)


CONSTANT = Envelope()

Term = Tuple[Envelope, sp.csr_matrix]


def _combine(terms: Sequence[Term]) -> Tuple[Term, ...]:
    grouped: Dict[Envelope, sp.csr_matrix] = {}
    for envelope, matrix in terms:
        grouped[envelope] = grouped[envelope] + matrix if envelope in grouped else matrix
    combined = []
    for envelope, matrix in grouped.items():
        matrix = sp.csr_matrix(matrix, dtype=complex, copy=True)
        matrix.eliminate_zeros()
        if matrix.nnz:
            combined.append((envelope, matrix))
    return tuple(combined)


@dataclass(frozen=True, eq=False)
class Operator:
    """Sum of envelope x sparse matrix terms over a layout."""

    layout: HilbertLayout
    terms: Tuple[Term, ...] = ()

    def __post_init__(self):
        dim = self.layout.dim
        for _, matrix in self.terms:
            if matrix.shape != (dim, dim):
                raise DomainError(f"matrix of shape {matrix.shape} does not match layout dimension {dim}")

    @classmethod
    def constant(cls, layout: HilbertLayout, matrix, envelope: Envelope = CONSTANT) -> "Operator":
        return cls(layout, _combine([(envelope, sp.csr_matrix(matrix, dtype=complex))]))

    @classmethod
    def zero(cls, layout: HilbertLayout) -> "Operator":
        return cls(layout)

    @classmethod
    def identity(cls, layout: HilbertLayout) -> "Operator":
        return cls.constant(layout, sp.identity(layout.dim, format="csr"))

    def _check(self, other: "Operator") -> None:
        if other.layout != self.layout:
            raise ChannelMismatchError("operators act on different layouts")

    @property
    def is_zero(self) -> bool:
        return not self.terms

    @property
    def is_constant(self) -> bool:
        return all(envelope.is_constant for envelope, _ in self.terms)

    @property
    def matrix(self) -> sp.csr_matrix:
        """Matrix of a time-independent operator."""
        if not self.is_constant:
            raise DomainError("operator is time-dependent; use at(t)")
        return self.at(0.0)

    def __add__(self, other: "Operator") -> "Operator":
        self._check(other)
        return Operator(self.layout, _combine(self.terms + other.terms))

    def __neg__(self) -> "Operator":
        return Operator(self.layout, tuple((e, -m) for e, m in self.terms))

    def __sub__(self, other: "Operator") -> "Operator":
        return self + (-other)

    def __mul__(self, scalar: complex) -> "Operator":
        return Operator(self.layout, _combine([(e, scalar * m) for e, m in self.terms]))

    __rmul__ = __mul__

    def __matmul__(self, other: "Operator") -> "Operator":
        self._check(other)
        products = [(ea * eb, ma @ mb) for ea, ma in self.terms for eb, mb in other.terms]
        return Operator(self.layout, _combine(products))

    def dag(self) -> "Operator":
        return Operator(self.layout, _combine([(e.conj(), m.conj().T.tocsr()) for e, m in self.terms]))

    def at(self, t: float) -> sp.csr_matrix:
        total = sp.csr_matrix((self.layout.dim, self.layout.dim), dtype=complex)
        for envelope, matrix in self.terms:
            total = total + envelope(t) * matrix
        return total

    def apply(self, t: float, psi: np.ndarray) -> np.ndarray:
        """Operator(t) @ psi for a vector or a matrix of column states."""
        out = np.zeros(psi.shape, dtype=complex)
        for envelope, matrix in self.terms:
            out += envelope(t) * (matrix @ psi)
        return out

    def allclose(self, other: "Operator", times: Sequence[float] = (0.0,), atol: float = 1e-12) -> bool:
        self._check(other)
        for t in times:
            diff = self.at(t) - other.at(t)
            if diff.nnz and abs(diff).max() > atol:
                return False
        return True

    def is_hermitian(self, times: Sequence[float] = (0.0,), atol: float = 1e-12) -> bool:
        return self.allclose(self.dag(), times, atol)


def sigma(layout: HilbertLayout, label: str, k: int, l: int) -> Operator:
    """Emitter transition |k><l| with levels numbered 1..3."""
    if not (1 <= k <= EMITTER_LEVELS and 1 <= l <= EMITTER_LEVELS):
        raise DomainError(f"emitter levels are 1..{EMITTER_LEVELS}, got ({k}, {l})")
    local = sp.csr_matrix(([1.0], ([k - 1], [l - 1])), shape=(EMITTER_LEVELS, EMITTER_LEVELS), dtype=complex)
    return Operator.constant(layout, layout.embed(label, local))


def annihilation(layout: HilbertLayout, label: str) -> Operator:
    """Truncated cavity lowering operator."""
    dim = layout.dims[layout.index(label)]
    local = sp.diags(np.sqrt(np.arange(1, dim)), offsets=1, shape=(dim, dim), dtype=complex)
    return Operator.constant(layout, layout.embed(label, local))


@dataclass(frozen=True, eq=False)
class SLHTriple:
    """(S, L, H) with one coupling operator per channel."""

    S: np.ndarray
    L: Tuple[Operator, ...]
    H: Operator

    def __post_init__(self):
        channels = len(self.L)
        if np.shape(self.S) != (channels, channels):
            raise ChannelMismatchError(f"S of shape {np.shape(self.S)} does not match {channels} channels")
        if any(op.layout != self.H.layout for op in self.L):
            raise ChannelMismatchError("coupling operators and Hamiltonian act on different layouts")

    @property
    def channels(self) -> int:
        return len(self.L)

    @property
    def layout(self) -> HilbertLayout:
        return self.H.layout

    def effective_hamiltonian(self) -> Operator:
        """H - (i/2) sum_k L_k^dag L_k."""
        decay = reduce(lambda acc, op: acc + op.dag() @ op, self.L, Operator.zero(self.layout))
        return self.H - 0.5j * decay


def identity_triple(channels: int, layout: HilbertLayout) -> SLHTriple:
    zero = Operator.zero(layout)
    return SLHTriple(S=np.eye(channels, dtype=complex), L=(zero,) * channels, H=zero)


def series_product(g1: SLHTriple, g2: SLHTriple) -> SLHTriple:
    """
    Feed the output of g1 into g2.

    S = S2 S1, L = L2 + S2 L1, H = H1 + H2 - (i/2)(L2^dag S2 L1 - (S2 L1)^dag L2).

    Raises:
        ChannelMismatchError: different channel counts or layouts
    """
    if g1.channels != g2.channels:
        raise ChannelMismatchError(f"cannot cascade {g1.channels} into {g2.channels} channels")
    if g1.layout != g2.layout:
        raise ChannelMismatchError("cannot cascade triples on different layouts")
    layout = g1.layout
    routed = []
    for i in range(g1.channels):
        op = Operator.zero(layout)
        for k in range(g1.channels):
            if g2.S[i, k] != 0:
                op = op + complex(g2.S[i, k]) * g1.L[k]
        routed.append(op)

    coupling = Operator.zero(layout)
    for forward, incoming in zip(g2.L, routed):
        coupling = coupling + (forward.dag() @ incoming - incoming.dag() @ forward)
    return SLHTriple(
        S=g2.S @ g1.S,
        L=tuple(forward + incoming for forward, incoming in zip(g2.L, routed)),
        H=g1.H + g2.H - 0.5j * coupling,
    )


def emitter_triple(i: int, n: int, gamma: float, layout: HilbertLayout) -> SLHTriple:
    """
    Lambda emitter i (1-based) of an n-emitter cascade.

    Decay 3 -> 2 goes to its own subtraction channel, 3 -> 1 to the through
    channel; H = 0 in the frame rotating at the 1-3 transition.
    """
    if not 1 <= i <= n:
        raise DomainError(f"emitter index {i} outside 1..{n}")
    label = emitter_label(i)
    layout.index(label)
    zero = Operator.zero(layout)
    rate = math.sqrt(gamma)
    couplings = [zero] * (n + 1)
    couplings[i - 1] = rate * sigma(layout, label, 2, 3)
    couplings[n] = rate * sigma(layout, label, 1, 3)
    return SLHTriple(S=np.eye(n + 1, dtype=complex), L=tuple(couplings), H=zero)


def cascade_detector(n: int, gamma: float, layout: HilbertLayout) -> SLHTriple:
    """
    Closed form of emitter 1 > emitter 2 > ... > emitter n.

    L = sqrt(gamma) [s23^(1), ..., s23^(n), sum_i s13^(i)],
    H = (gamma/2i) sum_{i<j} (s31^(j) s13^(i) - h.c.).

    Raises:
        DegenerateNetworkError: n = 0
    """
    if n < 1:
        raise DegenerateNetworkError("a detector needs at least one emitter")
    rate = math.sqrt(gamma)
    labels = [emitter_label(i) for i in range(1, n + 1)]
    lowering = [sigma(layout, label, 1, 3) for label in labels]
    couplings = [rate * sigma(layout, label, 2, 3) for label in labels]
    couplings.append(rate * reduce(lambda a, b: a + b, lowering))

    forward = Operator.zero(layout)
    for j in range(1, n):
        for i in range(j):
            forward = forward + lowering[j].dag() @ lowering[i]
    hamiltonian = (gamma / 2j) * (forward - forward.dag())
    return SLHTriple(S=np.eye(n + 1, dtype=complex), L=tuple(couplings), H=hamiltonian)


def _unreleased(packet: WavePacket, t):
    """Fraction of a Gaussian wavepacket still to come after time t."""
    return 0.5 * special.erfc(2.0 * (np.asarray(t, dtype=float) - packet.center) / packet.delta)


def shaping_rate(packet: WavePacket, kappa_max: Optional[float] = None) -> Callable[[float], float]:
    """
    Cavity decay rate kappa(t) = |h(t)|^2 / (1 - int_{-inf}^t |h|^2) that releases a Gaussian photon.

    Evaluated as (4 / (delta sqrt(pi))) / erfcx(2 (t - c) / delta) and clipped at kappa_max.
    """
    if packet.order != 0:
        raise UnsupportedSourceError("only Gaussian wavepackets have a cavity release profile")
    limit = get_settings().kappa_max if kappa_max is None else kappa_max
    scale = 4.0 / (packet.delta * math.sqrt(math.pi))

    def kappa(t):
        value = scale / special.erfcx(2.0 * (np.asarray(t, dtype=float) - packet.center) / packet.delta)
        return np.minimum(value, limit)

    return kappa


def release_end(packet: WavePacket, tail: Optional[float] = None) -> float:
    """Time after which less than `tail` of the wavepacket is left in the cavity."""
    tail = get_settings().release_tail if tail is None else tail
    return packet.center + 0.5 * packet.delta * float(special.erfcinv(2.0 * tail))


def _source_cavities(spec: PulseSpec) -> List[Tuple[WavePacket, int]]:
    if spec.family == PulseFamily.HERMITE_GAUSS_PAIR:
        raise UnsupportedSourceError("HermiteGaussPair has no cavity-release source")
    modes = single_photon_modes(spec)
    if spec.family == PulseFamily.GAUSSIAN_FOCK:
        return [(modes[0], spec.n_photons)]
    return [(packet, 1) for packet in modes]


def source_triple(
    spec: PulseSpec,
    layout: HilbertLayout,
    t_grid: Optional[TimeGrid] = None,
    channels: Optional[int] = None,
) -> SLHTriple:
    """
    Shaped cavities releasing the input state into the through channel.

    GaussianFock uses one cavity holding |N>; SeparatedGaussians one cavity
    per photon, cascaded earliest first. Each cavity couples with
    sqrt(kappa(t)) a and rotates at the carrier detuning.

    Raises:
        UnsupportedSourceError: HermiteGaussPair
    """
    cavities = _source_cavities(spec)
    if channels is None:
        channels = sum(1 for label in layout.labels if label.startswith("emitter")) + 1
    zero = Operator.zero(layout)
    triples = []
    for index, (packet, _) in enumerate(cavities, start=1):
        label = cavity_label(index)
        lowering = annihilation(layout, label)
        kappa = shaping_rate(packet)
        envelope = Envelope(label=f"sqrt_kappa[{label}]", fn=lambda t, kappa=kappa: float(np.sqrt(kappa(t))))
        couplings = [zero] * channels
        couplings[-1] = Operator(layout, tuple((envelope, m) for _, m in lowering.terms))
        hamiltonian = spec.detuning * (lowering.dag() @ lowering) if spec.detuning else zero
        triples.append(SLHTriple(S=np.eye(channels, dtype=complex), L=tuple(couplings), H=hamiltonian))

        if t_grid is not None and float(_unreleased(packet, t_grid.t_end)) > get_settings().release_tail:
            logger.warning(f"Time grid ends at {t_grid.t_end} before {label} has released its photon")
    return reduce(series_product, triples, identity_triple(channels, layout))


@dataclass(frozen=True, eq=False)
class Network:
    """Source cascaded into an n-emitter detector, with its initial state."""

    spec: PulseSpec
    n_emitters: int
    gamma: float
    layout: HilbertLayout
    triple: SLHTriple
    initial_state: np.ndarray

    @property
    def channels(self) -> int:
        return self.triple.channels

    @property
    def through_channel(self) -> int:
        return self.n_emitters

    @cached_property
    def effective_hamiltonian(self) -> Operator:
        return self.triple.effective_hamiltonian()

    @cached_property
    def jump_operators(self) -> Tuple[Operator, ...]:
        return self.triple.L

    def cavity_labels(self) -> List[str]:
        return [label for label in self.layout.labels if label.startswith("cavity")]

    def emitter_labels(self) -> List[str]:
        return [emitter_label(i) for i in range(1, self.n_emitters + 1)]

    @cached_property
    def excitation_operator(self) -> Operator:
        """Photons stored in cavities plus excited emitters."""
        total = Operator.zero(self.layout)
        for label in self.cavity_labels():
            a = annihilation(self.layout, label)
            total = total + a.dag() @ a
        for label in self.emitter_labels():
            total = total + sigma(self.layout, label, 3, 3)
        return total

    def level_population(self, psi: np.ndarray, label: str, level: int) -> float:
        """<psi| s_kk |psi> / <psi|psi> of one emitter."""
        projector = sigma(self.layout, label, level, level).matrix
        return float(np.real(np.vdot(psi, projector @ psi)) / np.real(np.vdot(psi, psi)))


def network_layout(spec: PulseSpec, n: int) -> HilbertLayout:
    emitters = tuple((emitter_label(i), EMITTER_LEVELS) for i in range(1, n + 1))
    cavities = tuple((cavity_label(c), photons + 1) for c, (_, photons) in enumerate(_source_cavities(spec), start=1))
    return HilbertLayout(subsystems=emitters + cavities)


def full_network(spec: PulseSpec, n: int, gamma: float = 1.0) -> Network:
    """
    Source > cascade of n emitters, emitters in |1>, cavities in their Fock states.

    Raises:
        DimensionCapError: composed dimension above settings.hilbert_dim_cap
        DegenerateNetworkError: n = 0
        UnsupportedSourceError: HermiteGaussPair
    """
    if n < 1:
        raise DegenerateNetworkError("a detector needs at least one emitter")
    cavities = _source_cavities(spec)
    dimension = EMITTER_LEVELS**n * math.prod(photons + 1 for _, photons in cavities)
    cap = get_settings().hilbert_dim_cap
    if dimension > cap:
        raise DimensionCapError(f"network dimension {dimension} exceeds the cap {cap}")

    layout = network_layout(spec, n)
    triple = series_product(source_triple(spec, layout, channels=n + 1), cascade_detector(n, gamma, layout))
    levels = {cavity_label(c): photons for c, (_, photons) in enumerate(cavities, start=1)}
    initial = layout.product_state(levels)
    logger.debug(f"Built network: {n} emitters, {len(cavities)} cavities, dimension {layout.dim}")
    return Network(spec=spec, n_emitters=n, gamma=gamma, layout=layout, triple=triple, initial_state=initial)


def default_time_grid(spec: PulseSpec, gamma: float = 1.0, dt: Optional[float] = None) -> TimeGrid:
    """From 3 widths before the first pulse until the last cavity is empty plus 8 emitter lifetimes."""
    centers = spec.centers()
    start = min(centers) - 3.0 * spec.delta
    probe = WavePacket(delta=spec.delta, center=max(centers))
    tail = 8.0 / gamma if gamma > 0 else 8.0 * spec.delta
    step = dt if dt is not None else get_settings().dt_for(spec.delta, gamma)
    return TimeGrid.from_step(start, release_end(probe) + tail, step)


def release_wavepacket(spec: PulseSpec, grid: Optional[TimeGrid] = None) -> Tuple[np.ndarray, np.ndarray]:
    """
    Output field of a shaped single-photon cavity, from no-jump evolution.

    Returns (times, xi) with xi(t) = sqrt(kappa(t)) c_1(t), which approximates
    the first wavepacket of spec.
    """
    single = spec.model_copy(update={"n_photons": 1, "family": PulseFamily.GAUSSIAN_FOCK})
    layout = HilbertLayout(subsystems=((cavity_label(1), 2),))
    triple = source_triple(single, layout, channels=1)
    generator = triple.effective_hamiltonian()
    coupling = triple.L[0]
    grid = grid or default_time_grid(single)
    times = grid.times()

    psi = layout.product_state({cavity_label(1): 1})
    field_values = np.empty(len(times), dtype=complex)
    for k, t in enumerate(times):
        field_values[k] = (coupling.apply(t, psi))[0]
        if k + 1 < len(times):
            psi = rk4_step(generator.apply, t, psi, grid.dt)
    return times, field_values


def release_intensity(spec: PulseSpec, grid: Optional[TimeGrid] = None) -> Tuple[np.ndarray, np.ndarray]:
    """Mean photon flux kappa(t) <a^dag a>(t) leaving a GaussianFock source cavity."""
    if spec.family != PulseFamily.GAUSSIAN_FOCK:
        raise UnsupportedSourceError("release_intensity models a single Fock-state cavity")
    packet = single_photon_modes(spec)[0]
    kappa = shaping_rate(packet)
    grid = grid or default_time_grid(spec)
    times = grid.times()
    rates = kappa(times)
    released = cumulative_trapezoid(rates, times, initial=0.0)
    return times, spec.n_photons * rates * np.exp(-released)
