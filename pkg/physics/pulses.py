"""
N-photon input states.

Every supported family is a finite sum of products of single-photon
wavepackets, g(t_1..t_N) = sum_P w_P prod_i f_{P,i}(t_i). Wavepackets are
Hermite-Gauss functions (order 0 is the Gaussian pulse) under a common carrier
exp(-i * detuning * t) in the frame rotating at the 1-3 transition. Overlaps and
causal filter integrals have closed forms, which the nonlinear model relies on.
"""

import itertools
import math
import threading
from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np
from cachetools import LRUCache, cached
from scipy import special

from models.schemas import PulseFamily, PulseSpec, QuadratureConfig
from physics.numerics import hermite_poly, quad_simplex
from utils.config import get_settings
from utils.errors import DomainError, IllConditionedInputError, QuadratureConvergenceError, UnsupportedError
from utils.logging import get_logger

logger = get_logger()

_SQRT_PI = math.sqrt(math.pi)


def gaussian_h(delta: float, detuning: float, t):
    """Gaussian single-photon amplitude sqrt(2/(delta sqrt(pi))) exp(-i detuning t - 2 t^2/delta^2)."""
    if delta <= 0:
        raise DomainError(f"pulse width must be positive, got {delta}")
    t = np.asarray(t, dtype=float)
    return math.sqrt(2.0 / (delta * _SQRT_PI)) * np.exp(-1j * detuning * t - 2.0 * t**2 / delta**2)


def gaussian_h_freq(delta: float, detuning: float, omega):
    """
    Spectrum of gaussian_h, (2 pi)^(-1/2) * integral h(t) exp(+i omega t) dt.

    omega is measured from the 1-3 transition frequency.
    """
    if delta <= 0:
        raise DomainError(f"pulse width must be positive, got {delta}")
    omega = np.asarray(omega, dtype=float)
    return math.sqrt(delta / (2.0 * _SQRT_PI)) * np.exp(-((omega - detuning) ** 2) * delta**2 / 8.0) + 0j


def hermite_gauss(n: int, delta: float, t):
    """Hermite-Gauss function h_n(t) of width delta, unit L2 norm."""
    if n not in (0, 1):
        raise UnsupportedError(f"Hermite-Gauss order {n} not supported (0 or 1)")
    if delta <= 0:
        raise DomainError(f"pulse width must be positive, got {delta}")
    t = np.asarray(t, dtype=float)
    norm = math.sqrt(1.0 / (2.0 ** (n - 1) * math.factorial(n) * _SQRT_PI * delta))
    return norm * np.exp(-2.0 * t**2 / delta**2) * hermite_poly(n, 2.0 * t / delta)


@dataclass(frozen=True)
class WavePacket:
    """Single-photon mode: order-n Hermite-Gauss envelope centred at `center` under exp(-i detuning t)."""

    delta: float
    center: float = 0.0
    detuning: float = 0.0
    order: int = 0

    def __post_init__(self):
        if self.delta <= 0:
            raise DomainError(f"pulse width must be positive, got {self.delta}")
        if self.order not in (0, 1):
            raise UnsupportedError(f"Hermite-Gauss order {self.order} not supported (0 or 1)")

    @property
    def alpha(self) -> float:
        return 2.0 / self.delta**2

    @property
    def poly(self) -> Tuple[float, float]:
        """Envelope polynomial p0 + p1*s in s = t - center, normalization included."""
        norm = math.sqrt(1.0 / (2.0 ** (self.order - 1) * math.factorial(self.order) * _SQRT_PI * self.delta))
        if self.order == 0:
            return norm, 0.0
        return 0.0, norm * 4.0 / self.delta

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        s = t - self.center
        p0, p1 = self.poly
        return (p0 + p1 * s) * np.exp(-1j * self.detuning * t - self.alpha * s**2)

    def overlap(self, other: "WavePacket") -> complex:
        """Inner product <self|other>; both packets must share width and carrier."""
        if not (math.isclose(self.delta, other.delta) and math.isclose(self.detuning, other.detuning)):
            raise DomainError("closed-form overlap needs equal width and carrier")
        alpha = self.alpha
        d = self.center - other.center
        a0, a1 = self.poly
        b0, b1 = other.poly
        lead_a = a0 - a1 * d / 2.0
        lead_b = b0 + b1 * d / 2.0
        i0 = math.sqrt(math.pi / (2.0 * alpha))
        i2 = i0 / (4.0 * alpha)
        return complex(math.exp(-alpha * d * d / 2.0) * (lead_a * lead_b * i0 + a1 * b1 * i2))

    def causal(self, x, gamma: float):
        """
        Causal filter c(x) = integral_{-inf}^{x} exp(gamma (t - x)) f(t) dt.

        Closed form through the scaled complementary error function, stable
        for any x because the branch is picked by the sign of Re z.
        """
        if gamma < 0:
            raise DomainError(f"decay rate must be non-negative, got {gamma}")
        x = np.asarray(x, dtype=float)
        shape = x.shape
        y = x.reshape(-1) - self.center
        alpha = self.alpha
        beta = gamma - 1j * self.detuning
        z = math.sqrt(alpha) * (beta / (2.0 * alpha) - y)
        envelope = np.exp(-1j * self.detuning * y - alpha * y**2)
        half = 0.5 * math.sqrt(math.pi / alpha)

        j0 = np.empty(y.shape, dtype=complex)
        upper = np.real(z) >= 0
        lower = ~upper
        j0[upper] = half * envelope[upper] * special.erfcx(z[upper])
        j0[lower] = half * (
            2.0 * np.exp(-gamma * y[lower] + beta**2 / (4.0 * alpha)) - envelope[lower] * special.erfcx(-z[lower])
        )

        p0, p1 = self.poly
        value = p0 * j0
        if p1 != 0.0:
            j1 = -envelope / (2.0 * alpha) + beta / (2.0 * alpha) * j0
            value = value + p1 * j1
        value = np.exp(-1j * self.detuning * self.center) * value
        return value.reshape(shape) if shape else complex(value[0])

    def interval(self, lo, hi, ref, gamma: float):
        """integral_{lo}^{hi} exp(gamma (t - ref)) f(t) dt for lo <= hi <= ref; lo may be -inf."""
        hi = np.asarray(hi, dtype=float)
        value = np.exp(gamma * (hi - ref)) * self.causal(hi, gamma)
        lo = np.asarray(lo, dtype=float)
        if np.all(np.isneginf(lo)):
            return value
        finite = np.isfinite(lo)
        safe_lo = np.where(finite, lo, hi)
        tail = np.exp(gamma * (safe_lo - ref)) * self.causal(safe_lo, gamma)
        return value - np.where(finite, tail, 0.0)


@dataclass(frozen=True)
class ProductTerm:
    """One product w * prod_i f_{slots[i]}(t_i) of the amplitude expansion."""

    weight: complex
    slots: Tuple[int, ...]


@dataclass(frozen=True)
class GramMatrix:
    """Overlap matrix S_ij = <f_i|f_j> of single-photon wavepackets."""

    entries: np.ndarray

    def validate(self, tol: float = 1e-8) -> None:
        """Hermitian, unit diagonal, positive semi-definite; raises IllConditionedInputError otherwise."""
        s = self.entries
        if not np.allclose(s, s.conj().T, atol=tol):
            raise IllConditionedInputError("overlap matrix is not Hermitian")
        if not np.allclose(np.diag(s), 1.0, atol=tol):
            raise IllConditionedInputError("wavepackets are not normalized")
        if np.min(np.linalg.eigvalsh(s)) < -tol:
            raise IllConditionedInputError("overlap matrix is not positive semi-definite")


def gram_matrix(wavepackets: Sequence[WavePacket]) -> GramMatrix:
    n = len(wavepackets)
    entries = np.empty((n, n), dtype=complex)
    for i, left in enumerate(wavepackets):
        for j, right in enumerate(wavepackets):
            entries[i, j] = left.overlap(right)
    return GramMatrix(entries=entries)


def permanent(matrix: np.ndarray) -> complex:
    """Permanent by direct expansion over permutations (sizes up to 8)."""
    matrix = np.asarray(matrix)
    n = matrix.shape[0]
    if matrix.shape != (n, n):
        raise DomainError("permanent needs a square matrix")
    if n > 8:
        raise UnsupportedError(f"permanent of size {n} exceeds the expansion limit 8")
    if n == 0:
        return 1.0 + 0j
    rows = np.arange(n)
    return complex(sum(np.prod(matrix[rows, list(perm)]) for perm in itertools.permutations(range(n))))


def gram_normalization(wavepackets: Sequence[WavePacket]) -> float:
    """
    Normalization 1/sqrt(perm(S)) of the symmetrized product of the wavepackets.

    Raises:
        IllConditionedInputError: S is not a valid Gram matrix or its permanent vanishes
    """
    gram = gram_matrix(wavepackets)
    gram.validate()
    value = permanent(gram.entries)
    if abs(value.imag) > 1e-10 or value.real < 1e-12:
        raise IllConditionedInputError(f"permanent of the overlap matrix is {value}")
    return 1.0 / math.sqrt(value.real)


@dataclass(frozen=True)
class AmplitudeFn:
    """
    Normalized N-photon amplitude N * g on the ordered simplex.

    measured_norm is the ordered-simplex integral of |N g|^2 found at
    construction; observables divide by it.
    """

    spec: PulseSpec
    wavepackets: Tuple[WavePacket, ...]
    products: Tuple[ProductTerm, ...]
    norm_factor: float
    measured_norm: float = 1.0

    @property
    def n_photons(self) -> int:
        return self.spec.n_photons

    def eval(self, *times):
        """N * g(t_1, ..., t_N); arguments broadcast like numpy arrays."""
        if len(times) != self.n_photons:
            raise DomainError(f"expected {self.n_photons} times, got {len(times)}")
        times = np.broadcast_arrays(*[np.asarray(t, dtype=float) for t in times])
        values = [[wp(t) for t in times] for wp in self.wavepackets]
        total = np.zeros(times[0].shape, dtype=complex)
        for term in self.products:
            product = np.full(times[0].shape, term.weight, dtype=complex)
            for slot, packet in enumerate(term.slots):
                product = product * values[packet][slot]
            total = total + product
        return self.norm_factor * total

    __call__ = eval

    def analytic_norm(self) -> float:
        """Ordered-simplex norm from closed-form overlaps (g is symmetric)."""
        gram = gram_matrix(self.wavepackets).entries
        total = 0j
        for a in self.products:
            for b in self.products:
                factor = np.conj(a.weight) * b.weight
                for slot in range(self.n_photons):
                    factor *= gram[a.slots[slot], b.slots[slot]]
                total += factor
        return float((self.norm_factor**2 * total / math.factorial(self.n_photons)).real)


def _family_terms(spec: PulseSpec) -> Tuple[Tuple[WavePacket, ...], Tuple[ProductTerm, ...]]:
    n = spec.n_photons
    if spec.family == PulseFamily.GAUSSIAN_FOCK:
        packet = WavePacket(delta=spec.delta, detuning=spec.detuning)
        return (packet,), (ProductTerm(weight=1.0, slots=(0,) * n),)

    if spec.family == PulseFamily.SEPARATED_GAUSSIANS:
        packets = tuple(WavePacket(delta=spec.delta, center=c, detuning=spec.detuning) for c in spec.centers())
        products = []
        for perm in itertools.permutations(range(n)):
            slots = [0] * n
            for packet, slot in enumerate(perm):
                slots[slot] = packet
            products.append(ProductTerm(weight=1.0, slots=tuple(slots)))
        return packets, tuple(products)

    if spec.family == PulseFamily.HERMITE_GAUSS_PAIR:
        if n != 2:
            raise UnsupportedError("HermiteGaussPair is a two-photon state")
        packets = (
            WavePacket(delta=spec.delta, detuning=spec.detuning, order=0),
            WavePacket(delta=spec.delta, detuning=spec.detuning, order=1),
        )
        return packets, (ProductTerm(weight=1.0, slots=(0, 0)), ProductTerm(weight=float(spec.sign), slots=(1, 1)))

    raise UnsupportedError(f"unsupported pulse family {spec.family}")


def _verification_cfg() -> QuadratureConfig:
    base = QuadratureConfig.from_settings()
    return base.model_copy(update={"max_subdivisions": max(base.max_subdivisions, 20000)})


_amplitude_cache: LRUCache = LRUCache(maxsize=256)
_amplitude_lock = threading.Lock()


@cached(cache=_amplitude_cache, lock=_amplitude_lock)
def build_amplitude(spec: PulseSpec) -> AmplitudeFn:
    """
    Build and verify the normalized amplitude of an input state.

    GaussianFock uses N = sqrt(N!), SeparatedGaussians the permanent of the
    overlap matrix, HermiteGaussPair the closed-form norm of h0 h0 +/- h1 h1.
    The ordered-simplex norm is measured by quadrature when the photon number
    fits the simplex limit, otherwise taken from the closed form.
    """
    packets, products = _family_terms(spec)
    n = spec.n_photons

    if spec.family == PulseFamily.GAUSSIAN_FOCK:
        norm_factor = math.sqrt(math.factorial(n))
    elif spec.family == PulseFamily.SEPARATED_GAUSSIANS:
        norm_factor = gram_normalization(packets)
    else:
        raw = AmplitudeFn(spec=spec, wavepackets=packets, products=products, norm_factor=1.0)
        norm_factor = 1.0 / math.sqrt(raw.analytic_norm())

    amplitude = AmplitudeFn(spec=spec, wavepackets=packets, products=products, norm_factor=norm_factor)
    if n <= get_settings().simplex_max_dim and n <= 3:
        window = spec.window(gamma=math.inf)
        try:
            measured = quad_simplex(
                lambda *t: np.abs(amplitude.eval(*t)) ** 2, n, window, _verification_cfg(), complex_valued=False
            )
        except QuadratureConvergenceError as e:
            logger.warning(f"Norm quadrature for {spec.family.value} N={n} did not converge: {e}")
            measured = float(np.real(e.estimate))
    else:
        measured = amplitude.analytic_norm()

    if abs(measured - 1.0) > 1e-6:
        logger.warning(f"Input norm deviates from 1: {measured:.9f} ({spec.family.value}, N={n}, delta={spec.delta})")
    logger.debug(f"Built amplitude {spec.family.value} N={n} delta={spec.delta} norm={measured:.12f}")
    return AmplitudeFn(
        spec=spec, wavepackets=packets, products=products, norm_factor=norm_factor, measured_norm=float(measured)
    )


def single_photon_modes(spec: PulseSpec) -> List[WavePacket]:
    """Wavepackets a shaped-cavity source must release, one per cavity."""
    packets, _ = _family_terms(spec)
    if spec.family == PulseFamily.GAUSSIAN_FOCK:
        return [packets[0]]
    return list(packets)
