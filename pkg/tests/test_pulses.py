"""
Tests for single-photon wavepackets and N-photon input amplitudes.
"""

import math

import numpy as np
import pytest
from pydantic import ValidationError

from models.schemas import PulseFamily, PulseSpec
from physics.numerics import quad_1d, quad_real
from physics.pulses import (
    GramMatrix,
    WavePacket,
    build_amplitude,
    gaussian_h,
    gaussian_h_freq,
    gram_matrix,
    gram_normalization,
    hermite_gauss,
    permanent,
    single_photon_modes,
)
from utils.errors import DomainError, IllConditionedInputError, UnsupportedError


class TestGaussianPulse:
    """Test the Gaussian single-photon amplitude."""

    @pytest.mark.parametrize("delta", [0.3, 1.0, 5.0])
    def test_unit_norm(self, delta):
        """Test that |h|^2 integrates to one."""
        value = quad_real(lambda t: abs(gaussian_h(delta, 0.7, t)) ** 2, -math.inf, math.inf)
        assert value == pytest.approx(1.0, abs=1e-9)

    @pytest.mark.parametrize("omega", [-1.0, 0.3, 2.0])
    def test_spectrum_matches_transform(self, omega):
        """Test the closed-form spectrum against a numerical Fourier transform."""
        delta, detuning = 1.5, 0.5
        numeric = quad_1d(
            lambda t: gaussian_h(delta, detuning, t) * np.exp(1j * omega * t), -math.inf, math.inf
        ) / math.sqrt(2.0 * math.pi)
        assert abs(numeric - complex(gaussian_h_freq(delta, detuning, omega))) < 1e-9

    def test_rejects_non_positive_width(self):
        """Test that a zero width is rejected."""
        with pytest.raises(DomainError):
            gaussian_h(0.0, 0.0, 0.0)


class TestWavePacket:
    """Test Hermite-Gauss wavepackets and their closed forms."""

    def test_hermite_gauss_orthonormal(self):
        """Test that orders 0 and 1 are orthonormal."""
        delta = 1.2
        norm1 = quad_real(lambda t: float(hermite_gauss(1, delta, t)) ** 2, -math.inf, math.inf)
        cross = quad_real(lambda t: float(hermite_gauss(0, delta, t) * hermite_gauss(1, delta, t)), -math.inf, math.inf)
        assert norm1 == pytest.approx(1.0, abs=1e-9)
        assert abs(cross) < 1e-12

    def test_packet_matches_hermite_gauss(self):
        """Test that a centred packet without carrier is the Hermite-Gauss function."""
        t = np.linspace(-3, 3, 13)
        np.testing.assert_allclose(WavePacket(delta=1.2, order=1)(t), hermite_gauss(1, 1.2, t), atol=1e-14)

    @pytest.mark.parametrize("orders", [(0, 0), (0, 1), (1, 1)])
    def test_overlap_closed_form(self, orders):
        """Test overlaps of displaced packets against quadrature."""
        a = WavePacket(delta=1.0, center=0.0, detuning=0.3, order=orders[0])
        b = WavePacket(delta=1.0, center=0.7, detuning=0.3, order=orders[1])
        numeric = quad_1d(lambda t: np.conj(a(t)) * b(t), -math.inf, math.inf)
        assert abs(a.overlap(b) - numeric) < 1e-9

    @pytest.mark.parametrize("order", [0, 1])
    @pytest.mark.parametrize("x", [-10.0, -2.0, 0.0, 1.5, 6.0])
    def test_causal_filter(self, order, x):
        """Test the causal filter on both erfcx branches."""
        packet = WavePacket(delta=1.3, center=0.4, detuning=0.6, order=order)
        gamma = 1.0
        numeric = quad_1d(lambda t: np.exp(gamma * (t - x)) * packet(t), -math.inf, x)
        assert abs(packet.causal(x, gamma) - numeric) < 1e-9

    def test_causal_filter_vectorized(self):
        """Test that array arguments keep their shape."""
        packet = WavePacket(delta=1.0)
        x = np.linspace(-2, 2, 6).reshape(2, 3)
        values = packet.causal(x, 1.0)
        assert values.shape == (2, 3)
        assert values[1, 2] == pytest.approx(packet.causal(float(x[1, 2]), 1.0))

    def test_interval(self):
        """Test the finite-window filter integral."""
        packet = WavePacket(delta=1.0, center=0.2, detuning=0.1)
        lo, hi, ref = -0.5, 0.8, 1.5
        numeric = quad_1d(lambda t: np.exp(t - ref) * packet(t), lo, hi)
        assert abs(complex(packet.interval(lo, hi, ref, 1.0)) - numeric) < 1e-10

    def test_interval_from_minus_infinity(self):
        """Test that lo = -inf reduces to the causal filter."""
        packet = WavePacket(delta=1.0)
        value = complex(packet.interval(-math.inf, 0.3, 0.3, 1.0))
        assert value == pytest.approx(packet.causal(0.3, 1.0))

    def test_invalid_packets(self):
        """Test width and order validation."""
        with pytest.raises(DomainError):
            WavePacket(delta=-1.0)
        with pytest.raises(UnsupportedError):
            WavePacket(delta=1.0, order=2)


class TestGramMatrix:
    """Test overlap matrices and permanents."""

    def test_permanent(self):
        """Test small permanents."""
        assert permanent(np.array([[1, 2], [3, 4]])) == pytest.approx(10.0)
        assert permanent(np.eye(3)) == pytest.approx(1.0)
        assert permanent(np.ones((3, 3))) == pytest.approx(6.0)

    def test_permanent_size_limit(self):
        """Test that large matrices are rejected."""
        with pytest.raises(UnsupportedError):
            permanent(np.eye(9))

    def test_identical_packets(self):
        """Test that two photons in one mode normalize with 1/sqrt(2)."""
        packet = WavePacket(delta=1.0)
        assert gram_normalization([packet, packet]) == pytest.approx(1.0 / math.sqrt(2.0))

    def test_separated_packets(self):
        """Test that distant packets are orthogonal."""
        packets = [WavePacket(delta=1.0, center=c) for c in (0.0, 20.0, 40.0)]
        np.testing.assert_allclose(gram_matrix(packets).entries, np.eye(3), atol=1e-12)
        assert gram_normalization(packets) == pytest.approx(1.0)

    def test_invalid_gram(self):
        """Test that a matrix with non-unit diagonal is rejected."""
        with pytest.raises(IllConditionedInputError):
            GramMatrix(entries=np.array([[2.0, 0.0], [0.0, 1.0]])).validate()


class TestAmplitude:
    """Test normalized N-photon amplitudes."""

    @pytest.mark.parametrize("n", [1, 2, 3])
    def test_fock_norm(self, n):
        """Test that Gaussian Fock states are normalized on the ordered simplex."""
        amplitude = build_amplitude(PulseSpec(family=PulseFamily.GAUSSIAN_FOCK, n_photons=n, delta=1.0))
        assert amplitude.norm_factor == pytest.approx(math.sqrt(math.factorial(n)))
        assert amplitude.measured_norm == pytest.approx(1.0, abs=1e-6)

    def test_fock_values(self, fock2):
        """Test that N g is sqrt(2) h(t1) h(t2) for two photons."""
        amplitude = build_amplitude(fock2)
        expected = complex(math.sqrt(2.0) * gaussian_h(1.0, 0.0, 0.3) * gaussian_h(1.0, 0.0, -0.4))
        assert complex(amplitude(0.3, -0.4)) == pytest.approx(expected)

    def test_separated_norm(self, separated2):
        """Test the normalization of separated photons."""
        amplitude = build_amplitude(separated2)
        assert amplitude.measured_norm == pytest.approx(1.0, abs=1e-6)
        assert amplitude.analytic_norm() == pytest.approx(1.0, abs=1e-10)

    @pytest.mark.parametrize("sign", [1, -1])
    def test_hermite_gauss_pair_norm(self, sign):
        """Test the bunched and anti-bunched pairs."""
        spec = PulseSpec(family=PulseFamily.HERMITE_GAUSS_PAIR, n_photons=2, delta=1.0, sign=sign)
        amplitude = build_amplitude(spec)
        assert amplitude.analytic_norm() == pytest.approx(1.0, abs=1e-10)
        assert amplitude.measured_norm == pytest.approx(1.0, abs=1e-6)

    def test_amplitude_is_symmetric(self):
        """Test exchange symmetry of an overlapping separated pair."""
        amplitude = build_amplitude(
            PulseSpec(family=PulseFamily.SEPARATED_GAUSSIANS, n_photons=2, delta=1.0, separation=0.8)
        )
        assert complex(amplitude(0.1, 1.2)) == pytest.approx(complex(amplitude(1.2, 0.1)))

    def test_wrong_time_count(self, fock2):
        """Test that the number of times must match N."""
        with pytest.raises(DomainError):
            build_amplitude(fock2)(0.0)

    def test_hermite_gauss_pair_needs_two_photons(self):
        """Test the family constraint of HermiteGaussPair."""
        with pytest.raises(ValidationError):
            PulseSpec(family=PulseFamily.HERMITE_GAUSS_PAIR, n_photons=3)

    def test_source_modes(self, fock3):
        """Test the wavepackets a source releases."""
        assert len(single_photon_modes(fock3)) == 1
        separated = PulseSpec(family=PulseFamily.SEPARATED_GAUSSIANS, n_photons=3, delta=1.0, separation=5.0)
        assert [packet.center for packet in single_photon_modes(separated)] == [5.0, 10.0, 15.0]
