"""
Tests for quadrature, RK4 propagation and random streams.
"""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from physics.numerics import (
    evolve_nonunitary,
    hermite_poly,
    quad_1d,
    quad_chains,
    quad_real,
    quad_simplex,
    rk4_step,
    rng_stream,
)
from utils.errors import DomainError, NumericalInstabilityError, UnsupportedDimensionError


class TestQuadrature:
    """Test adaptive 1-D quadrature."""

    def test_gaussian_over_real_line(self):
        """Test the Gaussian integral with infinite limits."""
        value = quad_real(lambda x: math.exp(-x * x), -math.inf, math.inf)
        assert value == pytest.approx(math.sqrt(math.pi), abs=1e-9)

    def test_reversed_and_empty_limits(self):
        """Test that swapped limits flip the sign and equal limits give zero."""
        forward = quad_real(lambda x: x * x, 0.0, 2.0)
        assert forward == pytest.approx(8.0 / 3.0)
        assert quad_real(lambda x: x * x, 2.0, 0.0) == pytest.approx(-forward)
        assert quad_real(lambda x: x * x, 1.0, 1.0) == 0.0

    def test_complex_integrand(self):
        """Test the Fourier transform of a Gaussian at unit frequency."""
        value = quad_1d(lambda x: np.exp(1j * x - x * x), -math.inf, math.inf)
        expected = math.sqrt(math.pi) * math.exp(-0.25)
        assert value.real == pytest.approx(expected, abs=1e-9)
        assert abs(value.imag) < 1e-9


class TestOrderedCubature:
    """Test integration over ordered chains of variables."""

    @pytest.mark.parametrize("n", [1, 2, 3])
    def test_simplex_volume(self, n):
        """Test that the unit ordered simplex has volume 1/n!."""
        value = quad_simplex(lambda *t: np.ones_like(t[0]), n, (0.0, 1.0), complex_valued=False)
        assert value == pytest.approx(1.0 / math.factorial(n), rel=1e-8)

    def test_symmetric_integrand_is_box_over_factorial(self):
        """Test a symmetric product over the ordered simplex."""
        value = quad_simplex(lambda a, b, c: a * b * c, 3, (0.0, 1.0), complex_valued=False)
        assert value == pytest.approx(0.125 / 6.0, rel=1e-7)

    def test_product_of_chains(self):
        """Test two disjoint one-variable chains."""
        value = quad_chains(lambda u, v: u * v, [(0.0, 1.0, 1), (1.0, 2.0, 1)], complex_valued=False)
        assert value == pytest.approx(0.5 * 1.5, rel=1e-8)

    def test_complex_result(self):
        """Test that real and imaginary parts are integrated together."""
        value = quad_chains(lambda u: np.exp(1j * u), [(0.0, math.pi, 1)])
        assert value.real == pytest.approx(0.0, abs=1e-9)
        assert value.imag == pytest.approx(2.0, abs=1e-9)

    def test_empty_chain_gives_zero(self):
        """Test that a chain with hi <= lo has no volume."""
        assert quad_chains(lambda u: np.ones_like(u), [(1.0, 1.0, 1)], complex_valued=False) == 0.0

    def test_dimension_limit(self):
        """Test that too many ordered variables are rejected."""
        with pytest.raises(UnsupportedDimensionError):
            quad_simplex(lambda *t: np.ones_like(t[0]), 5, (0.0, 1.0))

    def test_simplex_rejects_zero_dimension(self):
        """Test that the simplex needs at least one variable."""
        with pytest.raises(DomainError):
            quad_simplex(lambda: 1.0, 0, (0.0, 1.0))

    @settings(max_examples=20, deadline=None)
    @given(st.floats(min_value=-5.0, max_value=5.0), st.floats(min_value=0.1, max_value=4.0))
    def test_triangle_area(self, start, width):
        """Test the ordered two-variable volume of any window."""
        value = quad_simplex(lambda a, b: np.ones_like(a), 2, (start, start + width), complex_valued=False)
        assert value == pytest.approx(width * width / 2.0, rel=1e-8)


class TestHermite:
    """Test Hermite polynomials."""

    def test_low_orders(self):
        """Test H_0..H_2 at a sample point."""
        assert hermite_poly(0, 0.7) == pytest.approx(1.0)
        assert hermite_poly(1, 0.7) == pytest.approx(1.4)
        assert hermite_poly(2, 0.7) == pytest.approx(4 * 0.49 - 2)

    def test_order_range(self):
        """Test that orders outside 0..10 are rejected."""
        with pytest.raises(DomainError):
            hermite_poly(11, 0.0)


class TestPropagation:
    """Test RK4 evolution under non-Hermitian generators."""

    def test_phase_rotation(self):
        """Test that a diagonal Hamiltonian produces pure phases."""
        energies = np.array([0.5, -1.0])
        state = np.array([1.0, 1.0], dtype=complex) / math.sqrt(2)
        result = evolve_nonunitary(state, lambda t, psi: energies * psi, 0.0, 2.0, 0.01)
        np.testing.assert_allclose(result, state * np.exp(-2j * energies), atol=1e-9)

    def test_decay(self):
        """Test that H_eff = -i/2 gives norm^2 = exp(-t)."""
        result = evolve_nonunitary(np.array([1.0 + 0j]), lambda t, psi: -0.5j * psi, 0.0, 3.0, 0.01)
        assert abs(result[0]) ** 2 == pytest.approx(math.exp(-3.0), rel=1e-9)

    def test_single_step_matches_exponential(self):
        """Test one RK4 step against the exact exponential."""
        h = 0.1
        result = rk4_step(lambda t, psi: 2.0 * psi, 0.0, np.array([1.0 + 0j]), h)
        assert result[0] == pytest.approx(np.exp(-2j * h), abs=1e-5)

    def test_columns_evolve_independently(self):
        """Test that a matrix of states evolves column by column."""
        states = np.eye(2, dtype=complex)
        result = evolve_nonunitary(states, lambda t, psi: np.array([[1.0], [2.0]]) * psi, 0.0, 1.0, 0.05)
        np.testing.assert_allclose(np.diag(result), np.exp(-1j * np.array([1.0, 2.0])), atol=1e-5)

    def test_step_must_divide_interval(self):
        """Test that a step not dividing the interval is rejected."""
        with pytest.raises(DomainError):
            evolve_nonunitary(np.array([1.0 + 0j]), lambda t, psi: psi, 0.0, 1.0, 0.3)

    def test_non_finite_state(self):
        """Test that NaN in the state is reported."""
        with pytest.raises(NumericalInstabilityError):
            evolve_nonunitary(np.array([1.0 + 0j]), lambda t, psi: psi * np.nan, 0.0, 0.1, 0.05)


class TestRandomStreams:
    """Test seeded PCG64 streams."""

    def test_reproducible(self):
        """Test that the same seed and stream repeat their draws."""
        first = rng_stream(42, 3).uniform(size=5)
        second = rng_stream(42, 3).uniform(size=5)
        np.testing.assert_array_equal(first, second)

    def test_streams_differ(self):
        """Test that different stream ids give different draws."""
        assert not np.array_equal(rng_stream(42, 0).uniform(size=5), rng_stream(42, 1).uniform(size=5))

    def test_range(self):
        """Test that seeds outside the unsigned 64-bit range are rejected."""
        with pytest.raises(DomainError):
            rng_stream(-1)
        with pytest.raises(DomainError):
            rng_stream(0, 2**64)
