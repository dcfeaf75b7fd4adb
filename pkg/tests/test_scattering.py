"""
Tests for symbolic scattering elements of the photon subtractor.
"""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from physics.numerics import quad_1d
from physics.scattering import (
    FinalState,
    Kernel,
    KernelTerm,
    compositions,
    eval_element,
    green_fn,
    identity_element,
    is_interleaved,
    mpk_expand,
    scatter_element,
    sigma1,
    sigma1_freq,
)
from utils.errors import DomainError, ScatteringMisuseError, UnsupportedError


def interleaved_times(gaps):
    """Cumulative sums of positive gaps, split into (t, t')."""
    points = np.cumsum(gaps)
    return list(points[0::2]), list(points[1::2])


class TestSinglePhotonKernels:
    """Test single-photon kernels in time and frequency."""

    def test_time_kernels(self):
        """Test delta weights and smooth parts."""
        assert sigma1(Kernel.SUBTRACT, 0.5) == (0.0, pytest.approx(-math.exp(-0.5)))
        weight, smooth = sigma1(Kernel.KEEP, 0.0, gamma=2.0)
        assert weight == 1.0
        assert smooth == pytest.approx(-2.0)
        assert sigma1(Kernel.KEEP, 0.1)[0] == 0.0

    def test_negative_delay(self):
        """Test that outputs cannot precede inputs."""
        with pytest.raises(DomainError):
            sigma1(Kernel.SUBTRACT, -0.1)

    def test_two_port_unitarity(self):
        """Test |subtract|^2 + |keep|^2 = 1 across frequencies."""
        omega = np.linspace(-20, 20, 50)
        total = np.abs(sigma1_freq(Kernel.SUBTRACT, omega, 1.3)) ** 2 + np.abs(sigma1_freq(Kernel.KEEP, omega, 1.3)) ** 2
        np.testing.assert_allclose(total, 1.0, atol=1e-12)

    @pytest.mark.parametrize("omega", [-3.0, -0.5, 0.0, 0.7, 4.0])
    def test_fourier_consistency(self, omega):
        """Test that the smooth time kernel transforms into the Lorentzian."""
        gamma = 1.0
        smooth = quad_1d(lambda tau: -gamma * math.exp(-gamma * tau) * np.exp(-1j * omega * tau), 0.0, math.inf)
        assert abs(smooth - complex(sigma1_freq(Kernel.SUBTRACT, omega, gamma))) < 1e-8
        assert abs(1.0 + smooth - complex(sigma1_freq(Kernel.KEEP, omega, gamma))) < 1e-8


class TestGreenFunction:
    """Test the k-photon Green's function."""

    def test_interleaving(self):
        """Test the interleaved ordering check."""
        assert is_interleaved([0.0, 1.0], [0.5, 1.5])
        assert not is_interleaved([0.0, 1.0], [1.2, 1.5])

    def test_value_on_domain(self):
        """Test the exponential on the interleaved domain."""
        value = green_fn(2, FinalState.STATE1, [0.0, 1.0], [0.5, 1.5], gamma=2.0)
        assert value == pytest.approx(4.0 * math.exp(2.0 * (0.0 - 0.5 + 1.0 - 1.5)))

    def test_zero_off_domain(self):
        """Test that non-interleaved times give zero."""
        assert green_fn(2, FinalState.STATE2, [0.0, 1.0], [1.2, 1.5]) == 0j

    def test_unsorted(self):
        """Test that unsorted times are rejected."""
        with pytest.raises(DomainError):
            green_fn(2, FinalState.STATE1, [1.0, 0.0], [0.5, 1.5])


class TestTermStructure:
    """Test the kernel-term expansion of the scattering elements."""

    def test_compositions(self):
        """Test ordered compositions."""
        assert compositions(3) == [(1, 1, 1), (1, 2), (2, 1), (3,)]
        assert [len(compositions(n)) for n in range(1, 5)] == [1, 2, 4, 8]

    @pytest.mark.parametrize(
        "n, j, count",
        [(1, 0, 1), (1, 1, 1), (2, 0, 2), (2, 1, 1), (2, 2, 2), (3, 0, 4), (3, 1, 1), (3, 2, 2), (3, 3, 4)],
    )
    def test_term_counts(self, n, j, count):
        """Test one term per composition of the interacting photons."""
        assert len(mpk_expand(n, j)) == count

    def test_first_photon_subtracted(self):
        """Test Sigma_1^2: subtract photon 0, photon 1 passes through."""
        (term,) = mpk_expand(2, 1, gamma=1.5)
        assert term.coefficient == pytest.approx(-1.5)
        assert term.delta_pairs == ((1, 1),)
        assert term.exp_pairs == ((0, 0),)
        assert not term.keep_pairs

    def test_no_subtraction_two_photons(self):
        """Test Sigma_0^2: product of keep kernels plus the two-photon kernel."""
        product, bound = mpk_expand(2, 0)
        assert product.coefficient == pytest.approx(1.0)
        assert product.exp_pairs == ((0, 0), (1, 1))
        assert product.keep_pairs == frozenset({0, 1})
        assert bound.coefficient == pytest.approx(-1.0)
        assert bound.delta_pairs == ((0, 1),)
        assert bound.exp_pairs == ((0, 1),)

    def test_second_photon_subtracted(self):
        """Test Sigma_2^2: photon 0 kept, photon 1 subtracted."""
        product, bound = mpk_expand(2, 2)
        assert product.keep_pairs == frozenset({0})
        assert bound.delta_pairs == ((0, 1),)

    def test_expansion_splits_keep_factors(self):
        """Test that two keep factors give four pure terms, one of them the identity."""
        product, _ = mpk_expand(2, 0)
        expanded = product.expand()
        assert len(expanded) == 4
        assert all(term.is_expanded for term in expanded)
        identity = [term for term in expanded if not term.exp_pairs]
        assert len(identity) == 1
        assert identity[0].delta_pairs == ((0, 0), (1, 1))
        assert identity[0].coefficient == pytest.approx(1.0)

    def test_identity_element(self):
        """Test the pass-through element."""
        (term,) = identity_element(3).expanded()
        assert term.delta_pairs == ((0, 0), (1, 1), (2, 2))

    def test_limits(self):
        """Test photon-number and outcome limits."""
        with pytest.raises(UnsupportedError):
            mpk_expand(4, 0)
        with pytest.raises(DomainError):
            mpk_expand(2, 3)

    def test_sectors(self):
        """Test the distinct delta supports of Sigma_0^2."""
        sectors = scatter_element(2, 0).sectors()
        assert frozenset() in sectors
        assert frozenset({(0, 1)}) in sectors
        assert frozenset({(0, 0), (1, 1)}) in sectors


class TestEvaluation:
    """Test sector-wise evaluation of elements."""

    @settings(max_examples=50, deadline=None)
    @given(st.lists(st.floats(min_value=0.01, max_value=2.0), min_size=4, max_size=4), st.sampled_from([0, 2]))
    def test_smooth_sector_is_green_function(self, gaps, j):
        """Test that the delta-free part of Sigma_j^2 is the two-photon Green's function."""
        t, tp = interleaved_times(gaps)
        value = eval_element(scatter_element(2, j), t, tp)
        assert value == pytest.approx(green_fn(2, FinalState.STATE1, t, tp), rel=1e-12, abs=1e-15)

    @settings(max_examples=50, deadline=None)
    @given(st.lists(st.floats(min_value=0.01, max_value=2.0), min_size=6, max_size=6))
    def test_three_photon_smooth_sector(self, gaps):
        """Test that the delta-free part of Sigma_0^3 is minus the three-photon Green's function."""
        t, tp = interleaved_times(gaps)
        value = eval_element(scatter_element(3, 0), t, tp)
        assert value == pytest.approx(-green_fn(3, FinalState.STATE1, t, tp), rel=1e-12, abs=1e-15)

    def test_collapsed_sector(self):
        """Test the two-photon kernel on its delta support t'_0 = t_1."""
        t, tp = [0.0, 0.6], [0.6, 1.4]
        value = eval_element(scatter_element(2, 0), t, tp, sector=[(0, 1)])
        assert value == pytest.approx(-math.exp(0.0 - 1.4))

    def test_outside_domain(self):
        """Test that non-interleaved coordinates give zero."""
        assert eval_element(scatter_element(2, 0), [0.0, 1.0], [1.2, 1.5]) == 0j

    def test_undeclared_delta(self):
        """Test that sitting on an undeclared delta support is rejected."""
        with pytest.raises(ScatteringMisuseError):
            eval_element(scatter_element(2, 0), [0.0, 0.6], [0.6, 1.4])

    def test_unsatisfied_declaration(self):
        """Test that a declared delta must hold."""
        with pytest.raises(ScatteringMisuseError):
            eval_element(scatter_element(2, 0), [0.0, 0.5], [0.6, 1.4], sector=[(0, 1)])

    def test_smooth_value(self):
        """Test a hand-built kernel term."""
        term = KernelTerm(coefficient=2.0, exp_rate=1.0, exp_pairs=((0, 1),))
        assert term.smooth_value([0.0, 0.5], [0.2, 1.0]) == pytest.approx(2.0 * math.exp(-1.0))


GAMMA = 1.3


def keep_factor(i):
    """delta(t'_i - t_i) - gamma exp(-gamma (t'_i - t_i)) as (value, deltas) alternatives."""
    return [
        (lambda t, tp: 1.0, frozenset({(i, i)})),
        (lambda t, tp: -GAMMA * math.exp(-GAMMA * (tp[i] - t[i])), frozenset()),
    ]


def subtract_factor(i):
    """-gamma exp(-gamma (t'_i - t_i))."""
    return [(lambda t, tp: -GAMMA * math.exp(-GAMMA * (tp[i] - t[i])), frozenset())]


def delta(out, inp):
    """delta(t_inp - t'_out)."""
    return [(lambda t, tp: 1.0, frozenset({(out, inp)}))]


def decay(inp, out, scale=1.0):
    """scale * exp(gamma (t_inp - t'_out))."""
    return [(lambda t, tp: scale * math.exp(GAMMA * (t[inp] - tp[out])), frozenset())]


def product(*factors):
    """Distribute a product of factors into (value, deltas) terms."""
    terms = [(lambda t, tp: 1.0, frozenset())]
    for factor in factors:
        terms = [
            (lambda t, tp, f=f, g=g: f(t, tp) * g(t, tp), a | b)
            for f, a in terms
            for g, b in factor
        ]
    return terms


# Closed forms of the two- and three-photon elements, 0-based photon indices
CLOSED_FORMS = {
    (2, 1): product(subtract_factor(0), delta(1, 1)),
    (2, 2): product(keep_factor(0), subtract_factor(1)) + product(delta(0, 1), decay(0, 1, -GAMMA)),
    (2, 0): product(keep_factor(0), keep_factor(1)) + product(delta(0, 1), decay(0, 1, -GAMMA)),
    (3, 1): product(subtract_factor(0), delta(1, 1), delta(2, 2)),
    (3, 2): product(keep_factor(0), subtract_factor(1), delta(2, 2))
    + product(delta(0, 1), delta(2, 2), decay(0, 1, -GAMMA)),
    (3, 3): product(keep_factor(0), keep_factor(1), subtract_factor(2))
    + product(delta(0, 1), subtract_factor(2), decay(0, 1, -GAMMA))
    + product(keep_factor(0), delta(1, 2), decay(1, 2, -GAMMA))
    + product(delta(0, 1), delta(1, 2), decay(0, 2, -GAMMA)),
    (3, 0): product(keep_factor(0), keep_factor(1), keep_factor(2))
    + product(delta(0, 1), keep_factor(2), decay(0, 1, -GAMMA))
    + product(keep_factor(0), delta(1, 2), decay(1, 2, -GAMMA))
    + product(delta(0, 1), delta(1, 2), decay(0, 2, -GAMMA)),
}


def admissible_times(rng, n, sector):
    """Random interleaved (t, t') satisfying exactly the deltas of sector."""
    merged = np.sort(rng.uniform(0.0, 4.0, size=2 * n))
    # (i, i) ties t'_i to t_i; (o, o + 1) ties t_{o+1} to t'_o; both are neighbours in merged
    for out, inp in sorted(sector, key=lambda pair: 2 * pair[0] + (pair[1] - pair[0])):
        earlier, later = (2 * out, 2 * out + 1) if out == inp else (2 * out + 1, 2 * out + 2)
        merged[later] = merged[earlier]
    return list(merged[0::2]), list(merged[1::2])


class TestClosedForms:
    """Test expanded elements against the written-out two- and three-photon closed forms."""

    @pytest.mark.parametrize("n, j", sorted(CLOSED_FORMS))
    def test_delta_sectors(self, n, j):
        """Test that the expansion has the closed form's delta sectors."""
        expected = {deltas for _, deltas in CLOSED_FORMS[(n, j)]}
        assert set(scatter_element(n, j, GAMMA).sectors()) == expected

    @pytest.mark.parametrize("n, j", sorted(CLOSED_FORMS))
    def test_values_in_every_sector(self, n, j):
        """Test every sector at 100 admissible time tuples."""
        element = scatter_element(n, j, GAMMA)
        rng = np.random.default_rng(1000 * n + j)
        for sector in {deltas for _, deltas in CLOSED_FORMS[(n, j)]}:
            for _ in range(100):
                t, tp = admissible_times(rng, n, sector)
                expected = sum(value(t, tp) for value, deltas in CLOSED_FORMS[(n, j)] if deltas == sector)
                assert eval_element(element, t, tp, sector=sector) == pytest.approx(expected, abs=1e-12)
