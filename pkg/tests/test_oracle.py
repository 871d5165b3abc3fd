"""Test the brute-force reference evaluators."""

import math

import pytest

from ..exceptions import OracleError
from ..oracle import (
    QuadSpec,
    exponential_moment_product,
    exponential_pdf,
    gg_pointing_density,
    gg_pointing_spec,
    nested_expectation,
    quad_expectation,
    rician_power_density,
)


class TestQuadExpectation:
    """Test one-dimensional reference expectations."""

    def test_exponential_moments(self):
        """Unit-mean exponential: E[h] = 1 and E[h^2] = 2."""
        assert quad_expectation(exponential_pdf, lambda h: h) == pytest.approx(1.0, rel=1e-10)
        assert quad_expectation(exponential_pdf, lambda h: h * h) == pytest.approx(2.0, rel=1e-10)

    def test_rejects_unnormalized_density(self):
        """A density with mass 2 fails the self-check."""
        with pytest.raises(OracleError):
            quad_expectation(lambda x: 2.0 * math.exp(-x), lambda x: 1.0)

    def test_finite_interval(self):
        """Finite domains are integrated without the mapping."""
        spec = QuadSpec(lower=0.0, upper=2.0)
        assert not spec.semi_infinite
        assert quad_expectation(lambda x: 0.5, lambda x: x, spec) == pytest.approx(1.0, rel=1e-12)

    def test_rician_density(self):
        """The noncentral chi-square form has unit mass and unit mean; Omega = 0 is exponential."""
        pdf = rician_power_density(3.98)
        assert quad_expectation(pdf, lambda k: k, QuadSpec(breakpoints=(1.0,))) == pytest.approx(1.0, rel=1e-8)
        assert rician_power_density(0.0)(0.7) == pytest.approx(math.exp(-0.7))

    def test_meijer_g_density_mean(self):
        """The pointing-error density has mean A0 xi^2 / (1 + xi^2)."""
        a0 = 3.47e-3
        pdf = gg_pointing_density(4.0, 2.0, 2.0, a0)
        mean = quad_expectation(pdf, lambda g: g, gg_pointing_spec(a0))
        assert mean == pytest.approx(a0 * 4.0 / 5.0, rel=1e-6)


class TestNestedExpectation:
    """Test tensor-product reference expectations."""

    def test_separable_product(self):
        """E[exp(-c h1 - d h2)] = 1 / ((1 + c)(1 + d))."""
        c, d = 0.4, 2.5
        value = nested_expectation(2, lambda h1, h2: math.exp(-c * h1 - d * h2))
        assert value == pytest.approx(1.0 / ((1.0 + c) * (1.0 + d)), rel=1e-8)

    def test_matches_moment_product(self):
        """Two interferers: brute force against the closed product."""
        signal, c, terms = 2e-8, 1.3, (5e-9, 1.4e-8)
        value = nested_expectation(
            2, lambda h1, h2: math.exp(-c * (terms[0] * h1 + terms[1] * h2) / signal),
        )
        assert value == pytest.approx(exponential_moment_product(signal, c, terms), rel=1e-8)

    def test_three_dimensions(self):
        """E[h1 h2 h3] = 1."""
        value = nested_expectation(3, lambda a, b, c: a * b * c, spec=QuadSpec(rel_tol=1e-7, abs_tol=1e-10))
        assert value == pytest.approx(1.0, rel=1e-5)

    def test_dimension_limits(self):
        """More than three dimensions, or mismatched densities, are refused."""
        with pytest.raises(OracleError):
            nested_expectation(4, lambda *xs: 1.0)
        with pytest.raises(OracleError):
            nested_expectation(2, lambda a, b: 1.0, densities=[exponential_pdf])

    def test_empty_moment_product(self):
        """No interferers leaves the product at 1."""
        assert exponential_moment_product(1e-8, 2.0, ()) == 1.0
