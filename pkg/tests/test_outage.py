"""Test closed-form outage probabilities."""

import math

import numpy as np
import pytest

from ..exceptions import DegenerateOrderError, DistinctnessError, DomainError
from ..models import RfBackhaul, SicComposition
from ..oracle import (
    QuadSpec,
    exponential_moment_product,
    gg_pointing_density,
    gg_pointing_spec,
    quad_expectation,
    rician_power_density,
)
from ..outage import (
    backhaul_expectation,
    cancellation_factor,
    decode_order_prob,
    exp_expectation,
    joint_cov_second_decoded,
    joint_sic_success,
    joint_u1_first,
    joint_u2_first,
    oma_outage_user,
    oma_reference,
    oma_threshold,
    outage_sum,
    outage_user,
)
from ..scenario import apply_overrides, load_scenario_file, resolve_scenario
from .conftest import SCENARIO_DIR


RELAY_TERMS = (3e-10, 7e-10, 1.2e-9)
RF_LINK = RfBackhaul(omega=3.98, l_b=1e-7, g_b=1000.0, n0=1e-11)


class TestDecodingOrder:
    """Test the decoding-order probabilities."""

    @pytest.mark.parametrize("s_db", [0.0, 0.5, 3.0, 10.0, 25.0, 60.0])
    def test_probabilities_sum_to_one(self, s_db):
        """P(pi_1) + P(pi_2) = 1 exactly."""
        p1, p2 = decode_order_prob(s_db)
        assert p1 + p2 == 1.0
        assert p1 >= 0.5

    def test_equal_split_at_zero(self):
        """s = 0 makes both orders equally likely."""
        assert decode_order_prob(0.0) == (0.5, 0.5)

    def test_ten_db(self):
        """P(pi_1) = q / (1 + q) with q = 10."""
        assert decode_order_prob(10.0)[0] == pytest.approx(10.0 / 11.0, rel=1e-15)


class TestBackhaulExpectation:
    """Test the destination-side expectation in its three variants."""

    def test_zero_argument(self, scenario_factory):
        """A zero argument gives 1 for every backhaul."""
        assert backhaul_expectation(0.0, scenario_factory().backhaul) == 1.0
        assert backhaul_expectation(0.0, RF_LINK, (1e-9,)) == 1.0

    def test_negative_argument(self, scenario_factory):
        """Negative arguments are domain errors."""
        with pytest.raises(DomainError):
            backhaul_expectation(-1.0, scenario_factory().backhaul)

    def test_fso_matches_meijer_g_density(self, scenario_factory):
        """calG agrees with integrating against the Meijer-G form of the density."""
        fso = scenario_factory().backhaul
        a = 0.02 * fso.a0 ** 2
        pdf = gg_pointing_density(fso.alpha, fso.beta, fso.xi, fso.a0)
        reference = quad_expectation(pdf, lambda g: math.exp(-a / (g * g)), gg_pointing_spec(fso.a0))
        assert backhaul_expectation(a, fso) == pytest.approx(reference, rel=1e-6)

    def test_rf_series_matches_quadrature(self, ctx):
        """Without destination interference the Bessel series matches quadrature."""
        for a in (1e-4, 0.01, 0.5):
            series = backhaul_expectation(a, RF_LINK, ctx=ctx, method="series")
            quadrature = backhaul_expectation(a, RF_LINK, ctx=ctx, method="quadrature")
            assert series == pytest.approx(quadrature, rel=1e-6)

    def test_rf_destination_series_matches_quadrature(self, ctx):
        """The incomplete-G partial-fraction series matches the product-form quadrature."""
        dest = (0.5e-9, 1e-9, 2e-9)
        for b in (1e7, 1e8, 5e8):
            series = backhaul_expectation(b, RF_LINK, dest, ctx=ctx, method="series")
            quadrature = backhaul_expectation(b, RF_LINK, dest, ctx=ctx, method="quadrature")
            assert series == pytest.approx(quadrature, rel=1e-6)

    def test_rf_destination_matches_reference_density(self, ctx):
        """Product-form expectation agrees with the noncentral chi-square density."""
        dest = (0.5e-9, 1e-9, 2e-9)
        b = 1e8
        gain = RF_LINK.gain

        def f(kappa):
            fade = gain * kappa
            product = np.prod([fade / (fade + b * t) for t in dest])
            return math.exp(-b * RF_LINK.c_d_rf / kappa) * product

        reference = quad_expectation(rician_power_density(RF_LINK.omega), f, QuadSpec(breakpoints=(1.0,)))
        assert backhaul_expectation(b, RF_LINK, dest, ctx=ctx) == pytest.approx(reference, rel=1e-6)

    def test_duplicate_destination_terms(self, ctx):
        """Coinciding destination terms are rejected."""
        with pytest.raises(DistinctnessError):
            backhaul_expectation(1e8, RF_LINK, (1e-9, 1e-9), ctx=ctx)

    def test_cancellation_factor(self):
        """One term has no cancellation; clustered terms have a lot."""
        assert cancellation_factor([0.7]) == pytest.approx(1.0)
        assert cancellation_factor([1.0, 1.0 + 1e-6, 1.0 + 2e-6]) > 1e5

    def test_auto_falls_back_to_quadrature(self, ctx):
        """Clustered terms are evaluated by quadrature under the auto policy."""
        dest = (1e-9, 1.000001e-9, 1.000002e-9)
        auto = backhaul_expectation(1e8, RF_LINK, dest, ctx=ctx)
        quadrature = backhaul_expectation(1e8, RF_LINK, dest, ctx=ctx, method="quadrature")
        assert auto == quadrature


class TestExponentialExpectation:
    """Test Q(C) = E[exp(-C Y / S)]."""

    def test_zero_multiplier(self, scenario_factory):
        """C = 0 gives 1."""
        assert exp_expectation(scenario_factory(), 1e-8, 0.0) == 1.0

    def test_factorizes_over_fso(self, scenario_factory, ctx):
        """Noise, relay interference and calG factors multiply."""
        scenario = scenario_factory(relay_terms=RELAY_TERMS)
        signal = scenario.pair.base1
        c = 1.5
        fso = scenario.backhaul
        pdf = gg_pointing_density(fso.alpha, fso.beta, fso.xi, fso.a0)
        backhaul = quad_expectation(pdf, lambda g: math.exp(-c * fso.c_d / (signal * g * g)),
                                    gg_pointing_spec(fso.a0))
        expected = (
            math.exp(-c * scenario.relay_noise_w / signal)
            * exponential_moment_product(signal, c, RELAY_TERMS)
            * backhaul
        )
        assert exp_expectation(scenario, signal, c, ctx) == pytest.approx(expected, rel=1e-6)

    @pytest.mark.parametrize("backhaul", ["fso", "rf"])
    def test_noise_free_backhaul(self, scenario_factory, ctx, backhaul):
        """Without destination noise only the relay noise and interference remain."""
        scenario = scenario_factory(backhaul=backhaul, relay_terms=RELAY_TERMS)
        field = "c_d" if backhaul == "fso" else "n0"
        silent = scenario.model_copy(update={"backhaul": scenario.backhaul.model_copy(update={field: 0.0})})
        signal = scenario.pair.base1
        expected = math.exp(-2.0 * scenario.relay_noise_w / signal) * exponential_moment_product(signal, 2.0, RELAY_TERMS)
        assert exp_expectation(silent, signal, 2.0, ctx) == pytest.approx(expected, rel=1e-12)


class TestJointProbabilities:
    """Test the joint decoding-order probabilities."""

    def test_continuous_across_unit_threshold(self, scenario_factory, ctx):
        """The two threshold branches meet at gamma = 1."""
        scenario = scenario_factory(relay_terms=RELAY_TERMS)
        below = joint_u1_first(scenario, 1.0 - 1e-9, ctx)
        above = joint_u1_first(scenario, 1.0 + 1e-9, ctx)
        assert below == pytest.approx(above, abs=1e-6)
        below = joint_u2_first(scenario, 1.0 - 1e-9, ctx)
        above = joint_u2_first(scenario, 1.0 + 1e-9, ctx)
        assert below == pytest.approx(above, abs=1e-6)

    def test_bounded_by_order_probability(self, scenario_factory, ctx):
        """Pr(gamma_u < g, u first) lies in [0, P(u first)] and grows with g."""
        scenario = scenario_factory(relay_terms=RELAY_TERMS)
        p1, p2 = decode_order_prob(scenario.pair.s_db)
        values = [joint_u1_first(scenario, g, ctx) for g in (0.1, 0.5, 0.99, 2.0, 10.0)]
        assert all(0.0 <= v <= p1 for v in values)
        assert values == sorted(values)
        assert 0.0 <= joint_u2_first(scenario, 0.4, ctx) <= p2

    def test_zero_threshold(self, scenario_factory, ctx):
        """No draw falls below a zero threshold."""
        scenario = scenario_factory()
        assert joint_u1_first(scenario, 0.0, ctx) == 0.0
        assert joint_cov_second_decoded(scenario, 2, 0.0, ctx) == pytest.approx(decode_order_prob(10.0)[0])

    def test_sic_success_bounded(self, scenario_factory, ctx):
        """The joint SIC success never exceeds the coverage of the second-decoded user."""
        scenario = scenario_factory(relay_terms=RELAY_TERMS)
        for user in (1, 2):
            gamma = scenario.thresholds.gamma1 if user == 1 else scenario.thresholds.gamma2
            success = joint_sic_success(scenario, user, ctx)
            coverage = joint_cov_second_decoded(scenario, user, gamma, ctx)
            assert 0.0 <= success <= coverage + 1e-12


class TestOutage:
    """Test individual and sum-rate outage."""

    def test_zero_thresholds(self, scenario_factory, ctx):
        """Zero thresholds can never be missed."""
        scenario = scenario_factory(gamma1=0.0, gamma2=0.0, gamma_sum=0.0)
        assert outage_user(scenario, 1, ctx=ctx) == pytest.approx(0.0, abs=1e-12)
        assert outage_user(scenario, 2, ctx=ctx) == pytest.approx(0.0, abs=1e-12)
        assert outage_sum(scenario, ctx) == 0.0

    def test_huge_thresholds(self, scenario_factory, ctx):
        """Unreachable thresholds put both users in outage."""
        scenario = scenario_factory(gamma1=1e9, gamma2=1e9, gamma_sum=1e9)
        assert outage_user(scenario, 1, ctx=ctx) == pytest.approx(1.0, abs=1e-9)
        assert outage_user(scenario, 2, ctx=ctx) == pytest.approx(1.0, abs=1e-9)
        assert outage_sum(scenario, ctx) == pytest.approx(1.0, abs=1e-9)

    def test_decreasing_in_power(self, scenario_factory, ctx):
        """More transmit power never increases the outage."""
        values = [
            outage_user(scenario_factory(relay_terms=RELAY_TERMS, tx_power_w=p), 1, ctx=ctx)
            for p in (0.01, 0.1, 1.0, 10.0)
        ]
        assert all(0.0 <= v <= 1.0 for v in values)
        assert all(later <= earlier + 1e-9 for earlier, later in zip(values, values[1:]))

    def test_product_composition_is_a_probability(self, scenario_factory, ctx):
        """The optional product composition stays in [0, 1]."""
        scenario = scenario_factory(relay_terms=RELAY_TERMS)
        for user in (1, 2):
            value = outage_user(scenario, user, SicComposition.PRODUCT, ctx)
            assert 0.0 <= value <= 1.0

    def test_compositions_agree_without_coupling(self, scenario_factory, ctx):
        """With the other threshold at zero the SIC condition is always met and both compositions coincide."""
        scenario = scenario_factory(relay_terms=RELAY_TERMS, gamma2=0.0)
        exact = outage_user(scenario, 1, SicComposition.EXACT, ctx)
        product = outage_user(scenario, 1, SicComposition.PRODUCT, ctx)
        assert exact == pytest.approx(product, abs=1e-10)

    def test_degenerate_order(self, scenario_factory, ctx):
        """A vanishing decoding order is reported, not silently divided by."""
        scenario = scenario_factory()
        pair = scenario.pair.model_copy(update={"s_db": 4000.0})
        degenerate = scenario.model_copy(update={"pair": pair})
        with pytest.raises(DegenerateOrderError):
            outage_user(degenerate, 1, ctx=ctx)

    def test_missing_threshold(self, scenario_factory, ctx):
        """Outage needs both individual thresholds."""
        with pytest.raises(DomainError):
            outage_user(scenario_factory(gamma2=None), 1, ctx=ctx)

    def test_sum_outage_at_zero_backoff(self, scenario_factory, ctx):
        """s = 0 uses the symmetric perturbation and joins the curve continuously."""
        at_zero = outage_sum(scenario_factory(s_db=0.0, relay_terms=RELAY_TERMS), ctx)
        nearby = outage_sum(scenario_factory(s_db=0.05, relay_terms=RELAY_TERMS), ctx)
        assert 0.0 < at_zero < 1.0
        assert at_zero == pytest.approx(nearby, abs=1e-3)

    def test_sum_outage_rf_with_destination(self, scenario_factory, ctx):
        """Destination interference can only increase the sum-rate outage."""
        plain = outage_sum(scenario_factory(backhaul="rf", relay_terms=RELAY_TERMS), ctx)
        interfered = outage_sum(
            scenario_factory(backhaul="rf", relay_terms=RELAY_TERMS, dest_terms=(2e-9, 5e-9)), ctx,
        )
        assert interfered >= plain - 1e-9


class TestOma:
    """Test the OMA baseline."""

    def test_threshold_mapping(self):
        """Half-slot users need (1 + g)^2 - 1."""
        assert oma_threshold(1.0) == 3.0
        assert oma_threshold(0.4) == pytest.approx(0.96)

    def test_oma_outage_closed_form(self, scenario_factory, ctx):
        """OMA outage is 1 - Q(gamma_oma) at the full-power signal scale."""
        scenario = scenario_factory(relay_terms=RELAY_TERMS)
        signal = scenario.pair.l2 * scenario.pair.tx_power_w
        expected = 1.0 - exp_expectation(scenario, signal, oma_threshold(0.4), ctx)
        assert oma_outage_user(scenario, 2, ctx) == pytest.approx(expected, rel=1e-12)

    def test_reference_without_simulation(self, scenario_factory, ctx):
        """Without a Monte Carlo run the OMA sum outage is unavailable."""
        reference = oma_reference(scenario_factory(), ctx=ctx)
        assert reference.gamma_oma1 == pytest.approx(oma_threshold(0.8))
        assert reference.sum_outage is None
        assert 0.0 <= reference.outage_user1 <= 1.0


class TestPowerAndBackoffBehavior:
    """Test the outage floor, the best back-off step and the user exchange symmetry."""

    @pytest.mark.parametrize("gamma", [1.5, 3.0])
    def test_interference_floor_at_high_power(self, fso_document, ctx, gamma):
        """With both thresholds above one, user 1's outage saturates at a nonzero floor."""
        def at_power(p_dbm):
            document = apply_overrides(fso_document, {
                "users.tx_power_dbm": p_dbm,
                "users.s_db": 5.0,
                "thresholds.gamma1": gamma,
                "thresholds.gamma2": gamma,
            })
            return outage_user(resolve_scenario(document), 1, ctx=ctx)

        q = 10.0 ** 0.5
        floor = gamma / (q + gamma) - 1.0 / (1.0 + q * gamma)
        high, higher = at_power(50.0), at_power(60.0)
        assert higher > 1e-6
        assert higher == pytest.approx(high, abs=1e-3)
        assert higher == pytest.approx(floor, abs=1e-3)

    def test_sum_outage_has_interior_best_backoff(self, ctx):
        """Sum-rate outage over the back-off grid is lowest strictly inside it."""
        document = load_scenario_file(SCENARIO_DIR / "fso_sum_outage_backoff_sweep.toml")
        grid = document.sweep.grid
        values = [
            outage_sum(resolve_scenario(apply_overrides(document, {"users.s_db": s})), ctx)
            for s in grid
        ]
        best = int(np.argmin(values))
        assert 0 < best < len(grid) - 1
        assert 5.0 <= grid[best] <= 25.0
        assert values[0] >= 2.0 * values[best]
        assert values[-1] >= 2.0 * values[best]

    @pytest.mark.parametrize("backhaul,dest_terms", [("fso", ()), ("rf", ()), ("rf", (2e-9, 5e-9))])
    def test_exchanging_users_exchanges_outage(self, swapped_pair, ctx, backhaul, dest_terms):
        """Negating s with the thresholds exchanged maps each user's outage onto the other's."""
        original, mirrored = swapped_pair(
            10.0, backhaul=backhaul, relay_terms=RELAY_TERMS, dest_terms=dest_terms,
        )
        for user in (1, 2):
            exchanged = outage_user(mirrored, 3 - user, ctx=ctx)
            assert exchanged == pytest.approx(outage_user(original, user, ctx=ctx), rel=1e-6, abs=1e-12)
        assert outage_sum(mirrored, ctx) == pytest.approx(outage_sum(original, ctx), rel=1e-6, abs=1e-12)
