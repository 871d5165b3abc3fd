"""Test the Monte Carlo simulator."""

import numpy as np
import pytest

from ..channel import ChannelDraw, sample_channels
from ..ergodic import avg_rate_user, avg_sum_rate
from ..mc import (
    RunningMoments,
    block_generator,
    outage_samples,
    simulate_ergodic,
    simulate_outage,
    sinr_realization,
)
from ..models import McRun, Metric
from ..outage import (
    decode_order_prob,
    joint_cov_second_decoded,
    joint_u1_first,
    joint_u2_first,
    oma_outage_user,
    oma_reference,
    outage_sum,
    outage_user,
)
from ..scenario import apply_overrides, load_scenario_file, resolve_scenario
from ..sweep import CLOSED_FORMS
from .conftest import SCENARIO_DIR


RELAY_TERMS = (3e-10, 7e-10, 1.2e-9)
POWER_GRID = (0.0, 10.0, 20.0, 30.0, 40.0)
WIDE_POWER_GRID = (0.0, 15.0, 30.0, 45.0, 60.0)
OUTAGES = (Metric.OUTAGE_USER1, Metric.OUTAGE_USER2, Metric.OUTAGE_SUM)
RATES = (Metric.RATE_USER1, Metric.RATE_USER2, Metric.SUM_RATE)


def assert_agrees(estimate, closed, sigmas=4.0):
    """Closed form within `sigmas` standard errors, with a one-event floor for frequencies."""
    floor = 1.0 / estimate.n
    assert estimate.agrees_with(closed, sigmas, floor), (
        f"MC {estimate.mean:.6g} +/- {estimate.std_error:.2g} vs closed form {closed:.6g}"
    )


class TestSinrRealization:
    """Test per-draw SINRs."""

    def test_tie_goes_to_user1(self, scenario_factory):
        """Equal received powers decode user 1 first."""
        scenario = scenario_factory()
        pair = scenario.pair
        draw = ChannelDraw(
            h1=np.array([pair.base2]),
            h2=np.array([pair.base1]),
            relay=np.empty((1, 0)),
            dest=np.empty((1, 0)),
            g_tilde=np.array([1e-3]),
        )
        sinr = sinr_realization(draw, scenario)
        assert bool(sinr.user1_first[0])

    def test_sum_identity(self, scenario_factory):
        """(1 + gamma_first)(1 + gamma_second) = 1 + gamma_sum on every draw."""
        scenario = scenario_factory(relay_terms=RELAY_TERMS)
        draw = sample_channels(np.random.default_rng(5), scenario, 5000)
        sinr = sinr_realization(draw, scenario)
        product = (1.0 + sinr.gamma_first) * (1.0 + sinr.gamma_second)
        np.testing.assert_allclose(product, 1.0 + sinr.gamma_sum, rtol=1e-12)

    def test_user_views(self, scenario_factory):
        """gamma_user1 picks the first or second SINR according to the order."""
        scenario = scenario_factory()
        draw = sample_channels(np.random.default_rng(6), scenario, 1000)
        sinr = sinr_realization(draw, scenario)
        first = sinr.user1_first
        np.testing.assert_array_equal(sinr.gamma_user1[first], sinr.gamma_first[first])
        np.testing.assert_array_equal(sinr.gamma_user1[~first], sinr.gamma_second[~first])
        np.testing.assert_array_equal(sinr.gamma_user2[first], sinr.gamma_second[first])

    def test_events_follow_thresholds(self, scenario_factory):
        """Only events whose thresholds are set are emitted."""
        scenario = scenario_factory(gamma_sum=None)
        draw = sample_channels(np.random.default_rng(7), scenario, 100)
        samples = outage_samples(sinr_realization(draw, scenario), scenario)
        assert Metric.OUTAGE_USER1 in samples
        assert Metric.OUTAGE_SUM not in samples
        assert Metric.OMA_OUTAGE_SUM not in samples


class TestStreamingStatistics:
    """Test block merging and standard errors."""

    def test_merge_matches_single_pass(self):
        """Pairwise merging of blocks reproduces the one-pass mean and variance."""
        values = np.random.default_rng(8).normal(3.0, 2.0, 10007)
        moments = RunningMoments()
        for block in np.array_split(values, 7):
            moments.add_block(block)
        estimate = moments.estimate()
        assert estimate.n == values.size
        assert estimate.mean == pytest.approx(values.mean(), rel=1e-12)
        assert estimate.std_error == pytest.approx(values.std(ddof=1) / np.sqrt(values.size), rel=1e-10)

    def test_event_standard_error(self):
        """Event frequencies use the binomial standard error."""
        moments = RunningMoments(event=True)
        moments.add_block(np.array([True, False, False, False] * 250))
        estimate = moments.estimate()
        assert estimate.mean == pytest.approx(0.25)
        assert estimate.std_error == pytest.approx(np.sqrt(0.25 * 0.75 / 1000))

    def test_block_layout(self, scenario_factory):
        """Only the last block is short."""
        run = McRun(iterations=25000, master_seed=1, block_size=10000, scenario=scenario_factory())
        assert run.block_count == 3
        assert [run.block_length(i) for i in range(3)] == [10000, 10000, 5000]


class TestDeterminism:
    """Test reproducibility of seeded runs."""

    def test_block_streams(self):
        """A (seed, block) pair always yields the same stream; blocks differ."""
        a = block_generator(11, 3).random(4)
        b = block_generator(11, 3).random(4)
        c = block_generator(11, 4).random(4)
        np.testing.assert_array_equal(a, b)
        assert not np.array_equal(a, c)

    def test_thread_count_invariance(self, scenario_factory, ctx):
        """Estimates are bit-identical for 1 and 4 threads."""
        run = McRun(iterations=60000, master_seed=99, block_size=10000,
                    scenario=scenario_factory(relay_terms=RELAY_TERMS))
        single = simulate_outage(run, ctx.with_overrides(mc_threads=1))
        many = simulate_outage(run, ctx.with_overrides(mc_threads=4))
        assert single == many

    def test_zero_thresholds(self, scenario_factory, ctx):
        """Zero thresholds never produce an outage."""
        scenario = scenario_factory(gamma1=0.0, gamma2=0.0, gamma_sum=0.0)
        estimates = simulate_outage(McRun(iterations=20000, master_seed=3, block_size=5000, scenario=scenario), ctx)
        assert estimates[Metric.OUTAGE_USER1].mean == 0.0
        assert estimates[Metric.OUTAGE_USER2].mean == 0.0
        assert estimates[Metric.OUTAGE_SUM].mean == 0.0


class TestClosedFormAgreement:
    """Closed forms against simulation."""

    def test_outage_fso(self, fso_scenario, ctx):
        """Individual, sum and joint outage events of the RF-FSO system at 2e5 draws."""
        run = McRun(iterations=200000, master_seed=2024, block_size=20000, scenario=fso_scenario)
        estimates = simulate_outage(run, ctx)
        assert_agrees(estimates[Metric.OUTAGE_USER1], outage_user(fso_scenario, 1, ctx=ctx))
        assert_agrees(estimates[Metric.OUTAGE_USER2], outage_user(fso_scenario, 2, ctx=ctx))
        assert_agrees(estimates[Metric.OUTAGE_SUM], outage_sum(fso_scenario, ctx))
        assert_agrees(estimates[Metric.P_ORDER1], decode_order_prob(fso_scenario.pair.s_db)[0])
        assert_agrees(estimates[Metric.JOINT_U1_FIRST], joint_u1_first(fso_scenario, ctx=ctx))
        assert_agrees(estimates[Metric.JOINT_U2_FIRST], joint_u2_first(fso_scenario, ctx=ctx))
        assert_agrees(estimates[Metric.COV_U1_SECOND], joint_cov_second_decoded(fso_scenario, 1, ctx=ctx))
        assert_agrees(estimates[Metric.COV_U2_SECOND], joint_cov_second_decoded(fso_scenario, 2, ctx=ctx))
        assert_agrees(estimates[Metric.OMA_OUTAGE_USER1], oma_outage_user(fso_scenario, 1, ctx))

    @pytest.mark.slow
    def test_outage_rf_with_destination_interference(self, rf_dest_scenario, ctx):
        """RF/RF outages with destination interference at 10^6 draws."""
        scenario = rf_dest_scenario
        run = McRun(iterations=1_000_000, master_seed=7, block_size=50000, scenario=scenario)
        estimates = simulate_outage(run, ctx)
        assert_agrees(estimates[Metric.OUTAGE_USER1], outage_user(scenario, 1, ctx=ctx))
        assert_agrees(estimates[Metric.OUTAGE_USER2], outage_user(scenario, 2, ctx=ctx))
        assert_agrees(estimates[Metric.OUTAGE_SUM], outage_sum(scenario, ctx))

    @pytest.mark.slow
    def test_outage_at_low_threshold(self, scenario_factory, ctx):
        """gamma < 1 branch of every joint event at 10^6 draws."""
        scenario = scenario_factory(relay_terms=RELAY_TERMS, s_db=3.0, gamma1=0.3, gamma2=0.2, tx_power_w=0.2)
        run = McRun(iterations=1_000_000, master_seed=17, block_size=50000, scenario=scenario)
        estimates = simulate_outage(run, ctx)
        assert_agrees(estimates[Metric.OUTAGE_USER1], outage_user(scenario, 1, ctx=ctx))
        assert_agrees(estimates[Metric.OUTAGE_USER2], outage_user(scenario, 2, ctx=ctx))
        assert_agrees(estimates[Metric.OUTAGE_SUM], outage_sum(scenario, ctx))

    def test_rates_fso(self, fso_scenario, ctx):
        """Average individual and sum rates of the RF-FSO system at 2e5 draws."""
        run = McRun(iterations=200000, master_seed=31, block_size=20000, scenario=fso_scenario)
        estimates = simulate_ergodic(run, ctx)
        assert_agrees(estimates[Metric.RATE_USER1], avg_rate_user(fso_scenario, 1, ctx))
        assert_agrees(estimates[Metric.RATE_USER2], avg_rate_user(fso_scenario, 2, ctx))
        assert_agrees(estimates[Metric.SUM_RATE], avg_sum_rate(fso_scenario, ctx))

    @pytest.mark.slow
    def test_rates_rf_with_destination_interference(self, rf_dest_scenario, ctx):
        """Average rates through the per-node destination recursion at 10^6 draws."""
        run = McRun(iterations=1_000_000, master_seed=41, block_size=50000, scenario=rf_dest_scenario)
        estimates = simulate_ergodic(run, ctx)
        assert_agrees(estimates[Metric.RATE_USER1], avg_rate_user(rf_dest_scenario, 1, ctx))
        assert_agrees(estimates[Metric.RATE_USER2], avg_rate_user(rf_dest_scenario, 2, ctx))
        assert_agrees(estimates[Metric.SUM_RATE], avg_sum_rate(rf_dest_scenario, ctx))

    def test_oma_reference_with_simulation(self, fso_scenario, ctx):
        """A Monte Carlo run adds the OMA sum outage."""
        run = McRun(iterations=50000, master_seed=5, block_size=10000, scenario=fso_scenario)
        reference = oma_reference(fso_scenario, run, ctx)
        assert reference.sum_outage is not None
        assert 0.0 <= reference.sum_outage.mean <= 1.0
        assert_agrees(reference.simulated[Metric.OMA_OUTAGE_USER2], reference.outage_user2)

    @pytest.mark.slow
    @pytest.mark.parametrize("backhaul", ["fso", "rf"])
    def test_zero_backoff(self, scenario_factory, ctx, backhaul):
        """At s = 0 the perturbed closed forms match simulation for every outage and rate at 10^6 draws."""
        dest_terms = (2e-9, 5e-9) if backhaul == "rf" else ()
        scenario = scenario_factory(backhaul=backhaul, relay_terms=RELAY_TERMS, dest_terms=dest_terms, s_db=0.0)
        outages = simulate_outage(McRun(iterations=1_000_000, master_seed=53, block_size=50000, scenario=scenario), ctx)
        rates = simulate_ergodic(McRun(iterations=1_000_000, master_seed=59, block_size=50000, scenario=scenario), ctx)
        assert_agrees(outages[Metric.OUTAGE_USER1], outage_user(scenario, 1, ctx=ctx))
        assert_agrees(outages[Metric.OUTAGE_USER2], outage_user(scenario, 2, ctx=ctx))
        assert_agrees(outages[Metric.OUTAGE_SUM], outage_sum(scenario, ctx))
        assert_agrees(rates[Metric.RATE_USER1], avg_rate_user(scenario, 1, ctx))
        assert_agrees(rates[Metric.RATE_USER2], avg_rate_user(scenario, 2, ctx))
        assert_agrees(rates[Metric.SUM_RATE], avg_sum_rate(scenario, ctx))


def assert_series_agrees(scenario_file, overrides, metrics, ctx, seed, grid=POWER_GRID, iterations=400_000):
    """Every metric at every transmit power of one sweep series within 4.5 standard errors."""
    document = load_scenario_file(SCENARIO_DIR / scenario_file)
    simulate = simulate_ergodic if set(metrics) <= set(RATES) else simulate_outage
    for i, p_dbm in enumerate(grid):
        config = resolve_scenario(apply_overrides(document, {**overrides, "users.tx_power_dbm": p_dbm}))
        estimates = simulate(McRun(iterations=iterations, master_seed=seed + i, block_size=50000, scenario=config), ctx)
        for metric in metrics:
            closed = CLOSED_FORMS[metric](config, ctx)
            estimate = estimates[metric]
            assert estimate.agrees_with(closed, 4.5, 1.0 / estimate.n), (
                f"{scenario_file} {overrides} P={p_dbm} dBm {metric.value}: "
                f"MC {estimate.mean:.6g} +/- {estimate.std_error:.2g} vs closed form {closed:.6g}"
            )


@pytest.mark.slow
class TestClosedFormAgreementOnSweeps:
    """Closed forms against simulation across the bundled sweeps."""

    @pytest.mark.parametrize("s_db", [0.0, 10.0, 25.0])
    def test_individual_outage_fso(self, ctx, s_db):
        """Individual outages of the RF-FSO system over transmit power."""
        assert_series_agrees(
            "fso_outage_power_sweep.toml", {"users.s_db": s_db},
            (Metric.OUTAGE_USER1, Metric.OUTAGE_USER2), ctx, seed=100,
        )

    @pytest.mark.parametrize("s_db", [0.0, 10.0, 100.0])
    @pytest.mark.parametrize("d2", [200.0, 400.0])
    def test_sum_outage_fso(self, ctx, s_db, d2):
        """Sum-rate outage of the RF-FSO system over transmit power."""
        assert_series_agrees(
            "fso_sum_outage_power_sweep.toml", {"users.s_db": s_db, "users.user2.distance_m": d2},
            (Metric.OUTAGE_SUM,), ctx, seed=200,
        )

    @pytest.mark.parametrize("dest_scale", [0.0, 0.1, 1.0])
    def test_outage_rf_destination_scales(self, ctx, dest_scale):
        """RF/RF outages without, with weak and with full destination interference."""
        assert_series_agrees(
            "rf_outage_power_sweep.toml", {"interference.dest_scale": dest_scale}, OUTAGES, ctx, seed=300,
        )

    @pytest.mark.parametrize("s_db", [0.0, 10.0, 30.0])
    def test_rates_fso(self, ctx, s_db):
        """Average rates of the RF-FSO system up to 60 dBm."""
        assert_series_agrees(
            "fso_ergodic_power_sweep.toml", {"users.s_db": s_db}, RATES, ctx, seed=400, grid=WIDE_POWER_GRID,
        )

    @pytest.mark.parametrize("length_m", [500.0, 1200.0])
    def test_rates_rf_backhaul_lengths(self, ctx, length_m):
        """Average RF/RF rates with destination interference for both backhaul lengths."""
        assert_series_agrees(
            "rf_ergodic_power_sweep.toml", {"backhaul.rf.length_m": length_m}, RATES, ctx,
            seed=500, grid=WIDE_POWER_GRID,
        )

    @pytest.mark.parametrize("overrides", [
        {},
        {"backhaul.fso.alpha": 2.5, "backhaul.fso.beta": 1.5},
        {"backhaul.fso.xi": 1.0},
        {"backhaul.fso.attenuation_per_m": 4.2e-3},
    ], ids=["clear_air", "moderate_turbulence", "strong_pointing_error", "haze"])
    def test_sum_rate_fso_channel_conditions(self, ctx, overrides):
        """Average sum rate at s = 25 dB across FSO channel conditions."""
        assert_series_agrees(
            "fso_ergodic_turbulence.toml", overrides, (Metric.SUM_RATE,), ctx, seed=600, grid=WIDE_POWER_GRID,
        )
