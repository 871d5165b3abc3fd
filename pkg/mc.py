"""
Monte Carlo simulator of the relay NOMA link.

Draws are generated in fixed-size blocks, each with its own Philox stream keyed
by (master seed, block index), so results do not depend on the thread count.
Block statistics are merged in block order.
"""

import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .channel import ChannelDraw, sample_channels
from .dependencies import EvaluationContext, resolve_context
from .models import FsoBackhaul, McEstimate, McRun, Metric, ScenarioConfig

logger = logging.getLogger(__name__)


@dataclass
class SinrRealization:
    """Per-draw SINRs after dynamic-order decoding."""

    user1_first: np.ndarray
    gamma_first: np.ndarray
    gamma_second: np.ndarray
    gamma_sum: np.ndarray
    oma_user1: np.ndarray
    oma_user2: np.ndarray

    @property
    def gamma_user1(self) -> np.ndarray:
        return np.where(self.user1_first, self.gamma_first, self.gamma_second)

    @property
    def gamma_user2(self) -> np.ndarray:
        return np.where(self.user1_first, self.gamma_second, self.gamma_first)


def noise_plus_interference(draw: ChannelDraw, scenario: ScenarioConfig) -> np.ndarray:
    """I + sigma_R^2 + backhaul noise, per draw."""
    relay = draw.relay @ np.asarray(scenario.interference.relay_terms, dtype=float)
    backhaul = scenario.backhaul
    if isinstance(backhaul, FsoBackhaul):
        noise = backhaul.c_d / (draw.g_tilde * draw.g_tilde)
    else:
        dest = draw.dest @ np.asarray(scenario.interference.dest_terms, dtype=float)
        noise = (backhaul.n0 + dest) / (backhaul.gain * draw.kappa)
    return relay + scenario.relay_noise_w + noise


def sinr_realization(draw: ChannelDraw, scenario: ScenarioConfig) -> SinrRealization:
    """
    SINRs of one batch of draws.

    User 1 is decoded first when a1 L1 |h1|^2 >= a2 L2 |h2|^2 (ties go to user 1).
    The first-decoded user sees the other NOMA user as interference; the
    second-decoded user does not.
    """
    pair = scenario.pair
    z = noise_plus_interference(draw, scenario)
    p1 = pair.base1 * draw.h1
    p2 = pair.base2 * draw.h2
    user1_first = p1 >= p2
    first = np.where(user1_first, p1, p2)
    second = np.where(user1_first, p2, p1)
    full = pair.tx_power_w
    return SinrRealization(
        user1_first=user1_first,
        gamma_first=first / (second + z),
        gamma_second=second / z,
        gamma_sum=(p1 + p2) / z,
        oma_user1=pair.l1 * full * draw.h1 / z,
        oma_user2=pair.l2 * full * draw.h2 / z,
    )


# ---------------------------------------------------------------------------
# Streaming statistics
# ---------------------------------------------------------------------------

@dataclass
class RunningMoments:
    """Count, mean and sum of squared deviations, merged with the pairwise update."""

    n: int = 0
    mean: float = 0.0
    m2: float = 0.0
    event: bool = False

    def add_block(self, values: np.ndarray) -> None:
        values = np.asarray(values, dtype=float)
        if values.size == 0:
            return
        block_mean = float(values.mean())
        block = RunningMoments(
            n=int(values.size),
            mean=block_mean,
            m2=float(np.sum((values - block_mean) ** 2)),
            event=self.event,
        )
        self.merge(block)

    def merge(self, other: "RunningMoments") -> None:
        if other.n == 0:
            return
        if self.n == 0:
            self.n, self.mean, self.m2 = other.n, other.mean, other.m2
            return
        total = self.n + other.n
        delta = other.mean - self.mean
        self.mean += delta * other.n / total
        self.m2 += other.m2 + delta * delta * self.n * other.n / total
        self.n = total

    def estimate(self) -> McEstimate:
        if self.event:
            p = min(max(self.mean, 0.0), 1.0)
            std_error = math.sqrt(p * (1.0 - p) / self.n)
        else:
            variance = self.m2 / (self.n - 1) if self.n > 1 else 0.0
            std_error = math.sqrt(variance / self.n)
        return McEstimate(mean=self.mean, std_error=std_error, n=self.n)


@dataclass
class McAccumulator:
    """Per-metric running moments for one run."""

    moments: dict[Metric, RunningMoments] = field(default_factory=dict)
    blocks: int = 0

    def add_block(self, samples: dict[Metric, np.ndarray], events: frozenset[Metric]) -> None:
        for metric, values in samples.items():
            entry = self.moments.setdefault(metric, RunningMoments(event=metric in events))
            entry.add_block(values)
        self.blocks += 1

    def merge(self, other: "McAccumulator") -> None:
        for metric, entry in other.moments.items():
            self.moments.setdefault(metric, RunningMoments(event=entry.event)).merge(entry)
        self.blocks += other.blocks

    def estimates(self) -> dict[Metric, McEstimate]:
        return {metric: entry.estimate() for metric, entry in self.moments.items()}


# ---------------------------------------------------------------------------
# Per-block observables
# ---------------------------------------------------------------------------

OUTAGE_EVENTS = frozenset({
    Metric.OUTAGE_USER1, Metric.OUTAGE_USER2, Metric.OUTAGE_SUM,
    Metric.OMA_OUTAGE_USER1, Metric.OMA_OUTAGE_USER2, Metric.OMA_OUTAGE_SUM,
    Metric.P_ORDER1, Metric.JOINT_U1_FIRST, Metric.JOINT_U2_FIRST,
    Metric.COV_U1_SECOND, Metric.COV_U2_SECOND,
})


def outage_samples(sinr: SinrRealization, scenario: ScenarioConfig) -> dict[Metric, np.ndarray]:
    """Indicator arrays for every event whose thresholds are set."""
    th = scenario.thresholds
    first1 = sinr.user1_first
    first2 = ~first1
    out: dict[Metric, np.ndarray] = {Metric.P_ORDER1: first1}

    if th.gamma1 is not None:
        out[Metric.JOINT_U1_FIRST] = first1 & (sinr.gamma_first < th.gamma1)
        out[Metric.COV_U1_SECOND] = first2 & (sinr.gamma_second > th.gamma1)
        oma = (1.0 + th.gamma1) ** 2 - 1.0
        out[Metric.OMA_OUTAGE_USER1] = sinr.oma_user1 < oma
    if th.gamma2 is not None:
        out[Metric.JOINT_U2_FIRST] = first2 & (sinr.gamma_first < th.gamma2)
        out[Metric.COV_U2_SECOND] = first1 & (sinr.gamma_second > th.gamma2)
        oma = (1.0 + th.gamma2) ** 2 - 1.0
        out[Metric.OMA_OUTAGE_USER2] = sinr.oma_user2 < oma

    if th.gamma1 is not None and th.gamma2 is not None:
        first_ok1 = sinr.gamma_first >= th.gamma1
        first_ok2 = sinr.gamma_first >= th.gamma2
        success1 = (first1 & first_ok1) | (first2 & first_ok2 & (sinr.gamma_second >= th.gamma1))
        success2 = (first2 & first_ok2) | (first1 & first_ok1 & (sinr.gamma_second >= th.gamma2))
        out[Metric.OUTAGE_USER1] = ~success1
        out[Metric.OUTAGE_USER2] = ~success2

    if th.gamma_sum is not None:
        out[Metric.OUTAGE_SUM] = sinr.gamma_sum < th.gamma_sum
        oma_sum = np.sqrt((1.0 + sinr.oma_user1) * (1.0 + sinr.oma_user2)) - 1.0
        out[Metric.OMA_OUTAGE_SUM] = oma_sum < th.gamma_sum
    return out


def rate_samples(sinr: SinrRealization, scenario: ScenarioConfig) -> dict[Metric, np.ndarray]:
    """Instantaneous NOMA and OMA rates in bits/s/Hz."""
    oma1 = 0.5 * np.log2(1.0 + sinr.oma_user1)
    oma2 = 0.5 * np.log2(1.0 + sinr.oma_user2)
    return {
        Metric.RATE_USER1: np.log2(1.0 + sinr.gamma_user1),
        Metric.RATE_USER2: np.log2(1.0 + sinr.gamma_user2),
        Metric.SUM_RATE: np.log2(1.0 + sinr.gamma_sum),
        Metric.OMA_RATE_USER1: oma1,
        Metric.OMA_RATE_USER2: oma2,
        Metric.OMA_SUM_RATE: oma1 + oma2,
    }


# ---------------------------------------------------------------------------
# Runs
# ---------------------------------------------------------------------------

def block_generator(master_seed: int, block_index: int) -> np.random.Generator:
    """Independent Philox stream for one block."""
    seed = np.random.SeedSequence(entropy=master_seed, spawn_key=(block_index,))
    return np.random.Generator(np.random.Philox(seed))


Observables = Callable[[SinrRealization, ScenarioConfig], dict[Metric, np.ndarray]]


def _run_blocks(run: McRun, observables: Observables, events: frozenset[Metric],
                ctx: EvaluationContext) -> dict[Metric, McEstimate]:
    scenario = run.scenario

    def one_block(index: int) -> McAccumulator:
        rng = block_generator(run.master_seed, index)
        draw = sample_channels(rng, scenario, run.block_length(index))
        accumulator = McAccumulator()
        accumulator.add_block(observables(sinr_realization(draw, scenario), scenario), events)
        return accumulator

    start = time.perf_counter()
    total = McAccumulator()
    with ThreadPoolExecutor(max_workers=ctx.mc_threads) as executor:
        for block in executor.map(one_block, range(run.block_count)):
            total.merge(block)
    elapsed = time.perf_counter() - start
    logger.info(
        f"Monte Carlo {scenario.name}: {run.iterations} draws in {total.blocks} blocks "
        f"on {ctx.mc_threads} threads ({elapsed:.2f}s)"
    )
    return total.estimates()


def simulate_outage(run: McRun, ctx: Optional[EvaluationContext] = None) -> dict[Metric, McEstimate]:
    """
    Outage and joint-event frequencies with binomial standard errors.

    User u is in outage unless it is decoded first above its threshold, or it
    is decoded second after the other user was decoded first above its own
    threshold and u then clears its threshold.
    """
    return _run_blocks(run, outage_samples, OUTAGE_EVENTS, resolve_context(ctx))


def simulate_ergodic(run: McRun, ctx: Optional[EvaluationContext] = None) -> dict[Metric, McEstimate]:
    """Average NOMA and OMA rates with sample standard errors."""
    return _run_blocks(run, rate_samples, frozenset(), resolve_context(ctx))
