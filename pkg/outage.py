"""
Closed-form outage probabilities.

Every formula reduces to the exponential expectation

    Q_u(C) = E[exp(-C Y_u)] = exp(-C sigma_R^2 / S_u) * BE(C / S_u) * prod_k S_u / (S_u + C L'_k p'_k)

where S_u = a_u L_u P and Y_u is the noise-plus-interference seen by user u,
normalized by S_u. BE(b) is the backhaul expectation E[exp(-b N_b)] of the
backhaul noise term N_b (C_D / g~^2 for FSO, (N0 + I'') / (L_b G_b^2 kappa_b)
for RF).
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .channel import db_to_linear, expect_over_rician, retune_backoff
from .dependencies import EvaluationContext, resolve_context
from .exceptions import DegenerateOrderError, DistinctnessError, DomainError
from .models import (
    FsoBackhaul,
    McEstimate,
    McRun,
    Metric,
    RfBackhaul,
    ScenarioConfig,
    SicComposition,
)
from .specfun import IncompleteGArgs, calg, incomplete_g_expectation, rician_exp_series

logger = logging.getLogger(__name__)

CLAMP_TOLERANCE = 1e-12
SINGULAR_BACKOFF_TOL = 1e-6
PERTURBATION_DB = 1e-3
CANCELLATION_LIMIT = 1e5


def _clamp_probability(value: float, what: str) -> float:
    if value < 0.0 or value > 1.0:
        excursion = -value if value < 0.0 else value - 1.0
        if excursion > CLAMP_TOLERANCE:
            logger.warning(f"{what} = {value:.3e} clamped to [0, 1] (excursion {excursion:.3e})")
        return min(max(value, 0.0), 1.0)
    return value


def _other(user: int) -> int:
    if user not in (1, 2):
        raise DomainError(f"user must be 1 or 2, got {user}", argument=user)
    return 3 - user


def _signal_scale(scenario: ScenarioConfig, user: int) -> float:
    pair = scenario.pair
    return pair.base1 if user == 1 else pair.base2


def _order_ratio(scenario: ScenarioConfig, user: int) -> float:
    """q_u = a_u L_u / (a_o L_o), i.e. 10^(s/10) for user 1 and 10^(-s/10) for user 2."""
    q = scenario.pair.s_linear
    return q if user == 1 else 1.0 / q


def _threshold(scenario: ScenarioConfig, user: int, gamma_th: Optional[float]) -> float:
    if gamma_th is not None:
        if gamma_th < 0:
            raise DomainError(f"threshold must be >= 0, got {gamma_th}", argument=gamma_th)
        return gamma_th
    value = scenario.thresholds.gamma1 if user == 1 else scenario.thresholds.gamma2
    if value is None:
        raise DomainError(f"threshold gamma{user} is not set")
    return value


# ---------------------------------------------------------------------------
# Decoding order
# ---------------------------------------------------------------------------

def decode_order_prob(s_db: float) -> tuple[float, float]:
    """(P(pi_1), P(pi_2)) for back-off step s in dB; the two sum to 1 exactly."""
    p1 = 1.0 / (1.0 + 10.0 ** (-s_db / 10.0))
    if p1 >= 0.5:
        return p1, 1.0 - p1
    p2 = 1.0 / (1.0 + 10.0 ** (s_db / 10.0))
    return 1.0 - p2, p2


# ---------------------------------------------------------------------------
# Backhaul expectation
# ---------------------------------------------------------------------------

def _partial_fraction_weights(offsets: np.ndarray) -> np.ndarray:
    """w_l = prod_{j != l} 1 / (e_j - e_l)."""
    weights = np.empty_like(offsets)
    for l, e_l in enumerate(offsets):
        diffs = np.delete(offsets, l) - e_l
        weights[l] = 1.0 / np.prod(diffs) if diffs.size else 1.0
    return weights


def cancellation_factor(offsets: Sequence[float]) -> float:
    """
    Cancellation of the partial-fraction identity at unit fade.

    sum_l |w_l / (1 + e_l)| divided by prod_j 1 / (1 + e_j); values near 1 mean
    the series form loses nothing to cancellation.
    """
    e = np.asarray(offsets, dtype=float)
    with np.errstate(over="ignore", divide="ignore"):
        weights = _partial_fraction_weights(e)
        spread = np.sum(np.abs(weights / (1.0 + e)))
        exact = np.prod(1.0 / (1.0 + e))
    if not np.isfinite(spread) or exact == 0.0:
        return math.inf
    return float(spread / exact)


def _dest_interference_series(b: float, backhaul: RfBackhaul, dest_terms: Sequence[float],
                              ctx: EvaluationContext) -> float:
    omega = backhaul.omega
    offsets = b * np.asarray(dest_terms, dtype=float) / backhaul.gain
    weights = _partial_fraction_weights(offsets)
    total = 0.0
    for weight, offset in zip(weights, offsets):
        args = IncompleteGArgs(
            n=len(dest_terms),
            a=1.0 + omega,
            b=b * backhaul.c_d_rf,
            c=float(offset),
            d=4.0 * omega * (1.0 + omega),
        )
        total += weight * incomplete_g_expectation(args, ctx.series_tol, ctx.series_max_terms)
    return (1.0 + omega) * math.exp(-omega) * total


def _dest_interference_quadrature(b: float, backhaul: RfBackhaul, dest_terms: Sequence[float],
                                  ctx: EvaluationContext) -> float:
    terms = np.asarray(dest_terms, dtype=float)
    scale = backhaul.gain
    noise = b * backhaul.c_d_rf

    def product_form(kappa: float) -> np.ndarray:
        fade = scale * kappa
        return np.array([math.exp(-noise / kappa) * np.prod(fade / (fade + b * terms))])

    return float(expect_over_rician(product_form, backhaul.omega, ctx.quad_rel_tol)[0])


def backhaul_expectation(
    a: float,
    backhaul: FsoBackhaul | RfBackhaul,
    dest_terms: Sequence[float] = (),
    ctx: Optional[EvaluationContext] = None,
    method: Optional[str] = None,
) -> float:
    """
    Destination-side expectation entering every closed form.

    Args:
        a: For FSO, the calG argument A (E[exp(-A/g~^2)]). For RF without
           destination interference, A in E[exp(-A/kappa_b)]. For RF with
           destination interference, the constant B in
           E[exp(-B (I'' + N0) / (L_b G_b^2 kappa_b))].
        backhaul: Resolved backhaul
        dest_terms: L''_j p''_j of the destination interferers (RF only)
        ctx: Numerical options
        method: Override of the evaluation path ("quadrature"/"contour" for FSO,
                "series"/"quadrature"/"auto" for RF)

    Returns:
        Expectation in [0, 1]
    """
    ctx = resolve_context(ctx)
    if a < 0:
        raise DomainError(f"backhaul expectation needs a nonnegative argument, got {a}", argument=a)
    if a == 0:
        return 1.0

    if isinstance(backhaul, FsoBackhaul):
        return calg(a, backhaul.fading, method=method or ctx.calg_method, rel_tol=ctx.quad_rel_tol)

    if not dest_terms:
        if method == "quadrature":
            return float(expect_over_rician(lambda k: np.array([math.exp(-a / k)]), backhaul.omega,
                                            ctx.quad_rel_tol)[0])
        return rician_exp_series(a, backhaul.omega, ctx.series_tol, ctx.series_max_terms)

    for i in range(len(dest_terms)):
        for j in range(i + 1, len(dest_terms)):
            if abs(dest_terms[i] - dest_terms[j]) <= ctx.distinct_rel_tol * max(dest_terms[i], dest_terms[j]):
                raise DistinctnessError(
                    "destination interference terms must be pairwise distinct",
                    terms=list(dest_terms), index_pair=(i, j),
                )

    chosen = method or ctx.dest_interference_method
    if chosen == "auto":
        factor = cancellation_factor(a * np.asarray(dest_terms) / backhaul.gain)
        chosen = "series" if factor < CANCELLATION_LIMIT else "quadrature"
        logger.debug(f"Destination interference expectation at B={a:.3e}: cancellation {factor:.3e} -> {chosen}")
    if chosen == "series":
        value = _dest_interference_series(a, backhaul, dest_terms, ctx)
    else:
        value = _dest_interference_quadrature(a, backhaul, dest_terms, ctx)
    return _clamp_probability(value, "destination interference expectation")


def _backhaul_factor(scenario: ScenarioConfig, b: float, ctx: EvaluationContext) -> float:
    """E[exp(-b N_b)] with the argument mapped onto backhaul_expectation's convention."""
    backhaul = scenario.backhaul
    if isinstance(backhaul, FsoBackhaul):
        return backhaul_expectation(b * backhaul.c_d, backhaul, ctx=ctx)
    dest = scenario.interference.dest_terms
    if dest:
        return backhaul_expectation(b, backhaul, dest, ctx=ctx)
    return backhaul_expectation(b * backhaul.c_d_rf, backhaul, ctx=ctx)


def exp_expectation(scenario: ScenarioConfig, signal: float, c: float,
                    ctx: Optional[EvaluationContext] = None) -> float:
    """
    E[exp(-c Z / signal)] with Z = I + sigma_R^2 + N_b.

    The relay interferers contribute prod_k signal / (signal + c L'_k p'_k).
    """
    ctx = resolve_context(ctx)
    if c == 0:
        return 1.0
    if signal <= 0:
        return 0.0
    noise = math.exp(-c * scenario.relay_noise_w / signal)
    relay = 1.0
    for term in scenario.interference.relay_terms:
        relay *= signal / (signal + c * term)
    return noise * relay * _backhaul_factor(scenario, c / signal, ctx)


def _q(scenario: ScenarioConfig, user: int, c: float, ctx: EvaluationContext) -> float:
    return exp_expectation(scenario, _signal_scale(scenario, user), c, ctx)


# ---------------------------------------------------------------------------
# Joint probabilities
# ---------------------------------------------------------------------------

def _joint_first_below(scenario: ScenarioConfig, user: int, gamma: float, ctx: EvaluationContext) -> float:
    """Pr(gamma_u < gamma, u decoded first)."""
    q = _order_ratio(scenario, user)
    if gamma >= 1.0:
        value = q / (1.0 + q) - q / (gamma + q) * _q(scenario, user, gamma, ctx)
    else:
        j = q * gamma / (1.0 - gamma)
        j1 = j * (1.0 + 1.0 / q)
        j2 = gamma + j * (1.0 + gamma / q)
        value = (
            q / (1.0 + q) * (1.0 - _q(scenario, user, j1, ctx))
            - q / (gamma + q) * (_q(scenario, user, gamma, ctx) - _q(scenario, user, j2, ctx))
        )
    return _clamp_probability(value, f"joint probability of user {user} decoded first")


def joint_u1_first(scenario: ScenarioConfig, gamma_th: Optional[float] = None,
                   ctx: Optional[EvaluationContext] = None) -> float:
    """Pr(gamma^(1)_pi1 < gamma_th, pi_1); gamma_th defaults to the scenario's gamma1."""
    return _joint_first_below(scenario, 1, _threshold(scenario, 1, gamma_th), resolve_context(ctx))


def joint_u2_first(scenario: ScenarioConfig, gamma_th: Optional[float] = None,
                   ctx: Optional[EvaluationContext] = None) -> float:
    """Pr(gamma^(2)_pi2 < gamma_th, pi_2); gamma_th defaults to the scenario's gamma2."""
    return _joint_first_below(scenario, 2, _threshold(scenario, 2, gamma_th), resolve_context(ctx))


def joint_cov_second_decoded(scenario: ScenarioConfig, user: int, gamma_th: Optional[float] = None,
                             ctx: Optional[EvaluationContext] = None) -> float:
    """Pr(gamma_u > gamma_th, u decoded second) = Q_u(gamma (1 + q_u)) / (1 + q_u)."""
    _other(user)
    ctx = resolve_context(ctx)
    gamma = _threshold(scenario, user, gamma_th)
    q = _order_ratio(scenario, user)
    value = _q(scenario, user, gamma * (1.0 + q), ctx) / (1.0 + q)
    return _clamp_probability(value, f"coverage of user {user} decoded second")


def joint_sic_success(scenario: ScenarioConfig, user: int, ctx: Optional[EvaluationContext] = None) -> float:
    """
    Pr(other user decoded first and above its threshold, user u decoded second and above its threshold).

    Both conditions involve |h_u|^2, so the probability is taken jointly rather
    than as a product of the two marginals.
    """
    other = _other(user)
    ctx = resolve_context(ctx)
    gamma_u = _threshold(scenario, user, None)
    gamma_o = _threshold(scenario, other, None)
    q = _order_ratio(scenario, user)

    both = q * gamma_o + (1.0 + q * gamma_o) * gamma_u
    if gamma_o >= 1.0:
        value = _q(scenario, user, both, ctx) / (1.0 + q * gamma_o)
    else:
        knee = gamma_o / (1.0 - gamma_o)
        if knee > gamma_u:
            upper = _q(scenario, user, (1.0 + q) * knee, ctx)
            value = (_q(scenario, user, both, ctx) - upper) / (1.0 + q * gamma_o) + upper / (1.0 + q)
        else:
            value = _q(scenario, user, (1.0 + q) * gamma_u, ctx) / (1.0 + q)
    return _clamp_probability(value, f"SIC success of user {user}")


# ---------------------------------------------------------------------------
# Outage probabilities
# ---------------------------------------------------------------------------

def outage_user(
    scenario: ScenarioConfig,
    user: int,
    composition: SicComposition = SicComposition.EXACT,
    ctx: Optional[EvaluationContext] = None,
) -> float:
    """
    Individual-rate outage probability of a NOMA user under dynamic-order decoding.

    Success is either decoding first above threshold, or decoding second after
    the other user was decoded first above its own threshold.

    Raises:
        DegenerateOrderError: When the other decoding order has zero probability
    """
    other = _other(user)
    ctx = resolve_context(ctx)
    gamma_u = _threshold(scenario, user, None)
    gamma_o = _threshold(scenario, other, None)

    p1, p2 = decode_order_prob(scenario.pair.s_db)
    p_first = p1 if user == 1 else p2
    p_other_first = p2 if user == 1 else p1
    if p_other_first < np.finfo(float).tiny:
        raise DegenerateOrderError(
            f"decoding order with user {user} second has zero probability at s={scenario.pair.s_db} dB",
            s_db=scenario.pair.s_db,
        )

    first = p_first - _joint_first_below(scenario, user, gamma_u, ctx)
    if composition == SicComposition.EXACT:
        second = joint_sic_success(scenario, user, ctx)
    else:
        other_first = p_other_first - _joint_first_below(scenario, other, gamma_o, ctx)
        second = other_first * joint_cov_second_decoded(scenario, user, gamma_u, ctx) / p_other_first
    return _clamp_probability(1.0 - (first + second), f"outage of user {user}")


def _sum_outage_at(scenario: ScenarioConfig, gamma: float, ctx: EvaluationContext) -> float:
    q = scenario.pair.s_linear
    value = 1.0 + (_q(scenario, 1, gamma * q, ctx) - q * _q(scenario, 1, gamma, ctx)) / (q - 1.0)
    return _clamp_probability(value, "sum-rate outage")


def outage_sum(scenario: ScenarioConfig, ctx: Optional[EvaluationContext] = None) -> float:
    """Sum-rate outage probability; s = 0 averages the values at s +/- 1e-3 dB."""
    ctx = resolve_context(ctx)
    gamma = scenario.thresholds.gamma_sum
    if gamma is None:
        raise DomainError("threshold gamma_sum is not set")
    if gamma == 0:
        return 0.0

    if abs(scenario.pair.s_linear - 1.0) < SINGULAR_BACKOFF_TOL:
        s = scenario.pair.s_db
        logger.debug(f"Sum-rate outage at s={s} dB uses the symmetric perturbation branch")
        upper = _sum_outage_at(retune_backoff(scenario, s + PERTURBATION_DB), gamma, ctx)
        lower = _sum_outage_at(retune_backoff(scenario, s - PERTURBATION_DB), gamma, ctx)
        return 0.5 * (upper + lower)
    return _sum_outage_at(scenario, gamma, ctx)


# ---------------------------------------------------------------------------
# OMA baseline
# ---------------------------------------------------------------------------

def oma_threshold(gamma_th: float) -> float:
    """Threshold each OMA user needs in its half slot to carry the same rate."""
    return (1.0 + gamma_th) ** 2 - 1.0


def oma_outage_user(scenario: ScenarioConfig, user: int, ctx: Optional[EvaluationContext] = None) -> float:
    """OMA outage of one user transmitting at full power in its own slot."""
    _other(user)
    ctx = resolve_context(ctx)
    gamma = oma_threshold(_threshold(scenario, user, None))
    pair = scenario.pair
    signal = (pair.l1 if user == 1 else pair.l2) * pair.tx_power_w
    value = 1.0 - exp_expectation(scenario, signal, gamma, ctx)
    return _clamp_probability(value, f"OMA outage of user {user}")


@dataclass
class OmaReference:
    """OMA thresholds, closed-form individual outages and optional simulated outages."""

    gamma_oma1: float
    gamma_oma2: float
    outage_user1: float
    outage_user2: float
    simulated: dict[Metric, McEstimate] = field(default_factory=dict)

    @property
    def sum_outage(self) -> Optional[McEstimate]:
        return self.simulated.get(Metric.OMA_OUTAGE_SUM)


def oma_reference(scenario: ScenarioConfig, run: Optional[McRun] = None,
                  ctx: Optional[EvaluationContext] = None) -> OmaReference:
    """
    OMA comparison quantities.

    The sum-rate event sqrt((1+g1)(1+g2)) - 1 < gamma_sum has no closed form and
    is only available when a Monte Carlo run is supplied.
    """
    from .mc import simulate_outage

    ctx = resolve_context(ctx)
    reference = OmaReference(
        gamma_oma1=oma_threshold(_threshold(scenario, 1, None)),
        gamma_oma2=oma_threshold(_threshold(scenario, 2, None)),
        outage_user1=oma_outage_user(scenario, 1, ctx),
        outage_user2=oma_outage_user(scenario, 2, ctx),
    )
    if run is not None:
        estimates = simulate_outage(run, ctx)
        reference.simulated = {
            metric: estimates[metric]
            for metric in (Metric.OMA_OUTAGE_USER1, Metric.OMA_OUTAGE_USER2, Metric.OMA_OUTAGE_SUM)
            if metric in estimates
        }
    return reference
