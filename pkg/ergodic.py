"""
Average individual and sum rates.

Every rate reduces to expectations E_u(v) = E[eEi(v Y_u)] of the scaled
exponential integral, with Y_u the normalized noise-plus-interference of user u.
The relay interferers are averaged out exactly by the coefficient recursion,
leaving a one-dimensional integral over the backhaul fade.
"""

import logging
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .channel import JITTER_STEP, expect_over_fso, expect_over_rician, retune_backoff
from .dependencies import EvaluationContext, resolve_context
from .exceptions import DegeneracyError, DomainError
from .models import BackhaulExpectationKind, FsoBackhaul, RfBackhaul, ScenarioConfig
from .specfun import eei_scaled

logger = logging.getLogger(__name__)

DEGENERACY_GUARD = 1e-9
SINGULAR_BACKOFF_TOL = 1e-6
PERTURBATION_DB = 1e-3
_MAX_JITTER_ATTEMPTS = 8


@dataclass(frozen=True)
class RecursionInput:
    """
    Interference weights, multiplier and offset of E[eEi(v (B + sum_k alpha_k h_k))].

    The h_k are independent unit-mean exponential gains.
    """

    alphas: tuple[float, ...]
    v: float
    offset: Optional[float] = None

    def __post_init__(self):
        if self.v <= 0:
            raise DomainError(f"multiplier v must be positive, got {self.v}", argument=self.v)
        if any(a <= 0 for a in self.alphas):
            raise DomainError("interference weights must be positive", argument=min(self.alphas))
        if self.offset is not None and self.offset <= 0:
            raise DomainError(f"offset must be positive, got {self.offset}", argument=self.offset)


@dataclass(frozen=True)
class RecursionCoefficients:
    """Final-level coefficients, with the weights and multiplier they were computed for."""

    alphas: tuple[float, ...]
    v: float
    alpha_coeffs: tuple[float, ...]
    v_coeff: float

    def combine(self, offset: float) -> float:
        """beta_v eEi(v B) + sum_i beta_i eEi(B / alpha_i)."""
        value = self.v_coeff * eei_scaled(self.v * offset)
        if self.alphas:
            value += float(np.dot(self.alpha_coeffs, eei_scaled(offset / np.asarray(self.alphas))))
        return value


def coeff_recursion(inp: RecursionInput, guard: float = DEGENERACY_GUARD) -> RecursionCoefficients:
    """
    Coefficients after averaging over every interferer in turn.

    Averaging one gain uses
    E_h[eEi(c (B + alpha h))] = (eEi(B / alpha) - eEi(c B)) / (alpha c - 1),
    applied to every term of the previous level.

    Raises:
        DegeneracyError: When |alpha_k v - 1| or |alpha_k / alpha_i - 1| falls below guard
    """
    alphas = inp.alphas
    v = inp.v
    beta_v = 1.0
    betas: list[float] = []
    for k, alpha_k in enumerate(alphas):
        gap_v = alpha_k * v - 1.0
        if abs(gap_v) < guard:
            raise DegeneracyError(
                f"alpha_{k} * v = {alpha_k * v:.12g} is degenerate",
                kind="alpha_v", value=alpha_k * v, index=k,
            )
        new_beta = beta_v / gap_v
        for i in range(k):
            gap = alpha_k / alphas[i] - 1.0
            if abs(gap) < guard:
                raise DegeneracyError(
                    f"alpha_{k} / alpha_{i} = {alpha_k / alphas[i]:.12g} is degenerate",
                    kind="alpha_ratio", value=alpha_k / alphas[i], index=k,
                )
            new_beta += betas[i] / gap
            betas[i] = -betas[i] / gap
        betas.append(new_beta)
        beta_v = -beta_v / gap_v
    return RecursionCoefficients(alphas=tuple(alphas), v=v, alpha_coeffs=tuple(betas), v_coeff=beta_v)


def interference_eei_expectation(inp: RecursionInput,
                                 coefficients: Optional[RecursionCoefficients] = None) -> float:
    """E over the interferer gains of eEi(v (B + sum_k alpha_k h_k)) at a fixed backhaul realization."""
    if inp.offset is None:
        raise DomainError("interference_eei_expectation needs the offset B")
    if coefficients is None:
        coefficients = coeff_recursion(inp)
    return coefficients.combine(inp.offset)


def _coefficients(alphas: Sequence[float], v: float, ctx: EvaluationContext) -> RecursionCoefficients:
    """Recursion with optional 1e-9 relative jitter of the offending weight."""
    current = list(alphas)
    for attempt in range(_MAX_JITTER_ATTEMPTS):
        try:
            return coeff_recursion(RecursionInput(alphas=tuple(current), v=v))
        except DegeneracyError as exc:
            if not ctx.jitter_degenerate:
                raise
            index = exc.metadata["index"]
            current[index] = alphas[index] * (1.0 + (attempt + 2) * JITTER_STEP)
            logger.warning(f"Jittered interference weight {index} to {current[index]:.12e} ({exc.kind})")
    raise DegeneracyError("interference weights stayed degenerate after jitter", kind="jitter")


# ---------------------------------------------------------------------------
# Destination-side expectation (RF backhaul with destination interference)
# ---------------------------------------------------------------------------

def _eb_at_node(kappa: float, multipliers: np.ndarray, backhaul: RfBackhaul, dest: np.ndarray,
                relay_noise: float) -> np.ndarray:
    out = np.empty(len(multipliers))
    for n, c in enumerate(multipliers):
        node = kappa
        for attempt in range(_MAX_JITTER_ATTEMPTS):
            try:
                coeff = coeff_recursion(RecursionInput(alphas=tuple(dest / (backhaul.gain * node)), v=float(c)))
                break
            except DegeneracyError:
                node = kappa * (1.0 + (attempt + 1) * JITTER_STEP)
        else:
            raise DegeneracyError(f"backhaul node {kappa:.6e} stayed degenerate", kind="node", value=kappa)
        out[n] = coeff.combine(relay_noise + backhaul.c_d_rf / node)
    return out


def _eb_vector(scenario: ScenarioConfig, multipliers: Sequence[float], ctx: EvaluationContext) -> np.ndarray:
    backhaul = scenario.backhaul
    if not isinstance(backhaul, RfBackhaul):
        raise DomainError("destination-side eEi expectation needs an RF backhaul")
    cs = np.asarray(multipliers, dtype=float)
    if np.any(cs <= 0):
        raise DomainError("multipliers must be positive", argument=float(cs.min()))
    dest = np.asarray(scenario.interference.dest_terms, dtype=float)

    def fn(kappa: float) -> np.ndarray:
        return _eb_at_node(kappa, cs, backhaul, dest, scenario.relay_noise_w)

    return expect_over_rician(fn, backhaul.omega, ctx.quad_rel_tol)


def eb_expectation(scenario: ScenarioConfig, c_b: float, ctx: Optional[EvaluationContext] = None) -> float:
    """
    E[eEi(c_b (sigma_R^2 + (N0 + I'') / (L_b G_b^2 kappa_b)))] over kappa_b and the destination gains.

    The destination coefficients depend on kappa_b and are recomputed at every
    quadrature node; a node that lands on a degeneracy is moved by 1e-9 relative.
    """
    ctx = resolve_context(ctx)
    return float(_eb_vector(scenario, [c_b], ctx)[0])


# ---------------------------------------------------------------------------
# E_u(v) over the backhaul fade
# ---------------------------------------------------------------------------

def _signal_scale(scenario: ScenarioConfig, user: int) -> float:
    if user not in (1, 2):
        raise DomainError(f"user must be 1 or 2, got {user}", argument=user)
    return scenario.pair.base1 if user == 1 else scenario.pair.base2


def eei_expectations(scenario: ScenarioConfig, user: int, multipliers: Sequence[float],
                     ctx: Optional[EvaluationContext] = None) -> np.ndarray:
    """E[eEi(v Y_u)] for each multiplier v, sharing one outer quadrature."""
    ctx = resolve_context(ctx)
    signal = _signal_scale(scenario, user)
    if signal <= 0:
        raise DomainError("eEi expectations need a positive received signal scale", argument=signal)
    alphas = [t / signal for t in scenario.interference.relay_terms]
    coeffs = [_coefficients(alphas, float(v), ctx) for v in multipliers]
    sigma2 = scenario.relay_noise_w
    backhaul = scenario.backhaul
    kind = scenario.expectation_kind

    if kind == BackhaulExpectationKind.RF_WITH_DEST_INTERF:
        # Relay recursion in unnormalized units; each term is a destination-side expectation.
        slots = []
        for coeff in coeffs:
            slots.append([coeff.v / signal] + [1.0 / (a * signal) for a in coeff.alphas])
        flat = [c for slot in slots for c in slot]
        eb = _eb_vector(scenario, flat, ctx)
        out = np.empty(len(coeffs))
        start = 0
        for n, coeff in enumerate(coeffs):
            width = 1 + len(coeff.alphas)
            weights = np.array((coeff.v_coeff,) + coeff.alpha_coeffs)
            out[n] = float(np.dot(weights, eb[start:start + width]))
            start += width
        return out

    def at_offset(offset: float) -> np.ndarray:
        return np.array([coeff.combine(offset) for coeff in coeffs])

    if isinstance(backhaul, FsoBackhaul):
        return expect_over_fso(lambda g: at_offset((sigma2 + backhaul.c_d / (g * g)) / signal),
                               backhaul.fading, ctx.quad_rel_tol)
    return expect_over_rician(lambda kappa: at_offset((sigma2 + backhaul.c_d_rf / kappa) / signal),
                              backhaul.omega, ctx.quad_rel_tol)


def _nonnegative_rate(value: float, what: str) -> float:
    if value < 0:
        if value < -1e-12:
            logger.warning(f"{what} = {value:.3e} clamped to 0")
        return 0.0
    return value


# ---------------------------------------------------------------------------
# Rates
# ---------------------------------------------------------------------------

def _rate_user_at(scenario: ScenarioConfig, user: int, ctx: EvaluationContext) -> float:
    q = scenario.pair.s_linear if user == 1 else 1.0 / scenario.pair.s_linear
    r = 1.0 / q
    e_full, e_half, e_one = eei_expectations(scenario, user, [1.0 + q, 0.5 * (1.0 + q), 1.0], ctx)
    first = (e_full - e_half) / (1.0 + r) + (e_half - e_one) / (1.0 - r)
    second = -e_full / (1.0 + q)
    return _nonnegative_rate((first + second) / math.log(2.0), f"average rate of user {user}")


def avg_rate_user(scenario: ScenarioConfig, user: int, ctx: Optional[EvaluationContext] = None) -> float:
    """
    Average rate E[log2(1 + gamma_u)] of a NOMA user under dynamic-order decoding, in bits/s/Hz.

    Combines the decoded-first and decoded-second contributions. At s = 0 the
    decoded-first prefactor is singular and the value is the mean of s +/- 1e-3 dB.
    """
    ctx = resolve_context(ctx)
    _signal_scale(scenario, user)
    if scenario.pair.tx_power_w == 0:
        return 0.0
    if abs(scenario.pair.s_linear - 1.0) < SINGULAR_BACKOFF_TOL:
        s = scenario.pair.s_db
        logger.debug(f"Average rate of user {user} at s={s} dB uses the symmetric perturbation branch")
        upper = _rate_user_at(retune_backoff(scenario, s + PERTURBATION_DB), user, ctx)
        lower = _rate_user_at(retune_backoff(scenario, s - PERTURBATION_DB), user, ctx)
        return 0.5 * (upper + lower)
    return _rate_user_at(scenario, user, ctx)


def _sum_rate_at(scenario: ScenarioConfig, ctx: EvaluationContext) -> float:
    q = scenario.pair.s_linear
    e_q, e_one = eei_expectations(scenario, 1, [q, 1.0], ctx)
    value = (e_q - q * e_one) / (q - 1.0) / math.log(2.0)
    return _nonnegative_rate(value, "average sum rate")


def avg_sum_rate(scenario: ScenarioConfig, ctx: Optional[EvaluationContext] = None) -> float:
    """Average sum rate E[log2(1 + gamma_sum)] in bits/s/Hz; s = 0 uses the perturbation branch."""
    ctx = resolve_context(ctx)
    if scenario.pair.tx_power_w == 0:
        return 0.0
    if abs(scenario.pair.s_linear - 1.0) < SINGULAR_BACKOFF_TOL:
        s = scenario.pair.s_db
        upper = _sum_rate_at(retune_backoff(scenario, s + PERTURBATION_DB), ctx)
        lower = _sum_rate_at(retune_backoff(scenario, s - PERTURBATION_DB), ctx)
        return 0.5 * (upper + lower)
    return _sum_rate_at(scenario, ctx)
