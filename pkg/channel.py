"""
Link budget and channel laws shared by the closed forms and the simulator.

Deterministic pieces (path losses, power split, noise constants) live next to
the stochastic ones (densities, outer expectations over the backhaul fade and
the vectorized sampler) so both evaluation paths read the same model.
"""

import logging
import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import integrate, special, stats

from .exceptions import DistinctnessError, DomainError, QuadratureError
from .models import AccessLink, FsoBackhaul, InterferenceProfile, RfBackhaul, ScenarioConfig
from .specfun import SUPPORT_EPS, MeijerGFsoParams, adaptive_quad, gamma_gamma_logpdf, turbulence_support

logger = logging.getLogger(__name__)

LIGHT_SPEED = 3e8
JITTER_STEP = 1e-9


# ---------------------------------------------------------------------------
# Units
# ---------------------------------------------------------------------------

def db_to_linear(db: float) -> float:
    return 10.0 ** (db / 10.0)


def dbm_to_watts(dbm: float) -> float:
    return 10.0 ** ((dbm - 30.0) / 10.0)


# ---------------------------------------------------------------------------
# Path losses and power allocation
# ---------------------------------------------------------------------------

def path_loss(
    distance_m: float,
    tx_gain_dbi: float,
    rx_gain_dbi: float,
    ref_distance_m: float,
    pathloss_exponent: float,
    carrier_freq_hz: float,
) -> float:
    """Far-field RF gain G_t G_r (lambda / (4 pi d_ref))^2 (d_ref / d)^nu."""
    if ref_distance_m <= 0 or distance_m < ref_distance_m:
        raise DomainError(
            f"distance {distance_m} m must be at least the reference distance {ref_distance_m} m",
            argument=distance_m,
        )
    wavelength = LIGHT_SPEED / carrier_freq_hz
    antenna = db_to_linear(tx_gain_dbi) * db_to_linear(rx_gain_dbi)
    free_space = (wavelength / (4.0 * math.pi * ref_distance_m)) ** 2
    return antenna * free_space * (ref_distance_m / distance_m) ** pathloss_exponent


def rf_path_loss(link: AccessLink) -> float:
    """Path-loss gain of a user-to-relay access link."""
    return path_loss(
        link.distance_m, link.tx_gain_dbi, link.rx_gain_dbi,
        link.ref_distance_m, link.pathloss_exponent, link.carrier_freq_hz,
    )


def fso_path_loss(responsivity: float, attenuation_per_m: float, length_m: float) -> float:
    """g_l = rho * 10^(-kappa d / 10)."""
    if responsivity <= 0 or attenuation_per_m < 0 or length_m <= 0:
        raise DomainError("FSO path loss needs positive responsivity and length, nonnegative attenuation")
    return responsivity * 10.0 ** (-attenuation_per_m * length_m / 10.0)


def geometric_loss_a0(aperture_radius_m: float, divergence_rad: float, length_m: float) -> float:
    """Fraction of power collected at zero misalignment, [erf(sqrt(pi) r / (sqrt(2) phi d))]^2."""
    if aperture_radius_m <= 0 or divergence_rad <= 0 or length_m <= 0:
        raise DomainError("geometric loss needs positive aperture, divergence and length")
    v = math.sqrt(math.pi) * aperture_radius_m / (math.sqrt(2.0) * divergence_rad * length_m)
    return float(special.erf(v) ** 2)


def fso_noise_constant(dest_noise_a2: float, conversion_eta: float, g_l: float, relay_gain: float) -> float:
    """C_D = sigma_D^2 / (eta^2 g_l^2 G^2)."""
    return dest_noise_a2 / (conversion_eta ** 2 * g_l ** 2 * relay_gain ** 2)


def power_allocation(l1: float, l2: float, s_db: float, allow_negative: bool = False) -> tuple[float, float]:
    """
    Power coefficients with a1 L1 = a2 L2 10^(s/10) and a1 + a2 = 1.

    Negative back-off is only used internally by the symmetric perturbation
    around s = 0.
    """
    if l1 <= 0 or l2 <= 0:
        raise DomainError("path losses must be positive")
    if l1 < l2:
        raise DomainError(f"user indexing requires L1 >= L2, got L1={l1:.4e} < L2={l2:.4e}", argument=l1)
    if s_db < 0 and not allow_negative:
        raise DomainError(f"power back-off step must be >= 0 dB, got {s_db}", argument=s_db)
    q = db_to_linear(s_db)
    a1 = l2 * q / (l1 + l2 * q)
    return a1, 1.0 - a1


def retune_backoff(scenario: ScenarioConfig, s_db: float) -> ScenarioConfig:
    """Same scenario with the power split recomputed for another back-off step."""
    pair = scenario.pair
    a1, a2 = power_allocation(pair.l1, pair.l2, s_db, allow_negative=True)
    new_pair = pair.model_copy(update={"s_db": s_db, "a1": a1, "a2": a2})
    return scenario.model_copy(update={"pair": new_pair})


# ---------------------------------------------------------------------------
# Interference profiles
# ---------------------------------------------------------------------------

def _too_close(x: float, y: float, rel_tol: float) -> bool:
    return abs(x - y) <= rel_tol * max(abs(x), abs(y))


def check_distinct(terms: Sequence[float], rel_tol: float = 1e-9, label: str = "interference") -> None:
    """Raise DistinctnessError when two terms agree to rel_tol."""
    for i in range(len(terms)):
        for j in range(i + 1, len(terms)):
            if _too_close(terms[i], terms[j], rel_tol):
                raise DistinctnessError(
                    f"{label} terms {i} and {j} are not distinct ({terms[i]:.6e} vs {terms[j]:.6e})",
                    terms=list(terms),
                    index_pair=(i, j),
                )


def jitter_distinct(terms: Sequence[float], rel_tol: float = 1e-9, label: str = "interference") -> tuple[float, ...]:
    """Nudge later duplicates upward by multiples of JITTER_STEP until all terms are distinct."""
    accepted: list[float] = []
    for index, term in enumerate(terms):
        value = term
        step = 2
        while any(_too_close(value, other, rel_tol) for other in accepted):
            value = term * (1.0 + step * JITTER_STEP)
            step += 1
        if value != term:
            logger.warning(f"Jittered {label} term {index} from {term:.9e} to {value:.9e}")
        accepted.append(value)
    return tuple(accepted)


def build_interference_profile(
    relay_terms: Sequence[float],
    dest_terms: Sequence[float],
    rel_tol: float = 1e-9,
    jitter: bool = False,
) -> InterferenceProfile:
    """Validated interference profile; duplicates fail unless jitter is enabled."""
    relay = tuple(float(t) for t in relay_terms)
    dest = tuple(float(t) for t in dest_terms)
    if jitter:
        relay = jitter_distinct(relay, rel_tol, "relay interference")
        dest = jitter_distinct(dest, rel_tol, "destination interference")
    else:
        check_distinct(relay, rel_tol, "relay interference")
        check_distinct(dest, rel_tol, "destination interference")
    return InterferenceProfile(relay_terms=relay, dest_terms=dest)


# ---------------------------------------------------------------------------
# Backhaul fade densities
# ---------------------------------------------------------------------------

def pointing_gain(u, fso: MeijerGFsoParams):
    """g_p = A0 U^(1/xi^2) for U in (0, 1]."""
    return fso.a0 * np.power(u, 1.0 / fso.xi ** 2)


def gg_pointing_log_support(fso: MeijerGFsoParams) -> tuple[float, float]:
    """Bounds of ln(g / A0) outside which the composite gain has negligible mass."""
    lo, hi = turbulence_support(fso.alpha, fso.beta)
    return math.log(lo) + math.log(SUPPORT_EPS) / fso.xi ** 2, math.log(hi)


def _gg_pointing_log_density(u: float, fso: MeijerGFsoParams, rel_tol: float) -> float:
    """Density of ln(g/A0) at u: xi^2 int_u^inf exp(xi^2 (u - v)) f_GG(e^v) e^v dv."""
    xi2 = fso.xi ** 2
    _, v_hi = gg_pointing_log_support(fso)
    if u >= v_hi:
        return 0.0

    def integrand(v: float) -> float:
        return math.exp(xi2 * (u - v) + float(gamma_gamma_logpdf(math.exp(v), fso.alpha, fso.beta)) + v)

    return xi2 * adaptive_quad(integrand, u, v_hi, rel_tol=rel_tol, abs_tol=1e-300, what="pointing density")


def gg_pointing_pdf(g, fso: MeijerGFsoParams, rel_tol: float = 1e-10):
    """Density of the combined turbulence and pointing gain g~ = A0 x U^(1/xi^2)."""
    values = np.atleast_1d(np.asarray(g, dtype=float))
    if np.any(values <= 0):
        raise DomainError("gg_pointing_pdf is defined for g > 0", argument=float(values.min()))
    out = np.array([_gg_pointing_log_density(math.log(v / fso.a0), fso, rel_tol) / v for v in values])
    return float(out[0]) if np.ndim(g) == 0 else out.reshape(np.shape(g))


def rician_power_pdf(kappa, omega: float):
    """Unit-mean Rician power density (1+W) e^-W exp(-(1+W) k) I0(2 sqrt(W (1+W) k))."""
    values = np.asarray(kappa, dtype=float)
    if np.any(values < 0):
        raise DomainError("rician_power_pdf is defined for kappa >= 0", argument=float(np.min(values)))
    z = 2.0 * np.sqrt(omega * (1.0 + omega) * values)
    density = (1.0 + omega) * np.exp(-omega - (1.0 + omega) * values + z) * special.i0e(z)
    return float(density) if np.ndim(kappa) == 0 else density


def rician_power_variance(omega: float) -> float:
    return (1.0 + 2.0 * omega) / (1.0 + omega) ** 2


def rician_tail_mass(kappa: float, omega: float) -> float:
    """P(kappa_b > kappa), using 2 (1+W) kappa_b ~ noncentral chi-square(2, 2W)."""
    scaled = 2.0 * (1.0 + omega) * kappa
    if omega == 0:
        return float(stats.chi2.sf(scaled, df=2))
    return float(stats.ncx2.sf(scaled, df=2, nc=2.0 * omega))


# ---------------------------------------------------------------------------
# Outer expectations over the backhaul fade
# ---------------------------------------------------------------------------

def _quad_vec(fn: Callable[[float], np.ndarray], lower: float, upper: float, rel_tol: float, what: str) -> np.ndarray:
    result = integrate.quad_vec(fn, lower, upper, epsrel=rel_tol, epsabs=1e-300, limit=400, full_output=True)
    value, error, info = result
    if not info.success:
        raise QuadratureError(
            f"Vector quadrature over {what} did not converge: {info.message}",
            best_estimate=float(np.max(np.abs(value))),
            error_estimate=float(error),
        )
    return np.asarray(value, dtype=float)


def expect_over_fso(
    fn: Callable[[float], np.ndarray],
    fso: MeijerGFsoParams,
    rel_tol: float = 1e-8,
) -> np.ndarray:
    """
    E[fn(g~)] for the combined turbulence and pointing gain.

    fn maps one gain value to a vector; all components share the quadrature
    nodes. The integral runs over u = ln(g~/A0) on the truncated support.
    """
    u_lo, u_hi = gg_pointing_log_support(fso)
    inner_tol = min(1e-10, rel_tol)

    def integrand(u: float) -> np.ndarray:
        weight = _gg_pointing_log_density(u, fso, inner_tol)
        return np.asarray(fn(fso.a0 * math.exp(u)), dtype=float) * weight

    return _quad_vec(integrand, u_lo, u_hi, rel_tol, "the FSO gain")


def expect_over_rician(
    fn: Callable[[float], np.ndarray],
    omega: float,
    rel_tol: float = 1e-8,
    tail_tol: float = 1e-14,
) -> np.ndarray:
    """
    E[fn(kappa_b)] for the unit-mean Rician power.

    Integrates [0, 1 + 10 sigma] and adds the tail only when its probability
    exceeds tail_tol.
    """
    split = 1.0 + 10.0 * math.sqrt(rician_power_variance(omega))

    def integrand(kappa: float) -> np.ndarray:
        return np.asarray(fn(kappa), dtype=float) * rician_power_pdf(kappa, omega)

    value = _quad_vec(integrand, 0.0, split, rel_tol, "the Rician power")
    tail = rician_tail_mass(split, omega)
    if tail > tail_tol:
        logger.debug(f"Rician tail mass {tail:.3e} above {tail_tol:.1e}; integrating the tail")
        value = value + _quad_vec(integrand, split, np.inf, rel_tol, "the Rician tail")
    return value


# ---------------------------------------------------------------------------
# Sampling
# ---------------------------------------------------------------------------

@dataclass
class ChannelDraw:
    """A batch of independent channel realizations."""

    h1: np.ndarray
    h2: np.ndarray
    relay: np.ndarray
    dest: np.ndarray
    g_tilde: Optional[np.ndarray] = None
    kappa: Optional[np.ndarray] = None

    @property
    def size(self) -> int:
        return int(self.h1.shape[0])


def sample_fso_gain(rng: np.random.Generator, fso: MeijerGFsoParams, size: int) -> np.ndarray:
    """Gamma(alpha, 1/alpha) * Gamma(beta, 1/beta) turbulence times A0 U^(1/xi^2) pointing."""
    turbulence = rng.gamma(fso.alpha, 1.0 / fso.alpha, size) * rng.gamma(fso.beta, 1.0 / fso.beta, size)
    uniform = 1.0 - rng.random(size)
    return turbulence * pointing_gain(uniform, fso)


def sample_rician_power(rng: np.random.Generator, omega: float, size: int) -> np.ndarray:
    """|LOS + scatter|^2 with LOS power W/(1+W) and scatter power 1/(1+W)."""
    los = math.sqrt(omega / (1.0 + omega))
    spread = math.sqrt(0.5 / (1.0 + omega))
    real = los + spread * rng.standard_normal(size)
    imag = spread * rng.standard_normal(size)
    return real * real + imag * imag


def sample_channels(rng: np.random.Generator, scenario: ScenarioConfig, size: int = 1) -> ChannelDraw:
    """
    Draw `size` independent realizations of every fade in the scenario.

    Access, relay-interference and destination-interference power gains are
    Exp(1); the backhaul gain follows the scenario's backhaul kind.
    """
    k_relay = len(scenario.interference.relay_terms)
    h1 = rng.standard_exponential(size)
    h2 = rng.standard_exponential(size)
    relay = rng.standard_exponential((size, k_relay))

    backhaul = scenario.backhaul
    if isinstance(backhaul, FsoBackhaul):
        g_tilde = sample_fso_gain(rng, backhaul.fading, size)
        return ChannelDraw(h1=h1, h2=h2, relay=relay, dest=np.empty((size, 0)), g_tilde=g_tilde)

    assert isinstance(backhaul, RfBackhaul)
    kappa = sample_rician_power(rng, backhaul.omega, size)
    dest = rng.standard_exponential((size, len(scenario.interference.dest_terms)))
    return ChannelDraw(h1=h1, h2=h2, relay=relay, dest=dest, kappa=kappa)
