"""
Special functions for the relay link closed forms.

Exponential integrals, Bessel functions and the incomplete gamma function
wrap scipy.special with explicit domain checks. The two Meijer-G-class
expectations used by the outage formulas (the pointing/turbulence expectation
calG and the incomplete-G expectation of the Rician backhaul with destination
interference) are evaluated by adaptive quadrature of their defining
integrals. Mellin-Barnes contour evaluations are kept as cross-checks.
"""

import logging
import math
import warnings
from dataclasses import dataclass
from typing import Callable, Literal, Optional, Sequence

import mpmath
import numpy as np
from pydantic import BaseModel, ConfigDict, Field
from scipy import integrate, special, stats

from .exceptions import DomainError, QuadratureError, SeriesConvergenceError

logger = logging.getLogger(__name__)

# Depth of the backward continued fraction used for eEi at large arguments.
_CF_DEPTH = 64
_CF_CROSSOVER = 10.0

# Tail probability used to truncate the turbulence support.
SUPPORT_EPS = 1e-17

CONTOUR_SHIFT = 0.25
CONTOUR_TRUNCATION = 1e-16
CONTOUR_REL_TOL = 1e-10
_CONTOUR_MAX_REFINEMENTS = 14
_CONTOUR_MAX_HALF_WIDTH = 4096.0


class MeijerGFsoParams(BaseModel):
    """Gamma-Gamma turbulence with pointing error."""
    model_config = ConfigDict(frozen=True)

    alpha: float = Field(..., gt=0, description="Large-scale turbulence shape")
    beta: float = Field(..., gt=0, description="Small-scale turbulence shape")
    xi: float = Field(..., gt=0, description="Equivalent beam radius to jitter ratio")
    a0: float = Field(..., gt=0, le=1, description="Geometric-loss ceiling")


class IncompleteGArgs(BaseModel):
    """Arguments of  sum_k (d/4)^k/(k!)^2 int x^(n+k) exp(-a x - b/x)/(x + c) dx."""
    model_config = ConfigDict(frozen=True)

    n: int = Field(..., ge=0)
    a: float = Field(..., gt=0)
    b: float = Field(..., ge=0)
    c: float = Field(..., gt=0)
    d: float = Field(..., ge=0)


# ---------------------------------------------------------------------------
# Quadrature helper
# ---------------------------------------------------------------------------

def adaptive_quad(
    func: Callable[[float], float],
    lower: float,
    upper: float,
    rel_tol: float = 1e-8,
    abs_tol: float = 0.0,
    points: Optional[Sequence[float]] = None,
    limit: int = 200,
    what: str = "integral",
) -> float:
    """
    Adaptive Gauss-Kronrod quadrature that fails loudly.

    scipy reports subdivision trouble as an IntegrationWarning. The warning is
    tolerated when the reported error is still small compared with the value,
    and turned into a QuadratureError otherwise.
    """
    kwargs = {"epsrel": rel_tol, "epsabs": abs_tol, "limit": limit}
    if points is not None and np.isfinite(lower) and np.isfinite(upper):
        inner = sorted(p for p in points if lower < p < upper)
        if inner:
            kwargs["points"] = inner

    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", integrate.IntegrationWarning)
        value, error = integrate.quad(func, lower, upper, **kwargs)

    if caught:
        allowed = max(1e-10, 1e3 * rel_tol * abs(value), abs_tol)
        if not np.isfinite(value) or error > allowed:
            raise QuadratureError(
                f"Quadrature of {what} did not converge: {caught[0].message}",
                best_estimate=float(value),
                error_estimate=float(error),
            )
        logger.debug(f"Accepted {what} with error {error:.3e} after warning: {caught[0].message}")
    return float(value)


# ---------------------------------------------------------------------------
# Exponential integrals, Bessel and incomplete gamma
# ---------------------------------------------------------------------------

def ei_negative(x: float) -> float:
    """Ei(x) for x < 0, i.e. -E1(-x)."""
    if not x < 0:
        raise DomainError(f"ei_negative requires x < 0, got {x}", argument=x)
    return float(special.expi(x))


def _eei_continued_fraction(t: np.ndarray) -> np.ndarray:
    tail = t + 2.0 * _CF_DEPTH + 1.0
    for k in range(_CF_DEPTH, 0, -1):
        tail = t + 2.0 * k - 1.0 - (k * k) / tail
    return -1.0 / tail


def eei_scaled(t):
    """
    eEi(t) = exp(t) Ei(-t) for t > 0 without forming exp(t).

    Accepts scalars or arrays; arrays are evaluated elementwise.
    """
    arr = np.atleast_1d(np.asarray(t, dtype=float))
    if arr.size and not np.all(arr > 0):
        bad = float(np.nanmin(arr)) if not np.isnan(arr).all() else float("nan")
        raise DomainError(f"eei_scaled requires t > 0, got {bad}", argument=bad)

    small = arr < _CF_CROSSOVER
    out = np.empty_like(arr)
    if np.any(small):
        ts = arr[small]
        out[small] = -np.exp(ts) * special.exp1(ts)
    if np.any(~small):
        out[~small] = _eei_continued_fraction(arr[~small])
    if np.ndim(t) == 0:
        return float(out[0])
    return out.reshape(np.shape(t))


def bessel_i0(z: float) -> float:
    """Modified Bessel function I0 for z >= 0."""
    if z < 0:
        raise DomainError(f"bessel_i0 requires z >= 0, got {z}", argument=z)
    return float(special.i0(z))


def bessel_kn(order: int, z: float) -> float:
    """Modified Bessel function of the second kind K_n for integer n >= 0 and z > 0."""
    if int(order) != order or order < 0:
        raise DomainError(f"bessel_kn requires a nonnegative integer order, got {order}", argument=order)
    if not z > 0:
        raise DomainError(f"bessel_kn requires z > 0, got {z}", argument=z)
    return float(special.kn(int(order), z))


def upper_incomplete_gamma(s: float, x: float) -> float:
    """Gamma(s, x) for real s and x > 0."""
    if not x > 0:
        raise DomainError(f"upper_incomplete_gamma requires x > 0, got {x}", argument=x)
    if s == 0:
        return float(special.exp1(x))
    if 0 < s <= 170:
        return float(special.gammaincc(s, x) * special.gamma(s))
    return float(mpmath.gammainc(s, a=x))


def generalized_expint(p: float, x):
    """E_p(x) = int_1^inf exp(-x t) t^-p dt for x >= 0, p > 1 where x = 0."""
    if float(p).is_integer():
        return special.expn(int(p), x)
    if np.ndim(x) == 0:
        return float(mpmath.expint(p, float(x)))
    return np.array([float(mpmath.expint(p, float(v))) for v in np.ravel(x)]).reshape(np.shape(x))


def exp_ei_integral(a: float, b: float, c1: float, c2: float = math.inf) -> float:
    """
    int_{c1}^{c2} exp(b x) Ei(a x) dx for a < 0, a + b < 0, 0 <= c1 < c2 <= inf.

    Antiderivative (exp(b t) Ei(a t) - Ei((a + b) t)) / b; it vanishes at
    infinity and tends to -ln(1 + b/a) / b at zero.
    """
    if not (a < 0 and a + b < 0):
        raise DomainError(f"exp_ei_integral requires a < 0 and a + b < 0, got a={a}, b={b}", argument=(a, b))
    if not 0 <= c1 < c2:
        raise DomainError(f"exp_ei_integral requires 0 <= c1 < c2, got c1={c1}, c2={c2}", argument=(c1, c2))

    if b == 0:
        def primitive(t: float) -> float:
            if t == 0:
                return -1.0 / a
            if math.isinf(t):
                return 0.0
            return t * ei_negative(a * t) - math.exp(a * t) / a
        return primitive(c2) - primitive(c1)

    def primitive(t: float) -> float:
        if t == 0:
            return -math.log1p(b / a)
        if math.isinf(t):
            return 0.0
        return math.exp((a + b) * t) * eei_scaled(-a * t) - ei_negative((a + b) * t)

    return (primitive(c2) - primitive(c1)) / b


# ---------------------------------------------------------------------------
# Gamma-Gamma turbulence
# ---------------------------------------------------------------------------

def gamma_gamma_logpdf(x, alpha: float, beta: float):
    """Log density of the unit-mean Gamma-Gamma law (product of Gamma(alpha) and Gamma(beta))."""
    x = np.asarray(x, dtype=float)
    ab = alpha * beta
    z = 2.0 * np.sqrt(ab * x)
    log_norm = math.log(2.0) + 0.5 * (alpha + beta) * math.log(ab) - special.gammaln(alpha) - special.gammaln(beta)
    with np.errstate(divide="ignore"):
        return (
            log_norm
            + (0.5 * (alpha + beta) - 1.0) * np.log(x)
            + np.log(special.kve(alpha - beta, z))
            - z
        )


def turbulence_support(alpha: float, beta: float, eps: float = SUPPORT_EPS) -> tuple[float, float]:
    """Interval holding all but ~2*eps of the Gamma-Gamma mass at each end."""
    gx = stats.gamma(a=alpha, scale=1.0 / alpha)
    gy = stats.gamma(a=beta, scale=1.0 / beta)
    lower = float(gx.ppf(eps) * gy.ppf(eps))
    upper = float(gx.isf(eps) * gy.isf(eps))
    return lower, upper


# ---------------------------------------------------------------------------
# calG(A) = E[exp(-A / g^2)]
# ---------------------------------------------------------------------------

@dataclass
class CalGResult:
    """Value of calG with the path that produced it."""

    value: float
    method: Literal["quadrature", "contour"]
    fell_back: bool = False
    refinements: int = 0


def _calg_quadrature(a: float, fso: MeijerGFsoParams, rel_tol: float) -> float:
    # Condition on turbulence x; the pointing factor integrates to (xi^2/2) E_{1+xi^2/2}.
    half = 0.5 * fso.xi ** 2
    order = 1.0 + half
    lo, hi = turbulence_support(fso.alpha, fso.beta)
    scale = a / fso.a0 ** 2

    def integrand(u: float) -> float:
        x = math.exp(u)
        weight = math.exp(float(gamma_gamma_logpdf(x, fso.alpha, fso.beta)) + u)
        return weight * half * float(generalized_expint(order, scale / (x * x)))

    mode = math.log(max((fso.alpha - 1.0) * (fso.beta - 1.0) / (fso.alpha * fso.beta), 1e-3))
    knee = 0.5 * math.log(scale)
    value = adaptive_quad(
        integrand, math.log(lo), math.log(hi), rel_tol=rel_tol, abs_tol=1e-15,
        points=(mode, knee), what="calG",
    )
    return min(max(value, 0.0), 1.0)


def _calg_contour_kernel(y: np.ndarray, a: float, fso: MeijerGFsoParams) -> np.ndarray:
    t = CONTOUR_SHIFT + 1j * y
    half = 0.5 * fso.xi ** 2
    al, be = fso.alpha, fso.beta
    log_z = math.log(16.0) + 2.0 * math.log(fso.a0) - math.log(a) - 2.0 * math.log(al * be)
    log_k = (
        special.loggamma(t)
        + special.loggamma(half + t)
        + special.loggamma(0.5 * al + t)
        + special.loggamma(0.5 * (al + 1.0) + t)
        + special.loggamma(0.5 * be + t)
        + special.loggamma(0.5 * (be + 1.0) + t)
        - special.loggamma(1.0 + half + t)
        + t * log_z
    )
    return np.exp(log_k)


def _calg_contour(a: float, fso: MeijerGFsoParams) -> tuple[float, int]:
    half = 0.5 * fso.xi ** 2
    log_pref = (
        math.log(half) + (fso.alpha + fso.beta - 2.0) * math.log(2.0) - math.log(math.pi)
        - special.gammaln(fso.alpha) - special.gammaln(fso.beta)
    )

    def f(y: np.ndarray) -> np.ndarray:
        return _calg_contour_kernel(y, a, fso).real

    # Truncate where the kernel magnitude has fallen below the peak by CONTOUR_TRUNCATION.
    width = 8.0
    while True:
        grid = np.linspace(0.0, width, 513)
        mags = np.abs(_calg_contour_kernel(grid, a, fso))
        if mags[-1] < CONTOUR_TRUNCATION * mags.max():
            break
        width *= 2.0
        if width > _CONTOUR_MAX_HALF_WIDTH:
            raise QuadratureError("calG contour integrand does not decay", best_estimate=float("nan"))

    # Trapezoid on the symmetric line: endpoint y=0 carries half weight.
    n = 64
    h = width / n
    nodes = np.linspace(0.0, width, n + 1)
    values = f(nodes)
    total = h * (0.5 * values[0] + values[1:].sum())
    for refinement in range(1, _CONTOUR_MAX_REFINEMENTS + 1):
        h *= 0.5
        mids = np.arange(1, 2 * n, 2) * h
        refined = 0.5 * total + h * f(mids).sum()
        n *= 2
        change = abs(refined - total)
        total = refined
        logger.debug(f"calG contour refinement {refinement}: step={h:.3e} value={total:.12e}")
        if change <= CONTOUR_REL_TOL * abs(total):
            value = math.exp(log_pref) * total / math.pi
            return value, refinement
    raise QuadratureError(
        "calG contour trapezoid did not settle",
        best_estimate=math.exp(log_pref) * total / math.pi,
    )


def calg_evaluate(
    a: float,
    fso: MeijerGFsoParams,
    method: Literal["quadrature", "contour"] = "quadrature",
    rel_tol: float = 1e-8,
) -> CalGResult:
    """
    Evaluate calG(A) = E[exp(-A/g^2)] for the combined turbulence and pointing gain.

    Args:
        a: Nonnegative argument A
        fso: Fading parameters
        method: "quadrature" (production) or "contour" (Mellin-Barnes line integral)
        rel_tol: Relative tolerance of the quadrature path

    Returns:
        CalGResult; a failing contour falls back to quadrature with fell_back set
    """
    if a < 0:
        raise DomainError(f"calG requires A >= 0, got {a}", argument=a)
    if a == 0:
        return CalGResult(value=1.0, method=method)

    if method == "contour":
        try:
            value, refinements = _calg_contour(a, fso)
            if not (np.isfinite(value) and -1e-9 <= value <= 1.0 + 1e-9):
                raise QuadratureError(f"calG contour value {value} outside [0, 1]", best_estimate=value)
            return CalGResult(value=min(max(value, 0.0), 1.0), method="contour", refinements=refinements)
        except QuadratureError as e:
            logger.warning(f"calG contour failed at A={a:.3e} ({e}); falling back to quadrature")
            return CalGResult(value=_calg_quadrature(a, fso, rel_tol), method="quadrature", fell_back=True)

    return CalGResult(value=_calg_quadrature(a, fso, rel_tol), method="quadrature")


def calg(a: float, fso: MeijerGFsoParams, method: Literal["quadrature", "contour"] = "quadrature",
         rel_tol: float = 1e-8) -> float:
    """calG(A) as a plain float."""
    return calg_evaluate(a, fso, method=method, rel_tol=rel_tol).value


# ---------------------------------------------------------------------------
# Rician backhaul: E[exp(-a/kappa)] series
# ---------------------------------------------------------------------------

def rician_exp_series(a: float, omega: float, tol: float = 1e-12, max_terms: int = 200) -> float:
    """
    E[exp(-a/kappa)] for a unit-mean Rician power kappa with factor omega.

    Sum over n of Poisson(n; omega) * r_n with r_n = 2 w^((n+1)/2) K_{n+1}(2 sqrt(w)) / n!,
    w = a (1 + omega). The r_n obey r_{n+1} = r_n + w r_{n-1} / (n (n+1)), which is
    run on exp(2 sqrt(w))-scaled values to stay clear of underflow.
    """
    if a < 0:
        raise DomainError(f"rician_exp_series requires a >= 0, got {a}", argument=a)
    if omega < 0:
        raise DomainError(f"Rician factor must be >= 0, got {omega}", argument=omega)
    if a == 0:
        return 1.0

    w = a * (1.0 + omega)
    root = math.sqrt(w)
    z = 2.0 * root
    if z > 1400.0:
        return 0.0

    r_prev = 2.0 * root * special.kve(1, z)
    r_curr = 2.0 * w * special.kve(2, z)
    weight = math.exp(-omega)
    total = weight * r_prev
    n = 0
    while True:
        n += 1
        if n > max_terms:
            raise SeriesConvergenceError(
                f"Rician series did not converge within {max_terms} terms",
                partial_sum=total * math.exp(-z), terms=max_terms,
            )
        weight *= omega / n
        term = weight * r_curr
        total += term
        if n >= omega and term <= tol * total:
            break
        r_prev, r_curr = r_curr, r_curr + w * r_prev / (n * (n + 1))

    logger.debug(f"Rician series converged after {n + 1} terms (a={a:.3e}, omega={omega:.3f})")
    return float(total * math.exp(-z))


# ---------------------------------------------------------------------------
# Incomplete-G expectation
# ---------------------------------------------------------------------------

def log_incomplete_g_term(m: int, a: float, b: float, c: float, rel_tol: float = 1e-10) -> float:
    """log of int_0^inf x^m exp(-a x - b/x) / (x + c) dx, integrated in u = ln x."""
    if a <= 0 or c <= 0 or b < 0 or m < 0:
        raise DomainError(f"invalid incomplete-G term arguments m={m}, a={a}, b={b}, c={c}")

    x_star = ((m + 1) + math.sqrt((m + 1) ** 2 + 4.0 * a * b)) / (2.0 * a)
    u_star = math.log(x_star)

    def phi(u: float) -> float:
        x = math.exp(u)
        return (m + 1) * u - a * x - b / x - math.log(x + c)

    ref = phi(u_star)

    def integrand(u: float) -> float:
        if u < -700.0 or u > 700.0:
            return 0.0
        return math.exp(phi(u) - ref)

    left = adaptive_quad(integrand, -np.inf, u_star, rel_tol=rel_tol, what="incomplete-G term")
    right = adaptive_quad(integrand, u_star, np.inf, rel_tol=rel_tol, what="incomplete-G term")
    return ref + math.log(left + right)


def incomplete_g_term(m: int, a: float, b: float, c: float, rel_tol: float = 1e-10) -> float:
    """int_0^inf x^m exp(-a x - b/x) / (x + c) dx."""
    return math.exp(log_incomplete_g_term(m, a, b, c, rel_tol))


def incomplete_g_term_contour(m: int, a: float, b: float, c: float, dps: int = 30) -> float:
    """
    Mellin-Barnes form of the same integral, for cross-checking.

    c^m e^(ac) (1/pi) int_0^inf Re[(b/c)^s Gamma(-s) Gamma(m+1-s) Gamma(s-m, a c)] dy
    on the line s = -0.25 + i y. Requires b > 0.
    """
    if b <= 0:
        raise DomainError("contour form of the incomplete-G term needs b > 0", argument=b)
    with mpmath.workdps(dps):
        ratio = mpmath.mpf(b) / c
        ac = mpmath.mpf(a) * c

        def kernel(y):
            s = mpmath.mpc(-CONTOUR_SHIFT, y)
            return mpmath.re(
                ratio ** s * mpmath.gamma(-s) * mpmath.gamma(m + 1 - s) * mpmath.gammainc(s - m, a=ac)
            )

        line = mpmath.quad(kernel, [0, 1, 4, 16, mpmath.inf])
        value = mpmath.mpf(c) ** m * mpmath.exp(ac) * line / mpmath.pi
        return float(value)


def incomplete_g_expectation(
    args: IncompleteGArgs,
    series_tol: float = 1e-12,
    max_terms: int = 200,
    rel_tol: float = 1e-10,
) -> float:
    """
    J1 = sum_k (d/4)^k/(k!)^2 * J2(n + k), J2(m) = int x^m exp(-a x - b/x)/(x + c) dx.

    The k-series is summed in log space and stops once a term falls below
    series_tol times the partial sum while decreasing.

    Raises:
        SeriesConvergenceError: When max_terms terms do not contract the series
    """
    log_d4 = math.log(args.d / 4.0) if args.d > 0 else -math.inf
    total = 0.0
    previous = math.inf
    for k in range(max_terms):
        if k > 0 and args.d == 0:
            break
        log_term = (
            (k * log_d4 if k else 0.0)
            - 2.0 * special.gammaln(k + 1)
            + log_incomplete_g_term(args.n + k, args.a, args.b, args.c, rel_tol)
        )
        term = math.exp(log_term)
        total += term
        if k > 0 and term <= series_tol * total and term < previous:
            logger.debug(f"Incomplete-G series stopped after {k + 1} terms")
            return total
        previous = term
    if args.d == 0:
        return total
    raise SeriesConvergenceError(
        f"Incomplete-G series did not converge within {max_terms} terms",
        partial_sum=total, terms=max_terms,
    )
