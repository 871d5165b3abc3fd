"""
Brute-force reference evaluators used by the test-suite.

Nothing here calls the production kernels in specfun, channel, outage or
ergodic. Densities are written from their textbook closed forms (the Meijer-G
form of the Gamma-Gamma-with-pointing-error law through mpmath, the
noncentral chi-square form of the Rician power) and integrated with plain
adaptive quadrature.
"""

import logging
import math
from typing import Callable, Optional, Sequence

import mpmath
import numpy as np
from pydantic import BaseModel, ConfigDict, Field
from scipy import integrate, stats

from .exceptions import OracleError, QuadratureError

logger = logging.getLogger(__name__)

MAX_NESTED_DIMS = 3

Density = Callable[[float], float]


class QuadSpec(BaseModel):
    """
    Domain and tolerances of one reference integral.

    Semi-infinite domains [lower, inf) are mapped onto [0, 1) by
    x = lower + scale * t / (1 - t).
    """
    model_config = ConfigDict(frozen=True)

    lower: float = 0.0
    upper: float = math.inf
    scale: float = Field(1.0, gt=0, description="Characteristic size of the integrand's support")
    rel_tol: float = Field(1e-10, gt=0)
    abs_tol: float = Field(1e-14, gt=0)
    max_subdivisions: int = Field(500, ge=1)
    breakpoints: tuple[float, ...] = ()
    normalization_tol: float = Field(1e-6, gt=0, description="Allowed deviation of the pdf mass from 1")

    @property
    def semi_infinite(self) -> bool:
        return math.isinf(self.upper)


def _mapped(func: Callable[[float], float], spec: QuadSpec) -> tuple[Callable[[float], float], float, float, list[float]]:
    if not spec.semi_infinite:
        return func, spec.lower, spec.upper, [p for p in spec.breakpoints if spec.lower < p < spec.upper]

    def transformed(t: float) -> float:
        if t >= 1.0:
            return 0.0
        x = spec.lower + spec.scale * t / (1.0 - t)
        return func(x) * spec.scale / (1.0 - t) ** 2

    points = [(p - spec.lower) / (spec.scale + p - spec.lower) for p in spec.breakpoints if p > spec.lower]
    return transformed, 0.0, 1.0, points


def _integrate(func: Callable[[float], float], spec: QuadSpec, what: str) -> float:
    mapped, lo, hi, points = _mapped(func, spec)
    result = integrate.quad(
        mapped, lo, hi,
        epsabs=spec.abs_tol, epsrel=spec.rel_tol, limit=spec.max_subdivisions,
        points=points or None, full_output=1,
    )
    value, error = result[0], result[1]
    if len(result) > 3:
        raise QuadratureError(
            f"Reference integral of {what} did not converge: {result[3]}",
            best_estimate=value, error_estimate=error,
        )
    return float(value)


def quad_expectation(pdf: Density, f: Callable[[float], float], spec: Optional[QuadSpec] = None) -> float:
    """
    int f(x) pdf(x) dx, after checking that pdf integrates to 1.

    Raises:
        OracleError: When the pdf mass misses 1 by more than spec.normalization_tol
        QuadratureError: When either integral exceeds its subdivision cap
    """
    spec = spec or QuadSpec()
    mass = _integrate(pdf, spec, "the density")
    if abs(mass - 1.0) > spec.normalization_tol:
        raise OracleError(f"density integrates to {mass:.9f}, not 1", mass=mass)
    return _integrate(lambda x: f(x) * pdf(x), spec, "the expectation")


def nested_expectation(
    dims: int,
    integrand: Callable[..., float],
    densities: Optional[Sequence[Density]] = None,
    spec: Optional[QuadSpec] = None,
) -> float:
    """
    Tensor-product quadrature of E[integrand(x_1, ..., x_dims)] over independent variables.

    Each variable defaults to a unit-mean exponential law; every axis uses the
    domain mapping of spec.
    """
    if dims < 1 or dims > MAX_NESTED_DIMS:
        raise OracleError(f"nested_expectation supports 1..{MAX_NESTED_DIMS} dimensions, got {dims}", dims=dims)
    spec = spec or QuadSpec(rel_tol=1e-9, abs_tol=1e-13)
    pdfs = list(densities) if densities is not None else [exponential_pdf] * dims
    if len(pdfs) != dims:
        raise OracleError(f"expected {dims} densities, got {len(pdfs)}", dims=dims)

    def to_x(t: float) -> tuple[float, float]:
        if not spec.semi_infinite:
            return t, 1.0
        return spec.lower + spec.scale * t / (1.0 - t), spec.scale / (1.0 - t) ** 2

    def joint(*ts: float) -> float:
        xs = []
        weight = 1.0
        for t, pdf in zip(ts, pdfs):
            if spec.semi_infinite and t >= 1.0:
                return 0.0
            x, jac = to_x(t)
            xs.append(x)
            weight *= pdf(x) * jac
        if weight == 0.0:
            return 0.0
        return integrand(*xs) * weight

    lo, hi = (0.0, 1.0) if spec.semi_infinite else (spec.lower, spec.upper)
    opts = {"epsrel": spec.rel_tol, "epsabs": spec.abs_tol, "limit": spec.max_subdivisions}
    value, error = integrate.nquad(joint, [(lo, hi)] * dims, opts=[opts] * dims)
    logger.debug(f"Nested {dims}-D reference integral {value:.12e} (error {error:.1e})")
    return float(value)


# ---------------------------------------------------------------------------
# Reference densities
# ---------------------------------------------------------------------------

def exponential_pdf(x: float) -> float:
    """Unit-mean exponential density."""
    return math.exp(-x) if x >= 0 else 0.0


def rician_power_density(omega: float) -> Density:
    """Unit-mean Rician power density from the noncentral chi-square law with 2 degrees of freedom."""
    scale = 2.0 * (1.0 + omega)

    def pdf(kappa: float) -> float:
        if kappa <= 0:
            return 0.0
        if omega == 0:
            return math.exp(-kappa)
        return float(stats.ncx2.pdf(scale * kappa, 2, 2.0 * omega)) * scale

    return pdf


def gg_pointing_density(alpha: float, beta: float, xi: float, a0: float, dps: int = 20) -> Density:
    """
    Gamma-Gamma turbulence with pointing error, from its Meijer-G closed form.

    f(g) = alpha beta xi^2 / (A0 Gamma(alpha) Gamma(beta))
           * G^{3,0}_{1,3}(alpha beta g / A0 | xi^2 ; xi^2 - 1, alpha - 1, beta - 1)
    """
    prefactor = alpha * beta * xi * xi / (a0 * math.gamma(alpha) * math.gamma(beta))
    xi2 = xi * xi

    def pdf(g: float) -> float:
        if g <= 0:
            return 0.0
        with mpmath.workdps(dps):
            value = mpmath.meijerg([[], [xi2]], [[xi2 - 1.0, alpha - 1.0, beta - 1.0], []], alpha * beta * g / a0)
        return prefactor * float(mpmath.re(value))

    return pdf


def gg_pointing_spec(a0: float, **overrides) -> QuadSpec:
    """QuadSpec whose semi-infinite mapping is scaled to the pointing aperture."""
    values = dict(scale=a0, breakpoints=(a0,))
    values.update(overrides)
    return QuadSpec(**values)


def exponential_moment_product(signal: float, c: float, terms: Sequence[float]) -> float:
    """prod_k signal / (signal + c t_k), i.e. E[exp(-c sum_k t_k h_k / signal)] for exponential h_k."""
    return float(np.prod([signal / (signal + c * t) for t in terms])) if terms else 1.0
