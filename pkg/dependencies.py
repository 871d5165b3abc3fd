"""Numerical options shared by the evaluators."""

from dataclasses import dataclass, replace
from typing import Literal

from .settings import Settings, load_settings


DestInterferenceMethod = Literal["auto", "series", "quadrature"]
CalGMethod = Literal["quadrature", "contour"]


@dataclass(frozen=True)
class EvaluationContext:
    """
    Tolerances and execution knobs passed down to every evaluator.
    Built from Settings so the environment and .env control them.
    """

    # Quadrature and series
    quad_rel_tol: float = 1e-8
    series_tol: float = 1e-12
    series_max_terms: int = 200

    # Degenerate inputs
    distinct_rel_tol: float = 1e-9
    jitter_degenerate: bool = False

    # Backhaul expectation paths
    calg_method: CalGMethod = "quadrature"
    dest_interference_method: DestInterferenceMethod = "auto"

    # Execution
    mc_threads: int = 4
    mc_block_size: int = 65536
    sweep_workers: int = 2

    @classmethod
    def from_settings(
        cls,
        settings: Settings | None = None,
        **overrides
    ) -> "EvaluationContext":
        """Create a context from settings."""
        if settings is None:
            settings = load_settings()

        values = dict(
            quad_rel_tol=settings.quad_rel_tol,
            series_tol=settings.series_tol,
            series_max_terms=settings.series_max_terms,
            distinct_rel_tol=settings.distinct_rel_tol,
            jitter_degenerate=settings.jitter_degenerate,
            mc_threads=settings.mc_threads,
            mc_block_size=settings.mc_block_size,
            sweep_workers=settings.sweep_workers,
        )
        values.update(overrides)
        return cls(**values)

    def with_overrides(self, **overrides) -> "EvaluationContext":
        return replace(self, **overrides)


def resolve_context(ctx: EvaluationContext | None) -> EvaluationContext:
    """Return ctx, or the library defaults when None."""
    return ctx if ctx is not None else EvaluationContext()
