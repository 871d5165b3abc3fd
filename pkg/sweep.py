"""
Sweep orchestration and CSV emission.

A sweep evaluates every (series, axis point, metric) triple of a scenario's
[sweep] section in closed form, by Monte Carlo, or both. Points run
concurrently; rows come back in series then axis order. A failing point
produces rows carrying the error text instead of aborting the sweep.
"""

import csv
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable, Optional

from .dependencies import EvaluationContext, resolve_context
from .ergodic import avg_rate_user, avg_sum_rate
from .exceptions import DomainError, LinkModelError, ScenarioValidationError
from .mc import OUTAGE_EVENTS, simulate_ergodic, simulate_outage
from .models import (
    EvaluationMethod,
    McEstimate,
    McRun,
    Metric,
    MetricResult,
    ResultRow,
    RunMode,
    ScenarioConfig,
    ScenarioFile,
    SeriesSpec,
    SicComposition,
)
from .outage import (
    decode_order_prob,
    joint_cov_second_decoded,
    joint_u1_first,
    joint_u2_first,
    oma_outage_user,
    outage_sum,
    outage_user,
)
from .scenario import apply_overrides, resolve_scenario

logger = logging.getLogger(__name__)

# Failures that turn a point into error rows instead of aborting the sweep
POINT_ERRORS = (LinkModelError, ArithmeticError, ValueError)

ClosedForm = Callable[[ScenarioConfig, EvaluationContext], float]

CLOSED_FORMS: dict[Metric, ClosedForm] = {
    Metric.OUTAGE_USER1: lambda c, ctx: outage_user(c, 1, SicComposition.EXACT, ctx),
    Metric.OUTAGE_USER2: lambda c, ctx: outage_user(c, 2, SicComposition.EXACT, ctx),
    Metric.OUTAGE_SUM: lambda c, ctx: outage_sum(c, ctx),
    Metric.OMA_OUTAGE_USER1: lambda c, ctx: oma_outage_user(c, 1, ctx),
    Metric.OMA_OUTAGE_USER2: lambda c, ctx: oma_outage_user(c, 2, ctx),
    Metric.RATE_USER1: lambda c, ctx: avg_rate_user(c, 1, ctx),
    Metric.RATE_USER2: lambda c, ctx: avg_rate_user(c, 2, ctx),
    Metric.SUM_RATE: lambda c, ctx: avg_sum_rate(c, ctx),
    Metric.P_ORDER1: lambda c, ctx: decode_order_prob(c.pair.s_db)[0],
    Metric.JOINT_U1_FIRST: lambda c, ctx: joint_u1_first(c, ctx=ctx),
    Metric.JOINT_U2_FIRST: lambda c, ctx: joint_u2_first(c, ctx=ctx),
    Metric.COV_U1_SECOND: lambda c, ctx: joint_cov_second_decoded(c, 1, ctx=ctx),
    Metric.COV_U2_SECOND: lambda c, ctx: joint_cov_second_decoded(c, 2, ctx=ctx),
}

# Achievable rate R_th (1 - P_out) and the outage metric it is derived from.
ACHIEVABLE: dict[Metric, Metric] = {
    Metric.ACHIEVABLE_USER1: Metric.OUTAGE_USER1,
    Metric.ACHIEVABLE_USER2: Metric.OUTAGE_USER2,
    Metric.ACHIEVABLE_SUM: Metric.OUTAGE_SUM,
}

RATE_METRICS = frozenset({
    Metric.RATE_USER1, Metric.RATE_USER2, Metric.SUM_RATE,
    Metric.OMA_RATE_USER1, Metric.OMA_RATE_USER2, Metric.OMA_SUM_RATE,
})


def _target_rate(config: ScenarioConfig, outage_metric: Metric) -> float:
    th = config.thresholds
    rate = {
        Metric.OUTAGE_USER1: th.rate1,
        Metric.OUTAGE_USER2: th.rate2,
        Metric.OUTAGE_SUM: th.rate_sum,
    }[outage_metric]
    if rate is None:
        raise DomainError(f"{outage_metric.value} needs its threshold to report an achievable rate")
    return rate


def report_achievable(config: ScenarioConfig, ctx: Optional[EvaluationContext] = None) -> list[MetricResult]:
    """
    Closed-form outages with the achievable rates R_th (1 - P_out) next to them.

    Only targets whose thresholds are set are reported.
    """
    ctx = resolve_context(ctx)
    th = config.thresholds
    available = {
        Metric.OUTAGE_USER1: th.gamma1 is not None and th.gamma2 is not None,
        Metric.OUTAGE_USER2: th.gamma1 is not None and th.gamma2 is not None,
        Metric.OUTAGE_SUM: th.gamma_sum is not None,
    }
    results: list[MetricResult] = []
    for achievable, outage_metric in ACHIEVABLE.items():
        if not available[outage_metric]:
            continue
        outage = CLOSED_FORMS[outage_metric](config, ctx)
        results.append(MetricResult(metric=outage_metric, value=outage, method=EvaluationMethod.CLOSED_FORM))
        results.append(MetricResult(
            metric=achievable,
            value=_target_rate(config, outage_metric) * (1.0 - outage),
            method=EvaluationMethod.CLOSED_FORM,
        ))
    return results


@dataclass(frozen=True)
class SweepPoint:
    """One (series, axis value) evaluation request."""

    series: SeriesSpec
    axis_value: float
    index: int


def mc_run_for(document: ScenarioFile, config: ScenarioConfig, ctx: EvaluationContext,
               iterations: Optional[int] = None, seed: Optional[int] = None) -> McRun:
    """Monte Carlo run for a resolved point; explicit arguments win over the [mc] section."""
    mc = document.mc
    block_size = mc.block_size if "block_size" in mc.model_fields_set else ctx.mc_block_size
    return McRun(
        iterations=iterations if iterations is not None else mc.iterations,
        master_seed=seed if seed is not None else mc.seed,
        block_size=block_size,
        scenario=config,
    )


def _closed_value(metric: Metric, config: ScenarioConfig, ctx: EvaluationContext) -> Optional[float]:
    if metric in ACHIEVABLE:
        outage_metric = ACHIEVABLE[metric]
        return _target_rate(config, outage_metric) * (1.0 - CLOSED_FORMS[outage_metric](config, ctx))
    form = CLOSED_FORMS.get(metric)
    return None if form is None else form(config, ctx)


def _mc_value(metric: Metric, config: ScenarioConfig, estimates: dict[Metric, McEstimate]) -> Optional[McEstimate]:
    if metric in ACHIEVABLE:
        outage = estimates.get(ACHIEVABLE[metric])
        if outage is None:
            return None
        rate = _target_rate(config, ACHIEVABLE[metric])
        return McEstimate(mean=rate * (1.0 - outage.mean), std_error=rate * outage.std_error, n=outage.n)
    return estimates.get(metric)


def _agreement_floor(metric: Metric, estimate: McEstimate) -> float:
    """Event frequencies cannot resolve probabilities below one event in n draws."""
    return 1.0 / estimate.n if metric in OUTAGE_EVENTS else 0.0


def evaluate_point(
    config: ScenarioConfig,
    metrics: Iterable[Metric],
    mode: RunMode,
    run: Optional[McRun],
    ctx: EvaluationContext,
    series: str = "",
    axis_value: float = 0.0,
) -> list[ResultRow]:
    """Rows for one resolved scenario, in the order the metrics are listed."""
    metrics = list(metrics)
    estimates: dict[Metric, McEstimate] = {}
    mc_ms = 0.0
    if mode in (RunMode.MC, RunMode.BOTH):
        if run is None:
            raise DomainError("Monte Carlo mode needs an McRun")
        start = time.perf_counter()
        wanted = {ACHIEVABLE.get(m, m) for m in metrics}
        if wanted & OUTAGE_EVENTS:
            estimates.update(simulate_outage(run, ctx))
        if wanted & RATE_METRICS:
            estimates.update(simulate_ergodic(run, ctx))
        mc_ms = (time.perf_counter() - start) * 1e3

    rows: list[ResultRow] = []
    for metric in metrics:
        start = time.perf_counter()
        row = ResultRow(series=series, axis=axis_value, metric=metric)
        try:
            closed = _closed_value(metric, config, ctx) if mode in (RunMode.CLOSED, RunMode.BOTH) else None
            estimate = _mc_value(metric, config, estimates) if estimates else None
        except POINT_ERRORS as e:
            logger.warning(f"{series or config.name} @ {axis_value}: {metric.value} failed: {e}")
            row.error = f"{type(e).__name__}: {e}"
            row.wall_ms = (time.perf_counter() - start) * 1e3
            rows.append(row)
            continue

        row.closed_form = closed
        if estimate is not None:
            row.mc_mean = estimate.mean
            row.mc_stderr = estimate.std_error
        if closed is not None and estimate is not None:
            row.agree_3sigma = estimate.agrees_with(closed, 3.0, _agreement_floor(metric, estimate))
        if closed is not None:
            row.method = EvaluationMethod.CLOSED_FORM
        elif estimate is not None:
            row.method = EvaluationMethod.MONTE_CARLO
        row.wall_ms = (time.perf_counter() - start) * 1e3 + (mc_ms if estimate is not None else 0.0)
        rows.append(row)
    return rows


def run_sweep(
    document: ScenarioFile,
    mode: RunMode = RunMode.CLOSED,
    ctx: Optional[EvaluationContext] = None,
    iterations: Optional[int] = None,
    seed: Optional[int] = None,
    out_path: Optional[str | Path] = None,
) -> list[ResultRow]:
    """
    Evaluate the document's [sweep] and optionally write the rows as CSV.

    Raises:
        ScenarioValidationError: When the document has no [sweep] section
    """
    ctx = resolve_context(ctx)
    plan = document.sweep
    if plan is None:
        raise ScenarioValidationError(f"{document.name} has no [sweep] section", key="[sweep]", constraint="required")

    series_list = plan.series or [SeriesSpec(label="")]
    points = [
        SweepPoint(series=series, axis_value=value, index=i)
        for series in series_list
        for i, value in enumerate(plan.grid)
    ]
    logger.info(
        f"Sweep {document.name}: {len(series_list)} series x {len(plan.grid)} points x "
        f"{len(plan.metrics)} metrics, mode={mode.value}"
    )

    def evaluate(point: SweepPoint) -> list[ResultRow]:
        overrides = {**point.series.overrides, plan.axis: point.axis_value}
        try:
            config = resolve_scenario(apply_overrides(document, overrides), ctx.distinct_rel_tol, ctx.jitter_degenerate)
            run = mc_run_for(document, config, ctx, iterations, seed) if mode != RunMode.CLOSED else None
            return evaluate_point(config, plan.metrics, mode, run, ctx, point.series.label, point.axis_value)
        except POINT_ERRORS as e:
            logger.warning(f"{point.series.label or document.name} @ {point.axis_value}: {e}")
            return [
                ResultRow(series=point.series.label, axis=point.axis_value, metric=metric,
                          error=f"{type(e).__name__}: {e}")
                for metric in plan.metrics
            ]

    start = time.perf_counter()
    with ThreadPoolExecutor(max_workers=ctx.sweep_workers) as executor:
        rows = [row for point_rows in executor.map(evaluate, points) for row in point_rows]
    logger.info(f"Sweep {document.name} finished: {len(rows)} rows in {time.perf_counter() - start:.1f}s")

    if out_path is not None:
        write_results_csv(rows, out_path)
    return rows


def write_results_csv(rows: Iterable[ResultRow], path: str | Path) -> None:
    """Header plus one line per row, columns in ResultRow.CSV_COLUMNS order."""
    with Path(path).open("w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(ResultRow.CSV_COLUMNS)
        for row in rows:
            writer.writerow(row.to_csv_record())
