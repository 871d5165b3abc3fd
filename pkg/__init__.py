"""Relay NOMA Link Analyzer - outage and ergodic rate evaluation for uplink NOMA over RF-FSO and RF/RF relays."""

__version__ = "1.0.0"
__author__ = "Relay NOMA Link Team"
__description__ = "Closed-form and Monte Carlo link analysis of two-user uplink NOMA over an amplify-and-forward relay"

from .models import (
    ScenarioConfig, ScenarioFile, NomaPair, FsoBackhaul, RfBackhaul,
    InterferenceProfile, Thresholds, McRun, McEstimate, MetricResult, ResultRow,
    Metric, RunMode, SicComposition, EvaluationMethod,
)
from .dependencies import EvaluationContext
from .settings import load_settings
from .outage import (
    decode_order_prob, backhaul_expectation, joint_u1_first, joint_u2_first,
    joint_cov_second_decoded, joint_sic_success, outage_user, outage_sum,
    oma_outage_user, oma_reference,
)
from .ergodic import coeff_recursion, interference_eei_expectation, avg_rate_user, avg_sum_rate, eb_expectation
from .mc import sinr_realization, simulate_outage, simulate_ergodic
from .scenario import load_scenario, load_scenario_file, dump_scenario, resolve_scenario
from .sweep import run_sweep, report_achievable, write_results_csv

__all__ = [
    # Closed forms
    "decode_order_prob",
    "backhaul_expectation",
    "joint_u1_first",
    "joint_u2_first",
    "joint_cov_second_decoded",
    "joint_sic_success",
    "outage_user",
    "outage_sum",
    "oma_outage_user",
    "oma_reference",
    "coeff_recursion",
    "interference_eei_expectation",
    "avg_rate_user",
    "avg_sum_rate",
    "eb_expectation",

    # Simulation
    "sinr_realization",
    "simulate_outage",
    "simulate_ergodic",

    # Scenarios and sweeps
    "load_scenario",
    "load_scenario_file",
    "dump_scenario",
    "resolve_scenario",
    "run_sweep",
    "report_achievable",
    "write_results_csv",

    # Models
    "ScenarioConfig",
    "ScenarioFile",
    "NomaPair",
    "FsoBackhaul",
    "RfBackhaul",
    "InterferenceProfile",
    "Thresholds",
    "McRun",
    "McEstimate",
    "MetricResult",
    "ResultRow",
    "Metric",
    "RunMode",
    "SicComposition",
    "EvaluationMethod",

    # Core components
    "EvaluationContext",
    "load_settings",
]
