"""
Scenario files: TOML loading, validation, overrides and resolution.

A scenario file is validated against the ScenarioFile schema before any
numerics run, then resolved into a ScenarioConfig with every derived link
budget quantity materialized.
"""

import copy
import logging
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from pathlib import Path
from typing import Any, Optional

import tomli_w
from pydantic import ValidationError

from .channel import (
    build_interference_profile,
    db_to_linear,
    dbm_to_watts,
    fso_noise_constant,
    fso_path_loss,
    geometric_loss_a0,
    path_loss,
    power_allocation,
    rf_path_loss,
)
from .exceptions import DomainError, ScenarioValidationError
from .models import (
    FsoBackhaul,
    NomaPair,
    RfBackhaul,
    ScenarioConfig,
    ScenarioFile,
    Thresholds,
)

logger = logging.getLogger(__name__)


def _format_location(loc: tuple[Any, ...]) -> str:
    """('backhaul', 'fso', 'alpha') -> '[backhaul.fso] alpha'; ('backhaul',) -> '[backhaul]'."""
    parts = [str(p) for p in loc]
    if not parts:
        return "[]"
    if parts[0] == "backhaul" and len(parts) >= 2 and parts[1] in ("fso", "rf"):
        section, rest = parts[:2], parts[2:]
    else:
        section, rest = parts[:1], parts[1:]
    head = "[" + ".".join(section) + "]"
    return f"{head} {'.'.join(rest)}" if rest else head


def _validation_error(exc: ValidationError, source: str) -> ScenarioValidationError:
    first = exc.errors()[0]
    key = _format_location(tuple(first["loc"]))
    constraint = first["msg"]
    return ScenarioValidationError(
        f"{source}: {key}: {constraint}",
        key=key,
        constraint=constraint,
        error_count=exc.error_count(),
    )


def parse_scenario(data: dict[str, Any], source: str = "scenario") -> ScenarioFile:
    """Validate a decoded TOML document."""
    try:
        return ScenarioFile.model_validate(data)
    except ValidationError as e:
        raise _validation_error(e, source) from e


def load_scenario_file(path: str | Path) -> ScenarioFile:
    """Read and schema-validate a scenario file."""
    path = Path(path)
    try:
        with path.open("rb") as f:
            data = tomllib.load(f)
    except tomllib.TOMLDecodeError as e:
        raise ScenarioValidationError(f"{path}: not valid TOML: {e}", constraint="toml syntax") from e
    except OSError as e:
        raise ScenarioValidationError(f"cannot read scenario {path}: {e}", constraint="readable file") from e
    return parse_scenario(data, str(path))


def dump_scenario(document: ScenarioFile, path: str | Path) -> None:
    """Write a scenario file that load_scenario_file reads back unchanged."""
    data = document.model_dump(mode="json", exclude_none=True)
    with Path(path).open("wb") as f:
        tomli_w.dump(data, f)


def apply_overrides(document: ScenarioFile, overrides: dict[str, float]) -> ScenarioFile:
    """
    Copy of the document with dotted-path overrides applied and re-validated.

    Paths address the TOML tree, e.g. "users.tx_power_dbm" or "backhaul.fso.alpha".
    """
    if not overrides:
        return document
    data = copy.deepcopy(document.model_dump(mode="json", exclude_none=True))
    for path, value in overrides.items():
        node = data
        keys = path.split(".")
        for key in keys[:-1]:
            if not isinstance(node.get(key), dict):
                raise ScenarioValidationError(
                    f"override {path!r} does not name a scenario key",
                    key=path, constraint="existing section",
                )
            node = node[key]
        node[keys[-1]] = value
    return parse_scenario(data, f"{document.name} with overrides {sorted(overrides)}")


def resolve_scenario(
    document: ScenarioFile,
    distinct_rel_tol: float = 1e-9,
    jitter: bool = False,
) -> ScenarioConfig:
    """
    Materialize path losses, power split, backhaul constants, interference terms and thresholds.

    Raises:
        ScenarioValidationError: When a physical constraint fails (user ordering, aperture)
        DistinctnessError: When interference terms coincide and jitter is off
    """
    users = document.users
    try:
        l1 = rf_path_loss(users.user1)
        l2 = rf_path_loss(users.user2)
        a1, a2 = power_allocation(l1, l2, users.s_db)
    except DomainError as e:
        raise ScenarioValidationError(
            f"{document.name}: {e}", key="[users] user1.distance_m", constraint="L1 >= L2",
        ) from e

    tx_power_w = dbm_to_watts(users.tx_power_dbm)
    section = document.backhaul
    try:
        if section.fso is not None:
            fso = section.fso
            g_l = fso_path_loss(fso.responsivity, fso.attenuation_per_m, fso.length_m)
            backhaul = FsoBackhaul(
                alpha=fso.alpha,
                beta=fso.beta,
                xi=fso.xi,
                a0=geometric_loss_a0(fso.aperture_radius_m, fso.divergence_rad, fso.length_m),
                g_l=g_l,
                relay_gain=fso.relay_gain,
                c_d=fso_noise_constant(fso.dest_noise_a2, fso.conversion_eta, g_l, fso.relay_gain),
            )
        else:
            rf = section.rf
            backhaul = RfBackhaul(
                omega=db_to_linear(rf.rician_omega_db),
                l_b=path_loss(rf.length_m, rf.tx_gain_dbi, rf.rx_gain_dbi, rf.ref_distance_m,
                              rf.pathloss_exponent, rf.carrier_freq_hz),
                g_b=rf.relay_gain,
                n0=dbm_to_watts(rf.dest_noise_dbm),
            )
        pair = NomaPair(l1=l1, l2=l2, tx_power_w=tx_power_w, s_db=users.s_db, a1=a1, a2=a2)
    except (ValidationError, DomainError) as e:
        raise ScenarioValidationError(
            f"{document.name}: derived backhaul quantities are invalid: {e}",
            key=f"[backhaul.{section.kind.value}]", constraint="physical backhaul",
        ) from e

    interference = document.interference
    p0 = dbm_to_watts(interference.reference_power_dbm)
    relay_terms = [interference.relay_scale * p0 * l2 * w for w in interference.relay_weights] \
        if interference.relay_scale > 0 else []
    dest_terms: list[float] = []
    if interference.dest_scale > 0:
        if isinstance(backhaul, FsoBackhaul):
            logger.warning(f"{document.name}: dest_scale ignored for an FSO backhaul")
        else:
            dest_terms = [interference.dest_scale * p0 * l2 * w for w in interference.dest_weights]
    profile = build_interference_profile(relay_terms, dest_terms, distinct_rel_tol, jitter)

    th = document.thresholds

    def gamma_of(gamma: Optional[float], rate: Optional[float]) -> Optional[float]:
        return gamma if rate is None else 2.0 ** rate - 1.0

    thresholds = Thresholds(
        gamma1=gamma_of(th.gamma1, th.rate1_bps_hz),
        gamma2=gamma_of(th.gamma2, th.rate2_bps_hz),
        gamma_sum=gamma_of(th.gamma_sum, th.rate_sum_bps_hz),
    )

    return ScenarioConfig(
        name=document.name,
        pair=pair,
        relay_noise_w=dbm_to_watts(users.relay_noise_dbm),
        backhaul=backhaul,
        interference=profile,
        thresholds=thresholds,
    )


def link_budget(config: ScenarioConfig) -> dict[str, Any]:
    """Derived quantities of a resolved scenario, for echoing and the describe command."""
    pair = config.pair
    budget: dict[str, Any] = {
        "L1": pair.l1,
        "L2": pair.l2,
        "a1": pair.a1,
        "a2": pair.a2,
        "P [W]": pair.tx_power_w,
        "sigma_R^2 [W]": config.relay_noise_w,
    }
    backhaul = config.backhaul
    if isinstance(backhaul, FsoBackhaul):
        budget.update({"g_l": backhaul.g_l, "A0": backhaul.a0, "C_D": backhaul.c_d})
    else:
        budget.update({"Omega": backhaul.omega, "L_b": backhaul.l_b, "G_b": backhaul.g_b,
                       "C_D^RF": backhaul.c_d_rf})
    budget["relay interferers"] = list(config.interference.relay_terms)
    budget["destination interferers"] = list(config.interference.dest_terms)
    return budget


def load_scenario(path: str | Path, distinct_rel_tol: float = 1e-9, jitter: bool = False) -> ScenarioConfig:
    """Load, validate and resolve a scenario file, echoing its link budget."""
    config = resolve_scenario(load_scenario_file(path), distinct_rel_tol, jitter)
    scalars = ", ".join(
        f"{key}={value:.4g}" for key, value in link_budget(config).items() if isinstance(value, float)
    )
    logger.info(f"Loaded scenario {config.name} ({config.backhaul.kind}): {scalars}")
    return config
