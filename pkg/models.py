"""Pydantic models for the relay NOMA link analyzer."""

import math
from enum import Enum
from typing import Annotated, ClassVar, Literal, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, model_validator

from .specfun import MeijerGFsoParams


# Normalized interferer power profiles (uniform draws, length 10).
RELAY_INTERFERENCE_WEIGHTS = (
    0.6957, 0.6279, 0.4504, 0.4736, 0.9497, 0.0835, 0.2798, 0.4470, 0.5876, 0.8776,
)
DEST_INTERFERENCE_WEIGHTS = (
    0.5259, 0.9635, 0.5688, 0.2584, 0.2959, 0.7439, 0.9797, 0.3491, 0.8371, 0.5587,
)


class BackhaulKind(str, Enum):
    """Backhaul technology between relay and destination."""
    FSO = "fso"
    RF = "rf"


class BackhaulExpectationKind(str, Enum):
    """Which destination-side expectation a closed form needs."""
    FSO_CALG = "fso_calg"
    RF_NO_DEST_INTERF = "rf_no_dest_interf"
    RF_WITH_DEST_INTERF = "rf_with_dest_interf"


class EvaluationMethod(str, Enum):
    """How a number was obtained."""
    CLOSED_FORM = "closed_form"
    MONTE_CARLO = "monte_carlo"
    QUADRATURE = "quadrature"
    CONTOUR = "contour"
    SERIES = "series"


class SicComposition(str, Enum):
    """How the second-decoded success event is composed."""
    EXACT = "exact"
    PRODUCT = "product"


class RunMode(str, Enum):
    """Sweep evaluation mode."""
    CLOSED = "closed"
    MC = "mc"
    BOTH = "both"


class Metric(str, Enum):
    """Quantities a sweep can emit."""
    OUTAGE_USER1 = "outage_user1"
    OUTAGE_USER2 = "outage_user2"
    OUTAGE_SUM = "outage_sum"
    OMA_OUTAGE_USER1 = "oma_outage_user1"
    OMA_OUTAGE_USER2 = "oma_outage_user2"
    OMA_OUTAGE_SUM = "oma_outage_sum"
    RATE_USER1 = "rate_user1"
    RATE_USER2 = "rate_user2"
    SUM_RATE = "sum_rate"
    OMA_RATE_USER1 = "oma_rate_user1"
    OMA_RATE_USER2 = "oma_rate_user2"
    OMA_SUM_RATE = "oma_sum_rate"
    ACHIEVABLE_USER1 = "achievable_user1"
    ACHIEVABLE_USER2 = "achievable_user2"
    ACHIEVABLE_SUM = "achievable_sum"
    P_ORDER1 = "p_order1"
    JOINT_U1_FIRST = "joint_u1_first"
    JOINT_U2_FIRST = "joint_u2_first"
    COV_U1_SECOND = "cov_u1_second"
    COV_U2_SECOND = "cov_u2_second"


# ---------------------------------------------------------------------------
# Scenario file sections (user-facing, units in key names)
# ---------------------------------------------------------------------------

class AccessLink(BaseModel):
    """User-to-relay RF access link."""
    model_config = ConfigDict(extra="forbid", frozen=True)

    distance_m: float = Field(..., gt=0)
    tx_gain_dbi: float = 5.0
    rx_gain_dbi: float = 8.0
    ref_distance_m: float = Field(80.0, gt=0)
    pathloss_exponent: float = Field(3.5, gt=2)
    carrier_freq_hz: float = Field(3e9, gt=0)

    @model_validator(mode="after")
    def check_far_field(self) -> "AccessLink":
        if self.distance_m < self.ref_distance_m:
            raise ValueError(
                f"distance_m={self.distance_m} is inside the reference distance {self.ref_distance_m}"
            )
        return self


class UsersSection(BaseModel):
    """[users]: NOMA pair, transmit power and relay noise."""
    model_config = ConfigDict(extra="forbid")

    tx_power_dbm: float = 30.0
    s_db: float = Field(10.0, ge=0, description="Power back-off step")
    relay_noise_dbm: float = -80.0
    user1: AccessLink
    user2: AccessLink


class FsoBackhaulSection(BaseModel):
    """[backhaul.fso]: Gamma-Gamma turbulence with pointing error."""
    model_config = ConfigDict(extra="forbid")

    alpha: float = Field(4.0, gt=0)
    beta: float = Field(2.0, gt=0)
    xi: float = Field(2.0, gt=0)
    responsivity: float = Field(0.5, gt=0)
    attenuation_per_m: float = Field(0.43e-3, ge=0)
    length_m: float = Field(1200.0, gt=0)
    aperture_radius_m: float = Field(0.1, gt=0)
    divergence_rad: float = Field(2e-3, gt=0)
    conversion_eta: float = Field(1.0, gt=0)
    relay_gain: float = Field(100.0, gt=0)
    dest_noise_a2: float = Field(1e-14, gt=0)


class RfBackhaulSection(BaseModel):
    """[backhaul.rf]: Rician relay-destination link."""
    model_config = ConfigDict(extra="forbid")

    rician_omega_db: float = 6.0
    length_m: float = Field(1200.0, gt=0)
    tx_gain_dbi: float = 10.0
    rx_gain_dbi: float = 15.0
    ref_distance_m: float = Field(80.0, gt=0)
    pathloss_exponent: float = Field(3.5, gt=2)
    carrier_freq_hz: float = Field(3e9, gt=0)
    relay_gain: float = Field(1000.0, gt=0)
    dest_noise_dbm: float = -80.0


class BackhaulSection(BaseModel):
    """[backhaul]: exactly one of fso / rf."""
    model_config = ConfigDict(extra="forbid")

    fso: Optional[FsoBackhaulSection] = None
    rf: Optional[RfBackhaulSection] = None

    @model_validator(mode="after")
    def check_exactly_one(self) -> "BackhaulSection":
        if (self.fso is None) == (self.rf is None):
            raise ValueError("exactly one of [backhaul.fso] or [backhaul.rf] must be given")
        return self

    @property
    def kind(self) -> BackhaulKind:
        return BackhaulKind.FSO if self.fso is not None else BackhaulKind.RF


class InterferenceSection(BaseModel):
    """[interference]: co-channel interferers at the relay and destination."""
    model_config = ConfigDict(extra="forbid")

    relay_scale: float = Field(1.0, ge=0, description="Scale on the relay interferer powers")
    dest_scale: float = Field(0.0, ge=0, description="Scale on the destination interferer powers")
    reference_power_dbm: float = Field(0.0, description="P0")
    relay_weights: list[float] = Field(default_factory=lambda: list(RELAY_INTERFERENCE_WEIGHTS))
    dest_weights: list[float] = Field(default_factory=lambda: list(DEST_INTERFERENCE_WEIGHTS))


class ThresholdsSection(BaseModel):
    """[thresholds]: each target given either as an SINR or as a rate."""
    model_config = ConfigDict(extra="forbid")

    gamma1: Optional[float] = Field(None, ge=0)
    gamma2: Optional[float] = Field(None, ge=0)
    gamma_sum: Optional[float] = Field(None, ge=0)
    rate1_bps_hz: Optional[float] = Field(None, ge=0)
    rate2_bps_hz: Optional[float] = Field(None, ge=0)
    rate_sum_bps_hz: Optional[float] = Field(None, ge=0)

    @model_validator(mode="after")
    def check_single_spec(self) -> "ThresholdsSection":
        for gamma_key, rate_key in (
            ("gamma1", "rate1_bps_hz"),
            ("gamma2", "rate2_bps_hz"),
            ("gamma_sum", "rate_sum_bps_hz"),
        ):
            if getattr(self, gamma_key) is not None and getattr(self, rate_key) is not None:
                raise ValueError(f"give either {gamma_key} or {rate_key}, not both")
        return self


class McSection(BaseModel):
    """[mc]: Monte Carlo run parameters."""
    model_config = ConfigDict(extra="forbid")

    iterations: int = Field(1_000_000, ge=1000)
    seed: int = Field(20240601, ge=0)
    block_size: int = Field(65536, ge=1000)


class SeriesSpec(BaseModel):
    """One curve of a sweep: a label and dotted-path overrides."""
    model_config = ConfigDict(extra="forbid")

    label: str
    overrides: dict[str, float] = Field(default_factory=dict)


class SweepSection(BaseModel):
    """[sweep]: axis, grid and the metrics to emit."""
    model_config = ConfigDict(extra="forbid")

    axis: str = Field(..., description="Dotted path, e.g. users.tx_power_dbm")
    values: Optional[list[float]] = None
    start: Optional[float] = None
    stop: Optional[float] = None
    num: Optional[int] = Field(None, ge=1)
    metrics: list[Metric] = Field(..., min_length=1)
    series: list[SeriesSpec] = Field(default_factory=list)

    @model_validator(mode="after")
    def check_grid(self) -> "SweepSection":
        linear = (self.start, self.stop, self.num)
        if self.values is None and any(v is None for v in linear):
            raise ValueError("give either values or start/stop/num")
        if self.values is not None and any(v is not None for v in linear):
            raise ValueError("values and start/stop/num are mutually exclusive")
        return self

    @property
    def grid(self) -> list[float]:
        """Axis points in emission order."""
        if self.values is not None:
            return list(self.values)
        if self.num == 1:
            return [float(self.start)]
        step = (self.stop - self.start) / (self.num - 1)
        return [self.start + i * step for i in range(self.num)]


class ScenarioFile(BaseModel):
    """Whole scenario document as read from TOML."""
    model_config = ConfigDict(extra="forbid")

    name: str = "scenario"
    description: str = ""
    users: UsersSection
    backhaul: BackhaulSection
    interference: InterferenceSection = Field(default_factory=InterferenceSection)
    thresholds: ThresholdsSection = Field(default_factory=ThresholdsSection)
    mc: McSection = Field(default_factory=McSection)
    sweep: Optional[SweepSection] = None


# ---------------------------------------------------------------------------
# Resolved scenario (derived quantities materialized)
# ---------------------------------------------------------------------------

class NomaPair(BaseModel):
    """Two NOMA users with their path losses and power split."""
    model_config = ConfigDict(frozen=True)

    l1: float = Field(..., gt=0)
    l2: float = Field(..., gt=0)
    tx_power_w: float = Field(..., ge=0)
    s_db: float
    a1: float = Field(..., gt=0, lt=1)
    a2: float = Field(..., gt=0, lt=1)

    @property
    def s_linear(self) -> float:
        return 10.0 ** (self.s_db / 10.0)

    @property
    def base1(self) -> float:
        """a1 L1 P, the received signal scale of user 1."""
        return self.a1 * self.l1 * self.tx_power_w

    @property
    def base2(self) -> float:
        """a2 L2 P, the received signal scale of user 2."""
        return self.a2 * self.l2 * self.tx_power_w


class FsoBackhaul(BaseModel):
    """Resolved FSO backhaul: fading parameters and electrical noise term."""
    model_config = ConfigDict(frozen=True)

    kind: Literal["fso"] = "fso"
    alpha: float = Field(..., gt=0)
    beta: float = Field(..., gt=0)
    xi: float = Field(..., gt=0)
    a0: float = Field(..., gt=0, lt=1)
    g_l: float = Field(..., gt=0)
    relay_gain: float = Field(..., gt=0)
    c_d: float = Field(..., ge=0, description="sigma_D^2 / (eta^2 g_l^2 G^2)")

    @property
    def fading(self) -> MeijerGFsoParams:
        return MeijerGFsoParams(alpha=self.alpha, beta=self.beta, xi=self.xi, a0=self.a0)


class RfBackhaul(BaseModel):
    """Resolved Rician RF backhaul."""
    model_config = ConfigDict(frozen=True)

    kind: Literal["rf"] = "rf"
    omega: float = Field(..., ge=0, description="Rician factor, linear")
    l_b: float = Field(..., gt=0)
    g_b: float = Field(..., gt=0)
    n0: float = Field(..., ge=0)

    @property
    def gain(self) -> float:
        """L_b G_b^2."""
        return self.l_b * self.g_b ** 2

    @property
    def c_d_rf(self) -> float:
        return self.n0 / self.gain


class InterferenceProfile(BaseModel):
    """Co-channel interference powers L'_k p'_k (relay) and L''_j p''_j (destination)."""
    model_config = ConfigDict(frozen=True)

    relay_terms: tuple[float, ...] = ()
    dest_terms: tuple[float, ...] = ()

    @model_validator(mode="after")
    def check_positive(self) -> "InterferenceProfile":
        if any(t <= 0 for t in self.relay_terms + self.dest_terms):
            raise ValueError("interference terms must be positive")
        return self


class Thresholds(BaseModel):
    """Threshold SINRs; rates follow gamma = 2^R - 1."""
    model_config = ConfigDict(frozen=True)

    gamma1: Optional[float] = Field(None, ge=0)
    gamma2: Optional[float] = Field(None, ge=0)
    gamma_sum: Optional[float] = Field(None, ge=0)

    @staticmethod
    def rate_of(gamma: Optional[float]) -> Optional[float]:
        return None if gamma is None else math.log2(1.0 + gamma)

    @property
    def rate1(self) -> Optional[float]:
        return self.rate_of(self.gamma1)

    @property
    def rate2(self) -> Optional[float]:
        return self.rate_of(self.gamma2)

    @property
    def rate_sum(self) -> Optional[float]:
        return self.rate_of(self.gamma_sum)


Backhaul = Annotated[Union[FsoBackhaul, RfBackhaul], Field(discriminator="kind")]


class ScenarioConfig(BaseModel):
    """Fully validated system description used by every evaluator."""
    model_config = ConfigDict(frozen=True)

    name: str = "scenario"
    pair: NomaPair
    relay_noise_w: float = Field(..., ge=0)
    backhaul: Backhaul
    interference: InterferenceProfile = Field(default_factory=InterferenceProfile)
    thresholds: Thresholds = Field(default_factory=Thresholds)

    @property
    def expectation_kind(self) -> BackhaulExpectationKind:
        if isinstance(self.backhaul, FsoBackhaul):
            return BackhaulExpectationKind.FSO_CALG
        if self.interference.dest_terms:
            return BackhaulExpectationKind.RF_WITH_DEST_INTERF
        return BackhaulExpectationKind.RF_NO_DEST_INTERF


# ---------------------------------------------------------------------------
# Results
# ---------------------------------------------------------------------------

class McEstimate(BaseModel):
    """Monte Carlo estimate with its standard error."""
    mean: float
    std_error: float = Field(..., ge=0)
    n: int = Field(..., ge=1)

    @property
    def ci95(self) -> tuple[float, float]:
        half = 1.959963984540054 * self.std_error
        return (self.mean - half, self.mean + half)

    def agrees_with(self, value: float, sigmas: float = 3.0, floor: float = 0.0) -> bool:
        """True when value lies within `sigmas` standard errors (plus an absolute floor)."""
        return abs(value - self.mean) <= sigmas * self.std_error + floor


class MetricResult(BaseModel):
    """A probability or rate tagged with how it was evaluated."""
    metric: Metric
    value: float
    method: EvaluationMethod
    estimate: Optional[McEstimate] = None


class McRun(BaseModel):
    """Monte Carlo run description."""
    model_config = ConfigDict(frozen=True)

    iterations: int = Field(..., ge=1000)
    master_seed: int = Field(..., ge=0, lt=2 ** 64)
    block_size: int = Field(65536, ge=1)
    scenario: ScenarioConfig

    @property
    def block_count(self) -> int:
        return -(-self.iterations // self.block_size)

    def block_length(self, index: int) -> int:
        """Draws in block `index`; only the last block may be short."""
        return min(self.block_size, self.iterations - index * self.block_size)


class ResultRow(BaseModel):
    """One CSV row: (series, axis point, metric)."""
    CSV_COLUMNS: ClassVar[tuple[str, ...]] = (
        "series", "axis", "metric", "method", "closed_form", "mc_mean", "mc_stderr",
        "agree_3sigma", "wall_ms", "error",
    )

    series: str = ""
    axis: float
    metric: Metric
    method: Optional[EvaluationMethod] = None
    closed_form: Optional[float] = None
    mc_mean: Optional[float] = None
    mc_stderr: Optional[float] = None
    agree_3sigma: Optional[bool] = None
    wall_ms: float = 0.0
    error: Optional[str] = None

    def to_csv_record(self) -> list[str]:
        """Locale-independent text cells in CSV_COLUMNS order."""
        def number(value: Optional[float]) -> str:
            return "" if value is None else repr(float(value))

        flag = "" if self.agree_3sigma is None else str(self.agree_3sigma).lower()
        return [
            self.series,
            repr(float(self.axis)),
            self.metric.value,
            self.method.value if self.method is not None else "",
            number(self.closed_form),
            number(self.mc_mean),
            number(self.mc_stderr),
            flag,
            f"{self.wall_ms:.3f}",
            self.error or "",
        ]
