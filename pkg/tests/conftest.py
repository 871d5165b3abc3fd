"""Test configuration and fixtures for the relay NOMA link analyzer."""

from pathlib import Path

import pytest

from ..channel import build_interference_profile, power_allocation
from ..dependencies import EvaluationContext
from ..models import FsoBackhaul, NomaPair, RfBackhaul, ScenarioConfig, Thresholds
from ..scenario import apply_overrides, load_scenario_file, resolve_scenario
from ..settings import Settings


SCENARIO_DIR = Path(__file__).parent.parent / "scenarios"

# Access path losses of the factory scenarios, L1 >= L2
ACCESS_L1, ACCESS_L2 = 9.04e-8, 8e-9


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: Monte Carlo cross-checks at 10^6 draws")


@pytest.fixture
def mock_settings():
    """Mock settings for testing."""
    return Settings(
        log_level="DEBUG",
        mc_threads=2,
        mc_block_size=20000,
        default_mc_iterations=200000,
        default_seed=7,
        sweep_workers=2,
    )


@pytest.fixture
def ctx(mock_settings):
    """Evaluation context built from the mock settings."""
    return EvaluationContext.from_settings(mock_settings)


@pytest.fixture
def scenario_dir():
    """Directory of the bundled scenario files."""
    return SCENARIO_DIR


@pytest.fixture
def fso_document():
    """Schema-validated RF-FSO outage sweep document."""
    return load_scenario_file(SCENARIO_DIR / "fso_outage_power_sweep.toml")


@pytest.fixture
def rf_document():
    """Schema-validated RF/RF outage sweep document."""
    return load_scenario_file(SCENARIO_DIR / "rf_outage_power_sweep.toml")


@pytest.fixture
def fso_scenario(fso_document):
    """RF-FSO system at P = 30 dBm, s = 10 dB with all three thresholds."""
    document = apply_overrides(fso_document, {
        "users.tx_power_dbm": 30.0,
        "users.s_db": 10.0,
        "thresholds.gamma_sum": 1.2,
    })
    return resolve_scenario(document)


@pytest.fixture
def rf_scenario(rf_document):
    """RF/RF system without destination interference at P = 30 dBm."""
    return resolve_scenario(apply_overrides(rf_document, {"users.tx_power_dbm": 30.0}))


@pytest.fixture
def rf_dest_scenario(rf_document):
    """RF/RF system with destination interference scale 0.1 at P = 30 dBm."""
    return resolve_scenario(apply_overrides(rf_document, {
        "users.tx_power_dbm": 30.0,
        "interference.dest_scale": 0.1,
    }))


@pytest.fixture
def scenario_factory():
    """Build a resolved scenario directly from normalized quantities."""

    def build(
        backhaul: str = "fso",
        relay_terms=(),
        dest_terms=(),
        s_db: float = 10.0,
        tx_power_w: float = 1.0,
        relay_noise_w: float = 1e-9,
        gamma1: float = 0.8,
        gamma2: float = 0.4,
        gamma_sum: float = 1.2,
        omega: float = 3.98,
        a0: float = 3.47e-3,
    ) -> ScenarioConfig:
        l1, l2 = ACCESS_L1, ACCESS_L2
        a1, a2 = power_allocation(l1, l2, s_db, allow_negative=True)
        if backhaul == "fso":
            link = FsoBackhaul(alpha=4.0, beta=2.0, xi=2.0, a0=a0, g_l=0.3, relay_gain=100.0, c_d=1e-14)
        else:
            link = RfBackhaul(omega=omega, l_b=1e-7, g_b=1000.0, n0=1e-11)
        return ScenarioConfig(
            name=f"{backhaul}_test",
            pair=NomaPair(l1=l1, l2=l2, tx_power_w=tx_power_w, s_db=s_db, a1=a1, a2=a2),
            relay_noise_w=relay_noise_w,
            backhaul=link,
            interference=build_interference_profile(relay_terms, dest_terms),
            thresholds=Thresholds(gamma1=gamma1, gamma2=gamma2, gamma_sum=gamma_sum),
        )

    return build


@pytest.fixture
def swapped_pair(scenario_factory):
    """
    A factory scenario at back-off s and the same pair with the users' roles exchanged.

    The exchanged pair runs at -s with both thresholds swapped and the power
    rescaled so that its received signal scales are the original ones in
    reverse order.
    """

    def build(s_db: float, tx_power_w: float = 1.0, gamma1: float = 0.8, gamma2: float = 0.4, **kwargs):
        q = 10.0 ** (s_db / 10.0)
        original = scenario_factory(s_db=s_db, tx_power_w=tx_power_w, gamma1=gamma1, gamma2=gamma2, **kwargs)
        mirrored = scenario_factory(
            s_db=-s_db,
            tx_power_w=tx_power_w * (q * ACCESS_L1 + ACCESS_L2) / (ACCESS_L1 + q * ACCESS_L2),
            gamma1=gamma2,
            gamma2=gamma1,
            **kwargs,
        )
        return original, mirrored

    return build
