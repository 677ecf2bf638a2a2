from pathlib import Path

import pytest

from satwin.scenario import load_scenario

REPO_ROOT = Path(__file__).resolve().parent.parent
SCENARIOS = REPO_ROOT / "scenarios"

SHIPPED = ["s1_wlan_to_sat", "s2_sat_to_wlan", "s3_multiflow", "s4_three_networks", "slow_start"]


def scenario_path(name: str) -> Path:
    return SCENARIOS / f"{name}.scn"


@pytest.fixture(scope="session")
def shipped_scenarios():
    return {name: load_scenario(scenario_path(name)) for name in SHIPPED}
