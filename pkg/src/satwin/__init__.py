"""satwin: TCP bulk transfer across terrestrial/satellite handovers.

Deterministic discrete-event simulation of a mobile receiver moving between
WLAN/GPRS and geostationary satellite access, with a proactive engine that
shapes the advertised receive window around each handover and a baseline
mode for comparison.
"""

from .errors import ConfigError, ProtocolViolation
from .kernel import Kernel, SimError
from .runner import Simulation, compare, run
from .scenario import Scenario, load_scenario, parse_scenario

__all__ = [
    "ConfigError",
    "Kernel",
    "ProtocolViolation",
    "Scenario",
    "SimError",
    "Simulation",
    "compare",
    "load_scenario",
    "parse_scenario",
    "run",
]
