"""Physical-memory permission table simulator with boot-time lockdown and an attack harness."""

from ._backend import BACKEND
from .harness import Scenario, ScenarioReport, run_scenario, standard_suite
from .kernel_sim import BootConfig, BootStats, load_and_boot
from .machine import Machine, MachineConfig, TrapCause
from .perm_table import AccessKind, AccessVerdict, PermissionTable, check_access

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "AccessKind",
    "AccessVerdict",
    "BootConfig",
    "BootStats",
    "Machine",
    "MachineConfig",
    "PermissionTable",
    "Scenario",
    "ScenarioReport",
    "TrapCause",
    "check_access",
    "load_and_boot",
    "run_scenario",
    "standard_suite",
]
