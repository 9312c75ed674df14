from .prober import ConnectivityProber, probe_connectivity
from .report import LatencyReport, RepetitionResult, parse_records, render_report
from .scenario import AttackEvent, ScenarioConfig, inject_attack, run_scenario

__all__ = [
    "ConnectivityProber",
    "probe_connectivity",
    "LatencyReport",
    "RepetitionResult",
    "parse_records",
    "render_report",
    "AttackEvent",
    "ScenarioConfig",
    "inject_attack",
    "run_scenario",
]
