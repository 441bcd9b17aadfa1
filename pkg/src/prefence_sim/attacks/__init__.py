from .catalog import CATALOG, SCENARIO_FLOWS, AttackFlow, Stage, validate_catalog
from .leakage import LeakageReport, at_chance, chance_interval
from .scenarios import (SCENARIOS, run_afterimage_v1, run_dmp, run_scenario, run_shin,
                        run_smt_bypass_regression, run_sms)

__all__ = [
    "CATALOG", "SCENARIO_FLOWS", "AttackFlow", "Stage", "validate_catalog",
    "LeakageReport", "at_chance", "chance_interval",
    "SCENARIOS", "run_afterimage_v1", "run_dmp", "run_scenario", "run_shin",
    "run_smt_bypass_regression", "run_sms",
]
