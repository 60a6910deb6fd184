"""
Central registry mapping CLI subcommands to the table builders that run them.
"""

from dataclasses import dataclass
from typing import Callable, Dict, List

import pandas as pd

from src.data.scenario_config import ScenarioConfig
from src.tools.figures import delay_density_table, firing_density_table, herald_table
from src.tools.oracle_checks import run_oracle_suite

Runner = Callable[[ScenarioConfig, int], pd.DataFrame]


@dataclass(frozen=True)
class Command:
    name: str
    runner: Runner
    description: str
    is_oracle: bool = False


def _figure(builder: Callable[[ScenarioConfig], pd.DataFrame]) -> Runner:
    def run(config: ScenarioConfig, n_jobs: int) -> pd.DataFrame:
        return builder(config)
    run.__name__ = builder.__name__
    return run


COMMAND_REGISTRY: Dict[str, Command] = {
    "density": Command("density", _figure(firing_density_table),
                       "First-click time densities for k photons (columns T,p_on...)."),
    "delay": Command("delay", _figure(delay_density_table),
                     "Start-stop delay densities of photon pairs (columns delta,p...)."),
    "herald": Command("herald", _figure(herald_table),
                      "Heralded-state weights given a herald click (columns t,w...)."),
    "oracle-check": Command("oracle-check", run_oracle_suite,
                            "KS and click-fraction checks of the analytic densities against Monte Carlo.",
                            is_oracle=True),
}


def get_command(name: str) -> Command:
    try:
        return COMMAND_REGISTRY[name]
    except KeyError:
        raise KeyError(f"Unknown command '{name}'. Available: {', '.join(COMMAND_REGISTRY)}") from None


def list_commands() -> List[str]:
    return list(COMMAND_REGISTRY)


def command_summary() -> str:
    """One line per command, for --help epilogs."""
    width = max(len(name) for name in COMMAND_REGISTRY)
    return "\n".join(f"  {name:<{width}}  {cmd.description}" for name, cmd in COMMAND_REGISTRY.items())
