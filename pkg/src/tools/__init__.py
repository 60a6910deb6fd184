from .figures import firing_density_table, delay_density_table, herald_table, summarize
from .oracle_checks import run_oracle_suite, check_firing, check_pair_delays, check_heralded

__all__ = [
    "firing_density_table",
    "delay_density_table",
    "herald_table",
    "summarize",
    "run_oracle_suite",
    "check_firing",
    "check_pair_delays",
    "check_heralded"
]
