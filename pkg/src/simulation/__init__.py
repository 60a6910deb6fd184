from .montecarlo import (
    ClickHistogram,
    simulate_firing,
    simulate_pair_delays,
    simulate_heralded,
    ks_distance,
    ks_bound,
    click_fractions,
)

__all__ = [
    "ClickHistogram",
    "simulate_firing",
    "simulate_pair_delays",
    "simulate_heralded",
    "ks_distance",
    "ks_bound",
    "click_fractions"
]
