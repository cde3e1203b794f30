"""Monte Carlo link simulation and training-time perturbation operators."""

from uepopt.sim.link import (
    BitFrame,
    FadingChannel,
    MeasuredReport,
    Quantizer,
    bits_from_levels,
    end_to_end_run,
    levels_from_bits,
    load_features,
    load_levels,
    simulate_ber,
    synthetic_features,
    transmit,
)
from uepopt.sim.perturb import (
    apply_nested_dropout,
    ber_matching_perturb,
    bsc_perturb,
    draw_matched_bers,
    nested_dropout_mask,
)
from uepopt.sim.qam import constellation, qam_demodulate, qam_modulate

__all__ = [
    "BitFrame",
    "FadingChannel",
    "MeasuredReport",
    "Quantizer",
    "apply_nested_dropout",
    "ber_matching_perturb",
    "bits_from_levels",
    "bsc_perturb",
    "constellation",
    "draw_matched_bers",
    "end_to_end_run",
    "levels_from_bits",
    "load_features",
    "load_levels",
    "nested_dropout_mask",
    "qam_demodulate",
    "qam_modulate",
    "simulate_ber",
    "synthetic_features",
    "transmit",
]
