"""Dynamical decoupling of dephasing atomic ensembles.

Modules
-------
sequences     pulse sequences (free, CPMG, eta family, UDD, custom)
noise         detuning baths (Lorentzian, tabulated)
decoherence   filter functions, coherence integral, coherence times
optimize      Nelder-Mead timing optimization, eta scan, CPMG vs UDD
montecarlo    seeded jump-process ensemble simulator
tomography    Bloch vectors, channels, state and process tomography
"""
from .errors import FitFailure, InvalidArgument, NotFound, NumericFailure
from .noise import LorentzianBath, TabulatedBath
from .sequences import PulseSequence, cpmg, custom, eta_family, fixed_rate, free_evolution, udd

__version__ = "0.1.0"

__all__ = [
    "FitFailure",
    "InvalidArgument",
    "NotFound",
    "NumericFailure",
    "LorentzianBath",
    "TabulatedBath",
    "PulseSequence",
    "cpmg",
    "custom",
    "eta_family",
    "fixed_rate",
    "free_evolution",
    "udd",
]
