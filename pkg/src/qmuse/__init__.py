"""Generative music from simulated qubit measurements.

Modules: ``qcore`` (statevector emulator), ``rhythm``, ``timbre``,
``harmony``, ``spatial``, ``render`` and the ``qmuse`` command line.
"""

from .qcore import QuantumState, new_state, apply_gate, probability_of_one, rx_angle_for_probability
from .rng import RngStream

__version__ = "0.1.0"

__all__ = [
    "QuantumState",
    "RngStream",
    "apply_gate",
    "new_state",
    "probability_of_one",
    "rx_angle_for_probability",
]
