"""Simulation and analysis of noisy quantum Fourier models."""

__version__ = "0.1.0"

from .circuits import CircuitLayout, EncodingSpec, build_circuit, evaluate, evaluate_grid, simulate, strip_for_metrics
from .fourier import (analytic_spectrum, coefficient_stats, extract_coefficients, quadrature_oracle,
                      redundancy_count, spectrum_occupancy)
from .metrics import eof, entangling_capability, expressibility, haar_bin_probabilities, mw_entanglement
from .noise import NoiseModel, kraus_for
from .training import TrainingConfig, generate_target, gradient, train

__all__ = [
    "CircuitLayout", "EncodingSpec", "NoiseModel", "TrainingConfig", "analytic_spectrum",
    "build_circuit", "coefficient_stats", "entangling_capability", "eof", "evaluate",
    "evaluate_grid", "expressibility", "extract_coefficients", "generate_target", "gradient",
    "haar_bin_probabilities", "kraus_for", "mw_entanglement", "quadrature_oracle",
    "redundancy_count", "simulate", "spectrum_occupancy", "strip_for_metrics", "train",
]
