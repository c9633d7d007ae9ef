"""Rescaled (post-selected) average-value estimation for noisy holonomic qutrit circuits."""
from .algebra import (PauliLabel, Subset, all_labels, build_error_operator, classify_label, pauli_x,
                      pauli_z)
from .analysis import (DetectionReport, LogicalAmplitudeDecomposition, closed_form_detection,
                       decompose_on_pair, run_experiment, simulate_detection, subset_sums)
from .config import ExperimentConfig, load_config
from .estimation import (EstimationResult, Observable, OutcomeDistribution, estimate_conventional,
                         estimate_rescaled, exact_distribution, observable_from_logical, sample_distribution)
from .holonomy import (HolonomicGate, HolonomyReport, PulseSchedule, embed_logical_unitary,
                       gate_from_schedule, integrate_schedule)
from .noise import NoiseDraw, NoiseSpec, apply_noisy_circuit, error_distribution, sample_noise
from .state import (DensityMatrix, QutritState, apply_two_site, basis_state, leak_probability,
                    project_logical)

__version__ = "0.1.0"
