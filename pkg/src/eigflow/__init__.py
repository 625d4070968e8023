"""Eigenvalue diffusions as quotients of matrix Brownian motions.

Matrix-level and spectral-level simulation of Dyson, Wishart and Dynkin
processes, orbit-volume geometry, and Monte Carlo checks that tie the two
levels together.
"""
from .geometry import (DriftVariant, ProcessKind, Spectrum, grad_log_volume, log_orbit_volume,
                       mean_curvature_drift, spectral_drift)
from .matcore import eig_sym, eigvals_sym, singular_values, svd
from .processes import Ensemble, ProcessSpec, Trajectory, run_path, simulate_paths, terminal_ensemble
from .randmat import derive_stream, sample_matrix_increment
from .sdecore import CollisionError, StepControl
from .verify import (DriftEstimate, VerificationReport, adjudicate_drift, estimate_drift, gradient_check,
                     ks_two_sample, mcf_check, scaled_metric_check)

__version__ = "0.1.0"
