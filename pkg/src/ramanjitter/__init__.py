"""Quantum-noise timing jitter of optical-fiber solitons.

Stochastic split-step integration of the noise-driven propagation equation
(initial vacuum fluctuations, distributed gain/loss noise, thermal phonon
noise with a delayed nonlinear response) together with the matching
perturbation-theory predictions for bright and dark solitons.
"""

__version__ = "0.1.0"

from .grid import (
    ComplexField,
    GridError,
    SpectralField,
    TimeGrid,
    field_momentum,
    forward_transform,
    inverse_transform,
    photon_number,
    spectral_density,
)
from .physics import (
    DEFAULT_LORENTZIAN,
    FiberConfig,
    LorentzianComponent,
    PhysicsError,
    RamanModel,
    Scales,
    default_raman_model,
    derive_scales,
    fluorescence,
    fluorescence_dc,
    fluorescence_time_kernel,
    raman_gain,
    raman_response_kernel,
    thermal_occupation,
)
from .noise import (
    NoiseError,
    NoiseSettings,
    NoiseStream,
    derive_trajectory_seed,
    sample_gain_noise,
    sample_initial_vacuum,
    sample_raman_noise,
)
from .integrator import (
    IntegrationError,
    PropagationConfig,
    Trajectory,
    propagate,
    step,
    step_doubling_error,
)
from .solitons import (
    BrightSolitonParams,
    DarkSolitonParams,
    JitterPrediction,
    JitterRatio,
    SolitonError,
    bright_field,
    dark_field,
    gain_crossover_length,
    jitter_ratio,
    overlap_integral,
    overlap_integral_white,
    predict_bright_jitter,
    predict_dark_jitter,
    project_bright_parameters,
)
from .analysis import (
    EnsembleResult,
    PositionMeasurement,
    decompose_noise_runs,
    jitter_curve,
    measure_position,
    run_jitter_ensemble,
    step_doubling_certificate,
    variance_with_error,
)

__all__ = [name for name in dir() if not name.startswith("_")]
