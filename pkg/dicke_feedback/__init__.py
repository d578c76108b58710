# __init__.py
"""
dicke_feedback
~~~~~~~~~~~~~~

Simulation of a Dicke model (N two-level atoms in a lossy cavity) under
measurement-based feedback: the homodyne record of the cavity output is
filtered by a causal kernel h(t) and fed back onto the atoms.

Basic usage:
    >>> from dicke_feedback import ModelParams, PowerLawKernel, critical_gain
    >>> p = ModelParams(g=0.1, kappa=1.0, delta=2.0)
    >>> critical_gain(p, PowerLawKernel(s=1.0))

Command line:
    $ dicke-feedback list-recipes
    $ dicke-feedback run fig2 --out runs
"""

__version__ = "0.1.0"

from .errors import (
    DickeFeedbackError,
    ParameterError,
    KernelError,
    HilbertSpaceError,
    ConfigError,
    NumericalError,
    SpectralPoleError,
    NoThresholdError,
    UnstableRegimeError,
    QuadratureError,
    StepSizeError,
    NegativityError,
    NoBracketError,
)
from .model import ModelParams, NoiseModel
from .kernels import (
    FeedbackKernel,
    PowerLawKernel,
    ExponentialKernel,
    InstantaneousKernel,
    DelayTrainKernel,
    TransformMethod,
    kernel_eval,
    kernel_transform,
    kernel_from_dict,
)
from .spectral import (
    QuadOptions,
    SpectrumLabel,
    SpectrumSeries,
    response_D,
    noise_transfer,
    spectral_density,
    spectral_density_adiabatic,
    variance_X2,
    variance_estimate,
    critical_gain,
    critical_coupling,
    time_kernel_E,
    sample_spectrum,
    peak_frequency,
)
from .criticality import ExponentFit, SweepPoint, sweep_variance, fit_exponent, alpha_vs_s
from .trajectories import TrajectoryConfig, run_trajectory, run_ensemble, sme_step
from .meanfield import meanfield_rhs, meanfield_threshold, bifurcation_scan
from .config import ExperimentConfig, ExperimentKind
from .runner import ExperimentRunner

__all__ = [
    "DickeFeedbackError", "ParameterError", "KernelError", "HilbertSpaceError", "ConfigError",
    "NumericalError", "SpectralPoleError", "NoThresholdError", "UnstableRegimeError",
    "QuadratureError", "StepSizeError", "NegativityError", "NoBracketError",
    "ModelParams", "NoiseModel",
    "FeedbackKernel", "PowerLawKernel", "ExponentialKernel", "InstantaneousKernel",
    "DelayTrainKernel", "TransformMethod", "kernel_eval", "kernel_transform", "kernel_from_dict",
    "QuadOptions", "SpectrumLabel", "SpectrumSeries", "response_D", "noise_transfer",
    "spectral_density", "spectral_density_adiabatic", "variance_X2", "variance_estimate",
    "critical_gain", "critical_coupling", "time_kernel_E", "sample_spectrum", "peak_frequency",
    "ExponentFit", "SweepPoint", "sweep_variance", "fit_exponent", "alpha_vs_s",
    "TrajectoryConfig", "run_trajectory", "run_ensemble", "sme_step",
    "meanfield_rhs", "meanfield_threshold", "bifurcation_scan",
    "ExperimentConfig", "ExperimentKind", "ExperimentRunner",
]
