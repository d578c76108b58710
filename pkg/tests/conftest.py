import math

import pytest

from dicke_feedback.kernels import ExponentialKernel, PowerLawKernel
from dicke_feedback.model import ModelParams


@pytest.fixture
def params():
    """Below the feedback-free threshold: g_crit(kappa=1, delta=2) = 0.79."""
    return ModelParams(omega_r=1.0, delta=2.0, kappa=1.0, g=0.3, G=0.0, theta=math.pi / 2)


@pytest.fixture
def ohmic():
    return PowerLawKernel(s=1.0)


@pytest.fixture
def exponential():
    return ExponentialKernel(rate=2.0, amplitude=2.0)


@pytest.fixture
def out_dir(tmp_path):
    return tmp_path / "runs"
