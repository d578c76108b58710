import math

import numpy as np
import pytest
from scipy import integrate

from dicke_feedback.errors import KernelError, ParameterError
from dicke_feedback.kernels import (DelayTrainKernel, ExponentialKernel, InstantaneousKernel,
                                    PowerLawKernel, TransformMethod, kernel_eval,
                                    kernel_from_dict, kernel_transform)


@pytest.mark.parametrize("s", [0.5, 1.0, 5.0])
def test_power_law_default_amplitude_gives_unit_area(s):
    kernel = PowerLawKernel(s=s)
    assert kernel.h0 == s
    assert kernel.zero_frequency() == pytest.approx(1.0)
    area = integrate.quad(kernel.evaluate, 0.0, np.inf)[0]
    assert area == pytest.approx(1.0, rel=1e-8)


def test_power_law_zero_frequency_with_explicit_amplitude():
    kernel = PowerLawKernel(s=2.0, t0=0.5, h0=3.0)
    assert kernel.transform(0.0) == pytest.approx(3.0 * 0.5 / 2.0)


@pytest.mark.parametrize("s", [0.5, 1.0, 5.0])
@pytest.mark.parametrize("omega", [0.1, 1.0, 7.5])
def test_power_law_expint_matches_quadrature(s, omega):
    kernel = PowerLawKernel(s=s)
    closed = kernel.transform(omega, TransformMethod.EXPINT)
    numeric = kernel.transform(omega, TransformMethod.QUADRATURE)
    assert abs(closed - numeric) < 1e-6 * max(1.0, abs(closed))


@pytest.mark.parametrize("kernel", [PowerLawKernel(s=0.5), PowerLawKernel(s=3.0),
                                    ExponentialKernel(rate=2.0),
                                    DelayTrainKernel(period=1.0, s=1.0, n_terms=4)])
def test_transform_is_hermitian_in_frequency(kernel):
    rng = np.random.default_rng(5)
    for w in rng.uniform(0.01, 20.0, 100):
        assert kernel.transform(-w) == pytest.approx(kernel.transform(w).conjugate(), rel=1e-12)


@pytest.mark.parametrize("s", [0.3, 0.5, 1.0, 2.0, 5.0])
def test_power_law_zero_frequency_closed_form(s):
    kernel = PowerLawKernel(s=s)
    assert kernel.zero_frequency() == pytest.approx(1.0, rel=1e-12)
    assert kernel_transform(kernel, 0.0) == pytest.approx(1.0, rel=1e-12)
    assert kernel.tail_integral(0.0) == pytest.approx(1.0, rel=1e-12)


def test_transform_sign_convention():
    # H(omega) = int h(t) exp(-i omega t) dt: a causal decaying kernel has Im H < 0 at omega > 0
    assert PowerLawKernel(s=1.0).transform(1.0).imag < 0
    assert ExponentialKernel(rate=1.0).transform(1.0) == pytest.approx(1 / (1 + 1j))


@pytest.mark.parametrize("s", [0.3, 0.5])
def test_sub_ohmic_low_frequency_slope(s):
    kernel = PowerLawKernel(s=s)
    w = np.array([1e-4, 1e-3])
    im = -np.imag(kernel_transform(kernel, w))
    slope = math.log(im[1] / im[0]) / math.log(w[1] / w[0])
    assert slope == pytest.approx(s, abs=0.05)


def test_kernel_transform_keeps_array_shape():
    values = kernel_transform(PowerLawKernel(s=1.0), np.linspace(0.0, 2.0, 6).reshape(2, 3))
    assert values.shape == (2, 3)
    assert values[0, 0] == pytest.approx(1.0)


def test_evaluate_is_causal_and_vectorized():
    kernel = PowerLawKernel(s=1.0)
    values = kernel_eval(kernel, np.array([-1.0, 0.0, 1.0]))
    assert values[0] == 0.0
    assert values[1] == pytest.approx(1.0)
    assert values[2] == pytest.approx(0.25)
    assert isinstance(kernel_eval(kernel, 0.5), float)


@pytest.mark.parametrize("kernel", [PowerLawKernel(s=0.7), ExponentialKernel(rate=0.5)])
def test_memory_window_bounds_the_tail(kernel):
    window = kernel.memory_window(1e-3)
    assert kernel.tail_integral(window) == pytest.approx(1e-3 * kernel.zero_frequency(), rel=1e-9)


def test_instantaneous_kernel_taps():
    kernel = InstantaneousKernel(weight=0.4)
    taps = kernel.taps(0.01, 5)
    assert taps[0] == pytest.approx(40.0)
    assert not taps[1:].any()
    assert kernel.memory_window() == 0.0
    assert kernel.transform(3.0) == 0.4


def test_delay_train_weights_and_width():
    kernel = DelayTrainKernel(period=2.0, s=1.0, n_terms=3)
    np.testing.assert_allclose(kernel.weights, [1.0, 0.25, 1 / 9])
    assert kernel.zero_frequency() == pytest.approx(1 + 0.25 + 1 / 9)
    area = integrate.quad(kernel.evaluate, 0.0, 10.0, points=[2.0, 4.0, 6.0], limit=200)[0]
    assert area == pytest.approx(kernel.zero_frequency(), rel=1e-6)
    assert kernel.for_step(0.05).pulse_width == 0.05
    assert abs(kernel.transform(1.3)) <= kernel.zero_frequency()


@pytest.mark.parametrize("kernel", [
    PowerLawKernel(s=0.5, t0=2.0, h0=1.5),
    ExponentialKernel(rate=3.0, amplitude=-1.0),
    InstantaneousKernel(weight=0.2),
    DelayTrainKernel(period=1.0, s=2.0, n_terms=4),
])
def test_from_dict_restores_kernel(kernel):
    assert kernel_from_dict(kernel.to_dict()) == kernel


@pytest.mark.parametrize("data", [
    {"shape": "power_law", "s": 0.0},
    {"shape": "power_law", "s": 1.0, "t0": -1.0},
    {"shape": "exponential", "rate": 0.0},
    {"shape": "delay_train", "period": 1.0, "s": 1.0, "pulse_width": 0.5},
    {"shape": "delay_train", "period": 1.0, "s": 1.0, "n_terms": 0},
    {"shape": "power_law", "s": float("nan")},
    {"shape": "gaussian"},
    {"shape": "power_law", "s": 1.0, "tau": 2.0},
])
def test_invalid_kernels_raise(data):
    with pytest.raises(KernelError):
        kernel_from_dict(data)


def test_kernel_error_is_a_parameter_error():
    with pytest.raises(ParameterError):
        PowerLawKernel(s=-1.0)
    with pytest.raises(ValueError):
        PowerLawKernel(s=-1.0)
