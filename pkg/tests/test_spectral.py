import math

import numpy as np
import pytest
from scipy import optimize

from dicke_feedback.errors import NoThresholdError, SpectralPoleError, UnstableRegimeError
from dicke_feedback.kernels import ExponentialKernel, InstantaneousKernel, PowerLawKernel
from dicke_feedback.langevin import stationary_X2
from dicke_feedback.model import ModelParams
from dicke_feedback.spectral import (SpectrumLabel, SpectrumSeries, critical_coupling,
                                     critical_gain, is_stable, memory_bracket, noise_transfer,
                                     peak_frequency, response_D, sample_spectrum,
                                     spectral_density, spectral_density_adiabatic,
                                     time_kernel_transform, variance_estimate, variance_integrand,
                                     variance_X2)

HALF_PI = math.pi / 2
UNIT_KERNEL = PowerLawKernel(s=1.0, h0=1.0)


def strong_coupling(kappa):
    return ModelParams(omega_r=1.0, delta=1.0, g=1.0, kappa=kappa, theta=HALF_PI)


def test_critical_gain_reference_value():
    assert critical_gain(strong_coupling(10.0), UNIT_KERNEL) == pytest.approx(0.2425, abs=1e-12)


def test_critical_gain_large_kappa_limit():
    assert critical_gain(strong_coupling(50.0), UNIT_KERNEL) == pytest.approx(0.25, rel=0.01)


def test_critical_gain_changes_sign_at_root_three():
    gain = lambda kappa: critical_gain(strong_coupling(kappa), UNIT_KERNEL)
    assert gain(1.5) < 0 < gain(2.0)
    root = optimize.brentq(gain, 1.5, 2.0, xtol=1e-14)
    assert root == pytest.approx(math.sqrt(3), abs=1e-9)


def test_critical_gain_makes_static_response_vanish():
    p = ModelParams(g=0.3, kappa=0.7, delta=1.5, theta=0.4)
    kernel = PowerLawKernel(s=0.5)
    at_threshold = p.with_gain(critical_gain(p, kernel))
    assert abs(response_D(at_threshold, kernel, 0.0)) < 1e-12
    assert is_stable(at_threshold.with_gain(0.99 * at_threshold.G), kernel)
    assert not is_stable(at_threshold.with_gain(1.01 * at_threshold.G), kernel)


def test_no_threshold_without_measured_signal():
    p = ModelParams(kappa=1.0, delta=0.0, theta=0.0)
    with pytest.raises(NoThresholdError):
        critical_gain(p, UNIT_KERNEL)
    with pytest.raises(NoThresholdError):
        critical_gain(ModelParams(), InstantaneousKernel(0.0))


@pytest.mark.parametrize("kappa, delta, expected", [(1.0, 2.0, 0.790569), (0.0, 1.0, 0.5)])
def test_critical_coupling(kappa, delta, expected):
    assert critical_coupling(ModelParams(kappa=kappa, delta=delta)) == pytest.approx(expected, abs=1e-6)


def test_no_feedback_spectral_density_at_zero():
    p = ModelParams(kappa=1.0, delta=2.0, g=0.1, G=0.0)
    assert spectral_density(p, UNIT_KERNEL, 0.0) == pytest.approx(0.008 * math.pi, rel=1e-12)


def test_spectral_density_matches_noise_transfer():
    rng = np.random.default_rng(7)
    for _ in range(1000):
        p = ModelParams(g=rng.uniform(0.05, 1.0), kappa=rng.uniform(0.1, 5.0),
                        delta=rng.uniform(0.5, 3.0), G=rng.uniform(-2.0, 2.0),
                        theta=rng.uniform(0.0, 2 * math.pi))
        kernel = PowerLawKernel(s=rng.uniform(0.3, 5.0))
        w = rng.uniform(-5.0, 5.0)
        mx, my = noise_transfer(p, kernel, w)
        expected = math.pi * p.kappa * abs(mx - 1j * my) ** 2
        assert spectral_density(p, kernel, w) == pytest.approx(expected, rel=1e-10)


def test_adiabatic_identity_without_cavity_memory():
    p = ModelParams(g=0.2, kappa=1.3, delta=2.0, G=0.4, theta=0.9)
    kernel = PowerLawKernel(s=2.0)
    w = np.linspace(-3.0, 3.0, 13)
    np.testing.assert_allclose(spectral_density(p, kernel, w, cavity_memory=False),
                               spectral_density_adiabatic(p, kernel, w), rtol=1e-12)


def test_spectral_density_approaches_adiabatic_for_fast_cavity():
    p = ModelParams(g=0.5, kappa=50.0, delta=2.0, theta=HALF_PI)
    kernel = PowerLawKernel(s=1.0)
    p = p.with_gain(0.5 * critical_gain(p, kernel))
    w = np.linspace(0.0, 1.0, 11)
    np.testing.assert_allclose(spectral_density(p, kernel, w),
                               spectral_density_adiabatic(p, kernel, w), rtol=0.05)


def test_adiabatic_error_shrinks_with_cavity_loss(exponential):
    w = np.linspace(-2.0, 2.0, 81)
    errs = []
    for kappa in (5.0, 20.0, 50.0):
        p = ModelParams(g=0.3, kappa=kappa, delta=2.0, G=0.2, theta=HALF_PI)
        exact = spectral_density(p, exponential, w)
        approx = spectral_density_adiabatic(p, exponential, w)
        errs.append(np.max(np.abs(exact - approx)) / np.max(exact))
    assert errs[0] > errs[1] > errs[2]
    assert errs[2] < 0.5 * errs[0]


def test_response_is_conjugate_symmetric():
    rng = np.random.default_rng(3)
    p = ModelParams(g=0.4, kappa=1.0, delta=2.0, G=0.3, theta=0.7)
    for kernel in (PowerLawKernel(s=0.5), PowerLawKernel(s=2.0), ExponentialKernel(rate=1.5)):
        w = rng.uniform(-5.0, 5.0, 100)
        np.testing.assert_allclose(response_D(p, kernel, -w), np.conj(response_D(p, kernel, w)),
                                   rtol=1e-10)


def test_scaling_gain_and_kernel_together_changes_nothing():
    base = ModelParams(g=0.4, kappa=1.0, delta=2.0, G=0.3, theta=0.7)
    w = np.linspace(-4.0, 4.0, 17)
    k1, k2 = PowerLawKernel(s=1.5, h0=1.0), PowerLawKernel(s=1.5, h0=2.0)
    half = base.with_gain(base.G / 2)
    np.testing.assert_allclose(response_D(base, k1, w), response_D(half, k2, w), rtol=1e-12)
    np.testing.assert_allclose(spectral_density(base, k1, w), spectral_density(half, k2, w), rtol=1e-12)
    assert critical_gain(base, k1) == pytest.approx(2 * critical_gain(base, k2), rel=1e-12)


def test_spectral_pole_is_reported():
    p = ModelParams(kappa=0.0, delta=1.0, g=0.2)
    with pytest.raises(SpectralPoleError):
        response_D(p, UNIT_KERNEL, 1.0)


def test_mode_softening_toward_threshold():
    g_crit = critical_coupling(ModelParams(kappa=1.0, delta=2.0))
    no_feedback = InstantaneousKernel(0.0)
    peaks = [peak_frequency(ModelParams(kappa=1.0, delta=2.0, g=r * g_crit), no_feedback)
             for r in (0.5, 0.8, 0.95, 0.99)]
    assert np.all(np.diff(peaks) < 0)
    assert peaks[-2] > 0.0
    assert peaks[-1] == 0.0


def test_slow_feedback_keeps_zero_frequency_maximum_and_mode_peak():
    p = ModelParams(g=0.5, kappa=1.0, delta=2.0, theta=HALF_PI)
    kernel = PowerLawKernel(s=0.5)
    p = p.with_gain(0.99 * critical_gain(p, kernel))
    grid = np.linspace(0.0, 3.0, 3001)
    v = variance_integrand(p, kernel, grid)
    assert v[0] > v[1]
    interior = np.flatnonzero((v[1:-1] > v[:-2]) & (v[1:-1] > v[2:])) + 1
    assert any(0.4 < grid[i] < 1.6 for i in interior)


def test_memory_bracket_is_transform_of_time_kernel_without_feedback(params):
    for w in (0.0, 0.5, 1.7):
        numeric = time_kernel_transform(params, UNIT_KERNEL, w)
        expected = memory_bracket(params, UNIT_KERNEL, w) / (4 * params.g * params.omega_r)
        assert numeric == pytest.approx(complex(expected), rel=1e-6, abs=1e-10)


def test_memory_bracket_is_transform_of_time_kernel_with_feedback(params, exponential):
    p = params.with_gain(0.5 * critical_gain(params, exponential))
    for w in (0.0, 1.3):
        numeric = time_kernel_transform(p, exponential, w)
        expected = memory_bracket(p, exponential, w) / (4 * p.g * p.omega_r)
        assert numeric == pytest.approx(complex(expected), rel=1e-6, abs=1e-10)


def test_variance_without_feedback_matches_lyapunov(params):
    assert variance_X2(params, UNIT_KERNEL) == pytest.approx(stationary_X2(params), rel=1e-5)


@pytest.mark.parametrize("kernel", [InstantaneousKernel(weight=0.5), ExponentialKernel(rate=2.0, amplitude=2.0)])
def test_variance_with_markovian_feedback_matches_lyapunov(params, kernel):
    p = params.with_gain(0.5 * critical_gain(params, kernel))
    estimate = variance_estimate(p, kernel)
    assert estimate.value == pytest.approx(stationary_X2(p, kernel), rel=1e-5)
    assert estimate.abserr < 1e-4 * estimate.value


def test_variance_grows_toward_threshold(params, ohmic):
    g_crit = critical_gain(params, ohmic)
    values = [variance_X2(params.with_gain(r * g_crit), ohmic) for r in (0.5, 0.9, 0.98)]
    assert values[0] < values[1] < values[2]


def test_variance_above_threshold_is_refused(params, ohmic):
    with pytest.raises(UnstableRegimeError):
        variance_X2(params.with_gain(1.1 * critical_gain(params, ohmic)), ohmic)


def test_sample_spectrum_labels(params, ohmic):
    grid = np.linspace(0.0, 3.0, 31)
    d = sample_spectrum(SpectrumLabel.D, params, ohmic, grid)
    assert np.iscomplexobj(d.values)
    assert set(d.columns()) == {"omega", "re", "im"}
    s = sample_spectrum(SpectrumLabel.S, params, ohmic, grid)
    assert np.all(s.values >= 0)
    assert set(s.columns()) == {"omega", "value"}


def test_spectrum_series_rejects_unsorted_grid():
    with pytest.raises(ValueError):
        SpectrumSeries(np.array([0.0, 2.0, 1.0]), np.ones(3), SpectrumLabel.S)
    with pytest.raises(ValueError):
        SpectrumSeries(np.array([0.0, 1.0]), np.array([1.0, -1.0]), SpectrumLabel.S)
