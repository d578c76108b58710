import math

import numpy as np
import pytest

from dicke_feedback.errors import NoBracketError
from dicke_feedback.kernels import ExponentialKernel, InstantaneousKernel, PowerLawKernel
from dicke_feedback.langevin import drift_matrix
from dicke_feedback.meanfield import (MeanFieldIntegrator, MeanFieldState, MeanFieldTrajectory,
                                      ThresholdResult, ThresholdScanOptions, bifurcation_scan,
                                      classify, feedback_from_history, jacobian_at_normal_phase,
                                      meanfield_rhs, meanfield_threshold, simulate)
from dicke_feedback.model import ModelParams
from dicke_feedback.spectral import critical_gain
from dicke_feedback.trajectories import RecordBuffer


def normal_state(n_spins=1):
    return MeanFieldState(0.0, 0.0, 0.0, 0.0, -n_spins / 2, 0.0, RecordBuffer(4, 0.02))


def test_normal_phase_is_a_fixed_point(params, ohmic):
    rhs = meanfield_rhs(normal_state(), params.with_gain(1.0), ohmic)
    np.testing.assert_array_equal(rhs, np.zeros(5))


@pytest.mark.parametrize("n_spins", [1, 10])
def test_jacobian_matches_linear_drift(n_spins):
    p = ModelParams(g=0.4, kappa=0.8, delta=1.5, n_spins=n_spins)
    np.testing.assert_allclose(jacobian_at_normal_phase(p), drift_matrix(p), atol=1e-6)


def test_instantaneous_feedback_reads_newest_sample(params):
    history = RecordBuffer(3, 0.02)
    history.push(0.1)
    history.push(0.4)
    value = feedback_from_history(history, params, InstantaneousKernel(weight=0.5))
    assert value == pytest.approx(2 * params.kappa * 0.5 * 0.4)


def test_convolution_weights_integrate_the_kernel(params):
    kernel = ExponentialKernel(rate=1.0)
    history = RecordBuffer(2001, 0.01)
    for _ in range(2001):
        history.push(1.0)
    # constant x_theta = 1 gives I = 2 kappa H(0) up to the tail beyond 20
    assert feedback_from_history(history, params, kernel) == pytest.approx(2 * params.kappa, rel=1e-4)


def test_spin_length_is_conserved(params, ohmic):
    p = params.with_gain(1.5 * critical_gain(params, ohmic))
    integrator = MeanFieldIntegrator(p, ohmic, dt=0.02, total_time=40.0)
    traj = integrator.run(integrator.initial_state(sx=0.1))
    assert traj.max_spin_length_error < 1e-10
    assert len(traj.times) == 201
    assert set(traj.columns()) == {"t", "a_re", "a_im", "sx", "sy", "sz", "feedback"}


def test_sign_symmetry(params, exponential):
    p = params.with_gain(1.2 * critical_gain(params, exponential))
    opts = ThresholdScanOptions(total_time=30.0)
    up = simulate(p, exponential, opts, sign=1.0)
    down = simulate(p, exponential, opts, sign=-1.0)
    np.testing.assert_allclose(up.sx, -down.sx, rtol=1e-9, atol=1e-15)
    np.testing.assert_allclose(up.a, -down.a, rtol=1e-9, atol=1e-15)
    np.testing.assert_allclose(up.sz, down.sz, rtol=1e-12)


def _synthetic(sx):
    t = np.linspace(0.0, 100.0, len(sx))
    zeros = np.zeros_like(t)
    return MeanFieldTrajectory(t, zeros.astype(complex), np.asarray(sx), zeros, zeros - 0.5, zeros, 0.0)


def test_classify_growth_and_decay(params):
    t = np.linspace(0.0, 100.0, 2001)
    opts = ThresholdScanOptions()
    growing = classify(_synthetic(1e-6 * np.exp(0.03 * t) * np.cos(t)), params, opts)
    decaying = classify(_synthetic(1e-6 * np.exp(-0.03 * t) * np.cos(t)), params, opts)
    assert growing.ordered and not decaying.ordered
    settled = classify(_synthetic(0.3 + 0.0 * t), params, opts)
    assert settled.ordered and settled.settled
    assert settled.steady_abs_sx == pytest.approx(0.3)


def test_bifurcation_scan_orders_with_gain(params, exponential):
    g_crit = critical_gain(params, exponential)
    opts = ThresholdScanOptions(total_time=200.0)
    below, above = bifurcation_scan(params, exponential, [0.5 * g_crit, 2.0 * g_crit], opts)
    assert not below.ordered
    assert below.steady_abs_sx < 1e-5
    assert above.ordered
    assert above.steady_abs_sx > 1e-2
    assert above.G == pytest.approx(2.0 * g_crit)


def test_threshold_needs_a_bracket(params, exponential):
    g_crit = critical_gain(params, exponential)
    opts = ThresholdScanOptions(lower=0.1 * g_crit, upper=0.2 * g_crit, total_time=50.0)
    with pytest.raises(NoBracketError):
        meanfield_threshold(params, exponential, opts)


def test_threshold_without_closed_form_or_range():
    p = ModelParams(kappa=1.0, delta=0.0, theta=0.0)
    with pytest.raises(NoBracketError):
        meanfield_threshold(p, PowerLawKernel(s=1.0))


def test_relative_deviation():
    assert ThresholdResult(1.02, 1.0, 1.04, 7, closed_form=1.0).relative_deviation == pytest.approx(0.02)
    assert ThresholdResult(1.02, 1.0, 1.04, 7).relative_deviation is None


@pytest.mark.slow
@pytest.mark.parametrize("kernel", [ExponentialKernel(rate=2.0, amplitude=2.0), PowerLawKernel(s=2.0)])
def test_threshold_agrees_with_closed_form(params, kernel):
    result = meanfield_threshold(params, kernel)
    assert result.lower < result.G < result.upper
    assert result.relative_deviation < 0.02
