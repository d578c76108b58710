import math

import numpy as np
import pytest

from dicke_feedback.hilbert import MatterKind, build_space
from dicke_feedback.kernels import ExponentialKernel, InstantaneousKernel, PowerLawKernel
from dicke_feedback.model import ModelParams
from dicke_feedback.spectral import critical_gain, variance_X2
from dicke_feedback.trajectories import (ConditionedState, RecordBuffer, Scheme, SMEIntegrator,
                                         TrajectoryConfig, estimate_growth_rate, expect,
                                         feedback_signal, initial_state, lindblad_evolve,
                                         run_ensemble, run_trajectory, sme_step, tail_slice)

NO_FEEDBACK = InstantaneousKernel(0.0)


def small_config(**overrides):
    values = dict(params=ModelParams(g=0.3, kappa=1.0, delta=2.0), kernel=NO_FEEDBACK,
                  matter_kind=MatterKind.SPIN, cavity_dim=8, dt=0.01, total_time=2.0,
                  record_every=5, seed=11)
    values.update(overrides)
    return TrajectoryConfig(**values)


def test_record_buffer_convolution():
    buf = RecordBuffer(3, 0.1)
    assert buf.convolve(np.ones(3)) == 0.0
    for v in (1.0, 2.0, 3.0, 4.0):
        buf.push(v)
    assert len(buf) == 3
    np.testing.assert_allclose(buf.window(), [2.0, 3.0, 4.0])
    # newest value meets taps[0]
    assert buf.convolve(np.array([1.0, 10.0, 100.0])) == pytest.approx(4 + 30 + 200)
    assert buf.convolve(np.array([1.0])) == pytest.approx(4.0)


def test_record_buffer_with_channels():
    buf = RecordBuffer(2, 0.1, width=3)
    buf.push(np.array([1.0, 2.0, 3.0]))
    buf.push(np.array([4.0, 5.0, 6.0]))
    np.testing.assert_allclose(buf.convolve(np.array([1.0, 0.5])), [4.5, 6.0, 7.5])


def test_feedback_signal_uses_kernel_taps():
    buf = RecordBuffer(4, 0.1)
    state = ConditionedState(np.eye(2), 0.0, buf)
    kernel = ExponentialKernel(rate=1.0)
    assert feedback_signal(state, kernel, kappa=0.5) == 0.0
    buf.push(0.2)
    assert feedback_signal(state, kernel, kappa=0.5) == pytest.approx(0.2)


def test_trajectory_keeps_density_matrix_physical():
    out = run_trajectory(small_config(params=ModelParams(g=0.3, kappa=1.0, delta=2.0, G=0.5),
                                      kernel=PowerLawKernel(s=1.0), initial_alpha=0.5))
    assert not out.aborted
    assert out.valid
    assert out.max_trace_residual < 1e-10
    assert out.max_hermiticity_error < 1e-9
    assert out.min_eigenvalue > -1e-7
    assert np.all(out.purity <= 1 + 1e-9)
    assert len(out.times) == 41


def test_euler_scheme_stays_normalized_for_small_steps():
    out = run_trajectory(small_config(scheme=Scheme.EULER, dt=1e-3, total_time=0.5))
    assert not out.aborted
    assert out.max_pre_normalization_residual < 1e-3


def test_rouchon_kraus_defect_is_reported_and_quadratic_in_dt():
    space = build_space("spin", 8)
    p = ModelParams(g=0.3, kappa=1.0, delta=2.0, G=0.5)
    kernel = PowerLawKernel(s=1.0)
    rho = initial_state(space, alpha=1.0)
    defects = []
    for dt in (0.01, 0.005):
        integrator = SMEIntegrator(space, p, kernel, dt)
        state = ConditionedState(rho.copy(), 0.0, integrator.new_record())
        defects.append(integrator.step(state, 0.3 * math.sqrt(dt)).pre_normalization_residual)
    assert defects[0] > 0.0
    assert defects[1] > 0.0
    assert defects[0] / defects[1] == pytest.approx(4.0, rel=0.1)

    out = run_trajectory(small_config(params=p, kernel=kernel, dt=0.05, initial_alpha=0.3))
    assert not out.aborted
    assert 0.0 < out.max_pre_normalization_residual < 1e-3


def test_pure_state_stays_pure_without_loss():
    config = small_config(params=ModelParams(g=0.3, kappa=0.0, delta=2.0), initial_alpha=0.3,
                          initial_matter="x_plus")
    out = run_trajectory(config)
    np.testing.assert_allclose(out.purity, 1.0, atol=1e-9)


def test_same_seed_and_stream_reproduce_bit_for_bit():
    config = small_config(params=ModelParams(g=0.3, kappa=1.0, delta=2.0, G=0.3),
                          kernel=ExponentialKernel(rate=2.0))
    a, b = run_trajectory(config, 3), run_trajectory(config, 3)
    np.testing.assert_array_equal(a.matter_x, b.matter_x)
    np.testing.assert_array_equal(a.feedback, b.feedback)
    c = run_trajectory(config, 4)
    assert not np.array_equal(a.matter_x2, c.matter_x2)


def test_large_euler_step_aborts_with_partial_record():
    config = small_config(scheme=Scheme.EULER, dt=0.5, total_time=10.0, initial_alpha=2.0,
                          spot_check_every=1)
    out = run_trajectory(config)
    assert out.aborted
    assert not out.valid
    assert out.error
    assert len(out.times) < config.n_steps // config.record_every + 1


def test_sme_step_preserves_trace():
    space = build_space("spin", 5)
    p = ModelParams(g=0.3, kappa=1.0, delta=2.0, G=0.2)
    kernel = ExponentialKernel(rate=1.0)
    rho = initial_state(space, alpha=0.4)
    state = ConditionedState(rho, 0.0, RecordBuffer(50, 0.01))
    rng = np.random.default_rng(0)
    for _ in range(20):
        state = sme_step(state, p, kernel, 0.01, rng.standard_normal() * 0.1, space)
    assert np.trace(state.rho).real == pytest.approx(1.0, abs=1e-12)
    assert len(state.record) == 20
    assert state.t == pytest.approx(0.2)


def test_initial_states():
    space = build_space("spin", 3, n_spins=2)
    rho = initial_state(space, matter="x_plus")
    assert expect(space.sx, rho) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        initial_state(build_space("boson", 3, 3), matter="x_plus")


def test_lindblad_conserves_trace():
    space = build_space("spin", 6)
    p = ModelParams(g=0.3, kappa=1.0, delta=2.0)
    out = lindblad_evolve(space, p, initial_state(space, 0.5), [0.0, 0.5, 1.0])
    for rho in out:
        assert np.trace(rho).real == pytest.approx(1.0, abs=1e-10)
    assert expect(space.n_cav, out[0]) == pytest.approx(0.25, rel=1e-3)
    assert expect(space.n_cav, out[-1]) < expect(space.n_cav, out[0])


def test_growth_rate_of_exponential():
    t = np.linspace(0.0, 10.0, 201)
    assert estimate_growth_rate(t, 1e-3 * np.exp(0.3 * t)) == pytest.approx(0.3, rel=1e-6)


def test_tail_slice():
    t = np.linspace(0.0, 10.0, 11)
    assert t[tail_slice(t, 0.3)][0] == pytest.approx(7.0)


@pytest.mark.slow
def test_unconditional_average_matches_lindblad():
    space = build_space("spin", 6, n_spins=2)
    p = ModelParams(g=0.3, kappa=1.0, delta=2.0, n_spins=2)
    config = small_config(params=p, cavity_dim=6, initial_alpha=1.0, total_time=3.0, record_every=100)
    stats = run_ensemble(config, 400)
    rhos = lindblad_evolve(space, p, initial_state(space, 1.0), stats.times)
    exact = np.array([expect(space.sx @ space.sx, r) for r in rhos])
    err = stats.std_x2 / math.sqrt(stats.n_traj)
    assert np.all(np.abs(stats.mean_x2 - exact) <= 3 * err + 0.02 * np.abs(exact) + 1e-6)


@pytest.mark.slow
def test_linearized_ensemble_matches_spectral_variance():
    p = ModelParams(g=0.3, kappa=1.0, delta=2.0)
    kernel = ExponentialKernel(rate=2.0, amplitude=2.0)
    p = p.with_gain(0.3 * critical_gain(p, kernel))
    config = TrajectoryConfig(params=p, kernel=kernel, matter_kind=MatterKind.BOSON,
                              cavity_dim=6, matter_cutoff=8, dt=0.01, total_time=60.0,
                              record_every=20, seed=2)
    stats = run_ensemble(config, 100, tail_fraction=0.5)
    exact = variance_X2(p, kernel)
    assert abs(stats.steady_x2 - exact) < 3 * stats.steady_x2_err + 0.05 * exact


@pytest.mark.slow
def test_feedback_drives_single_spin_across_threshold():
    p = ModelParams(g=0.1, kappa=1.0, delta=2.0)
    kernel = PowerLawKernel(s=1.0)
    g_crit = critical_gain(p, kernel)

    def ensemble(ratio):
        config = TrajectoryConfig(params=p.with_gain(ratio * g_crit), kernel=kernel,
                                  matter_kind=MatterKind.SPIN, cavity_dim=10, total_time=100.0,
                                  record_every=20, seed=6)
        return run_ensemble(config, 20, tail_fraction=0.3)

    below, above = ensemble(0.01), ensemble(4.0)
    assert below.steady_abs_x < 0.05
    assert above.steady_abs_x > 0.4
    assert np.any(above.tail_signed_means > 0)
    assert np.any(above.tail_signed_means < 0)


@pytest.mark.slow
def test_fast_kernel_grows_faster_above_threshold():
    p = ModelParams(g=0.1, kappa=1.0, delta=2.0)

    def median_rate(s):
        kernel = PowerLawKernel(s=s)
        config = TrajectoryConfig(params=p.with_gain(1.5 * critical_gain(p, kernel)), kernel=kernel,
                                  matter_kind=MatterKind.BOSON, cavity_dim=8, matter_cutoff=16,
                                  total_time=60.0, record_every=10, seed=5)
        rates = []
        for stream in range(3):
            out = run_trajectory(config, stream)
            # stop the fit before the matter cutoff saturates the quadrature
            saturated = np.flatnonzero(out.matter_x2 > 3.0)
            end = out.times[saturated[0]] if len(saturated) else out.times[-1]
            rates.append(estimate_growth_rate(out.times, out.matter_x2, window=(5.0, end)) / 2)
        return float(np.median(rates))

    assert median_rate(5.0) > median_rate(0.5)
