"""Unit tests for the single-step neuron dynamics.

Reference values are recomputed inline from the closed-form update rules
(with math.exp, not the library's own helpers) so the implementation is
checked against an independent rendering of the same equations.
"""

import math

import numpy as np
import pytest

from srnn.neurons import (
    AlifParams,
    AlifState,
    LifParams,
    LifState,
    alif_step,
    decay_coefficient,
    lif_step,
    readout_step,
    relu_step,
)


def test_decay_coefficient_reference_values():
    assert abs(decay_coefficient(20.0) - 0.951229) < 1e-6
    assert abs(decay_coefficient(150.0) - 0.993356) < 1e-6
    # slow limit: a huge time constant retains essentially everything
    assert abs(decay_coefficient(1e12) - 1.0) < 1e-9


def test_decay_coefficient_matches_exp_form():
    rng = np.random.default_rng(0)
    for _ in range(200):
        tau = float(rng.uniform(0.5, 500.0))
        dt = float(rng.uniform(0.1, 2.0))
        assert abs(decay_coefficient(tau, dt) - math.exp(-dt / tau)) < 1e-15


def test_decay_coefficient_rejects_non_positive():
    with pytest.raises(ValueError):
        decay_coefficient(0.0)
    with pytest.raises(ValueError):
        decay_coefficient(-3.0)
    with pytest.raises(ValueError):
        decay_coefficient(20.0, dt=0.0)


def test_lif_subthreshold_step():
    p = LifParams(tau_m=20.0, r_m=1.0, theta=1.0)
    state, s = lif_step(LifState(u=0.5, s_prev=0.0), 1.0, p)
    # u = 0.5*(1 - 1/20) + 1*1/20
    assert abs(state.u - 0.525) < 1e-12
    assert s == 0.0


def test_lif_reset_to_rest_discards_membrane():
    p = LifParams(tau_m=20.0, u_r=0.0)
    state, s = lif_step(LifState(u=5.0, s_prev=1.0), 0.0, p)
    assert state.u == 0.0
    assert s == 0.0


def test_lif_spike_when_threshold_crossed():
    p = LifParams(tau_m=20.0, r_m=1.0, theta=1.0)
    state, s = lif_step(LifState(u=0.99, s_prev=0.0), 20.0, p)
    assert abs(state.u - (0.99 * 0.95 + 1.0)) < 1e-12
    assert s == 1.0
    assert state.s_prev == 1.0


def test_lif_spikes_exactly_at_threshold():
    p = LifParams(tau_m=20.0, r_m=1.0, theta=1.0)
    # drive chosen so the fresh membrane lands exactly on theta
    state, s = lif_step(LifState(u=0.0, s_prev=0.0), 20.0, p)
    assert state.u == 1.0
    assert s == 1.0


def test_lif_random_steps_match_direct_substitution():
    rng = np.random.default_rng(1)
    for _ in range(500):
        tau = float(rng.uniform(1.5, 80.0))
        r_m = float(rng.uniform(0.2, 5.0))
        u_r = float(rng.uniform(-0.5, 0.4))
        theta = u_r + float(rng.uniform(0.1, 2.0))
        u0 = float(rng.normal(0.0, 2.0))
        s_prev = float(rng.integers(0, 2))
        drive = float(rng.normal(0.0, 3.0))
        p = LifParams(tau_m=tau, r_m=r_m, u_r=u_r, theta=theta)
        state, s = lif_step(LifState(u=u0, s_prev=s_prev), drive, p)
        held = u0 * (1.0 - s_prev) + u_r * s_prev
        want = held * (1.0 - 1.0 / tau) + r_m * drive / tau
        assert abs(state.u - want) < 1e-12
        assert s == (1.0 if want >= theta else 0.0)


def test_alif_subthreshold_step():
    p = AlifParams(tau_m=20.0, tau_adp=150.0, b_0=1.0, beta=1.8, r_m=1.0)
    state, s = alif_step(AlifState(), 1.0, p)
    assert abs(state.u - 0.048771) < 1e-6
    assert abs(state.u - (1.0 - math.exp(-1.0 / 20.0))) < 1e-12
    assert s == 0.0


def test_alif_threshold_rises_after_spike():
    p = AlifParams(tau_m=20.0, tau_adp=150.0, b_0=1.0, beta=1.8)
    state, _ = alif_step(AlifState(u=0.0, eta=0.0, s_prev=1.0), 0.0, p)
    assert abs(state.eta - 0.006644) < 1e-6
    theta = p.b_0 + p.beta * state.eta
    assert abs(theta - (1.0 + 1.8 * (1.0 - math.exp(-1.0 / 150.0)))) < 1e-12


def test_alif_rest_is_fixed_point():
    p = AlifParams()
    state = AlifState(u=0.0, eta=0.0, s_prev=0.0)
    for _ in range(10):
        state, s = alif_step(state, 0.0, p)
        assert state.u == 0.0
        assert state.eta == 0.0
        assert s == 0.0


def test_alif_random_steps_match_direct_substitution():
    rng = np.random.default_rng(2)
    for _ in range(500):
        tau_m = float(rng.uniform(1.5, 80.0))
        tau_adp = float(rng.uniform(2.0, 400.0))
        b_0 = float(rng.uniform(0.1, 2.0))
        beta = float(rng.uniform(0.0, 3.0))
        r_m = float(rng.uniform(0.2, 5.0))
        u0 = float(rng.normal(0.0, 2.0))
        eta0 = float(rng.uniform(0.0, 1.0))
        s_prev = float(rng.integers(0, 2))
        drive = float(rng.normal(0.0, 3.0))
        p = AlifParams(tau_m=tau_m, tau_adp=tau_adp, b_0=b_0, beta=beta, r_m=r_m)
        state, s = alif_step(AlifState(u=u0, eta=eta0, s_prev=s_prev), drive, p)
        alpha = math.exp(-1.0 / tau_m)
        rho = math.exp(-1.0 / tau_adp)
        theta_prev = b_0 + beta * eta0
        want_u = alpha * u0 + (1.0 - alpha) * r_m * drive - theta_prev * s_prev
        want_eta = rho * eta0 + (1.0 - rho) * s_prev
        want_theta = b_0 + beta * want_eta
        assert abs(state.u - want_u) < 1e-12
        assert abs(state.eta - want_eta) < 1e-12
        assert s == (1.0 if want_u >= want_theta else 0.0)


def test_relu_step_values():
    p = AlifParams(tau_m=20.0, r_m=1.0)
    state, out = relu_step(LifState(), 1.0, p)
    assert abs(out - 0.048771) < 1e-6
    # pure decay keeps the exponential retention factor
    state, out = relu_step(LifState(u=0.5), 0.0, p)
    assert abs(state.u - 0.5 * math.exp(-1.0 / 20.0)) < 1e-12
    # negative membrane is clamped in the output but kept in the state
    state, out = relu_step(LifState(u=-4.0), 0.0, p)
    assert out == 0.0
    assert state.u < 0.0


def test_readout_step_values():
    p = LifParams(tau_m=20.0, r_m=1.0)
    state = readout_step(LifState(u=0.0), 1.0, p)
    assert abs(state.u - 0.05) < 1e-12
    state = readout_step(LifState(u=1.0), 0.0, p)
    assert abs(state.u - 0.95) < 1e-12
    # tau_m = dt turns the integrator into a pass-through of r_m*drive
    p = LifParams(tau_m=1.0, r_m=1.0)
    for c in (-2.0, 0.3, 7.5):
        assert abs(readout_step(LifState(u=123.0), c, p).u - c) < 1e-12


def test_readout_never_spikes_or_resets():
    p = LifParams(tau_m=5.0)
    state = LifState(u=50.0, s_prev=0.0)
    state = readout_step(state, 100.0, p)
    assert state.s_prev == 0.0
    assert state.u > 1.0  # far above the nominal threshold, still no reset


def test_spikes_are_binary_for_any_finite_input():
    rng = np.random.default_rng(3)
    lif = LifParams()
    alif = AlifParams()
    for _ in range(300):
        drive = float(rng.normal(0.0, 50.0))
        u0 = float(rng.normal(0.0, 20.0))
        _, s1 = lif_step(LifState(u=u0, s_prev=float(rng.integers(0, 2))), drive, lif)
        _, s2 = alif_step(
            AlifState(u=u0, eta=float(rng.uniform(0, 1)),
                      s_prev=float(rng.integers(0, 2))), drive, alif)
        assert s1 in (0.0, 1.0)
        assert s2 in (0.0, 1.0)


def test_silent_membranes_decay_geometrically():
    # with zero drive and no spikes both unit types decay by a constant
    # factor per step: leak = 1 - dt/tau for the fixed-threshold unit,
    # alpha = exp(-dt/tau) for the adaptive one
    lif = LifParams(tau_m=12.0, theta=1e9)
    alif = AlifParams(tau_m=12.0, b_0=1e9)
    u0 = 0.8
    ls = LifState(u=u0)
    as_ = AlifState(u=u0)
    for t in range(1, 101):
        ls, _ = lif_step(ls, 0.0, lif)
        as_, _ = alif_step(as_, 0.0, alif)
        assert abs(ls.u - u0 * (1.0 - 1.0 / 12.0) ** t) < 1e-12
        assert abs(as_.u - u0 * math.exp(-t / 12.0)) < 1e-12


def test_threshold_floor_and_saturation():
    # theta never drops below the baseline and approaches b_0 + beta
    # monotonically under sustained spiking
    p = AlifParams(tau_m=20.0, tau_adp=100.0, b_0=0.5, beta=1.2)
    state = AlifState()
    prev_theta = p.b_0
    for _ in range(1000):
        state, _ = alif_step(state, 0.0, p)
        state = AlifState(u=state.u, eta=state.eta, s_prev=1.0)  # forced spiking
        theta = p.b_0 + p.beta * state.eta
        assert theta >= p.b_0
        assert theta >= prev_theta - 1e-15
        prev_theta = theta
    assert (p.b_0 + p.beta) - prev_theta < 1e-3


def test_adaptation_variable_stays_in_unit_interval():
    rng = np.random.default_rng(4)
    p = AlifParams(tau_adp=7.0)
    state = AlifState()
    for _ in range(2000):
        spike = float(rng.integers(0, 2))
        state = AlifState(u=0.0, eta=state.eta, s_prev=spike)
        state, _ = alif_step(state, 0.0, p)
        assert 0.0 <= state.eta <= 1.0


def test_zero_beta_adaptive_matches_subtractive_fixed_threshold():
    # with beta = 0 the adaptive unit is a fixed-threshold unit that
    # subtracts b_0 at reset; align the leak by converting time constants
    rng = np.random.default_rng(5)
    tau_alif = 14.0
    alpha = math.exp(-1.0 / tau_alif)
    tau_lif = 1.0 / (1.0 - alpha)
    a_p = AlifParams(tau_m=tau_alif, tau_adp=50.0, b_0=0.7, beta=0.0, r_m=1.3)
    l_p = LifParams(tau_m=tau_lif, r_m=1.3, theta=0.7, reset="subtract")
    a_s = AlifState()
    l_s = LifState()
    for _ in range(1000):
        drive = float(rng.normal(0.0, 1.5))
        a_s, sa = alif_step(a_s, drive, a_p)
        l_s, sl = lif_step(l_s, drive, l_p)
        assert abs(a_s.u - l_s.u) < 1e-9
        assert sa == sl


def test_vectorized_steps_match_scalar_loop():
    rng = np.random.default_rng(6)
    n = 32
    tau = rng.uniform(2.0, 40.0, n)
    p = AlifParams(tau_m=tau, tau_adp=rng.uniform(5.0, 200.0, n),
                   b_0=0.4, beta=0.9)
    u0 = rng.normal(0.0, 1.0, n)
    eta0 = rng.uniform(0.0, 1.0, n)
    s0 = rng.integers(0, 2, n).astype(float)
    drive = rng.normal(0.0, 2.0, n)
    vec_state, vec_s = alif_step(AlifState(u=u0, eta=eta0, s_prev=s0), drive, p)
    for i in range(n):
        pi = AlifParams(tau_m=float(tau[i]), tau_adp=float(p.tau_adp[i]),
                        b_0=0.4, beta=0.9)
        si, out = alif_step(
            AlifState(u=float(u0[i]), eta=float(eta0[i]), s_prev=float(s0[i])),
            float(drive[i]), pi)
        assert abs(vec_state.u[i] - si.u) < 1e-12
        assert abs(vec_state.eta[i] - si.eta) < 1e-12
        assert vec_s[i] == out


def test_parameter_validation():
    with pytest.raises(ValueError):
        LifParams(tau_m=0.5)  # below dt
    with pytest.raises(ValueError):
        LifParams(theta=0.0, u_r=0.0)
    with pytest.raises(ValueError):
        LifParams(reset="clip")
    with pytest.raises(ValueError):
        AlifParams(tau_adp=0.0)
    with pytest.raises(ValueError):
        AlifParams(beta=-0.1)
