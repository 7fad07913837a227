"""Single-step dynamics for the four unit types used throughout the package.

Every update rule is written elementwise, so the same function serves a
scalar, a vector of neurons, or a batch: state, drive and parameters
broadcast against each other the usual numpy way.

Fixed-threshold spiking unit, step size dt:

    u <- u*(1 - s_prev) + u_r*s_prev           (reset applied first)
    u <- u*(1 - dt/tau_m) + r_m*drive*dt/tau_m
    s <- 1  if u >= theta  else 0

Adaptive-threshold spiking unit:

    alpha = exp(-dt/tau_m),  rho = exp(-dt/tau_adp)
    u     <- alpha*u + (1 - alpha)*r_m*drive - theta_prev*s_prev
    eta   <- rho*eta + (1 - rho)*s_prev
    theta <- b_0 + beta*eta
    s     <- 1  if u >= theta  else 0

theta_prev is the threshold that was in force on the previous step; the
state carries it implicitly through eta. Spiking happens exactly at
threshold (u == theta fires).

The rectified unit runs the adaptive membrane recursion with no reset and
no threshold and outputs max(0, u). The readout unit is the plain leaky
integrator of the fixed-threshold model without spike or reset; its
membrane potential is what the decoders consume.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np

Real = Union[float, np.ndarray]

RESET_MODES = ("to_rest", "subtract")


def _scalar_or_array(x):
    x = np.asarray(x, dtype=float)
    return float(x) if x.ndim == 0 else x


def decay_coefficient(tau: Real, dt: Real = 1.0) -> Real:
    """Per-step retention exp(-dt/tau) of a leaky state variable."""
    tau = np.asarray(tau, dtype=float)
    dt = np.asarray(dt, dtype=float)
    if not np.all(tau > 0) or not np.all(dt > 0):
        raise ValueError("tau and dt must be positive")
    return _scalar_or_array(np.exp(-dt / tau))


def spike_indicator(u: Real, theta: Real) -> Real:
    """Binary spike: 1.0 where u >= theta, else 0.0."""
    return _scalar_or_array(np.where(np.asarray(u) >= theta, 1.0, 0.0))


@dataclass
class LifParams:
    """Constants of the fixed-threshold unit (also reused by the readout)."""

    tau_m: Real = 20.0
    r_m: Real = 1.0
    u_r: Real = 0.0
    theta: Real = 1.0
    dt: float = 1.0
    # "to_rest" parks the membrane at u_r on the step after a spike;
    # "subtract" removes theta instead (only used to align conventions
    # with the adaptive model in tests).
    reset: str = "to_rest"

    def __post_init__(self):
        if self.reset not in RESET_MODES:
            raise ValueError(f"reset must be one of {RESET_MODES}")
        if not np.all(np.asarray(self.tau_m) >= self.dt):
            raise ValueError("tau_m must be >= dt")
        if not np.all(np.asarray(self.theta) > np.asarray(self.u_r)):
            raise ValueError("theta must exceed u_r")
        if self.dt <= 0:
            raise ValueError("dt must be positive")


@dataclass
class AlifParams:
    """Constants of the adaptive-threshold unit."""

    tau_m: Real = 20.0
    tau_adp: Real = 150.0
    b_0: Real = 1.0
    beta: Real = 1.8
    r_m: Real = 1.0
    dt: float = 1.0

    def __post_init__(self):
        if not np.all(np.asarray(self.tau_m) >= self.dt):
            raise ValueError("tau_m must be >= dt")
        if not np.all(np.asarray(self.tau_adp) >= self.dt):
            raise ValueError("tau_adp must be >= dt")
        if not np.all(np.asarray(self.beta) >= 0):
            raise ValueError("beta must be non-negative")
        if self.dt <= 0:
            raise ValueError("dt must be positive")


@dataclass
class LifState:
    u: Real = 0.0
    s_prev: Real = 0.0


@dataclass
class AlifState:
    u: Real = 0.0
    eta: Real = 0.0
    s_prev: Real = 0.0


def lif_step(state: LifState, drive: Real, p: LifParams) -> tuple[LifState, Real]:
    """One step of the fixed-threshold unit. Returns (new state, spike)."""
    leak = 1.0 - p.dt / np.asarray(p.tau_m)
    gain = np.asarray(p.r_m) * p.dt / np.asarray(p.tau_m)
    if p.reset == "subtract":
        u = np.asarray(state.u) * leak + gain * np.asarray(drive) \
            - np.asarray(p.theta) * np.asarray(state.s_prev)
    else:
        held = np.asarray(state.u) * (1.0 - np.asarray(state.s_prev)) \
            + np.asarray(p.u_r) * np.asarray(state.s_prev)
        u = held * leak + gain * np.asarray(drive)
    s = spike_indicator(u, p.theta)
    return LifState(u=_scalar_or_array(u), s_prev=s), s


def alif_step(state: AlifState, drive: Real, p: AlifParams) -> tuple[AlifState, Real]:
    """One step of the adaptive-threshold unit. Returns (new state, spike)."""
    alpha = decay_coefficient(p.tau_m, p.dt)
    rho = decay_coefficient(p.tau_adp, p.dt)
    eta_prev = np.asarray(state.eta)
    s_prev = np.asarray(state.s_prev)
    theta_prev = np.asarray(p.b_0) + np.asarray(p.beta) * eta_prev
    u = alpha * np.asarray(state.u) + (1.0 - alpha) * np.asarray(p.r_m) * np.asarray(drive) \
        - theta_prev * s_prev
    eta = rho * eta_prev + (1.0 - rho) * s_prev
    theta = np.asarray(p.b_0) + np.asarray(p.beta) * eta
    s = spike_indicator(u, theta)
    return AlifState(u=_scalar_or_array(u), eta=_scalar_or_array(eta), s_prev=s), s


def relu_step(state: LifState, drive: Real, p) -> tuple[LifState, Real]:
    """Non-spiking rectified unit: leaky membrane, output max(0, u).

    Accepts LifParams or AlifParams; only tau_m, r_m and dt are read.
    """
    alpha = decay_coefficient(p.tau_m, p.dt)
    u = alpha * np.asarray(state.u) + (1.0 - alpha) * np.asarray(p.r_m) * np.asarray(drive)
    out = _scalar_or_array(np.maximum(0.0, u))
    return LifState(u=_scalar_or_array(u), s_prev=state.s_prev), out


def readout_step(state: LifState, drive: Real, p: LifParams) -> LifState:
    """Leaky integration of the drive; never spikes, never resets."""
    leak = 1.0 - p.dt / np.asarray(p.tau_m)
    gain = np.asarray(p.r_m) * p.dt / np.asarray(p.tau_m)
    u = np.asarray(state.u) * leak + gain * np.asarray(drive)
    return LifState(u=_scalar_or_array(u), s_prev=state.s_prev)
