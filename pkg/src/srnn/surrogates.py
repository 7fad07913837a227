"""Surrogate derivatives for the spike nonlinearity.

The spike S = H(u - theta) has zero derivative almost everywhere, so
backward passes substitute a pseudo-derivative evaluated on the centered
membrane x = u - theta. Four shapes are provided; each is a small frozen
dataclass so a configured surrogate can travel with a training run.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np

_SQRT_2PI = math.sqrt(2.0 * math.pi)


def _normal_pdf(x, mu, sigma):
    z = (np.asarray(x, dtype=float) - mu) / sigma
    return np.exp(-0.5 * z * z) / (sigma * _SQRT_2PI)


@dataclass(frozen=True)
class MultiGaussian:
    """Central Gaussian minus two flanking Gaussians at +-sigma.

    grad(x) = (1+h)*N(x | 0, sigma^2) - h*N(x | sigma, (s*sigma)^2)
                                      - h*N(x | -sigma, (s*sigma)^2)

    The flanks dip the curve below zero away from threshold.
    """

    h: float = 0.15
    s: float = 6.0
    sigma: float = 0.5

    def __post_init__(self):
        if self.s <= 1.0:
            raise ValueError("s must exceed 1 (flanks wider than the center)")
        if self.sigma <= 0.0:
            raise ValueError("sigma must be positive")


@dataclass(frozen=True)
class Gaussian:
    sigma: float = 0.5

    def __post_init__(self):
        if self.sigma <= 0.0:
            raise ValueError("sigma must be positive")


@dataclass(frozen=True)
class Linear:
    """Triangular window max(0, 1 - alpha*|x|)."""

    alpha: float = 1.0

    def __post_init__(self):
        if self.alpha <= 0.0:
            raise ValueError("alpha must be positive")


@dataclass(frozen=True)
class SLayer:
    """Two-sided exponential exp(-alpha*|x|)."""

    alpha: float = 5.0

    def __post_init__(self):
        if self.alpha <= 0.0:
            raise ValueError("alpha must be positive")


SurrogateKind = Union[MultiGaussian, Gaussian, Linear, SLayer]


def mg_grad(u, theta, h: float = 0.15, s: float = 6.0, sigma: float = 0.5):
    x = np.asarray(u, dtype=float) - theta
    out = (1.0 + h) * _normal_pdf(x, 0.0, sigma) \
        - h * _normal_pdf(x, sigma, s * sigma) \
        - h * _normal_pdf(x, -sigma, s * sigma)
    return float(out) if out.ndim == 0 else out


def gaussian_grad(u, theta, sigma: float = 0.5):
    out = _normal_pdf(np.asarray(u, dtype=float) - theta, 0.0, sigma)
    return float(out) if out.ndim == 0 else out


def linear_grad(u, theta, alpha: float = 1.0):
    x = np.asarray(u, dtype=float) - theta
    out = np.maximum(0.0, 1.0 - alpha * np.abs(x))
    return float(out) if out.ndim == 0 else out


def slayer_grad(u, theta, alpha: float = 5.0):
    x = np.asarray(u, dtype=float) - theta
    out = np.exp(-alpha * np.abs(x))
    return float(out) if out.ndim == 0 else out


def surrogate_grad(kind: SurrogateKind, u, theta):
    """Evaluate the configured surrogate at membrane u against threshold theta."""
    if isinstance(kind, MultiGaussian):
        return mg_grad(u, theta, h=kind.h, s=kind.s, sigma=kind.sigma)
    if isinstance(kind, Gaussian):
        return gaussian_grad(u, theta, sigma=kind.sigma)
    if isinstance(kind, Linear):
        return linear_grad(u, theta, alpha=kind.alpha)
    if isinstance(kind, SLayer):
        return slayer_grad(u, theta, alpha=kind.alpha)
    raise TypeError(f"unknown surrogate kind: {type(kind).__name__}")


def surrogate_to_dict(kind: SurrogateKind) -> dict:
    names = {MultiGaussian: "multi_gaussian", Gaussian: "gaussian",
             Linear: "linear", SLayer: "slayer"}
    d = {"kind": names[type(kind)]}
    d.update(kind.__dict__)
    return d


def surrogate_from_dict(d: dict) -> SurrogateKind:
    classes = {"multi_gaussian": MultiGaussian, "gaussian": Gaussian,
               "linear": Linear, "slayer": SLayer}
    d = dict(d)
    name = d.pop("kind")
    if name not in classes:
        raise ValueError(f"unknown surrogate kind: {name!r}")
    return classes[name](**d)
