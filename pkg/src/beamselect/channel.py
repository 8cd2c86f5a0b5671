"""Lognormal shadowing model and its exact moments.

The channel gain toward any BS is a = exp(g), g ~ Normal(m, sigma^2); the gain
is quasi-static per network realization and redrawn per trial only when the
selection harness is explicitly asked to (see selection / montecarlo modules).
Path loss is normalized to 1: the network is treated as homogeneous and any
residual common gain is absorbed into the target SNR.
"""

from __future__ import annotations

import dataclasses
import math

import numpy as np


@dataclasses.dataclass(frozen=True)
class LognormalParams:
    m: float        # mean of the underlying Gaussian, nepers
    var: float      # variance of the underlying Gaussian, nepers^2

    def __post_init__(self):
        if self.var < 0.0:
            raise ValueError("variance must be nonnegative")


@dataclasses.dataclass(frozen=True)
class ChannelMoments:
    mean: float       # m_a, linear gain
    variance: float   # sigma_a^2, linear gain^2

    @property
    def second_moment(self) -> float:
        # E{a^2} = sigma_a^2 + m_a^2; the load-bearing quantity for the
        # interference component variance.
        return self.variance + self.mean * self.mean


def moments(params: LognormalParams) -> ChannelMoments:
    """Exact lognormal moments: m_a = e^{m + s2/2}, var = (e^{s2}-1) e^{2m+s2}."""
    m, s2 = params.m, params.var
    mean = math.exp(m + 0.5 * s2)
    variance = math.expm1(s2) * math.exp(2.0 * m + s2)
    return ChannelMoments(mean, variance)


def second_moment(params: LognormalParams) -> float:
    """E{a^2} = e^{2m + 2 sigma^2}, directly."""
    return math.exp(2.0 * params.m + 2.0 * params.var)


def draw_shadowing(params: LognormalParams, count: int,
                   stream: np.random.Generator) -> np.ndarray:
    """i.i.d. linear gains exp(g), g ~ Normal(m, var).  count >= 1."""
    if count < 1:
        raise ValueError("count must be >= 1")
    g = params.m + math.sqrt(params.var) * stream.standard_normal(count)
    return np.exp(g)
