#!/usr/bin/env python3
"""
Binary-response families: logistic and probit regression
"""

import numpy as np
from scipy import special

from models.base import GlmFamily, softplus

SQRT_2_OVER_PI = float(np.sqrt(2.0 / np.pi))


class LogisticFamily(GlmFamily):
    """Y ~ Bernoulli(S(u)) with S(u) = 1 / (1 + exp(-u))."""

    kind = "logistic"
    binary = True
    r0 = 0.25

    def terms(self, u, y):
        return softplus(u) - y * u

    def dterms(self, u, y):
        return special.expit(u) - y

    def sample(self, u, rng):
        return (rng.random(u.shape) < special.expit(u)).astype(float)


def mills_ratio(u: np.ndarray) -> np.ndarray:
    """phi(u) / Phi(u) through the scaled complementary error function."""
    return SQRT_2_OVER_PI / special.erfcx(-u / np.sqrt(2.0))


class ProbitFamily(GlmFamily):
    """Y ~ Bernoulli(Phi(u))."""

    kind = "probit"
    binary = True
    r0 = 1.0

    def terms(self, u, y):
        return -(y * special.log_ndtr(u) + (1.0 - y) * special.log_ndtr(-u))

    def dterms(self, u, y):
        return -(y * mills_ratio(u) - (1.0 - y) * mills_ratio(-u))

    def sample(self, u, rng):
        return (rng.random(u.shape) < special.ndtr(u)).astype(float)
