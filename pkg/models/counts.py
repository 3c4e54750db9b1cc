#!/usr/bin/env python3
"""
Count-response families: Poisson and negative-binomial regression
"""

import numpy as np
from scipy import special

from models.base import GlmFamily, softplus


class PoissonFamily(GlmFamily):
    """Y ~ Poisson(exp(u)); log y! dropped."""

    kind = "poisson"

    def terms(self, u, y):
        with np.errstate(over="ignore"):
            return np.exp(u) - y * u

    def dterms(self, u, y):
        with np.errstate(over="ignore"):
            return np.exp(u) - y

    def sample(self, u, rng):
        # numpy draws by inversion for small means and by rejection above 10
        return rng.poisson(np.exp(u)).astype(float)


class NegBinomFamily(GlmFamily):
    """
    Y ~ NB(xi, s) with s = 1 / (1 + exp(-u)) and pmf proportional to s^y (1 - s)^xi.

    Mean is xi * exp(u).
    """

    kind = "negbinom"

    def terms(self, u, y):
        return (y + self.nb_xi) * softplus(u) - y * u

    def dterms(self, u, y):
        return (y + self.nb_xi) * special.expit(u) - y

    def sample(self, u, rng):
        # Gamma-Poisson mixture
        with np.errstate(over="ignore"):
            rates = rng.gamma(self.nb_xi, np.exp(u))
        return rng.poisson(rates).astype(float)
