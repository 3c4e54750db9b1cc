#!/usr/bin/env python3
"""
GlmFamily - per-observation negative log-likelihood terms in the linear predictor
"""

from typing import Optional

import numpy as np


class GlmFamily:
    """
    A GLM family works on the linear predictor u = X beta.

    Subclasses define per-row terms t(u, y) (beta-free constants dropped),
    their derivative in u, a response validator and a response sampler.
    """

    kind = "glm"
    binary = False
    # Hessian bound l'' <= r0 used by the high-dimensional rate bound; None when unknown
    r0: Optional[float] = None

    def __init__(self, nb_xi: float = 1.0):
        self.nb_xi = float(nb_xi)

    def terms(self, u: np.ndarray, y: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def dterms(self, u: np.ndarray, y: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def sample(self, u: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        raise NotImplementedError

    def validate(self, y: np.ndarray) -> Optional[str]:
        """Return a reason string if y is not a valid response vector."""
        if not np.all(np.isfinite(y)):
            return "responses must be finite"
        if not np.all(y == np.round(y)):
            return "responses must be integer-valued"
        if self.binary and not np.all((y == 0) | (y == 1)):
            return "binary model requires responses in {0,1}"
        if not self.binary and np.any(y < 0):
            return "count model requires non-negative responses"
        return None


def softplus(u: np.ndarray) -> np.ndarray:
    """log(1 + exp(u)) as max(u, 0) + log1p(exp(-|u|))."""
    return np.maximum(u, 0.0) + np.log1p(np.exp(-np.abs(u)))
