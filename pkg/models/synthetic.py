#!/usr/bin/env python3
"""
Synthetic targets without data: a centered Gaussian and the 2-d random-walk example
"""

import numpy as np

from errors import RwmDimension
from spd_gaussian import SpdMatrix


class GaussianSynthetic:
    """f(beta) = beta^T Sigma^{-1} beta / 2."""

    kind = "gaussian-synthetic"

    def __init__(self, cov: SpdMatrix):
        self.cov = cov

    def check_dim(self, d: int):
        pass

    def neg_log_post(self, beta):
        return 0.5 * self.cov.quad_form(beta)

    def grad_neg_log_post(self, beta):
        return self.cov.solve(beta)


class RwmExample:
    """f(x, z) = x^2 + x^2 z^2 + z^2, a target on which random-walk Metropolis is not geometrically ergodic."""

    kind = "rwm-example"

    def __init__(self, cov: SpdMatrix = None):
        self.cov = cov

    def check_dim(self, d: int):
        if d != 2:
            raise RwmDimension(f"rwm-example is defined for d=2 only, got d={d}")

    def neg_log_post(self, beta):
        x, z = beta[..., 0], beta[..., 1]
        return x * x + x * x * z * z + z * z

    def grad_neg_log_post(self, beta):
        x, z = beta[..., 0], beta[..., 1]
        return np.stack([2 * x + 2 * x * z * z, 2 * x * x * z + 2 * z], axis=-1)
