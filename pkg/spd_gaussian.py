#!/usr/bin/env python3
"""
SPD Gaussian - Symmetric positive-definite algebra and multivariate Gaussians

Covariances are factored once at construction; every density and draw goes
through the cached lower-triangular factor.
"""

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import linalg

from errors import DimensionMismatch, NotSpd, NotSymmetric

logger = logging.getLogger(__name__)

SYMMETRY_RTOL = 1e-12
PIVOT_FLOOR = 1e-14
LOG_2PI = float(np.log(2.0 * np.pi))


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class SpdMatrix:
    dim: int
    entries: np.ndarray
    factor: np.ndarray  # lower triangular, factor @ factor.T == entries

    @property
    def log_det(self) -> float:
        return float(2.0 * np.sum(np.log(np.diag(self.factor))))

    @property
    def trace(self) -> float:
        return float(np.trace(self.entries))

    def solve_factor(self, v: np.ndarray) -> np.ndarray:
        """L^{-1} v for v of shape (dim,) or (..., dim)."""
        v = np.asarray(v, dtype=float)
        if v.shape[-1] != self.dim:
            raise DimensionMismatch(f"expected trailing dim {self.dim}, got {v.shape}")
        flat = v.reshape(-1, self.dim).T
        out = linalg.solve_triangular(self.factor, flat, lower=True, check_finite=False)
        return out.T.reshape(v.shape)

    def solve(self, v: np.ndarray) -> np.ndarray:
        """entries^{-1} v."""
        v = np.asarray(v, dtype=float)
        flat = v.reshape(-1, self.dim).T
        out = linalg.cho_solve((self.factor, True), flat, check_finite=False)
        return out.T.reshape(v.shape)

    def quad_form(self, v: np.ndarray) -> np.ndarray:
        """v^T entries^{-1} v, vectorised over leading axes."""
        z = self.solve_factor(v)
        return np.sum(z * z, axis=-1)

    def scaled(self, c: float) -> "SpdMatrix":
        return chol_factor(c * self.entries)


def chol_factor(m) -> SpdMatrix:
    """Validate and factor a symmetric positive-definite matrix."""
    m = np.atleast_2d(np.asarray(m, dtype=float))
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DimensionMismatch(f"matrix must be square, got shape {m.shape}")

    scale = max(1.0, float(np.max(np.abs(m))))
    asym = float(np.max(np.abs(m - m.T)))
    if asym > SYMMETRY_RTOL * scale:
        raise NotSymmetric(f"max asymmetry {asym:.3e} exceeds tolerance")
    m = 0.5 * (m + m.T)

    try:
        factor = linalg.cholesky(m, lower=True, check_finite=True)
    except (linalg.LinAlgError, ValueError) as e:
        raise NotSpd(f"cholesky failed: {e}")

    pivots = np.diag(factor)
    if not np.all(np.isfinite(pivots)) or float(np.min(pivots)) < PIVOT_FLOOR:
        raise NotSpd(f"pivot {float(np.min(pivots)):.3e} below floor {PIVOT_FLOOR}")

    return SpdMatrix(dim=m.shape[0], entries=_frozen(m), factor=_frozen(factor))


def identity(d: int) -> SpdMatrix:
    return chol_factor(np.eye(d))


@dataclass(frozen=True, eq=False)
class GaussianSpec:
    mean: np.ndarray
    cov: SpdMatrix
    precision_scale: float = 1.0  # alpha, covariance is cov / alpha

    def __post_init__(self):
        mean = _frozen(np.atleast_1d(self.mean))
        if mean.shape != (self.cov.dim,):
            raise DimensionMismatch(f"mean shape {mean.shape} vs cov dim {self.cov.dim}")
        if not self.precision_scale > 0:
            raise ValueError("INVALID_REQUEST: precision_scale must be positive")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "precision_scale", float(self.precision_scale))

    @property
    def dim(self) -> int:
        return self.cov.dim

    @property
    def log_det_cov(self) -> float:
        """log det(alpha^{-1} C)"""
        return self.cov.log_det - self.dim * np.log(self.precision_scale)

    def with_mean(self, mean) -> "GaussianSpec":
        return GaussianSpec(mean=np.asarray(mean, dtype=float), cov=self.cov,
                            precision_scale=self.precision_scale)


def gauss_logpdf(x, spec: GaussianSpec):
    """
    Full log-density of N(mean, alpha^{-1} C), normalizer included.

    Accepts a single point (d,) returning a float, or a batch (..., d)
    returning an array.
    """
    x = np.asarray(x, dtype=float)
    if x.shape[-1:] != (spec.dim,):
        raise DimensionMismatch(f"point shape {x.shape} vs dim {spec.dim}")
    quad = spec.precision_scale * spec.cov.quad_form(x - spec.mean)
    out = -0.5 * spec.dim * LOG_2PI - 0.5 * spec.log_det_cov - 0.5 * quad
    return float(out) if x.ndim == 1 else out


def gauss_sample(spec: GaussianSpec, rng: np.random.Generator, size: Optional[int] = None):
    """
    mean + alpha^{-1/2} L z with z standard normal.

    With size=None one vector of d normals is consumed; with size=R the
    draws are row-major, matching R consecutive single draws.
    """
    shape = (spec.dim,) if size is None else (size, spec.dim)
    z = rng.standard_normal(shape)
    return spec.mean + (z @ spec.cov.factor.T) / np.sqrt(spec.precision_scale)
