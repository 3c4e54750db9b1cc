#!/usr/bin/env python3
"""
Targets - Unnormalized posterior log-densities for Bayesian GLMs and synthetic examples

f(beta) = l_n(beta) + (alpha/2) beta^T C^{-1} beta for the four GLM kinds; the
synthetic kinds supply f directly. Every evaluation accepts a single point
(d,) or a batch (..., d).
"""

import csv
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Union

import numpy as np

from errors import DatasetFormatError, DimensionMismatch, ModelHasNoData, UnknownKind
from models import GLM_FAMILIES, MODEL_KINDS, SYNTHETIC_TARGETS
from spd_gaussian import SpdMatrix, identity

logger = logging.getLogger(__name__)

CURVATURE_STEP = 1e-4


@dataclass(frozen=True, eq=False)
class Dataset:
    X: np.ndarray
    Y: np.ndarray

    def __post_init__(self):
        X = np.atleast_2d(np.array(self.X, dtype=float))
        Y = np.atleast_1d(np.array(self.Y, dtype=float))
        if X.ndim != 2 or Y.ndim != 1 or X.shape[0] != Y.shape[0]:
            raise DimensionMismatch(f"X shape {X.shape} incompatible with Y shape {Y.shape}")
        if X.shape[1] < 1:
            raise DimensionMismatch("dataset needs at least one feature column")
        X.setflags(write=False)
        Y.setflags(write=False)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "Y", Y)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def d(self) -> int:
        return self.X.shape[1]

    @classmethod
    def empty(cls, d: int) -> "Dataset":
        """No observations; l_n is identically zero."""
        return cls(X=np.zeros((0, d)), Y=np.zeros(0))


def format_number(x: float) -> str:
    """Shortest round-trip decimal."""
    x = float(x)
    if x == int(x) and abs(x) < 2**53:
        return str(int(x))
    return repr(x)


def write_dataset(data: Dataset, path: Union[str, Path]):
    with open(path, "w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(["y"] + [f"x{j + 1}" for j in range(data.d)])
        for y, row in zip(data.Y, data.X):
            writer.writerow([format_number(y)] + [repr(float(v)) for v in row])


def load_dataset(path: Union[str, Path]) -> Dataset:
    """Read a `y,x1,...,xd` CSV; wrong column counts or non-numeric fields are errors."""
    with open(path, newline="") as f:
        rows = list(csv.reader(f))
    if not rows:
        raise DatasetFormatError(f"{path}: empty file")

    header = [h.strip() for h in rows[0]]
    expected = ["y"] + [f"x{j + 1}" for j in range(len(header) - 1)]
    if len(header) < 2 or header != expected:
        raise DatasetFormatError(f"{path}: header must be y,x1,...,xd, got {','.join(header)}")

    body = [r for r in rows[1:] if r]
    if not body:
        raise DatasetFormatError(f"{path}: no observations")

    values = []
    for lineno, r in enumerate(body, start=2):
        if len(r) != len(header):
            raise DatasetFormatError(f"{path}:{lineno}: expected {len(header)} columns, got {len(r)}")
        try:
            values.append([float(v) for v in r])
        except ValueError:
            raise DatasetFormatError(f"{path}:{lineno}: non-numeric field")

    arr = np.array(values)
    logger.debug(f"Loaded dataset {path}: n={arr.shape[0]}, d={arr.shape[1] - 1}")
    return Dataset(X=arr[:, 1:], Y=arr[:, 0])


@dataclass(frozen=True, eq=False)
class TargetModel:
    kind: str
    prior_alpha: float
    prior_cov: SpdMatrix
    data: Optional[Dataset] = None
    nb_xi: float = 1.0
    target_cov: Optional[SpdMatrix] = None  # Sigma for gaussian-synthetic
    family: object = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.kind not in MODEL_KINDS:
            raise UnknownKind(f"unknown model kind {self.kind!r}; expected one of {', '.join(MODEL_KINDS)}")
        if not self.prior_alpha > 0:
            raise ValueError("INVALID_REQUEST: prior_alpha must be positive")
        if not self.nb_xi > 0:
            raise ValueError("INVALID_REQUEST: nb_xi must be positive")

        if self.kind in GLM_FAMILIES:
            if self.data is None:
                raise ModelHasNoData(f"{self.kind} requires a dataset")
            if self.data.d != self.prior_cov.dim:
                raise DimensionMismatch(f"data has d={self.data.d}, prior has dim {self.prior_cov.dim}")
            family = GLM_FAMILIES[self.kind](nb_xi=self.nb_xi)
            reason = family.validate(self.data.Y)
            if reason:
                raise DatasetFormatError(f"{self.kind}: {reason}")
        else:
            cov = self.target_cov if self.target_cov is not None else self.prior_cov
            if cov.dim != self.prior_cov.dim:
                raise DimensionMismatch(f"target dim {cov.dim} vs prior dim {self.prior_cov.dim}")
            family = SYNTHETIC_TARGETS[self.kind](cov)
            family.check_dim(self.prior_cov.dim)
        object.__setattr__(self, "family", family)

    @property
    def dim(self) -> int:
        return self.prior_cov.dim

    @property
    def is_glm(self) -> bool:
        return self.kind in GLM_FAMILIES

    @property
    def r0(self) -> Optional[float]:
        return getattr(self.family, "r0", None) if self.is_glm else None

    def _check(self, beta) -> np.ndarray:
        beta = np.asarray(beta, dtype=float)
        if beta.shape[-1:] != (self.dim,):
            raise DimensionMismatch(f"beta shape {beta.shape} vs model dim {self.dim}")
        return beta

    def _require_data(self):
        if not self.is_glm:
            raise ModelHasNoData(f"{self.kind} has no likelihood")

    @staticmethod
    def _scalar(x, beta):
        return float(x) if np.ndim(beta) == 1 else x

    def neg_log_lik(self, beta):
        """l_n(beta) with beta-free constants dropped."""
        self._require_data()
        beta = self._check(beta)
        u = beta @ self.data.X.T
        return self._scalar(np.sum(self.family.terms(u, self.data.Y), axis=-1), beta)

    def grad_neg_log_lik(self, beta):
        self._require_data()
        beta = self._check(beta)
        u = beta @ self.data.X.T
        return self.family.dterms(u, self.data.Y) @ self.data.X

    def prior_term(self, beta):
        """(alpha/2) beta^T C^{-1} beta"""
        return 0.5 * self.prior_alpha * self.prior_cov.quad_form(beta)

    def neg_log_post(self, beta):
        """f(beta), the negative unnormalized log posterior."""
        beta = self._check(beta)
        if self.is_glm:
            u = beta @ self.data.X.T
            out = np.sum(self.family.terms(u, self.data.Y), axis=-1) + self.prior_term(beta)
        else:
            out = self.family.neg_log_post(beta)
        return self._scalar(out, beta)

    def grad_neg_log_post(self, beta):
        beta = self._check(beta)
        if self.is_glm:
            return self.grad_neg_log_lik(beta) + self.prior_alpha * self.prior_cov.solve(beta)
        return self.family.grad_neg_log_post(beta)

    def log_target(self, beta):
        """log of the unnormalized target density, -f."""
        return -self.neg_log_post(beta)

    def curvature_probe(self, beta, v, step: float = CURVATURE_STEP) -> float:
        """v^T H_{l_n}(beta) v by second-order central differences along v."""
        self._require_data()
        beta = self._check(beta)
        v = np.asarray(v, dtype=float)
        if abs(np.linalg.norm(v) - 1.0) > 1e-10:
            raise ValueError("INVALID_REQUEST: probe direction must be a unit vector")
        X, Y = self.data.X, self.data.Y
        u = X @ beta
        s = step * (X @ v)
        # summed row-wise to keep cancellation per observation
        second = self.family.terms(u + s, Y) - 2.0 * self.family.terms(u, Y) + self.family.terms(u - s, Y)
        return float(np.sum(second) / step**2)


def build_model(kind: str, d: int, data: Optional[Dataset] = None, alpha: float = 1.0,
                cov: Optional[SpdMatrix] = None, nb_xi: float = 1.0,
                target_cov: Optional[SpdMatrix] = None) -> TargetModel:
    """Assemble a TargetModel, defaulting the prior covariance to the identity."""
    if kind not in MODEL_KINDS:
        raise UnknownKind(f"unknown model kind {kind!r}")
    if data is not None:
        d = data.d
    return TargetModel(kind=kind, prior_alpha=alpha, prior_cov=cov or identity(d), data=data,
                       nb_xi=nb_xi, target_cov=target_cov)
