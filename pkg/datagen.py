#!/usr/bin/env python3
"""
Datagen - Synthetic GLM datasets under proportional high-dimensional scaling

Rows X_i ~ N_d(0, sigma2 / n I_d), coefficients beta ~ N_d(0, C / alpha) and
responses from the model's conditional law.
"""

import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import List, Optional, Tuple, Union

import numpy as np

from errors import DimensionMismatch, UnknownKind
from models import GLM_FAMILIES
from spd_gaussian import GaussianSpec, SpdMatrix, chol_factor, gauss_sample
from targets import Dataset, format_number, write_dataset

logger = logging.getLogger(__name__)

COV_SPECS = ("identity", "scaled_identity", "diagonal", "file")

# (d, n) pairs of the growing-dimension logistic experiment
SWEEP_GRID = ((100, 10), (200, 20), (500, 50), (1000, 100))


@dataclass
class GenConfig:
    kind: str
    n: int
    d: int
    sigma2: float = 1.0
    alpha: float = 1.0
    cov_spec: str = "identity"
    s0: float = 1.0
    cov_diag: List[float] = field(default_factory=list)
    cov_file: Optional[str] = None
    nb_xi: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.kind not in GLM_FAMILIES:
            raise UnknownKind(f"unknown model kind {self.kind!r}; expected one of {', '.join(GLM_FAMILIES)}")
        if self.n < 1 or self.d < 1:
            raise ValueError("INVALID_REQUEST: n and d must be at least 1")
        if not (self.sigma2 > 0 and self.alpha > 0 and self.nb_xi > 0):
            raise ValueError("INVALID_REQUEST: sigma2, alpha and nb_xi must be positive")
        if self.cov_spec not in COV_SPECS:
            raise ValueError(f"INVALID_REQUEST: cov_spec must be one of {', '.join(COV_SPECS)}")

    @property
    def gamma(self) -> float:
        return self.d / self.n

    def to_record(self) -> str:
        lines = []
        for key, value in asdict(self).items():
            if isinstance(value, list):
                value = ",".join(format_number(v) for v in value)
            elif isinstance(value, float):
                value = repr(value)
            elif value is None:
                value = ""
            lines.append(f"{key}={value}")
        return "\n".join(lines) + "\n"


def build_cov(cov_spec: str, d: int, s0: float = 1.0, diag: Optional[List[float]] = None,
              path: Optional[Union[str, Path]] = None) -> SpdMatrix:
    """identity, scaled_identity (s0/d I so that tr C = s0), diagonal, or a CSV matrix file."""
    if cov_spec == "identity":
        return chol_factor(np.eye(d))
    if cov_spec == "scaled_identity":
        return chol_factor(np.eye(d) * (s0 / d))
    if cov_spec == "diagonal":
        diag = list(diag or [])
        if len(diag) != d:
            raise DimensionMismatch(f"diagonal covariance needs {d} entries, got {len(diag)}")
        return chol_factor(np.diag(np.asarray(diag, dtype=float)))
    if cov_spec == "file":
        if not path:
            raise ValueError("INVALID_REQUEST: cov_spec=file needs a path")
        m = np.loadtxt(path, delimiter=",", ndmin=2)
        if m.shape != (d, d):
            raise DimensionMismatch(f"covariance file is {m.shape}, expected ({d}, {d})")
        return chol_factor(m)
    raise ValueError(f"INVALID_REQUEST: unknown cov_spec {cov_spec!r}")


def gen_design(cfg: GenConfig, rng: np.random.Generator) -> np.ndarray:
    """n x d matrix of i.i.d. N(0, sigma2 / n) entries."""
    return rng.standard_normal((cfg.n, cfg.d)) * np.sqrt(cfg.sigma2 / cfg.n)


def draw_beta_prior(alpha: float, C: SpdMatrix, rng: np.random.Generator) -> np.ndarray:
    """beta ~ N_d(0, C / alpha)"""
    return gauss_sample(GaussianSpec(mean=np.zeros(C.dim), cov=C, precision_scale=alpha), rng)


def gen_response(kind: str, X: np.ndarray, beta: np.ndarray, nb_xi: float,
                 rng: np.random.Generator) -> np.ndarray:
    if kind not in GLM_FAMILIES:
        raise UnknownKind(f"unknown model kind {kind!r}")
    X = np.asarray(X, dtype=float)
    beta = np.asarray(beta, dtype=float)
    if X.shape[1] != beta.shape[0]:
        raise DimensionMismatch(f"X has {X.shape[1]} columns, beta has {beta.shape[0]} entries")
    return GLM_FAMILIES[kind](nb_xi=nb_xi).sample(X @ beta, rng)


def generate_dataset(cfg: GenConfig) -> Tuple[Dataset, np.ndarray]:
    """Design, a prior draw of the true beta, then responses; all from one stream seeded by cfg.seed."""
    rng = np.random.default_rng(cfg.seed)
    C = build_cov(cfg.cov_spec, cfg.d, cfg.s0, cfg.cov_diag, cfg.cov_file)
    X = gen_design(cfg, rng)
    beta = draw_beta_prior(cfg.alpha, C, rng)
    Y = gen_response(cfg.kind, X, beta, cfg.nb_xi, rng)
    logger.info(f"Generated {cfg.kind} dataset n={cfg.n} d={cfg.d} (gamma={cfg.gamma:.3g}) seed={cfg.seed}")
    return Dataset(X=X, Y=Y), beta


def write_generated(cfg: GenConfig, data: Dataset, beta_true: np.ndarray, path: Union[str, Path]) -> Path:
    """Dataset CSV plus a `<path>.gen.txt` sidecar echoing the config and the true beta."""
    path = Path(path)
    write_dataset(data, path)
    sidecar = path.with_name(path.name + ".gen.txt")
    sidecar.write_text(cfg.to_record() + f"beta_true={','.join(repr(float(b)) for b in beta_true)}\n")
    return sidecar
