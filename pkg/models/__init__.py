"""
Likelihood families and synthetic targets, keyed by model kind.
"""

from models.binary import LogisticFamily, ProbitFamily
from models.counts import PoissonFamily, NegBinomFamily
from models.synthetic import GaussianSynthetic, RwmExample

GLM_FAMILIES = {
    "logistic": LogisticFamily,
    "probit": ProbitFamily,
    "poisson": PoissonFamily,
    "negbinom": NegBinomFamily,
}

SYNTHETIC_TARGETS = {
    "gaussian-synthetic": GaussianSynthetic,
    "rwm-example": RwmExample,
}

MODEL_KINDS = tuple(SYNTHETIC_TARGETS) + tuple(GLM_FAMILIES)
