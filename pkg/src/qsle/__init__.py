"""q-Gaussian priors, q-Hermite polynomial chaos and Christoffel
least-squares likelihood surrogates for Bayesian inverse problems."""

__version__ = "0.1.0"

from . import experiments, fem2d, inference, metrics, qgauss, qhermite, sle

__all__ = [
    "__version__",
    "qgauss",
    "qhermite",
    "sle",
    "inference",
    "metrics",
    "fem2d",
    "experiments",
]
