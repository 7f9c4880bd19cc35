"""Bayesian nonparametric estimation of spectral density matrices.

The main entry points are :class:`BernsteinSpectralEstimator` (Bernstein
polynomial prior with Hpd Gamma process weights under the Whittle
likelihood) and :class:`VarSpectralEstimator` (conjugate Bayesian VAR).
"""

__version__ = "0.1.0"

from .estimators import (BernsteinSpectralEstimator, HTransformer, PeriodogramTransformer,  # noqa: E402
                         VarSpectralEstimator)

__all__ = ["BernsteinSpectralEstimator", "VarSpectralEstimator", "PeriodogramTransformer", "HTransformer",
           "__version__"]
