"""Robust M-estimation for the exponential power distribution.

Fits location, scale and shape of the exponential power (generalized
Gaussian) family under contaminated data, using estimating-equation score
families and deformed-likelihood objectives, with information-matrix
variances, model-selection tools and a Monte Carlo harness.
"""

__version__ = "0.1.0"
