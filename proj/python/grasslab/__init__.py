"""Numerical toolkit for log-concave measures and their Grassmannian marginals.

The heavy lifting lives in the compiled extension; this package re-exports
the main operations.
"""

from grasslab._core import (
    Measure,
    Subspace,
    __version__,
    a_k_average,
    ball_measure,
    ball_sample,
    gaussian_smoothing,
    haar_sample,
    iq_moment,
    isotropic_constant,
    marginal,
    marginal_density_at_zero,
    marginal_l,
    measure,
    metric_d,
    neighborhood_search,
    principal_angles,
    product,
    rotation_mapping,
    sigma_inf,
    zq_support,
)

__all__ = [
    "Measure",
    "Subspace",
    "__version__",
    "a_k_average",
    "ball_measure",
    "ball_sample",
    "gaussian_smoothing",
    "haar_sample",
    "iq_moment",
    "isotropic_constant",
    "marginal",
    "marginal_density_at_zero",
    "marginal_l",
    "measure",
    "metric_d",
    "neighborhood_search",
    "principal_angles",
    "product",
    "rotation_mapping",
    "sigma_inf",
    "zq_support",
]
