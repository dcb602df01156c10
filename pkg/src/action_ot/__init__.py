"""Optimal transport with density-weighted minimal-action pairwise costs.

Pairwise costs are minimal Lagrangian actions under a background density;
paths use an endpoint-vanishing Chebyshev basis, families of paths share
coefficients through an RKHS, and endpoint clouds are matched to sample
distributions by an adversarial moment penalty.
"""

from .quadrature import QuadratureRule, gauss_legendre
from .chebyshev import (BasisCache, ChebyshevPath, basis_derivative,
                        basis_value, build_cache, path_state)
from .density import (ConstantDensity, DensityModel, GaussianMixture,
                      RingMixture, StandardGaussian, density_eval,
                      density_from_config, ring_mixture)
from .pairwise import (PairwiseConfig, PairwiseResult, action_endpoint_grads,
                       action_grad_coeffs, discrete_action, endpoint_momentum,
                       lagrangian_node_values, solve_pairwise)
from .shooting import ShootingResult, el_rhs, integrate_ivp, shoot_bvp
from .penalty import (PenaltyState, feature_jacobian, fit_penalty,
                      penalty_grad, penalty_value, quadratic_features, refit)
from .transport import (KernelSpec, ThetaField, TransportConfig,
                        TransportResult, eval_coeff_field,
                        family_action_and_grads, lambda_heuristic,
                        solve_transport, transport_objective)
from .metric import (ConstantMetric, DiagonalField, IsotropicDensityMetric,
                     MetricField, QuadraticDiagonalField, metric_from_config,
                     metric_lagrangian, metric_momentum)
from .apps import (DissimilarityMatrix, MatchingReport, action_assignment,
                   action_cost_matrix, average_linkage_cluster,
                   bimodal_clustering_scene, dissimilarity_matrix,
                   euclidean_assignment, euclidean_transport_cost,
                   pairwise_dissimilarity, ring_matching_scene,
                   rotation_truth_accuracy, transport_matching)

__version__ = "0.1.0"

__all__ = [
    "QuadratureRule", "gauss_legendre",
    "BasisCache", "ChebyshevPath", "basis_derivative", "basis_value",
    "build_cache", "path_state",
    "ConstantDensity", "DensityModel", "GaussianMixture", "RingMixture",
    "StandardGaussian", "density_eval", "density_from_config", "ring_mixture",
    "PairwiseConfig", "PairwiseResult", "action_endpoint_grads",
    "action_grad_coeffs", "discrete_action", "endpoint_momentum",
    "lagrangian_node_values", "solve_pairwise",
    "ShootingResult", "el_rhs", "integrate_ivp", "shoot_bvp",
    "PenaltyState", "feature_jacobian", "fit_penalty", "penalty_grad",
    "penalty_value", "quadratic_features", "refit",
    "KernelSpec", "ThetaField", "TransportConfig", "TransportResult",
    "eval_coeff_field", "family_action_and_grads", "lambda_heuristic",
    "solve_transport", "transport_objective",
    "ConstantMetric", "DiagonalField", "IsotropicDensityMetric",
    "MetricField", "QuadraticDiagonalField", "metric_from_config",
    "metric_lagrangian", "metric_momentum",
    "DissimilarityMatrix", "MatchingReport", "action_assignment",
    "action_cost_matrix", "average_linkage_cluster",
    "bimodal_clustering_scene", "dissimilarity_matrix",
    "euclidean_assignment", "euclidean_transport_cost",
    "pairwise_dissimilarity", "ring_matching_scene",
    "rotation_truth_accuracy", "transport_matching",
]
