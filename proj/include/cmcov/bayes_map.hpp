#pragma once

// Approximate MAP for the structured model by maximizing a lower bound of the
// lambda-profiled log posterior over the mean direction.
//
// For fixed c0 the bound is
//
//   -h(u) = t sum_i log[(m_i + kappa0 |c0 u - mu0|^2) / (2t)]
//           + (u^T A(c0 u) u + kappa0 (c0 - u^T mu0)^2 + m_1) / 2,
//
// with m_i = lambda_max(A(0)) + c_i and t = (n + 1 + 2a) / 2. The first-
// component prior term uses the P(u) coordinate u^T (c0 u - mu0), matching
// the first diagonal entry of H_N. h, its gradient and Hessian are functions
// of u in R^p (not restricted to the sphere). Newton steps solve the system
// projected onto the tangent space at u, and u is renormalized after every
// accepted step.

#include <cstddef>
#include <optional>
#include <vector>

#include "cmcov/bayes_gibbs.hpp"
#include "cmcov/mle.hpp"

namespace cmcov {

struct NewtonConfig {
  double alpha = 0.5;
  std::size_t max_backtracks = 30;
  double epsilon = 1e-8;
  std::size_t max_outer = 100;
  std::size_t max_inner = 50;

  void validate() const;
};

struct MapFit {
  MeanState mean;
  EigenSpectrum spectrum;
  // h at the start and after every outer iteration; never decreases.
  std::vector<double> h_trace;
  // Increase of h produced by each accepted inner step (all > 0).
  std::vector<double> step_gains;
  std::size_t outer_iterations = 0;
  std::size_t fallback_steps = 0;
  bool converged = false;

  [[nodiscard]] StructuredCovariance covariance() const;
};

/// c0 = (n u^T xbar + kappa0 u^T Sigma^-1 mu0) / (n + kappa0 u^T Sigma^-1 u)
/// with Sigma^-1 = P(u) diag(1, lambda)^-1 P(u)^T.
double map_c0_update(const SampleSet& data, const Eigen::VectorXd& u, const Eigen::VectorXd& lambda,
                     const PriorConfig& prior);

/// lambda_i = (H_N)_{i+1,i+1} / (2t).
EigenSpectrum map_lambda_update(const SampleSet& data, const MeanState& mean, const PriorConfig& prior);

double h_value(const SampleSet& data, const Eigen::VectorXd& u, double c0, const PriorConfig& prior);
Eigen::VectorXd h_gradient(const SampleSet& data, const Eigen::VectorXd& u, double c0,
                           const PriorConfig& prior);
Eigen::MatrixXd h_hessian(const SampleSet& data, const Eigen::VectorXd& u, double c0,
                          const PriorConfig& prior);

/// Starts from the approximate MLE.
MapFit fit_map_newton(const SampleSet& data, const PriorConfig& prior, const NewtonConfig& cfg = {});

/// Starts from a caller-supplied (u, c0); u is normalized first.
MapFit fit_map_newton(const SampleSet& data, const PriorConfig& prior, const NewtonConfig& cfg,
                      const Eigen::VectorXd& u_start, double c0_start);

}  // namespace cmcov
