#pragma once

// Non-iterative approximate maximum likelihood for the structured model.
//
// Given u, the likelihood is maximized in closed form by c0 = u^T xbar and
// lambda_i = V_i^T A(0) V_i / n. The profile likelihood of u is bounded below
// by a function that depends on u only through -u^T A(xbar) u / 2, so the
// approximate MLE of u is the eigenvector of A(xbar) with smallest eigenvalue.

#include "cmcov/core_model.hpp"

namespace cmcov {

struct MleFit {
  MeanState mean;
  EigenSpectrum spectrum;
  double profile_loglik_at_fit = 0.0;
  double lower_bound_at_fit = 0.0;
  double smallest_eig_of_a_xbar = 0.0;
  // Smallest eigenvalue of A(xbar) is repeated (within 1e-9 trace); the
  // eigensolver's first vector was used.
  bool degenerate_direction = false;
  // u^T xbar was exactly zero, so c0 = 0 and u is only the eigenvector.
  bool zero_mean = false;

  [[nodiscard]] StructuredCovariance covariance() const;
};

/// c0 = u^T xbar.
double estimate_c0(const SampleSet& data, const Eigen::VectorXd& u);

/// Unsimplified closed form u^T P D^-1 P^T xbar / u^T P D^-1 P^T u. Agrees
/// with estimate_c0 for every spectrum; kept for the equivalence check.
double estimate_c0_general(const SampleSet& data, const Eigen::VectorXd& u,
                           const EigenSpectrum& spectrum);

/// lambda_i = V_i^T A(0) V_i / n. DegenerateData when a quadratic form falls
/// below 1e-12.
EigenSpectrum estimate_lambdas(const SampleSet& data, const MeanState& mean);
EigenSpectrum estimate_lambdas(const SampleSet& data, const OrthoBasis& basis);

/// Profile log-likelihood of u with c0 and lambda at their closed forms
/// (additive constant dropped).
double profile_loglik(const SampleSet& data, const Eigen::VectorXd& u);

/// h(u) = -(n(p-1)/2) log(lambda_max(A(0)) / n) - (u^T A(xbar) u + n(p-1)) / 2.
double lower_bound_h(const SampleSet& data, const Eigen::VectorXd& u);

MleFit fit_mle(const SampleSet& data);

}  // namespace cmcov
