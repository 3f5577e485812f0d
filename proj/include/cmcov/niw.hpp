#pragma once

// Normal-inverse-Wishart baseline and the shrinkage-inverse-Wishart kernel.

#include "cmcov/core_model.hpp"

namespace cmcov {

struct NiwPrior {
  Eigen::VectorXd mu0;
  double kappa0 = 1.5;
  double nu0 = 0.0;
  Eigen::MatrixXd lambda0;

  /// mu0 = xbar, kappa0 = 1.5, nu0 = p + 1, Lambda0 = I.
  static NiwPrior defaults(const SampleSet& data);
};

struct NiwParams {
  Eigen::VectorXd mu_n;
  double kappa_n = 0.0;
  double nu_n = 0.0;
  Eigen::MatrixXd lambda_n;
};

struct NiwEstimate {
  Eigen::VectorXd mean;
  Eigen::MatrixXd covariance;
};

/// Conjugate update: mu_n = (kappa0 mu0 + n xbar) / (kappa0 + n),
/// kappa_n = kappa0 + n, nu_n = nu0 + n and
/// Lambda_n = Lambda0 + A(xbar) + n kappa0 / (kappa0 + n) (xbar - mu0)(xbar - mu0)^T.
NiwParams niw_posterior(const SampleSet& data, const Eigen::VectorXd& mu0, double kappa0, double nu0,
                        const Eigen::MatrixXd& lambda0);
NiwParams niw_posterior(const SampleSet& data, const NiwPrior& prior);

/// Joint mode (mu_n, Lambda_n / (nu_n + p + 2)).
NiwEstimate niw_map(const NiwParams& params, Eigen::Index p);

/// Joint NIW log posterior kernel
///   -((nu_n + p)/2 + 1) log|Sigma| - (Tr(Sigma^-1 Lambda_n) + kappa_n (mu - mu_n)^T Sigma^-1 (mu - mu_n)) / 2.
/// Returns -inf when Sigma is not positive definite.
double niw_log_posterior(const NiwParams& params, const Eigen::VectorXd& mu, const Eigen::MatrixXd& sigma);

/// Unnormalized SIW log density
///   -(nu0 + p + 1)/2 log|Sigma| - Tr(Lambda0 Sigma^-1)/2 - b sum_{i<j} log(l_i - l_j)
/// with eigenvalues l sorted descending. -inf when b > 0 and two eigenvalues
/// are closer than 1e-12, or when Sigma is not positive definite.
double siw_log_density(const Eigen::MatrixXd& sigma, double nu0, double b, const Eigen::MatrixXd& lambda0);

/// Full multivariate normal log density.
double mvn_log_density(const Eigen::VectorXd& x, const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov);

}  // namespace cmcov
