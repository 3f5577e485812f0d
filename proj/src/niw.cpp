#include "cmcov/niw.hpp"

#include <cmath>
#include <limits>
#include <numbers>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

namespace cmcov {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

}  // namespace

NiwPrior NiwPrior::defaults(const SampleSet& data) {
  const Eigen::Index p = data.p();
  return NiwPrior{data.xbar(), 1.5, static_cast<double>(p) + 1.0, Eigen::MatrixXd::Identity(p, p)};
}

NiwParams niw_posterior(const SampleSet& data, const Eigen::VectorXd& mu0, double kappa0, double nu0,
                        const Eigen::MatrixXd& lambda0) {
  const Eigen::Index p = data.p();
  if (mu0.size() != p || lambda0.rows() != p || lambda0.cols() != p) {
    throw Error(ErrorCategory::DimensionMismatch, "NIW prior dimension does not match data");
  }
  if (!(kappa0 > 0.0)) throw Error(ErrorCategory::InvalidArgument, "kappa0 must be positive");
  Eigen::LLT<Eigen::MatrixXd> llt(lambda0);
  if (llt.info() != Eigen::Success) {
    throw Error(ErrorCategory::InvalidArgument, "Lambda0 must be positive definite");
  }

  const auto n = static_cast<double>(data.n());
  NiwParams params;
  params.kappa_n = kappa0 + n;
  params.nu_n = nu0 + n;
  params.mu_n = (kappa0 * mu0 + n * data.xbar()) / params.kappa_n;
  const Eigen::VectorXd d = data.xbar() - mu0;
  params.lambda_n = lambda0 + data.a_xbar() + (n * kappa0 / params.kappa_n) * d * d.transpose();
  params.lambda_n = 0.5 * (params.lambda_n + params.lambda_n.transpose());
  return params;
}

NiwParams niw_posterior(const SampleSet& data, const NiwPrior& prior) {
  return niw_posterior(data, prior.mu0, prior.kappa0, prior.nu0, prior.lambda0);
}

NiwEstimate niw_map(const NiwParams& params, Eigen::Index p) {
  const double denom = params.nu_n + static_cast<double>(p) + 2.0;
  if (!(denom > 0.0)) throw Error(ErrorCategory::InvalidArgument, "nu_n + p + 2 must be positive");
  return NiwEstimate{params.mu_n, params.lambda_n / denom};
}

double niw_log_posterior(const NiwParams& params, const Eigen::VectorXd& mu, const Eigen::MatrixXd& sigma) {
  Eigen::LLT<Eigen::MatrixXd> llt(sigma);
  if (llt.info() != Eigen::Success) return kNegInf;
  const auto p = static_cast<double>(sigma.rows());
  const Eigen::MatrixXd l = llt.matrixL();
  const double log_det = 2.0 * l.diagonal().array().log().sum();
  const Eigen::MatrixXd inv_lambda = llt.solve(params.lambda_n);
  const Eigen::VectorXd d = mu - params.mu_n;
  const double quad = d.dot(llt.solve(d));
  return -(0.5 * (params.nu_n + p) + 1.0) * log_det - 0.5 * (inv_lambda.trace() + params.kappa_n * quad);
}

double siw_log_density(const Eigen::MatrixXd& sigma, double nu0, double b, const Eigen::MatrixXd& lambda0) {
  if (b < 0.0 || b > 1.0) throw Error(ErrorCategory::InvalidArgument, "shrinkage exponent b must lie in [0, 1]");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sigma);
  const Eigen::VectorXd ascending = eig.eigenvalues();
  if (!(ascending[0] > 0.0)) return kNegInf;

  const Eigen::Index p = sigma.rows();
  const Eigen::VectorXd values = ascending.reverse();
  double gap_term = 0.0;
  if (b > 0.0) {
    for (Eigen::Index i = 0; i < p; ++i) {
      for (Eigen::Index j = i + 1; j < p; ++j) {
        const double gap = values[i] - values[j];
        if (gap < 1e-12) return kNegInf;
        gap_term += std::log(gap);
      }
    }
  }
  const double log_det = ascending.array().log().sum();
  Eigen::LLT<Eigen::MatrixXd> llt(sigma);
  const double trace = llt.solve(lambda0).trace();
  return -0.5 * (nu0 + static_cast<double>(p) + 1.0) * log_det - 0.5 * trace - b * gap_term;
}

double mvn_log_density(const Eigen::VectorXd& x, const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov) {
  Eigen::LLT<Eigen::MatrixXd> llt(cov);
  if (llt.info() != Eigen::Success) return kNegInf;
  const Eigen::MatrixXd l = llt.matrixL();
  const double log_det = 2.0 * l.diagonal().array().log().sum();
  const Eigen::VectorXd d = x - mean;
  const auto p = static_cast<double>(x.size());
  return -0.5 * (d.dot(llt.solve(d)) + log_det + p * std::log(2.0 * std::numbers::pi));
}

}  // namespace cmcov
