#include "cmcov/mle.hpp"

#include <cmath>
#include <string>

#include <Eigen/Eigenvalues>

namespace cmcov {

namespace {

constexpr double kDegenerateQuadratic = 1e-12;
constexpr double kRankTolerance = 1e-12;
constexpr double kRepeatedTolerance = 1e-9;

Eigen::VectorXd unit_or_throw(const SampleSet& data, const Eigen::VectorXd& u) {
  if (u.size() != data.p()) {
    throw Error(ErrorCategory::DimensionMismatch, "direction length does not match data dimension");
  }
  // Reuses the basis checks for zero and non-unit input.
  return build_orthobasis(u).u();
}

}  // namespace

double estimate_c0(const SampleSet& data, const Eigen::VectorXd& u) {
  return unit_or_throw(data, u).dot(data.xbar());
}

double estimate_c0_general(const SampleSet& data, const Eigen::VectorXd& u,
                           const EigenSpectrum& spectrum) {
  const OrthoBasis basis = build_orthobasis(unit_or_throw(data, u));
  const StructuredCovariance sigma = assemble_sigma(basis, spectrum);
  const Eigen::MatrixXd inv = sigma.inverse();
  const Eigen::VectorXd w = inv * basis.u();
  return w.dot(data.xbar()) / w.dot(basis.u());
}

EigenSpectrum estimate_lambdas(const SampleSet& data, const OrthoBasis& basis) {
  require_two_rows(data);
  if (basis.dim() != data.p()) {
    throw Error(ErrorCategory::DimensionMismatch, "basis dimension does not match data");
  }
  const auto n = static_cast<double>(data.n());
  Eigen::VectorXd lambda(data.p() - 1);
  for (Eigen::Index i = 0; i < lambda.size(); ++i) {
    const double q = quadratic_form(data.a0(), basis.v(i));
    if (!(q >= kDegenerateQuadratic)) {
      throw Error(ErrorCategory::DegenerateData,
                  "data has no spread along basis direction " + std::to_string(i + 1));
    }
    lambda[i] = q / n;
  }
  return EigenSpectrum{std::move(lambda)};
}

EigenSpectrum estimate_lambdas(const SampleSet& data, const MeanState& mean) {
  return estimate_lambdas(data, build_orthobasis(mean.u));
}

double profile_loglik(const SampleSet& data, const Eigen::VectorXd& u) {
  const OrthoBasis basis = build_orthobasis(unit_or_throw(data, u));
  const EigenSpectrum spectrum = estimate_lambdas(data, basis);
  const auto n = static_cast<double>(data.n());
  const auto p = static_cast<double>(data.p());
  return -0.5 * n * spectrum.lambda.array().log().sum() -
         0.5 * (quadratic_form(data.a_xbar(), basis.u()) + n * (p - 1.0));
}

double lower_bound_h(const SampleSet& data, const Eigen::VectorXd& u) {
  const Eigen::VectorXd unit = unit_or_throw(data, u);
  const auto n = static_cast<double>(data.n());
  const auto p = static_cast<double>(data.p());
  return -0.5 * n * (p - 1.0) * std::log(data.a0_max_eigenvalue() / n) -
         0.5 * (quadratic_form(data.a_xbar(), unit) + n * (p - 1.0));
}

StructuredCovariance MleFit::covariance() const {
  return assemble_sigma(build_orthobasis(mean.u), spectrum);
}

MleFit fit_mle(const SampleSet& data) {
  require_two_rows(data);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(data.a_xbar());
  if (eig.info() != Eigen::Success) {
    throw Error(ErrorCategory::DegenerateData, "eigendecomposition of A(xbar) failed");
  }
  const Eigen::VectorXd& values = eig.eigenvalues();
  const double trace = data.a_xbar().trace();
  if (!(trace > 0.0) || values[0] <= kRankTolerance * trace) {
    throw Error(ErrorCategory::DegenerateData, "centered scatter matrix A(xbar) is rank deficient");
  }

  MleFit fit{MeanState{}, EigenSpectrum{}};
  fit.smallest_eig_of_a_xbar = values[0];
  fit.degenerate_direction = values[1] - values[0] <= kRepeatedTolerance * trace;

  Eigen::VectorXd u = eig.eigenvectors().col(0);
  u.normalize();
  double c0 = u.dot(data.xbar());
  if (c0 < 0.0) {
    u = -u;
    c0 = -c0;
  }
  fit.zero_mean = c0 == 0.0;
  fit.mean = MeanState{u, c0};

  const OrthoBasis basis = build_orthobasis(u);
  fit.spectrum = estimate_lambdas(data, basis);
  fit.profile_loglik_at_fit = profile_loglik(data, u);
  fit.lower_bound_at_fit = lower_bound_h(data, u);
  return fit;
}

}  // namespace cmcov
