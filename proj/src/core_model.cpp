#include "cmcov/core_model.hpp"

#include <cmath>
#include <string>

#include <Eigen/Eigenvalues>

namespace cmcov {

std::string_view category_name(ErrorCategory category) noexcept {
  switch (category) {
    case ErrorCategory::ZeroVector: return "ZeroVector";
    case ErrorCategory::NonUnit: return "NonUnit";
    case ErrorCategory::DimensionMismatch: return "DimensionMismatch";
    case ErrorCategory::NonPositiveEigenvalue: return "NonPositiveEigenvalue";
    case ErrorCategory::DegenerateData: return "DegenerateData";
    case ErrorCategory::TooFewRows: return "TooFewRows";
    case ErrorCategory::ZeroMean: return "ZeroMean";
    case ErrorCategory::EmptyChain: return "EmptyChain";
    case ErrorCategory::EmptyList: return "EmptyList";
    case ErrorCategory::InvalidArgument: return "InvalidArgument";
    case ErrorCategory::ParseError: return "ParseError";
    case ErrorCategory::RangeError: return "RangeError";
    case ErrorCategory::IoError: return "IoError";
    case ErrorCategory::NonConvergence: return "NonConvergence";
  }
  return "Unknown";
}

namespace {

constexpr double kUnitTolerance = 1e-12;
constexpr double kZeroTolerance = 1e-8;

void check_dims(Eigen::Index got, Eigen::Index want, const char* what) {
  if (got != want) {
    throw Error(ErrorCategory::DimensionMismatch,
                std::string(what) + ": expected length " + std::to_string(want) + ", got " +
                    std::to_string(got));
  }
}

// Copies the lower triangle onto the upper one.
void mirror_lower(Eigen::MatrixXd& m) {
  for (Eigen::Index c = 1; c < m.cols(); ++c) {
    for (Eigen::Index r = 0; r < c; ++r) m(r, c) = m(c, r);
  }
}

}  // namespace

MeanState MeanState::make(Eigen::VectorXd u, double c0) {
  const double norm = u.norm();
  if (norm < kZeroTolerance) throw Error(ErrorCategory::ZeroVector, "mean direction is zero");
  if (std::abs(norm - 1.0) > kUnitTolerance) {
    throw Error(ErrorCategory::NonUnit, "mean direction is not unit length");
  }
  if (!(c0 >= 0.0)) throw Error(ErrorCategory::InvalidArgument, "c0 must be nonnegative");
  return MeanState{std::move(u), c0};
}

MeanState MeanState::from_mu(const Eigen::VectorXd& mu) {
  const double norm = mu.norm();
  if (!(norm >= 1e-10)) throw Error(ErrorCategory::ZeroMean, "mean vector is (numerically) zero");
  return MeanState{mu / norm, norm};
}

EigenSpectrum EigenSpectrum::make(Eigen::VectorXd lambda) {
  for (Eigen::Index i = 0; i < lambda.size(); ++i) {
    if (!(lambda[i] > 0.0) || !std::isfinite(lambda[i])) {
      throw Error(ErrorCategory::NonPositiveEigenvalue,
                  "eigenvalue " + std::to_string(i) + " is not strictly positive");
    }
  }
  return EigenSpectrum{std::move(lambda)};
}

OrthoBasis build_orthobasis(const Eigen::VectorXd& u_in, BasisOptions options) {
  const Eigen::Index p = u_in.size();
  if (p < 2) throw Error(ErrorCategory::DimensionMismatch, "basis needs dimension >= 2");
  const double norm = u_in.norm();
  if (!(norm >= kZeroTolerance)) throw Error(ErrorCategory::ZeroVector, "mean direction is zero");
  if (std::abs(norm - 1.0) >= kZeroTolerance && !options.renormalize) {
    throw Error(ErrorCategory::NonUnit, "mean direction is not unit length");
  }
  Eigen::VectorXd u = u_in;
  if (std::abs(norm - 1.0) > kUnitTolerance) u /= norm;

  Eigen::Index pivot = 0;
  for (Eigen::Index i = 1; i < p; ++i) {
    if (std::abs(u[i]) >= std::abs(u[pivot])) pivot = i;
  }

  Eigen::MatrixXd basis(p, p);
  basis.col(0) = u;
  Eigen::Index filled = 1;
  for (Eigen::Index k = 0; k < p; ++k) {
    if (k == pivot) continue;
    Eigen::VectorXd v = Eigen::VectorXd::Unit(p, k);
    for (int pass = 0; pass < 2; ++pass) {
      for (Eigen::Index j = 0; j < filled; ++j) v -= basis.col(j).dot(v) * basis.col(j);
    }
    v.normalize();

    // Sign: largest-magnitude entry positive; near-ties go to the first index.
    const double biggest = v.cwiseAbs().maxCoeff();
    Eigen::Index lead = 0;
    while (std::abs(v[lead]) < biggest * (1.0 - 1e-12)) ++lead;
    if (v[lead] < 0.0) v = -v;
    basis.col(filled++) = v;
  }
  return OrthoBasis(std::move(basis), pivot);
}

StructuredCovariance assemble_sigma(const OrthoBasis& basis, const EigenSpectrum& spectrum) {
  const Eigen::Index p = basis.dim();
  check_dims(spectrum.size(), p - 1, "spectrum");
  EigenSpectrum checked = EigenSpectrum::make(spectrum.lambda);

  const Eigen::MatrixXd& pm = basis.matrix();
  Eigen::MatrixXd sigma(p, p);
  for (Eigen::Index c = 0; c < p; ++c) {
    for (Eigen::Index r = c; r < p; ++r) {
      double s = pm(r, 0) * pm(c, 0);
      for (Eigen::Index i = 1; i < p; ++i) s += checked.lambda[i - 1] * (pm(r, i) * pm(c, i));
      sigma(r, c) = s;
    }
  }
  mirror_lower(sigma);
  return StructuredCovariance(basis, std::move(checked), std::move(sigma));
}

Eigen::MatrixXd StructuredCovariance::inverse() const {
  const Eigen::MatrixXd& pm = basis_.matrix();
  const Eigen::Index p = pm.rows();
  Eigen::MatrixXd inv(p, p);
  for (Eigen::Index c = 0; c < p; ++c) {
    for (Eigen::Index r = c; r < p; ++r) {
      double s = pm(r, 0) * pm(c, 0);
      for (Eigen::Index i = 1; i < p; ++i) s += (pm(r, i) * pm(c, i)) / spectrum_.lambda[i - 1];
      inv(r, c) = s;
    }
  }
  mirror_lower(inv);
  return inv;
}

double StructuredCovariance::log_det() const { return spectrum_.lambda.array().log().sum(); }

SampleSet::SampleSet(Eigen::MatrixXd x) : x_(std::move(x)) {
  if (x_.rows() < 1) throw Error(ErrorCategory::TooFewRows, "sample has no observations");
  if (x_.cols() < 2) throw Error(ErrorCategory::DimensionMismatch, "dimension must be >= 2");
  if (!x_.allFinite()) throw Error(ErrorCategory::InvalidArgument, "sample contains non-finite values");

  const auto n = static_cast<double>(x_.rows());
  xbar_ = x_.colwise().sum().transpose() / n;

  a0_ = x_.transpose() * x_;
  // Force exact symmetry; Eigen's product does not guarantee it.
  for (Eigen::Index c = 1; c < a0_.cols(); ++c) {
    for (Eigen::Index r = 0; r < c; ++r) a0_(c, r) = a0_(r, c) = 0.5 * (a0_(r, c) + a0_(c, r));
  }
  const Eigen::MatrixXd centered = x_.rowwise() - xbar_.transpose();
  a_xbar_ = centered.transpose() * centered;
  for (Eigen::Index c = 1; c < a_xbar_.cols(); ++c) {
    for (Eigen::Index r = 0; r < c; ++r) {
      a_xbar_(c, r) = a_xbar_(r, c) = 0.5 * (a_xbar_(r, c) + a_xbar_(c, r));
    }
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(a0_, Eigen::EigenvaluesOnly);
  a0_max_eig_ = eig.eigenvalues()[a0_.rows() - 1];
}

void require_two_rows(const SampleSet& data) {
  if (data.n() < 2) throw Error(ErrorCategory::TooFewRows, "at least two observations are required");
}

double quadratic_form(const Eigen::MatrixXd& m, const Eigen::Ref<const Eigen::VectorXd>& x) {
  return x.dot(m * x);
}

Eigen::MatrixXd scatter_matrix(const SampleSet& data, const Eigen::VectorXd& mu) {
  check_dims(mu.size(), data.p(), "mu");
  const auto n = static_cast<double>(data.n());
  const Eigen::VectorXd& xb = data.xbar();
  const Eigen::Index p = data.p();
  Eigen::MatrixXd a(p, p);
  for (Eigen::Index c = 0; c < p; ++c) {
    for (Eigen::Index r = c; r < p; ++r) {
      a(r, c) = data.a0()(r, c) - n * (xb[r] * mu[c] + mu[r] * xb[c]) + n * (mu[r] * mu[c]);
    }
  }
  mirror_lower(a);
  return a;
}

Eigen::MatrixXd b_matrix(const SampleSet& data, const MeanState& mean, const OrthoBasis& basis) {
  check_dims(mean.dim(), data.p(), "mean direction");
  check_dims(basis.dim(), data.p(), "basis");
  const Eigen::MatrixXd& pm = basis.matrix();
  Eigen::MatrixXd b = pm.transpose() * scatter_matrix(data, mean.mu()) * pm;
  return 0.5 * (b + b.transpose());
}

Eigen::MatrixXd b_matrix(const SampleSet& data, const MeanState& mean) {
  check_dims(mean.dim(), data.p(), "mean direction");
  return b_matrix(data, mean, build_orthobasis(mean.u));
}

Eigen::VectorXd b_diagonal(const SampleSet& data, const MeanState& mean, const OrthoBasis& basis) {
  check_dims(mean.dim(), data.p(), "mean direction");
  const Eigen::Index p = data.p();
  const auto n = static_cast<double>(data.n());
  Eigen::VectorXd d(p);
  const double shift = mean.c0 - basis.u().dot(data.xbar());
  d[0] = quadratic_form(data.a_xbar(), basis.u()) + n * shift * shift;
  for (Eigen::Index i = 0; i + 1 < p; ++i) d[i + 1] = quadratic_form(data.a0(), basis.v(i));
  return d;
}

}  // namespace cmcov
