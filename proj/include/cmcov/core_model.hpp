#pragma once

// Structured covariance model for Gaussian data whose mean is an eigenvector
// of the covariance with eigenvalue one:
//
//     Sigma(u, lambda) = P(u) diag(1, lambda) P(u)^T,   P(u) = [u | V(u)],
//
// where u = mu / |mu| and V(u) is built deterministically from u by a pivoted
// Gram-Schmidt pass over the canonical basis. Everything in this header is a
// pure function of its inputs.

#include <cstddef>

#include <Eigen/Core>

#include "cmcov/errors.hpp"

namespace cmcov {

/// Polar form of the mean, mu = c0 * u with |u| = 1 and c0 >= 0.
struct MeanState {
  Eigen::VectorXd u;
  double c0 = 0.0;

  /// Validates |u| = 1 (1e-12) and c0 >= 0.
  static MeanState make(Eigen::VectorXd u, double c0);
  /// Throws ZeroMean when |mu| < 1e-10.
  static MeanState from_mu(const Eigen::VectorXd& mu);

  [[nodiscard]] Eigen::VectorXd mu() const { return c0 * u; }
  [[nodiscard]] Eigen::Index dim() const { return u.size(); }
};

/// The p-1 free eigenvalues; the eigenvalue paired with u is fixed at one.
struct EigenSpectrum {
  Eigen::VectorXd lambda;

  static EigenSpectrum make(Eigen::VectorXd lambda);
  [[nodiscard]] Eigen::Index size() const { return lambda.size(); }
};

/// Orthogonal P = [u | V_1 ... V_{p-1}].
class OrthoBasis {
 public:
  OrthoBasis(Eigen::MatrixXd p, Eigen::Index pivot) : p_(std::move(p)), pivot_(pivot) {}

  [[nodiscard]] const Eigen::MatrixXd& matrix() const { return p_; }
  [[nodiscard]] Eigen::Index dim() const { return p_.rows(); }
  [[nodiscard]] auto u() const { return p_.col(0); }
  [[nodiscard]] auto v() const { return p_.rightCols(p_.cols() - 1); }
  /// V_i for i in [0, p-1).
  [[nodiscard]] auto v(Eigen::Index i) const { return p_.col(i + 1); }
  /// Index of the canonical vector left out of the Gram-Schmidt sweep.
  [[nodiscard]] Eigen::Index pivot() const { return pivot_; }

 private:
  Eigen::MatrixXd p_;
  Eigen::Index pivot_;
};

struct BasisOptions {
  // Accept any nonzero input and normalize it. When false, inputs further
  // than 1e-8 from unit length are rejected with NonUnit.
  bool renormalize = false;
};

/// Builds P(u). The dropped canonical vector is e_k with k = argmax |u_k|
/// (ties resolved towards the largest index, so e_p is dropped whenever
/// |u_p| is maximal). Modified Gram-Schmidt with one re-orthogonalization
/// pass; each V_i is flipped so its largest-magnitude entry is positive.
OrthoBasis build_orthobasis(const Eigen::VectorXd& u, BasisOptions options = {});

/// Sigma assembled as u u^T + sum_i lambda_i V_i V_i^T.
class StructuredCovariance {
 public:
  StructuredCovariance(OrthoBasis basis, EigenSpectrum spectrum, Eigen::MatrixXd sigma)
      : basis_(std::move(basis)), spectrum_(std::move(spectrum)), sigma_(std::move(sigma)) {}

  [[nodiscard]] const OrthoBasis& basis() const { return basis_; }
  [[nodiscard]] const EigenSpectrum& spectrum() const { return spectrum_; }
  [[nodiscard]] const Eigen::MatrixXd& matrix() const { return sigma_; }

  /// u u^T + sum_i V_i V_i^T / lambda_i.
  [[nodiscard]] Eigen::MatrixXd inverse() const;
  /// log det Sigma = sum_i log lambda_i.
  [[nodiscard]] double log_det() const;

 private:
  OrthoBasis basis_;
  EigenSpectrum spectrum_;
  Eigen::MatrixXd sigma_;
};

StructuredCovariance assemble_sigma(const OrthoBasis& basis, const EigenSpectrum& spectrum);

/// Observations (rows of X) with the statistics every estimator needs.
class SampleSet {
 public:
  /// Requires n >= 1, p >= 2 and finite entries. Estimators that need
  /// n >= 2 check it themselves.
  explicit SampleSet(Eigen::MatrixXd x);

  [[nodiscard]] const Eigen::MatrixXd& x() const { return x_; }
  [[nodiscard]] Eigen::Index n() const { return x_.rows(); }
  [[nodiscard]] Eigen::Index p() const { return x_.cols(); }
  [[nodiscard]] const Eigen::VectorXd& xbar() const { return xbar_; }
  /// A(0) = sum_j x_j x_j^T.
  [[nodiscard]] const Eigen::MatrixXd& a0() const { return a0_; }
  /// A(xbar), accumulated from centered rows.
  [[nodiscard]] const Eigen::MatrixXd& a_xbar() const { return a_xbar_; }
  /// Largest eigenvalue of A(0).
  [[nodiscard]] double a0_max_eigenvalue() const { return a0_max_eig_; }

 private:
  Eigen::MatrixXd x_;
  Eigen::VectorXd xbar_;
  Eigen::MatrixXd a0_;
  Eigen::MatrixXd a_xbar_;
  double a0_max_eig_ = 0.0;
};

/// Throws TooFewRows when the sample has fewer than two observations.
void require_two_rows(const SampleSet& data);

/// A(mu) = A(0) - n xbar mu^T - n mu xbar^T + n mu mu^T.
Eigen::MatrixXd scatter_matrix(const SampleSet& data, const Eigen::VectorXd& mu);

/// B = P(u)^T A(c0 u) P(u).
Eigen::MatrixXd b_matrix(const SampleSet& data, const MeanState& mean);
Eigen::MatrixXd b_matrix(const SampleSet& data, const MeanState& mean, const OrthoBasis& basis);

/// Closed-form diagonal of B: u^T A(xbar) u + n (c0 - u^T xbar)^2 followed by
/// V_i^T A(0) V_i.
Eigen::VectorXd b_diagonal(const SampleSet& data, const MeanState& mean, const OrthoBasis& basis);

/// Symmetric x^T M x evaluated without forming M x twice.
double quadratic_form(const Eigen::MatrixXd& m, const Eigen::Ref<const Eigen::VectorXd>& x);

}  // namespace cmcov
