#pragma once

// Monte Carlo risk study: constrained truth generation, data sampling,
// estimator execution on shared data and scaled Frobenius risk.

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "cmcov/bayes_gibbs.hpp"
#include "cmcov/bayes_map.hpp"
#include "cmcov/core_model.hpp"
#include "cmcov/niw.hpp"
#include "cmcov/random.hpp"

namespace cmcov {

enum class EstimatorKind { Mle, MapNewton, MapGibbs, Niw };

std::string_view estimator_name(EstimatorKind kind);
/// Accepts "mle", "map-newton", "map-gibbs", "niw".
EstimatorKind parse_estimator(std::string_view name);

/// How an unconstrained (mu, Psi) is turned into a covariance with Sigma mu = mu.
enum class TruthProjection {
  // Sigma = u u^T + Q Psi Q with Q = I - u u^T: the Frobenius-nearest
  // symmetric matrix having u as an eigenvector with eigenvalue one.
  Orthogonal,
  // Sigma = u u^T + sum_i (V_i^T Psi V_i) V_i V_i^T with V = V(u): keeps only
  // the diagonal of Psi in the model's own eigenbasis.
  Spectral,
};

std::string_view projection_name(TruthProjection projection);
TruthProjection parse_projection(std::string_view name);

struct TruthSpec {
  Eigen::VectorXd mu_true;
  Eigen::MatrixXd sigma_true;
  Eigen::MatrixXd psi;
  std::uint64_t seed = 0;
};

/// mu ~ N(0, I); Psi = L L^T with L_ii ~ N(5, 1) and L_ij ~ N(0, 1) otherwise;
/// then projected onto the constraint set. With `unit_determinant` the block
/// orthogonal to mu is rescaled so that det Sigma = 1.
TruthSpec generate_truth(Eigen::Index p, std::uint64_t seed,
                         TruthProjection projection = TruthProjection::Orthogonal,
                         bool unit_determinant = false);

/// n draws from N(mu_true, sigma_true) through a Cholesky factor.
SampleSet sample_data(const TruthSpec& truth, Eigen::Index n, Rng& rng);

struct Estimate {
  Eigen::VectorXd mean;
  Eigen::MatrixXd covariance;
  std::optional<double> acceptance_rate;
};

struct RiskPair {
  double mean_risk = 0.0;
  double sigma_risk = 0.0;
};

/// (1/p) |mean - mu|^2 and (1/p) |Sigma_hat - Sigma|_F^2 for one estimate.
RiskPair frobenius_loss(const Estimate& estimate, const TruthSpec& truth);
/// Average of frobenius_loss over the list. EmptyList when empty.
RiskPair frobenius_risk(const std::vector<Estimate>& estimates, const TruthSpec& truth);

enum class Mu0Mode { SampleMean, Zero };

struct EstimatorSettings {
  std::optional<double> kappa0;    // default 1.5
  std::optional<double> a;         // default p + 1
  std::optional<double> h0_scalar; // default 1 (H0 = diag(1, h, ..., h))
  Mu0Mode mu0_mode = Mu0Mode::SampleMean;
  GibbsConfig gibbs;
  NewtonConfig newton;
};

PriorConfig make_prior(const SampleSet& data, const EstimatorSettings& settings);
NiwPrior make_niw_prior(const SampleSet& data, const EstimatorSettings& settings);

Estimate run_estimator(EstimatorKind kind, const SampleSet& data, const EstimatorSettings& settings, Rng& rng);

struct RiskReport {
  Eigen::Index n = 0;
  Eigen::Index p = 0;
  std::string estimator;
  double mean_risk = 0.0;
  double sigma_risk = 0.0;
  std::size_t replications = 0;
  std::size_t failures = 0;
  double elapsed_seconds = 0.0;
  std::optional<double> acceptance_rate;
  std::optional<double> ratio_vs_niw_mean;
  std::optional<double> ratio_vs_niw_sigma;
};

struct ExperimentConfig {
  std::vector<std::pair<Eigen::Index, Eigen::Index>> grid;  // (n, p)
  std::vector<EstimatorKind> estimators;
  std::size_t reps = 100;
  std::uint64_t seed = 1;
  // 0 picks std::thread::hardware_concurrency().
  std::size_t threads = 0;
  bool fix_truth_per_cell = false;
  // The Gibbs estimator is skipped for p > 5 unless set.
  bool gibbs_all_p = false;
  TruthProjection projection = TruthProjection::Orthogonal;
  bool unit_determinant = false;
  EstimatorSettings settings;
};

/// One report per (cell, estimator) in grid order, then estimator order.
/// Results depend only on the configuration, not on thread scheduling or the
/// order of `estimators`.
std::vector<RiskReport> run_experiment(const ExperimentConfig& config);

/// Aligned plain-text table.
std::string format_risk_table(const std::vector<RiskReport>& reports);

}  // namespace cmcov
