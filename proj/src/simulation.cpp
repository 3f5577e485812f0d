#include "cmcov/simulation.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <sstream>
#include <thread>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include "cmcov/mle.hpp"

namespace cmcov {

namespace {

constexpr std::uint64_t kTruthStream = 1;
constexpr std::uint64_t kDataStream = 2;
constexpr std::uint64_t kEstimatorStream = 16;

}  // namespace

std::string_view estimator_name(EstimatorKind kind) {
  switch (kind) {
    case EstimatorKind::Mle: return "mle";
    case EstimatorKind::MapNewton: return "map-newton";
    case EstimatorKind::MapGibbs: return "map-gibbs";
    case EstimatorKind::Niw: return "niw";
  }
  return "unknown";
}

EstimatorKind parse_estimator(std::string_view name) {
  for (EstimatorKind kind : {EstimatorKind::Mle, EstimatorKind::MapNewton, EstimatorKind::MapGibbs,
                             EstimatorKind::Niw}) {
    if (estimator_name(kind) == name) return kind;
  }
  throw Error(ErrorCategory::ParseError, "unknown estimator '" + std::string(name) + "'");
}

std::string_view projection_name(TruthProjection projection) {
  return projection == TruthProjection::Orthogonal ? "orthogonal" : "spectral";
}

TruthProjection parse_projection(std::string_view name) {
  if (name == "orthogonal") return TruthProjection::Orthogonal;
  if (name == "spectral") return TruthProjection::Spectral;
  throw Error(ErrorCategory::ParseError, "unknown projection '" + std::string(name) + "'");
}

TruthSpec generate_truth(Eigen::Index p, std::uint64_t seed, TruthProjection projection, bool unit_determinant) {
  if (p < 2) throw Error(ErrorCategory::InvalidArgument, "dimension must be >= 2");
  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);

  TruthSpec truth;
  truth.seed = seed;
  truth.mu_true = standard_normal_vector(p, rng);
  Eigen::MatrixXd l(p, p);
  for (Eigen::Index i = 0; i < p; ++i) {
    for (Eigen::Index j = 0; j < p; ++j) l(i, j) = normal(rng) + (i == j ? 5.0 : 0.0);
  }
  truth.psi = l * l.transpose();
  truth.psi = 0.5 * (truth.psi + truth.psi.transpose());

  const MeanState mean = MeanState::from_mu(truth.mu_true);
  if (projection == TruthProjection::Spectral) {
    const OrthoBasis basis = build_orthobasis(mean.u);
    Eigen::VectorXd lambda(p - 1);
    for (Eigen::Index i = 0; i < p - 1; ++i) lambda[i] = quadratic_form(truth.psi, basis.v(i));
    truth.sigma_true = assemble_sigma(basis, EigenSpectrum::make(lambda)).matrix();
  } else {
    const Eigen::MatrixXd q = Eigen::MatrixXd::Identity(p, p) - mean.u * mean.u.transpose();
    truth.sigma_true = mean.u * mean.u.transpose() + q * truth.psi * q;
    truth.sigma_true = 0.5 * (truth.sigma_true + truth.sigma_true.transpose());
  }

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(truth.sigma_true, Eigen::EigenvaluesOnly);
  if (!(eig.eigenvalues()[0] > 0.0)) {
    throw Error(ErrorCategory::DegenerateData, "generated covariance is not positive definite");
  }
  if (unit_determinant) {
    // det Sigma is the determinant of the block orthogonal to u.
    const double log_det = eig.eigenvalues().array().log().sum();
    const double scale = std::exp(-log_det / static_cast<double>(p - 1));
    const Eigen::MatrixXd uu = mean.u * mean.u.transpose();
    truth.sigma_true = uu + scale * (truth.sigma_true - uu);
  }
  return truth;
}

SampleSet sample_data(const TruthSpec& truth, Eigen::Index n, Rng& rng) {
  if (n < 2) throw Error(ErrorCategory::TooFewRows, "sample size must be >= 2");
  Eigen::LLT<Eigen::MatrixXd> llt(truth.sigma_true);
  if (llt.info() != Eigen::Success) {
    throw Error(ErrorCategory::DegenerateData, "true covariance has no Cholesky factor");
  }
  const Eigen::MatrixXd chol = llt.matrixL();
  const Eigen::Index p = truth.mu_true.size();
  Eigen::MatrixXd x(n, p);
  for (Eigen::Index j = 0; j < n; ++j) {
    x.row(j) = (truth.mu_true + chol * standard_normal_vector(p, rng)).transpose();
  }
  return SampleSet(std::move(x));
}

RiskPair frobenius_loss(const Estimate& estimate, const TruthSpec& truth) {
  const auto p = static_cast<double>(truth.mu_true.size());
  return RiskPair{(estimate.mean - truth.mu_true).squaredNorm() / p,
                  (estimate.covariance - truth.sigma_true).squaredNorm() / p};
}

RiskPair frobenius_risk(const std::vector<Estimate>& estimates, const TruthSpec& truth) {
  if (estimates.empty()) throw Error(ErrorCategory::EmptyList, "no estimates to average");
  RiskPair total;
  for (const Estimate& e : estimates) {
    const RiskPair loss = frobenius_loss(e, truth);
    total.mean_risk += loss.mean_risk;
    total.sigma_risk += loss.sigma_risk;
  }
  const auto count = static_cast<double>(estimates.size());
  return RiskPair{total.mean_risk / count, total.sigma_risk / count};
}

PriorConfig make_prior(const SampleSet& data, const EstimatorSettings& settings) {
  PriorConfig prior = PriorConfig::defaults(data);
  if (settings.kappa0) prior.kappa0 = *settings.kappa0;
  if (settings.a) prior.a = *settings.a;
  if (settings.h0_scalar) prior.h0_diag.tail(data.p() - 1).setConstant(*settings.h0_scalar);
  if (settings.mu0_mode == Mu0Mode::Zero) prior.mu0.setZero();
  return prior;
}

NiwPrior make_niw_prior(const SampleSet& data, const EstimatorSettings& settings) {
  NiwPrior prior = NiwPrior::defaults(data);
  if (settings.kappa0) prior.kappa0 = *settings.kappa0;
  if (settings.mu0_mode == Mu0Mode::Zero) prior.mu0.setZero();
  return prior;
}

Estimate run_estimator(EstimatorKind kind, const SampleSet& data, const EstimatorSettings& settings, Rng& rng) {
  switch (kind) {
    case EstimatorKind::Mle: {
      const MleFit fit = fit_mle(data);
      return Estimate{fit.mean.mu(), fit.covariance().matrix(), std::nullopt};
    }
    case EstimatorKind::MapNewton: {
      const MapFit fit = fit_map_newton(data, make_prior(data, settings), settings.newton);
      return Estimate{fit.mean.mu(), fit.covariance().matrix(), std::nullopt};
    }
    case EstimatorKind::MapGibbs: {
      const PriorConfig prior = make_prior(data, settings);
      const GibbsRun run = run_gibbs(data, prior, settings.gibbs, rng);
      const GibbsMap map = map_from_chain(run.chain, data, prior);
      const StructuredCovariance sigma = assemble_sigma(build_orthobasis(map.mean.u), map.spectrum);
      return Estimate{map.mean.mu(), sigma.matrix(), run.acceptance_rate()};
    }
    case EstimatorKind::Niw: {
      const NiwEstimate est = niw_map(niw_posterior(data, make_niw_prior(data, settings)), data.p());
      return Estimate{est.mean, est.covariance, std::nullopt};
    }
  }
  throw Error(ErrorCategory::InvalidArgument, "unknown estimator");
}

namespace {

struct Outcome {
  bool ok = false;
  RiskPair loss;
  double seconds = 0.0;
  std::optional<double> acceptance;
};

bool runs_in_cell(EstimatorKind kind, Eigen::Index p, const ExperimentConfig& config) {
  return kind != EstimatorKind::MapGibbs || p <= 5 || config.gibbs_all_p;
}

}  // namespace

std::vector<RiskReport> run_experiment(const ExperimentConfig& config) {
  if (config.reps < 1) throw Error(ErrorCategory::InvalidArgument, "reps must be >= 1");
  if (config.grid.empty()) throw Error(ErrorCategory::InvalidArgument, "grid is empty");
  if (config.estimators.empty()) throw Error(ErrorCategory::InvalidArgument, "no estimators selected");
  for (const auto& [n, p] : config.grid) {
    if (n < 2 || p < 2) throw Error(ErrorCategory::InvalidArgument, "grid cells need n >= 2 and p >= 2");
  }

  // Outcomes indexed [cell][rep][estimator position].
  const std::size_t cells = config.grid.size();
  const std::size_t kinds = config.estimators.size();
  std::vector<Outcome> outcomes(cells * config.reps * kinds);
  const std::size_t tasks = cells * config.reps;

  auto run_task = [&](std::size_t task) {
    const std::size_t cell = task / config.reps;
    const std::size_t rep = task % config.reps;
    const auto [n, p] = config.grid[cell];
    const std::uint64_t truth_rep = config.fix_truth_per_cell ? 0 : rep;

    Outcome* row = &outcomes[task * kinds];
    TruthSpec truth;
    std::optional<SampleSet> data;
    try {
      truth = generate_truth(p, derive_seed(config.seed, cell, truth_rep, kTruthStream), config.projection,
                             config.unit_determinant);
      Rng data_rng(derive_seed(config.seed, cell, rep, kDataStream));
      data.emplace(sample_data(truth, n, data_rng));
    } catch (const Error&) {
      return;  // every estimator counts as failed for this replication
    }

    for (std::size_t e = 0; e < kinds; ++e) {
      const EstimatorKind kind = config.estimators[e];
      if (!runs_in_cell(kind, p, config)) continue;
      Rng rng(derive_seed(config.seed, cell, rep, kEstimatorStream + static_cast<std::uint64_t>(kind)));
      const auto start = std::chrono::steady_clock::now();
      try {
        const Estimate estimate = run_estimator(kind, *data, config.settings, rng);
        row[e].loss = frobenius_loss(estimate, truth);
        row[e].acceptance = estimate.acceptance_rate;
        row[e].ok = std::isfinite(row[e].loss.mean_risk) && std::isfinite(row[e].loss.sigma_risk);
      } catch (const Error&) {
        row[e].ok = false;
      }
      row[e].seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    }
  };

  std::size_t threads = config.threads;
  if (threads == 0) threads = std::max(1U, std::thread::hardware_concurrency());
  threads = std::min(threads, tasks);
  if (threads <= 1) {
    for (std::size_t task = 0; task < tasks; ++task) run_task(task);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> workers;
    workers.reserve(threads);
    for (std::size_t w = 0; w < threads; ++w) {
      workers.emplace_back([&] {
        for (std::size_t task = next++; task < tasks; task = next++) run_task(task);
      });
    }
    for (std::thread& worker : workers) worker.join();
  }

  std::vector<RiskReport> reports;
  for (std::size_t cell = 0; cell < cells; ++cell) {
    const auto [n, p] = config.grid[cell];
    const std::size_t first = reports.size();
    std::optional<std::size_t> niw_row;
    for (std::size_t e = 0; e < kinds; ++e) {
      const EstimatorKind kind = config.estimators[e];
      if (!runs_in_cell(kind, p, config)) continue;
      RiskReport report;
      report.n = n;
      report.p = p;
      report.estimator = std::string(estimator_name(kind));
      double acceptance_sum = 0.0;
      std::size_t acceptance_count = 0;
      for (std::size_t rep = 0; rep < config.reps; ++rep) {
        const Outcome& o = outcomes[(cell * config.reps + rep) * kinds + e];
        report.elapsed_seconds += o.seconds;
        if (!o.ok) {
          ++report.failures;
          continue;
        }
        ++report.replications;
        report.mean_risk += o.loss.mean_risk;
        report.sigma_risk += o.loss.sigma_risk;
        if (o.acceptance) {
          acceptance_sum += *o.acceptance;
          ++acceptance_count;
        }
      }
      if (report.replications > 0) {
        report.mean_risk /= static_cast<double>(report.replications);
        report.sigma_risk /= static_cast<double>(report.replications);
      }
      if (acceptance_count > 0) report.acceptance_rate = acceptance_sum / static_cast<double>(acceptance_count);
      if (kind == EstimatorKind::Niw) niw_row = reports.size();
      reports.push_back(std::move(report));
    }
    if (niw_row && reports[*niw_row].replications > 0) {
      const RiskReport niw = reports[*niw_row];
      for (std::size_t r = first; r < reports.size(); ++r) {
        if (reports[r].replications == 0) continue;
        reports[r].ratio_vs_niw_mean = reports[r].mean_risk / niw.mean_risk;
        reports[r].ratio_vs_niw_sigma = reports[r].sigma_risk / niw.sigma_risk;
      }
    }
  }
  return reports;
}

std::string format_risk_table(const std::vector<RiskReport>& reports) {
  std::ostringstream out;
  char line[256];
  std::snprintf(line, sizeof line, "%6s %4s  %-11s %12s %12s %10s %10s %8s %6s %6s %10s\n", "n", "p",
                "estimator", "mean_risk", "sigma_risk", "ratio_mu", "ratio_sig", "acc", "reps", "fail",
                "time_s");
  out << line;
  auto opt = [](const std::optional<double>& v, char* buf, std::size_t size, const char* fmt) {
    if (v) {
      std::snprintf(buf, size, fmt, *v);
    } else {
      std::snprintf(buf, size, "-");
    }
  };
  for (const RiskReport& r : reports) {
    char mu_ratio[32], sig_ratio[32], acc[32];
    opt(r.ratio_vs_niw_mean, mu_ratio, sizeof mu_ratio, "%.4f");
    opt(r.ratio_vs_niw_sigma, sig_ratio, sizeof sig_ratio, "%.4f");
    opt(r.acceptance_rate, acc, sizeof acc, "%.4f");
    std::snprintf(line, sizeof line, "%6ld %4ld  %-11s %12.6g %12.6g %10s %10s %8s %6zu %6zu %10.3f\n",
                  static_cast<long>(r.n), static_cast<long>(r.p), r.estimator.c_str(), r.mean_risk,
                  r.sigma_risk, mu_ratio, sig_ratio, acc, r.replications, r.failures, r.elapsed_seconds);
    out << line;
  }
  return out.str();
}

}  // namespace cmcov
