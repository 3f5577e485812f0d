#include <doctest.h>

#include "cmcov/simulation.hpp"
#include "oracles.hpp"

using namespace cmcov;

namespace {

ExperimentConfig small_config() {
  ExperimentConfig config;
  config.grid = {{30, 3}, {20, 4}};
  config.estimators = {EstimatorKind::Mle, EstimatorKind::MapNewton, EstimatorKind::MapGibbs, EstimatorKind::Niw};
  config.reps = 4;
  config.seed = 11;
  config.threads = 1;
  config.settings.gibbs.samples = 20;
  return config;
}

void check_same_reports(const std::vector<RiskReport>& a, const std::vector<RiskReport>& b) {
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].n == b[i].n);
    CHECK(a[i].p == b[i].p);
    CHECK(a[i].estimator == b[i].estimator);
    CHECK(a[i].mean_risk == b[i].mean_risk);
    CHECK(a[i].sigma_risk == b[i].sigma_risk);
    CHECK(a[i].replications == b[i].replications);
    CHECK(a[i].failures == b[i].failures);
    CHECK(a[i].acceptance_rate == b[i].acceptance_rate);
    CHECK(a[i].ratio_vs_niw_mean == b[i].ratio_vs_niw_mean);
    CHECK(a[i].ratio_vs_niw_sigma == b[i].ratio_vs_niw_sigma);
  }
}

}  // namespace

TEST_SUITE("simulation") {
  TEST_CASE("names round trip") {
    for (EstimatorKind kind : {EstimatorKind::Mle, EstimatorKind::MapNewton, EstimatorKind::MapGibbs, EstimatorKind::Niw}) {
      CHECK(parse_estimator(estimator_name(kind)) == kind);
    }
    CHECK(parse_projection("spectral") == TruthProjection::Spectral);
    CHECK(parse_projection("orthogonal") == TruthProjection::Orthogonal);
    CHECK_THROWS_AS(parse_estimator("ols"), Error);
    CHECK_THROWS_AS(parse_projection("nearest"), Error);
  }

  TEST_CASE("truths satisfy the constraint") {
    for (TruthProjection projection : {TruthProjection::Orthogonal, TruthProjection::Spectral}) {
      for (Eigen::Index p : {2, 3, 5, 10}) {
        for (std::uint64_t seed = 0; seed < 25; ++seed) {
          for (bool unit : {false, true}) {
            const TruthSpec t = generate_truth(p, seed, projection, unit);
            CHECK((t.sigma_true * t.mu_true - t.mu_true).norm() < 1e-10);
            CHECK((t.sigma_true - t.sigma_true.transpose()).norm() < 1e-13 * t.sigma_true.norm());
            const Eigen::VectorXd ev = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(t.sigma_true).eigenvalues();
            CHECK(ev.minCoeff() > 0.0);
            if (unit) CHECK(std::abs(ev.array().log().sum()) < 1e-10);
          }
        }
      }
    }
    CHECK_THROWS_AS(generate_truth(1, 0), Error);
  }

  TEST_CASE("spectral projection keeps the basis quadratic forms") {
    const TruthSpec t = generate_truth(4, 3, TruthProjection::Spectral);
    const Eigen::VectorXd u = t.mu_true / t.mu_true.norm();
    const Eigen::MatrixXd pm = build_orthobasis(u).matrix();
    const Eigen::MatrixXd rotated = pm.transpose() * t.sigma_true * pm;
    for (Eigen::Index i = 1; i < 4; ++i) {
      CHECK(rotated(i, i) == doctest::Approx(pm.col(i).dot(t.psi * pm.col(i))).epsilon(1e-12));
      for (Eigen::Index j = 0; j < 4; ++j) {
        if (j != i) CHECK(std::abs(rotated(i, j)) < 1e-10);
      }
    }

    // The orthogonal projection keeps Q Psi Q on the complement of u.
    const TruthSpec o = generate_truth(4, 3, TruthProjection::Orthogonal);
    const Eigen::MatrixXd q = Eigen::MatrixXd::Identity(4, 4) - u * u.transpose();
    CHECK((q * o.sigma_true * q - q * o.psi * q).norm() < 1e-10);
  }

  TEST_CASE("Psi diagonal moment") {
    for (Eigen::Index p : {3, 5}) {
      double sum = 0.0;
      const int draws = 100;
      for (int k = 0; k < draws; ++k) sum += generate_truth(p, 1000 + k).psi.diagonal().sum();
      const double mean = sum / static_cast<double>(draws * p);
      const double expected = 25.0 + 1.0 + static_cast<double>(p - 1);
      const double se = std::sqrt((102.0 + 2.0 * static_cast<double>(p - 1)) / static_cast<double>(draws * p));
      CHECK(std::abs(mean - expected) < 4.0 * se);
    }
  }

  TEST_CASE("seeded determinism") {
    const TruthSpec a = generate_truth(5, 42);
    const TruthSpec b = generate_truth(5, 42);
    CHECK(a.mu_true == b.mu_true);
    CHECK(a.sigma_true == b.sigma_true);
    Rng r1(3);
    Rng r2(3);
    CHECK(sample_data(a, 10, r1).x() == sample_data(b, 10, r2).x());
    CHECK(generate_truth(5, 43).mu_true != a.mu_true);
  }

  TEST_CASE("sampling moments") {
    const TruthSpec t = generate_truth(3, 7, TruthProjection::Orthogonal, true);
    Rng rng(8);
    const SampleSet data = sample_data(t, 100000, rng);
    const double lmax = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(t.sigma_true).eigenvalues().maxCoeff();
    for (Eigen::Index i = 0; i < 3; ++i) {
      CHECK(std::abs(data.xbar()[i] - t.mu_true[i]) < 4.0 * std::sqrt(lmax / 100000.0));
    }
    const Eigen::MatrixXd s = oracle::direct_scatter(data.x(), t.mu_true) / 100000.0;
    CHECK((s - t.sigma_true).norm() < 0.1);
    CHECK_THROWS_AS(sample_data(t, 1, rng), Error);
  }

  TEST_CASE("risk computation") {
    const TruthSpec t = generate_truth(4, 1);
    const Estimate perfect{t.mu_true, t.sigma_true, std::nullopt};
    const RiskPair zero = frobenius_risk({perfect, perfect}, t);
    CHECK(zero.mean_risk == 0.0);
    CHECK(zero.sigma_risk == 0.0);

    Estimate shifted = perfect;
    shifted.mean[0] += 1.0;
    CHECK(frobenius_risk({shifted}, t).mean_risk == doctest::Approx(0.25).epsilon(1e-14));

    Rng rng(2);
    std::vector<Estimate> list;
    for (int k = 0; k < 30; ++k) {
      list.push_back(Estimate{t.mu_true + cmcov::standard_normal_vector(4, rng),
                              t.sigma_true + oracle::random_positive(1, rng)[0] * Eigen::MatrixXd::Identity(4, 4),
                              std::nullopt});
    }
    double mean_sum = 0.0;
    double sigma_sum = 0.0;
    for (const Estimate& e : list) {
      for (Eigen::Index i = 0; i < 4; ++i) mean_sum += (e.mean[i] - t.mu_true[i]) * (e.mean[i] - t.mu_true[i]) / 4.0;
      for (Eigen::Index i = 0; i < 4; ++i)
        for (Eigen::Index j = 0; j < 4; ++j) {
          const double d = e.covariance(i, j) - t.sigma_true(i, j);
          sigma_sum += d * d / 4.0;
        }
    }
    const RiskPair r = frobenius_risk(list, t);
    CHECK(std::abs(r.mean_risk - mean_sum / 30.0) < 1e-12);
    CHECK(std::abs(r.sigma_risk - sigma_sum / 30.0) < 1e-12);
    CHECK_THROWS_AS(frobenius_risk({}, t), Error);
  }

  TEST_CASE("estimator settings") {
    const TruthSpec t = generate_truth(3, 5);
    Rng rng(1);
    const SampleSet data = sample_data(t, 30, rng);
    EstimatorSettings settings;
    const PriorConfig d = make_prior(data, settings);
    CHECK(d.kappa0 == 1.5);
    CHECK(d.a == 4.0);
    CHECK(d.mu0 == data.xbar());
    settings.kappa0 = 2.0;
    settings.a = 6.0;
    settings.h0_scalar = 3.0;
    settings.mu0_mode = Mu0Mode::Zero;
    const PriorConfig o = make_prior(data, settings);
    CHECK(o.kappa0 == 2.0);
    CHECK(o.a == 6.0);
    CHECK(o.h0_diag[0] == 1.0);
    CHECK(o.h0_diag[1] == 3.0);
    CHECK(o.mu0.isZero());
    const NiwPrior niw = make_niw_prior(data, settings);
    CHECK(niw.kappa0 == 2.0);
    CHECK(niw.mu0.isZero());

    for (EstimatorKind kind : {EstimatorKind::Mle, EstimatorKind::MapNewton, EstimatorKind::MapGibbs, EstimatorKind::Niw}) {
      Rng r(4);
      const Estimate e = run_estimator(kind, data, EstimatorSettings{}, r);
      CHECK(e.mean.allFinite());
      CHECK(e.covariance.allFinite());
      CHECK(e.acceptance_rate.has_value() == (kind == EstimatorKind::MapGibbs));
    }
  }

  TEST_CASE("single replication smoke run") {
    ExperimentConfig config;
    config.grid = {{50, 3}, {100, 3}, {50, 5}};
    config.estimators = {EstimatorKind::Mle, EstimatorKind::MapNewton, EstimatorKind::MapGibbs, EstimatorKind::Niw};
    config.reps = 1;
    const auto reports = run_experiment(config);
    REQUIRE(reports.size() == 12);
    for (const RiskReport& r : reports) {
      CHECK(std::isfinite(r.mean_risk));
      CHECK(std::isfinite(r.sigma_risk));
      CHECK(r.mean_risk >= 0.0);
      CHECK(r.sigma_risk >= 0.0);
      CHECK(r.replications + r.failures == 1);
    }
    CHECK(reports[3].estimator == "niw");
    CHECK(*reports[3].ratio_vs_niw_sigma == 1.0);
    CHECK(!format_risk_table(reports).empty());
  }

  TEST_CASE("gibbs is skipped above p = 5 by default") {
    ExperimentConfig config;
    config.grid = {{20, 6}};
    config.estimators = {EstimatorKind::MapGibbs, EstimatorKind::Niw};
    config.reps = 1;
    const auto reports = run_experiment(config);
    REQUIRE(reports.size() == 1);
    CHECK(reports[0].estimator == "niw");
  }

  TEST_CASE("reports are reproducible and order independent") {
    const ExperimentConfig config = small_config();
    const auto first = run_experiment(config);
    check_same_reports(first, run_experiment(config));

    ExperimentConfig threaded = config;
    threaded.threads = 3;
    check_same_reports(first, run_experiment(threaded));

    ExperimentConfig reordered = config;
    reordered.estimators = {EstimatorKind::Niw, EstimatorKind::MapGibbs, EstimatorKind::Mle, EstimatorKind::MapNewton};
    const auto shuffled = run_experiment(reordered);
    REQUIRE(shuffled.size() == first.size());
    for (const RiskReport& a : first) {
      const auto match = std::find_if(shuffled.begin(), shuffled.end(), [&](const RiskReport& b) {
        return a.n == b.n && a.p == b.p && a.estimator == b.estimator;
      });
      REQUIRE(match != shuffled.end());
      CHECK(a.mean_risk == match->mean_risk);
      CHECK(a.sigma_risk == match->sigma_risk);
      CHECK(a.ratio_vs_niw_sigma == match->ratio_vs_niw_sigma);
    }

    ExperimentConfig fixed = config;
    fixed.fix_truth_per_cell = true;
    const auto fixed_reports = run_experiment(fixed);
    CHECK(fixed_reports.size() == first.size());
  }
}
