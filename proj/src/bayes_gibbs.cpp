#include "cmcov/bayes_gibbs.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include <json.hpp>

namespace cmcov {

PriorConfig PriorConfig::defaults(const SampleSet& data) {
  PriorConfig prior;
  prior.mu0 = data.xbar();
  prior.kappa0 = 1.5;
  prior.a = static_cast<double>(data.p()) + 1.0;
  prior.h0_diag = Eigen::VectorXd::Ones(data.p());
  return prior;
}

void PriorConfig::validate(Eigen::Index p) const {
  if (mu0.size() != p || h0_diag.size() != p) {
    throw Error(ErrorCategory::DimensionMismatch, "prior dimension does not match data");
  }
  if (!(kappa0 > 0.0)) throw Error(ErrorCategory::InvalidArgument, "kappa0 must be positive");
  if (!(a > 1.0)) throw Error(ErrorCategory::InvalidArgument, "prior shape a must exceed 1");
  if (h0_diag[0] != 1.0) throw Error(ErrorCategory::InvalidArgument, "H0[0,0] must equal 1");
  if (!(h0_diag.array() > 0.0).all()) {
    throw Error(ErrorCategory::InvalidArgument, "H0 diagonal entries must be positive");
  }
}

void check_prior_shape(const PriorConfig& prior, Eigen::Index n, Eigen::Index p) {
  if (prior.mu0.size() != p || prior.h0_diag.size() != p) {
    throw Error(ErrorCategory::DimensionMismatch, "prior dimension does not match data");
  }
  if (!(prior.kappa0 >= 0.0)) throw Error(ErrorCategory::InvalidArgument, "kappa0 must be >= 0");
  if (!(prior.h0_diag.array() >= 0.0).all()) {
    throw Error(ErrorCategory::InvalidArgument, "H0 diagonal entries must be >= 0");
  }
  if (!(prior.two_t(n) > 0.0)) {
    throw Error(ErrorCategory::InvalidArgument, "posterior exponent n + 1 + 2a must be positive");
  }
}

Eigen::VectorXd hn_diagonal(const SampleSet& data, const MeanState& mean, const OrthoBasis& basis,
                            const PriorConfig& prior) {
  const Eigen::VectorXd offset = mean.mu() - prior.mu0;
  Eigen::VectorXd d = b_diagonal(data, mean, basis);
  for (Eigen::Index i = 0; i < d.size(); ++i) {
    const double proj = basis.matrix().col(i).dot(offset);
    d[i] += prior.kappa0 * proj * proj + prior.h0_diag[i];
  }
  return d;
}

HNMatrix hn_matrix(const SampleSet& data, const Eigen::VectorXd& mu, const PriorConfig& prior) {
  check_prior_shape(prior, data.n(), data.p());
  const MeanState mean = MeanState::from_mu(mu);
  const OrthoBasis basis = build_orthobasis(mean.u);
  const Eigen::VectorXd rotated = basis.matrix().transpose() * (mu - prior.mu0);
  HNMatrix hn;
  hn.matrix = b_matrix(data, mean, basis) + prior.kappa0 * rotated * rotated.transpose();
  hn.matrix.diagonal() += prior.h0_diag;
  hn.matrix = 0.5 * (hn.matrix + hn.matrix.transpose());
  hn.diag = hn.matrix.diagonal();
  return hn;
}

double log_posterior(const SampleSet& data, const Eigen::VectorXd& mu,
                     const Eigen::VectorXd& lambda, const PriorConfig& prior) {
  check_prior_shape(prior, data.n(), data.p());
  if (lambda.size() != data.p() - 1) {
    throw Error(ErrorCategory::DimensionMismatch, "lambda must have length p - 1");
  }
  if (mu.size() != data.p()) throw Error(ErrorCategory::DimensionMismatch, "mu length mismatch");
  const MeanState mean = MeanState::from_mu(mu);
  const OrthoBasis basis = build_orthobasis(mean.u);
  const Eigen::VectorXd c = hn_diagonal(data, mean, basis, prior);
  const double t = 0.5 * prior.two_t(data.n());

  double trace = c[0];
  double log_sum = 0.0;
  for (Eigen::Index i = 0; i < lambda.size(); ++i) {
    if (!(lambda[i] > 0.0)) return -std::numeric_limits<double>::infinity();
    trace += c[i + 1] / lambda[i];
    log_sum += std::log(lambda[i]);
  }
  return -t * log_sum - 0.5 * trace;
}

double draw_inverse_gamma(double alpha, double beta, Rng& rng) {
  std::gamma_distribution<double> gamma(alpha, 1.0);
  double g = gamma(rng);
  // A zero gamma draw is possible only for tiny shapes; redraw.
  while (!(g > 0.0)) g = gamma(rng);
  return beta / g;
}

Eigen::VectorXd draw_lambda_conditional(const SampleSet& data, const Eigen::VectorXd& mu,
                                        const PriorConfig& prior, Rng& rng) {
  check_prior_shape(prior, data.n(), data.p());
  const MeanState mean = MeanState::from_mu(mu);
  const OrthoBasis basis = build_orthobasis(mean.u);
  const Eigen::VectorXd c = hn_diagonal(data, mean, basis, prior);
  const double shape = 0.5 * (static_cast<double>(data.n()) + 2.0 * prior.a - 1.0);
  if (!(shape > 0.0)) throw Error(ErrorCategory::InvalidArgument, "inverse-gamma shape must be positive");

  Eigen::VectorXd lambda(data.p() - 1);
  for (Eigen::Index i = 0; i < lambda.size(); ++i) {
    if (!(c[i + 1] > 0.0)) throw Error(ErrorCategory::DegenerateData, "H_N diagonal entry is not positive");
    lambda[i] = draw_inverse_gamma(shape, 0.5 * c[i + 1], rng);
  }
  return lambda;
}

Eigen::VectorXd lambda_conditional_mode(const SampleSet& data, const Eigen::VectorXd& mu,
                                        const PriorConfig& prior) {
  check_prior_shape(prior, data.n(), data.p());
  const MeanState mean = MeanState::from_mu(mu);
  const OrthoBasis basis = build_orthobasis(mean.u);
  const Eigen::VectorXd c = hn_diagonal(data, mean, basis, prior);
  return c.tail(data.p() - 1) / prior.two_t(data.n());
}

double log_proposal_density(const Eigen::VectorXd& to, const Eigen::VectorXd& from,
                            const Eigen::VectorXd& lambda, Eigen::Index n) {
  const MeanState centre = MeanState::from_mu(from);
  const OrthoBasis basis = build_orthobasis(centre.u);
  const Eigen::VectorXd z = basis.matrix().transpose() * (to - from);
  const auto nd = static_cast<double>(n);
  const auto p = static_cast<double>(from.size());

  double quad = z[0] * z[0];
  double log_det = 0.0;
  for (Eigen::Index i = 0; i < lambda.size(); ++i) {
    quad += z[i + 1] * z[i + 1] / lambda[i];
    log_det += std::log(lambda[i]);
  }
  // Covariance Sigma / n has log determinant sum log lambda - p log n.
  return -0.5 * nd * quad - 0.5 * (log_det - p * std::log(nd)) -
         0.5 * p * std::log(2.0 * std::numbers::pi);
}

double log_acceptance_ratio(const SampleSet& data, const Eigen::VectorXd& from,
                            const Eigen::VectorXd& to, const Eigen::VectorXd& lambda,
                            const PriorConfig& prior) {
  if (to.norm() < 1e-10) return -std::numeric_limits<double>::infinity();
  const double target = log_posterior(data, to, lambda, prior) - log_posterior(data, from, lambda, prior);
  const double proposal = log_proposal_density(from, to, lambda, data.n()) -
                          log_proposal_density(to, from, lambda, data.n());
  return target + proposal;
}

MhResult mh_step_mu(const SampleSet& data, const ChainState& state, const PriorConfig& prior,
                    Rng& rng) {
  const MeanState centre = MeanState::from_mu(state.mu);
  const OrthoBasis basis = build_orthobasis(centre.u);
  const Eigen::VectorXd z = standard_normal_vector(data.p(), rng);

  // P diag(1, sqrt(lambda)) z / sqrt(n) has covariance Sigma / n.
  Eigen::VectorXd scaled(data.p());
  scaled[0] = z[0];
  for (Eigen::Index i = 1; i < data.p(); ++i) scaled[i] = std::sqrt(state.lambda[i - 1]) * z[i];
  const Eigen::VectorXd proposal =
      state.mu + basis.matrix() * scaled / std::sqrt(static_cast<double>(data.n()));

  const double log_r = log_acceptance_ratio(data, state.mu, proposal, state.lambda, prior);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  const double draw = uniform(rng);
  if (std::log(draw) < log_r) return MhResult{proposal, true};
  return MhResult{state.mu, false};
}

GibbsRun run_gibbs(const SampleSet& data, const PriorConfig& prior, const GibbsConfig& config,
                   Rng& rng) {
  require_two_rows(data);
  check_prior_shape(prior, data.n(), data.p());
  if (config.samples < 1) throw Error(ErrorCategory::InvalidArgument, "sample count s must be >= 1");
  if (config.mh_steps < 1) throw Error(ErrorCategory::InvalidArgument, "inner MH steps l must be >= 1");

  GibbsRun run;
  run.chain.reserve(config.samples);
  ChainState state;
  state.mu = data.xbar();
  state.lambda = config.initial_lambda.value_or(Eigen::VectorXd::Ones(data.p() - 1));
  if (state.lambda.size() != data.p() - 1) {
    throw Error(ErrorCategory::DimensionMismatch, "initial lambda must have p - 1 entries");
  }

  const std::size_t total = config.samples + config.burn_in;
  for (std::size_t j = 1; j <= total; ++j) {
    state.lambda = draw_lambda_conditional(data, state.mu, prior, rng);
    state.accepted = 0;
    for (std::size_t k = 0; k < config.mh_steps; ++k) {
      MhResult step = mh_step_mu(data, state, prior, rng);
      ++run.proposals;
      if (step.accepted) {
        ++run.accepted;
        ++state.accepted;
        state.mu = std::move(step.mu);
      }
    }
    state.iteration = j;
    state.log_posterior = log_posterior(data, state.mu, state.lambda, prior);
    if (j > config.burn_in) run.chain.push_back(state);
  }
  return run;
}

GibbsMap map_from_chain(const std::vector<ChainState>& chain, const SampleSet& data,
                        const PriorConfig& prior) {
  if (chain.empty()) throw Error(ErrorCategory::EmptyChain, "chain has no states");
  std::size_t best = 0;
  for (std::size_t i = 1; i < chain.size(); ++i) {
    if (chain[i].log_posterior > chain[best].log_posterior) best = i;
  }
  GibbsMap map{MeanState::from_mu(chain[best].mu), EigenSpectrum{}, chain[best].iteration};
  map.spectrum = EigenSpectrum::make(lambda_conditional_mode(data, chain[best].mu, prior));
  return map;
}

std::string chain_to_jsonl(const std::vector<ChainState>& chain) {
  std::ostringstream out;
  for (const ChainState& state : chain) {
    nlohmann::ordered_json line;
    line["iteration"] = state.iteration;
    line["mu"] = std::vector<double>(state.mu.data(), state.mu.data() + state.mu.size());
    line["lambda"] =
        std::vector<double>(state.lambda.data(), state.lambda.data() + state.lambda.size());
    line["log_posterior"] = state.log_posterior;
    line["accepted"] = state.accepted;
    out << line.dump() << '\n';
  }
  return out.str();
}

}  // namespace cmcov
