#pragma once

// Normal / inverse-gamma posterior for the structured model and an
// MH-within-Gibbs sampler over (mu, lambda).
//
// Prior: mu | lambda ~ N_p(mu0, Sigma(u, lambda) / kappa0) and
// lambda_i ~ InvGamma(a - 1, c_i / 2). The posterior kernel is
//
//     (prod lambda_i)^(-t) exp(-Tr(D^-1 H_N) / 2),   t = (n + 1 + 2a) / 2,
//
// with H_N = P^T [A(mu) + kappa0 (mu - mu0)(mu - mu0)^T] P + diag(1, c).
// The prior quadratic is rotated into the P(u) basis, which makes the trace
// reproduce the Gaussian prior density on mu exactly.

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "cmcov/core_model.hpp"
#include "cmcov/random.hpp"

namespace cmcov {

struct PriorConfig {
  Eigen::VectorXd mu0;
  double kappa0 = 1.5;
  double a = 3.0;
  // Diagonal of H0 = diag(1, c_1, ..., c_{p-1}).
  Eigen::VectorXd h0_diag;

  /// mu0 = xbar, kappa0 = 1.5, a = p + 1, H0 = I.
  static PriorConfig defaults(const SampleSet& data);

  /// Proper-prior invariants: kappa0 > 0, a > 1, H0 entries > 0, H0[0] = 1.
  void validate(Eigen::Index p) const;

  /// 2t = n + 1 + 2a.
  [[nodiscard]] double two_t(Eigen::Index n) const { return static_cast<double>(n) + 1.0 + 2.0 * a; }
};

/// Weaker check used by the numerical routines so that prior-free limits
/// (kappa0 = 0, H0 -> 0, small a) can be evaluated: sizes, kappa0 >= 0,
/// H0 >= 0 and 2t > 0.
void check_prior_shape(const PriorConfig& prior, Eigen::Index n, Eigen::Index p);

/// H_N in the P(u) basis, with its diagonal c*_1..c*_p cached.
struct HNMatrix {
  Eigen::MatrixXd matrix;
  Eigen::VectorXd diag;
};

HNMatrix hn_matrix(const SampleSet& data, const Eigen::VectorXd& mu, const PriorConfig& prior);

/// Diagonal of H_N without forming the full matrix.
Eigen::VectorXd hn_diagonal(const SampleSet& data, const MeanState& mean, const OrthoBasis& basis,
                            const PriorConfig& prior);

/// Unnormalized log posterior. ZeroMean when |mu| < 1e-10.
double log_posterior(const SampleSet& data, const Eigen::VectorXd& mu,
                     const Eigen::VectorXd& lambda, const PriorConfig& prior);

/// Inverse-gamma draw, shape alpha and scale beta (density proportional to
/// x^(-alpha-1) exp(-beta/x)): beta / G with G ~ Gamma(shape alpha, scale 1).
double draw_inverse_gamma(double alpha, double beta, Rng& rng);

/// lambda_i ~ InvGamma((n + 2a - 1) / 2, c*_{i+1} / 2) independently. No
/// ordering is imposed on the draw.
Eigen::VectorXd draw_lambda_conditional(const SampleSet& data, const Eigen::VectorXd& mu,
                                        const PriorConfig& prior, Rng& rng);

/// Conditional mode c*_{i+1} / (n + 1 + 2a).
Eigen::VectorXd lambda_conditional_mode(const SampleSet& data, const Eigen::VectorXd& mu,
                                        const PriorConfig& prior);

/// log q(to | from): N_p(from, Sigma(from, lambda) / n).
double log_proposal_density(const Eigen::VectorXd& to, const Eigen::VectorXd& from,
                            const Eigen::VectorXd& lambda, Eigen::Index n);

/// log of the Hastings ratio for moving from -> to with lambda held fixed,
/// including both proposal terms.
double log_acceptance_ratio(const SampleSet& data, const Eigen::VectorXd& from,
                            const Eigen::VectorXd& to, const Eigen::VectorXd& lambda,
                            const PriorConfig& prior);

struct ChainState {
  Eigen::VectorXd mu;
  Eigen::VectorXd lambda;
  double log_posterior = 0.0;
  std::size_t iteration = 0;
  // MH moves accepted while producing this state.
  std::size_t accepted = 0;
};

struct MhResult {
  Eigen::VectorXd mu;
  bool accepted = false;
};

MhResult mh_step_mu(const SampleSet& data, const ChainState& state, const PriorConfig& prior,
                    Rng& rng);

struct GibbsConfig {
  std::size_t samples = 100;  // s
  std::size_t mh_steps = 5;   // l
  std::size_t burn_in = 0;
  // Overwritten by the first conditional draw before it is ever used.
  std::optional<Eigen::VectorXd> initial_lambda;
};

struct GibbsRun {
  std::vector<ChainState> chain;
  std::size_t proposals = 0;
  std::size_t accepted = 0;

  [[nodiscard]] double acceptance_rate() const {
    return proposals == 0 ? 0.0 : static_cast<double>(accepted) / static_cast<double>(proposals);
  }
};

/// Starts at mu = xbar and alternates one lambda draw with `mh_steps`
/// Metropolis-Hastings updates of mu.
GibbsRun run_gibbs(const SampleSet& data, const PriorConfig& prior, const GibbsConfig& config,
                   Rng& rng);

struct GibbsMap {
  MeanState mean;
  EigenSpectrum spectrum;
  std::size_t selected_iteration = 0;
};

/// Picks the chain state with the largest log posterior, keeps its mu and
/// replaces its lambda with the conditional mode at that mu.
GibbsMap map_from_chain(const std::vector<ChainState>& chain, const SampleSet& data,
                        const PriorConfig& prior);

/// One JSON object per line: iteration, mu, lambda, log_posterior, accepted.
std::string chain_to_jsonl(const std::vector<ChainState>& chain);

}  // namespace cmcov
