#include "cmcov/bayes_map.hpp"

#include <cmath>

#include <Eigen/Cholesky>
#include <Eigen/LU>

namespace cmcov {

namespace {

struct BoundTerms {
  double t = 0.0;
  Eigen::VectorXd m;  // m_1..m_{p-1}
};

BoundTerms bound_terms(const SampleSet& data, const PriorConfig& prior) {
  check_prior_shape(prior, data.n(), data.p());
  BoundTerms terms;
  terms.t = 0.5 * prior.two_t(data.n());
  terms.m = prior.h0_diag.tail(data.p() - 1).array() + data.a0_max_eigenvalue();
  return terms;
}

void check_direction(const SampleSet& data, const Eigen::VectorXd& u) {
  if (u.size() != data.p()) throw Error(ErrorCategory::DimensionMismatch, "direction length mismatch");
}

// Puts (u, c0) into the c0 >= 0 half; h and Sigma are unchanged by the flip.
void canonicalize(Eigen::VectorXd& u, double& c0) {
  if (c0 < 0.0) {
    u = -u;
    c0 = -c0;
  }
}

}  // namespace

void NewtonConfig::validate() const {
  if (!(alpha > 0.0 && alpha < 1.0)) throw Error(ErrorCategory::InvalidArgument, "alpha must lie in (0, 1)");
  if (!(epsilon > 0.0)) throw Error(ErrorCategory::InvalidArgument, "epsilon must be positive");
  if (max_outer < 1 || max_inner < 1) {
    throw Error(ErrorCategory::InvalidArgument, "iteration limits must be >= 1");
  }
}

StructuredCovariance MapFit::covariance() const {
  return assemble_sigma(build_orthobasis(mean.u), spectrum);
}

double map_c0_update(const SampleSet& data, const Eigen::VectorXd& u, const Eigen::VectorXd& lambda,
                     const PriorConfig& prior) {
  check_prior_shape(prior, data.n(), data.p());
  check_direction(data, u);
  const OrthoBasis basis = build_orthobasis(u);
  const Eigen::MatrixXd inv = assemble_sigma(basis, EigenSpectrum{lambda}).inverse();
  const auto n = static_cast<double>(data.n());
  const Eigen::VectorXd w = inv * basis.u();
  return (n * basis.u().dot(data.xbar()) + prior.kappa0 * w.dot(prior.mu0)) /
         (n + prior.kappa0 * w.dot(basis.u()));
}

EigenSpectrum map_lambda_update(const SampleSet& data, const MeanState& mean, const PriorConfig& prior) {
  check_prior_shape(prior, data.n(), data.p());
  const OrthoBasis basis = build_orthobasis(mean.u);
  const Eigen::VectorXd c = hn_diagonal(data, mean, basis, prior);
  return EigenSpectrum::make(c.tail(data.p() - 1) / prior.two_t(data.n()));
}

double h_value(const SampleSet& data, const Eigen::VectorXd& u, double c0, const PriorConfig& prior) {
  check_direction(data, u);
  const BoundTerms terms = bound_terms(data, prior);
  const auto n = static_cast<double>(data.n());
  const double kappa = prior.kappa0;

  const double s = (c0 * u - prior.mu0).squaredNorm();
  double log_part = 0.0;
  for (Eigen::Index i = 0; i < terms.m.size(); ++i) {
    log_part += std::log((terms.m[i] + kappa * s) / (2.0 * terms.t));
  }
  const double uu = u.squaredNorm();
  const double ux = u.dot(data.xbar());
  const double f = quadratic_form(data.a0(), u) - 2.0 * n * c0 * ux * uu + n * c0 * c0 * uu * uu;
  const double first = c0 - u.dot(prior.mu0);
  return -(terms.t * log_part + 0.5 * (f + kappa * first * first + terms.m[0]));
}

Eigen::VectorXd h_gradient(const SampleSet& data, const Eigen::VectorXd& u, double c0,
                           const PriorConfig& prior) {
  check_direction(data, u);
  const BoundTerms terms = bound_terms(data, prior);
  const auto n = static_cast<double>(data.n());
  const double kappa = prior.kappa0;
  const Eigen::VectorXd& xb = data.xbar();

  const Eigen::VectorXd r = c0 * u - prior.mu0;
  const double s = r.squaredNorm();
  double inv_sum = 0.0;
  for (Eigen::Index i = 0; i < terms.m.size(); ++i) inv_sum += 1.0 / (terms.m[i] + kappa * s);

  const double uu = u.squaredNorm();
  const double ux = u.dot(xb);
  const Eigen::VectorXd grad_f = 2.0 * (data.a0() * u) - 2.0 * n * c0 * (uu * xb + 2.0 * ux * u) +
                                 4.0 * n * c0 * c0 * uu * u;
  const double first = c0 - u.dot(prior.mu0);

  const Eigen::VectorXd neg = terms.t * inv_sum * 2.0 * kappa * c0 * r + 0.5 * grad_f -
                              kappa * first * prior.mu0;
  return -neg;
}

Eigen::MatrixXd h_hessian(const SampleSet& data, const Eigen::VectorXd& u, double c0,
                          const PriorConfig& prior) {
  check_direction(data, u);
  const BoundTerms terms = bound_terms(data, prior);
  const auto n = static_cast<double>(data.n());
  const double kappa = prior.kappa0;
  const Eigen::VectorXd& xb = data.xbar();
  const Eigen::Index p = data.p();
  const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(p, p);

  const Eigen::VectorXd r = c0 * u - prior.mu0;
  const double s = r.squaredNorm();
  double inv_sum = 0.0;
  double inv_sq_sum = 0.0;
  for (Eigen::Index i = 0; i < terms.m.size(); ++i) {
    const double q = terms.m[i] + kappa * s;
    inv_sum += 1.0 / q;
    inv_sq_sum += 1.0 / (q * q);
  }

  const double uu = u.squaredNorm();
  const double ux = u.dot(xb);
  const Eigen::MatrixXd hess_f = 2.0 * data.a0() -
                                 4.0 * n * c0 * (xb * u.transpose() + u * xb.transpose() + ux * eye) +
                                 4.0 * n * c0 * c0 * (uu * eye + 2.0 * u * u.transpose());

  Eigen::MatrixXd neg = terms.t * (2.0 * kappa * c0 * c0 * inv_sum * eye -
                                   4.0 * kappa * kappa * c0 * c0 * inv_sq_sum * r * r.transpose()) +
                        0.5 * hess_f + kappa * prior.mu0 * prior.mu0.transpose();
  neg = 0.5 * (neg + neg.transpose());
  return -neg;
}

namespace {

// Backtracked ascent along `direction`; returns true and updates u if some
// step alpha^l (l = 0..max_backtracks) increases h.
bool backtrack(const SampleSet& data, const PriorConfig& prior, const NewtonConfig& cfg, double c0,
               const Eigen::VectorXd& direction, Eigen::VectorXd& u, double& h_u) {
  double step = 1.0;
  for (std::size_t l = 0; l <= cfg.max_backtracks; ++l, step *= cfg.alpha) {
    Eigen::VectorXd candidate = u + step * direction;
    const double norm = candidate.norm();
    if (!(norm > 1e-12) || !candidate.allFinite()) continue;
    candidate /= norm;
    const double h_candidate = h_value(data, candidate, c0, prior);
    if (h_candidate > h_u) {
      u = std::move(candidate);
      h_u = h_candidate;
      return true;
    }
  }
  return false;
}

}  // namespace

MapFit fit_map_newton(const SampleSet& data, const PriorConfig& prior, const NewtonConfig& cfg,
                      const Eigen::VectorXd& u_start, double c0_start) {
  require_two_rows(data);
  check_prior_shape(prior, data.n(), data.p());
  cfg.validate();
  check_direction(data, u_start);

  Eigen::VectorXd u = build_orthobasis(u_start, BasisOptions{.renormalize = true}).u();
  double c0 = c0_start;
  canonicalize(u, c0);
  EigenSpectrum spectrum = map_lambda_update(data, MeanState{u, c0}, prior);

  MapFit fit;
  fit.h_trace.push_back(h_value(data, u, c0, prior));

  for (std::size_t k = 0; k < cfg.max_outer; ++k) {
    const Eigen::VectorXd u_prev = u;
    const double c0_prev = c0;
    const EigenSpectrum spectrum_prev = spectrum;

    c0 = map_c0_update(data, u, spectrum.lambda, prior);
    canonicalize(u, c0);
    spectrum = map_lambda_update(data, MeanState{u, c0}, prior);
    const Eigen::VectorXd u_outer_start = u;

    double h_u = h_value(data, u, c0, prior);
    for (std::size_t j = 0; j < cfg.max_inner; ++j) {
      const Eigen::VectorXd grad = h_gradient(data, u, c0, prior);
      const Eigen::MatrixXd hess = h_hessian(data, u, c0, prior);

      const double before = h_u;
      const Eigen::VectorXd u_before = u;
      bool moved = false;

      // Newton system restricted to the tangent space of the unit sphere,
      // with the multiplier term -(u . grad) I from the constraint |u| = 1.
      const Eigen::MatrixXd tangent_basis = build_orthobasis(u).matrix().rightCols(data.p() - 1);
      Eigen::MatrixXd reduced = tangent_basis.transpose() * hess * tangent_basis;
      reduced.diagonal().array() -= u.dot(grad);
      Eigen::FullPivLU<Eigen::MatrixXd> lu(reduced);
      if (lu.isInvertible()) {
        const Eigen::VectorXd v = tangent_basis * lu.solve(tangent_basis.transpose() * grad);
        // u - v is an ascent move only when grad . v < 0.
        if (v.allFinite() && grad.dot(v) < 0.0) moved = backtrack(data, prior, cfg, c0, -v, u, h_u);
      }
      if (!moved) {
        // Only the tangential part of the gradient survives renormalization.
        const Eigen::VectorXd tangent = grad - grad.dot(u) * u;
        const double gnorm = tangent.norm();
        if (gnorm > 0.0 && std::isfinite(gnorm)) {
          moved = backtrack(data, prior, cfg, c0, tangent / gnorm, u, h_u);
          if (moved) ++fit.fallback_steps;
        }
      }
      if (!moved) break;
      fit.step_gains.push_back(h_u - before);
      if ((u - u_before).norm() < cfg.epsilon) break;
    }

    fit.outer_iterations = k + 1;
    if (h_u < fit.h_trace.back()) {
      // Outer iteration lowered the bound: keep the previous iterate.
      u = u_prev;
      c0 = c0_prev;
      spectrum = spectrum_prev;
      fit.converged = true;
      break;
    }
    fit.h_trace.push_back(h_u);
    spectrum = map_lambda_update(data, MeanState{u, c0}, prior);

    const bool u_stable = (u - u_outer_start).norm() < cfg.epsilon;
    const bool c0_stable = std::abs(c0 - c0_prev) <= cfg.epsilon * std::max(1.0, std::abs(c0));
    if (u_stable && c0_stable) {
      fit.converged = true;
      break;
    }
  }

  fit.mean = MeanState{u, c0};
  fit.spectrum = spectrum;
  return fit;
}

MapFit fit_map_newton(const SampleSet& data, const PriorConfig& prior, const NewtonConfig& cfg) {
  const MleFit start = fit_mle(data);
  return fit_map_newton(data, prior, cfg, start.mean.u, start.mean.c0);
}

}  // namespace cmcov
