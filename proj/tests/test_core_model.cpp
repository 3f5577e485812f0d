#include <doctest.h>

#include "cmcov/core_model.hpp"
#include "oracles.hpp"

using namespace cmcov;

namespace {

template <typename F>
ErrorCategory category_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.category();
  }
  FAIL("expected an Error");
  return ErrorCategory::InvalidArgument;
}

Eigen::VectorXd vec(std::initializer_list<double> v) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

SampleSet random_sample(Eigen::Index n, Eigen::Index p, Rng& rng) {
  const Eigen::MatrixXd l = Eigen::MatrixXd::Identity(p, p) + 0.3 * Eigen::MatrixXd::Random(p, p);
  return SampleSet(oracle::gaussian_rows(n, oracle::random_unit(p, rng) * 2.0, l, rng));
}

}  // namespace

TEST_SUITE("core_model") {
  TEST_CASE("equal-entry mean reproduces the closed-form basis") {
    const double s3 = 1.0 / std::sqrt(3.0);
    const OrthoBasis basis = build_orthobasis(vec({s3, s3, s3}));
    Eigen::MatrixXd expected(3, 3);
    expected << s3, 2.0 / std::sqrt(6.0), 0.0,                      //
        s3, -1.0 / std::sqrt(6.0), 1.0 / std::sqrt(2.0),            //
        s3, -1.0 / std::sqrt(6.0), -1.0 / std::sqrt(2.0);
    CHECK((basis.matrix() - expected).norm() < 1e-12);

    for (Eigen::Index p : {4, 6, 9}) {
      const Eigen::MatrixXd oracle_basis = oracle::equal_mean_basis(p);
      const OrthoBasis b = build_orthobasis(Eigen::VectorXd::Constant(p, 1.0 / std::sqrt(double(p))));
      CHECK((b.matrix() - oracle_basis).norm() < 1e-12);
    }
  }

  TEST_CASE("mean (m1, m2, m3, ..., m3) reproduces the two leading eigenvectors") {
    for (Eigen::Index p : {3, 5, 8}) {
      const double m1 = 0.4, m2 = -0.7, m3 = 1.3;
      Eigen::VectorXd mu = Eigen::VectorXd::Constant(p, m3);
      mu[0] = m1;
      mu[1] = m2;
      const OrthoBasis basis = build_orthobasis(mu / mu.norm());
      const oracle::TwoVectors w = oracle::structured_mean_vectors(m1, m2, m3, p);
      CHECK(std::abs(std::abs(basis.v(0).dot(w.w1)) - 1.0) < 1e-12);
      CHECK(std::abs(std::abs(basis.v(1).dot(w.w2)) - 1.0) < 1e-12);
      // Remaining columns are the z vectors of the equal-entry case.
      for (Eigen::Index s = p - 2, c = 2; s >= 2; --s, ++c) {
        CHECK(std::abs(std::abs(basis.v(c).dot(oracle::z_vector(p, s))) - 1.0) < 1e-12);
      }
    }
  }

  TEST_CASE("canonical axis keeps the other canonical vectors") {
    const OrthoBasis basis = build_orthobasis(vec({0, 0, 1}));
    Eigen::MatrixXd expected(3, 3);
    expected << 0, 1, 0, 0, 0, 1, 1, 0, 0;
    CHECK(basis.matrix() == expected);
    CHECK(basis.pivot() == 2);
  }

  TEST_CASE("random bases are orthogonal and start with u") {
    Rng rng(11);
    for (Eigen::Index p : {2, 3, 5, 10, 50}) {
      for (int k = 0; k < 100; ++k) {
        const Eigen::VectorXd u = oracle::random_unit(p, rng);
        const OrthoBasis basis = build_orthobasis(u);
        const Eigen::MatrixXd& m = basis.matrix();
        CHECK((m.transpose() * m - Eigen::MatrixXd::Identity(p, p)).norm() < 1e-10);
        CHECK((basis.u() - u).norm() < 1e-15);
        for (Eigen::Index i = 0; i + 1 < p; ++i) {
          Eigen::Index arg = 0;
          basis.v(i).cwiseAbs().maxCoeff(&arg);
          CHECK(basis.v(i)[arg] > 0.0);
        }
      }
    }
  }

  TEST_CASE("basis construction is bit-for-bit deterministic") {
    Rng rng(3);
    const Eigen::VectorXd u = oracle::random_unit(7, rng);
    CHECK(build_orthobasis(u).matrix() == build_orthobasis(u).matrix());
  }

  TEST_CASE("basis input validation") {
    CHECK(category_of([] { build_orthobasis(Eigen::VectorXd::Zero(3)); }) == ErrorCategory::ZeroVector);
    CHECK(category_of([] { build_orthobasis(vec({1e-9, 0, 0})); }) == ErrorCategory::ZeroVector);
    CHECK(category_of([] { build_orthobasis(vec({1.1, 0, 0})); }) == ErrorCategory::NonUnit);
    CHECK(build_orthobasis(vec({1.1, 0, 0}), BasisOptions{.renormalize = true}).u()[0] == doctest::Approx(1.0));
    const OrthoBasis near = build_orthobasis(vec({1.0 + 5e-9, 0, 0}));
    CHECK(std::abs(near.u().norm() - 1.0) < 1e-15);
  }

  TEST_CASE("sigma assembly examples") {
    Rng rng(5);
    const OrthoBasis any = build_orthobasis(oracle::random_unit(4, rng));
    CHECK((assemble_sigma(any, EigenSpectrum::make(Eigen::VectorXd::Ones(3))).matrix() -
           Eigen::MatrixXd::Identity(4, 4))
              .norm() < 1e-12);

    const StructuredCovariance s = assemble_sigma(build_orthobasis(vec({0, 0, 1})), EigenSpectrum::make(vec({2, 3})));
    const Eigen::Matrix3d expected = Eigen::Vector3d(2, 3, 1).asDiagonal();
    CHECK((s.matrix() - Eigen::MatrixXd(expected)).norm() < 1e-15);
  }

  TEST_CASE("sigma constraint, determinant and triple-product agreement") {
    Rng rng(17);
    for (Eigen::Index p : {2, 3, 5, 10, 50}) {
      for (int k = 0; k < 20; ++k) {
        const Eigen::VectorXd u = oracle::random_unit(p, rng);
        const Eigen::VectorXd lambda = oracle::random_positive(p - 1, rng);
        const OrthoBasis basis = build_orthobasis(u);
        const StructuredCovariance sigma = assemble_sigma(basis, EigenSpectrum::make(lambda));
        const Eigen::MatrixXd& m = sigma.matrix();
        CHECK(m == m.transpose());
        CHECK((m * u - u).norm() < 1e-10);
        const double c0 = 3.7;
        CHECK((m * (c0 * u) - c0 * u).norm() < 1e-10 * c0);
        CHECK((m - oracle::triple_product_sigma(basis.matrix(), lambda)).norm() < 1e-10 * lambda.maxCoeff());
        const double det = m.determinant();
        const double prod = lambda.prod();
        CHECK(std::abs(det - prod) <= 1e-8 * prod);
        CHECK(std::abs(sigma.log_det() - std::log(prod)) < 1e-10 * (1.0 + std::abs(std::log(prod))));
        CHECK((sigma.inverse() * m - Eigen::MatrixXd::Identity(p, p)).norm() < 1e-9);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(m);
        CHECK(eig.eigenvalues().minCoeff() > 0.0);
      }
    }
  }

  TEST_CASE("sigma assembly validation") {
    const OrthoBasis basis = build_orthobasis(vec({0, 1, 0}));
    CHECK(category_of([&] { assemble_sigma(basis, EigenSpectrum{vec({1, 2, 3})}); }) ==
          ErrorCategory::DimensionMismatch);
    CHECK(category_of([&] { assemble_sigma(basis, EigenSpectrum{vec({1, -2})}); }) ==
          ErrorCategory::NonPositiveEigenvalue);
    CHECK(category_of([] { EigenSpectrum::make(vec({0.0, 1.0})); }) == ErrorCategory::NonPositiveEigenvalue);
  }

  TEST_CASE("sigma is continuous away from pivot switches") {
    Rng rng(23);
    for (int k = 0; k < 100; ++k) {
      const Eigen::Index p = 5;
      const Eigen::VectorXd u = oracle::random_unit(p, rng);
      Eigen::VectorXd v = u + 5e-7 * oracle::random_unit(p, rng);
      v.normalize();
      const OrthoBasis bu = build_orthobasis(u);
      const OrthoBasis bv = build_orthobasis(v);
      if (bu.pivot() != bv.pivot()) continue;
      const Eigen::VectorXd lambda = oracle::random_positive(p - 1, rng);
      const double diff = (assemble_sigma(bu, EigenSpectrum{lambda}).matrix() -
                           assemble_sigma(bv, EigenSpectrum{lambda}).matrix())
                              .norm();
      CHECK(diff < 1e-4 * (1.0 + lambda.maxCoeff()));
    }
  }

  TEST_CASE("mean state validation") {
    CHECK(category_of([] { MeanState::make(vec({1, 1}), 1.0); }) == ErrorCategory::NonUnit);
    CHECK(category_of([] { MeanState::make(vec({1, 0}), -1.0); }) == ErrorCategory::InvalidArgument);
    CHECK(category_of([] { MeanState::from_mu(vec({1e-12, 0})); }) == ErrorCategory::ZeroMean);
    const MeanState m = MeanState::from_mu(vec({3, 4}));
    CHECK(m.c0 == doctest::Approx(5.0));
    CHECK((m.mu() - vec({3, 4})).norm() < 1e-14);
  }

  TEST_CASE("sample set validation") {
    CHECK(category_of([] { SampleSet(Eigen::MatrixXd::Ones(3, 1)); }) == ErrorCategory::DimensionMismatch);
    CHECK(category_of([] { SampleSet(Eigen::MatrixXd(0, 3)); }) == ErrorCategory::TooFewRows);
    Eigen::MatrixXd bad = Eigen::MatrixXd::Ones(3, 2);
    bad(1, 1) = std::nan("");
    CHECK(category_of([&] { SampleSet{bad}; }) == ErrorCategory::InvalidArgument);
    CHECK(category_of([] { require_two_rows(SampleSet(Eigen::MatrixXd::Ones(1, 2))); }) == ErrorCategory::TooFewRows);
  }

  TEST_CASE("sample statistics") {
    Rng rng(2);
    const SampleSet data = random_sample(30, 4, rng);
    CHECK((data.xbar() - data.x().colwise().mean().transpose()).norm() < 1e-13);
    CHECK((data.a0() - oracle::direct_scatter(data.x(), Eigen::VectorXd::Zero(4))).norm() < 1e-10);
    CHECK((data.a_xbar() - oracle::direct_scatter(data.x(), data.xbar())).norm() < 1e-10);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(data.a0());
    CHECK(eig.eigenvalues().minCoeff() >= -1e-10);
    CHECK(data.a0_max_eigenvalue() == doctest::Approx(eig.eigenvalues().maxCoeff()).epsilon(1e-12));
  }

  TEST_CASE("scatter matrix") {
    Rng rng(4);
    const SampleSet data = random_sample(25, 3, rng);
    CHECK((scatter_matrix(data, Eigen::VectorXd::Zero(3)) - data.a0()).norm() < 1e-12);
    for (int k = 0; k < 10; ++k) {
      const Eigen::VectorXd mu = cmcov::standard_normal_vector(3, rng);
      CHECK((scatter_matrix(data, mu) - oracle::direct_scatter(data.x(), mu)).norm() < 1e-10);
    }
    const Eigen::VectorXd mu = vec({0.3, -1.0, 2.0});
    const SampleSet single(mu.transpose());
    CHECK(scatter_matrix(single, mu).norm() < 1e-14);
    CHECK(category_of([&] { scatter_matrix(data, Eigen::VectorXd::Zero(2)); }) == ErrorCategory::DimensionMismatch);
  }

  TEST_CASE("rotated scatter matrix") {
    Rng rng(6);
    const SampleSet data = random_sample(40, 4, rng);
    const Eigen::VectorXd u = oracle::random_unit(4, rng);
    const OrthoBasis basis = build_orthobasis(u);

    const MeanState at_fit{u, u.dot(data.xbar())};
    const Eigen::MatrixXd b = b_matrix(data, at_fit);
    CHECK(std::abs(b(0, 0) - u.dot(data.a_xbar() * u)) < 1e-10 * (1.0 + b(0, 0)));

    for (double c0 : {0.0, 0.7, 3.0}) {
      const MeanState mean{u, c0};
      const Eigen::MatrixXd full = basis.matrix().transpose() * oracle::direct_scatter(data.x(), c0 * u) *
                                   basis.matrix();
      CHECK((b_matrix(data, mean) - full).norm() < 1e-9);
      CHECK((b_diagonal(data, mean, basis) - full.diagonal()).norm() < 1e-9);
    }
    const Eigen::VectorXd d1 = b_diagonal(data, MeanState{u, 0.2}, basis);
    const Eigen::VectorXd d2 = b_diagonal(data, MeanState{u, 5.0}, basis);
    CHECK(d1.tail(3) == d2.tail(3));

    const MeanState point{vec({0.6, 0.8}), 2.0};
    const SampleSet one(point.mu().transpose());
    CHECK(b_matrix(one, point).norm() < 1e-14);
  }

  TEST_CASE("error category names are stable") {
    CHECK(category_name(ErrorCategory::DegenerateData) == "DegenerateData");
    CHECK(category_name(ErrorCategory::ParseError) == "ParseError");
    CHECK(category_name(ErrorCategory::NonConvergence) == "NonConvergence");
  }
}
