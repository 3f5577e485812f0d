#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>

#include "cmcov/io.hpp"
#include "oracles.hpp"

using namespace cmcov;

namespace {

std::optional<ErrorCategory> parse_failure(const std::string& text, std::string* message = nullptr) {
  std::istringstream in(text);
  try {
    parse_csv(in);
  } catch (const Error& e) {
    if (message) *message = e.what();
    return e.category();
  }
  return std::nullopt;
}

}  // namespace

TEST_SUITE("io") {
  TEST_CASE("well-formed CSV") {
    std::istringstream in("1.5,2\n-3,4e-1\n+5,6\n");
    const Eigen::MatrixXd x = parse_csv(in);
    REQUIRE(x.rows() == 3);
    REQUIRE(x.cols() == 2);
    CHECK(x(0, 0) == 1.5);
    CHECK(x(1, 1) == 0.4);
    CHECK(x(2, 0) == 5.0);
    CHECK(SampleSet(x).n() == 3);
    CHECK(SampleSet(x).p() == 2);
  }

  TEST_CASE("header, blank lines and byte order mark") {
    std::istringstream in("\xEF\xBB\xBFlat,lon\n\n10,20\n 30 , 40 \n\n");
    std::vector<std::string> header;
    const Eigen::MatrixXd x = parse_csv(in, &header);
    REQUIRE(header.size() == 2);
    CHECK(header[0] == "lat");
    CHECK(header[1] == "lon");
    CHECK(x.rows() == 2);
    CHECK(x(1, 1) == 40.0);
  }

  TEST_CASE("malformed cells name their location") {
    std::string message;
    CHECK(parse_failure("1,2\n3,NaN\n", &message) == ErrorCategory::ParseError);
    CHECK(message.find("line 2, column 2") != std::string::npos);
    CHECK(parse_failure("1,2\ninf,4\n", &message) == ErrorCategory::ParseError);
    CHECK(message.find("line 2, column 1") != std::string::npos);
    CHECK(parse_failure("1,2\n3,x\n", &message) == ErrorCategory::ParseError);
    CHECK(parse_failure("1,2\n3\n", &message) == ErrorCategory::ParseError);
    CHECK(message.find("line 2") != std::string::npos);
    CHECK(parse_failure("1,2\n3,4,5\n") == ErrorCategory::ParseError);
    CHECK(parse_failure("1,2\n3,4abc\n") == ErrorCategory::ParseError);
    std::istringstream empty("");
    CHECK(parse_csv(empty).rows() == 0);
  }

  TEST_CASE("write then parse round trip") {
    Rng rng(1);
    Eigen::MatrixXd x(20, 4);
    for (Eigen::Index i = 0; i < x.rows(); ++i) x.row(i) = 1e3 * cmcov::standard_normal_vector(4, rng).transpose();
    x(0, 0) = 1e-300;
    x(1, 1) = -0.1;
    std::stringstream buffer;
    write_csv(buffer, x, {"a", "b", "c", "d"});
    std::vector<std::string> header;
    const Eigen::MatrixXd back = parse_csv(buffer, &header);
    CHECK(header.size() == 4);
    REQUIRE(back.rows() == 20);
    for (Eigen::Index i = 0; i < x.rows(); ++i)
      for (Eigen::Index j = 0; j < x.cols(); ++j) CHECK(std::abs(back(i, j) - x(i, j)) <= 1e-15 * std::abs(x(i, j)));
  }

  TEST_CASE("file ingestion") {
    const auto dir = std::filesystem::temp_directory_path() / "cmcov_io_test";
    std::filesystem::create_directories(dir);
    const std::string one_row = (dir / "one.csv").string();
    std::ofstream(one_row) << "1,2,3\n";
    bool too_few = false;
    try {
      ingest_csv(one_row);
    } catch (const Error& e) {
      too_few = e.category() == ErrorCategory::TooFewRows;
    }
    CHECK(too_few);

    bool missing = false;
    try {
      ingest_csv((dir / "absent.csv").string());
    } catch (const Error& e) {
      missing = e.category() == ErrorCategory::IoError;
    }
    CHECK(missing);

    const std::string good = (dir / "good.csv").string();
    std::ofstream(good) << "x,y\n1,2\n3,4\n";
    CHECK(ingest_csv(good).n() == 2);
    std::filesystem::remove_all(dir);
  }

  TEST_CASE("latitude and longitude to the unit sphere") {
    Eigen::MatrixXd ll(4, 2);
    ll << 90, 123, 0, 0, -90, -45, 0, 90;
    const Eigen::MatrixXd s = latlong_to_sphere(ll);
    CHECK((s.row(0) - Eigen::RowVector3d(0, 0, 1)).norm() < 1e-15);
    CHECK((s.row(1) - Eigen::RowVector3d(1, 0, 0)).norm() < 1e-15);
    CHECK((s.row(2) - Eigen::RowVector3d(0, 0, -1)).norm() < 1e-15);
    CHECK((s.row(3) - Eigen::RowVector3d(0, 1, 0)).norm() < 1e-15);

    Rng rng(2);
    std::uniform_real_distribution<double> lat(-90.0, 90.0);
    std::uniform_real_distribution<double> lon(-180.0, 360.0);
    Eigen::MatrixXd many(1000, 2);
    for (Eigen::Index i = 0; i < 1000; ++i) many.row(i) << lat(rng), lon(rng);
    const Eigen::MatrixXd unit = latlong_to_sphere(many);
    for (Eigen::Index i = 0; i < 1000; ++i) CHECK(std::abs(unit.row(i).norm() - 1.0) < 1e-12);

    auto category = [](const Eigen::MatrixXd& m) -> std::optional<ErrorCategory> {
      try {
        latlong_to_sphere(m);
      } catch (const Error& e) {
        return e.category();
      }
      return std::nullopt;
    };
    CHECK(category(Eigen::RowVector2d(91, 0)) == ErrorCategory::RangeError);
    CHECK(category(Eigen::RowVector2d(0, 360)) == ErrorCategory::RangeError);
    CHECK(category(Eigen::RowVector2d(0, -180.5)) == ErrorCategory::RangeError);
    CHECK(category(Eigen::MatrixXd::Zero(2, 3)) == ErrorCategory::DimensionMismatch);
  }

  TEST_CASE("json records") {
    Eigen::MatrixXd m(2, 2);
    m << 1, 2, 3, 4;
    const Json j = to_json(m);
    CHECK(j.dump() == "[[1.0,2.0],[3.0,4.0]]");
    CHECK(to_json(Eigen::VectorXd(Eigen::VectorXd::Ones(2))).dump() == "[1.0,1.0]");

    RiskReport report;
    report.n = 50;
    report.p = 3;
    report.estimator = "mle";
    report.elapsed_seconds = 1.25;
    CHECK(to_json(report, true).contains("elapsed_seconds"));
    CHECK_FALSE(to_json(report, false).contains("elapsed_seconds"));
  }
}
