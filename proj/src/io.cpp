#include "cmcov/io.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <sstream>

namespace cmcov {

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    fields.push_back(trim(line.substr(start, comma == std::string_view::npos ? std::string_view::npos
                                                                              : comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return fields;
}

// Parses a whole field as a finite double.
std::optional<double> parse_number(std::string_view field) {
  if (field.empty()) return std::nullopt;
  if (field.front() == '+') field.remove_prefix(1);
  double value = 0.0;
  const auto [end, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  if (ec != std::errc() || end != field.data() + field.size() || !std::isfinite(value)) return std::nullopt;
  return value;
}

std::string location(std::size_t line, std::size_t column) {
  return "line " + std::to_string(line) + ", column " + std::to_string(column);
}

}  // namespace

Eigen::MatrixXd parse_csv(std::istream& in, std::vector<std::string>* header) {
  std::vector<std::vector<double>> rows;
  std::size_t width = 0;
  std::size_t line_no = 0;
  bool first_content = true;
  std::string line;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view view(line);
    if (line_no == 1 && view.substr(0, 3) == "\xEF\xBB\xBF") view.remove_prefix(3);
    if (trim(view).empty()) continue;
    const auto fields = split_fields(view);

    if (first_content) {
      first_content = false;
      bool any_numeric = false;
      for (const auto f : fields) any_numeric = any_numeric || parse_number(f).has_value();
      if (!any_numeric) {
        if (header) header->assign(fields.begin(), fields.end());
        width = fields.size();
        continue;
      }
    }
    if (width == 0) width = fields.size();
    if (fields.size() != width) {
      throw Error(ErrorCategory::ParseError, location(line_no, std::min(fields.size(), width) + 1) +
                                                 ": expected " + std::to_string(width) + " fields, found " +
                                                 std::to_string(fields.size()));
    }
    std::vector<double> row(width);
    for (std::size_t c = 0; c < width; ++c) {
      const auto value = parse_number(fields[c]);
      if (!value) {
        throw Error(ErrorCategory::ParseError,
                    location(line_no, c + 1) + ": '" + std::string(fields[c]) + "' is not a finite number");
      }
      row[c] = *value;
    }
    rows.push_back(std::move(row));
  }

  Eigen::MatrixXd x(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(width));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t c = 0; c < width; ++c) {
      x(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
    }
  }
  return x;
}

Eigen::MatrixXd read_csv(const std::string& path, std::vector<std::string>* header) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCategory::IoError, "cannot open '" + path + "'");
  return parse_csv(in, header);
}

SampleSet ingest_csv(const std::string& path) {
  Eigen::MatrixXd x = read_csv(path);
  if (x.rows() < 2) {
    throw Error(ErrorCategory::TooFewRows, "'" + path + "' has " + std::to_string(x.rows()) + " data rows");
  }
  return SampleSet(std::move(x));
}

void write_csv(std::ostream& out, const Eigen::MatrixXd& x, const std::vector<std::string>& header) {
  if (!header.empty()) {
    for (std::size_t c = 0; c < header.size(); ++c) out << (c ? "," : "") << header[c];
    out << '\n';
  }
  char buf[32];
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    for (Eigen::Index c = 0; c < x.cols(); ++c) {
      std::snprintf(buf, sizeof buf, "%.17g", x(r, c));
      out << (c ? "," : "") << buf;
    }
    out << '\n';
  }
}

Eigen::MatrixXd latlong_to_sphere(const Eigen::MatrixXd& latlong) {
  if (latlong.cols() != 2) {
    throw Error(ErrorCategory::DimensionMismatch, "expected two columns (latitude, longitude)");
  }
  constexpr double deg = std::numbers::pi / 180.0;
  Eigen::MatrixXd out(latlong.rows(), 3);
  for (Eigen::Index r = 0; r < latlong.rows(); ++r) {
    const double lat = latlong(r, 0);
    const double lon = latlong(r, 1);
    if (!(lat >= -90.0 && lat <= 90.0)) {
      throw Error(ErrorCategory::RangeError, "row " + std::to_string(r + 1) + ": latitude out of [-90, 90]");
    }
    if (!(lon >= -180.0 && lon < 360.0)) {
      throw Error(ErrorCategory::RangeError, "row " + std::to_string(r + 1) + ": longitude out of [-180, 360)");
    }
    // Exact poles keep x = y = 0 instead of cos(pi/2) ~ 6e-17.
    const double cos_lat = std::abs(lat) == 90.0 ? 0.0 : std::cos(lat * deg);
    out(r, 0) = cos_lat * std::cos(lon * deg);
    out(r, 1) = cos_lat * std::sin(lon * deg);
    out(r, 2) = std::sin(lat * deg);
  }
  return out;
}

Json to_json(const Eigen::VectorXd& v) {
  Json j = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) j.push_back(v[i]);
  return j;
}

Json to_json(const Eigen::MatrixXd& m) {
  Json j = Json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    Json row = Json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    j.push_back(std::move(row));
  }
  return j;
}

namespace {

Json structured_json(const MeanState& mean, const EigenSpectrum& spectrum) {
  const StructuredCovariance sigma = assemble_sigma(build_orthobasis(mean.u), spectrum);
  Json j;
  j["u"] = to_json(mean.u);
  j["c0"] = mean.c0;
  j["mu"] = to_json(mean.mu());
  j["lambda"] = to_json(spectrum.lambda);
  j["sigma"] = to_json(sigma.matrix());
  return j;
}

}  // namespace

Json to_json(const MleFit& fit) {
  Json j;
  j["estimate"] = structured_json(fit.mean, fit.spectrum);
  j["diagnostics"] = {
      {"profile_loglik", fit.profile_loglik_at_fit},
      {"lower_bound", fit.lower_bound_at_fit},
      {"smallest_eigenvalue_a_xbar", fit.smallest_eig_of_a_xbar},
      {"degenerate_direction", fit.degenerate_direction},
      {"zero_mean", fit.zero_mean},
  };
  return j;
}

Json to_json(const MapFit& fit) {
  Json j;
  j["estimate"] = structured_json(fit.mean, fit.spectrum);
  Json trace = Json::array();
  for (double h : fit.h_trace) trace.push_back(h);
  j["diagnostics"] = {
      {"converged", fit.converged},
      {"outer_iterations", fit.outer_iterations},
      {"inner_steps", fit.step_gains.size()},
      {"gradient_fallback_steps", fit.fallback_steps},
      {"h_trace", std::move(trace)},
  };
  return j;
}

Json to_json(const GibbsMap& map, const GibbsRun& run) {
  Json j;
  j["estimate"] = structured_json(map.mean, map.spectrum);
  j["diagnostics"] = {
      {"selected_iteration", map.selected_iteration},
      {"chain_length", run.chain.size()},
      {"proposals", run.proposals},
      {"accepted", run.accepted},
      {"acceptance_rate", run.acceptance_rate()},
  };
  return j;
}

Json to_json(const NiwParams& params, const NiwEstimate& estimate) {
  Json j;
  j["estimate"] = {{"mu", to_json(estimate.mean)}, {"sigma", to_json(estimate.covariance)}};
  j["posterior"] = {
      {"mu_n", to_json(params.mu_n)},
      {"kappa_n", params.kappa_n},
      {"nu_n", params.nu_n},
      {"lambda_n", to_json(params.lambda_n)},
  };
  return j;
}

Json to_json(const RiskReport& report, bool include_timing) {
  auto opt = [](const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); };
  Json j;
  j["n"] = report.n;
  j["p"] = report.p;
  j["estimator"] = report.estimator;
  j["mean_risk"] = report.mean_risk;
  j["sigma_risk"] = report.sigma_risk;
  j["ratio_vs_niw_mean"] = opt(report.ratio_vs_niw_mean);
  j["ratio_vs_niw_sigma"] = opt(report.ratio_vs_niw_sigma);
  j["acceptance_rate"] = opt(report.acceptance_rate);
  j["replications"] = report.replications;
  j["failures"] = report.failures;
  if (include_timing) j["elapsed_seconds"] = report.elapsed_seconds;
  return j;
}

}  // namespace cmcov
