#pragma once

// CSV ingestion, spherical coordinates and JSON records for estimates.

#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "cmcov/bayes_gibbs.hpp"
#include "cmcov/bayes_map.hpp"
#include "cmcov/core_model.hpp"
#include "cmcov/mle.hpp"
#include "cmcov/niw.hpp"
#include "cmcov/simulation.hpp"

namespace cmcov {

using Json = nlohmann::ordered_json;

/// Comma-separated numeric matrix. A first row in which no field is numeric
/// is treated as a header. Blank lines are skipped. Rejects NaN/Inf and
/// ragged rows with ParseError naming the 1-based line and column.
Eigen::MatrixXd parse_csv(std::istream& in, std::vector<std::string>* header = nullptr);
Eigen::MatrixXd read_csv(const std::string& path, std::vector<std::string>* header = nullptr);

/// read_csv followed by SampleSet construction; TooFewRows when n < 2.
SampleSet ingest_csv(const std::string& path);

/// Writes with 17 significant digits so that parse_csv round-trips exactly.
void write_csv(std::ostream& out, const Eigen::MatrixXd& x, const std::vector<std::string>& header = {});

/// Rows of (latitude, longitude) in degrees to unit vectors
/// (cos lat cos lon, cos lat sin lon, sin lat). RangeError outside
/// lat in [-90, 90], lon in [-180, 360).
Eigen::MatrixXd latlong_to_sphere(const Eigen::MatrixXd& latlong);

Json to_json(const Eigen::VectorXd& v);
Json to_json(const Eigen::MatrixXd& m);
Json to_json(const MleFit& fit);
Json to_json(const MapFit& fit);
Json to_json(const GibbsMap& map, const GibbsRun& run);
Json to_json(const NiwParams& params, const NiwEstimate& estimate);
Json to_json(const RiskReport& report, bool include_timing = true);

}  // namespace cmcov
