#pragma once

// Command-line front end: argument parsing, dispatch and result documents.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "cmcov/errors.hpp"
#include "cmcov/simulation.hpp"

namespace cmcov {

enum class Command { FitMle, FitMapNewton, FitMapGibbs, FitNiw, Simulate, TransformSphere };

std::string_view command_name(Command command);

enum class OutputFormat { Json, Table };

struct RunConfig {
  Command command = Command::FitMle;
  std::optional<std::string> input_path;
  std::optional<std::string> output_path;
  std::optional<std::string> chain_path;
  std::uint64_t seed = 1;
  OutputFormat format = OutputFormat::Json;
  // Input columns are (latitude, longitude) in degrees; converted to the unit
  // sphere before fitting.
  bool latlong = false;
  bool omit_timing = false;

  EstimatorSettings settings;

  std::vector<std::pair<Eigen::Index, Eigen::Index>> grid{{50, 3}, {100, 3}, {50, 5}};
  std::vector<EstimatorKind> estimators{EstimatorKind::Mle, EstimatorKind::MapNewton, EstimatorKind::MapGibbs,
                                        EstimatorKind::Niw};
  std::size_t reps = 100;
  std::size_t threads = 0;
  bool fix_truth = false;
  bool gibbs_all_p = false;
  TruthProjection projection = TruthProjection::Orthogonal;
  bool unit_determinant = false;
};

/// "50x3,100x5" -> {(50, 3), (100, 5)}. ParseError on malformed input.
std::vector<std::pair<Eigen::Index, Eigen::Index>> parse_grid(const std::string& text);

/// Parses argv (without the program name). Returns nullopt after writing help
/// text to `out`; throws Error(ParseError) on invalid arguments.
std::optional<RunConfig> parse_args(const std::vector<std::string>& args, std::ostream& out);

/// 0 success, 2 parse/config error, 3 numeric failure, 4 non-convergence.
int exit_code_for(ErrorCategory category);

/// Executes the command. The result document goes to --out when given; stdout
/// receives the document (json) or a readable summary (table). Failures are
/// reported on `err` as a one-line JSON error record.
int run(const RunConfig& config, std::ostream& out, std::ostream& err);

/// parse_args + run with error handling; what main() calls.
int cli_main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace cmcov
