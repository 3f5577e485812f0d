#include "cmcov/cli.hpp"

#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "cmcov/io.hpp"

namespace cmcov {

namespace {

constexpr Command kCommands[] = {Command::FitMle,      Command::FitMapNewton, Command::FitMapGibbs,
                                 Command::FitNiw,      Command::Simulate,     Command::TransformSphere};

std::string_view mu0_mode_name(Mu0Mode mode) { return mode == Mu0Mode::Zero ? "zero" : "xbar"; }

std::vector<EstimatorKind> parse_estimator_list(const std::string& text) {
  std::vector<EstimatorKind> kinds;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const EstimatorKind kind = parse_estimator(item);
    for (EstimatorKind existing : kinds) {
      if (existing == kind) throw Error(ErrorCategory::ParseError, "estimator '" + item + "' listed twice");
    }
    kinds.push_back(kind);
  }
  if (kinds.empty()) throw Error(ErrorCategory::ParseError, "empty estimator list");
  return kinds;
}

Eigen::MatrixXd load_input(const RunConfig& config) {
  if (!config.input_path) throw Error(ErrorCategory::InvalidArgument, "an input CSV path is required");
  Eigen::MatrixXd x = read_csv(*config.input_path);
  if (config.latlong) x = latlong_to_sphere(x);
  return x;
}

SampleSet load_samples(const RunConfig& config) {
  Eigen::MatrixXd x = load_input(config);
  if (x.rows() < 2) {
    throw Error(ErrorCategory::TooFewRows, "input has " + std::to_string(x.rows()) + " data rows");
  }
  return SampleSet(std::move(x));
}

Json prior_echo(const EstimatorSettings& s, std::optional<Eigen::Index> p) {
  Json j;
  j["kappa0"] = s.kappa0.value_or(1.5);
  if (s.a) {
    j["a"] = *s.a;
  } else if (p) {
    j["a"] = static_cast<double>(*p) + 1.0;
  } else {
    j["a"] = "p+1";
  }
  j["h0"] = s.h0_scalar.value_or(1.0);
  j["mu0"] = mu0_mode_name(s.mu0_mode);
  return j;
}

Json config_echo(const RunConfig& c, std::optional<Eigen::Index> p) {
  Json j;
  j["command"] = command_name(c.command);
  j["input"] = c.input_path ? Json(*c.input_path) : Json(nullptr);
  j["latlong"] = c.latlong;
  j["seed"] = c.seed;
  if (c.command == Command::TransformSphere) return j;
  j["prior"] = prior_echo(c.settings, p);
  j["niw_prior"] = {{"kappa0", c.settings.kappa0.value_or(1.5)},
                    {"nu0", p ? Json(static_cast<double>(*p) + 1.0) : Json("p+1")},
                    {"lambda0", "identity"},
                    {"mu0", mu0_mode_name(c.settings.mu0_mode)}};
  j["gibbs"] = {{"s", c.settings.gibbs.samples},
                {"l", c.settings.gibbs.mh_steps},
                {"burn_in", c.settings.gibbs.burn_in}};
  j["newton"] = {{"alpha", c.settings.newton.alpha},
                 {"epsilon", c.settings.newton.epsilon},
                 {"max_outer", c.settings.newton.max_outer},
                 {"max_inner", c.settings.newton.max_inner},
                 {"max_backtracks", c.settings.newton.max_backtracks}};
  if (c.command == Command::Simulate) {
    Json grid = Json::array();
    for (const auto& [n, pp] : c.grid) grid.push_back({{"n", n}, {"p", pp}});
    Json estimators = Json::array();
    for (EstimatorKind kind : c.estimators) estimators.push_back(estimator_name(kind));
    j["simulate"] = {{"grid", std::move(grid)},
                     {"estimators", std::move(estimators)},
                     {"reps", c.reps},
                     {"fix_truth", c.fix_truth},
                     {"gibbs_all_p", c.gibbs_all_p},
                     {"projection", projection_name(c.projection)},
                     {"unit_determinant", c.unit_determinant}};
  }
  return j;
}

std::string format_fit_summary(const Json& doc) {
  std::ostringstream out;
  out << doc["config"]["command"].get<std::string>() << " (n = "
      << doc["data"]["n"].get<long>() << ", p = " << doc["data"]["p"].get<long>() << ")\n";
  const Json& est = doc["result"]["estimate"];
  auto vec = [&](const char* label, const Json& v) {
    out << "  " << label;
    char buf[32];
    for (const auto& x : v) {
      std::snprintf(buf, sizeof buf, " %12.6g", x.get<double>());
      out << buf;
    }
    out << '\n';
  };
  if (est.contains("u")) {
    vec("u      ", est["u"]);
    char buf[64];
    std::snprintf(buf, sizeof buf, "  c0      %12.6g\n", est["c0"].get<double>());
    out << buf;
    vec("lambda ", est["lambda"]);
  }
  vec("mu     ", est["mu"]);
  out << "  sigma\n";
  for (const auto& row : est["sigma"]) vec("       ", row);
  for (const auto& [key, value] : doc["result"]["diagnostics"].items()) {
    if (value.is_array()) continue;
    out << "  " << key << ": " << value.dump() << '\n';
  }
  return out.str();
}

void emit(const RunConfig& config, const Json& doc, const std::string& table, std::ostream& out) {
  const std::string text = doc.dump(2) + "\n";
  if (config.output_path) {
    std::ofstream file(*config.output_path);
    if (!file) throw Error(ErrorCategory::IoError, "cannot write '" + *config.output_path + "'");
    file << text;
  }
  out << (config.format == OutputFormat::Json ? text : table);
}

int run_transform(const RunConfig& config, std::ostream& out) {
  if (!config.input_path) throw Error(ErrorCategory::InvalidArgument, "an input CSV path is required");
  const Eigen::MatrixXd xyz = latlong_to_sphere(read_csv(*config.input_path));
  if (config.output_path) {
    std::ofstream file(*config.output_path);
    if (!file) throw Error(ErrorCategory::IoError, "cannot write '" + *config.output_path + "'");
    write_csv(file, xyz, {"x", "y", "z"});
  } else {
    write_csv(out, xyz, {"x", "y", "z"});
  }
  return 0;
}

int run_simulate(const RunConfig& config, std::ostream& out) {
  ExperimentConfig exp;
  exp.grid = config.grid;
  exp.estimators = config.estimators;
  exp.reps = config.reps;
  exp.seed = config.seed;
  exp.threads = config.threads;
  exp.fix_truth_per_cell = config.fix_truth;
  exp.gibbs_all_p = config.gibbs_all_p;
  exp.projection = config.projection;
  exp.unit_determinant = config.unit_determinant;
  exp.settings = config.settings;
  const std::vector<RiskReport> reports = run_experiment(exp);

  Json doc;
  doc["config"] = config_echo(config, std::nullopt);
  doc["seed"] = config.seed;
  Json rows = Json::array();
  for (const RiskReport& r : reports) rows.push_back(to_json(r, !config.omit_timing));
  doc["result"] = {{"reports", std::move(rows)}};
  emit(config, doc, format_risk_table(reports), out);
  return 0;
}

int run_fit(const RunConfig& config, std::ostream& out, std::ostream& err) {
  const SampleSet data = load_samples(config);
  Json doc;
  doc["config"] = config_echo(config, data.p());
  doc["seed"] = config.seed;
  doc["data"] = {{"n", data.n()}, {"p", data.p()}};

  int status = 0;
  switch (config.command) {
    case Command::FitMle:
      doc["result"] = to_json(fit_mle(data));
      break;
    case Command::FitMapNewton: {
      const MapFit fit = fit_map_newton(data, make_prior(data, config.settings), config.settings.newton);
      doc["result"] = to_json(fit);
      if (!fit.converged) status = exit_code_for(ErrorCategory::NonConvergence);
      break;
    }
    case Command::FitMapGibbs: {
      const PriorConfig prior = make_prior(data, config.settings);
      Rng rng(config.seed);
      const GibbsRun run = run_gibbs(data, prior, config.settings.gibbs, rng);
      const GibbsMap map = map_from_chain(run.chain, data, prior);
      doc["result"] = to_json(map, run);
      if (config.chain_path) {
        std::ofstream file(*config.chain_path);
        if (!file) throw Error(ErrorCategory::IoError, "cannot write '" + *config.chain_path + "'");
        file << chain_to_jsonl(run.chain);
      }
      break;
    }
    case Command::FitNiw: {
      const NiwParams params = niw_posterior(data, make_niw_prior(data, config.settings));
      doc["result"] = to_json(params, niw_map(params, data.p()));
      break;
    }
    default:
      throw Error(ErrorCategory::InvalidArgument, "not a fit command");
  }
  emit(config, doc, format_fit_summary(doc), out);
  if (status != 0) {
    Json record = {{"error", {{"category", category_name(ErrorCategory::NonConvergence)},
                              {"message", "Newton iteration limit reached before convergence"}}}};
    err << record.dump() << '\n';
  }
  return status;
}

}  // namespace

std::string_view command_name(Command command) {
  switch (command) {
    case Command::FitMle: return "fit-mle";
    case Command::FitMapNewton: return "fit-map-newton";
    case Command::FitMapGibbs: return "fit-map-gibbs";
    case Command::FitNiw: return "fit-niw";
    case Command::Simulate: return "simulate";
    case Command::TransformSphere: return "transform-sphere";
  }
  return "unknown";
}

std::vector<std::pair<Eigen::Index, Eigen::Index>> parse_grid(const std::string& text) {
  std::vector<std::pair<Eigen::Index, Eigen::Index>> grid;
  std::stringstream ss(text);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    const auto x = cell.find('x');
    long n = 0;
    long p = 0;
    std::size_t used_n = 0;
    std::size_t used_p = 0;
    try {
      if (x == std::string::npos) throw std::invalid_argument(cell);
      n = std::stol(cell.substr(0, x), &used_n);
      p = std::stol(cell.substr(x + 1), &used_p);
    } catch (const std::exception&) {
      throw Error(ErrorCategory::ParseError, "grid cell '" + cell + "' is not of the form NxP");
    }
    if (used_n != x || used_p != cell.size() - x - 1) {
      throw Error(ErrorCategory::ParseError, "grid cell '" + cell + "' is not of the form NxP");
    }
    if (n < 2 || p < 2) throw Error(ErrorCategory::ParseError, "grid cell '" + cell + "' needs n >= 2, p >= 2");
    grid.emplace_back(n, p);
  }
  if (grid.empty()) throw Error(ErrorCategory::ParseError, "empty grid");
  return grid;
}

std::optional<RunConfig> parse_args(const std::vector<std::string>& args, std::ostream& out) {
  RunConfig config;
  CLI::App app{"Joint mean-covariance estimation when the mean is an eigenvector of the covariance"};
  app.name("cmcov");
  app.require_subcommand(1);

  std::string grid_text;
  std::string estimators_text;
  std::string projection_text = "orthogonal";
  std::string format_text = "json";
  std::string mu0_text = "xbar";
  double kappa0 = 0.0;
  double a = 0.0;
  double h0 = 0.0;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--seed", config.seed, "Random seed")->capture_default_str();
    sub->add_option("--out", config.output_path, "Write the result document here");
    sub->add_option("--format", format_text, "Standard output format")
        ->check(CLI::IsMember({"json", "table"}))
        ->capture_default_str();
  };
  auto add_prior = [&](CLI::App* sub) {
    sub->add_option("--prior-kappa0", kappa0, "Prior precision scale kappa0 (default 1.5)")
        ->check(CLI::NonNegativeNumber);
    sub->add_option("--prior-a", a, "Inverse-gamma shape parameter a (default p + 1)");
    sub->add_option("--prior-h0", h0, "H0 = diag(1, h, ..., h) (default 1)")->check(CLI::NonNegativeNumber);
    sub->add_option("--prior-mu0", mu0_text, "Prior mean: xbar or zero")
        ->check(CLI::IsMember({"xbar", "zero"}))
        ->capture_default_str();
  };
  auto add_gibbs = [&](CLI::App* sub) {
    sub->add_option("--gibbs-s", config.settings.gibbs.samples, "Gibbs samples s")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    sub->add_option("--gibbs-l", config.settings.gibbs.mh_steps, "MH steps per Gibbs sweep l")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    sub->add_option("--gibbs-burn-in", config.settings.gibbs.burn_in, "Discarded initial sweeps")
        ->capture_default_str();
  };
  auto add_newton = [&](CLI::App* sub) {
    sub->add_option("--newton-alpha", config.settings.newton.alpha, "Backtracking factor in (0, 1)")
        ->capture_default_str();
    sub->add_option("--newton-eps", config.settings.newton.epsilon, "Step-size stopping threshold")
        ->capture_default_str();
    sub->add_option("--newton-max-outer", config.settings.newton.max_outer, "Outer iteration limit")
        ->capture_default_str();
  };
  auto add_fit = [&](const char* name, const char* description) {
    CLI::App* sub = app.add_subcommand(name, description);
    sub->add_option("input", config.input_path, "CSV file, one observation per row")->required();
    sub->add_flag("--latlong", config.latlong, "Input columns are latitude, longitude in degrees");
    add_common(sub);
    return sub;
  };

  add_fit("fit-mle", "Closed-form approximate MLE");
  CLI::App* newton_cmd = add_fit("fit-map-newton", "MAP via Newton ascent on the posterior lower bound");
  add_prior(newton_cmd);
  add_newton(newton_cmd);
  CLI::App* gibbs_cmd = add_fit("fit-map-gibbs", "MAP from an MH-within-Gibbs chain");
  add_prior(gibbs_cmd);
  add_gibbs(gibbs_cmd);
  gibbs_cmd->add_option("--chain-out", config.chain_path, "Write the chain as JSON lines");
  CLI::App* niw_cmd = add_fit("fit-niw", "Normal-inverse-Wishart posterior mode");
  niw_cmd->add_option("--prior-kappa0", kappa0, "Prior precision scale kappa0 (default 1.5)")
      ->check(CLI::PositiveNumber);
  niw_cmd->add_option("--prior-mu0", mu0_text, "Prior mean: xbar or zero")
      ->check(CLI::IsMember({"xbar", "zero"}))
      ->capture_default_str();

  CLI::App* sim_cmd = app.add_subcommand("simulate", "Monte Carlo risk comparison");
  add_common(sim_cmd);
  add_prior(sim_cmd);
  add_gibbs(sim_cmd);
  add_newton(sim_cmd);
  sim_cmd->add_option("--reps", config.reps, "Replications per cell")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  sim_cmd->add_option("--grid", grid_text, "Cells as n1xp1,n2xp2,... (default 50x3,100x3,50x5)");
  sim_cmd->add_option("--estimators", estimators_text, "Subset of mle,map-newton,map-gibbs,niw");
  sim_cmd->add_option("--threads", config.threads, "Worker threads (0 = all cores)")->capture_default_str();
  sim_cmd->add_flag("--fix-truth", config.fix_truth, "Draw one truth per cell instead of per replication");
  sim_cmd->add_flag("--gibbs-all-p", config.gibbs_all_p, "Run the Gibbs estimator for p > 5 too");
  sim_cmd->add_option("--projection", projection_text, "Truth construction: orthogonal or spectral")
      ->check(CLI::IsMember({"orthogonal", "spectral"}))
      ->capture_default_str();
  sim_cmd->add_flag("--unit-det", config.unit_determinant, "Rescale each truth so that det Sigma = 1");
  sim_cmd->add_flag("--omit-timing", config.omit_timing, "Leave elapsed seconds out of the document");

  CLI::App* sphere_cmd = app.add_subcommand("transform-sphere", "Latitude/longitude CSV to unit vectors");
  sphere_cmd->add_option("input", config.input_path, "CSV with latitude, longitude columns")->required();
  sphere_cmd->add_option("--out", config.output_path, "Write the CSV here");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return std::nullopt;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return std::nullopt;
  } catch (const CLI::ParseError& e) {
    throw Error(ErrorCategory::ParseError, e.what());
  }
  for (const CLI::App* sub : app.get_subcommands()) {
    for (Command command : kCommands) {
      if (sub->get_name() == command_name(command)) config.command = command;
    }
    auto given = [sub](const char* name) {
      const CLI::Option* opt = sub->get_option_no_throw(name);
      return opt != nullptr && opt->count() > 0;
    };
    if (given("--prior-kappa0")) config.settings.kappa0 = kappa0;
    if (given("--prior-a")) config.settings.a = a;
    if (given("--prior-h0")) config.settings.h0_scalar = h0;
    if (given("--grid")) config.grid = parse_grid(grid_text);
    if (given("--estimators")) config.estimators = parse_estimator_list(estimators_text);
  }
  config.format = format_text == "table" ? OutputFormat::Table : OutputFormat::Json;
  config.settings.mu0_mode = mu0_text == "zero" ? Mu0Mode::Zero : Mu0Mode::SampleMean;
  config.projection = parse_projection(projection_text);
  config.settings.newton.validate();
  return config;
}

int exit_code_for(ErrorCategory category) {
  switch (category) {
    case ErrorCategory::ParseError:
    case ErrorCategory::InvalidArgument:
    case ErrorCategory::RangeError:
    case ErrorCategory::TooFewRows:
    case ErrorCategory::IoError:
    case ErrorCategory::DimensionMismatch:
      return 2;
    case ErrorCategory::NonConvergence:
      return 4;
    default:
      return 3;
  }
}

int run(const RunConfig& config, std::ostream& out, std::ostream& err) {
  switch (config.command) {
    case Command::TransformSphere: return run_transform(config, out);
    case Command::Simulate: return run_simulate(config, out);
    default: return run_fit(config, out, err);
  }
}

int cli_main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  try {
    const std::optional<RunConfig> config = parse_args(args, out);
    if (!config) return 0;
    return run(*config, out, err);
  } catch (const Error& e) {
    const Json record = {{"error", {{"category", category_name(e.category())}, {"message", e.what()}}}};
    err << record.dump() << '\n';
    return exit_code_for(e.category());
  }
}

}  // namespace cmcov
