// Command-line front end: valuation, pricing, and verification of data
// production processes for Bayesian linear regression.

#include <cctype>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "datapricer/datapricer.hpp"

namespace {

using namespace datapricer;

constexpr int kExitOk = 0;
constexpr int kExitVerificationFailure = 1;
constexpr int kExitInputError = 2;
constexpr int kExitNumericError = 3;

struct GlobalOptions {
  std::string config_path;
  std::uint64_t seed = 0;
  std::string out_path;
  std::string format = "json";
  double tolerance = kIcDefaultTol;
  bool tolerance_set = false;
};

VectorXd parse_vector(const std::string& text, const std::string& flag) {
  std::vector<double> values;
  std::string current;
  for (const char ch : text + ",") {
    if (ch == ',') {
      if (current.empty()) continue;
      char* end = nullptr;
      const double v = std::strtod(current.c_str(), &end);
      if (end == current.c_str() || *end != '\0') {
        throw ConfigError(flag + ": bad number '" + current + "'");
      }
      values.push_back(v);
      current.clear();
    } else if (!std::isspace(static_cast<unsigned char>(ch))) {
      current.push_back(ch);
    }
  }
  if (values.empty()) throw ConfigError(flag + ": expected comma-separated numbers");
  VectorXd out(static_cast<Eigen::Index>(values.size()));
  for (std::size_t i = 0; i < values.size(); ++i) out[static_cast<Eigen::Index>(i)] = values[i];
  return out;
}

void write_output(const GlobalOptions& global, const std::string& text) {
  if (global.out_path.empty() || global.out_path == "-") {
    std::cout << text;
    if (!text.empty() && text.back() != '\n') std::cout << "\n";
    return;
  }
  std::ofstream out(global.out_path, std::ios::binary);
  if (!out) throw ConfigError("--out: cannot open '" + global.out_path + "'");
  out << text;
}

void emit(const GlobalOptions& global, const json& payload) {
  if (global.format == "json") {
    write_output(global, payload.dump(2) + "\n");
  } else if (global.format == "table") {
    write_output(global, render_table(payload));
  } else {
    throw ConfigError("--format: '" + global.format + "' not supported for this command");
  }
}

GaussianBelief load_prior(const std::string& path, Eigen::Index dimension) {
  if (path.empty()) return GaussianBelief::standard(dimension);
  std::ifstream in(path);
  if (!in) throw ConfigError("--prior: cannot open '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw ConfigError("--prior: " + std::string(e.what()));
  }
  return belief_from_json(j, "prior");
}

struct NoiseFlags {
  double sigma = 1.0;
  std::string sigma_affine;  // "offset,slope_1,...,slope_d"

  NoiseModel model(Eigen::Index dimension) const {
    if (sigma_affine.empty()) return NoiseModel::constant(sigma);
    const VectorXd params = parse_vector(sigma_affine, "--sigma-affine");
    if (params.size() != dimension + 1) {
      throw ConfigError("--sigma-affine: expected offset plus one slope per dimension");
    }
    return NoiseModel::affine(params[0], params.tail(dimension));
  }
};

struct GridFlags {
  std::string kind = "default";
  Eigen::Index count = 0;

  TypeGrid build(Eigen::Index dimension, std::uint64_t seed) const {
    GridSpec spec;
    spec.kind = kind;
    spec.count = count;
    return spec.build(dimension, seed);
  }
};

void add_grid_flags(CLI::App* cmd, GridFlags& flags) {
  cmd->add_option("--grid", flags.kind, "Grid kind: default, mesh, fibonacci, random, basis")
      ->check(CLI::IsMember({"default", "mesh", "fibonacci", "random", "basis"}));
  cmd->add_option("--grid-count", flags.count, "Number of grid points");
}

json error_json(const char* stage, int code, const std::string& message) {
  return json{{"error", json{{"stage", stage}, {"code", code}, {"message", message}}}};
}

int run_cli(int argc, char** argv) {
  CLI::App app{"Instrumental valuation and pricing of data production processes"};
  app.require_subcommand(1);

  GlobalOptions global;
  app.add_option("--config", global.config_path, "Experiment config file (JSON)");
  app.add_option("--seed", global.seed, "Seed for all randomness");
  app.add_option("--out", global.out_path, "Output path (default: stdout)");
  app.add_option("--format", global.format, "Output format: json, csv, table")
      ->check(CLI::IsMember({"json", "csv", "table"}));
  app.add_option("--tolerance", global.tolerance, "Check tolerance override")
      ->each([&](const std::string&) { global.tolerance_set = true; });

  std::string data_path, x_text, report_text, prior_path, beta_text, mechanism_kind;
  std::string plot_kind, plot_out;
  long sample_count = 1;
  long mc_samples = 100000;
  std::size_t path_pairs = 20;
  Eigen::Index dimension = 2;
  NoiseFlags noise;
  GridFlags grid;

  auto add_noise_flags = [&](CLI::App* cmd) {
    cmd->add_option("--sigma", noise.sigma, "Constant noise stddev on the sphere");
    cmd->add_option("--sigma-affine", noise.sigma_affine,
                    "Affine sphere noise: offset,slope_1,...,slope_d");
  };

  auto* value_cmd = app.add_subcommand("value", "Information-gain value of a dataset");
  value_cmd->add_option("--data", data_path, "Dataset CSV")->required();
  value_cmd->add_option("--x", x_text, "Query direction, comma-separated")->required();
  value_cmd->add_option("--prior", prior_path, "Prior belief JSON (default: standard normal)");

  auto* shapley_cmd = app.add_subcommand("shapley", "Exact Data Shapley allocation");
  shapley_cmd->add_option("--data", data_path, "Dataset CSV")->required();
  shapley_cmd->add_option("--x", x_text, "Query direction")->required();
  shapley_cmd->add_option("--prior", prior_path, "Prior belief JSON");

  auto* coupling_cmd =
      app.add_subcommand("coupling-check", "Monte-Carlo check of the KL/entropy coupling");
  coupling_cmd->add_option("--data", data_path, "Dataset CSV")->required();
  coupling_cmd->add_option("--x", x_text, "Query direction")->required();
  coupling_cmd->add_option("--samples", mc_samples, "Monte-Carlo sample count");
  coupling_cmd->add_option("--prior", prior_path, "Prior belief JSON");

  auto* perfect_cmd = app.add_subcommand("price-perfect", "Perfect-customization quote");
  perfect_cmd->add_option("--report", report_text, "Reported direction")->required();
  perfect_cmd->add_option("--n", sample_count, "Number of responses")->required();
  add_noise_flags(perfect_cmd);
  perfect_cmd->add_option("--beta", beta_text, "Ground-truth parameter (generates responses)");

  auto* svd_cmd = app.add_subcommand("price-svd", "SVD-mechanism quote");
  svd_cmd->add_option("--data", data_path, "Dataset CSV")->required();
  svd_cmd->add_option("--report", report_text, "Reported direction")->required();

  auto* mab_cmd = app.add_subcommand("price-mab", "MAB-reduction quote");
  mab_cmd->add_option("--data", data_path, "Dataset CSV")->required();
  mab_cmd->add_option("--report", report_text, "Reported arm (basis vector)")->required();

  auto* fb_cmd = app.add_subcommand("first-best", "First-best revenue benchmark");
  fb_cmd->add_option("--data", data_path, "Dataset CSV")->required();
  fb_cmd->add_option("--x", x_text, "Buyer type")->required();

  auto* kappa_cmd = app.add_subcommand("kappa", "Condition number of the normalized design");
  kappa_cmd->add_option("--data", data_path, "Dataset CSV")->required();

  auto* ic_cmd = app.add_subcommand("verify-ic", "Grid incentive-compatibility audit");
  auto* ir_cmd = app.add_subcommand("verify-ir", "Grid individual-rationality audit");
  for (auto* cmd : {ic_cmd, ir_cmd}) {
    cmd->add_option("--mechanism", mechanism_kind, "perfect or svd")
        ->required()
        ->check(CLI::IsMember({"perfect", "svd"}));
    cmd->add_option("--data", data_path, "Dataset CSV (svd mechanism)");
    cmd->add_option("--n", sample_count, "Responses per report (perfect mechanism)");
    cmd->add_option("--dim", dimension, "Type dimension (perfect mechanism)");
    add_noise_flags(cmd);
    add_grid_flags(cmd, grid);
  }

  auto* regret_cmd = app.add_subcommand("audit-regret", "Regret vs first-best audit");
  regret_cmd->add_option("--data", data_path, "Dataset CSV")->required();
  add_grid_flags(regret_cmd, grid);

  auto* imposs_cmd =
      app.add_subcommand("demo-impossibility", "Witness against full-surplus pricing");
  imposs_cmd->add_option("--data", data_path, "Dataset CSV")->required();
  add_grid_flags(imposs_cmd, grid);

  auto* envelope_cmd = app.add_subcommand("check-envelope", "Payment-gradient envelope check");
  envelope_cmd->add_option("--n", sample_count, "Responses per report")->required();
  envelope_cmd->add_option("--dim", dimension, "Type dimension");
  envelope_cmd->add_option("--paths", path_pairs, "Random path pairs to integrate");
  add_noise_flags(envelope_cmd);
  add_grid_flags(envelope_cmd, grid);

  auto* generate_cmd = app.add_subcommand("generate", "Generate a synthetic dataset CSV");
  auto* run_cmd = app.add_subcommand("run", "Run a configured experiment");
  run_cmd->add_option("--plot", plot_kind,
                      "Emit plot data: regret_profile, payment_profile, surplus_split");
  run_cmd->add_option("--plot-out", plot_out, "Plot CSV path");

  // Global flags may follow the subcommand.
  for (auto* sub : app.get_subcommands([](const CLI::App*) { return true; })) {
    sub->fallthrough();
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help and friends
    std::cerr << error_json("usage", kExitInputError, e.what()).dump() << "\n";
    return kExitInputError;
  }

  if (value_cmd->parsed()) {
    const Dataset data = load_dataset_csv(data_path);
    const VectorXd x = parse_vector(x_text, "--x");
    const ValuationQuery query(load_prior(prior_path, data.dimension()), x);
    const double prior_var = predictive_variance(query.prior, x);
    const MatrixXd posterior = posterior_covariance(query.prior, data);
    emit(global, json{{"value_nats", canonical_value(query, data)},
                      {"prior_predictive_variance", prior_var},
                      {"posterior_predictive_variance", x.dot(posterior * x)}});
    return kExitOk;
  }

  if (shapley_cmd->parsed()) {
    const Dataset data = load_dataset_csv(data_path);
    const VectorXd x = parse_vector(x_text, "--x");
    const ValuationQuery query(load_prior(prior_path, data.dimension()), x);
    const auto allocation = data_shapley(query, data);
    emit(global, json{{"per_datum_value", vector_to_json(allocation.per_datum_value)},
                      {"coalition_value_fn_evals", allocation.coalition_value_fn_evals},
                      {"total_value_nats", allocation.per_datum_value.sum()}});
    return kExitOk;
  }

  if (coupling_cmd->parsed()) {
    const Dataset data = load_dataset_csv(data_path);
    const VectorXd x = parse_vector(x_text, "--x");
    const ValuationQuery query(load_prior(prior_path, data.dimension()), x);
    const auto report = coupling_check(query, data, mc_samples, global.seed);
    emit(global, report_to_json(report));
    return report.pass ? kExitOk : kExitVerificationFailure;
  }

  if (perfect_cmd->parsed()) {
    const VectorXd report = parse_vector(report_text, "--report");
    std::optional<VectorXd> beta;
    if (!beta_text.empty()) beta = parse_vector(beta_text, "--beta");
    const auto quote = perfect_mechanism_quote(report, sample_count,
                                               noise.model(report.size()), beta, global.seed);
    emit(global, quote_to_json(quote));
    return kExitOk;
  }

  if (svd_cmd->parsed()) {
    const Dataset data = load_dataset_csv(data_path);
    const auto prep = svd_mechanism_prepare(data);
    const auto quote = svd_mechanism_quote(prep, data, parse_vector(report_text, "--report"));
    emit(global, quote_to_json(quote));
    return kExitOk;
  }

  if (mab_cmd->parsed()) {
    const Dataset data = load_dataset_csv(data_path);
    const auto quote = mab_mechanism_quote(data, parse_vector(report_text, "--report"));
    emit(global, quote_to_json(quote));
    return kExitOk;
  }

  if (fb_cmd->parsed()) {
    const Dataset data = load_dataset_csv(data_path);
    emit(global, json{{"value_nats", first_best(parse_vector(x_text, "--x"), data)}});
    return kExitOk;
  }

  if (kappa_cmd->parsed()) {
    const auto kappa = condition_number(load_dataset_csv(data_path));
    emit(global, json{{"kappa", kappa.full_rank ? json(kappa.value) : json("inf")},
                      {"full_rank", kappa.full_rank}});
    return kExitOk;
  }

  if (ic_cmd->parsed() || ir_cmd->parsed()) {
    QuoteFn quote_fn;
    Eigen::Index d = dimension;
    if (mechanism_kind == "svd") {
      if (data_path.empty()) throw ConfigError("--data: required for the svd mechanism");
      Dataset data = load_dataset_csv(data_path);
      d = data.dimension();
      quote_fn = svd_quote_fn(std::move(data));
    } else {
      quote_fn = perfect_quote_fn(sample_count, noise.model(d));
    }
    const TypeGrid type_grid = grid.build(d, global.seed);
    const double tol = global.tolerance_set ? global.tolerance : kIcDefaultTol;
    const auto report = ic_cmd->parsed() ? check_ic(quote_fn, type_grid, tol)
                                         : check_ir(quote_fn, type_grid, tol);
    emit(global, report_to_json(report));
    return report.passed ? kExitOk : kExitVerificationFailure;
  }

  if (regret_cmd->parsed()) {
    const Dataset data = load_dataset_csv(data_path);
    const auto report = regret_audit(data, grid.build(data.dimension(), global.seed));
    emit(global, report_to_json(report));
    return report.passed ? kExitOk : kExitVerificationFailure;
  }

  if (imposs_cmd->parsed()) {
    const Dataset data = load_dataset_csv(data_path);
    const auto report = impossibility_demo(data, grid.build(data.dimension(), global.seed));
    emit(global, report_to_json(report));
    const bool conclusive = report.is_isotropic || report.witness_found;
    return conclusive ? kExitOk : kExitVerificationFailure;
  }

  if (envelope_cmd->parsed()) {
    const NoiseModel model = noise.model(dimension);
    const TypeGrid type_grid = grid.build(dimension, global.seed);
    const auto report =
        envelope_gradient_check(model, sample_count, type_grid, path_pairs, global.seed);
    emit(global, report_to_json(report));
    return report.passed ? kExitOk : kExitVerificationFailure;
  }

  if (generate_cmd->parsed()) {
    if (global.config_path.empty()) throw ConfigError("--config: required for generate");
    ExperimentConfig config = ExperimentConfig::load(global.config_path);
    if (app.count("--seed") > 0) config.seed = global.seed;
    write_output(global, dataset_to_csv(generate_synthetic(config)));
    return kExitOk;
  }

  if (run_cmd->parsed()) {
    if (global.config_path.empty()) throw ConfigError("--config: required for run");
    ExperimentConfig config = ExperimentConfig::load(global.config_path);
    if (app.count("--seed") > 0) config.seed = global.seed;
    const auto base_dir = std::filesystem::path(global.config_path).parent_path();
    const RunRecord record = run_experiment(config, base_dir);
    emit(global, record.record);
    const std::string requested_plot = !plot_kind.empty()
                                           ? plot_kind
                                           : config.plot_kind.value_or("");
    if (!requested_plot.empty()) {
      const std::string csv = emit_plot_data(record, requested_plot);
      if (!plot_out.empty()) {
        std::ofstream out(plot_out, std::ios::binary);
        if (!out) throw ConfigError("--plot-out: cannot open '" + plot_out + "'");
        out << csv;
      } else {
        std::cout << csv;
      }
    }
    return record.all_passed ? kExitOk : kExitVerificationFailure;
  }

  return kExitInputError;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run_cli(argc, argv);
  } catch (const ConfigError& e) {
    std::cerr << error_json("input", kExitInputError, e.what()).dump() << "\n";
    return kExitInputError;
  } catch (const std::invalid_argument& e) {
    std::cerr << error_json("input", kExitInputError, e.what()).dump() << "\n";
    return kExitInputError;
  } catch (const NumericError& e) {
    std::cerr << error_json("numeric", kExitNumericError, e.what()).dump() << "\n";
    return kExitNumericError;
  } catch (const std::exception& e) {
    std::cerr << error_json("internal", kExitNumericError, e.what()).dump() << "\n";
    return kExitNumericError;
  }
}
