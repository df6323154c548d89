#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "datapricer/io.hpp"

#ifndef DATAPRICER_VERSION
#define DATAPRICER_VERSION "0.0.0"
#endif

namespace datapricer {

inline constexpr const char* kToolVersion = DATAPRICER_VERSION;

// Noise specification shared by dataset construction (per-record stddev) and
// mechanisms that evaluate noise as a function of direction.
struct NoiseSpec {
  enum class Kind { kConstant, kPerRow, kSphere };
  Kind kind = Kind::kConstant;
  double stddev = 1.0;
  std::vector<double> per_row;
  std::string sphere_id;          // "constant" or "affine"
  std::vector<double> params;

  static NoiseSpec parse(const json& j, const std::string& field) {
    NoiseSpec spec;
    if (!j.is_object() || !j.contains("kind")) {
      throw ConfigError(field + ": expected an object with a \"kind\"");
    }
    const std::string kind = j["kind"].get<std::string>();
    if (kind == "constant") {
      spec.kind = Kind::kConstant;
      if (!j.contains("stddev") || !j["stddev"].is_number()) {
        throw ConfigError(field + ".stddev: required number");
      }
      spec.stddev = j["stddev"].get<double>();
      if (!(spec.stddev > 0.0)) throw ConfigError(field + ".stddev: must be positive");
    } else if (kind == "per_row") {
      spec.kind = Kind::kPerRow;
      if (!j.contains("stddev") || !j["stddev"].is_array()) {
        throw ConfigError(field + ".stddev: required array");
      }
      for (const auto& v : j["stddev"]) {
        if (!v.is_number() || !(v.get<double>() > 0.0)) {
          throw ConfigError(field + ".stddev: entries must be positive numbers");
        }
        spec.per_row.push_back(v.get<double>());
      }
    } else if (kind == "sphere") {
      spec.kind = Kind::kSphere;
      if (!j.contains("id")) throw ConfigError(field + ".id: required");
      spec.sphere_id = j["id"].get<std::string>();
      if (j.contains("params")) {
        for (const auto& v : j["params"]) spec.params.push_back(v.get<double>());
      }
      if (spec.sphere_id != "constant" && spec.sphere_id != "affine") {
        throw ConfigError(field + ".id: expected \"constant\" or \"affine\"");
      }
      if (spec.sphere_id == "constant" && spec.params.size() != 1) {
        throw ConfigError(field + ".params: constant takes exactly one parameter");
      }
    } else {
      throw ConfigError(field + ".kind: expected constant, per_row, or sphere");
    }
    return spec;
  }

  // Direction-dependent form; per-row specs have no such interpretation.
  NoiseModel to_model(Eigen::Index dimension, const std::string& field) const {
    switch (kind) {
      case Kind::kConstant:
        return NoiseModel::constant(stddev);
      case Kind::kSphere: {
        if (sphere_id == "constant") return NoiseModel::constant(params[0]);
        if (params.size() != static_cast<std::size_t>(dimension) + 1) {
          throw ConfigError(field + ".params: affine takes offset plus one slope per dimension");
        }
        VectorXd slope(dimension);
        for (Eigen::Index i = 0; i < dimension; ++i) {
          slope[i] = params[static_cast<std::size_t>(i) + 1];
        }
        return NoiseModel::affine(params[0], slope);
      }
      case Kind::kPerRow:
        throw ConfigError(field + ": per-row noise is not a function of direction");
    }
    throw ConfigError(field + ": unreachable");
  }

  VectorXd row_stddevs(const MatrixXd& features, const std::string& field) const {
    const Eigen::Index n = features.rows();
    switch (kind) {
      case Kind::kConstant:
        return VectorXd::Constant(n, stddev);
      case Kind::kPerRow: {
        if (static_cast<Eigen::Index>(per_row.size()) != n) {
          throw ConfigError(field + ".stddev: length must equal the record count");
        }
        VectorXd out(n);
        for (Eigen::Index i = 0; i < n; ++i) out[i] = per_row[static_cast<std::size_t>(i)];
        return out;
      }
      case Kind::kSphere: {
        const NoiseModel model = to_model(features.cols(), field);
        VectorXd out(n);
        for (Eigen::Index i = 0; i < n; ++i) out[i] = model.stddev(features.row(i).transpose());
        return out;
      }
    }
    throw ConfigError(field + ": unreachable");
  }
};

struct GridSpec {
  std::string kind = "default";  // default | mesh | fibonacci | random | basis
  Eigen::Index count = 0;

  static GridSpec parse(const json& j, const std::string& field) {
    GridSpec spec;
    if (!j.is_object() || !j.contains("kind")) {
      throw ConfigError(field + ": expected an object with a \"kind\"");
    }
    spec.kind = j["kind"].get<std::string>();
    if (j.contains("count")) spec.count = j["count"].get<Eigen::Index>();
    if (spec.kind != "default" && spec.kind != "mesh" && spec.kind != "fibonacci" &&
        spec.kind != "random" && spec.kind != "basis") {
      throw ConfigError(field + ".kind: expected default, mesh, fibonacci, random, or basis");
    }
    return spec;
  }

  TypeGrid build(Eigen::Index dimension, std::uint64_t seed) const {
    if (kind == "mesh") {
      if (dimension != 2) throw ConfigError("grid: mesh grids require dimension 2");
      return TypeGrid::angular_mesh(count > 0 ? count : 720);
    }
    if (kind == "fibonacci") {
      if (dimension != 3) throw ConfigError("grid: fibonacci grids require dimension 3");
      return TypeGrid::fibonacci_sphere(count > 0 ? count : 1000);
    }
    if (kind == "random") {
      return TypeGrid::uniform_random(dimension, count > 0 ? count : 2048, seed);
    }
    if (kind == "basis") {
      std::vector<VectorXd> points;
      for (Eigen::Index j = 0; j < dimension; ++j) points.push_back(VectorXd::Unit(dimension, j));
      return TypeGrid::explicit_points(std::move(points));
    }
    return TypeGrid::default_for_dimension(dimension, seed);
  }
};

struct MechanismSpec {
  std::string kind = "none";  // none | perfect | svd | mab
  long sample_count = 1;

  static MechanismSpec parse(const json& j, const std::string& field) {
    MechanismSpec spec;
    if (!j.is_object() || !j.contains("kind")) {
      throw ConfigError(field + ": expected an object with a \"kind\"");
    }
    spec.kind = j["kind"].get<std::string>();
    if (spec.kind != "perfect" && spec.kind != "svd" && spec.kind != "mab") {
      throw ConfigError(field + ".kind: expected perfect, svd, or mab");
    }
    if (j.contains("n")) {
      spec.sample_count = j["n"].get<long>();
      if (spec.sample_count < 0) throw ConfigError(field + ".n: must be nonnegative");
    }
    return spec;
  }
};

// A fully validated experiment description. The seed determines every random
// draw the run makes; the canonical serialization is hashed into the record.
struct ExperimentConfig {
  Eigen::Index dimension = 0;
  std::uint64_t seed = 0;
  std::optional<GaussianBelief> prior;  // nullopt means standard normal
  std::optional<VectorXd> query;
  std::optional<std::string> dataset_path;
  std::optional<MatrixXd> dataset_rows;
  std::optional<VectorXd> dataset_responses;
  std::optional<std::vector<long>> arm_counts;
  std::optional<NoiseSpec> dataset_noise;
  std::optional<NoiseSpec> noise;  // for perfect mechanism / envelope / generation
  std::optional<MechanismSpec> mechanism;
  GridSpec grid;
  std::vector<std::string> checks;
  long coupling_samples = 100000;
  std::vector<std::pair<std::string, MatrixXd>> statistics;
  std::optional<MatrixXd> generate_rows;
  Eigen::Index generate_random_rows = 0;
  std::optional<VectorXd> generate_beta;
  bool generate_noiseless = false;
  std::optional<std::string> plot_kind;
  std::string canonical;  // sorted-key serialization used for hashing

  GaussianBelief effective_prior() const {
    return prior ? *prior : GaussianBelief::standard(dimension);
  }

  static ExperimentConfig parse(const json& j);
  static ExperimentConfig load(const std::string& path);
};

inline ExperimentConfig ExperimentConfig::parse(const json& j) {
  if (!j.is_object()) throw ConfigError("config: expected a JSON object");
  ExperimentConfig config;
  if (!j.contains("dimension") || !j["dimension"].is_number_integer()) {
    throw ConfigError("config.dimension: required integer");
  }
  config.dimension = j["dimension"].get<Eigen::Index>();
  if (config.dimension < 1) throw ConfigError("config.dimension: must be at least 1");
  if (j.contains("seed")) config.seed = j["seed"].get<std::uint64_t>();

  if (j.contains("prior") && j["prior"] != json("standard")) {
    config.prior = belief_from_json(j["prior"], "config.prior");
    if (config.prior->dimension() != config.dimension) {
      throw ConfigError("config.prior: dimension mismatch");
    }
  }
  if (j.contains("query")) {
    config.query = vector_from_json(j["query"], "config.query");
    if (config.query->size() != config.dimension) {
      throw ConfigError("config.query: dimension mismatch");
    }
  }

  if (j.contains("dataset")) {
    const json& ds = j["dataset"];
    if (!ds.is_object()) throw ConfigError("config.dataset: expected an object");
    if (ds.contains("path")) {
      config.dataset_path = ds["path"].get<std::string>();
    } else if (ds.contains("rows")) {
      config.dataset_rows = matrix_from_json(ds["rows"], "config.dataset.rows");
      if (config.dataset_rows->cols() != config.dimension) {
        throw ConfigError("config.dataset.rows: dimension mismatch");
      }
      if (ds.contains("responses")) {
        config.dataset_responses =
            vector_from_json(ds["responses"], "config.dataset.responses");
        if (config.dataset_responses->size() != config.dataset_rows->rows()) {
          throw ConfigError("config.dataset.responses: length mismatch");
        }
      }
    } else if (ds.contains("arm_counts")) {
      std::vector<long> counts;
      for (const auto& v : ds["arm_counts"]) {
        counts.push_back(v.get<long>());
        if (counts.back() < 0) throw ConfigError("config.dataset.arm_counts: must be nonnegative");
      }
      if (static_cast<Eigen::Index>(counts.size()) != config.dimension) {
        throw ConfigError("config.dataset.arm_counts: one count per dimension");
      }
      config.arm_counts = std::move(counts);
    } else {
      throw ConfigError("config.dataset: expected path, rows, or arm_counts");
    }
    if (ds.contains("noise")) {
      config.dataset_noise = NoiseSpec::parse(ds["noise"], "config.dataset.noise");
    }
  }

  if (j.contains("noise")) config.noise = NoiseSpec::parse(j["noise"], "config.noise");
  if (j.contains("mechanism")) {
    config.mechanism = MechanismSpec::parse(j["mechanism"], "config.mechanism");
  }
  if (j.contains("grid")) config.grid = GridSpec::parse(j["grid"], "config.grid");
  if (j.contains("checks")) {
    if (!j["checks"].is_array()) throw ConfigError("config.checks: expected an array");
    for (const auto& c : j["checks"]) {
      const std::string check = c.get<std::string>();
      if (check != "ic" && check != "ir" && check != "regret" && check != "impossibility" &&
          check != "envelope" && check != "coupling" && check != "shapley" &&
          check != "marginal") {
        throw ConfigError("config.checks: unknown check '" + check + "'");
      }
      config.checks.push_back(check);
    }
  }
  if (j.contains("coupling_samples")) {
    config.coupling_samples = j["coupling_samples"].get<long>();
  }
  if (j.contains("statistics")) {
    if (!j["statistics"].is_array()) throw ConfigError("config.statistics: expected an array");
    for (std::size_t i = 0; i < j["statistics"].size(); ++i) {
      const json& st = j["statistics"][i];
      const std::string field = "config.statistics[" + std::to_string(i) + "]";
      if (!st.is_object() || !st.contains("weights")) {
        throw ConfigError(field + ": expected an object with \"weights\"");
      }
      const std::string name =
          st.contains("name") ? st["name"].get<std::string>() : "statistic_" + std::to_string(i);
      config.statistics.emplace_back(name, matrix_from_json(st["weights"], field + ".weights"));
    }
  }
  if (j.contains("generate")) {
    const json& gen = j["generate"];
    if (!gen.is_object()) throw ConfigError("config.generate: expected an object");
    if (gen.contains("rows")) {
      config.generate_rows = matrix_from_json(gen["rows"], "config.generate.rows");
      if (config.generate_rows->cols() != config.dimension) {
        throw ConfigError("config.generate.rows: dimension mismatch");
      }
    } else if (gen.contains("random_rows")) {
      config.generate_random_rows = gen["random_rows"].get<Eigen::Index>();
      if (config.generate_random_rows < 1) {
        throw ConfigError("config.generate.random_rows: must be positive");
      }
    } else {
      throw ConfigError("config.generate: expected rows or random_rows");
    }
    if (gen.contains("beta")) {
      config.generate_beta = vector_from_json(gen["beta"], "config.generate.beta");
      if (config.generate_beta->size() != config.dimension) {
        throw ConfigError("config.generate.beta: dimension mismatch");
      }
    }
    if (gen.contains("noiseless")) config.generate_noiseless = gen["noiseless"].get<bool>();
  }
  if (j.contains("plot")) {
    config.plot_kind = j["plot"].get<std::string>();
    if (*config.plot_kind != "regret_profile" && *config.plot_kind != "payment_profile" &&
        *config.plot_kind != "surplus_split") {
      throw ConfigError("config.plot: expected regret_profile, payment_profile, or surplus_split");
    }
  }
  config.canonical = j.dump();
  return config;
}

inline ExperimentConfig ExperimentConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw ConfigError("config: " + std::string(e.what()));
  }
  return parse(j);
}

inline std::uint64_t fnv1a_hash(const std::string& text) {
  std::uint64_t hash = 0xcbf29ce484222325ull;
  for (const unsigned char ch : text) {
    hash ^= ch;
    hash *= 0x100000001b3ull;
  }
  return hash;
}

// Draws a dataset from the configured linear model. Stream order under the
// seed: parameter draw, then random row features when requested, then one
// noise draw per record.
inline Dataset generate_synthetic(const ExperimentConfig& config) {
  if (!config.generate_rows && config.generate_random_rows == 0) {
    throw ConfigError("config.generate: required for synthetic generation");
  }
  if (!config.noise) throw ConfigError("config.noise: required for synthetic generation");
  Rng rng(config.seed);

  const GaussianBelief prior = config.effective_prior();
  VectorXd beta(config.dimension);
  if (config.generate_beta) {
    beta = *config.generate_beta;
  } else {
    VectorXd z(config.dimension);
    for (Eigen::Index i = 0; i < config.dimension; ++i) z[i] = rng.normal();
    beta = prior.mean() + sym_sqrt(prior.covariance(), "prior covariance") * z;
  }

  MatrixXd features;
  if (config.generate_rows) {
    features = *config.generate_rows;
  } else {
    features.resize(config.generate_random_rows, config.dimension);
    for (Eigen::Index r = 0; r < features.rows(); ++r) {
      for (Eigen::Index c = 0; c < features.cols(); ++c) features(r, c) = rng.normal();
    }
  }

  const VectorXd sigma = config.noise->row_stddevs(features, "config.noise");
  VectorXd responses = features * beta;
  if (!config.generate_noiseless) {
    for (Eigen::Index i = 0; i < responses.size(); ++i) responses[i] += sigma[i] * rng.normal();
  }
  return Dataset(std::move(features), std::move(responses), sigma);
}

struct RunRecord {
  json record;
  bool all_passed = true;

  const json& results() const { return record.at("results"); }
};

namespace detail {

inline Dataset build_dataset(const ExperimentConfig& config,
                             const std::filesystem::path& base_dir) {
  if (config.dataset_path) {
    std::filesystem::path p(*config.dataset_path);
    if (p.is_relative()) p = base_dir / p;
    Dataset data = load_dataset_csv(p.string());
    if (data.dimension() != config.dimension) {
      throw ConfigError("config.dataset: file dimension mismatch");
    }
    return data;
  }
  if (config.dataset_rows) {
    const NoiseSpec noise =
        config.dataset_noise ? *config.dataset_noise : NoiseSpec{};
    return Dataset(*config.dataset_rows, config.dataset_responses,
                   noise.row_stddevs(*config.dataset_rows, "config.dataset.noise"));
  }
  if (config.arm_counts) {
    long total = 0;
    for (const long c : *config.arm_counts) total += c;
    MatrixXd rows = MatrixXd::Zero(total, config.dimension);
    Eigen::Index r = 0;
    for (Eigen::Index arm = 0; arm < config.dimension; ++arm) {
      for (long k = 0; k < (*config.arm_counts)[static_cast<std::size_t>(arm)]; ++k) {
        rows(r++, arm) = 1.0;
      }
    }
    const NoiseSpec noise = config.dataset_noise ? *config.dataset_noise : NoiseSpec{};
    return Dataset(rows, std::nullopt, noise.row_stddevs(rows, "config.dataset.noise"));
  }
  throw ConfigError("config.dataset: required for this run");
}

inline bool has_check(const ExperimentConfig& config, const std::string& name) {
  for (const auto& c : config.checks) {
    if (c == name) return true;
  }
  return false;
}

inline double mesh_angle(std::size_t index, std::size_t resolution) {
  return 2.0 * std::numbers::pi * static_cast<double>(index) /
         static_cast<double>(resolution);
}

}  // namespace detail

// Executes the configured pipeline: valuation of the dataset and its derived
// statistics, mechanism pricing over the type grid, then the requested
// verification checks. All numeric outputs land under "results"; timings and
// tool metadata stay outside it so records are byte-comparable across runs.
inline RunRecord run_experiment(const ExperimentConfig& config,
                                const std::filesystem::path& base_dir = ".") {
  const auto start = std::chrono::steady_clock::now();
  RunRecord run;
  json& results = run.record["results"];
  results = json::object();

  std::optional<Dataset> data;
  if (config.dataset_path || config.dataset_rows || config.arm_counts) {
    data = detail::build_dataset(config, base_dir);
  }

  const GaussianBelief prior = config.effective_prior();
  std::optional<ValuationQuery> query;
  if (config.query) query = ValuationQuery(prior, *config.query);

  if (query && data) {
    json valuation;
    valuation["prior_predictive_variance"] = predictive_variance(prior, query->context);
    const MatrixXd posterior_cov = posterior_covariance(prior, *data);
    valuation["posterior_predictive_variance"] =
        query->context.dot(posterior_cov * query->context);
    valuation["value_nats"] = canonical_value(*query, *data);
    json stats = json::array();
    for (const auto& [name, weights] : config.statistics) {
      const auto derived = transform_dataset(LinearStatisticDpp(*data, weights));
      const MatrixXd stat_cov = posterior_covariance(prior, derived);
      stats.push_back(json{{"name", name},
                           {"features", matrix_to_json(derived.features)},
                           {"noise_covariance", matrix_to_json(derived.noise_covariance)},
                           {"correlated", derived.correlated},
                           {"posterior_predictive_variance",
                            query->context.dot(stat_cov * query->context)},
                           {"value_nats", canonical_value(*query, derived)}});
    }
    if (!stats.empty()) valuation["statistics"] = std::move(stats);
    results["valuation"] = std::move(valuation);
  }

  if (detail::has_check(config, "shapley")) {
    if (!query || !data) throw ConfigError("checks.shapley: requires query and dataset");
    const auto allocation = data_shapley(*query, *data);
    json out;
    out["per_datum_value"] = vector_to_json(allocation.per_datum_value);
    out["coalition_value_fn_evals"] = allocation.coalition_value_fn_evals;
    out["total_value_nats"] = allocation.per_datum_value.sum();
    results["shapley"] = std::move(out);
  }

  if (detail::has_check(config, "marginal")) {
    if (!query || !data || data->row_count() == 0) {
      throw ConfigError("checks.marginal: requires query and a nonempty dataset");
    }
    std::vector<Eigen::Index> head;
    for (Eigen::Index i = 0; i + 1 < data->row_count(); ++i) head.push_back(i);
    const Dataset base = data->subset(head);
    const Dataset last = data->subset({data->row_count() - 1});
    results["marginal"] = json{{"last_datum_value_nats", marginal_value(*query, base, last)},
                               {"base_rows", head.size()}};
  }

  if (detail::has_check(config, "coupling")) {
    if (!query || !data) throw ConfigError("checks.coupling: requires query and dataset");
    const auto report = coupling_check(*query, *data, config.coupling_samples, config.seed);
    run.all_passed = run.all_passed && report.pass;
    results["coupling"] = report_to_json(report);
  }

  std::optional<TypeGrid> grid;
  auto ensure_grid = [&]() -> const TypeGrid& {
    if (!grid) grid = config.grid.build(config.dimension, config.seed);
    return *grid;
  };

  std::optional<QuoteFn> quote_fn;
  if (config.mechanism) {
    const std::string& kind = config.mechanism->kind;
    json pricing;
    pricing["kind"] = kind;
    if (kind == "perfect") {
      if (!config.noise) throw ConfigError("config.noise: required for the perfect mechanism");
      const NoiseModel model = config.noise->to_model(config.dimension, "config.noise");
      quote_fn = perfect_quote_fn(config.mechanism->sample_count, model);
    } else if (kind == "svd") {
      if (!data) throw ConfigError("config.dataset: required for the svd mechanism");
      quote_fn = svd_quote_fn(*data);
    } else {
      if (!data) throw ConfigError("config.dataset: required for the mab mechanism");
      const Dataset mab_data = *data;
      quote_fn = [mab_data](const VectorXd& report) {
        return mab_mechanism_quote(mab_data, report);
      };
    }

    if (kind == "mab" && config.grid.kind == "default") {
      grid = GridSpec{"basis", 0}.build(config.dimension, config.seed);
    }
    const TypeGrid& type_grid = ensure_grid();

    std::optional<MatrixXd> full_posterior;
    if (data) {
      const MatrixXd design = detail::normalized_features(*data);
      full_posterior = sym_inverse(
          MatrixXd::Identity(config.dimension, config.dimension) +
              symmetrize(design.transpose() * design),
          "full information");
    }

    json profile;
    std::vector<double> axis, payments, benchmarks, surpluses, regrets;
    const bool basis_grid =
        config.grid.kind == "basis" || (kind == "mab" && config.grid.kind == "default");
    const bool mesh = !basis_grid && (config.grid.kind == "mesh" ||
                                      (config.grid.kind == "default" && config.dimension == 2));
    for (std::size_t i = 0; i < type_grid.size(); ++i) {
      const VectorXd& x = type_grid[i];
      const MechanismQuote quote = (*quote_fn)(x);
      const double truthful_value = canonical_value(
          ValuationQuery(GaussianBelief::standard(config.dimension), x), quote.allocation);
      // Under perfect customization the benchmark is the truthful fee itself;
      // under limited customization it is the full-dataset value.
      const double benchmark = (kind == "perfect" || !data)
                                   ? quote.payment_nats
                                   : -0.5 * std::log(x.dot(*full_posterior * x));
      axis.push_back(mesh ? detail::mesh_angle(i, type_grid.size()) : static_cast<double>(i));
      payments.push_back(quote.payment_nats);
      benchmarks.push_back(benchmark);
      surpluses.push_back(truthful_value - quote.payment_nats);
      regrets.push_back(benchmark - quote.payment_nats);
    }
    profile["angle_or_index"] = axis;
    profile["payment"] = payments;
    profile["first_best"] = benchmarks;
    profile["buyer_surplus"] = surpluses;
    profile["regret"] = regrets;
    pricing["profile"] = std::move(profile);
    pricing["grid_size"] = type_grid.size();

    if (data) {
      const auto kappa = condition_number(*data);
      pricing["kappa"] = kappa.full_rank ? json(kappa.value) : json("inf");
      pricing["full_rank"] = kappa.full_rank;
    }
    if (config.query) {
      pricing["payment_at_query"] = (*quote_fn)(*config.query).payment_nats;
    }
    results["pricing"] = std::move(pricing);
  }

  if (detail::has_check(config, "ic") || detail::has_check(config, "ir")) {
    if (!quote_fn) throw ConfigError("checks.ic/ir: requires a mechanism");
    json verification = results.contains("verification") ? results["verification"]
                                                         : json::object();
    if (detail::has_check(config, "ic")) {
      const auto report = check_ic(*quote_fn, ensure_grid());
      run.all_passed = run.all_passed && report.passed;
      verification["ic"] = report_to_json(report);
    }
    if (detail::has_check(config, "ir")) {
      const auto report = check_ir(*quote_fn, ensure_grid());
      run.all_passed = run.all_passed && report.passed;
      verification["ir"] = report_to_json(report);
    }
    results["verification"] = std::move(verification);
  }

  if (detail::has_check(config, "regret")) {
    if (!data) throw ConfigError("checks.regret: requires a dataset");
    const auto report = regret_audit(*data, ensure_grid());
    run.all_passed = run.all_passed && report.passed;
    json out = report_to_json(report);
    out.erase("per_point_regret");  // profile arrays already carry the series
    out.erase("per_point_sharp_bound");
    results["verification"]["regret"] = std::move(out);
  }

  if (detail::has_check(config, "impossibility")) {
    if (!data) throw ConfigError("checks.impossibility: requires a dataset");
    results["verification"]["impossibility"] =
        report_to_json(impossibility_demo(*data, ensure_grid()));
  }

  if (detail::has_check(config, "envelope")) {
    if (!config.noise) throw ConfigError("checks.envelope: requires a noise model");
    const NoiseModel model = config.noise->to_model(config.dimension, "config.noise");
    const long n = config.mechanism ? config.mechanism->sample_count : 1;
    const auto report = envelope_gradient_check(model, n, ensure_grid(), 20, config.seed);
    run.all_passed = run.all_passed && report.passed;
    results["verification"]["envelope"] = report_to_json(report);
  }

  run.record["config_hash"] = fnv1a_hash(config.canonical);
  run.record["tool_version"] = kToolVersion;
  run.record["rng"] = kRngName;
  run.record["seed"] = config.seed;
  run.record["all_passed"] = run.all_passed;
  const auto elapsed = std::chrono::steady_clock::now() - start;
  run.record["timings_ms"] = json{
      {"total", std::chrono::duration_cast<std::chrono::milliseconds>(elapsed).count()}};
  return run;
}

// Per-grid-point curve as CSV, ready for external plotting.
inline std::string emit_plot_data(const RunRecord& run, const std::string& kind) {
  const char* series = nullptr;
  if (kind == "regret_profile") {
    series = "regret";
  } else if (kind == "payment_profile") {
    series = "payment";
  } else if (kind == "surplus_split") {
    series = "buyer_surplus";
  } else {
    throw ConfigError("plot: unknown kind '" + kind + "'");
  }
  if (!run.record.contains("results") || !run.results().contains("pricing") ||
      !run.results()["pricing"].contains("profile")) {
    throw ConfigError("plot: record has no pricing profile; run a mechanism first");
  }
  const json& profile = run.results()["pricing"]["profile"];
  const auto& axis = profile["angle_or_index"];
  const auto& values = profile[series];
  std::ostringstream out;
  out << "angle_or_index,value_nats\n";
  for (std::size_t i = 0; i < axis.size(); ++i) {
    out << format_double(axis[i].get<double>()) << ","
        << format_double(values[i].get<double>()) << "\n";
  }
  return out.str();
}

}  // namespace datapricer
