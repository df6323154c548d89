#pragma once

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "datapricer/valuation.hpp"
#include "datapricer/verification.hpp"

namespace datapricer {

using nlohmann::json;

// 17 significant digits: enough for a lossless double round-trip.
inline std::string format_double(double value) {
  char buffer[40];
  std::snprintf(buffer, sizeof(buffer), "%.17g", value);
  return buffer;
}

inline json vector_to_json(const VectorXd& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
  return out;
}

inline json matrix_to_json(const MatrixXd& m) {
  json out = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    out.push_back(std::move(row));
  }
  return out;
}

inline VectorXd vector_from_json(const json& j, const std::string& field) {
  if (!j.is_array()) throw ConfigError(field + ": expected an array of numbers");
  VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) throw ConfigError(field + ": expected an array of numbers");
    v[static_cast<Eigen::Index>(i)] = j[i].get<double>();
  }
  return v;
}

inline MatrixXd matrix_from_json(const json& j, const std::string& field) {
  if (!j.is_array() || j.empty()) throw ConfigError(field + ": expected an array of rows");
  const std::size_t cols = j[0].is_array() ? j[0].size() : 0;
  MatrixXd m(static_cast<Eigen::Index>(j.size()), static_cast<Eigen::Index>(cols));
  for (std::size_t r = 0; r < j.size(); ++r) {
    if (!j[r].is_array() || j[r].size() != cols) {
      throw ConfigError(field + ": rows must be equally sized arrays");
    }
    for (std::size_t c = 0; c < cols; ++c) {
      if (!j[r][c].is_number()) throw ConfigError(field + ": expected numeric entries");
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = j[r][c].get<double>();
    }
  }
  return m;
}

inline json belief_to_json(const GaussianBelief& belief) {
  return json{{"mean", vector_to_json(belief.mean())},
              {"covariance", matrix_to_json(belief.covariance())}};
}

inline GaussianBelief belief_from_json(const json& j, const std::string& field = "belief") {
  if (!j.is_object() || !j.contains("mean") || !j.contains("covariance")) {
    throw ConfigError(field + ": expected {\"mean\": [...], \"covariance\": [[...]]}");
  }
  try {
    return GaussianBelief(vector_from_json(j["mean"], field + ".mean"),
                          matrix_from_json(j["covariance"], field + ".covariance"));
  } catch (const std::invalid_argument& e) {
    throw ConfigError(field + ": " + e.what());
  }
}

// Dataset CSV: header x_1,...,x_d,y,sigma; the y column may be left empty on
// every row for design-only data.
inline std::string dataset_to_csv(const Dataset& data) {
  std::ostringstream out;
  for (Eigen::Index c = 0; c < data.dimension(); ++c) out << "x_" << (c + 1) << ",";
  out << "y,sigma\n";
  for (Eigen::Index r = 0; r < data.row_count(); ++r) {
    for (Eigen::Index c = 0; c < data.dimension(); ++c) {
      out << format_double(data.features()(r, c)) << ",";
    }
    if (data.has_responses()) out << format_double(data.responses()[r]);
    out << "," << format_double(data.noise_stddev()[r]) << "\n";
  }
  return out.str();
}

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string current;
  for (const char ch : line) {
    if (ch == ',') {
      fields.push_back(current);
      current.clear();
    } else if (ch != '\r') {
      current.push_back(ch);
    }
  }
  fields.push_back(current);
  return fields;
}

inline double parse_number(const std::string& text, int line_number, const char* what) {
  char* end = nullptr;
  const double value = std::strtod(text.c_str(), &end);
  if (end == text.c_str() || *end != '\0') {
    throw ConfigError("dataset line " + std::to_string(line_number) + ": bad " + what + " '" +
                      text + "'");
  }
  return value;
}

}  // namespace detail

inline Dataset dataset_from_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw ConfigError("dataset: empty file");
  const auto header = detail::split_csv_line(line);
  if (header.size() < 3 || header[header.size() - 2] != "y" || header.back() != "sigma") {
    throw ConfigError("dataset: header must be x_1,...,x_d,y,sigma");
  }
  const Eigen::Index d = static_cast<Eigen::Index>(header.size()) - 2;
  for (Eigen::Index c = 0; c < d; ++c) {
    if (header[static_cast<std::size_t>(c)] != "x_" + std::to_string(c + 1)) {
      throw ConfigError("dataset: header must be x_1,...,x_d,y,sigma");
    }
  }

  std::vector<VectorXd> rows;
  std::vector<double> responses;
  std::vector<double> sigmas;
  bool any_response = false, any_missing = false;
  int line_number = 1;
  while (std::getline(in, line)) {
    ++line_number;
    if (line.empty() || line == "\r") continue;
    const auto fields = detail::split_csv_line(line);
    if (static_cast<Eigen::Index>(fields.size()) != d + 2) {
      throw ConfigError("dataset line " + std::to_string(line_number) + ": expected " +
                        std::to_string(d + 2) + " fields");
    }
    VectorXd row(d);
    for (Eigen::Index c = 0; c < d; ++c) {
      row[c] = detail::parse_number(fields[static_cast<std::size_t>(c)], line_number, "feature");
    }
    rows.push_back(std::move(row));
    const std::string& y = fields[static_cast<std::size_t>(d)];
    if (y.empty()) {
      any_missing = true;
      responses.push_back(0.0);
    } else {
      any_response = true;
      responses.push_back(detail::parse_number(y, line_number, "response"));
    }
    sigmas.push_back(
        detail::parse_number(fields[static_cast<std::size_t>(d + 1)], line_number, "sigma"));
  }
  if (any_response && any_missing) {
    throw ConfigError("dataset: responses must be present on every row or on none");
  }

  const Eigen::Index n = static_cast<Eigen::Index>(rows.size());
  MatrixXd features(n, d);
  VectorXd sigma(n);
  for (Eigen::Index r = 0; r < n; ++r) {
    features.row(r) = rows[static_cast<std::size_t>(r)];
    sigma[r] = sigmas[static_cast<std::size_t>(r)];
  }
  std::optional<VectorXd> y;
  if (any_response) {
    y = VectorXd(n);
    for (Eigen::Index r = 0; r < n; ++r) (*y)[r] = responses[static_cast<std::size_t>(r)];
  }
  try {
    return Dataset(std::move(features), std::move(y), std::move(sigma));
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("dataset: ") + e.what());
  }
}

inline Dataset load_dataset_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("dataset: cannot open '" + path + "'");
  return dataset_from_csv(in);
}

inline json quote_to_json(const MechanismQuote& quote) {
  json allocation{{"features", matrix_to_json(quote.allocation.features())},
                  {"responses", quote.allocation.has_responses()
                                    ? vector_to_json(quote.allocation.responses())
                                    : json(nullptr)},
                  {"noise", vector_to_json(quote.allocation.noise_stddev())}};
  return json{{"payment_nats", quote.payment_nats},
              {"allocation", std::move(allocation)},
              {"reported_type", vector_to_json(quote.reported_type)},
              {"reported_type_raw", vector_to_json(quote.reported_type_raw)}};
}

inline json witness_to_json(const Witness& witness) {
  json out{{"truthful_type", vector_to_json(witness.truthful_type)},
           {"truthful_index", witness.truthful_index}};
  if (witness.reported_type) {
    out["reported_type"] = vector_to_json(*witness.reported_type);
    out["reported_index"] = witness.reported_index;
  }
  return out;
}

inline json report_to_json(const VerificationReport& report) {
  json out{{"check", report.check_name},
           {"passed", report.passed},
           {"worst_violation", report.worst_violation},
           {"grid_size", report.grid_size},
           {"tolerance", report.tolerance}};
  if (report.witness) out["witness"] = witness_to_json(*report.witness);
  return out;
}

inline json report_to_json(const RegretAuditReport& report) {
  return json{{"check", "regret"},
              {"passed", report.passed},
              {"max_regret", report.max_regret},
              {"max_regret_index", report.max_regret_index},
              {"bound_ln_kappa", report.bound_ln_kappa},
              {"per_point_regret", report.per_point_regret},
              {"per_point_sharp_bound", report.per_point_sharp_bound},
              {"grid_size", report.grid_size}};
}

inline json report_to_json(const ImpossibilityReport& report) {
  json out{{"check", "impossibility"},
           {"is_isotropic", report.is_isotropic},
           {"witness_found", report.witness_found},
           {"anisotropy", report.anisotropy},
           {"grid_size", report.grid_size},
           {"note", report.note}};
  if (report.witness) {
    out["witness"] = witness_to_json(*report.witness);
    out["deviation_gain"] = report.deviation_gain;
  }
  return out;
}

inline json report_to_json(const EnvelopeReport& report) {
  return json{{"check", "envelope"},
              {"passed", report.passed},
              {"max_gradient_error", report.max_gradient_error},
              {"gradient_tolerance", report.gradient_tolerance},
              {"worst_gradient_index", report.worst_gradient_index},
              {"max_path_mismatch", report.max_path_mismatch},
              {"path_tolerance", report.path_tolerance},
              {"path_pairs", report.path_pairs},
              {"grid_size", report.grid_size}};
}

inline json report_to_json(const CouplingReport& report) {
  return json{{"check", "coupling"},
              {"pass", report.pass},
              {"empirical_mean", report.empirical_mean},
              {"standard_error", report.standard_error},
              {"deterministic_value", report.deterministic_value},
              {"samples", report.sample_count}};
}

// Flat key/value rendering for terminal consumption.
inline std::string render_table(const json& j, const std::string& prefix = "") {
  std::ostringstream out;
  if (j.is_object()) {
    for (const auto& [key, value] : j.items()) {
      const std::string path = prefix.empty() ? key : prefix + "." + key;
      if (value.is_object() || (value.is_array() && value.size() > 8)) {
        out << render_table(value, path);
      } else {
        out << path << ": " << value.dump() << "\n";
      }
    }
  } else if (j.is_array()) {
    out << prefix << ": [" << j.size() << " entries]\n";
  } else {
    out << prefix << ": " << j.dump() << "\n";
  }
  return out.str();
}

}  // namespace datapricer
