#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <utility>

#include "datapricer/valuation.hpp"

namespace datapricer {

// Pricing hook: payments are f(prior-to-posterior variance ratio) for a
// concave f. Information gain ships f = log/2; any concave alternative can
// be swapped in here.
inline double payment_from_variance_ratio(double variance_ratio) {
  if (!(variance_ratio > 0.0)) {
    throw NumericError("payment_from_variance_ratio: ratio must be positive");
  }
  return 0.5 * std::log(variance_ratio);
}

// Fee for n fresh responses at measurement noise sigma and artificial noise
// delta. Decreasing in delta, so delta = 0 is revenue-optimal.
inline double perfect_payment(double sigma, double delta, long sample_count) {
  if (sample_count < 0) throw std::invalid_argument("perfect_payment: negative sample count");
  const double v = sigma * sigma + delta * delta;
  if (!(v > 0.0)) throw std::invalid_argument("perfect_payment: noise variance must be positive");
  return payment_from_variance_ratio((v + static_cast<double>(sample_count)) / v);
}

// A priced allocation: the derived records handed to the buyer, the fee, and
// the report that produced them (raw and renormalized to the unit sphere).
struct MechanismQuote {
  Dataset allocation = Dataset::empty(0);
  double payment_nats = 0.0;
  VectorXd reported_type_raw;
  VectorXd reported_type;  // unit norm
};

// Seller with full customization power: generates n fresh responses along the
// reported direction and charges the buyer's entire value for them. No
// artificial noise is injected. Responses are only materialized when a
// ground-truth parameter is supplied; the price depends on the design alone.
inline MechanismQuote perfect_mechanism_quote(const VectorXd& report, long sample_count,
                                              const NoiseModel& noise,
                                              const std::optional<VectorXd>& beta_true =
                                                  std::nullopt,
                                              std::uint64_t seed = 0) {
  if (report.norm() == 0.0) {
    throw std::invalid_argument("perfect_mechanism_quote: report must be nonzero");
  }
  if (sample_count < 0) {
    throw std::invalid_argument("perfect_mechanism_quote: negative sample count");
  }
  const Eigen::Index d = report.size();
  const VectorXd unit = report.normalized();
  const double sigma = noise.sphere_value(unit);

  MechanismQuote quote;
  quote.reported_type_raw = report;
  quote.reported_type = unit;
  quote.payment_nats = perfect_payment(sigma, 0.0, sample_count);
  if (sample_count == 0) {
    quote.allocation = Dataset::empty(d);
    return quote;
  }

  MatrixXd features = unit.transpose().replicate(sample_count, 1);
  std::optional<VectorXd> responses;
  if (beta_true) {
    if (beta_true->size() != d) {
      throw std::invalid_argument("perfect_mechanism_quote: beta dimension mismatch");
    }
    Rng rng(seed);
    VectorXd y(sample_count);
    const double signal = unit.dot(*beta_true);
    for (Eigen::Index i = 0; i < sample_count; ++i) y[i] = signal + sigma * rng.normal();
    responses = std::move(y);
  }
  quote.allocation = Dataset(std::move(features), std::move(responses),
                             VectorXd::Constant(sample_count, sigma));
  return quote;
}

// SVD of the noise-normalized design, in the orientation used throughout:
// normalized design = U * [diag(singular_values); 0] * V, with V's rows the
// right singular vectors and L^T * design = I. Orientation is pinned by
// sorting singular values descending and flipping signs so the first nonzero
// entry of each V row is positive, making the factors reproducible.
struct SvdDecomposition {
  MatrixXd U;                // n x n orthogonal
  VectorXd singular_values;  // d entries, descending, all positive
  MatrixXd V;                // d x d orthogonal, rows are right singular vectors
  MatrixXd left_inverse;     // n x d
};

namespace detail {

inline MatrixXd normalized_features(const Dataset& data) {
  return data.noise_stddev().cwiseInverse().asDiagonal() * data.features();
}

inline VectorXd normalized_responses(const Dataset& data) {
  return data.responses().cwiseQuotient(data.noise_stddev());
}

}  // namespace detail

inline SvdDecomposition svd_mechanism_prepare(const Dataset& data) {
  const Eigen::Index n = data.row_count();
  const Eigen::Index d = data.dimension();
  if (n < d) {
    throw NumericError("svd_mechanism_prepare: fewer records than dimensions, rank deficient");
  }
  const MatrixXd design = detail::normalized_features(data);
  Eigen::JacobiSVD<MatrixXd> svd(design, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const VectorXd& values = svd.singularValues();
  if (values[0] == 0.0 || values[d - 1] <= kSingularRelTol * values[0]) {
    throw NumericError("svd_mechanism_prepare: design is rank deficient");
  }

  MatrixXd u = svd.matrixU();
  MatrixXd v_cols = svd.matrixV();  // columns are right singular vectors
  for (Eigen::Index i = 0; i < d; ++i) {
    Eigen::Index lead = 0;
    while (lead < d - 1 && std::abs(v_cols(lead, i)) <= 1e-12) ++lead;
    if (v_cols(lead, i) < 0.0) {
      v_cols.col(i) = -v_cols.col(i);
      u.col(i) = -u.col(i);
    }
  }

  SvdDecomposition prep;
  prep.singular_values = values.head(d);
  prep.V = v_cols.transpose();
  prep.left_inverse = u.leftCols(d) * values.head(d).cwiseInverse().asDiagonal() * prep.V;
  prep.U = std::move(u);
  return prep;
}

// Allocation and price for a buyer report under limited customization: the
// report is projected through the left inverse, the projection is normalized
// into a unit-noise combined record, and the buyer is charged his own value
// for that record. The price is invariant to positive rescaling of the
// report.
inline MechanismQuote svd_mechanism_quote(const SvdDecomposition& prep, const Dataset& data,
                                          const VectorXd& report) {
  const Eigen::Index d = data.dimension();
  if (report.size() != d) throw std::invalid_argument("svd_mechanism_quote: dimension mismatch");
  if (report.norm() == 0.0) {
    throw std::invalid_argument("svd_mechanism_quote: report must be nonzero");
  }
  if (prep.left_inverse.rows() != data.row_count() || prep.left_inverse.cols() != d) {
    throw std::invalid_argument("svd_mechanism_quote: decomposition does not match the dataset");
  }
  const MatrixXd design = detail::normalized_features(data);
  if ((prep.left_inverse.transpose() * design - MatrixXd::Identity(d, d))
          .cwiseAbs()
          .maxCoeff() > 1e-6) {
    throw std::invalid_argument("svd_mechanism_quote: decomposition does not match the dataset");
  }

  const VectorXd unit = report.normalized();
  const VectorXd projected = prep.left_inverse * unit;
  const double projected_norm = projected.norm();
  if (!(projected_norm > 1e-300)) {
    throw NumericError("svd_mechanism_quote: left-inverse projection vanished");
  }
  const VectorXd combiner = projected / projected_norm;
  const VectorXd allocated_feature = design.transpose() * combiner;

  const double residual = 1.0 - unit.dot(allocated_feature) * unit.dot(allocated_feature) /
                                    (1.0 + allocated_feature.squaredNorm());
  MechanismQuote quote;
  quote.reported_type_raw = report;
  quote.reported_type = unit;
  quote.payment_nats = payment_from_variance_ratio(1.0 / residual);

  std::optional<VectorXd> response;
  if (data.has_responses()) {
    VectorXd y(1);
    y[0] = combiner.dot(detail::normalized_responses(data));
    response = std::move(y);
  }
  quote.allocation =
      Dataset(allocated_feature.transpose(), std::move(response), VectorXd::Ones(1));
  return quote;
}

// Specialization when every record measures a single coordinate: the buyer
// asking for arm j receives the precision-weighted combination of the arm-j
// records and pays his full value of the dataset. Coincides with the SVD
// mechanism on such designs.
inline MechanismQuote mab_mechanism_quote(const Dataset& data, const VectorXd& report) {
  const Eigen::Index d = data.dimension();
  if (report.size() != d) throw std::invalid_argument("mab_mechanism_quote: dimension mismatch");

  std::vector<Eigen::Index> arm_of_row(static_cast<std::size_t>(data.row_count()));
  for (Eigen::Index r = 0; r < data.row_count(); ++r) {
    Eigen::Index arm = -1;
    for (Eigen::Index c = 0; c < d; ++c) {
      const double entry = data.features()(r, c);
      if (std::abs(entry - 1.0) <= 1e-12) {
        if (arm >= 0) throw std::invalid_argument("mab_mechanism_quote: row is not a basis vector");
        arm = c;
      } else if (std::abs(entry) > 1e-12) {
        throw std::invalid_argument("mab_mechanism_quote: row is not a basis vector");
      }
    }
    if (arm < 0) throw std::invalid_argument("mab_mechanism_quote: row is not a basis vector");
    arm_of_row[static_cast<std::size_t>(r)] = arm;
  }

  if (report.norm() == 0.0) {
    throw std::invalid_argument("mab_mechanism_quote: report must be nonzero");
  }
  const VectorXd unit = report.normalized();
  Eigen::Index queried_arm = -1;
  for (Eigen::Index c = 0; c < d; ++c) {
    if (std::abs(unit[c] - 1.0) <= 1e-12) {
      queried_arm = c;
    } else if (std::abs(unit[c]) > 1e-12) {
      throw std::invalid_argument("mab_mechanism_quote: report must be a standard basis vector");
    }
  }
  if (queried_arm < 0) {
    throw std::invalid_argument("mab_mechanism_quote: report must be a standard basis vector");
  }

  double arm_precision = 0.0;
  double weighted_response = 0.0;
  for (Eigen::Index r = 0; r < data.row_count(); ++r) {
    if (arm_of_row[static_cast<std::size_t>(r)] != queried_arm) continue;
    const double w = 1.0 / (data.noise_stddev()[r] * data.noise_stddev()[r]);
    arm_precision += w;
    if (data.has_responses()) weighted_response += w * data.responses()[r];
  }
  if (arm_precision == 0.0) {
    throw std::invalid_argument("mab_mechanism_quote: no records on the queried arm");
  }

  const double scale = std::sqrt(arm_precision);
  MechanismQuote quote;
  quote.reported_type_raw = report;
  quote.reported_type = unit;
  quote.payment_nats =
      canonical_value(ValuationQuery(GaussianBelief::standard(d), unit), data);
  MatrixXd feature = MatrixXd::Zero(1, d);
  feature(0, queried_arm) = scale;
  std::optional<VectorXd> response;
  if (data.has_responses()) {
    VectorXd y(1);
    y[0] = weighted_response / scale;
    response = std::move(y);
  }
  quote.allocation = Dataset(std::move(feature), std::move(response), VectorXd::Ones(1));
  return quote;
}

// Revenue benchmark: the buyer's full value of the entire dataset, which
// upper-bounds what any IC and IR mechanism can charge that type.
inline double first_best(const VectorXd& context, const Dataset& data) {
  return canonical_value(
      ValuationQuery(GaussianBelief::standard(data.dimension()), context), data);
}

struct ConditionNumber {
  double value = std::numeric_limits<double>::infinity();
  bool full_rank = false;
};

// Ratio of the largest to smallest singular value of the noise-normalized
// design; infinite (with the flag down) on rank-deficient designs.
inline ConditionNumber condition_number(const Dataset& data) {
  if (data.row_count() < data.dimension()) return ConditionNumber{};
  const MatrixXd design = detail::normalized_features(data);
  Eigen::JacobiSVD<MatrixXd> svd(design);
  const VectorXd& values = svd.singularValues();
  const double largest = values[0];
  const double smallest = values[data.dimension() - 1];
  if (largest == 0.0 || smallest <= kSingularRelTol * largest) return ConditionNumber{};
  return ConditionNumber{largest / smallest, true};
}

// Per-type bound on first-best minus the SVD payment, from the
// Cauchy-Schwarz step of the regret analysis. Tighter than log(kappa).
inline double svd_sharp_regret_bound(const SvdDecomposition& prep, const VectorXd& context) {
  if (context.norm() == 0.0) {
    throw std::invalid_argument("svd_sharp_regret_bound: context must be nonzero");
  }
  const VectorXd y = prep.V * context.normalized();
  double inv_sq = 0.0;
  double inv = 0.0;
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    const double w = y[i] * y[i];
    const double lambda = prep.singular_values[i];
    inv_sq += w / (lambda * lambda);
    inv += w / lambda;
  }
  return 0.5 * std::log(inv_sq / (inv * inv));
}

}  // namespace datapricer
