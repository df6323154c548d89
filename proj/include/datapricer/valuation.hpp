#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "datapricer/bayes.hpp"
#include "datapricer/parallel.hpp"
#include "datapricer/rng.hpp"

namespace datapricer {

// Absolute tolerance for treating a computed value as exactly zero.
inline constexpr double kValueZeroTol = 1e-10;

// A buyer's valuation context: prior belief over the parameter and the
// nonzero direction whose prediction the buyer cares about.
struct ValuationQuery {
  GaussianBelief prior;
  VectorXd context;

  ValuationQuery(GaussianBelief prior_in, VectorXd context_in)
      : prior(std::move(prior_in)), context(std::move(context_in)) {
    if (context.size() != prior.dimension()) {
      throw std::invalid_argument("ValuationQuery: context dimension mismatch");
    }
    if (context.norm() == 0.0) {
      throw std::invalid_argument("ValuationQuery: context must be nonzero");
    }
  }
};

namespace detail {

inline double value_from_variances(double prior_variance, double posterior_variance) {
  if (!(prior_variance > 0.0)) {
    throw NumericError("canonical_value: degenerate direction under the prior");
  }
  if (!(posterior_variance > 0.0)) {
    throw NumericError("canonical_value: degenerate direction under the posterior");
  }
  const double value = 0.5 * std::log(prior_variance / posterior_variance);
  if (value < 0.0) {
    if (value < -1e-8) throw NumericError("canonical_value: negative information gain");
    return 0.0;  // round-off on a value that is exactly zero
  }
  return value;
}

}  // namespace detail

// Information gain of producing the records in `data` for the query:
// half the log-ratio of prior to posterior predictive variance along the
// context direction. Independent of realized responses.
inline double canonical_value(const ValuationQuery& query, const Dataset& data) {
  const double prior_variance = predictive_variance(query.prior, query.context);
  const MatrixXd posterior_cov = posterior_covariance(query.prior, data);
  return detail::value_from_variances(prior_variance,
                                      query.context.dot(posterior_cov * query.context));
}

inline double canonical_value(const ValuationQuery& query, const TransformedDataset& data) {
  const double prior_variance = predictive_variance(query.prior, query.context);
  const MatrixXd posterior_cov = posterior_covariance(query.prior, data);
  return detail::value_from_variances(prior_variance,
                                      query.context.dot(posterior_cov * query.context));
}

// Value of n fresh responses produced along direction `report` to a buyer
// with direction `context`, under the standard prior N(0, I). Both
// directions are renormalized; noise models are evaluated on the sphere.
// Closed form via the rank-one inversion identity:
//   -1/2 * log(1 - <x, xhat>^2 * n / (sigma^2 + delta^2 + n)).
inline double perfect_customization_value(const VectorXd& context, const VectorXd& report,
                                          long sample_count, const NoiseModel& noise,
                                          const std::optional<NoiseModel>& artificial_noise =
                                              std::nullopt) {
  if (context.size() != report.size()) {
    throw std::invalid_argument("perfect_customization_value: dimension mismatch");
  }
  if (context.norm() == 0.0 || report.norm() == 0.0) {
    throw std::invalid_argument("perfect_customization_value: directions must be nonzero");
  }
  if (sample_count < 0) {
    throw std::invalid_argument("perfect_customization_value: negative sample count");
  }
  if (sample_count == 0) return 0.0;
  const VectorXd x = context.normalized();
  const VectorXd xhat = report.normalized();
  const double sigma = noise.sphere_value(xhat);
  const double delta = artificial_noise ? artificial_noise->sphere_value(xhat) : 0.0;
  const double total_variance = sigma * sigma + delta * delta;
  const double n = static_cast<double>(sample_count);
  const double alignment = x.dot(xhat);
  const double residual = 1.0 - alignment * alignment * n / (total_variance + n);
  return -0.5 * std::log(residual);
}

struct ShapleyAllocation {
  VectorXd per_datum_value;
  std::size_t coalition_value_fn_evals = 0;
};

// Exact Shapley values of the records in `data` for the coalition value
// function v(S) = canonical_value on the subset design. Full enumeration
// over all 2^n coalitions; n is capped at 20. Coalition values are computed
// independently (parallelizable); the per-datum averages use a fixed
// summation order, so results are bit-stable across thread counts.
inline ShapleyAllocation data_shapley(const ValuationQuery& query, const Dataset& data) {
  const Eigen::Index n = data.row_count();
  if (n > 20) {
    throw std::invalid_argument("data_shapley: more than 20 records; subsample the dataset");
  }
  const Eigen::Index d = data.dimension();
  if (d != query.prior.dimension()) {
    throw std::invalid_argument("data_shapley: dimension mismatch");
  }
  if (n == 0) return ShapleyAllocation{VectorXd(0), 1};

  const double prior_variance = predictive_variance(query.prior, query.context);
  const MatrixXd prior_precision = sym_inverse(query.prior.covariance(), "prior covariance");
  std::vector<MatrixXd> record_information(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    const VectorXd row = data.features().row(i).transpose();
    const double var = data.noise_stddev()[i] * data.noise_stddev()[i];
    record_information[static_cast<std::size_t>(i)] = (row * row.transpose()) / var;
  }

  const std::uint64_t coalition_count = std::uint64_t{1} << n;
  std::vector<double> coalition_value(coalition_count);
  parallel_chunks(coalition_count, /*chunk_count=*/256,
                  [&](std::size_t begin, std::size_t end, std::size_t) {
                    for (std::size_t mask = begin; mask < end; ++mask) {
                      MatrixXd precision = prior_precision;
                      for (Eigen::Index i = 0; i < n; ++i) {
                        if (mask & (std::uint64_t{1} << i)) {
                          precision += record_information[static_cast<std::size_t>(i)];
                        }
                      }
                      const MatrixXd cov = sym_inverse(precision, "coalition posterior");
                      coalition_value[mask] = detail::value_from_variances(
                          prior_variance, query.context.dot(cov * query.context));
                    }
                  });

  // Shapley weight for a coalition of size s among the other n-1 records:
  // s! (n-1-s)! / n! = 1 / (n * C(n-1, s)).
  std::vector<double> weight(static_cast<std::size_t>(n));
  weight[0] = 1.0 / static_cast<double>(n);
  for (Eigen::Index s = 1; s < n; ++s) {
    weight[static_cast<std::size_t>(s)] = weight[static_cast<std::size_t>(s - 1)] *
                                          static_cast<double>(s) / static_cast<double>(n - s);
  }

  VectorXd shapley(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const std::uint64_t bit = std::uint64_t{1} << i;
    long double total = 0.0L;
    for (std::uint64_t mask = 0; mask < coalition_count; ++mask) {
      if (mask & bit) continue;
      const int size = __builtin_popcountll(mask);
      total += static_cast<long double>(weight[static_cast<std::size_t>(size)]) *
               (coalition_value[mask | bit] - coalition_value[mask]);
    }
    shapley[i] = static_cast<double>(total);
  }
  return ShapleyAllocation{std::move(shapley), static_cast<std::size_t>(coalition_count)};
}

// Value of `addition` to a buyer whose belief has already absorbed `base`.
inline double marginal_value(const ValuationQuery& query, const Dataset& base,
                             const Dataset& addition) {
  if (base.dimension() != addition.dimension()) {
    throw std::invalid_argument("marginal_value: dimension mismatch");
  }
  const MatrixXd base_cov = posterior_covariance(query.prior, base);
  const VectorXd base_mean = (base.row_count() > 0 && base.has_responses())
                                 ? posterior_update(query.prior, base).mean()
                                 : query.prior.mean();
  return canonical_value(ValuationQuery(GaussianBelief(base_mean, base_cov), query.context),
                         addition);
}

struct CouplingReport {
  double empirical_mean = 0.0;
  double standard_error = 0.0;
  double deterministic_value = 0.0;
  long sample_count = 0;
  bool pass = false;
};

// Monte-Carlo check that the expected KL divergence from predictive prior to
// predictive posterior equals the deterministic entropy reduction: draws the
// parameter from the prior, generates responses, and averages the scalar
// Gaussian KL along the context direction. Passes when the empirical mean is
// within four standard errors of the closed form.
inline CouplingReport coupling_check(const ValuationQuery& query, const Dataset& data,
                                     long samples, std::uint64_t seed) {
  if (samples < 10000) {
    throw std::invalid_argument("coupling_check: at least 10^4 samples required");
  }
  const Eigen::Index d = query.prior.dimension();
  const Eigen::Index n = data.row_count();
  if (data.dimension() != d) throw std::invalid_argument("coupling_check: dimension mismatch");

  const double prior_variance = predictive_variance(query.prior, query.context);
  const double prior_mean_pred = query.context.dot(query.prior.mean());
  const MatrixXd posterior_cov = posterior_covariance(query.prior, data);
  const double posterior_variance = query.context.dot(posterior_cov * query.context);
  if (!(prior_variance > 0.0) || !(posterior_variance > 0.0)) {
    throw NumericError("coupling_check: degenerate direction");
  }

  const MatrixXd prior_sqrt = sym_sqrt(query.prior.covariance(), "prior covariance");
  const MatrixXd prior_precision = sym_inverse(query.prior.covariance(), "prior covariance");
  const VectorXd mean_base = posterior_cov * (prior_precision * query.prior.mean());
  // Posterior mean is mean_base + gain * Y.
  MatrixXd gain(d, n);
  if (n > 0) {
    gain = posterior_cov * data.features().transpose() *
           data.noise_stddev().array().square().inverse().matrix().asDiagonal();
  }

  Rng rng(seed);
  double mean = 0.0;
  double m2 = 0.0;
  VectorXd z(d), eps(n), beta(d), responses(n);
  const double log_ratio = std::log(prior_variance / posterior_variance);
  for (long s = 0; s < samples; ++s) {
    for (Eigen::Index i = 0; i < d; ++i) z[i] = rng.normal();
    beta = query.prior.mean() + prior_sqrt * z;
    double kl = 0.0;
    if (n > 0) {
      for (Eigen::Index i = 0; i < n; ++i) eps[i] = rng.normal();
      responses = data.features() * beta + data.noise_stddev().cwiseProduct(eps);
      const double posterior_mean_pred = query.context.dot(mean_base + gain * responses);
      const double shift = posterior_mean_pred - prior_mean_pred;
      kl = 0.5 * ((posterior_variance + shift * shift) / prior_variance - 1.0 + log_ratio);
    }
    const double delta = kl - mean;
    mean += delta / static_cast<double>(s + 1);
    m2 += delta * (kl - mean);
  }

  CouplingReport report;
  report.sample_count = samples;
  report.empirical_mean = mean;
  report.standard_error =
      samples > 1 ? std::sqrt(m2 / (static_cast<double>(samples - 1) * samples)) : 0.0;
  report.deterministic_value = canonical_value(query, data);
  report.pass = std::abs(report.empirical_mean - report.deterministic_value) <=
                4.0 * report.standard_error;
  return report;
}

}  // namespace datapricer
