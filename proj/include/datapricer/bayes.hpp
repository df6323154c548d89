#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <numbers>
#include <utility>

#include "datapricer/belief.hpp"
#include "datapricer/dataset.hpp"
#include "datapricer/linalg.hpp"

namespace datapricer {

namespace detail {

inline void require_dimension(const GaussianBelief& belief, Eigen::Index d, const char* op) {
  if (belief.dimension() != d) {
    throw std::invalid_argument(std::string(op) + ": dimension mismatch");
  }
}

// Precision contributed by records with diagonal noise: X^T diag(sigma^2)^-1 X.
inline MatrixXd information_matrix(const Dataset& data) {
  const MatrixXd weighted =
      data.noise_stddev().array().square().inverse().matrix().asDiagonal() * data.features();
  return symmetrize(data.features().transpose() * weighted);
}

// Same with a full noise covariance N: X^T N^-1 X.
inline MatrixXd information_matrix(const TransformedDataset& data) {
  const MatrixXd n_inv = sym_inverse(data.noise_covariance, "derived noise covariance");
  return symmetrize(data.features.transpose() * n_inv * data.features);
}

}  // namespace detail

// Conjugate Gaussian update. The posterior covariance is
// (Sigma_q^-1 + X^T Sigma^-1 X)^-1 and depends on the design only; the mean
// additionally folds in the realized responses. Computed in precision space
// with symmetrization after each inversion.
inline GaussianBelief posterior_update(const GaussianBelief& prior, const Dataset& data) {
  detail::require_dimension(prior, data.dimension(), "posterior_update");
  if (data.row_count() == 0) return prior;
  if (!data.has_responses()) {
    throw std::invalid_argument("posterior_update: responses required for the posterior mean");
  }
  const MatrixXd prior_precision = sym_inverse(prior.covariance(), "prior covariance");
  const MatrixXd posterior_cov =
      sym_inverse(prior_precision + detail::information_matrix(data), "posterior precision");
  const VectorXd weighted_responses =
      data.features().transpose() *
      (data.responses().array() / data.noise_stddev().array().square()).matrix();
  const VectorXd mean = posterior_cov * (prior_precision * prior.mean() + weighted_responses);
  return GaussianBelief(mean, posterior_cov);
}

// Update with a derived dataset carrying a full noise covariance.
inline GaussianBelief posterior_update(const GaussianBelief& prior,
                                       const TransformedDataset& data) {
  detail::require_dimension(prior, data.dimension(), "posterior_update");
  if (data.row_count() == 0) return prior;
  if (!data.responses) {
    throw std::invalid_argument("posterior_update: responses required for the posterior mean");
  }
  const MatrixXd prior_precision = sym_inverse(prior.covariance(), "prior covariance");
  const MatrixXd n_inv = sym_inverse(data.noise_covariance, "derived noise covariance");
  const MatrixXd posterior_cov = sym_inverse(
      prior_precision + symmetrize(data.features.transpose() * n_inv * data.features),
      "posterior precision");
  const VectorXd mean = posterior_cov * (prior_precision * prior.mean() +
                                         data.features.transpose() * (n_inv * *data.responses));
  return GaussianBelief(mean, posterior_cov);
}

// Design-only update: the covariance never depends on the responses, so it is
// available for datasets without any.
inline MatrixXd posterior_covariance(const GaussianBelief& prior, const Dataset& data) {
  detail::require_dimension(prior, data.dimension(), "posterior_covariance");
  if (data.row_count() == 0) return prior.covariance();
  const MatrixXd prior_precision = sym_inverse(prior.covariance(), "prior covariance");
  return sym_inverse(prior_precision + detail::information_matrix(data), "posterior precision");
}

inline MatrixXd posterior_covariance(const GaussianBelief& prior, const TransformedDataset& data) {
  detail::require_dimension(prior, data.dimension(), "posterior_covariance");
  if (data.row_count() == 0) return prior.covariance();
  const MatrixXd prior_precision = sym_inverse(prior.covariance(), "prior covariance");
  return sym_inverse(prior_precision + detail::information_matrix(data), "posterior precision");
}

// Variance of the prediction <x, beta> under the belief.
inline double predictive_variance(const GaussianBelief& belief, const VectorXd& x) {
  detail::require_dimension(belief, x.size(), "predictive_variance");
  if (x.norm() == 0.0) {
    throw std::invalid_argument("predictive_variance: query direction must be nonzero");
  }
  return x.dot(belief.covariance() * x);
}

// Differential entropy of the scalar prediction, in nats.
inline double prediction_entropy(const GaussianBelief& belief, const VectorXd& x) {
  const double variance = predictive_variance(belief, x);
  if (!(variance > 0.0)) {
    throw NumericError("prediction_entropy: degenerate direction with non-positive variance");
  }
  return 0.5 * std::log(variance) + 0.5 * (1.0 + std::log(2.0 * std::numbers::pi));
}

// Materializes the linear statistics of a DPP. Duplicated or linearly
// dependent weight rows make the derived noise covariance singular, which is
// rejected: such a derived record set cannot be priced or updated on.
inline TransformedDataset transform_dataset(const LinearStatisticDpp& dpp) {
  const Dataset& base = dpp.base();
  const MatrixXd& w = dpp.weights();
  TransformedDataset out;
  out.features = w * base.features();
  if (base.has_responses()) out.responses = w * base.responses();
  out.noise_covariance = symmetrize(w * base.noise_variance().asDiagonal() * w.transpose());
  if (out.noise_covariance.rows() > 0) {
    const auto solver = detail::eigensolve(out.noise_covariance, "transform_dataset");
    const double max_ev = solver.eigenvalues().cwiseAbs().maxCoeff();
    if (max_ev == 0.0 || solver.eigenvalues().minCoeff() <= kSingularRelTol * max_ev) {
      throw NumericError("transform_dataset: derived noise covariance is singular");
    }
  }
  const MatrixXd off_diagonal =
      out.noise_covariance - MatrixXd(out.noise_covariance.diagonal().asDiagonal());
  const double scale = out.noise_covariance.cwiseAbs().maxCoeff();
  out.correlated =
      out.row_count() > 1 && scale > 0.0 && off_diagonal.cwiseAbs().maxCoeff() > 1e-14 * scale;
  return out;
}

struct StandardizedProblem {
  Dataset data;
  VectorXd query;
  MatrixXd prior_sqrt;  // symmetric square root of the original prior covariance
};

// Re-expresses a problem under the standard prior N(0, I): responses are
// shifted by each record's prior-mean prediction, and features and query are
// mapped through the symmetric square root of the prior covariance. The
// information-gain value of any statistic is unchanged.
inline StandardizedProblem normalize_prior(const GaussianBelief& prior, const Dataset& data,
                                           const VectorXd& query) {
  detail::require_dimension(prior, data.dimension(), "normalize_prior");
  detail::require_dimension(prior, query.size(), "normalize_prior");
  const MatrixXd root = sym_sqrt(prior.covariance(), "prior covariance");
  MatrixXd features = data.features() * root;  // rows map through the square root
  std::optional<VectorXd> responses;
  if (data.has_responses()) {
    responses = data.responses() - data.features() * prior.mean();
  }
  return StandardizedProblem{
      Dataset(std::move(features), std::move(responses), data.noise_stddev()),
      root * query,
      root,
  };
}

}  // namespace datapricer
