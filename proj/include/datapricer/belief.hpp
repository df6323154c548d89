#pragma once

#include <Eigen/Dense>
#include <utility>

#include "datapricer/linalg.hpp"

namespace datapricer {

// Gaussian belief over the regression parameter: mean vector plus a
// symmetric positive-semidefinite covariance. Immutable after construction;
// the constructor rejects asymmetric or indefinite covariances.
class GaussianBelief {
 public:
  GaussianBelief(VectorXd mean, MatrixXd covariance)
      : mean_(std::move(mean)), covariance_(std::move(covariance)) {
    if (mean_.size() < 1) {
      throw std::invalid_argument("GaussianBelief: dimension must be at least 1");
    }
    if (covariance_.rows() != mean_.size() || covariance_.cols() != mean_.size()) {
      throw std::invalid_argument("GaussianBelief: covariance shape does not match mean");
    }
    if (!is_symmetric(covariance_)) {
      throw std::invalid_argument("GaussianBelief: covariance is not symmetric");
    }
    if (!is_positive_semidefinite(covariance_)) {
      throw std::invalid_argument("GaussianBelief: covariance is not positive semidefinite");
    }
  }

  static GaussianBelief standard(Eigen::Index dimension) {
    return GaussianBelief(VectorXd::Zero(dimension), MatrixXd::Identity(dimension, dimension));
  }

  Eigen::Index dimension() const { return mean_.size(); }
  const VectorXd& mean() const { return mean_; }
  const MatrixXd& covariance() const { return covariance_; }

 private:
  VectorXd mean_;
  MatrixXd covariance_;
};

}  // namespace datapricer
