#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <utility>
#include <vector>

#include "datapricer/linalg.hpp"

namespace datapricer {

// A batch of regression records: design matrix X (one record per row),
// optional realized responses, and a per-record noise standard deviation.
class Dataset {
 public:
  Dataset(MatrixXd features, std::optional<VectorXd> responses, VectorXd noise_stddev)
      : features_(std::move(features)),
        responses_(std::move(responses)),
        noise_stddev_(std::move(noise_stddev)) {
    if (noise_stddev_.size() != features_.rows()) {
      throw std::invalid_argument("Dataset: noise_stddev length must equal the record count");
    }
    if (responses_ && responses_->size() != features_.rows()) {
      throw std::invalid_argument("Dataset: responses length must equal the record count");
    }
    for (Eigen::Index i = 0; i < noise_stddev_.size(); ++i) {
      if (!(noise_stddev_[i] > 0.0) || !std::isfinite(noise_stddev_[i])) {
        throw std::invalid_argument("Dataset: noise stddev entries must be positive and finite");
      }
    }
  }

  // Design-only dataset with unit noise on every record.
  static Dataset design_only(MatrixXd features) {
    const Eigen::Index n = features.rows();
    return Dataset(std::move(features), std::nullopt, VectorXd::Ones(n));
  }

  static Dataset empty(Eigen::Index dimension) {
    return Dataset(MatrixXd(0, dimension), std::nullopt, VectorXd(0));
  }

  Eigen::Index row_count() const { return features_.rows(); }
  Eigen::Index dimension() const { return features_.cols(); }
  bool has_responses() const { return responses_.has_value(); }

  const MatrixXd& features() const { return features_; }
  const VectorXd& responses() const {
    if (!responses_) throw std::invalid_argument("Dataset: responses are absent");
    return *responses_;
  }
  const std::optional<VectorXd>& responses_opt() const { return responses_; }
  const VectorXd& noise_stddev() const { return noise_stddev_; }

  VectorXd noise_variance() const { return noise_stddev_.array().square(); }

  // Records selected by a coalition bitmask (bit i keeps row i).
  Dataset subset_mask(std::uint64_t mask) const {
    std::vector<Eigen::Index> rows;
    for (Eigen::Index i = 0; i < row_count(); ++i) {
      if (mask & (std::uint64_t{1} << i)) rows.push_back(i);
    }
    return subset(rows);
  }

  Dataset subset(const std::vector<Eigen::Index>& rows) const {
    MatrixXd f(static_cast<Eigen::Index>(rows.size()), dimension());
    VectorXd s(static_cast<Eigen::Index>(rows.size()));
    std::optional<VectorXd> r;
    if (responses_) r = VectorXd(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t k = 0; k < rows.size(); ++k) {
      const Eigen::Index i = rows[k];
      if (i < 0 || i >= row_count()) throw std::invalid_argument("Dataset: row index out of range");
      f.row(static_cast<Eigen::Index>(k)) = features_.row(i);
      s[static_cast<Eigen::Index>(k)] = noise_stddev_[i];
      if (r) (*r)[static_cast<Eigen::Index>(k)] = (*responses_)[i];
    }
    return Dataset(std::move(f), std::move(r), std::move(s));
  }

  Dataset concatenated(const Dataset& other) const {
    if (other.dimension() != dimension()) {
      throw std::invalid_argument("Dataset: cannot concatenate datasets of different dimension");
    }
    MatrixXd f(row_count() + other.row_count(), dimension());
    f << features_, other.features_;
    VectorXd s(row_count() + other.row_count());
    s << noise_stddev_, other.noise_stddev_;
    std::optional<VectorXd> r;
    if (responses_ && other.responses_) {
      VectorXd joined(row_count() + other.row_count());
      joined << *responses_, *other.responses_;
      r = std::move(joined);
    }
    return Dataset(std::move(f), std::move(r), std::move(s));
  }

 private:
  MatrixXd features_;
  std::optional<VectorXd> responses_;
  VectorXd noise_stddev_;
};

// Noise magnitude as a function of the record direction. The stddev of a
// record x is ||x|| times the value on the unit sphere at x/||x||, so the
// model is proportional by construction. An analytic tangential gradient of
// the sphere function may be attached for smooth models; checks that need
// derivatives require `smooth()`.
class NoiseModel {
 public:
  using SphereFn = std::function<double(const VectorXd&)>;
  using SphereGradFn = std::function<VectorXd(const VectorXd&)>;

  explicit NoiseModel(SphereFn unit_sphere_stddev, bool smooth = false,
                      SphereGradFn sphere_gradient = nullptr)
      : unit_sphere_stddev_(std::move(unit_sphere_stddev)),
        sphere_gradient_(std::move(sphere_gradient)),
        smooth_(smooth) {}

  static NoiseModel constant(double stddev) {
    if (!(stddev > 0.0) || !std::isfinite(stddev)) {
      throw std::invalid_argument("NoiseModel: constant stddev must be positive and finite");
    }
    return NoiseModel([stddev](const VectorXd&) { return stddev; }, /*smooth=*/true,
                      [](const VectorXd& u) { return VectorXd::Zero(u.size()).eval(); });
  }

  // sigma(u) = offset + <slope, u> on the sphere; tangential gradient is the
  // slope projected onto the tangent plane.
  static NoiseModel affine(double offset, VectorXd slope) {
    VectorXd s = std::move(slope);
    return NoiseModel(
        [offset, s](const VectorXd& u) { return offset + s.dot(u); }, /*smooth=*/true,
        [s](const VectorXd& u) { return (s - s.dot(u) * u).eval(); });
  }

  double sphere_value(const VectorXd& unit_direction) const {
    const double value = unit_sphere_stddev_(unit_direction);
    if (!(value > 0.0) || !std::isfinite(value)) {
      throw NumericError("NoiseModel: stddev must be positive and finite on the sphere");
    }
    return value;
  }

  double stddev(const VectorXd& x) const {
    const double norm = x.norm();
    if (norm == 0.0) throw std::invalid_argument("NoiseModel: zero vector has no noise scale");
    return norm * sphere_value(x / norm);
  }

  bool smooth() const { return smooth_; }
  bool has_sphere_gradient() const { return static_cast<bool>(sphere_gradient_); }
  VectorXd sphere_gradient(const VectorXd& unit_direction) const {
    if (!sphere_gradient_) throw std::invalid_argument("NoiseModel: no analytic gradient");
    return sphere_gradient_(unit_direction);
  }

 private:
  SphereFn unit_sphere_stddev_;
  SphereGradFn sphere_gradient_;
  bool smooth_;
};

// Result of pushing a dataset through a linear-statistic map: derived
// features W*X, derived responses W*Y, and the full derived noise covariance
// W*diag(sigma^2)*W^T, which is generally non-diagonal.
struct TransformedDataset {
  MatrixXd features;
  std::optional<VectorXd> responses;
  MatrixXd noise_covariance;
  bool correlated = false;  // true when the noise covariance is non-diagonal

  Eigen::Index row_count() const { return features.rows(); }
  Eigen::Index dimension() const { return features.cols(); }
};

// A data production process that turns base records into weighted linear
// statistics (averages, differences, projections): one derived record per
// weight row.
class LinearStatisticDpp {
 public:
  LinearStatisticDpp(Dataset base, MatrixXd weights)
      : base_(std::move(base)), weights_(std::move(weights)) {
    if (weights_.cols() != base_.row_count()) {
      throw std::invalid_argument(
          "LinearStatisticDpp: weight columns must match the base record count");
    }
  }

  const Dataset& base() const { return base_; }
  const MatrixXd& weights() const { return weights_; }

 private:
  Dataset base_;
  MatrixXd weights_;
};

}  // namespace datapricer
