#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstddef>
#include <vector>

#include "datapricer/errors.hpp"

namespace datapricer {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// A matrix is treated as singular when lambda_min <= kSingularRelTol * lambda_max.
// Calibrated for double-precision dense algebra at d <= 64.
inline constexpr double kSingularRelTol = 1e-12;

// Relative slack allowed on the most negative eigenvalue of a covariance.
inline constexpr double kPsdRelTol = 1e-10;

// Relative asymmetry allowed before a covariance is rejected.
inline constexpr double kSymmetryRelTol = 1e-12;

inline MatrixXd symmetrize(const MatrixXd& m) { return 0.5 * (m + m.transpose()); }

inline bool is_symmetric(const MatrixXd& m, double rel_tol = kSymmetryRelTol) {
  if (m.rows() != m.cols()) return false;
  const double scale = m.cwiseAbs().maxCoeff();
  if (scale == 0.0) return true;
  return (m - m.transpose()).cwiseAbs().maxCoeff() <= rel_tol * scale;
}

namespace detail {

inline Eigen::SelfAdjointEigenSolver<MatrixXd> eigensolve(const MatrixXd& m,
                                                          const char* context) {
  Eigen::SelfAdjointEigenSolver<MatrixXd> solver(symmetrize(m));
  if (solver.info() != Eigen::Success) {
    throw NumericError(std::string(context) + ": eigendecomposition failed");
  }
  return solver;
}

}  // namespace detail

// Inverse of a symmetric positive-definite matrix via eigendecomposition.
// The result is symmetrized to suppress round-off drift.
inline MatrixXd sym_inverse(const MatrixXd& m, const char* context = "sym_inverse") {
  const auto solver = detail::eigensolve(m, context);
  const VectorXd& ev = solver.eigenvalues();
  const double max_ev = ev.cwiseAbs().maxCoeff();
  if (max_ev == 0.0 || ev.minCoeff() <= kSingularRelTol * max_ev) {
    throw NumericError(std::string(context) + ": matrix is singular or not positive definite");
  }
  const MatrixXd inv =
      solver.eigenvectors() * ev.cwiseInverse().asDiagonal() * solver.eigenvectors().transpose();
  return symmetrize(inv);
}

// Symmetric square root of a positive-definite matrix.
inline MatrixXd sym_sqrt(const MatrixXd& m, const char* context = "sym_sqrt") {
  const auto solver = detail::eigensolve(m, context);
  const VectorXd& ev = solver.eigenvalues();
  const double max_ev = ev.cwiseAbs().maxCoeff();
  if (max_ev == 0.0 || ev.minCoeff() <= kSingularRelTol * max_ev) {
    throw NumericError(std::string(context) + ": matrix is singular or not positive definite");
  }
  const MatrixXd root =
      solver.eigenvectors() * ev.cwiseSqrt().asDiagonal() * solver.eigenvectors().transpose();
  return symmetrize(root);
}

inline MatrixXd sym_inv_sqrt(const MatrixXd& m, const char* context = "sym_inv_sqrt") {
  const auto solver = detail::eigensolve(m, context);
  const VectorXd& ev = solver.eigenvalues();
  const double max_ev = ev.cwiseAbs().maxCoeff();
  if (max_ev == 0.0 || ev.minCoeff() <= kSingularRelTol * max_ev) {
    throw NumericError(std::string(context) + ": matrix is singular or not positive definite");
  }
  const MatrixXd root = solver.eigenvectors() * ev.cwiseSqrt().cwiseInverse().asDiagonal() *
                        solver.eigenvectors().transpose();
  return symmetrize(root);
}

// Smallest eigenvalue may dip slightly below zero from round-off; anything
// below -kPsdRelTol * lambda_max is a genuine violation.
inline bool is_positive_semidefinite(const MatrixXd& m, double rel_tol = kPsdRelTol) {
  const auto solver = detail::eigensolve(m, "is_positive_semidefinite");
  const VectorXd& ev = solver.eigenvalues();
  const double max_ev = ev.size() > 0 ? ev.cwiseAbs().maxCoeff() : 0.0;
  return ev.minCoeff() >= -rel_tol * std::max(max_ev, 1.0e-300);
}

// Deterministic summation with a fixed binary-tree association, bit-stable
// regardless of how the addends were produced.
inline double pairwise_sum(std::vector<double> values) {
  if (values.empty()) return 0.0;
  std::size_t count = values.size();
  while (count > 1) {
    const std::size_t half = (count + 1) / 2;
    for (std::size_t i = 0; i + half < count; ++i) values[i] += values[i + half];
    count = half;
  }
  return values[0];
}

}  // namespace datapricer
