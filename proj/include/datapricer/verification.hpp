#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "datapricer/mechanisms.hpp"
#include "datapricer/parallel.hpp"

namespace datapricer {

inline constexpr double kIcDefaultTol = 1e-9;
inline constexpr double kGradientDefaultTol = 1e-4;
inline constexpr double kPathDefaultTol = 1e-6;
inline constexpr double kIsotropyTol = 1e-9;
inline constexpr double kWitnessGainFloor = 1e-6;

// Discretization of the unit sphere of buyer types. Points are validated to
// unit norm and pairwise angular separation at construction.
class TypeGrid {
 public:
  static TypeGrid angular_mesh(Eigen::Index resolution) {
    if (resolution < 1) throw std::invalid_argument("TypeGrid: resolution must be positive");
    std::vector<VectorXd> points;
    points.reserve(static_cast<std::size_t>(resolution));
    for (Eigen::Index k = 0; k < resolution; ++k) {
      const double angle = 2.0 * std::numbers::pi * static_cast<double>(k) /
                           static_cast<double>(resolution);
      VectorXd p(2);
      p << std::cos(angle), std::sin(angle);
      points.push_back(std::move(p));
    }
    return TypeGrid(std::move(points), /*validate=*/false);
  }

  static TypeGrid fibonacci_sphere(Eigen::Index count) {
    if (count < 1) throw std::invalid_argument("TypeGrid: count must be positive");
    const double golden_angle = std::numbers::pi * (3.0 - std::sqrt(5.0));
    std::vector<VectorXd> points;
    points.reserve(static_cast<std::size_t>(count));
    for (Eigen::Index i = 0; i < count; ++i) {
      const double z = 1.0 - 2.0 * (static_cast<double>(i) + 0.5) / static_cast<double>(count);
      const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
      const double phi = golden_angle * static_cast<double>(i);
      VectorXd p(3);
      p << r * std::cos(phi), r * std::sin(phi), z;
      points.push_back(p.normalized());
    }
    return TypeGrid(std::move(points), /*validate=*/false);
  }

  static TypeGrid uniform_random(Eigen::Index dimension, Eigen::Index count, std::uint64_t seed) {
    if (dimension < 1 || count < 1) {
      throw std::invalid_argument("TypeGrid: dimension and count must be positive");
    }
    Rng rng(seed);
    std::vector<VectorXd> points;
    points.reserve(static_cast<std::size_t>(count));
    while (static_cast<Eigen::Index>(points.size()) < count) {
      VectorXd p(dimension);
      for (Eigen::Index i = 0; i < dimension; ++i) p[i] = rng.normal();
      const double norm = p.norm();
      if (norm < 1e-8) continue;
      points.push_back(p / norm);
    }
    return TypeGrid(std::move(points), /*validate=*/false);
  }

  static TypeGrid explicit_points(std::vector<VectorXd> points) {
    return TypeGrid(std::move(points), /*validate=*/true);
  }

  // Defaults sized to expose the worked-example violations while staying
  // cheap: 720 equiangular points in the plane, 1000 Fibonacci points on the
  // 2-sphere, 2048 seeded uniform points above.
  static TypeGrid default_for_dimension(Eigen::Index dimension, std::uint64_t seed = 0) {
    if (dimension == 2) return angular_mesh(720);
    if (dimension == 3) return fibonacci_sphere(1000);
    if (dimension > 3) return uniform_random(dimension, 2048, seed);
    std::vector<VectorXd> poles;
    poles.push_back(VectorXd::Ones(1));
    poles.push_back(-VectorXd::Ones(1));
    return TypeGrid(std::move(poles), /*validate=*/false);
  }

  const std::vector<VectorXd>& points() const { return points_; }
  std::size_t size() const { return points_.size(); }
  Eigen::Index dimension() const { return points_.empty() ? 0 : points_.front().size(); }
  const VectorXd& operator[](std::size_t i) const { return points_[i]; }

 private:
  explicit TypeGrid(std::vector<VectorXd> points, bool validate) : points_(std::move(points)) {
    if (points_.empty()) throw std::invalid_argument("TypeGrid: grid must be nonempty");
    if (!validate) return;
    const Eigen::Index d = points_.front().size();
    for (const auto& p : points_) {
      if (p.size() != d) throw std::invalid_argument("TypeGrid: mixed dimensions");
      if (std::abs(p.norm() - 1.0) > 1e-12) {
        throw std::invalid_argument("TypeGrid: points must have unit norm");
      }
    }
    for (std::size_t i = 0; i < points_.size(); ++i) {
      for (std::size_t j = i + 1; j < points_.size(); ++j) {
        const double cosine = std::clamp(points_[i].dot(points_[j]), -1.0, 1.0);
        if (std::acos(cosine) < 1e-9) {
          throw std::invalid_argument("TypeGrid: duplicate points within angular tolerance");
        }
      }
    }
  }

  std::vector<VectorXd> points_;
};

struct Witness {
  VectorXd truthful_type;
  std::optional<VectorXd> reported_type;
  std::size_t truthful_index = 0;
  std::size_t reported_index = 0;
};

struct VerificationReport {
  std::string check_name;
  bool passed = false;
  double worst_violation = 0.0;
  std::optional<Witness> witness;
  std::size_t grid_size = 0;
  double tolerance = 0.0;
};

using QuoteFn = std::function<MechanismQuote(const VectorXd&)>;

inline QuoteFn perfect_quote_fn(long sample_count, NoiseModel noise) {
  return [sample_count, noise = std::move(noise)](const VectorXd& report) {
    return perfect_mechanism_quote(report, sample_count, noise);
  };
}

inline QuoteFn svd_quote_fn(Dataset data) {
  auto prep = svd_mechanism_prepare(data);
  return [data = std::move(data), prep = std::move(prep)](const VectorXd& report) {
    return svd_mechanism_quote(prep, data, report);
  };
}

// The would-be full-surplus mechanism under limited customization: hand over
// the entire dataset and charge the reported type's full value. Not IC on
// anisotropic data; used by the impossibility demonstration.
inline QuoteFn full_reveal_quote_fn(Dataset data) {
  return [data = std::move(data)](const VectorXd& report) {
    if (report.norm() == 0.0) {
      throw std::invalid_argument("full_reveal_quote_fn: report must be nonzero");
    }
    MechanismQuote quote;
    quote.reported_type_raw = report;
    quote.reported_type = report.normalized();
    quote.payment_nats = first_best(quote.reported_type, data);
    quote.allocation = data;
    return quote;
  };
}

namespace detail {

struct QuoteSurface {
  std::vector<MatrixXd> posterior;     // (I + info(alloc))^-1 per grid point
  std::vector<double> payment;
  std::vector<double> truthful_value;  // value of the truthful allocation
};

inline QuoteSurface evaluate_quotes(const QuoteFn& mechanism, const TypeGrid& grid) {
  const Eigen::Index d = grid.dimension();
  QuoteSurface surface;
  surface.posterior.resize(grid.size());
  surface.payment.resize(grid.size());
  surface.truthful_value.resize(grid.size());
  const MatrixXd identity = MatrixXd::Identity(d, d);
  for (std::size_t j = 0; j < grid.size(); ++j) {
    try {
      const MechanismQuote quote = mechanism(grid[j]);
      surface.payment[j] = quote.payment_nats;
      surface.posterior[j] =
          quote.allocation.row_count() == 0
              ? identity
              : sym_inverse(identity + information_matrix(quote.allocation),
                            "allocation information");
      surface.truthful_value[j] = -0.5 * std::log(grid[j].dot(surface.posterior[j] * grid[j]));
    } catch (const std::exception& e) {
      throw NumericError("mechanism failed at grid point " + std::to_string(j) + ": " +
                         e.what());
    }
  }
  return surface;
}

struct WorstCase {
  double violation = -std::numeric_limits<double>::infinity();
  std::size_t truthful = 0;
  std::size_t reported = 0;
  bool any = false;
};

}  // namespace detail

// Incentive-compatibility audit over all ordered grid pairs (x, xhat):
// reports the largest utility gain any type can obtain by misreporting.
// Pair evaluation is chunked across workers; chunks merge in fixed order with
// lexicographic index tie-breaking, so the witness does not depend on the
// worker count.
inline VerificationReport check_ic(const QuoteFn& mechanism, const TypeGrid& grid,
                                   double tolerance = kIcDefaultTol) {
  const auto surface = detail::evaluate_quotes(mechanism, grid);
  const std::size_t count = grid.size();

  const std::size_t chunk_count = std::min<std::size_t>(count, 128);
  std::vector<detail::WorstCase> chunk_worst(chunk_count);
  parallel_chunks(count, chunk_count, [&](std::size_t begin, std::size_t end, std::size_t c) {
    detail::WorstCase local;
    for (std::size_t i = begin; i < end; ++i) {
      const VectorXd& x = grid[i];
      const double truthful_utility = surface.truthful_value[i] - surface.payment[i];
      for (std::size_t j = 0; j < count; ++j) {
        if (j == i) continue;
        const double deviation_value = -0.5 * std::log(x.dot(surface.posterior[j] * x));
        const double gain = deviation_value - surface.payment[j] - truthful_utility;
        if (!local.any || gain > local.violation) {
          local = {gain, i, j, true};
        }
      }
    }
    chunk_worst[c] = local;
  });

  detail::WorstCase worst;
  for (const auto& local : chunk_worst) {
    if (!local.any) continue;
    if (!worst.any || local.violation > worst.violation) worst = local;
  }

  VerificationReport report;
  report.check_name = "ic";
  report.grid_size = count;
  report.tolerance = tolerance;
  report.worst_violation = worst.any ? worst.violation : 0.0;
  if (worst.any) {
    report.witness =
        Witness{grid[worst.truthful], grid[worst.reported], worst.truthful, worst.reported};
  }
  report.passed = report.worst_violation <= tolerance;
  return report;
}

// Individual-rationality audit: largest excess of payment over truthful value.
inline VerificationReport check_ir(const QuoteFn& mechanism, const TypeGrid& grid,
                                   double tolerance = kIcDefaultTol) {
  const auto surface = detail::evaluate_quotes(mechanism, grid);
  VerificationReport report;
  report.check_name = "ir";
  report.grid_size = grid.size();
  report.tolerance = tolerance;
  report.worst_violation = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double violation = surface.payment[i] - surface.truthful_value[i];
    if (violation > report.worst_violation) {
      report.worst_violation = violation;
      report.witness = Witness{grid[i], std::nullopt, i, i};
    }
  }
  report.passed = report.worst_violation <= tolerance;
  return report;
}

struct RegretAuditReport {
  std::vector<double> per_point_regret;
  std::vector<double> per_point_sharp_bound;
  double max_regret = 0.0;
  std::size_t max_regret_index = 0;
  double bound_ln_kappa = 0.0;
  bool passed = false;
  std::size_t grid_size = 0;
};

// Compares the SVD mechanism's price against the first-best benchmark at
// every grid type and audits both the log-kappa bound and the per-point
// Cauchy-Schwarz bound.
inline RegretAuditReport regret_audit(const Dataset& data, const TypeGrid& grid) {
  const auto prep = svd_mechanism_prepare(data);
  const auto kappa = condition_number(data);
  if (!kappa.full_rank) throw NumericError("regret_audit: rank-deficient design");

  const Eigen::Index d = data.dimension();
  const MatrixXd design = detail::normalized_features(data);
  const MatrixXd full_posterior =
      sym_inverse(MatrixXd::Identity(d, d) + design.transpose() * design, "full information");

  RegretAuditReport report;
  report.grid_size = grid.size();
  report.bound_ln_kappa = std::log(kappa.value);
  report.per_point_regret.resize(grid.size());
  report.per_point_sharp_bound.resize(grid.size());

  bool ok = true;
  double max_regret = -std::numeric_limits<double>::infinity();
  std::size_t argmax = 0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const VectorXd& x = grid[i];
    const double benchmark = -0.5 * std::log(x.dot(full_posterior * x));
    const double payment = svd_mechanism_quote(prep, data, x).payment_nats;
    const double regret = benchmark - payment;
    const double sharp = svd_sharp_regret_bound(prep, x);
    report.per_point_regret[i] = regret;
    report.per_point_sharp_bound[i] = sharp;
    if (regret < -1e-10) ok = false;               // payment may never exceed first-best
    if (regret > sharp + kIcDefaultTol) ok = false;
    if (regret > max_regret) {
      max_regret = regret;
      argmax = i;
    }
  }
  report.max_regret = max_regret;
  report.max_regret_index = argmax;
  report.passed = ok && max_regret <= report.bound_ln_kappa + kIcDefaultTol;
  return report;
}

struct ImpossibilityReport {
  bool is_isotropic = false;
  bool witness_found = false;  // neither flag set: inconclusive at this grid
  double anisotropy = 0.0;     // relative deviation of the Gram matrix from c*I
  double deviation_gain = 0.0;
  std::optional<Witness> witness;
  std::size_t grid_size = 0;
  std::string note;
};

// Exhibits, on anisotropic data, a type pair for which the candidate
// full-surplus mechanism (reveal everything, charge the report's value) is
// not incentive compatible. On isotropic data no such pair exists and the
// first best is achievable. This demonstrates the failure of one candidate
// mechanism at grid resolution; it does not quantify over all mechanisms.
inline ImpossibilityReport impossibility_demo(const Dataset& data, const TypeGrid& grid) {
  const auto kappa = condition_number(data);
  if (!kappa.full_rank) throw NumericError("impossibility_demo: rank-deficient design");

  const Eigen::Index d = data.dimension();
  const MatrixXd design = detail::normalized_features(data);
  const MatrixXd gram = symmetrize(design.transpose() * design);
  const double scale = gram.trace() / static_cast<double>(d);
  const double anisotropy =
      (gram - scale * MatrixXd::Identity(d, d)).cwiseAbs().maxCoeff() / scale;

  ImpossibilityReport report;
  report.grid_size = grid.size();
  report.anisotropy = anisotropy;
  if (anisotropy <= kIsotropyTol) {
    report.is_isotropic = true;
    report.note = "design is isotropic to tolerance; first-best revenue is achievable";
    return report;
  }

  const MatrixXd posterior =
      sym_inverse(MatrixXd::Identity(d, d) + gram, "full information");
  std::size_t best = 0, worst = 0;
  double best_value = -std::numeric_limits<double>::infinity();
  double worst_value = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double value = -0.5 * std::log(grid[i].dot(posterior * grid[i]));
    if (value > best_value) {
      best_value = value;
      best = i;
    }
    if (value < worst_value) {
      worst_value = value;
      worst = i;
    }
  }
  // A type at the most-informed direction misreports the least-informed one:
  // it keeps the full dataset but pays the smaller fee.
  report.deviation_gain = best_value - worst_value;
  if (report.deviation_gain > kWitnessGainFloor) {
    report.witness_found = true;
    report.witness = Witness{grid[best], grid[worst], best, worst};
    report.note = "candidate full-surplus mechanism rejected by the witness pair";
  } else {
    report.note = "anisotropy too small for this grid to exhibit a witness";
  }
  return report;
}

struct EnvelopeReport {
  double max_gradient_error = 0.0;
  double gradient_tolerance = kGradientDefaultTol;
  std::size_t worst_gradient_index = 0;
  double max_path_mismatch = 0.0;
  double path_tolerance = kPathDefaultTol;
  std::size_t path_pairs = 0;
  bool passed = false;
  std::size_t grid_size = 0;
};

namespace detail {

// Closed-form tangential payment gradient at a unit type. Falls back to
// central differences of the sphere noise function when no analytic gradient
// is attached.
inline VectorXd payment_gradient(const NoiseModel& noise, long sample_count, const VectorXd& x) {
  const double sigma = noise.sphere_value(x);
  const double dt_dsigma = -static_cast<double>(sample_count) /
                           (sigma * (sigma * sigma + static_cast<double>(sample_count)));
  VectorXd sigma_grad;
  if (noise.has_sphere_gradient()) {
    sigma_grad = noise.sphere_gradient(x);
  } else {
    const double h = 1e-6;
    sigma_grad = VectorXd::Zero(x.size());
    for (Eigen::Index k = 0; k < x.size(); ++k) {
      VectorXd plus = (x + h * VectorXd::Unit(x.size(), k)).normalized();
      VectorXd minus = (x - h * VectorXd::Unit(x.size(), k)).normalized();
      sigma_grad[k] = (noise.sphere_value(plus) - noise.sphere_value(minus)) / (2.0 * h);
    }
  }
  VectorXd gradient = dt_dsigma * sigma_grad;
  return gradient - gradient.dot(x) * x;  // tangential component
}

inline double closed_form_payment(const NoiseModel& noise, long sample_count, const VectorXd& x) {
  return perfect_payment(noise.sphere_value(x), 0.0, sample_count);
}

// Orthonormal basis of the tangent space at unit x.
inline std::vector<VectorXd> tangent_basis(const VectorXd& x) {
  const Eigen::Index d = x.size();
  std::vector<VectorXd> basis;
  basis.reserve(static_cast<std::size_t>(d - 1));
  for (Eigen::Index k = 0; k < d && static_cast<Eigen::Index>(basis.size()) < d - 1; ++k) {
    VectorXd v = VectorXd::Unit(d, k);
    v -= v.dot(x) * x;
    for (const auto& b : basis) v -= v.dot(b) * b;
    const double norm = v.norm();
    if (norm > 1e-6) basis.push_back(v / norm);
  }
  return basis;
}

// Line integral of the payment gradient along the great circle from a to b,
// by composite Simpson over the spherical interpolation.
inline double integrate_payment_gradient(const NoiseModel& noise, long sample_count,
                                         const VectorXd& a, const VectorXd& b) {
  const double cosine = std::clamp(a.dot(b), -1.0, 1.0);
  const double theta = std::acos(cosine);
  if (theta < 1e-12) return 0.0;
  const double sin_theta = std::sin(theta);
  auto point = [&](double s) {
    return ((std::sin((1.0 - s) * theta) * a + std::sin(s * theta) * b) / sin_theta).eval();
  };
  auto velocity = [&](double s) {
    return ((theta / sin_theta) *
            (-std::cos((1.0 - s) * theta) * a + std::cos(s * theta) * b))
        .eval();
  };
  auto integrand = [&](double s) {
    return payment_gradient(noise, sample_count, point(s)).dot(velocity(s));
  };
  const int intervals = 2000;
  const double h = 1.0 / intervals;
  double total = integrand(0.0) + integrand(1.0);
  for (int i = 1; i < intervals; ++i) total += integrand(i * h) * (i % 2 == 1 ? 4.0 : 2.0);
  return total * h / 3.0;
}

}  // namespace detail

// Certifies the envelope identity behind the perfect-customization payment:
// the tangential gradient of the closed-form fee matches the tangential
// derivative of the buyer's value in the reported direction, and the fee is
// recovered path-independently by integrating that gradient.
inline EnvelopeReport envelope_gradient_check(const NoiseModel& noise, long sample_count,
                                              const TypeGrid& grid, std::size_t path_pairs = 20,
                                              std::uint64_t seed = 0,
                                              double gradient_tolerance = kGradientDefaultTol,
                                              double path_tolerance = kPathDefaultTol) {
  if (!noise.smooth()) {
    throw std::invalid_argument("envelope_gradient_check: noise model is not smooth");
  }
  if (sample_count <= 0) {
    throw std::invalid_argument("envelope_gradient_check: sample count must be positive");
  }
  EnvelopeReport report;
  report.grid_size = grid.size();
  report.gradient_tolerance = gradient_tolerance;
  report.path_tolerance = path_tolerance;
  report.path_pairs = path_pairs;

  const double step = 1e-5;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const VectorXd& x = grid[i];
    const VectorXd closed_form = detail::payment_gradient(noise, sample_count, x);
    for (const VectorXd& tangent : detail::tangent_basis(x)) {
      const VectorXd forward = (x + step * tangent).normalized();
      const VectorXd backward = (x - step * tangent).normalized();
      const double fd = (perfect_customization_value(x, forward, sample_count, noise) -
                         perfect_customization_value(x, backward, sample_count, noise)) /
                        (2.0 * step);
      const double error = std::abs(closed_form.dot(tangent) - fd);
      if (error > report.max_gradient_error) {
        report.max_gradient_error = error;
        report.worst_gradient_index = i;
      }
    }
  }

  Rng rng(seed);
  const Eigen::Index d = grid.dimension();
  auto random_unit = [&]() {
    VectorXd v(d);
    do {
      for (Eigen::Index k = 0; k < d; ++k) v[k] = rng.normal();
    } while (v.norm() < 1e-8);
    return (v / v.norm()).eval();
  };
  for (std::size_t pair = 0; pair < path_pairs; ++pair) {
    VectorXd a, b, via;
    do {
      a = grid[rng.next_word() % grid.size()];
      b = grid[rng.next_word() % grid.size()];
    } while (std::abs(a.dot(b)) > 1.0 - 1e-6);
    do {
      via = random_unit();
    } while (std::abs(via.dot(a)) > 1.0 - 1e-6 || std::abs(via.dot(b)) > 1.0 - 1e-6);

    const double direct = detail::integrate_payment_gradient(noise, sample_count, a, b);
    const double detour = detail::integrate_payment_gradient(noise, sample_count, a, via) +
                          detail::integrate_payment_gradient(noise, sample_count, via, b);
    const double fee_difference = detail::closed_form_payment(noise, sample_count, b) -
                                  detail::closed_form_payment(noise, sample_count, a);
    const double mismatch =
        std::max(std::abs(direct - detour), std::abs(direct - fee_difference));
    report.max_path_mismatch = std::max(report.max_path_mismatch, mismatch);
  }

  report.passed = report.max_gradient_error <= gradient_tolerance &&
                  report.max_path_mismatch <= path_tolerance;
  return report;
}

}  // namespace datapricer
