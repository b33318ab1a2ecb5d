#pragma once

// Gaussian-process regression with a Matern-5/2 kernel and grid-selected
// hyperparameters, plus the Expected Improvement acquisition.

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <span>
#include <vector>

#include "kgf/error.hpp"

namespace kgf {

inline constexpr double kGpJitter = 1e-6;

struct KernelParams {
  double length_scale = 1.0;
  double signal_variance = 1.0;
  double noise_variance = 1e-4;
};

inline double matern52(double distance, const KernelParams& k) {
  const double r = std::sqrt(5.0) * distance / k.length_scale;
  return k.signal_variance * (1.0 + r + r * r / 3.0) * std::exp(-r);
}

/// The three 5-point log grids searched for the kernel hyperparameters.
inline const std::array<double, 5>& length_scale_grid() {
  static const std::array<double, 5> g{0.05, 0.05 * std::pow(10.0, 0.5), 0.5, 0.5 * std::pow(10.0, 0.5), 5.0};
  return g;
}
inline const std::array<double, 5>& signal_variance_grid() {
  static const std::array<double, 5> g{0.1, std::pow(10.0, -0.5), 1.0, std::pow(10.0, 0.5), 10.0};
  return g;
}
inline const std::array<double, 5>& noise_variance_grid() {
  static const std::array<double, 5> g{1e-6, std::pow(10.0, -4.75), std::pow(10.0, -3.5), std::pow(10.0, -2.25), 1e-1};
  return g;
}

struct Prediction {
  double mean = 0.0;
  double sd = 0.0;
};

class GaussianProcess {
 public:
  /// Fits to rows of `inputs` (encoded into [0,1]) with raw outcomes. The
  /// outcomes are standardised; a zero spread is replaced by one.
  static GaussianProcess fit(const Eigen::MatrixXd& inputs, std::span<const double> outcomes) {
    const auto n = inputs.rows();
    if (n < 2 || static_cast<std::size_t>(n) != outcomes.size()) {
      fail(ErrorKind::InsufficientData, "a surrogate needs at least two observations");
    }
    GaussianProcess gp;
    gp.inputs_ = inputs;
    double mean = 0.0;
    for (double y : outcomes) mean += y;
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (double y : outcomes) var += (y - mean) * (y - mean);
    var /= static_cast<double>(n);
    gp.offset_ = mean;
    gp.scale_ = var > 0.0 ? std::sqrt(var) : 1.0;
    gp.targets_.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) gp.targets_[i] = (outcomes[i] - mean) / gp.scale_;

    Eigen::MatrixXd dist(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = 0; j < n; ++j) dist(i, j) = (inputs.row(i) - inputs.row(j)).norm();
    }
    bool found = false;
    for (double ell : length_scale_grid()) {
      for (double sig : signal_variance_grid()) {
        for (double noise : noise_variance_grid()) {
          const KernelParams k{ell, sig, noise};
          Eigen::MatrixXd K(n, n);
          for (Eigen::Index i = 0; i < n; ++i) {
            for (Eigen::Index j = 0; j < n; ++j) K(i, j) = matern52(dist(i, j), k);
            K(i, i) += noise + kGpJitter;
          }
          Eigen::LLT<Eigen::MatrixXd> llt(K);
          if (llt.info() != Eigen::Success) continue;
          const Eigen::VectorXd alpha = llt.solve(gp.targets_);
          const Eigen::MatrixXd L = llt.matrixL();
          const double lml = -0.5 * gp.targets_.dot(alpha) - L.diagonal().array().log().sum() -
                             0.5 * static_cast<double>(n) * std::log(2.0 * std::numbers::pi);
          if (!found || lml > gp.log_marginal_) {
            found = true;
            gp.log_marginal_ = lml;
            gp.kernel_ = k;
            gp.llt_ = llt;
            gp.alpha_ = alpha;
          }
        }
      }
    }
    if (!found) fail(ErrorKind::NumericalFault, "kernel matrix is not positive definite for any grid point");
    return gp;
  }

  /// Latent posterior in standardised units.
  Prediction predict_standardized(const Eigen::VectorXd& x) const {
    const auto n = inputs_.rows();
    Eigen::VectorXd ks(n);
    for (Eigen::Index i = 0; i < n; ++i) ks[i] = matern52((inputs_.row(i).transpose() - x).norm(), kernel_);
    const double mean = ks.dot(alpha_);
    const Eigen::VectorXd v = llt_.matrixL().solve(ks);
    const double var = std::max(0.0, kernel_.signal_variance - v.squaredNorm());
    return {mean, std::sqrt(var)};
  }

  /// Latent posterior in outcome units.
  Prediction predict(const Eigen::VectorXd& x) const {
    const auto p = predict_standardized(x);
    return {offset_ + scale_ * p.mean, scale_ * p.sd};
  }

  const KernelParams& kernel() const { return kernel_; }
  double log_marginal_likelihood() const { return log_marginal_; }
  const Eigen::VectorXd& standardized_outcomes() const { return targets_; }
  const Eigen::MatrixXd& inputs() const { return inputs_; }
  double outcome_offset() const { return offset_; }
  double outcome_scale() const { return scale_; }
  Eigen::Index input_dimension() const { return inputs_.cols(); }

 private:
  Eigen::MatrixXd inputs_;
  Eigen::VectorXd targets_;
  Eigen::VectorXd alpha_;
  Eigen::LLT<Eigen::MatrixXd> llt_;
  KernelParams kernel_;
  double offset_ = 0.0;
  double scale_ = 1.0;
  double log_marginal_ = -std::numeric_limits<double>::infinity();
};

inline double normal_pdf(double z) { return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi); }
inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

/// EI for maximisation of an outcome with posterior N(mean, sd^2).
inline double expected_improvement(double mean, double sd, double best) {
  const double gain = mean - best;
  if (!(sd > 0.0)) return std::max(gain, 0.0);
  const double z = gain / sd;
  return std::max(0.0, gain * normal_cdf(z) + sd * normal_pdf(z));
}

inline double expected_improvement(const GaussianProcess& gp, const Eigen::VectorXd& x, double best) {
  const auto p = gp.predict(x);
  return expected_improvement(p.mean, p.sd, best);
}

}  // namespace kgf
