#pragma once

#include <Eigen/Dense>
#include <cstdint>

#include "gppm/kernels.hpp"

namespace gppm {

// Prior mean over a component's input grid. PowerDecay is anchored so that
// the value at input 1 is exactly zero: m(tau) = -scale * (tau - 1)^exponent.
class MeanFunction {
 public:
  enum class Kind { Zero, Constant, PowerDecay };

  static MeanFunction zero();
  static MeanFunction constant(double level);
  static MeanFunction power_decay(double scale, double exponent);

  double operator()(double tau) const;
  Eigen::VectorXd eval(const Eigen::VectorXd& inputs) const;

  Kind kind() const { return kind_; }
  double level() const { return level_; }
  double scale() const { return scale_; }
  double exponent() const { return exponent_; }

 private:
  Kind kind_ = Kind::Zero;
  double level_ = 0.0;
  double scale_ = 0.0;
  double exponent_ = 1.0;
};

// A GP restricted to a finite, strictly increasing input grid.
struct GPComponent {
  Eigen::VectorXd grid;
  Eigen::VectorXd values;  // f(grid)
  MeanFunction mean;
  KernelSpec kernel = KernelSpec::se(1.0, 1.0);
};

// Whitened coordinates: f = m(grid) + L z with L the Cholesky factor of the
// grid covariance. Sampling in z keeps the posterior geometry well behaved.
struct WhitenedComponent {
  Eigen::VectorXd grid;
  Eigen::VectorXd z;
  MeanFunction mean;
  KernelSpec kernel = KernelSpec::se(1.0, 1.0);
  double jitter = 0.0;
};

// Baseline relative jitter shared by the whitening and conditioning paths:
// absolute jitter is this times the kernel amplitude squared.
inline constexpr double kGpJitterFloor = 1e-8;

// Lower Cholesky factor with escalating diagonal jitter. The matrix is tried
// as given, then with scale * (1e-8, 1e-7, ..., 1e-4) added to the diagonal.
// Throws NumericalError once the ladder is exhausted. jitter_used receives
// the absolute jitter that succeeded.
Eigen::MatrixXd stable_cholesky(const Eigen::MatrixXd& K, double scale,
                                double* jitter_used = nullptr);

// Forward-mode derivative of the Cholesky factor: given lower L with
// L L^T = K and a symmetric perturbation dK, returns dL such that
// d(L L^T) = dK (Murray 2016, differentiation through the standard
// recurrence). Cost is two triangular solves and one triangular product.
Eigen::MatrixXd cholesky_forward_diff(const Eigen::MatrixXd& L, const Eigen::MatrixXd& dK);

// Log density of values under the GP prior on the grid (multivariate normal
// with kernel covariance plus jitter on the diagonal). Includes constants.
double gp_log_density(const GPComponent& c, double jitter = 0.0);

GPComponent unwhiten(const WhitenedComponent& w);

struct GPConditional {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
};

// Exact conditional of the GP at new inputs given the component's grid
// values. jitter is added to the training covariance diagonal only.
GPConditional gp_conditional(const GPComponent& c, const Eigen::VectorXd& new_inputs,
                             double jitter = 0.0);

// One joint draw from the conditional at the new inputs.
Eigen::VectorXd gp_sample_conditional(const GPComponent& c, const Eigen::VectorXd& new_inputs,
                                      std::uint64_t rng_seed, double jitter = 0.0);

}  // namespace gppm
