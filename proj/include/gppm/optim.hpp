#pragma once

#include <Eigen/Dense>

#include <functional>

namespace gppm {

struct NelderMeadOptions {
  int max_evaluations = 4000;
  double f_tolerance = 1e-10;  // spread of simplex values
  double x_tolerance = 1e-8;   // simplex diameter
  double initial_step = 0.5;
};

struct NelderMeadResult {
  Eigen::VectorXd x;
  double value = 0.0;
  int evaluations = 0;
  bool converged = false;
};

// Derivative-free simplex minimization (standard reflection/expansion/
// contraction/shrink coefficients 1, 2, 0.5, 0.5).
NelderMeadResult nelder_mead(const std::function<double(const Eigen::VectorXd&)>& f,
                             const Eigen::VectorXd& x0,
                             const NelderMeadOptions& opts = {});

}  // namespace gppm
