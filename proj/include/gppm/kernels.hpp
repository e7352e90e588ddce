#pragma once

#include <Eigen/Dense>
#include <vector>

namespace gppm {

struct SEKernelParams {
  double amplitude = 1.0;     // output scale eta
  double length_scale = 1.0;  // rho
};

struct CyclicKernelParams {
  double amplitude = 1.0;
  double length_scale = 1.0;
  double period = 7.0;
};

// k(a,b) = eta^2 exp(-(a-b)^2 / rho^2)
double se_kernel(double a, double b, const SEKernelParams& p);

// k(a,b) = eta^2 exp(-sin^2(pi (a-b) / period) / rho^2)
// Exactly periodic: inputs a lag of `period` apart are perfectly correlated.
double cyclic_kernel(double a, double b, const CyclicKernelParams& p);

// Closed composite kernel: a squared-exponential leaf, a cyclic leaf, or a
// sum of two or more children. A sum of kernels is the kernel of the sum of
// independent processes.
class KernelSpec {
 public:
  enum class Kind { SE, Cyclic, Sum };

  static KernelSpec se(double amplitude, double length_scale);
  static KernelSpec cyclic(double amplitude, double length_scale, double period = 7.0);
  static KernelSpec sum(std::vector<KernelSpec> children);

  double operator()(double a, double b) const;
  Kind kind() const { return kind_; }
  const std::vector<KernelSpec>& children() const { return children_; }
  const SEKernelParams& se_params() const { return se_; }
  const CyclicKernelParams& cyclic_params() const { return cyc_; }
  // Prior variance at any input, k(a,a); sums over children.
  double amplitude2() const;

 private:
  KernelSpec() = default;
  Kind kind_ = Kind::SE;
  SEKernelParams se_;
  CyclicKernelParams cyc_;
  std::vector<KernelSpec> children_;
};

// Symmetric covariance matrix over one input set, plus jitter on the
// diagonal. jitter must be >= 0 and finite.
Eigen::MatrixXd covariance_matrix(const Eigen::VectorXd& inputs, const KernelSpec& k,
                                  double jitter = 0.0);

// Covariance between two input sets (rows: a, cols: b). No jitter.
Eigen::MatrixXd cross_covariance(const Eigen::VectorXd& a, const Eigen::VectorXd& b,
                                 const KernelSpec& k);

}  // namespace gppm
