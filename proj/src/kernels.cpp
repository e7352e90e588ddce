#include "gppm/kernels.hpp"

#include <cmath>

#include "gppm/errors.hpp"

namespace gppm {
namespace {

void require_finite(double x, const char* what) {
  if (!std::isfinite(x)) throw ValidationError(std::string("kernel: non-finite ") + what);
}

void check_se(const SEKernelParams& p) {
  require_finite(p.amplitude, "amplitude");
  require_finite(p.length_scale, "length_scale");
  if (!(p.amplitude > 0.0)) throw ValidationError("kernel: amplitude must be positive");
  if (!(p.length_scale > 0.0)) throw ValidationError("kernel: length_scale must be positive");
}

void check_cyclic(const CyclicKernelParams& p) {
  require_finite(p.amplitude, "amplitude");
  require_finite(p.length_scale, "length_scale");
  require_finite(p.period, "period");
  if (!(p.amplitude > 0.0)) throw ValidationError("kernel: amplitude must be positive");
  if (!(p.length_scale > 0.0)) throw ValidationError("kernel: length_scale must be positive");
  if (!(p.period > 0.0)) throw ValidationError("kernel: period must be positive");
}

}  // namespace

double se_kernel(double a, double b, const SEKernelParams& p) {
  check_se(p);
  require_finite(a, "input");
  require_finite(b, "input");
  const double d = (a - b) / p.length_scale;
  return p.amplitude * p.amplitude * std::exp(-d * d);
}

double cyclic_kernel(double a, double b, const CyclicKernelParams& p) {
  check_cyclic(p);
  require_finite(a, "input");
  require_finite(b, "input");
  const double s = std::sin(M_PI * (a - b) / p.period) / p.length_scale;
  return p.amplitude * p.amplitude * std::exp(-s * s);
}

KernelSpec KernelSpec::se(double amplitude, double length_scale) {
  KernelSpec k;
  k.kind_ = Kind::SE;
  k.se_ = {amplitude, length_scale};
  check_se(k.se_);
  return k;
}

KernelSpec KernelSpec::cyclic(double amplitude, double length_scale, double period) {
  KernelSpec k;
  k.kind_ = Kind::Cyclic;
  k.cyc_ = {amplitude, length_scale, period};
  check_cyclic(k.cyc_);
  return k;
}

KernelSpec KernelSpec::sum(std::vector<KernelSpec> children) {
  if (children.size() < 2) throw ValidationError("kernel sum: needs at least two children");
  KernelSpec k;
  k.kind_ = Kind::Sum;
  k.children_ = std::move(children);
  return k;
}

double KernelSpec::operator()(double a, double b) const {
  switch (kind_) {
    case Kind::SE:
      return se_kernel(a, b, se_);
    case Kind::Cyclic:
      return cyclic_kernel(a, b, cyc_);
    case Kind::Sum: {
      double acc = 0.0;
      for (const auto& c : children_) acc += c(a, b);
      return acc;
    }
  }
  return 0.0;  // unreachable
}

double KernelSpec::amplitude2() const {
  switch (kind_) {
    case Kind::SE:
      return se_.amplitude * se_.amplitude;
    case Kind::Cyclic:
      return cyc_.amplitude * cyc_.amplitude;
    case Kind::Sum: {
      double acc = 0.0;
      for (const auto& c : children_) acc += c.amplitude2();
      return acc;
    }
  }
  return 0.0;  // unreachable
}

Eigen::MatrixXd covariance_matrix(const Eigen::VectorXd& inputs, const KernelSpec& k,
                                  double jitter) {
  if (!(jitter >= 0.0) || !std::isfinite(jitter))
    throw ValidationError("covariance_matrix: jitter must be finite and >= 0");
  const Eigen::Index n = inputs.size();
  Eigen::MatrixXd K(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index i = j; i < n; ++i) {
      const double v = k(inputs[i], inputs[j]);
      K(i, j) = v;
      K(j, i) = v;
    }
  }
  K.diagonal().array() += jitter;
  return K;
}

Eigen::MatrixXd cross_covariance(const Eigen::VectorXd& a, const Eigen::VectorXd& b,
                                 const KernelSpec& k) {
  Eigen::MatrixXd K(a.size(), b.size());
  for (Eigen::Index j = 0; j < b.size(); ++j)
    for (Eigen::Index i = 0; i < a.size(); ++i) K(i, j) = k(a[i], b[j]);
  return K;
}

}  // namespace gppm
