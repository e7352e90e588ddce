#include "gppm/stats.hpp"

#include <algorithm>
#include <cmath>

#include "gppm/errors.hpp"

namespace gppm {

double mean(const Eigen::VectorXd& v) {
  if (v.size() == 0) throw ValidationError("mean: empty vector");
  return v.mean();
}

double variance(const Eigen::VectorXd& v) {
  const auto n = v.size();
  if (n < 2) return 0.0;
  const double m = v.mean();
  return (v.array() - m).square().sum() / static_cast<double>(n - 1);
}

double quantile(std::vector<double> v, double q) {
  if (v.empty()) throw ValidationError("quantile: empty sample");
  if (!(q >= 0.0 && q <= 1.0)) throw ValidationError("quantile: q outside [0, 1]");
  std::sort(v.begin(), v.end());
  const double h = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(h);
  if (lo + 1 >= v.size()) return v.back();
  const double frac = h - static_cast<double>(lo);
  return v[lo] + frac * (v[lo + 1] - v[lo]);
}

double median(const std::vector<double>& v) { return quantile(v, 0.5); }

double quantile(const Eigen::VectorXd& v, double q) {
  return quantile(std::vector<double>(v.data(), v.data() + v.size()), q);
}

double median(const Eigen::VectorXd& v) { return quantile(v, 0.5); }

double pearson_correlation(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  if (a.size() != b.size() || a.size() < 2)
    throw ValidationError("pearson_correlation: size mismatch or too short");
  const Eigen::ArrayXd ca = a.array() - a.mean();
  const Eigen::ArrayXd cb = b.array() - b.mean();
  const double denom = std::sqrt(ca.square().sum() * cb.square().sum());
  if (denom == 0.0) throw ValidationError("pearson_correlation: zero variance input");
  return (ca * cb).sum() / denom;
}

double lag_autocorrelation(const Eigen::VectorXd& v, int lag) {
  const auto n = v.size();
  if (lag < 0 || lag >= n) throw ValidationError("lag_autocorrelation: lag out of range");
  const double m = v.mean();
  const Eigen::ArrayXd c = v.array() - m;
  // same accumulation order for both sums so that lag 0 is exactly 1
  double denom = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) denom += c[i] * c[i];
  if (denom == 0.0) throw ValidationError("lag_autocorrelation: zero variance input");
  double num = 0.0;
  for (Eigen::Index i = 0; i + lag < n; ++i) num += c[i] * c[i + lag];
  return num / denom;
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

double invlogit(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace gppm
