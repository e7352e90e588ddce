#include "gppm/optim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include "gppm/errors.hpp"

namespace gppm {

NelderMeadResult nelder_mead(const std::function<double(const Eigen::VectorXd&)>& f,
                             const Eigen::VectorXd& x0, const NelderMeadOptions& opts) {
  if (!f) throw ValidationError("nelder_mead: objective is empty");
  const int n = static_cast<int>(x0.size());
  if (n < 1) throw ValidationError("nelder_mead: empty starting point");

  NelderMeadResult res;
  auto eval = [&](const Eigen::VectorXd& x) {
    ++res.evaluations;
    const double v = f(x);
    return std::isnan(v) ? std::numeric_limits<double>::infinity() : v;
  };
  std::vector<Eigen::VectorXd> xs(static_cast<std::size_t>(n) + 1, x0);
  std::vector<double> fs(static_cast<std::size_t>(n) + 1);
  for (int i = 0; i < n; ++i) xs[static_cast<std::size_t>(i) + 1][i] += opts.initial_step;
  for (std::size_t i = 0; i < xs.size(); ++i) fs[i] = eval(xs[i]);
  std::vector<std::size_t> order(xs.size());

  while (res.evaluations < opts.max_evaluations) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return fs[a] < fs[b]; });
    const std::size_t best = order.front(), worst = order.back();
    const std::size_t second_worst = order[order.size() - 2];

    double diam = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i)
      diam = std::max(diam, (xs[i] - xs[best]).cwiseAbs().maxCoeff());
    if (std::abs(fs[worst] - fs[best]) <
            opts.f_tolerance * (1.0 + std::abs(fs[best])) &&
        diam < opts.x_tolerance) {
      res.converged = true;
      break;
    }

    Eigen::VectorXd centroid = Eigen::VectorXd::Zero(n);
    for (std::size_t i = 0; i < xs.size(); ++i)
      if (i != worst) centroid += xs[i];
    centroid /= static_cast<double>(n);

    const Eigen::VectorXd xr = centroid + (centroid - xs[worst]);
    const double fr = eval(xr);
    if (fr < fs[best]) {
      const Eigen::VectorXd xe = centroid + 2.0 * (centroid - xs[worst]);
      const double fe = eval(xe);
      if (fe < fr) {
        xs[worst] = xe;
        fs[worst] = fe;
      } else {
        xs[worst] = xr;
        fs[worst] = fr;
      }
    } else if (fr < fs[second_worst]) {
      xs[worst] = xr;
      fs[worst] = fr;
    } else {
      const bool outside = fr < fs[worst];
      const Eigen::VectorXd base = outside ? xr : xs[worst];
      const Eigen::VectorXd xc = centroid + 0.5 * (base - centroid);
      const double fc = eval(xc);
      if (fc < std::min(fr, fs[worst])) {
        xs[worst] = xc;
        fs[worst] = fc;
      } else {
        for (std::size_t i = 0; i < xs.size(); ++i) {
          if (i == best) continue;
          xs[i] = xs[best] + 0.5 * (xs[i] - xs[best]);
          fs[i] = eval(xs[i]);
        }
      }
    }
  }

  const std::size_t best = static_cast<std::size_t>(
      std::min_element(fs.begin(), fs.end()) - fs.begin());
  res.x = xs[best];
  res.value = fs[best];
  return res;
}

}  // namespace gppm
