#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <algorithm>
#include <cmath>
#include <vector>

#include "doctest.h"
#include "gppm/errors.hpp"
#include "gppm/inference.hpp"
#include "gppm/rng.hpp"
#include "gppm/stats.hpp"

using namespace gppm;

namespace {

Eigen::VectorXd to_vec(std::initializer_list<double> xs) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) v[i++] = x;
  return v;
}

// 10-d correlated Gaussian with varied scales and banded correlation
struct GaussianTarget {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
  Eigen::MatrixXd prec;

  static GaussianTarget make(int d) {
    GaussianTarget g;
    g.mean.resize(d);
    g.cov.resize(d, d);
    for (int i = 0; i < d; ++i) g.mean[i] = 0.4 * ((i % 3) - 1);
    for (int i = 0; i < d; ++i) {
      const double si = 0.5 + 0.15 * i;
      for (int j = 0; j < d; ++j) {
        const double sj = 0.5 + 0.15 * j;
        g.cov(i, j) = si * sj * std::pow(0.85, std::abs(i - j));
      }
    }
    g.prec = g.cov.inverse();
    return g;
  }
  HmcTarget target() const {
    HmcTarget t;
    t.dim = static_cast<int>(mean.size());
    t.logp_grad = [this](const Eigen::VectorXd& q, Eigen::VectorXd& grad) {
      const Eigen::VectorXd d = q - mean;
      grad = -prec * d;
      return -0.5 * d.dot(prec * d);
    };
    return t;
  }
};

}  // namespace

TEST_CASE("split rhat and ess reproduce frozen reference values") {
  const Eigen::VectorXd c1 = to_vec({1, 2, 3, 4, 5, 6, 7, 8});
  const Eigen::VectorXd c2 = to_vec({8, 6, 7, 5, 3, 0, 9, 1});
  CHECK(split_rhat({c1, c2}) == doctest::Approx(1.2618069831575263).epsilon(1e-14));
  CHECK(ess({c1, c2}) == doctest::Approx(29.530898680259757).epsilon(1e-12));
  // identical trending chains split into dissimilar halves
  CHECK(split_rhat({c1, c1}) == doctest::Approx(1.987460691435179).epsilon(1e-14));
}

TEST_CASE("diagnostics behave on iid and autocorrelated chains") {
  std::vector<Eigen::VectorXd> iid;
  for (int k = 0; k < 4; ++k) {
    Rng rng = Rng::stream(99, static_cast<std::uint64_t>(k));
    Eigen::VectorXd c(1000);
    for (int i = 0; i < 1000; ++i) c[i] = rng.normal();
    iid.push_back(c);
  }
  CHECK(split_rhat(iid) > 0.99);
  CHECK(split_rhat(iid) < 1.02);
  CHECK(ess(iid) > 0.7 * 4000);
  CHECK(ess(iid) < 1.3 * 4000);

  // AR(1) with phi = 0.7 has an ess ratio of (1-phi)/(1+phi) = 0.1765
  std::vector<Eigen::VectorXd> ar;
  const double phi = 0.7;
  for (int k = 0; k < 4; ++k) {
    Rng rng = Rng::stream(7, static_cast<std::uint64_t>(k));
    Eigen::VectorXd c(20000);
    c[0] = rng.normal();
    for (int i = 1; i < 20000; ++i)
      c[i] = phi * c[i - 1] + std::sqrt(1.0 - phi * phi) * rng.normal();
    ar.push_back(c);
  }
  const double ratio = ess(ar) / 80000.0;
  CHECK(ratio > 0.14);
  CHECK(ratio < 0.21);
}

TEST_CASE("diagnostics validate their inputs") {
  const Eigen::VectorXd c1 = to_vec({1, 2, 3, 4, 5, 6, 7, 8});
  CHECK_THROWS_AS((void)split_rhat({c1}), ValidationError);
  CHECK_THROWS_AS((void)split_rhat({c1, to_vec({1, 2})}), ValidationError);
  CHECK_THROWS_AS((void)ess({to_vec({1, 2}), to_vec({1, 2})}), ValidationError);
}

TEST_CASE("hmc draws are deterministic in the seed") {
  const auto g = GaussianTarget::make(3);
  HmcOptions o;
  o.chains = 2;
  o.warmup = 150;
  o.iterations = 50;
  o.seed = 11;
  const auto a = hmc_sample(g.target(), o);
  const auto b = hmc_sample(g.target(), o);
  CHECK((a.chains[0] - b.chains[0]).cwiseAbs().maxCoeff() == 0.0);
  CHECK((a.chains[1] - b.chains[1]).cwiseAbs().maxCoeff() == 0.0);
  CHECK((a.chains[0] - a.chains[1]).cwiseAbs().maxCoeff() > 0.0);
  o.seed = 12;
  const auto c = hmc_sample(g.target(), o);
  CHECK((a.chains[0] - c.chains[0]).cwiseAbs().maxCoeff() > 0.0);
  CHECK(a.names.size() == 3);
  CHECK(a.names[0] == "theta[1]");
  CHECK(a.dim() == 3);
  CHECK(a.draws_per_chain() == 50);
  CHECK(a.pooled(0).size() == 100);
}

TEST_CASE("hmc recovers a 10-d correlated gaussian") {
  const auto g = GaussianTarget::make(10);
  HmcOptions o;
  o.chains = 4;
  o.warmup = 500;
  o.iterations = 1000;
  o.seed = 20240817;
  const auto draws = hmc_sample(g.target(), o);

  const int n = 4 * 1000;
  Eigen::MatrixXd all(n, 10);
  int at = 0;
  for (const auto& c : draws.chains) {
    all.middleRows(at, c.rows()) = c;
    at += static_cast<int>(c.rows());
  }
  const Eigen::RowVectorXd mean = all.colwise().mean();
  for (int i = 0; i < 10; ++i) {
    INFO("coordinate ", i);
    CHECK(std::abs(mean[i] - g.mean[i]) < 0.1);
  }
  const Eigen::MatrixXd centered = all.rowwise() - mean;
  const Eigen::MatrixXd sample_cov = centered.transpose() * centered / (n - 1.0);
  const double frob = (sample_cov - g.cov).norm() / g.cov.norm();
  INFO("relative frobenius error ", frob);
  CHECK(frob < 0.2);
  for (int i = 0; i < 10; ++i) {
    const double r = split_rhat(draws.coordinate(i));
    INFO("coordinate ", i, " rhat ", r);
    CHECK(r >= 0.99);
    CHECK(r <= 1.05);
  }
  for (const auto& s : draws.stats) {
    CHECK(s.divergences == 0);
    CHECK(s.accept_rate > 0.6);
    CHECK(s.step_size > 0.0);
    // mass adaptation absorbs most of the scale spread (variances 0.25..4.1)
    CHECK(s.inv_mass.maxCoeff() / s.inv_mass.minCoeff() > 2.0);
  }
}

TEST_CASE("hmc marginal matches the standard normal cdf") {
  HmcTarget t;
  t.dim = 1;
  t.logp_grad = [](const Eigen::VectorXd& q, Eigen::VectorXd& grad) {
    grad = -q;
    return -0.5 * q.squaredNorm();
  };
  HmcOptions o;
  o.chains = 4;
  o.warmup = 300;
  o.iterations = 1000;
  o.seed = 5;
  const auto draws = hmc_sample(t, o);
  Eigen::VectorXd x = draws.pooled(0);
  std::sort(x.data(), x.data() + x.size());
  double d = 0.0;
  const double n = static_cast<double>(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double f = normal_cdf(x[i]);
    d = std::max(d, std::abs(f - (i + 1) / n));
    d = std::max(d, std::abs(f - i / n));
  }
  INFO("ks distance ", d);
  CHECK(d < 0.06);
  CHECK(std::abs(x.mean()) < 0.08);
  CHECK(std::abs(variance(x) - 1.0) < 0.15);
}

TEST_CASE("hmc surfaces failed initialization and divergent chains") {
  HmcTarget bad;
  bad.dim = 2;
  bad.logp_grad = [](const Eigen::VectorXd&, Eigen::VectorXd& grad) {
    grad.setZero(2);
    return -std::numeric_limits<double>::infinity();
  };
  HmcOptions o;
  o.chains = 1;
  o.warmup = 0;
  o.iterations = 20;
  CHECK_THROWS_AS((void)hmc_sample(bad, o), NumericalError);

  HmcTarget explosive;
  explosive.dim = 1;
  explosive.logp_grad = [](const Eigen::VectorXd& q, Eigen::VectorXd& grad) {
    grad = -4e8 * q.array().cube().matrix();
    return -1e8 * std::pow(q[0], 4);
  };
  HmcOptions o2;
  o2.chains = 1;
  o2.warmup = 0;
  o2.iterations = 40;
  o2.initial_step_size = 5.0;
  CHECK_THROWS_AS((void)hmc_sample(explosive, o2), NumericalError);
}

TEST_CASE("hmc validates its options") {
  const auto g = GaussianTarget::make(2);
  HmcOptions o;
  o.warmup = 50;  // adaptation needs room
  CHECK_THROWS_AS((void)hmc_sample(g.target(), o), ValidationError);
  HmcOptions o2;
  o2.chains = 0;
  CHECK_THROWS_AS((void)hmc_sample(g.target(), o2), ValidationError);
  HmcOptions o3;
  CHECK_THROWS_AS((void)hmc_sample(g.target(), o3, {"a"}), ValidationError);
  HmcTarget no_grad;
  no_grad.dim = 2;
  CHECK_THROWS_AS((void)hmc_sample(no_grad, o3), ValidationError);
}
