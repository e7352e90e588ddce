#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace gppm {

// Differentiable log density on unconstrained coordinates. logp_grad returns
// the log density and fills grad; throwing NumericalError rejects the
// trajectory that triggered it.
struct HmcTarget {
  int dim = 0;
  std::function<double(const Eigen::VectorXd&, Eigen::VectorXd&)> logp_grad;
};

struct HmcOptions {
  int chains = 4;
  int warmup = 500;      // adaptation iterations per chain; 0 disables adaptation
  int iterations = 500;  // retained draws per chain
  int max_leapfrog = 32;
  double target_accept = 0.8;
  double initial_step_size = 0.1;
  double init_radius = 1.0;  // starting points drawn uniform(-radius, radius)
  bool adapt_mass = true;
  std::uint64_t seed = 1;
};

struct ChainStats {
  double accept_rate = 0.0;  // mean Metropolis acceptance probability
  int divergences = 0;       // during the retained phase
  double step_size = 0.0;
  Eigen::VectorXd inv_mass;
};

struct PosteriorDraws {
  std::vector<Eigen::MatrixXd> chains;  // one iterations-by-dim matrix per chain
  std::vector<std::string> names;
  std::vector<ChainStats> stats;
  std::uint64_t seed = 0;

  int dim() const { return chains.empty() ? 0 : static_cast<int>(chains[0].cols()); }
  int draws_per_chain() const {
    return chains.empty() ? 0 : static_cast<int>(chains[0].rows());
  }
  // one coordinate's trace, per chain / pooled across chains
  std::vector<Eigen::VectorXd> coordinate(int i) const;
  Eigen::VectorXd pooled(int i) const;
};

// Serial HMC with jittered leapfrog length, dual-averaged step size, and a
// diagonal mass matrix estimated from the middle of warmup. Chains run one
// after another on deterministic seed streams. Throws NumericalError when a
// chain cannot find a finite starting point or when more than a quarter of
// its retained iterations diverge.
PosteriorDraws hmc_sample(const HmcTarget& target, const HmcOptions& opts,
                          std::vector<std::string> names = {});

// Split-chain potential scale reduction. Chains must share a common length;
// each is halved (middle element dropped when odd) before comparison.
double split_rhat(const std::vector<Eigen::VectorXd>& chains);

// Effective sample size from paired autocovariance sums with monotone
// truncation. Unsplit chains, matching the estimator used throughout.
double ess(const std::vector<Eigen::VectorXd>& chains);

}  // namespace gppm
