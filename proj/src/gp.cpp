#include "gppm/gp.hpp"

#include <Eigen/Cholesky>
#include <cmath>
#include <sstream>

#include "gppm/errors.hpp"
#include "gppm/rng.hpp"

namespace gppm {
namespace {

constexpr double kLog2Pi = 1.8378770664093453;

void check_grid(const Eigen::VectorXd& grid) {
  for (Eigen::Index i = 0; i < grid.size(); ++i) {
    if (!std::isfinite(grid[i])) throw ValidationError("gp: non-finite grid input");
    if (i > 0 && !(grid[i] > grid[i - 1]))
      throw ValidationError("gp: grid must be strictly increasing");
  }
}

}  // namespace

MeanFunction MeanFunction::zero() { return MeanFunction{}; }

MeanFunction MeanFunction::constant(double level) {
  if (!std::isfinite(level)) throw ValidationError("MeanFunction: non-finite level");
  MeanFunction m;
  m.kind_ = Kind::Constant;
  m.level_ = level;
  return m;
}

MeanFunction MeanFunction::power_decay(double scale, double exponent) {
  if (!std::isfinite(scale) || !std::isfinite(exponent))
    throw ValidationError("MeanFunction: non-finite power decay parameter");
  if (!(scale >= 0.0)) throw ValidationError("MeanFunction: decay scale must be >= 0");
  if (!(exponent > 0.0)) throw ValidationError("MeanFunction: decay exponent must be positive");
  MeanFunction m;
  m.kind_ = Kind::PowerDecay;
  m.scale_ = scale;
  m.exponent_ = exponent;
  return m;
}

double MeanFunction::operator()(double tau) const {
  switch (kind_) {
    case Kind::Zero:
      return 0.0;
    case Kind::Constant:
      return level_;
    case Kind::PowerDecay:
      if (!(tau >= 1.0)) throw ValidationError("MeanFunction: power decay needs tau >= 1");
      if (tau == 1.0) return 0.0;  // anchored exactly
      return -scale_ * std::pow(tau - 1.0, exponent_);
  }
  return 0.0;  // unreachable
}

Eigen::VectorXd MeanFunction::eval(const Eigen::VectorXd& inputs) const {
  Eigen::VectorXd out(inputs.size());
  for (Eigen::Index i = 0; i < inputs.size(); ++i) out[i] = (*this)(inputs[i]);
  return out;
}

Eigen::MatrixXd stable_cholesky(const Eigen::MatrixXd& K, double scale, double* jitter_used) {
  if (K.rows() != K.cols()) throw ValidationError("stable_cholesky: matrix not square");
  if (!(scale > 0.0) || !std::isfinite(scale))
    throw ValidationError("stable_cholesky: scale must be positive and finite");
  double jitter = 0.0;
  for (int attempt = 0; attempt < 6; ++attempt) {
    Eigen::MatrixXd Kj = K;
    if (jitter > 0.0) Kj.diagonal().array() += jitter;
    Eigen::LLT<Eigen::MatrixXd> llt(Kj);
    if (llt.info() == Eigen::Success) {
      if (jitter_used) *jitter_used = jitter;
      return llt.matrixL();
    }
    jitter = (jitter == 0.0) ? 1e-8 * scale : 10.0 * jitter;
  }
  std::ostringstream msg;
  msg << "stable_cholesky: factorization failed for " << K.rows() << "x" << K.cols()
      << " matrix after escalating jitter to " << 1e-4 * scale;
  throw NumericalError(msg.str());
}

Eigen::MatrixXd cholesky_forward_diff(const Eigen::MatrixXd& L, const Eigen::MatrixXd& dK) {
  const Eigen::Index n = L.rows();
  if (dK.rows() != n || dK.cols() != n)
    throw ValidationError("cholesky_forward_diff: size mismatch");
  // A = L^{-1} dK L^{-T}, then dL = L * phi(A) with phi keeping the lower
  // triangle and halving the diagonal.
  Eigen::MatrixXd X = L.triangularView<Eigen::Lower>().solve(dK);
  Eigen::MatrixXd A = L.triangularView<Eigen::Lower>().solve(X.transpose());
  Eigen::MatrixXd phi = A.triangularView<Eigen::StrictlyLower>();
  phi.diagonal() = 0.5 * A.diagonal();
  return L.triangularView<Eigen::Lower>() * phi;
}

double gp_log_density(const GPComponent& c, double jitter) {
  check_grid(c.grid);
  if (c.values.size() != c.grid.size())
    throw ValidationError("gp_log_density: values/grid size mismatch");
  const Eigen::Index n = c.grid.size();
  if (n == 0) throw ValidationError("gp_log_density: empty grid");
  const Eigen::MatrixXd K = covariance_matrix(c.grid, c.kernel, jitter);
  const Eigen::MatrixXd L = stable_cholesky(K, c.kernel.amplitude2());
  const Eigen::VectorXd r = c.values - c.mean.eval(c.grid);
  const Eigen::VectorXd alpha = L.triangularView<Eigen::Lower>().solve(r);
  const double logdet_half = L.diagonal().array().log().sum();
  return -0.5 * alpha.squaredNorm() - logdet_half - 0.5 * static_cast<double>(n) * kLog2Pi;
}

GPComponent unwhiten(const WhitenedComponent& w) {
  check_grid(w.grid);
  if (w.z.size() != w.grid.size()) throw ValidationError("unwhiten: z/grid size mismatch");
  const Eigen::MatrixXd K = covariance_matrix(w.grid, w.kernel, w.jitter);
  const Eigen::MatrixXd L = stable_cholesky(K, w.kernel.amplitude2());
  GPComponent c;
  c.grid = w.grid;
  c.mean = w.mean;
  c.kernel = w.kernel;
  c.values = w.mean.eval(w.grid) + L.triangularView<Eigen::Lower>() * w.z;
  return c;
}

GPConditional gp_conditional(const GPComponent& c, const Eigen::VectorXd& new_inputs,
                             double jitter) {
  check_grid(c.grid);
  if (c.values.size() != c.grid.size())
    throw ValidationError("gp_conditional: values/grid size mismatch");
  for (Eigen::Index i = 0; i < new_inputs.size(); ++i)
    if (!std::isfinite(new_inputs[i])) throw ValidationError("gp_conditional: non-finite input");

  const Eigen::MatrixXd K = covariance_matrix(c.grid, c.kernel, jitter);
  const Eigen::MatrixXd L = stable_cholesky(K, c.kernel.amplitude2());
  const Eigen::MatrixXd Ks = cross_covariance(c.grid, new_inputs, c.kernel);
  const Eigen::MatrixXd Kss = covariance_matrix(new_inputs, c.kernel, 0.0);

  const Eigen::VectorXd r = c.values - c.mean.eval(c.grid);
  const Eigen::VectorXd alpha = L.triangularView<Eigen::Lower>().solve(r);
  const Eigen::MatrixXd V = L.triangularView<Eigen::Lower>().solve(Ks);

  GPConditional out;
  out.mean = c.mean.eval(new_inputs) + V.transpose() * alpha;
  out.cov = Kss - V.transpose() * V;
  return out;
}

Eigen::VectorXd gp_sample_conditional(const GPComponent& c, const Eigen::VectorXd& new_inputs,
                                      std::uint64_t rng_seed, double jitter) {
  GPConditional cond = gp_conditional(c, new_inputs, jitter);
  const Eigen::Index m = new_inputs.size();
  if (m == 0) return Eigen::VectorXd();
  // conditional covariance can be numerically singular when the new inputs
  // interpolate the grid; the jitter ladder handles it
  const Eigen::MatrixXd Lc = stable_cholesky(cond.cov, c.kernel.amplitude2());
  Rng rng(rng_seed);
  Eigen::VectorXd z(m);
  for (Eigen::Index i = 0; i < m; ++i) z[i] = rng.normal();
  return cond.mean + Lc.triangularView<Eigen::Lower>() * z;
}

}  // namespace gppm
