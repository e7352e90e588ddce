#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "gppm/data.hpp"
#include "gppm/gp.hpp"

namespace gppm {

// Which pieces of the additive propensity are estimated. The full model uses
// everything; the reduced variant keeps only recency/lifetime (plus effects);
// the reduced-cyclic variant adds back the cyclic component.
struct ModelSpec {
  bool long_run = true;
  bool short_run = true;
  bool cyclic = true;
  bool recency = true;
  bool lifetime = true;
  bool purchase_number = true;
  bool channel = true;
  bool heterogeneity = true;
  bool day_effects = true;
  int purchase_number_cap = 10;
  double cyclic_period = 7.0;

  static ModelSpec full() { return ModelSpec{}; }
  static ModelSpec reduced();         // no calendar components
  static ModelSpec reduced_cyclic();  // cyclic only among the calendar components
  void validate() const;
};

// Structural facts a parameter layout depends on, independent of the data
// values themselves. Serialized with posterior draws so curves can be
// rebuilt without the panel.
struct ModelDims {
  int horizon = 0;
  int n_recency = 1;
  int n_lifetime = 1;
  int n_customers = 0;
  std::vector<std::string> channel_levels;
  std::vector<int> first_spend_days;  // sorted distinct
  std::vector<int> install_days;      // sorted distinct
};

// Offsets into the unconstrained parameter vector; -1 marks absent blocks.
// Scalars come first so indices [0, scalars) are the hyperparameters.
struct GppmLayout {
  int mu = -1;
  int eta_long = -1, gap = -1;
  int eta_short = -1, rho_short = -1;
  int eta_cyclic = -1, rho_cyclic = -1;
  int eta_recency = -1, rho_recency = -1, l1_recency = -1, l2_recency = -1;
  int eta_lifetime = -1, rho_lifetime = -1, l1_lifetime = -1, l2_lifetime = -1;
  int sigma_delta = -1, sigma_fs = -1, sigma_inst = -1;
  int z_long = -1, z_short = -1, z_cyclic = -1, z_recency = -1, z_lifetime = -1;
  int beta = -1, gamma = -1, delta = -1, fs = -1, inst = -1;
  int n_beta = 0, n_gamma = 0, n_cyclic = 0;
  int scalars = 0;
  int dim = 0;
  std::vector<std::string> names;
};

GppmLayout build_layout(const ModelSpec& spec, const ModelDims& dims);

struct GppmComponent {
  bool active = false;
  GPComponent gp;       // curve on its grid; identified after apply_identification
  double anchor = 0.0;  // raw value at grid input 1 removed by identification
};

// Constrained parameter view: curves plus effect vectors on their natural
// scales. delta / first_spend_effects / install_effects are the scaled
// effects (sd times the whitened coordinates).
struct GppmParams {
  double mu = 0.0;
  GppmComponent long_run, short_run, cyclic, recency, lifetime;
  Eigen::VectorXd beta, gamma;
  Eigen::VectorXd delta, first_spend_effects, install_effects;
  double sigma_delta = 0.0, sigma_first_spend = 0.0, sigma_install = 0.0;
  bool identified = false;
};

// Pins each component curve at its first grid input: the value at input 1 is
// subtracted from everything except the long-run component, which keeps the
// overall level mu. Idempotent.
GppmParams apply_identification(GppmParams p);

// Constrained view of one unconstrained point, built from structural facts
// alone so saved draws can be turned back into curves without the panel.
// Identification is not applied.
GppmParams constrain_point(const ModelSpec& spec, const ModelDims& dims,
                           const GppmLayout& layout, const Eigen::VectorXd& u);

class GppmModel {
 public:
  GppmModel(SpendPanel panel, ModelSpec spec);

  int dim() const { return layout_.dim; }
  int scalar_count() const { return layout_.scalars; }
  const GppmLayout& layout() const { return layout_; }
  const std::vector<std::string>& param_names() const { return layout_.names; }
  const SpendPanel& panel() const { return panel_; }
  const ModelSpec& spec() const { return spec_; }
  const ModelDims& dims() const { return dims_; }
  std::size_t observation_count() const { return obs_t_.size(); }

  // Constrained views of one unconstrained point. constrain() applies the
  // identification; constrain_raw() leaves curves unanchored.
  GppmParams constrain_raw(const Eigen::VectorXd& u) const;
  GppmParams constrain(const Eigen::VectorXd& u) const;

  // Propensity for one risk-set day from identified params.
  double latent_propensity(const GppmParams& p, std::size_t customer,
                           const ObservationTriple& tr) const;
  // Reference Bernoulli likelihood over the whole risk set (slow path).
  double log_likelihood(const GppmParams& p) const;

  double log_prior(const Eigen::VectorXd& u) const;
  double log_posterior(const Eigen::VectorXd& u) const;
  // Value plus analytic gradient; grad is resized. Non-finite gradients are
  // reported as NumericalError.
  double log_posterior_grad(const Eigen::VectorXd& u, Eigen::VectorXd& grad) const;

  // Effect indices used by the predictive simulators.
  int first_spend_index(std::size_t customer) const { return fs_idx_[customer]; }
  int install_index(std::size_t customer) const { return inst_idx_[customer]; }

 private:
  double eval(const Eigen::VectorXd& u, Eigen::VectorXd* grad,
              bool include_likelihood = true) const;
  void check_dim(const Eigen::VectorXd& u) const;

  SpendPanel panel_;
  ModelSpec spec_;
  ModelDims dims_;
  GppmLayout layout_;

  // flattened risk set
  std::vector<int> obs_cust_, obs_t_, obs_r_, obs_l_, obs_pn_;
  std::vector<std::uint8_t> obs_y_;
  std::vector<int> fs_idx_, inst_idx_;  // per customer
};

}  // namespace gppm
