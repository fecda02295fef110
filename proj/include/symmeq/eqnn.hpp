#pragma once

#include <memory>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "symmeq/autodiff.hpp"
#include "symmeq/intertwiner.hpp"
#include "symmeq/layout.hpp"
#include "symmeq/signed_perm.hpp"

namespace symmeq {

enum class Activation { Elu, Relu };

Activation activation_from_name(const std::string& name);
const char* activation_name(Activation a);

// Common surface for equivariant and unconstrained feed-forward stacks.
class Net {
 public:
  virtual ~Net() = default;
  virtual std::size_t in_dim() const = 0;
  virtual std::size_t out_dim() const = 0;
  virtual ad::Var forward(const ad::Var& x, ad::Tape& tape) const = 0;  // x [batch, in]
  virtual Tensor apply(const Tensor& x) const = 0;                      // [batch, in]
  virtual std::vector<Tensor*> parameters() = 0;
  virtual std::vector<const Tensor*> parameters() const = 0;
};

// Evaluates a net on a single vector.
Tensor apply_vec(const Net& net, const Tensor& x);

// Linear layer whose weights live in the intertwiner space of
// (rho_in, rho_out), parameterized by free orbit coefficients.
class EquivariantLinear {
 public:
  EquivariantLinear(const SignedPermutation& rho_in, const SignedPermutation& rho_out,
                    std::mt19937_64& rng);

  std::size_t in_dim() const { return rho_in_.size(); }
  std::size_t out_dim() const { return rho_out_.size(); }
  std::size_t free_param_count() const { return wtheta_.size() + btheta_.size(); }

  const SignedPermutation& rho_in() const { return rho_in_; }
  const SignedPermutation& rho_out() const { return rho_out_; }
  const WeightPlan& weight_plan() const { return wplan_; }
  const BiasPlan& bias_plan() const { return bplan_; }

  Tensor realized_weight() const { return realize_weight(wplan_, wtheta_); }
  Tensor realized_bias() const { return realize_bias(bplan_, btheta_); }

  ad::Var forward(const ad::Var& x, ad::Tape& tape) const;
  Tensor apply(const Tensor& x) const;

  Tensor& weight_params() { return wtheta_; }
  Tensor& bias_params() { return btheta_; }
  const Tensor& weight_params() const { return wtheta_; }
  const Tensor& bias_params() const { return btheta_; }

 private:
  SignedPermutation rho_in_, rho_out_;
  WeightPlan wplan_;
  BiasPlan bplan_;
  Tensor wtheta_, btheta_;  // free orbit coefficients
};

// Stack of equivariant linear layers with pointwise activations on the hidden
// regular representations. Construction rejects an activation on any feature
// whose representation carries a -1 sign.
class EquivariantMLP : public Net {
 public:
  EquivariantMLP(std::vector<SignedPermutation> reps, Activation act, std::mt19937_64& rng);

  std::size_t in_dim() const override { return reps_.front().size(); }
  std::size_t out_dim() const override { return reps_.back().size(); }
  ad::Var forward(const ad::Var& x, ad::Tape& tape) const override;
  Tensor apply(const Tensor& x) const override;
  std::vector<Tensor*> parameters() override;
  std::vector<const Tensor*> parameters() const override;

  const std::vector<EquivariantLinear>& layers() const { return layers_; }
  const std::vector<SignedPermutation>& reps() const { return reps_; }

 private:
  std::vector<SignedPermutation> reps_;
  std::vector<EquivariantLinear> layers_;
  Activation act_;
};

// input rep -> regular hidden widths (even) -> output rep.
std::unique_ptr<EquivariantMLP> make_equivariant_mlp(const SignedPermutation& in_rep,
                                                     const std::vector<std::size_t>& hidden,
                                                     const SignedPermutation& out_rep,
                                                     Activation act, std::mt19937_64& rng);

// Standard dense MLP with unconstrained weights.
class VanillaMLP : public Net {
 public:
  VanillaMLP(std::size_t in_dim, const std::vector<std::size_t>& hidden, std::size_t out_dim,
             Activation act, std::mt19937_64& rng);

  std::size_t in_dim() const override { return dims_.front(); }
  std::size_t out_dim() const override { return dims_.back(); }
  ad::Var forward(const ad::Var& x, ad::Tape& tape) const override;
  Tensor apply(const Tensor& x) const override;
  std::vector<Tensor*> parameters() override;
  std::vector<const Tensor*> parameters() const override;

 private:
  std::vector<std::size_t> dims_;
  std::vector<Tensor> weights_, biases_;
  Activation act_;
};

std::unique_ptr<Net> make_mlp(bool equivariant, const SignedPermutation& in_rep,
                              const std::vector<std::size_t>& hidden,
                              const SignedPermutation& out_rep, Activation act,
                              std::mt19937_64& rng);

// Diagonal Gaussian head. The log-std is stored with one value per F_a orbit,
// so swapped action pairs share a standard deviation at the parameter level.
class GaussianPolicyHead {
 public:
  GaussianPolicyHead(const SignedPermutation& f_a, double init_log_std);

  std::size_t action_dim() const { return sigma_index_.size(); }
  std::size_t sigma_slot_count() const { return log_std_.size(); }
  const std::vector<std::size_t>& sigma_index() const { return sigma_index_; }

  Tensor sigma() const;    // [adim]
  Tensor log_sigma() const;  // [adim]

  std::pair<Tensor, double> sample(const Tensor& mu, std::mt19937_64& rng) const;
  double log_prob(const Tensor& mu, const Tensor& action) const;

  // [batch] log-probabilities of stored actions under the current parameters.
  ad::Var log_prob_rows(const ad::Var& mu, const Tensor& actions, ad::Tape& tape) const;
  ad::Var entropy(ad::Tape& tape) const;
  double entropy_value() const;

  Tensor& log_std_params() { return log_std_; }
  const Tensor& log_std_params() const { return log_std_; }

 private:
  std::vector<std::size_t> sigma_index_;  // action dim -> parameter slot
  std::shared_ptr<const ad::ScatterPlan> expand_plan_;
  Tensor log_std_;
};

struct ActorConfig {
  std::size_t history_len = 5;  // h: input is h+1 observations
  std::vector<std::size_t> encoder_widths{64, 32};
  std::vector<std::size_t> policy_widths{64, 64};
  Activation activation = Activation::Elu;
  bool equivariant = true;
  double init_log_std = 0.0;
};

// History encoder + observation decoder + policy net + Gaussian head.
class Actor {
 public:
  Actor(const LayoutProfile& profile, ActorConfig cfg, std::mt19937_64& rng);

  std::size_t obs_dim() const { return f_o_.size(); }
  std::size_t action_dim() const { return f_a_.size(); }
  std::size_t latent_dim() const { return f_z_.size(); }
  std::size_t history_len() const { return cfg_.history_len; }
  std::size_t input_width() const { return (cfg_.history_len + 1) * obs_dim(); }
  bool equivariant() const { return cfg_.equivariant; }
  const ActorConfig& config() const { return cfg_; }

  const SignedPermutation& f_o() const { return f_o_; }
  const SignedPermutation& f_a() const { return f_a_; }
  const SignedPermutation& f_z() const { return f_z_; }

  // Plain evaluation on flattened histories [batch, (h+1)*obs].
  Tensor encode(const Tensor& hist_batch) const;
  Tensor mean_action(const Tensor& hist_batch) const;
  Tensor decode(const Tensor& z_batch) const;
  Tensor mean_action_vec(const Tensor& hist_flat) const;  // single history

  // Graph evaluation.
  ad::Var latent(const ad::Var& hist_batch, ad::Tape& tape) const;
  ad::Var mean(const ad::Var& hist_batch, ad::Tape& tape) const;  // encoder + policy
  ad::Var decode(const ad::Var& z, ad::Tape& tape) const;

  GaussianPolicyHead& head() { return head_; }
  const GaussianPolicyHead& head() const { return head_; }
  const Net& encoder() const { return *encoder_; }
  const Net& policy() const { return *policy_; }
  const Net& decoder() const { return *decoder_; }

  std::vector<Tensor*> parameters();
  std::vector<const Tensor*> parameters() const;

 private:
  SignedPermutation f_o_, f_a_, f_z_;
  ActorConfig cfg_;
  std::unique_ptr<Net> encoder_, decoder_, policy_;
  GaussianPolicyHead head_;
};

struct CriticConfig {
  std::vector<std::size_t> widths{64, 64};
  Activation activation = Activation::Elu;
  bool equivariant = true;
};

// V(H, o): height strip plus single observation to a scalar (trivial rep).
class Critic {
 public:
  Critic(const LayoutProfile& profile, CriticConfig cfg, std::mt19937_64& rng);

  std::size_t height_dim() const { return f_h_.size(); }
  std::size_t obs_dim() const { return f_o_.size(); }
  std::size_t input_width() const { return f_h_.size() + f_o_.size(); }
  bool equivariant() const { return cfg_.equivariant; }

  double value(const Tensor& strip, const Tensor& obs) const;
  Tensor values(const Tensor& input_batch) const;                       // [batch] from [batch, H+o]
  ad::Var forward(const ad::Var& input_batch, ad::Tape& tape) const;    // [batch, 1]

  std::vector<Tensor*> parameters();
  std::vector<const Tensor*> parameters() const;

 private:
  SignedPermutation f_h_, f_o_;
  CriticConfig cfg_;
  std::unique_ptr<Net> net_;
};

// Full-precision decimal serialization: round-trips every double bit-exactly.
std::string double_to_string(double v);
double double_from_string(const std::string& s);
nlohmann::json tensor_to_json(const Tensor& t);
Tensor tensor_from_json(const nlohmann::json& j);
nlohmann::json params_to_json(const std::vector<const Tensor*>& params);
void params_from_json(const nlohmann::json& j, const std::vector<Tensor*>& params);

}  // namespace symmeq
