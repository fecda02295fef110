#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "symmeq/autodiff.hpp"
#include "symmeq/env.hpp"
#include "symmeq/eqnn.hpp"
#include "symmeq/layout.hpp"

namespace symmeq::rl {

struct PpoHyperparams {
  double gamma = 0.99;
  double gae_lambda = 0.95;
  double clip_ratio = 0.2;
  std::size_t epochs = 5;
  std::size_t minibatches = 4;
  double learning_rate = 5e-4;
  double desired_kl = 0.01;
  double lr_min = 1e-6;
  double lr_max = 1e-2;
  double max_grad_norm = 1.0;
  double value_coef = 1.0;
  double entropy_coef = 0.0;
  bool normalize_advantages = true;

  void validate() const;
  nlohmann::json to_json() const;
  static PpoHyperparams from_json(const nlohmann::json& j);
};

enum class Variant { SePolicy, SeActorOnly, Vanilla, VanillaRegu };

Variant variant_from_name(const std::string& name);
const char* variant_name(Variant v);
const std::vector<std::string>& variant_names();

struct VariantConfig {
  Variant variant = Variant::SePolicy;
  double lambda_reg = 0.5;  // weight of the equivariance penalty, vanilla-regu only
  PpoHyperparams ppo;

  bool actor_equivariant() const {
    return variant == Variant::SePolicy || variant == Variant::SeActorOnly;
  }
  bool critic_equivariant() const { return variant == Variant::SePolicy; }
  bool use_reg_loss() const { return variant == Variant::VanillaRegu; }

  nlohmann::json to_json() const;
  static VariantConfig from_json(const nlohmann::json& j);
};

// On-policy samples, row index = env * horizon + step.
struct RolloutBuffer {
  std::size_t num_envs = 0, horizon = 0;
  std::size_t obs_dim = 0, action_dim = 0, history_width = 0, strip_dim = 0;
  Tensor histories;      // [N, history_width]
  Tensor critic_inputs;  // [N, strip + obs]
  Tensor actions;        // [N, action_dim]
  Tensor next_obs;       // [N, obs] reconstruction targets
  std::vector<double> log_probs, rewards, values, dones;  // [N]
  std::vector<double> bootstrap_values;                   // [num_envs]
  std::vector<double> episode_returns, episode_tracking;  // completed during collection
  double mean_tracking_ratio = 0.0;                       // per-step, over the whole buffer

  std::size_t size() const { return num_envs * horizon; }
  std::size_t index(std::size_t e, std::size_t t) const { return e * horizon + t; }
  bool all_finite() const;
};

struct AdvantageEstimates {
  std::vector<double> advantages;  // A_t
  std::vector<double> targets;     // reward-to-go y_t = A_t + V_t
};

// Vector of bilateral trackers plus the per-env observation-history windows
// (zero-padded before step h) and episode statistics. Auto-resets on done.
class EnvPool {
 public:
  EnvPool(env::EnvConfig cfg, std::size_t num_envs, std::size_t history_len, std::uint64_t seed);

  std::size_t size() const { return slots_.size(); }
  std::size_t obs_dim() const { return obs_dim_; }
  std::size_t strip_dim() const { return 3; }
  std::size_t action_dim() const { return cfg_.action_dim(); }
  std::size_t history_width() const { return (history_len_ + 1) * obs_dim_; }
  const env::EnvConfig& config() const { return cfg_; }

  double curriculum() const { return level_; }
  void set_curriculum(double level);

  Tensor history_batch() const;  // [E, history_width]
  Tensor critic_batch() const;   // [E, strip + obs]

  struct StepRecord {
    Tensor next_obs;  // pre-reset observation of the successor state
    double reward = 0.0;
    bool done = false;
    double tracking = 0.0;  // (tracking rewards) / (their maximum)
    bool episode_end = false;
    double episode_return = 0.0;
    double episode_tracking = 0.0;
  };
  std::vector<StepRecord> step(const Tensor& action_batch);  // [E, action_dim]

 private:
  struct Slot {
    env::BilateralTracker env;
    std::vector<double> history;
    double ep_return = 0.0;
    double ep_tracking = 0.0;
    std::size_t ep_steps = 0;
  };
  void reset_slot(Slot& slot);
  void push_obs(Slot& slot, const Tensor& obs);

  env::EnvConfig cfg_;
  std::size_t history_len_, obs_dim_;
  std::vector<Slot> slots_;
  double level_ = 0.0;
};

RolloutBuffer collect_rollouts(const Actor& actor, const Critic& critic, EnvPool& pool,
                               std::size_t horizon, std::mt19937_64& rng,
                               bool deterministic_actions = false);

AdvantageEstimates compute_gae(const RolloutBuffer& buffer, double gamma, double lambda);

// Single-sample clipped-surrogate contribution: -min(r A, clip(r, 1-xi, 1+xi) A).
double clipped_surrogate_term(double ratio, double advantage, double xi);

// Minibatch view gathered by row indices.
struct LossBatch {
  Tensor histories, critic_inputs, actions, next_obs;
  Tensor old_log_probs, advantages, targets;  // [B]
};
LossBatch gather_batch(const RolloutBuffer& buffer, const AdvantageEstimates& adv,
                       const std::vector<std::size_t>& idx);

ad::Var ppo_loss_graph(const Actor& actor, const LossBatch& batch, double xi, ad::Tape& tape);
ad::Var value_loss_graph(const Critic& critic, const LossBatch& batch, ad::Tape& tape);
ad::Var ae_loss_graph(const Actor& actor, const LossBatch& batch, ad::Tape& tape);
ad::Var reg_loss_graph(const Actor& actor, const Tensor& histories, ad::Tape& tape);

// Scalar conveniences over the graph builders.
double ppo_loss(const Actor& actor, const LossBatch& batch, double xi);
double value_loss(const Critic& critic, const LossBatch& batch);
double ae_loss(const Actor& actor, const LossBatch& batch);
double reg_loss(const Actor& actor, const Tensor& histories);

class AdamOptimizer {
 public:
  AdamOptimizer(std::vector<Tensor*> params, double lr, double beta1 = 0.9, double beta2 = 0.999,
                double eps = 1e-8);

  double learning_rate() const { return lr_; }
  void set_learning_rate(double lr) { lr_ = lr; }
  const std::vector<Tensor*>& params() const { return params_; }

  void step(const std::vector<Tensor>& grads);

  struct Snapshot {
    std::vector<Tensor> params, m, v;
    std::size_t t = 0;
  };
  Snapshot snapshot() const;
  void restore(const Snapshot& snap);

 private:
  std::vector<Tensor*> params_;
  std::vector<Tensor> m_, v_;
  std::size_t t_ = 0;
  double lr_, beta1_, beta2_, eps_;
};

// Halve above 2x the target, grow by 1.5 below half of it, clamp to [lo, hi].
double adapt_learning_rate(double lr, double measured_kl, double desired_kl, double lo, double hi);

struct UpdateStats {
  double policy_loss = 0.0, value_loss = 0.0, ae_loss = 0.0, reg_loss = 0.0, entropy = 0.0;
  double approx_kl = 0.0, grad_norm = 0.0, learning_rate = 0.0;
  bool aborted = false;
  std::string diagnostic;
};

UpdateStats update(Actor& actor, Critic& critic, const RolloutBuffer& buffer,
                   const AdvantageEstimates& adv, const VariantConfig& cfg,
                   AdamOptimizer& optimizer, std::mt19937_64& rng);

struct TrainConfig {
  VariantConfig variant;
  env::EnvConfig env;
  std::size_t latent_size = 16;
  ActorConfig actor;
  CriticConfig critic;
  std::size_t iterations = 200;
  std::size_t num_envs = 16;
  std::size_t horizon = 32;
  std::uint64_t seed = 0;
  double initial_curriculum = 0.1;
  std::size_t checkpoint_every = 100;
  std::string out_dir;  // empty: keep everything in memory
  std::size_t workers = 1;
  bool deterministic = true;

  TrainConfig();

  nlohmann::json to_json() const;
  static TrainConfig from_json(const nlohmann::json& j);
};

struct IterationLog {
  std::size_t iteration = 0;
  double mean_return = 0.0, tracking_ratio = 0.0;
  double policy_loss = 0.0, value_loss = 0.0, ae_loss = 0.0, reg_loss = 0.0, entropy = 0.0;
  double kl = 0.0, learning_rate = 0.0;
  double curriculum_level = 0.0, spat_s = 0.0, temp_s = 0.0;
};

extern const char* const kMetricsCsvHeader;
std::string iteration_csv_row(const IterationLog& row);

struct TrainResult {
  std::vector<IterationLog> history;
  std::unique_ptr<Actor> actor;
  std::unique_ptr<Critic> critic;
  std::optional<LayoutProfile> profile;
  double wall_seconds = 0.0;
  std::string checkpoint_path, csv_path;
};

// collect -> GAE -> update loop with curriculum; optionally writes
// metrics.csv and periodic checkpoints under cfg.out_dir.
TrainResult train(const TrainConfig& cfg);

nlohmann::json actor_config_to_json(const ActorConfig& cfg);
ActorConfig actor_config_from_json(const nlohmann::json& j);
nlohmann::json critic_config_to_json(const CriticConfig& cfg);
CriticConfig critic_config_from_json(const nlohmann::json& j);

struct Checkpoint {
  std::string variant;
  env::EnvConfig env_cfg;
  ActorConfig actor_cfg;
  CriticConfig critic_cfg;
  std::size_t iteration = 0;
  std::optional<LayoutProfile> profile;
  std::unique_ptr<Actor> actor;
  std::unique_ptr<Critic> critic;
};

nlohmann::json checkpoint_to_json(const Actor& actor, const Critic& critic,
                                  const LayoutProfile& profile, const TrainConfig& cfg,
                                  std::size_t iteration);
Checkpoint checkpoint_from_json(const nlohmann::json& j);

void write_text_file(const std::string& path, const std::string& content);
nlohmann::json read_json_file(const std::string& path);

}  // namespace symmeq::rl
