#include "symmeq/rl.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>
#include <stdexcept>

#include "symmeq/metrics.hpp"

namespace symmeq::rl {

namespace {

// Log-ratio bound for the importance weight; samples beyond it contribute a
// finite clipped value and a zero gradient.
constexpr double kLogRatioBound = 30.0;

void expect_keys(const nlohmann::json& j, const std::set<std::string>& allowed,
                 const std::string& where) {
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!allowed.count(it.key()))
      throw std::invalid_argument("unknown key '" + it.key() + "' in " + where);
}

template <typename T>
void read_if(const nlohmann::json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

Tensor as_column(const Tensor& v) { return Tensor({v.size(), 1}, v.data()); }

}  // namespace

void PpoHyperparams::validate() const {
  if (gamma < 0.0 || gamma >= 1.0) throw std::invalid_argument("ppo: gamma must be in [0, 1)");
  if (clip_ratio <= 0.0) throw std::invalid_argument("ppo: clip ratio must be positive");
  if (epochs == 0 || minibatches == 0)
    throw std::invalid_argument("ppo: epochs and minibatches must be positive");
  if (gae_lambda < 0.0 || gae_lambda > 1.0)
    throw std::invalid_argument("ppo: GAE lambda must be in [0, 1]");
  if (lr_min > lr_max) throw std::invalid_argument("ppo: learning-rate bounds inverted");
}

nlohmann::json PpoHyperparams::to_json() const {
  return nlohmann::json{{"gamma", gamma},
                        {"gae_lambda", gae_lambda},
                        {"clip_ratio", clip_ratio},
                        {"epochs", epochs},
                        {"minibatches", minibatches},
                        {"learning_rate", learning_rate},
                        {"desired_kl", desired_kl},
                        {"lr_min", lr_min},
                        {"lr_max", lr_max},
                        {"max_grad_norm", max_grad_norm},
                        {"value_coef", value_coef},
                        {"entropy_coef", entropy_coef},
                        {"normalize_advantages", normalize_advantages}};
}

PpoHyperparams PpoHyperparams::from_json(const nlohmann::json& j) {
  PpoHyperparams p;
  expect_keys(j,
              {"gamma", "gae_lambda", "clip_ratio", "epochs", "minibatches", "learning_rate",
               "desired_kl", "lr_min", "lr_max", "max_grad_norm", "value_coef", "entropy_coef",
               "normalize_advantages"},
              "ppo config");
  read_if(j, "gamma", p.gamma);
  read_if(j, "gae_lambda", p.gae_lambda);
  read_if(j, "clip_ratio", p.clip_ratio);
  read_if(j, "epochs", p.epochs);
  read_if(j, "minibatches", p.minibatches);
  read_if(j, "learning_rate", p.learning_rate);
  read_if(j, "desired_kl", p.desired_kl);
  read_if(j, "lr_min", p.lr_min);
  read_if(j, "lr_max", p.lr_max);
  read_if(j, "max_grad_norm", p.max_grad_norm);
  read_if(j, "value_coef", p.value_coef);
  read_if(j, "entropy_coef", p.entropy_coef);
  read_if(j, "normalize_advantages", p.normalize_advantages);
  p.validate();
  return p;
}

const std::vector<std::string>& variant_names() {
  static const std::vector<std::string> names = {"se-policy", "se-actor-only", "vanilla",
                                                 "vanilla-regu"};
  return names;
}

Variant variant_from_name(const std::string& name) {
  if (name == "se-policy") return Variant::SePolicy;
  if (name == "se-actor-only") return Variant::SeActorOnly;
  if (name == "vanilla") return Variant::Vanilla;
  if (name == "vanilla-regu") return Variant::VanillaRegu;
  throw std::invalid_argument("unknown variant '" + name +
                              "'; valid: se-policy, se-actor-only, vanilla, vanilla-regu");
}

const char* variant_name(Variant v) {
  switch (v) {
    case Variant::SePolicy: return "se-policy";
    case Variant::SeActorOnly: return "se-actor-only";
    case Variant::Vanilla: return "vanilla";
    case Variant::VanillaRegu: return "vanilla-regu";
  }
  throw std::logic_error("variant_name: invalid value");
}

nlohmann::json VariantConfig::to_json() const {
  return nlohmann::json{
      {"variant", variant_name(variant)}, {"lambda_reg", lambda_reg}, {"ppo", ppo.to_json()}};
}

VariantConfig VariantConfig::from_json(const nlohmann::json& j) {
  VariantConfig v;
  expect_keys(j, {"variant", "lambda_reg", "ppo"}, "variant config");
  if (j.contains("variant")) v.variant = variant_from_name(j.at("variant").get<std::string>());
  read_if(j, "lambda_reg", v.lambda_reg);
  if (j.contains("ppo")) v.ppo = PpoHyperparams::from_json(j.at("ppo"));
  return v;
}

bool RolloutBuffer::all_finite() const {
  auto vec_finite = [](const std::vector<double>& v) {
    for (double x : v)
      if (!std::isfinite(x)) return false;
    return true;
  };
  return histories.all_finite() && critic_inputs.all_finite() && actions.all_finite() &&
         next_obs.all_finite() && vec_finite(log_probs) && vec_finite(rewards) &&
         vec_finite(values) && vec_finite(dones) && vec_finite(bootstrap_values);
}

EnvPool::EnvPool(env::EnvConfig cfg, std::size_t num_envs, std::size_t history_len,
                 std::uint64_t seed)
    : cfg_(std::move(cfg)), history_len_(history_len) {
  if (num_envs == 0) throw std::invalid_argument("EnvPool: need at least one environment");
  obs_dim_ = 6 + 3 * cfg_.action_dim() + 2;
  slots_.reserve(num_envs);
  for (std::size_t e = 0; e < num_envs; ++e) {
    slots_.push_back(Slot{env::BilateralTracker(cfg_, seed + 1000003 * (e + 1)),
                          std::vector<double>(history_width(), 0.0), 0.0, 0.0, 0});
    reset_slot(slots_.back());
  }
}

void EnvPool::reset_slot(Slot& slot) {
  Tensor obs = slot.env.reset_episode(level_);
  std::fill(slot.history.begin(), slot.history.end(), 0.0);
  std::copy(obs.data().begin(), obs.data().end(), slot.history.end() - obs_dim_);
  slot.ep_return = 0.0;
  slot.ep_tracking = 0.0;
  slot.ep_steps = 0;
}

void EnvPool::push_obs(Slot& slot, const Tensor& obs) {
  std::copy(slot.history.begin() + obs_dim_, slot.history.end(), slot.history.begin());
  std::copy(obs.data().begin(), obs.data().end(), slot.history.end() - obs_dim_);
}

void EnvPool::set_curriculum(double level) {
  if (level < 0.0 || level > 1.0) throw std::invalid_argument("EnvPool: level out of [0, 1]");
  level_ = level;
}

Tensor EnvPool::history_batch() const {
  Tensor out = Tensor::matrix(slots_.size(), history_width());
  for (std::size_t e = 0; e < slots_.size(); ++e)
    for (std::size_t j = 0; j < history_width(); ++j) out.at(e, j) = slots_[e].history[j];
  return out;
}

Tensor EnvPool::critic_batch() const {
  Tensor out = Tensor::matrix(slots_.size(), strip_dim() + obs_dim_);
  for (std::size_t e = 0; e < slots_.size(); ++e) {
    Tensor strip = env::height_strip(slots_[e].env.state());
    for (std::size_t j = 0; j < strip.size(); ++j) out.at(e, j) = strip[j];
    // The newest (noisy) observation from the history window.
    for (std::size_t j = 0; j < obs_dim_; ++j)
      out.at(e, strip.size() + j) = slots_[e].history[history_width() - obs_dim_ + j];
  }
  return out;
}

std::vector<EnvPool::StepRecord> EnvPool::step(const Tensor& action_batch) {
  if (action_batch.rank() != 2 || action_batch.rows() != slots_.size() ||
      action_batch.cols() != action_dim())
    throw std::invalid_argument("EnvPool::step: action batch has wrong shape");
  std::vector<StepRecord> records(slots_.size());
  for (std::size_t e = 0; e < slots_.size(); ++e) {
    Slot& slot = slots_[e];
    Tensor a({action_dim()});
    for (std::size_t j = 0; j < action_dim(); ++j) a[j] = action_batch.at(e, j);
    env::StepResult result = slot.env.step_episode(a);

    StepRecord& rec = records[e];
    rec.next_obs = result.observation;
    rec.reward = result.reward;
    rec.done = result.terminated;
    rec.tracking = (result.breakdown.tracking_lin + result.breakdown.tracking_ang) / 4.0;

    slot.ep_return += result.reward;
    slot.ep_tracking += rec.tracking;
    ++slot.ep_steps;

    if (result.terminated) {
      rec.episode_end = true;
      rec.episode_return = slot.ep_return;
      rec.episode_tracking = slot.ep_tracking / static_cast<double>(slot.ep_steps);
      reset_slot(slot);
    } else {
      push_obs(slot, result.observation);
    }
  }
  return records;
}

RolloutBuffer collect_rollouts(const Actor& actor, const Critic& critic, EnvPool& pool,
                               std::size_t horizon, std::mt19937_64& rng,
                               bool deterministic_actions) {
  if (horizon == 0) throw std::invalid_argument("collect_rollouts: horizon must be positive");
  std::size_t e_count = pool.size();
  RolloutBuffer buf;
  buf.num_envs = e_count;
  buf.horizon = horizon;
  buf.obs_dim = pool.obs_dim();
  buf.action_dim = pool.action_dim();
  buf.history_width = pool.history_width();
  buf.strip_dim = pool.strip_dim();
  std::size_t n = e_count * horizon;
  buf.histories = Tensor::matrix(n, buf.history_width);
  buf.critic_inputs = Tensor::matrix(n, buf.strip_dim + buf.obs_dim);
  buf.actions = Tensor::matrix(n, buf.action_dim);
  buf.next_obs = Tensor::matrix(n, buf.obs_dim);
  buf.log_probs.assign(n, 0.0);
  buf.rewards.assign(n, 0.0);
  buf.values.assign(n, 0.0);
  buf.dones.assign(n, 0.0);

  double tracking_acc = 0.0;
  for (std::size_t t = 0; t < horizon; ++t) {
    Tensor hist = pool.history_batch();
    Tensor cin = pool.critic_batch();
    Tensor values = critic.values(cin);
    Tensor mu = actor.mean_action(hist);

    Tensor action_batch = Tensor::matrix(e_count, buf.action_dim);
    for (std::size_t e = 0; e < e_count; ++e) {
      std::size_t row = buf.index(e, t);
      for (std::size_t j = 0; j < buf.history_width; ++j) buf.histories.at(row, j) = hist.at(e, j);
      for (std::size_t j = 0; j < cin.cols(); ++j) buf.critic_inputs.at(row, j) = cin.at(e, j);
      buf.values[row] = values[e];

      Tensor mu_row({buf.action_dim});
      for (std::size_t j = 0; j < buf.action_dim; ++j) mu_row[j] = mu.at(e, j);
      Tensor a;
      double logp;
      if (deterministic_actions) {
        a = mu_row;
        logp = actor.head().log_prob(mu_row, a);
      } else {
        auto [sampled, lp] = actor.head().sample(mu_row, rng);
        a = std::move(sampled);
        logp = lp;
      }
      buf.log_probs[row] = logp;
      for (std::size_t j = 0; j < buf.action_dim; ++j) {
        buf.actions.at(row, j) = a[j];
        action_batch.at(e, j) = a[j];
      }
    }

    std::vector<EnvPool::StepRecord> records = pool.step(action_batch);
    for (std::size_t e = 0; e < e_count; ++e) {
      std::size_t row = buf.index(e, t);
      const auto& rec = records[e];
      buf.rewards[row] = rec.reward;
      buf.dones[row] = rec.done ? 1.0 : 0.0;
      for (std::size_t j = 0; j < buf.obs_dim; ++j) buf.next_obs.at(row, j) = rec.next_obs[j];
      tracking_acc += rec.tracking;
      if (rec.episode_end) {
        buf.episode_returns.push_back(rec.episode_return);
        buf.episode_tracking.push_back(rec.episode_tracking);
      }
    }
  }
  buf.mean_tracking_ratio = tracking_acc / static_cast<double>(n);

  Tensor boot = critic.values(pool.critic_batch());
  buf.bootstrap_values.assign(boot.data().begin(), boot.data().end());
  if (!buf.all_finite()) throw std::runtime_error("collect_rollouts: non-finite buffer contents");
  return buf;
}

AdvantageEstimates compute_gae(const RolloutBuffer& buffer, double gamma, double lambda) {
  AdvantageEstimates out;
  std::size_t n = buffer.size();
  out.advantages.assign(n, 0.0);
  out.targets.assign(n, 0.0);
  for (std::size_t e = 0; e < buffer.num_envs; ++e) {
    double carry = 0.0;
    for (std::size_t t = buffer.horizon; t-- > 0;) {
      std::size_t row = buffer.index(e, t);
      double not_done = 1.0 - buffer.dones[row];
      double next_value = t + 1 < buffer.horizon ? buffer.values[buffer.index(e, t + 1)]
                                                 : buffer.bootstrap_values[e];
      double delta = buffer.rewards[row] + gamma * next_value * not_done - buffer.values[row];
      carry = delta + gamma * lambda * not_done * carry;
      out.advantages[row] = carry;
      out.targets[row] = carry + buffer.values[row];
    }
  }
  return out;
}

double clipped_surrogate_term(double ratio, double advantage, double xi) {
  double clipped = std::clamp(ratio, 1.0 - xi, 1.0 + xi);
  return -std::min(ratio * advantage, clipped * advantage);
}

LossBatch gather_batch(const RolloutBuffer& buffer, const AdvantageEstimates& adv,
                       const std::vector<std::size_t>& idx) {
  if (idx.empty()) throw std::invalid_argument("gather_batch: empty index list");
  std::size_t b = idx.size();
  LossBatch out;
  out.histories = Tensor::matrix(b, buffer.history_width);
  out.critic_inputs = Tensor::matrix(b, buffer.strip_dim + buffer.obs_dim);
  out.actions = Tensor::matrix(b, buffer.action_dim);
  out.next_obs = Tensor::matrix(b, buffer.obs_dim);
  out.old_log_probs = Tensor({b});
  out.advantages = Tensor({b});
  out.targets = Tensor({b});
  for (std::size_t r = 0; r < b; ++r) {
    std::size_t src = idx[r];
    if (src >= buffer.size()) throw std::out_of_range("gather_batch: index out of range");
    for (std::size_t j = 0; j < buffer.history_width; ++j)
      out.histories.at(r, j) = buffer.histories.at(src, j);
    for (std::size_t j = 0; j < out.critic_inputs.cols(); ++j)
      out.critic_inputs.at(r, j) = buffer.critic_inputs.at(src, j);
    for (std::size_t j = 0; j < buffer.action_dim; ++j)
      out.actions.at(r, j) = buffer.actions.at(src, j);
    for (std::size_t j = 0; j < buffer.obs_dim; ++j)
      out.next_obs.at(r, j) = buffer.next_obs.at(src, j);
    out.old_log_probs[r] = buffer.log_probs[src];
    out.advantages[r] = adv.advantages[src];
    out.targets[r] = adv.targets[src];
  }
  return out;
}

ad::Var ppo_loss_graph(const Actor& actor, const LossBatch& batch, double xi, ad::Tape& tape) {
  ad::Var hist = tape.constant(batch.histories);
  ad::Var mu = actor.mean(hist, tape);
  ad::Var new_logp = actor.head().log_prob_rows(mu, batch.actions, tape);
  ad::Var log_ratio = ad::sub(new_logp, tape.constant(batch.old_log_probs));
  ad::Var ratio = ad::vexp(ad::clip(log_ratio, -kLogRatioBound, kLogRatioBound));
  ad::Var adv = tape.constant(batch.advantages);
  ad::Var surr = ad::mul(ratio, adv);
  ad::Var surr_clipped = ad::mul(ad::clip(ratio, 1.0 - xi, 1.0 + xi), adv);
  return ad::neg(ad::mean(ad::min2(surr, surr_clipped)));
}

ad::Var value_loss_graph(const Critic& critic, const LossBatch& batch, ad::Tape& tape) {
  ad::Var v = critic.forward(tape.constant(batch.critic_inputs), tape);
  ad::Var diff = ad::sub(v, tape.constant(as_column(batch.targets)));
  return ad::mean(ad::mul(diff, diff));
}

ad::Var ae_loss_graph(const Actor& actor, const LossBatch& batch, ad::Tape& tape) {
  ad::Var z = actor.latent(tape.constant(batch.histories), tape);
  ad::Var recon = actor.decode(z, tape);
  ad::Var diff = ad::sub(recon, tape.constant(batch.next_obs));
  return ad::mean(ad::mul(diff, diff));
}

ad::Var reg_loss_graph(const Actor& actor, const Tensor& histories, ad::Tape& tape) {
  SignedPermutation hist_rep = repeat_rep(actor.f_o(), actor.history_len() + 1);
  ad::Var mu = actor.mean(tape.constant(histories), tape);
  ad::Var mu_mirror = actor.mean(
      ad::signed_permute_rows(tape.constant(histories), hist_rep.target(), hist_rep.sign()), tape);
  // pi(F_o(o)) - F_a(pi(o)), rowwise squared norm, batch mean.
  ad::Var diff = ad::sub(mu_mirror,
                         ad::signed_permute_rows(mu, actor.f_a().target(), actor.f_a().sign()));
  return ad::mean(ad::row_sum(ad::mul(diff, diff)));
}

double ppo_loss(const Actor& actor, const LossBatch& batch, double xi) {
  ad::Tape tape;
  return ppo_loss_graph(actor, batch, xi, tape).value()[0];
}

double value_loss(const Critic& critic, const LossBatch& batch) {
  ad::Tape tape;
  return value_loss_graph(critic, batch, tape).value()[0];
}

double ae_loss(const Actor& actor, const LossBatch& batch) {
  ad::Tape tape;
  return ae_loss_graph(actor, batch, tape).value()[0];
}

double reg_loss(const Actor& actor, const Tensor& histories) {
  ad::Tape tape;
  return reg_loss_graph(actor, histories, tape).value()[0];
}

AdamOptimizer::AdamOptimizer(std::vector<Tensor*> params, double lr, double beta1, double beta2,
                             double eps)
    : params_(std::move(params)), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
  for (Tensor* p : params_) {
    m_.push_back(Tensor(p->shape()));
    v_.push_back(Tensor(p->shape()));
  }
}

void AdamOptimizer::step(const std::vector<Tensor>& grads) {
  if (grads.size() != params_.size())
    throw std::invalid_argument("AdamOptimizer::step: gradient count mismatch");
  ++t_;
  double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t p = 0; p < params_.size(); ++p) {
    Tensor& theta = *params_[p];
    const Tensor& g = grads[p];
    if (!theta.same_shape(g))
      throw std::invalid_argument("AdamOptimizer::step: gradient shape mismatch");
    for (std::size_t i = 0; i < theta.size(); ++i) {
      m_[p][i] = beta1_ * m_[p][i] + (1.0 - beta1_) * g[i];
      v_[p][i] = beta2_ * v_[p][i] + (1.0 - beta2_) * g[i] * g[i];
      double mhat = m_[p][i] / bc1;
      double vhat = v_[p][i] / bc2;
      theta[i] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
    }
  }
}

AdamOptimizer::Snapshot AdamOptimizer::snapshot() const {
  Snapshot snap;
  for (const Tensor* p : params_) snap.params.push_back(*p);
  snap.m = m_;
  snap.v = v_;
  snap.t = t_;
  return snap;
}

void AdamOptimizer::restore(const Snapshot& snap) {
  if (snap.params.size() != params_.size())
    throw std::invalid_argument("AdamOptimizer::restore: snapshot mismatch");
  for (std::size_t p = 0; p < params_.size(); ++p) *params_[p] = snap.params[p];
  m_ = snap.m;
  v_ = snap.v;
  t_ = snap.t;
}

double adapt_learning_rate(double lr, double measured_kl, double desired_kl, double lo,
                           double hi) {
  if (measured_kl > 2.0 * desired_kl)
    lr *= 0.5;
  else if (measured_kl < 0.5 * desired_kl)
    lr *= 1.5;
  return std::clamp(lr, lo, hi);
}

namespace {

std::vector<Tensor> collect_grads(const ad::Tape& tape, const std::vector<Tensor*>& params) {
  std::vector<Tensor> grads;
  grads.reserve(params.size());
  for (Tensor* p : params) {
    const Tensor* g = tape.grad_of(*p);
    grads.push_back(g ? *g : Tensor(p->shape()));
  }
  return grads;
}

double global_norm(const std::vector<Tensor>& grads) {
  double sq = 0.0;
  for (const Tensor& g : grads)
    for (double v : g.data()) sq += v * v;
  return std::sqrt(sq);
}

double mean_log_prob_gap(const Actor& actor, const RolloutBuffer& buffer) {
  Tensor mu = actor.mean_action(buffer.histories);
  double acc = 0.0;
  Tensor mu_row({buffer.action_dim}), a_row({buffer.action_dim});
  for (std::size_t r = 0; r < buffer.size(); ++r) {
    for (std::size_t j = 0; j < buffer.action_dim; ++j) {
      mu_row[j] = mu.at(r, j);
      a_row[j] = buffer.actions.at(r, j);
    }
    acc += buffer.log_probs[r] - actor.head().log_prob(mu_row, a_row);
  }
  return acc / static_cast<double>(buffer.size());
}

}  // namespace

UpdateStats update(Actor& actor, Critic& critic, const RolloutBuffer& buffer,
                   const AdvantageEstimates& adv, const VariantConfig& cfg,
                   AdamOptimizer& optimizer, std::mt19937_64& rng) {
  const PpoHyperparams& hp = cfg.ppo;
  hp.validate();
  UpdateStats stats;
  AdamOptimizer::Snapshot snap = optimizer.snapshot();

  AdvantageEstimates used = adv;
  if (hp.normalize_advantages && used.advantages.size() > 1) {
    double mean = std::accumulate(used.advantages.begin(), used.advantages.end(), 0.0) /
                  static_cast<double>(used.advantages.size());
    double var = 0.0;
    for (double a : used.advantages) var += (a - mean) * (a - mean);
    double stddev = std::sqrt(var / static_cast<double>(used.advantages.size()));
    for (double& a : used.advantages) a = (a - mean) / (stddev + 1e-8);
  }

  std::vector<std::size_t> order(buffer.size());
  std::iota(order.begin(), order.end(), 0);
  std::size_t batches_done = 0;

  try {
    for (std::size_t epoch = 0; epoch < hp.epochs; ++epoch) {
      std::shuffle(order.begin(), order.end(), rng);
      std::size_t per_batch = (buffer.size() + hp.minibatches - 1) / hp.minibatches;
      for (std::size_t mb = 0; mb < hp.minibatches; ++mb) {
        std::size_t lo = mb * per_batch;
        if (lo >= buffer.size()) break;
        std::size_t hi = std::min(lo + per_batch, buffer.size());
        std::vector<std::size_t> idx(order.begin() + lo, order.begin() + hi);
        LossBatch batch = gather_batch(buffer, used, idx);

        ad::Tape tape;
        ad::Var l_ppo = ppo_loss_graph(actor, batch, hp.clip_ratio, tape);
        ad::Var l_value = value_loss_graph(critic, batch, tape);
        ad::Var l_ae = ae_loss_graph(actor, batch, tape);
        ad::Var ent = actor.head().entropy(tape);
        ad::Var total = ad::add(l_ppo, ad::scale(l_value, hp.value_coef));
        total = ad::add(total, l_ae);
        double reg_value = 0.0;
        if (cfg.use_reg_loss()) {
          ad::Var l_reg = reg_loss_graph(actor, batch.histories, tape);
          reg_value = l_reg.value()[0];
          total = ad::add(total, ad::scale(l_reg, cfg.lambda_reg));
        }
        if (hp.entropy_coef != 0.0) total = ad::sub(total, ad::scale(ent, hp.entropy_coef));
        if (!total.value().all_finite()) throw std::runtime_error("non-finite combined loss");

        ad::backward(total);
        std::vector<Tensor> grads = collect_grads(tape, optimizer.params());
        double norm = global_norm(grads);
        if (!std::isfinite(norm)) throw std::runtime_error("non-finite gradient norm");
        if (norm > hp.max_grad_norm && norm > 0.0) {
          double scale_by = hp.max_grad_norm / norm;
          for (Tensor& g : grads)
            for (double& v : g.data()) v *= scale_by;
        }
        optimizer.step(grads);

        stats.policy_loss += l_ppo.value()[0];
        stats.value_loss += l_value.value()[0];
        stats.ae_loss += l_ae.value()[0];
        stats.reg_loss += reg_value;
        stats.entropy += ent.value()[0];
        stats.grad_norm += norm;
        ++batches_done;
      }
    }
  } catch (const std::exception& e) {
    optimizer.restore(snap);
    stats = UpdateStats{};
    stats.aborted = true;
    stats.diagnostic = e.what();
    stats.learning_rate = optimizer.learning_rate();
    return stats;
  }

  if (batches_done > 0) {
    double inv = 1.0 / static_cast<double>(batches_done);
    stats.policy_loss *= inv;
    stats.value_loss *= inv;
    stats.ae_loss *= inv;
    stats.reg_loss *= inv;
    stats.entropy *= inv;
    stats.grad_norm *= inv;
  }

  stats.approx_kl = mean_log_prob_gap(actor, buffer);
  double lr = adapt_learning_rate(optimizer.learning_rate(), stats.approx_kl, hp.desired_kl,
                                  hp.lr_min, hp.lr_max);
  optimizer.set_learning_rate(lr);
  stats.learning_rate = lr;
  return stats;
}

TrainConfig::TrainConfig() {
  actor.encoder_widths = {32};
  actor.policy_widths = {32, 32};
  critic.widths = {32, 32};
}

nlohmann::json TrainConfig::to_json() const {
  return nlohmann::json{{"variant", variant.to_json()},
                        {"env", env.to_json()},
                        {"latent_size", latent_size},
                        {"actor", actor_config_to_json(actor)},
                        {"critic", critic_config_to_json(critic)},
                        {"iterations", iterations},
                        {"num_envs", num_envs},
                        {"horizon", horizon},
                        {"seed", seed},
                        {"initial_curriculum", initial_curriculum},
                        {"checkpoint_every", checkpoint_every},
                        {"out_dir", out_dir},
                        {"workers", workers},
                        {"deterministic", deterministic}};
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j) {
  TrainConfig cfg;
  expect_keys(j,
              {"variant", "env", "latent_size", "actor", "critic", "iterations", "num_envs",
               "horizon", "seed", "initial_curriculum", "checkpoint_every", "out_dir", "workers",
               "deterministic"},
              "train config");
  if (j.contains("variant")) cfg.variant = VariantConfig::from_json(j.at("variant"));
  if (j.contains("env")) cfg.env = env::EnvConfig::from_json(j.at("env"));
  read_if(j, "latent_size", cfg.latent_size);
  if (j.contains("actor")) cfg.actor = actor_config_from_json(j.at("actor"));
  if (j.contains("critic")) cfg.critic = critic_config_from_json(j.at("critic"));
  read_if(j, "iterations", cfg.iterations);
  read_if(j, "num_envs", cfg.num_envs);
  read_if(j, "horizon", cfg.horizon);
  read_if(j, "seed", cfg.seed);
  read_if(j, "initial_curriculum", cfg.initial_curriculum);
  read_if(j, "checkpoint_every", cfg.checkpoint_every);
  read_if(j, "out_dir", cfg.out_dir);
  read_if(j, "workers", cfg.workers);
  read_if(j, "deterministic", cfg.deterministic);
  if (cfg.iterations == 0 || cfg.num_envs == 0 || cfg.horizon == 0)
    throw std::invalid_argument("train config: iterations, num_envs, horizon must be positive");
  return cfg;
}

const char* const kMetricsCsvHeader =
    "iteration,mean_return,tracking_ratio,policy_loss,value_loss,ae_loss,reg_loss,entropy,kl,"
    "learning_rate,curriculum_level,spat_s,temp_s";

std::string iteration_csv_row(const IterationLog& row) {
  std::ostringstream out;
  out << row.iteration << ',' << double_to_string(row.mean_return) << ','
      << double_to_string(row.tracking_ratio) << ',' << double_to_string(row.policy_loss) << ','
      << double_to_string(row.value_loss) << ',' << double_to_string(row.ae_loss) << ','
      << double_to_string(row.reg_loss) << ',' << double_to_string(row.entropy) << ','
      << double_to_string(row.kl) << ',' << double_to_string(row.learning_rate) << ','
      << double_to_string(row.curriculum_level) << ',' << double_to_string(row.spat_s) << ','
      << double_to_string(row.temp_s);
  return out.str();
}

namespace {

// Temporal symmetry of the first environment's actions, restricted to
// done-free segments so the half-period pairing never crosses a reset.
double buffer_temp_s(const RolloutBuffer& buffer, const SignedPermutation& f_a,
                     std::size_t period) {
  if (period == 0 || period % 2 != 0) return 0.0;
  std::size_t half = period / 2;
  double acc = 0.0;
  std::size_t count = 0;
  std::size_t seg_start = 0;
  for (std::size_t t = 0; t <= buffer.horizon; ++t) {
    bool boundary = t == buffer.horizon || buffer.dones[buffer.index(0, t)] > 0.5;
    if (!boundary) continue;
    std::size_t seg_end = t;  // inclusive of row t when it is a done row
    if (t < buffer.horizon) ++seg_end;
    for (std::size_t u = seg_start; u + half < seg_end; ++u) {
      double sq = 0.0;
      std::size_t r1 = buffer.index(0, u), r2 = buffer.index(0, u + half);
      for (std::size_t i = 0; i < buffer.action_dim; ++i) {
        double mirrored = f_a.sign_of(i) * buffer.actions.at(r2, f_a.target_of(i));
        double d = buffer.actions.at(r1, i) - mirrored;
        sq += d * d;
      }
      acc += std::sqrt(sq);
      ++count;
    }
    seg_start = t + 1;
  }
  return count > 0 ? acc / static_cast<double>(count) : 0.0;
}

}  // namespace

TrainResult train(const TrainConfig& cfg_in) {
  auto t_start = std::chrono::steady_clock::now();
  TrainConfig cfg = cfg_in;
  cfg.variant.ppo.validate();
  cfg.actor.equivariant = cfg.variant.actor_equivariant();
  cfg.critic.equivariant = cfg.variant.critic_equivariant();

  LayoutProfile profile =
      build_toy_profile(cfg.env.joints_per_side, cfg.env.center_joints, cfg.latent_size);
  std::mt19937_64 master(cfg.seed);
  std::mt19937_64 net_rng(master());
  std::uint64_t pool_seed = master();
  std::mt19937_64 sample_rng(master());
  std::mt19937_64 shuffle_rng(master());

  TrainResult result;
  result.actor = std::make_unique<Actor>(profile, cfg.actor, net_rng);
  result.critic = std::make_unique<Critic>(profile, cfg.critic, net_rng);
  result.profile = profile;
  Actor& actor = *result.actor;
  Critic& critic = *result.critic;

  std::vector<Tensor*> params = actor.parameters();
  for (Tensor* p : critic.parameters()) params.push_back(p);
  AdamOptimizer optimizer(params, cfg.variant.ppo.learning_rate);

  EnvPool pool(cfg.env, cfg.num_envs, cfg.actor.history_len, pool_seed);
  double level = cfg.initial_curriculum;
  pool.set_curriculum(level);

  std::ofstream csv;
  if (!cfg.out_dir.empty()) {
    std::filesystem::create_directories(cfg.out_dir);
    result.csv_path = cfg.out_dir + "/metrics.csv";
    csv.open(result.csv_path);
    if (!csv) throw std::runtime_error("train: cannot write " + result.csv_path);
    csv << kMetricsCsvHeader << '\n';
  }

  std::size_t period = static_cast<std::size_t>(std::lround(cfg.env.gait_period / cfg.env.dt));

  for (std::size_t iter = 1; iter <= cfg.iterations; ++iter) {
    RolloutBuffer buffer = collect_rollouts(actor, critic, pool, cfg.horizon, sample_rng);
    AdvantageEstimates adv =
        compute_gae(buffer, cfg.variant.ppo.gamma, cfg.variant.ppo.gae_lambda);
    UpdateStats stats = update(actor, critic, buffer, adv, cfg.variant, optimizer, shuffle_rng);
    if (stats.aborted)
      throw std::runtime_error("train: update aborted at iteration " + std::to_string(iter) +
                               ": " + stats.diagnostic);

    level = env::update_curriculum(level, buffer.mean_tracking_ratio);
    pool.set_curriculum(level);

    IterationLog row;
    row.iteration = iter;
    if (!buffer.episode_returns.empty()) {
      row.mean_return =
          std::accumulate(buffer.episode_returns.begin(), buffer.episode_returns.end(), 0.0) /
          static_cast<double>(buffer.episode_returns.size());
    } else {
      double mean_step = std::accumulate(buffer.rewards.begin(), buffer.rewards.end(), 0.0) /
                         static_cast<double>(buffer.size());
      row.mean_return = mean_step * static_cast<double>(cfg.env.episode_steps);
    }
    row.tracking_ratio = buffer.mean_tracking_ratio;
    row.policy_loss = stats.policy_loss;
    row.value_loss = stats.value_loss;
    row.ae_loss = stats.ae_loss;
    row.reg_loss = stats.reg_loss;
    row.entropy = stats.entropy;
    row.kl = stats.approx_kl;
    row.learning_rate = stats.learning_rate;
    row.curriculum_level = level;

    std::size_t probe = std::min<std::size_t>(64, buffer.size());
    Tensor probe_hist = Tensor::matrix(probe, buffer.history_width);
    for (std::size_t r = 0; r < probe; ++r)
      for (std::size_t j = 0; j < buffer.history_width; ++j)
        probe_hist.at(r, j) = buffer.histories.at(r, j);
    row.spat_s = metrics::spat_s(actor, probe_hist);
    row.temp_s = buffer_temp_s(buffer, actor.f_a(), period);

    result.history.push_back(row);
    if (csv.is_open()) csv << iteration_csv_row(row) << '\n';

    bool last = iter == cfg.iterations;
    if (!cfg.out_dir.empty() &&
        (last || (cfg.checkpoint_every > 0 && iter % cfg.checkpoint_every == 0))) {
      nlohmann::json ckpt = checkpoint_to_json(actor, critic, profile, cfg, iter);
      std::string path = cfg.out_dir + (last ? "/checkpoint.json"
                                             : "/checkpoint_" + std::to_string(iter) + ".json");
      write_text_file(path, ckpt.dump(2));
      if (last) result.checkpoint_path = path;
    }
  }

  if (csv.is_open()) csv.close();
  result.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  return result;
}

nlohmann::json actor_config_to_json(const ActorConfig& cfg) {
  return nlohmann::json{{"history_len", cfg.history_len},
                        {"encoder_widths", cfg.encoder_widths},
                        {"policy_widths", cfg.policy_widths},
                        {"activation", activation_name(cfg.activation)},
                        {"equivariant", cfg.equivariant},
                        {"init_log_std", cfg.init_log_std}};
}

ActorConfig actor_config_from_json(const nlohmann::json& j) {
  ActorConfig cfg;
  expect_keys(j,
              {"history_len", "encoder_widths", "policy_widths", "activation", "equivariant",
               "init_log_std"},
              "actor config");
  read_if(j, "history_len", cfg.history_len);
  read_if(j, "encoder_widths", cfg.encoder_widths);
  read_if(j, "policy_widths", cfg.policy_widths);
  if (j.contains("activation"))
    cfg.activation = activation_from_name(j.at("activation").get<std::string>());
  read_if(j, "equivariant", cfg.equivariant);
  read_if(j, "init_log_std", cfg.init_log_std);
  return cfg;
}

nlohmann::json critic_config_to_json(const CriticConfig& cfg) {
  return nlohmann::json{{"widths", cfg.widths},
                        {"activation", activation_name(cfg.activation)},
                        {"equivariant", cfg.equivariant}};
}

CriticConfig critic_config_from_json(const nlohmann::json& j) {
  CriticConfig cfg;
  expect_keys(j, {"widths", "activation", "equivariant"}, "critic config");
  read_if(j, "widths", cfg.widths);
  if (j.contains("activation"))
    cfg.activation = activation_from_name(j.at("activation").get<std::string>());
  read_if(j, "equivariant", cfg.equivariant);
  return cfg;
}

nlohmann::json checkpoint_to_json(const Actor& actor, const Critic& critic,
                                  const LayoutProfile& profile, const TrainConfig& cfg,
                                  std::size_t iteration) {
  return nlohmann::json{{"format", 1},
                        {"variant", variant_name(cfg.variant.variant)},
                        {"iteration", iteration},
                        {"env", cfg.env.to_json()},
                        {"latent_size", cfg.latent_size},
                        {"actor_config", actor_config_to_json(actor.config())},
                        {"critic_config", critic_config_to_json(cfg.critic)},
                        {"profile", profile.to_json()},
                        {"actor_params", params_to_json(
                            static_cast<const Actor&>(actor).parameters())},
                        {"critic_params", params_to_json(
                            static_cast<const Critic&>(critic).parameters())}};
}

Checkpoint checkpoint_from_json(const nlohmann::json& j) {
  expect_keys(j,
              {"format", "variant", "iteration", "env", "latent_size", "actor_config",
               "critic_config", "profile", "actor_params", "critic_params"},
              "checkpoint");
  if (j.at("format").get<int>() != 1)
    throw std::invalid_argument("checkpoint: unsupported format version");
  Checkpoint out;
  out.variant = j.at("variant").get<std::string>();
  out.iteration = j.at("iteration").get<std::size_t>();
  out.env_cfg = env::EnvConfig::from_json(j.at("env"));
  out.actor_cfg = actor_config_from_json(j.at("actor_config"));
  out.critic_cfg = critic_config_from_json(j.at("critic_config"));
  out.profile = LayoutProfile::from_json(j.at("profile"));

  std::mt19937_64 scratch_rng(0);
  out.actor = std::make_unique<Actor>(*out.profile, out.actor_cfg, scratch_rng);
  out.critic = std::make_unique<Critic>(*out.profile, out.critic_cfg, scratch_rng);
  params_from_json(j.at("actor_params"), out.actor->parameters());
  params_from_json(j.at("critic_params"), out.critic->parameters());
  return out;
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open for writing: " + path);
  f << content;
  if (!f) throw std::runtime_error("write failed: " + path);
}

nlohmann::json read_json_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open: " + path);
  return nlohmann::json::parse(f);
}

}  // namespace symmeq::rl
