#include "symmeq/eqnn.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <stdexcept>

namespace symmeq {

Activation activation_from_name(const std::string& name) {
  if (name == "elu") return Activation::Elu;
  if (name == "relu") return Activation::Relu;
  throw std::invalid_argument("unknown activation: " + name);
}

const char* activation_name(Activation a) {
  return a == Activation::Elu ? "elu" : "relu";
}

namespace {

double act_eval(Activation a, double x) {
  if (a == Activation::Relu) return x > 0.0 ? x : 0.0;
  return x > 0.0 ? x : std::expm1(x);
}

ad::Var act_graph(Activation a, const ad::Var& x) {
  return a == Activation::Relu ? ad::relu(x) : ad::elu(x);
}

Tensor act_apply(Activation a, Tensor x) {
  for (double& v : x.data()) v = act_eval(a, v);
  return x;
}

Tensor uniform_init(std::size_t count, std::size_t fan_in, std::mt19937_64& rng) {
  double bound = fan_in > 0 ? 1.0 / std::sqrt(static_cast<double>(fan_in)) : 0.0;
  std::uniform_real_distribution<double> dist(-bound, bound);
  Tensor t({count});
  for (double& v : t.data()) v = dist(rng);
  return t;
}

void check_matrix_input(const Tensor& x, std::size_t width, const char* who) {
  if (x.rank() != 2 || x.cols() != width)
    throw std::invalid_argument(std::string(who) + ": input width mismatch");
}

// y = x W^T + b with plain tensors.
Tensor dense_apply(const Tensor& x, const Tensor& w, const Tensor& b) {
  std::size_t batch = x.rows(), in = x.cols(), out = w.rows();
  Tensor y = Tensor::matrix(batch, out);
  for (std::size_t r = 0; r < batch; ++r)
    for (std::size_t o = 0; o < out; ++o) {
      const double* xr = &x.data()[r * in];
      const double* wr = &w.data()[o * in];
      double s = b[o];
      for (std::size_t j = 0; j < in; ++j) s += xr[j] * wr[j];
      y.at(r, o) = s;
    }
  return y;
}

}  // namespace

Tensor apply_vec(const Net& net, const Tensor& x) {
  if (x.size() != net.in_dim()) throw std::invalid_argument("apply_vec: length mismatch");
  Tensor row({1, x.size()}, x.data());
  Tensor out = net.apply(row);
  return Tensor({out.size()}, out.data());
}

EquivariantLinear::EquivariantLinear(const SignedPermutation& rho_in,
                                     const SignedPermutation& rho_out, std::mt19937_64& rng)
    : rho_in_(rho_in),
      rho_out_(rho_out),
      wplan_(solve_intertwiner_basis(rho_in, rho_out)),
      bplan_(project_bias(rho_out)),
      wtheta_(uniform_init(wplan_.free_count, rho_in.size(), rng)),
      btheta_(uniform_init(bplan_.free_count, rho_in.size(), rng)) {}

ad::Var EquivariantLinear::forward(const ad::Var& x, ad::Tape& tape) const {
  check_matrix_input(x.value(), in_dim(), "EquivariantLinear::forward");
  auto& self = const_cast<EquivariantLinear&>(*this);
  ad::Var w = ad::scatter(tape.param(self.wtheta_), wplan_.scatter);
  ad::Var b = ad::scatter(tape.param(self.btheta_), bplan_.scatter);
  return ad::linear(x, w, b);
}

Tensor EquivariantLinear::apply(const Tensor& x) const {
  check_matrix_input(x, in_dim(), "EquivariantLinear::apply");
  return dense_apply(x, realized_weight(), realized_bias());
}

EquivariantMLP::EquivariantMLP(std::vector<SignedPermutation> reps, Activation act,
                               std::mt19937_64& rng)
    : reps_(std::move(reps)), act_(act) {
  if (reps_.size() < 2) throw std::invalid_argument("EquivariantMLP: need at least one layer");
  // Activations are applied to every intermediate representation.
  for (std::size_t i = 1; i + 1 < reps_.size(); ++i)
    if (!reps_[i].is_pure_permutation())
      throw std::invalid_argument(
          "EquivariantMLP: pointwise activation on a representation with a -1 sign");
  for (std::size_t i = 0; i + 1 < reps_.size(); ++i)
    layers_.emplace_back(reps_[i], reps_[i + 1], rng);
}

ad::Var EquivariantMLP::forward(const ad::Var& x, ad::Tape& tape) const {
  ad::Var y = x;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    y = layers_[i].forward(y, tape);
    if (i + 1 < layers_.size()) y = act_graph(act_, y);
  }
  return y;
}

Tensor EquivariantMLP::apply(const Tensor& x) const {
  Tensor y = x;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    y = layers_[i].apply(y);
    if (i + 1 < layers_.size()) y = act_apply(act_, std::move(y));
  }
  return y;
}

std::vector<Tensor*> EquivariantMLP::parameters() {
  std::vector<Tensor*> out;
  for (auto& layer : layers_) {
    out.push_back(&layer.weight_params());
    out.push_back(&layer.bias_params());
  }
  return out;
}

std::vector<const Tensor*> EquivariantMLP::parameters() const {
  std::vector<const Tensor*> out;
  for (const auto& layer : layers_) {
    out.push_back(&layer.weight_params());
    out.push_back(&layer.bias_params());
  }
  return out;
}

std::unique_ptr<EquivariantMLP> make_equivariant_mlp(const SignedPermutation& in_rep,
                                                     const std::vector<std::size_t>& hidden,
                                                     const SignedPermutation& out_rep,
                                                     Activation act, std::mt19937_64& rng) {
  std::vector<SignedPermutation> reps{in_rep};
  for (std::size_t w : hidden) {
    if (w % 2 != 0) throw std::invalid_argument("make_equivariant_mlp: hidden width must be even");
    reps.push_back(regular_rep(w / 2));
  }
  reps.push_back(out_rep);
  return std::make_unique<EquivariantMLP>(std::move(reps), act, rng);
}

VanillaMLP::VanillaMLP(std::size_t in_dim, const std::vector<std::size_t>& hidden,
                       std::size_t out_dim, Activation act, std::mt19937_64& rng)
    : act_(act) {
  dims_.push_back(in_dim);
  for (std::size_t w : hidden) dims_.push_back(w);
  dims_.push_back(out_dim);
  for (std::size_t i = 0; i + 1 < dims_.size(); ++i) {
    Tensor w = uniform_init(dims_[i + 1] * dims_[i], dims_[i], rng);
    weights_.push_back(Tensor({dims_[i + 1], dims_[i]}, w.data()));
    biases_.push_back(uniform_init(dims_[i + 1], dims_[i], rng));
  }
}

ad::Var VanillaMLP::forward(const ad::Var& x, ad::Tape& tape) const {
  check_matrix_input(x.value(), in_dim(), "VanillaMLP::forward");
  auto& self = const_cast<VanillaMLP&>(*this);
  ad::Var y = x;
  for (std::size_t i = 0; i < weights_.size(); ++i) {
    y = ad::linear(y, tape.param(self.weights_[i]), tape.param(self.biases_[i]));
    if (i + 1 < weights_.size()) y = act_graph(act_, y);
  }
  return y;
}

Tensor VanillaMLP::apply(const Tensor& x) const {
  check_matrix_input(x, in_dim(), "VanillaMLP::apply");
  Tensor y = x;
  for (std::size_t i = 0; i < weights_.size(); ++i) {
    y = dense_apply(y, weights_[i], biases_[i]);
    if (i + 1 < weights_.size()) y = act_apply(act_, std::move(y));
  }
  return y;
}

std::vector<Tensor*> VanillaMLP::parameters() {
  std::vector<Tensor*> out;
  for (std::size_t i = 0; i < weights_.size(); ++i) {
    out.push_back(&weights_[i]);
    out.push_back(&biases_[i]);
  }
  return out;
}

std::vector<const Tensor*> VanillaMLP::parameters() const {
  std::vector<const Tensor*> out;
  for (std::size_t i = 0; i < weights_.size(); ++i) {
    out.push_back(&weights_[i]);
    out.push_back(&biases_[i]);
  }
  return out;
}

std::unique_ptr<Net> make_mlp(bool equivariant, const SignedPermutation& in_rep,
                              const std::vector<std::size_t>& hidden,
                              const SignedPermutation& out_rep, Activation act,
                              std::mt19937_64& rng) {
  if (equivariant) return make_equivariant_mlp(in_rep, hidden, out_rep, act, rng);
  return std::make_unique<VanillaMLP>(in_rep.size(), hidden, out_rep.size(), act, rng);
}

GaussianPolicyHead::GaussianPolicyHead(const SignedPermutation& f_a, double init_log_std) {
  std::size_t n = f_a.size();
  sigma_index_.assign(n, 0);
  std::vector<bool> seen(n, false);
  std::size_t slots = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (seen[i]) continue;
    std::size_t p = f_a.target_of(i);
    sigma_index_[i] = slots;
    seen[i] = true;
    if (p != i) {
      sigma_index_[p] = slots;
      seen[p] = true;
    }
    ++slots;
  }
  log_std_ = Tensor({slots});
  log_std_.fill(init_log_std);
  auto plan = std::make_shared<ad::ScatterPlan>();
  plan->out_shape = {n};
  for (std::size_t i = 0; i < n; ++i) {
    plan->out_index.push_back(i);
    plan->src_index.push_back(sigma_index_[i]);
    plan->coeff.push_back(1.0);
  }
  expand_plan_ = std::move(plan);
}

Tensor GaussianPolicyHead::log_sigma() const {
  Tensor out({sigma_index_.size()});
  for (std::size_t i = 0; i < sigma_index_.size(); ++i) out[i] = log_std_[sigma_index_[i]];
  return out;
}

Tensor GaussianPolicyHead::sigma() const {
  Tensor out = log_sigma();
  for (double& v : out.data()) v = std::exp(v);
  return out;
}

std::pair<Tensor, double> GaussianPolicyHead::sample(const Tensor& mu,
                                                     std::mt19937_64& rng) const {
  if (!mu.all_finite()) throw std::runtime_error("GaussianPolicyHead::sample: non-finite mean");
  if (mu.size() != action_dim())
    throw std::invalid_argument("GaussianPolicyHead::sample: dimension mismatch");
  Tensor sig = sigma();
  std::normal_distribution<double> unit(0.0, 1.0);
  Tensor a({mu.size()});
  for (std::size_t i = 0; i < mu.size(); ++i) a[i] = mu[i] + sig[i] * unit(rng);
  return {a, log_prob(mu, a)};
}

double GaussianPolicyHead::log_prob(const Tensor& mu, const Tensor& action) const {
  if (mu.size() != action_dim() || action.size() != action_dim())
    throw std::invalid_argument("GaussianPolicyHead::log_prob: dimension mismatch");
  double lp = -0.5 * static_cast<double>(action_dim()) * std::log(2.0 * M_PI);
  for (std::size_t i = 0; i < mu.size(); ++i) {
    double ls = log_std_[sigma_index_[i]];
    double s = std::exp(ls);
    double d = action[i] - mu[i];
    lp += -d * d / (2.0 * s * s) - ls;
  }
  return lp;
}

ad::Var GaussianPolicyHead::log_prob_rows(const ad::Var& mu, const Tensor& actions,
                                          ad::Tape& tape) const {
  auto& self = const_cast<GaussianPolicyHead&>(*this);
  ad::Var ls = ad::scatter(tape.param(self.log_std_), expand_plan_);  // [adim]
  ad::Var inv_var = ad::vexp(ad::scale(ls, -2.0));
  ad::Var diff = ad::sub(mu, tape.constant(actions));
  ad::Var quad = ad::mul_rowvec(ad::mul(diff, diff), inv_var);
  ad::Var lp = ad::scale(ad::row_sum(quad), -0.5);
  lp = ad::add_broadcast_scalar(lp, ad::sum(ls), -1.0);
  return ad::add_scalar(lp, -0.5 * static_cast<double>(action_dim()) * std::log(2.0 * M_PI));
}

ad::Var GaussianPolicyHead::entropy(ad::Tape& tape) const {
  auto& self = const_cast<GaussianPolicyHead&>(*this);
  ad::Var ls = ad::scatter(tape.param(self.log_std_), expand_plan_);
  return ad::add_scalar(ad::sum(ls),
                        0.5 * static_cast<double>(action_dim()) * std::log(2.0 * M_PI * M_E));
}

double GaussianPolicyHead::entropy_value() const {
  double h = 0.5 * static_cast<double>(action_dim()) * std::log(2.0 * M_PI * M_E);
  for (std::size_t i = 0; i < action_dim(); ++i) h += log_std_[sigma_index_[i]];
  return h;
}

namespace {

Tensor slice_cols(const Tensor& x, std::size_t start, std::size_t width) {
  Tensor out = Tensor::matrix(x.rows(), width);
  for (std::size_t r = 0; r < x.rows(); ++r)
    for (std::size_t j = 0; j < width; ++j) out.at(r, j) = x.at(r, start + j);
  return out;
}

Tensor hcat(const Tensor& a, const Tensor& b) {
  Tensor out = Tensor::matrix(a.rows(), a.cols() + b.cols());
  for (std::size_t r = 0; r < a.rows(); ++r) {
    for (std::size_t j = 0; j < a.cols(); ++j) out.at(r, j) = a.at(r, j);
    for (std::size_t j = 0; j < b.cols(); ++j) out.at(r, a.cols() + j) = b.at(r, j);
  }
  return out;
}

}  // namespace

Actor::Actor(const LayoutProfile& profile, ActorConfig cfg, std::mt19937_64& rng)
    : f_o_(profile.f_o()),
      f_a_(profile.f_a()),
      f_z_(profile.f_z()),
      cfg_(std::move(cfg)),
      head_(profile.f_a(), cfg_.init_log_std) {
  SignedPermutation hist_rep = repeat_rep(f_o_, cfg_.history_len + 1);
  encoder_ = make_mlp(cfg_.equivariant, hist_rep, cfg_.encoder_widths, f_z_, cfg_.activation, rng);
  std::vector<std::size_t> dec_widths(cfg_.encoder_widths.rbegin(), cfg_.encoder_widths.rend());
  decoder_ = make_mlp(cfg_.equivariant, f_z_, dec_widths, f_o_, cfg_.activation, rng);
  SignedPermutation pol_in = direct_sum(f_o_, f_z_);
  policy_ = make_mlp(cfg_.equivariant, pol_in, cfg_.policy_widths, f_a_, cfg_.activation, rng);
}

Tensor Actor::encode(const Tensor& hist_batch) const { return encoder_->apply(hist_batch); }

Tensor Actor::mean_action(const Tensor& hist_batch) const {
  check_matrix_input(hist_batch, input_width(), "Actor::mean_action");
  Tensor z = encoder_->apply(hist_batch);
  Tensor obs = slice_cols(hist_batch, cfg_.history_len * obs_dim(), obs_dim());
  return policy_->apply(hcat(obs, z));
}

Tensor Actor::decode(const Tensor& z_batch) const { return decoder_->apply(z_batch); }

Tensor Actor::mean_action_vec(const Tensor& hist_flat) const {
  if (hist_flat.size() != input_width())
    throw std::invalid_argument("Actor::mean_action_vec: length mismatch");
  Tensor row({1, hist_flat.size()}, hist_flat.data());
  Tensor out = mean_action(row);
  return Tensor({out.size()}, out.data());
}

ad::Var Actor::latent(const ad::Var& hist_batch, ad::Tape& tape) const {
  return encoder_->forward(hist_batch, tape);
}

ad::Var Actor::mean(const ad::Var& hist_batch, ad::Tape& tape) const {
  check_matrix_input(hist_batch.value(), input_width(), "Actor::mean");
  ad::Var z = encoder_->forward(hist_batch, tape);
  // Split off the newest observation (last obs_dim columns).
  std::size_t start = cfg_.history_len * obs_dim();
  Tensor obs = slice_cols(hist_batch.value(), start, obs_dim());
  ad::Var obs_v = tape.constant(obs);
  return policy_->forward(ad::concat_cols(obs_v, z), tape);
}

ad::Var Actor::decode(const ad::Var& z, ad::Tape& tape) const {
  return decoder_->forward(z, tape);
}

std::vector<Tensor*> Actor::parameters() {
  std::vector<Tensor*> out;
  for (Tensor* t : encoder_->parameters()) out.push_back(t);
  for (Tensor* t : decoder_->parameters()) out.push_back(t);
  for (Tensor* t : policy_->parameters()) out.push_back(t);
  out.push_back(&head_.log_std_params());
  return out;
}

std::vector<const Tensor*> Actor::parameters() const {
  std::vector<const Tensor*> out;
  for (const Tensor* t : static_cast<const Net&>(*encoder_).parameters()) out.push_back(t);
  for (const Tensor* t : static_cast<const Net&>(*decoder_).parameters()) out.push_back(t);
  for (const Tensor* t : static_cast<const Net&>(*policy_).parameters()) out.push_back(t);
  out.push_back(&head_.log_std_params());
  return out;
}

Critic::Critic(const LayoutProfile& profile, CriticConfig cfg, std::mt19937_64& rng)
    : f_h_(profile.f_h()), f_o_(profile.f_o()), cfg_(std::move(cfg)) {
  SignedPermutation in_rep = direct_sum(f_h_, f_o_);
  net_ = make_mlp(cfg_.equivariant, in_rep, cfg_.widths, SignedPermutation::identity(1),
                  cfg_.activation, rng);
}

double Critic::value(const Tensor& strip, const Tensor& obs) const {
  if (strip.size() != f_h_.size() || obs.size() != f_o_.size())
    throw std::invalid_argument("Critic::value: dimension mismatch");
  Tensor in({1, input_width()});
  for (std::size_t i = 0; i < strip.size(); ++i) in[i] = strip[i];
  for (std::size_t i = 0; i < obs.size(); ++i) in[strip.size() + i] = obs[i];
  return net_->apply(in)[0];
}

Tensor Critic::values(const Tensor& input_batch) const {
  Tensor out = net_->apply(input_batch);
  return Tensor({out.rows()}, out.data());
}

ad::Var Critic::forward(const ad::Var& input_batch, ad::Tape& tape) const {
  return net_->forward(input_batch, tape);
}

std::vector<Tensor*> Critic::parameters() { return net_->parameters(); }

std::vector<const Tensor*> Critic::parameters() const {
  return static_cast<const Net&>(*net_).parameters();
}

std::string double_to_string(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

double double_from_string(const std::string& s) { return std::strtod(s.c_str(), nullptr); }

nlohmann::json tensor_to_json(const Tensor& t) {
  nlohmann::json j;
  j["shape"] = t.shape();
  nlohmann::json vals = nlohmann::json::array();
  for (double v : t.data()) vals.push_back(double_to_string(v));
  j["values"] = std::move(vals);
  return j;
}

Tensor tensor_from_json(const nlohmann::json& j) {
  std::vector<std::size_t> shape = j.at("shape").get<std::vector<std::size_t>>();
  std::vector<double> data;
  for (const auto& v : j.at("values")) data.push_back(double_from_string(v.get<std::string>()));
  return Tensor(std::move(shape), std::move(data));
}

nlohmann::json params_to_json(const std::vector<const Tensor*>& params) {
  nlohmann::json arr = nlohmann::json::array();
  for (const Tensor* t : params) arr.push_back(tensor_to_json(*t));
  return arr;
}

void params_from_json(const nlohmann::json& j, const std::vector<Tensor*>& params) {
  if (j.size() != params.size())
    throw std::invalid_argument("params_from_json: parameter count mismatch");
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor t = tensor_from_json(j[i]);
    if (!t.same_shape(*params[i]))
      throw std::invalid_argument("params_from_json: parameter shape mismatch");
    *params[i] = std::move(t);
  }
}

}  // namespace symmeq
