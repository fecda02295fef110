#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "symmeq/eqnn.hpp"
#include "symmeq/layout.hpp"

using namespace symmeq;

namespace {

Tensor random_batch(std::size_t rows, std::size_t cols, std::mt19937_64& rng) {
  Tensor t({rows, cols});
  std::uniform_real_distribution<double> uni(-1.5, 1.5);
  for (double& v : t.data()) v = uni(rng);
  return t;
}

double equivariance_residual(const Net& net, const SignedPermutation& rin,
                             const SignedPermutation& rout, std::mt19937_64& rng) {
  Tensor x = random_batch(16, rin.size(), rng);
  Tensor y1 = net.apply(mirror_history(rin, x));
  Tensor y2 = mirror_history(rout, net.apply(x));
  double worst = 0.0;
  for (std::size_t i = 0; i < y1.size(); ++i) worst = std::max(worst, std::abs(y1[i] - y2[i]));
  return worst;
}

}  // namespace

TEST_CASE("equivariant stacks commute with the group action") {
  std::mt19937_64 rng(11);
  LayoutProfile p = build_toy_profile(2, 1);
  for (Activation act : {Activation::Elu, Activation::Relu}) {
    auto net = make_equivariant_mlp(p.f_o(), {16, 8}, p.f_a(), act, rng);
    CHECK(net->in_dim() == 23);
    CHECK(net->out_dim() == 5);
    for (int trial = 0; trial < 20; ++trial)
      CHECK(equivariance_residual(*net, p.f_o(), p.f_a(), rng) < 1e-10);
  }
}

TEST_CASE("every layer of an equivariant stack satisfies its constraint") {
  std::mt19937_64 rng(13);
  LayoutProfile p = build_toy_profile(2, 1);
  auto net = make_equivariant_mlp(p.f_o(), {12}, p.f_z(), Activation::Elu, rng);
  for (const EquivariantLinear& layer : net->layers()) {
    CHECK(intertwiner_residual(layer.rho_in(), layer.rho_out(), layer.realized_weight()) < 1e-12);
    Tensor b = layer.realized_bias();
    Tensor moved = layer.rho_out().apply(b);
    for (std::size_t i = 0; i < b.size(); ++i) CHECK(moved[i] == b[i]);
  }
}

TEST_CASE("activations on sign-carrying features are rejected") {
  std::mt19937_64 rng(17);
  SignedPermutation sign1({0}, {-1.0});
  // A hidden rep that carries a -1 sign cannot take a pointwise activation.
  CHECK_THROWS(EquivariantMLP({regular_rep(2), sign1, regular_rep(2)}, Activation::Elu, rng));
  // Signed input/output reps are fine: no activation is applied there.
  EquivariantMLP ok({sign1, regular_rep(2), sign1}, Activation::Elu, rng);
  CHECK(ok.in_dim() == 1);
}

TEST_CASE("odd hidden widths are rejected") {
  std::mt19937_64 rng(19);
  LayoutProfile p = build_toy_profile(2, 1);
  CHECK_THROWS(make_equivariant_mlp(p.f_o(), {7}, p.f_a(), Activation::Elu, rng));
}

TEST_CASE("parameter JSON round-trips bit-exactly") {
  std::mt19937_64 rng(23);
  LayoutProfile p = build_toy_profile(2, 1);
  ActorConfig acfg;
  acfg.encoder_widths = {16};
  acfg.policy_widths = {16, 16};
  Actor a(p, acfg, rng);
  nlohmann::json j = params_to_json(std::as_const(a).parameters());

  std::mt19937_64 rng2(999);
  Actor b(p, acfg, rng2);
  params_from_json(j, b.parameters());

  auto pa = std::as_const(a).parameters();
  auto pb = std::as_const(b).parameters();
  REQUIRE(pa.size() == pb.size());
  for (std::size_t t = 0; t < pa.size(); ++t) {
    REQUIRE(pa[t]->size() == pb[t]->size());
    for (std::size_t i = 0; i < pa[t]->size(); ++i) CHECK((*pa[t])[i] == (*pb[t])[i]);
  }
}

TEST_CASE("decimal round-trip preserves doubles bit-exactly") {
  std::mt19937_64 rng(29);
  std::uniform_real_distribution<double> uni(-1e6, 1e6);
  for (int i = 0; i < 1000; ++i) {
    double v = uni(rng) * std::pow(10.0, (int)(rng() % 20) - 10);
    CHECK(double_from_string(double_to_string(v)) == v);
  }
  CHECK(double_from_string(double_to_string(0.1)) == 0.1);
  CHECK(double_from_string(double_to_string(-0.0)) == 0.0);
}

TEST_CASE("gaussian head ties standard deviations across swapped pairs") {
  LayoutProfile p = build_toy_profile(2, 1);
  GaussianPolicyHead head(p.f_a(), -0.5);
  CHECK(head.action_dim() == 5);
  CHECK(head.sigma_slot_count() == 3);  // two swap orbits + center
  CHECK(head.sigma_index()[0] == head.sigma_index()[2]);
  CHECK(head.sigma_index()[1] == head.sigma_index()[3]);
  CHECK(head.sigma_index()[0] != head.sigma_index()[1]);
  // Perturb one slot: both partners move together.
  head.log_std_params()[head.sigma_index()[0]] = 0.3;
  Tensor s = head.sigma();
  CHECK(s[0] == s[2]);
  CHECK(s[1] == s[3]);
  CHECK(s[0] == doctest::Approx(std::exp(0.3)));
}

TEST_CASE("batched log-probabilities match the scalar evaluation") {
  std::mt19937_64 rng(31);
  LayoutProfile p = build_toy_profile(2, 1);
  GaussianPolicyHead head(p.f_a(), -0.3);
  Tensor mu = random_batch(8, 5, rng);
  Tensor actions = random_batch(8, 5, rng);
  ad::Tape tape;
  Tensor lp = head.log_prob_rows(ad::Var::leaf(mu), actions, tape).value();
  REQUIRE(lp.size() == 8);
  for (std::size_t r = 0; r < 8; ++r) {
    Tensor mu_r({5}), a_r({5});
    for (std::size_t i = 0; i < 5; ++i) {
      mu_r[i] = mu.at(r, i);
      a_r[i] = actions.at(r, i);
    }
    CHECK(lp[r] == doctest::Approx(head.log_prob(mu_r, a_r)).epsilon(1e-12));
  }
}

TEST_CASE("sampled actions have the reported log-probability") {
  std::mt19937_64 rng(37);
  LayoutProfile p = build_toy_profile(2, 1);
  GaussianPolicyHead head(p.f_a(), 0.0);
  Tensor mu = Tensor::vec({0.1, -0.2, 0.3, 0.0, 0.5});
  for (int i = 0; i < 20; ++i) {
    auto [a, lp] = head.sample(mu, rng);
    CHECK(lp == doctest::Approx(head.log_prob(mu, a)).epsilon(1e-12));
  }
}

TEST_CASE("equivariant actor mean commutes and its critic partner is invariant") {
  std::mt19937_64 rng(41);
  LayoutProfile p = build_toy_profile(2, 1);
  ActorConfig acfg;
  acfg.encoder_widths = {16};
  acfg.policy_widths = {16};
  Actor actor(p, acfg, rng);
  CriticConfig ccfg;
  ccfg.widths = {16, 16};
  Critic critic(p, ccfg, rng);

  SignedPermutation hist_rep = repeat_rep(p.f_o(), acfg.history_len + 1);
  for (int trial = 0; trial < 10; ++trial) {
    Tensor h = random_batch(4, actor.input_width(), rng);
    Tensor lhs = actor.mean_action(mirror_history(hist_rep, h));
    Tensor rhs = mirror_history(p.f_a(), actor.mean_action(h));
    for (std::size_t i = 0; i < lhs.size(); ++i)
      CHECK(std::abs(lhs[i] - rhs[i]) < 1e-10);

    Tensor strip({3});
    Tensor obs({23});
    std::uniform_real_distribution<double> uni(-1.0, 1.0);
    for (double& v : strip.data()) v = uni(rng);
    for (double& v : obs.data()) v = uni(rng);
    double v1 = critic.value(strip, obs);
    double v2 = critic.value(p.f_h().apply(strip), p.f_o().apply(obs));
    CHECK(std::abs(v1 - v2) < 1e-10);
  }

  // Latent equivariance of the encoder and decoder reconstruction symmetry.
  Tensor h = random_batch(4, actor.input_width(), rng);
  Tensor z1 = actor.encode(mirror_history(hist_rep, h));
  Tensor z2 = mirror_history(p.f_z(), actor.encode(h));
  for (std::size_t i = 0; i < z1.size(); ++i) CHECK(std::abs(z1[i] - z2[i]) < 1e-10);
  Tensor d1 = actor.decode(z2);
  Tensor d2 = mirror_history(p.f_o(), actor.decode(actor.encode(h)));
  for (std::size_t i = 0; i < d1.size(); ++i) CHECK(std::abs(d1[i] - d2[i]) < 1e-10);
}
