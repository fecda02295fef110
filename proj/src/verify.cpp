#include "symmeq/verify.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "symmeq/intertwiner.hpp"
#include "symmeq/metrics.hpp"

namespace symmeq::verify {

bool all_passed(const std::vector<CheckResult>& checks) {
  for (const auto& c : checks)
    if (!c.passed && !c.informational) return false;
  return true;
}

std::string format_table(const std::vector<CheckResult>& checks) {
  std::ostringstream out;
  for (const auto& c : checks) {
    out << (c.passed ? "PASS" : (c.informational ? "INFO" : "FAIL")) << "  " << c.name
        << "  residual=" << c.residual << "  tolerance=" << c.tolerance << '\n';
  }
  return out.str();
}

namespace {

CheckResult involution_check(const std::string& name, const SignedPermutation& p) {
  CheckResult c;
  c.name = name + " is an involution";
  c.passed = p.is_involution();
  c.tolerance = 0.0;
  c.residual = c.passed ? 0.0 : 1.0;
  return c;
}

CheckResult swap_structure_check(const std::string& space,
                                 const std::vector<ComponentSpec>& components,
                                 const SignedPermutation& transform) {
  CheckResult c;
  c.name = space + " component blocks map as declared";
  c.passed = true;
  std::size_t offset = 0;
  std::vector<std::pair<std::size_t, const ComponentSpec*>> offsets;
  for (const auto& comp : components) {
    offsets.push_back({offset, &comp});
    offset += comp.dim;
  }
  auto offset_of = [&](const std::string& name) -> std::size_t {
    for (const auto& [off, comp] : offsets)
      if (comp->name == name) return off;
    return static_cast<std::size_t>(-1);
  };
  for (const auto& [off, comp] : offsets) {
    for (std::size_t i = 0; i < comp->dim; ++i) {
      std::size_t idx = off + i;
      std::size_t expect_target = idx;
      double expect_sign = 1.0;
      if (comp->kind == ComponentSpec::Kind::Negated) {
        expect_sign = -1.0;
      } else if (comp->kind == ComponentSpec::Kind::Swap) {
        expect_target = offset_of(comp->partner) + i;
        expect_sign = comp->signs.empty() ? 1.0 : comp->signs[i];
      }
      if (transform.target_of(idx) != expect_target ||
          transform.sign_of(idx) != expect_sign) {
        c.passed = false;
        c.residual = 1.0;
      }
    }
  }
  return c;
}

}  // namespace

std::vector<CheckResult> profile_checks(const LayoutProfile& profile) {
  std::vector<CheckResult> out;
  out.push_back(involution_check("F_o", profile.f_o()));
  out.push_back(involution_check("F_a", profile.f_a()));
  out.push_back(involution_check("F_s", profile.f_s()));
  out.push_back(involution_check("F_H", profile.f_h()));
  out.push_back(involution_check("F_z", profile.f_z()));
  out.push_back(swap_structure_check("observation", profile.observation_components(),
                                     profile.f_o()));
  out.push_back(swap_structure_check("action", profile.action_components(), profile.f_a()));
  out.push_back(swap_structure_check("state", profile.state_components(), profile.f_s()));
  out.push_back(
      swap_structure_check("height map", profile.height_map_components(), profile.f_h()));
  return out;
}

env::ToyState random_toy_state(const env::EnvConfig& cfg, std::mt19937_64& rng) {
  auto uni = [&](double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(rng);
  };
  env::ToyState s = env::make_zero_state(cfg);
  s.pos_x = uni(-5.0, 5.0);
  s.pos_y = uni(-2.0, 2.0);
  s.heading = uni(-M_PI, M_PI);
  s.vel_x = uni(-1.0, 1.0);
  s.vel_y = uni(-1.0, 1.0);
  s.yaw_rate = uni(-1.0, 1.0);
  for (double& x : s.joint_pos) x = uni(-1.0, 1.0);
  for (double& x : s.joint_vel) x = uni(-2.0, 2.0);
  for (double& x : s.prev_action) x = uni(-1.0, 1.0);
  for (double& x : s.prev_action2) x = uni(-1.0, 1.0);
  s.command = {uni(-0.8, 0.8), uni(-0.8, 0.8), uni(-0.5, 0.5)};
  for (double& t : s.terrain) t = uni(0.8, 1.2);
  s.set_phase_parts(uni(0.0, M_PI), static_cast<int>(rng() & 1ull));
  s.draw.kp_factor = uni(0.9, 1.1);
  s.draw.kd_factor = uni(0.9, 1.1);
  s.draw.motor_strength = uni(0.9, 1.1);
  s.draw.drag_factor = uni(0.9, 1.1);
  s.draw.action_delay = static_cast<int>(rng() & 1ull);
  return s;
}

std::vector<CheckResult> env_symmetry_checks(const env::EnvConfig& cfg, std::size_t pairs,
                                             std::uint64_t seed, double transition_tol,
                                             double reward_tol) {
  std::mt19937_64 rng(seed);
  std::size_t adim = cfg.action_dim();
  LayoutProfile profile = build_toy_profile(cfg.joints_per_side, cfg.center_joints);
  double worst_transition = 0.0, worst_reward = 0.0, worst_obs = 0.0;
  for (std::size_t i = 0; i < pairs; ++i) {
    env::ToyState s = random_toy_state(cfg, rng);
    Tensor a({adim});
    for (std::size_t j = 0; j < adim; ++j)
      a[j] = std::uniform_real_distribution<double>(-1.0, 1.0)(rng);

    env::ToyState sm = env::mirror_state(s, cfg);
    Tensor am = Tensor::vec(
        env::mirror_action_vec(a.data(), cfg.joints_per_side, cfg.center_joints));

    env::StepResult r1 = env::step(s, a, cfg);
    env::StepResult r2 = env::step(sm, am, cfg);

    Tensor mirrored = env::pack_state(env::mirror_state(r1.state, cfg));
    Tensor other = env::pack_state(r2.state);
    for (std::size_t j = 0; j < mirrored.size(); ++j)
      worst_transition = std::max(worst_transition, std::abs(mirrored[j] - other[j]));

    auto gap = [&](double x, double y) {
      worst_reward = std::max(worst_reward, std::abs(x - y));
    };
    gap(r1.breakdown.tracking_lin, r2.breakdown.tracking_lin);
    gap(r1.breakdown.tracking_ang, r2.breakdown.tracking_ang);
    gap(r1.breakdown.alive, r2.breakdown.alive);
    gap(r1.breakdown.action_rate, r2.breakdown.action_rate);
    gap(r1.breakdown.action_smoothness, r2.breakdown.action_smoothness);
    gap(r1.breakdown.torque, r2.breakdown.torque);
    gap(r1.breakdown.swing_drive, r2.breakdown.swing_drive);
    gap(r1.reward, r2.reward);

    // observe commutes with the mirror as well.
    Tensor o1 = profile.f_o().apply(env::observe(s, cfg));
    Tensor o2 = env::observe(sm, cfg);
    for (std::size_t j = 0; j < o1.size(); ++j)
      worst_obs = std::max(worst_obs, std::abs(o1[j] - o2[j]));
  }

  std::vector<CheckResult> out;
  out.push_back({"transition mirror-consistency", worst_transition < transition_tol,
                 worst_transition, transition_tol});
  out.push_back(
      {"reward component invariance", worst_reward < reward_tol, worst_reward, reward_tol});
  out.push_back({"observation mirror-consistency", worst_obs < transition_tol, worst_obs,
                 transition_tol});
  return out;
}

namespace {

void layer_residual_checks(const std::string& who, const Net& net,
                           std::vector<CheckResult>& out) {
  const auto* eq = dynamic_cast<const EquivariantMLP*>(&net);
  if (!eq) return;
  double worst = 0.0;
  for (const auto& layer : eq->layers()) {
    worst = std::max(worst, intertwiner_residual(layer.rho_in(), layer.rho_out(),
                                                 layer.realized_weight()));
  }
  out.push_back({who + " layer intertwiner residual", worst < 1e-12, worst, 1e-12});
}

}  // namespace

std::vector<CheckResult> network_checks(const Actor& actor, const Critic& critic,
                                        const LayoutProfile& profile, std::size_t samples,
                                        std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<CheckResult> out;

  layer_residual_checks("encoder", actor.encoder(), out);
  layer_residual_checks("decoder", actor.decoder(), out);
  layer_residual_checks("policy", actor.policy(), out);

  std::uniform_real_distribution<double> uni(-1.0, 1.0);
  Tensor hist = Tensor::matrix(samples, actor.input_width());
  for (double& v : hist.data()) v = uni(rng);
  double s = metrics::spat_s(actor, hist);
  out.push_back({"actor mean-action equivariance (Spat-S)", s < 1e-10, s, 1e-10,
                 !actor.equivariant()});

  double worst_v = 0.0;
  for (std::size_t i = 0; i < samples; ++i) {
    Tensor strip({critic.height_dim()});
    for (double& v : strip.data()) v = std::uniform_real_distribution<double>(0.5, 1.5)(rng);
    Tensor obs({critic.obs_dim()});
    for (double& v : obs.data()) v = uni(rng);
    double v1 = critic.value(strip, obs);
    double v2 = critic.value(profile.f_h().apply(strip), profile.f_o().apply(obs));
    worst_v = std::max(worst_v, std::abs(v1 - v2));
  }
  out.push_back(
      {"critic value invariance", worst_v < 1e-10, worst_v, 1e-10, !critic.equivariant()});
  return out;
}

}  // namespace symmeq::verify
