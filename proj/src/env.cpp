#include "symmeq/env.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

namespace symmeq::env {

namespace {

constexpr double kTwoPi = 2.0 * M_PI;

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

}  // namespace

nlohmann::json EnvConfig::to_json() const {
  return nlohmann::json{
      {"joints_per_side", joints_per_side},
      {"center_joints", center_joints},
      {"dt", dt},
      {"gait_period", gait_period},
      {"kp", kp},
      {"kd", kd},
      {"inertia", inertia},
      {"c1", c1},
      {"c2", c2},
      {"c3", c3},
      {"c4", c4},
      {"d_x", d_x},
      {"d_y", d_y},
      {"d_yaw", d_yaw},
      {"zone_half_width", zone_half_width},
      {"action_limit", action_limit},
      {"episode_steps", episode_steps},
      {"tracking_sigma", tracking_sigma},
      {"cmd_max_x", cmd_max_x},
      {"cmd_max_y", cmd_max_y},
      {"cmd_max_yaw", cmd_max_yaw},
      {"enable_randomization", enable_randomization},
      {"enable_obs_noise", enable_obs_noise},
      {"randomization",
       {{"kp_factor", {randomization.kp_factor_low, randomization.kp_factor_high}},
        {"kd_factor", {randomization.kd_factor_low, randomization.kd_factor_high}},
        {"motor_strength", {randomization.motor_strength_low, randomization.motor_strength_high}},
        {"drag_factor", {randomization.drag_factor_low, randomization.drag_factor_high}},
        {"terrain", {randomization.terrain_low, randomization.terrain_high}},
        {"obs_noise_std", randomization.obs_noise_std},
        {"randomize_action_delay", randomization.randomize_action_delay}}}};
}

EnvConfig EnvConfig::from_json(const nlohmann::json& j) {
  EnvConfig cfg;
  expect_keys(j,
              {"joints_per_side", "center_joints", "dt", "gait_period", "kp", "kd", "inertia",
               "c1", "c2", "c3", "c4", "d_x", "d_y", "d_yaw", "zone_half_width", "action_limit",
               "episode_steps",
               "tracking_sigma", "cmd_max_x", "cmd_max_y", "cmd_max_yaw", "enable_randomization",
               "enable_obs_noise", "randomization"},
              "env config");
  read_if(j, "joints_per_side", cfg.joints_per_side);
  read_if(j, "center_joints", cfg.center_joints);
  read_if(j, "dt", cfg.dt);
  read_if(j, "gait_period", cfg.gait_period);
  read_if(j, "kp", cfg.kp);
  read_if(j, "kd", cfg.kd);
  read_if(j, "inertia", cfg.inertia);
  read_if(j, "c1", cfg.c1);
  read_if(j, "c2", cfg.c2);
  read_if(j, "c3", cfg.c3);
  read_if(j, "c4", cfg.c4);
  read_if(j, "d_x", cfg.d_x);
  read_if(j, "d_y", cfg.d_y);
  read_if(j, "d_yaw", cfg.d_yaw);
  read_if(j, "zone_half_width", cfg.zone_half_width);
  read_if(j, "action_limit", cfg.action_limit);
  read_if(j, "episode_steps", cfg.episode_steps);
  read_if(j, "tracking_sigma", cfg.tracking_sigma);
  read_if(j, "cmd_max_x", cfg.cmd_max_x);
  read_if(j, "cmd_max_y", cfg.cmd_max_y);
  read_if(j, "cmd_max_yaw", cfg.cmd_max_yaw);
  read_if(j, "enable_randomization", cfg.enable_randomization);
  read_if(j, "enable_obs_noise", cfg.enable_obs_noise);
  if (j.contains("randomization")) {
    const auto& r = j.at("randomization");
    expect_keys(r,
                {"kp_factor", "kd_factor", "motor_strength", "drag_factor", "terrain",
                 "obs_noise_std", "randomize_action_delay"},
                "env randomization config");
    auto range = [&](const char* key, double& lo, double& hi) {
      if (r.contains(key)) {
        lo = r.at(key).at(0).get<double>();
        hi = r.at(key).at(1).get<double>();
      }
    };
    range("kp_factor", cfg.randomization.kp_factor_low, cfg.randomization.kp_factor_high);
    range("kd_factor", cfg.randomization.kd_factor_low, cfg.randomization.kd_factor_high);
    range("motor_strength", cfg.randomization.motor_strength_low,
          cfg.randomization.motor_strength_high);
    range("drag_factor", cfg.randomization.drag_factor_low, cfg.randomization.drag_factor_high);
    range("terrain", cfg.randomization.terrain_low, cfg.randomization.terrain_high);
    read_if(r, "obs_noise_std", cfg.randomization.obs_noise_std);
    read_if(r, "randomize_action_delay", cfg.randomization.randomize_action_delay);
  }
  if (cfg.dt <= 0.0 || cfg.gait_period <= 0.0 || cfg.kp <= 0.0 || cfg.kd <= 0.0 ||
      cfg.inertia <= 0.0)
    throw std::invalid_argument("env config: dt, gait period, gains, and inertia must be positive");
  return cfg;
}

double drag_multiplier(double pos_y, const std::array<double, 3>& terrain, double half_width) {
  if (pos_y > half_width) return terrain[0];
  if (pos_y < -half_width) return terrain[2];
  return terrain[1];
}

ToyState make_zero_state(const EnvConfig& cfg) {
  ToyState s;
  std::size_t n = cfg.action_dim();
  s.joint_pos.assign(n, 0.0);
  s.joint_vel.assign(n, 0.0);
  s.prev_action.assign(n, 0.0);
  s.prev_action2.assign(n, 0.0);
  return s;
}

std::vector<double> mirror_action_vec(const std::vector<double>& a, std::size_t k, std::size_t m) {
  std::vector<double> out(a.size());
  for (std::size_t j = 0; j < k; ++j) {
    out[j] = -a[k + j];      // left <- -right
    out[k + j] = -a[j];      // right <- -left
  }
  for (std::size_t j = 0; j < m; ++j) out[2 * k + j] = -a[2 * k + j];
  return out;
}

ToyState mirror_state(const ToyState& s, const EnvConfig& cfg) {
  std::size_t k = cfg.joints_per_side, m = cfg.center_joints;
  ToyState out = s;
  out.pos_y = -s.pos_y;
  out.heading = -s.heading;
  out.vel_y = -s.vel_y;
  out.yaw_rate = -s.yaw_rate;
  out.joint_pos = mirror_action_vec(s.joint_pos, k, m);
  out.joint_vel = mirror_action_vec(s.joint_vel, k, m);
  out.prev_action = mirror_action_vec(s.prev_action, k, m);
  out.prev_action2 = mirror_action_vec(s.prev_action2, k, m);
  out.command = {s.command[0], -s.command[1], -s.command[2]};
  out.terrain = {s.terrain[2], s.terrain[1], s.terrain[0]};
  out.set_phase_parts(s.phase_base(), 1 - s.phase_half());
  return out;
}

StepResult step(const ToyState& s, const Tensor& action, const EnvConfig& cfg) {
  std::size_t k = cfg.joints_per_side, m = cfg.center_joints;
  std::size_t n = 2 * k + m;
  if (action.size() != n) throw std::invalid_argument("env::step: action length mismatch");

  const std::vector<double>& a_eff =
      s.draw.action_delay == 1 ? s.prev_action : action.data();

  ToyState next = s;

  // PD joint torques, semi-implicit Euler on each joint.
  double kp_eff = cfg.kp * s.draw.kp_factor;
  double kd_eff = cfg.kd * s.draw.kd_factor;
  for (std::size_t i = 0; i < n; ++i) {
    double torque =
        s.draw.motor_strength *
        (kp_eff * (std::clamp(a_eff[i], -cfg.action_limit, cfg.action_limit) - s.joint_pos[i]) -
         kd_eff * s.joint_vel[i]);
    next.joint_vel[i] = s.joint_vel[i] + (torque / cfg.inertia) * cfg.dt;
    next.joint_pos[i] = s.joint_pos[i] + next.joint_vel[i] * cfg.dt;
  }

  // Drives from the updated joint velocities; stance from the current phase.
  std::size_t lat = k >= 2 ? 1 : 0;
  double st_l = stance_left_of(s), st_r = stance_right_of(s);
  double u_l0 = -next.joint_vel[0], u_r0 = next.joint_vel[k];
  double u_l1 = -next.joint_vel[lat], u_r1 = next.joint_vel[k + lat];
  double drag = drag_multiplier(s.pos_y, s.terrain, cfg.zone_half_width) * s.draw.drag_factor;

  double center_sum = 0.0;
  for (std::size_t j = 0; j < m; ++j) center_sum += next.joint_pos[2 * k + j];

  double force_x = cfg.c1 * (u_l0 * st_l + u_r0 * st_r) - cfg.d_x * s.vel_x * drag;
  double force_y = cfg.c2 * (u_l1 * st_l - u_r1 * st_r) - cfg.d_y * s.vel_y * drag;
  double torque_z = cfg.c3 * (u_l1 * st_l - u_r1 * st_r) + cfg.c4 * center_sum -
                    cfg.d_yaw * s.yaw_rate * drag;

  next.vel_x = s.vel_x + force_x * cfg.dt;
  next.vel_y = s.vel_y + force_y * cfg.dt;
  next.yaw_rate = s.yaw_rate + torque_z * cfg.dt;

  // World-frame pose from the updated body velocity, heading rotation first.
  double c = std::cos(s.heading), sn = std::sin(s.heading);
  next.pos_x = s.pos_x + (c * next.vel_x - sn * next.vel_y) * cfg.dt;
  next.pos_y = s.pos_y + (sn * next.vel_x + c * next.vel_y) * cfg.dt;
  next.heading = s.heading + next.yaw_rate * cfg.dt;

  next.advance_phase(kTwoPi * cfg.dt / cfg.gait_period);

  next.prev_action2 = s.prev_action;
  next.prev_action = action.data();

  StepResult result;
  result.state = next;
  auto [r, breakdown] = reward(s, action, next, cfg);
  result.reward = r;
  result.breakdown = breakdown;
  result.observation = observe(next, cfg);
  if (!pack_state(next).all_finite() || !std::isfinite(r)) {
    result.terminated = true;
    result.diagnostic = "non-finite state or reward after step";
  }
  return result;
}

std::pair<double, RewardBreakdown> reward(const ToyState& s, const Tensor& action,
                                          const ToyState& next, const EnvConfig& cfg) {
  std::size_t k = cfg.joints_per_side, m = cfg.center_joints;
  std::size_t n = 2 * k + m;
  const std::vector<double>& a_eff =
      s.draw.action_delay == 1 ? s.prev_action : action.data();
  double sigma = cfg.tracking_sigma;

  RewardBreakdown b;
  double ex = next.vel_x - s.command[0];
  double ey = next.vel_y - s.command[1];
  double ew = next.yaw_rate - s.command[2];
  b.tracking_lin = 2.0 * std::exp(-(ex * ex + ey * ey) / sigma);
  b.tracking_ang = 2.0 * std::exp(-(ew * ew) / sigma);
  b.alive = 2.0;

  double rate = 0.0, smooth = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double d1 = action[i] - s.prev_action[i];
    double d2 = action[i] - 2.0 * s.prev_action[i] + s.prev_action2[i];
    rate += d1 * d1;
    smooth += d2 * d2;
  }
  b.action_rate = -0.005 * rate;
  b.action_smoothness = -0.01 * smooth;

  double kp_eff = cfg.kp * s.draw.kp_factor;
  double kd_eff = cfg.kd * s.draw.kd_factor;
  double torque_sq = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double torque =
        s.draw.motor_strength *
        (kp_eff * (std::clamp(a_eff[i], -cfg.action_limit, cfg.action_limit) - s.joint_pos[i]) -
         kd_eff * s.joint_vel[i]);
    torque_sq += torque * torque;
  }
  b.torque = -1e-5 * torque_sq;

  // Swing-phase drive penalty: the unloaded side should stay quiet.
  double st_l = stance_left_of(s), st_r = stance_right_of(s);
  double swing = 0.0;
  for (std::size_t j = 0; j < k; ++j) {
    double u_l = -next.joint_vel[j];
    double u_r = next.joint_vel[k + j];
    swing += (1.0 - st_l) * u_l * u_l + (1.0 - st_r) * u_r * u_r;
  }
  b.swing_drive = -0.1 * swing;

  return {b.total(), b};
}

Tensor observe(const ToyState& s, const EnvConfig& cfg) {
  std::size_t k = cfg.joints_per_side, m = cfg.center_joints;
  std::size_t n = 2 * k + m;
  Tensor o({6 + 3 * n + 2});
  std::size_t idx = 0;
  o[idx++] = s.vel_x;
  o[idx++] = s.vel_y;
  o[idx++] = s.yaw_rate;
  o[idx++] = s.command[0];
  o[idx++] = s.command[1];
  o[idx++] = s.command[2];
  for (std::size_t i = 0; i < n; ++i) o[idx++] = s.joint_pos[i];
  for (std::size_t i = 0; i < n; ++i) o[idx++] = s.joint_vel[i];
  for (std::size_t i = 0; i < n; ++i) o[idx++] = s.prev_action[i];
  double half_sign = s.phase_half() ? -1.0 : 1.0;
  o[idx++] = half_sign * std::sin(s.phase_base());
  o[idx++] = half_sign * std::cos(s.phase_base());
  return o;
}

Tensor height_strip(const ToyState& s) {
  return Tensor::vec({s.terrain[0], s.terrain[1], s.terrain[2]});
}

ToyState reset(const EnvConfig& cfg, std::mt19937_64& rng, double curriculum_level) {
  if (curriculum_level < 0.0 || curriculum_level > 1.0)
    throw std::invalid_argument("env::reset: curriculum level out of [0, 1]");
  ToyState s = make_zero_state(cfg);
  std::uniform_real_distribution<double> phase_dist(0.0, kTwoPi);
  double phi = phase_dist(rng);
  s.set_phase_parts(phi < M_PI ? phi : phi - M_PI, phi < M_PI ? 0 : 1);

  auto uniform = [&](double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(rng);
  };
  s.command[0] = uniform(-cfg.cmd_max_x, cfg.cmd_max_x) * curriculum_level;
  s.command[1] = uniform(-cfg.cmd_max_y, cfg.cmd_max_y) * curriculum_level;
  s.command[2] = uniform(-cfg.cmd_max_yaw, cfg.cmd_max_yaw) * curriculum_level;

  if (cfg.enable_randomization) {
    const RandomizationConfig& r = cfg.randomization;
    for (auto& t : s.terrain) t = uniform(r.terrain_low, r.terrain_high);
    s.draw.kp_factor = uniform(r.kp_factor_low, r.kp_factor_high);
    s.draw.kd_factor = uniform(r.kd_factor_low, r.kd_factor_high);
    s.draw.motor_strength = uniform(r.motor_strength_low, r.motor_strength_high);
    s.draw.drag_factor = uniform(r.drag_factor_low, r.drag_factor_high);
    s.draw.action_delay =
        r.randomize_action_delay ? static_cast<int>(rng() & 1ull) : 0;
  }
  return s;
}

double update_curriculum(double level, double mean_tracking_ratio) {
  if (level < 0.0 || level > 1.0)
    throw std::invalid_argument("update_curriculum: level out of [0, 1]");
  if (mean_tracking_ratio > 0.8) return std::min(1.0, level + 0.05);
  return level;
}

Tensor pack_state(const ToyState& s) {
  std::vector<double> v;
  v.reserve(14 + 5 * s.joint_pos.size());
  v.push_back(s.pos_x);
  v.push_back(s.pos_y);
  v.push_back(s.heading);
  v.push_back(s.vel_x);
  v.push_back(s.vel_y);
  v.push_back(s.yaw_rate);
  for (double x : s.joint_pos) v.push_back(x);
  for (double x : s.joint_vel) v.push_back(x);
  double half_sign = s.phase_half() ? -1.0 : 1.0;
  v.push_back(half_sign * std::sin(s.phase_base()));
  v.push_back(half_sign * std::cos(s.phase_base()));
  v.push_back(s.command[0]);
  v.push_back(s.command[1]);
  v.push_back(s.command[2]);
  for (double x : s.prev_action) v.push_back(x);
  for (double x : s.prev_action2) v.push_back(x);
  v.push_back(s.terrain[0]);
  v.push_back(s.terrain[1]);
  v.push_back(s.terrain[2]);
  return Tensor::vec(std::move(v));
}

BilateralTracker::BilateralTracker(EnvConfig cfg, std::uint64_t seed)
    : cfg_(std::move(cfg)), rng_(seed), state_(make_zero_state(cfg_)) {}

Tensor BilateralTracker::reset_episode(double curriculum_level) {
  level_ = curriculum_level;
  state_ = reset(cfg_, rng_, curriculum_level);
  steps_ = 0;
  Tensor o = observe(state_, cfg_);
  if (cfg_.enable_obs_noise && cfg_.randomization.obs_noise_std > 0.0) {
    std::normal_distribution<double> noise(0.0, cfg_.randomization.obs_noise_std);
    for (double& x : o.data()) x += noise(rng_);
  }
  return o;
}

StepResult BilateralTracker::step_episode(const Tensor& action) {
  StepResult result = step(state_, action, cfg_);
  state_ = result.state;
  ++steps_;
  if (steps_ >= cfg_.episode_steps) result.terminated = true;
  if (cfg_.enable_obs_noise && cfg_.randomization.obs_noise_std > 0.0) {
    std::normal_distribution<double> noise(0.0, cfg_.randomization.obs_noise_std);
    for (double& x : result.observation.data()) x += noise(rng_);
  }
  return result;
}

}  // namespace symmeq::env
