#pragma once

#include <array>
#include <cmath>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "symmeq/layout.hpp"
#include "symmeq/tensor.hpp"

namespace symmeq::env {

// Per-episode dynamics draw. All values are scalars and mirror-neutral, so
// transition and reward symmetry hold conditioned on the draw.
struct DynamicsDraw {
  double kp_factor = 1.0;
  double kd_factor = 1.0;
  double motor_strength = 1.0;
  double drag_factor = 1.0;
  int action_delay = 0;  // 0 or 1 control steps
};

struct ToyState {
  double pos_x = 0.0, pos_y = 0.0;
  double heading = 0.0;
  double vel_x = 0.0, vel_y = 0.0;  // body frame
  double yaw_rate = 0.0;
  std::vector<double> joint_pos;  // [left(k), right(k), center(m)]
  std::vector<double> joint_vel;
  std::array<double, 3> command{0.0, 0.0, 0.0};   // (c_x, c_y, c_yaw)
  std::array<double, 3> terrain{1.0, 1.0, 1.0};   // drag multipliers (left, middle, right)
  std::vector<double> prev_action;                 // a_{t-1}
  std::vector<double> prev_action2;                // a_{t-2}
  DynamicsDraw draw;

  // Phase in [0, 2pi), stored as (base in [0, pi), half-period flag) so the
  // mirror's half-period shift is exact in floating point.
  double phase() const { return phase_base_ + (phase_half_ ? M_PI : 0.0); }
  double phase_base() const { return phase_base_; }
  int phase_half() const { return phase_half_; }
  void set_phase_parts(double base, int half) {
    phase_base_ = base;
    phase_half_ = half;
  }
  void advance_phase(double delta) {
    phase_base_ += delta;
    while (phase_base_ >= M_PI) {
      phase_base_ -= M_PI;
      phase_half_ ^= 1;
    }
  }

 private:
  double phase_base_ = 0.0;
  int phase_half_ = 0;
};

struct RandomizationConfig {
  double kp_factor_low = 0.9, kp_factor_high = 1.1;
  double kd_factor_low = 0.9, kd_factor_high = 1.1;
  double motor_strength_low = 0.9, motor_strength_high = 1.1;
  double drag_factor_low = 0.9, drag_factor_high = 1.1;
  double terrain_low = 0.8, terrain_high = 1.2;
  double obs_noise_std = 0.01;
  bool randomize_action_delay = true;
};

struct EnvConfig {
  std::size_t joints_per_side = 2;  // k
  std::size_t center_joints = 1;    // m
  double dt = 0.02;
  double gait_period = 0.8;  // T
  double kp = 20.0;
  double kd = 0.5;
  double inertia = 0.1;
  double c1 = 1.5;  // forward force per drive
  double c2 = 0.8;  // lateral force per drive
  double c3 = 0.4;  // yaw torque per lateral drive
  double c4 = 0.6;  // yaw torque per center joint angle
  double d_x = 1.0, d_y = 1.0, d_yaw = 0.8;  // drag coefficients
  double zone_half_width = 0.5;  // w
  double action_limit = 1.0;     // symmetric PD-target clamp (actuator range)
  std::size_t episode_steps = 400;
  double tracking_sigma = 0.25;
  double cmd_max_x = 0.8, cmd_max_y = 0.8, cmd_max_yaw = 0.5;
  RandomizationConfig randomization;
  bool enable_randomization = true;
  bool enable_obs_noise = true;

  std::size_t action_dim() const { return 2 * joints_per_side + center_joints; }

  nlohmann::json to_json() const;
  static EnvConfig from_json(const nlohmann::json& j);
};

struct RewardBreakdown {
  double tracking_lin = 0.0;
  double tracking_ang = 0.0;
  double alive = 0.0;
  double action_rate = 0.0;
  double action_smoothness = 0.0;
  double torque = 0.0;
  double swing_drive = 0.0;

  double total() const {
    return tracking_lin + tracking_ang + alive + action_rate + action_smoothness + torque +
           swing_drive;
  }
};

struct StepResult {
  ToyState state;
  Tensor observation;
  double reward = 0.0;
  RewardBreakdown breakdown;
  bool terminated = false;
  std::string diagnostic;
};

// Stance gates: strict inequalities, both zero at sin(phase) = 0.
inline double stance_left(double phase) { return std::sin(phase) > 0.0 ? 1.0 : 0.0; }
inline double stance_right(double phase) { return std::sin(phase) < 0.0 ? 1.0 : 0.0; }

// Gate evaluation on the split phase representation; exact under the mirror.
inline double stance_left_of(const ToyState& s) {
  return s.phase_half() == 0 && std::sin(s.phase_base()) > 0.0 ? 1.0 : 0.0;
}
inline double stance_right_of(const ToyState& s) {
  return s.phase_half() == 1 && std::sin(s.phase_base()) > 0.0 ? 1.0 : 0.0;
}

// F_a applied to a raw joint-ordered vector [left(k), right(k), center(m)].
std::vector<double> mirror_action_vec(const std::vector<double>& a, std::size_t k, std::size_t m);

// Drag-zone multiplier from lateral position: left strip for p_y > w, right
// strip for p_y < -w, middle otherwise.
double drag_multiplier(double pos_y, const std::array<double, 3>& terrain, double half_width);

ToyState make_zero_state(const EnvConfig& cfg);

// Bilateral mirror of the full state (F_s). Involution.
ToyState mirror_state(const ToyState& s, const EnvConfig& cfg);

// Deterministic one-step dynamics: PD joints, stance-gated body forces,
// semi-implicit Euler. Satisfies step(F_s(s), F_a(a)) = F_s(step(s, a)).
StepResult step(const ToyState& s, const Tensor& action, const EnvConfig& cfg);

// Reward recomputed from the transition triple; breakdown sums to the total.
std::pair<double, RewardBreakdown> reward(const ToyState& s, const Tensor& action,
                                          const ToyState& next, const EnvConfig& cfg);

// Observation in the toy profile order. observe(mirror_state(s)) = F_o(observe(s)).
Tensor observe(const ToyState& s, const EnvConfig& cfg);

Tensor height_strip(const ToyState& s);

ToyState reset(const EnvConfig& cfg, std::mt19937_64& rng, double curriculum_level);

double update_curriculum(double level, double mean_tracking_ratio);

// Packs the state into a flat vector ordered like the toy profile's state
// components (phase stored as sin/cos).
Tensor pack_state(const ToyState& s);

// Stateful wrapper: episode bookkeeping, optional observation noise, action
// delay, per-episode randomization. One instance per worker.
class BilateralTracker {
 public:
  BilateralTracker(EnvConfig cfg, std::uint64_t seed);

  const EnvConfig& config() const { return cfg_; }
  const ToyState& state() const { return state_; }
  std::size_t steps_in_episode() const { return steps_; }

  Tensor reset_episode(double curriculum_level);
  // Returns the (possibly noisy) observation of the next state.
  StepResult step_episode(const Tensor& action);

 private:
  EnvConfig cfg_;
  std::mt19937_64 rng_;
  ToyState state_;
  std::size_t steps_ = 0;
  double level_ = 0.0;
};

}  // namespace symmeq::env
