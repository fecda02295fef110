#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "symmeq/env.hpp"
#include "symmeq/verify.hpp"

using namespace symmeq;
using namespace symmeq::env;

namespace {

ToyState golden_state() {
  EnvConfig cfg;
  ToyState s = make_zero_state(cfg);
  s.pos_x = 0.3;
  s.pos_y = -0.2;
  s.heading = 0.15;
  s.vel_x = 0.4;
  s.vel_y = -0.1;
  s.yaw_rate = 0.2;
  s.joint_pos = {0.1, -0.2, 0.3, 0.05, -0.15};
  s.joint_vel = {0.5, -0.3, 0.2, 0.4, -0.1};
  s.command = {0.5, 0.1, -0.2};
  s.terrain = {1.1, 0.95, 1.05};
  s.prev_action = {0.05, 0.1, -0.05, 0.2, 0.0};
  s.prev_action2 = {0.0, 0.05, 0.1, -0.1, 0.05};
  s.set_phase_parts(1.0, 0);
  s.draw.kp_factor = 1.05;
  s.draw.kd_factor = 0.98;
  s.draw.motor_strength = 1.02;
  s.draw.drag_factor = 0.97;
  s.draw.action_delay = 0;
  return s;
}

constexpr double kTol = 1e-12;

}  // namespace

// Golden one-step oracle: every number below was computed independently with
// arbitrary-precision arithmetic from the closed-form update equations.
TEST_CASE("one dynamics step reproduces the frozen golden values") {
  EnvConfig cfg;
  ToyState s = golden_state();
  Tensor a = Tensor::vec({0.3, -0.4, 0.2, 0.5, -0.3});
  StepResult r = step(s, a, cfg);
  const ToyState& n = r.state;

  std::vector<double> njp = {0.1261364, -0.22253624, 0.29503216, 0.09575632,
                             -0.16465207999999998};
  std::vector<double> njv = {1.3068199999999999, -1.126812, -0.2483919999999999,
                             2.2878160000000003, -0.7326039999999999};
  for (std::size_t i = 0; i < 5; ++i) {
    CHECK(n.joint_pos[i] == doctest::Approx(njp[i]).epsilon(kTol));
    CHECK(n.joint_vel[i] == doctest::Approx(njv[i]).epsilon(kTol));
  }
  CHECK(n.vel_x == doctest::Approx(0.3534234).epsilon(kTol));
  CHECK(n.vel_y == doctest::Approx(-0.080128008).epsilon(kTol));
  CHECK(n.yaw_rate == doctest::Approx(0.20408987104).epsilon(kTol));
  CHECK(n.pos_x == doctest::Approx(0.3072285803212034).epsilon(kTol));
  CHECK(n.pos_y == doctest::Approx(-0.20052826647949118).epsilon(kTol));
  CHECK(n.heading == doctest::Approx(0.1540817974208).epsilon(kTol));
  CHECK(n.phase() == doctest::Approx(1.1570796326794897).epsilon(kTol));

  CHECK(r.breakdown.tracking_lin == doctest::Approx(1.6119167274255335).epsilon(kTol));
  CHECK(r.breakdown.tracking_ang == doctest::Approx(1.0408031607429706).epsilon(kTol));
  CHECK(r.breakdown.alive == 2.0);
  CHECK(r.breakdown.action_rate == doctest::Approx(-0.0027749999999999997).epsilon(kTol));
  CHECK(r.breakdown.action_smoothness == doctest::Approx(-0.0056500000000000005).epsilon(kTol));
  CHECK(r.breakdown.torque == doctest::Approx(-0.0013749172630200003).epsilon(kTol));
  CHECK(r.breakdown.swing_drive == doctest::Approx(-0.5295800635520002).epsilon(kTol));
  CHECK(r.reward == doctest::Approx(4.113339907353484).epsilon(kTol));
  CHECK(r.breakdown.total() == r.reward);

  // Action history shifts by one step.
  CHECK(n.prev_action == std::vector<double>{0.3, -0.4, 0.2, 0.5, -0.3});
  CHECK(n.prev_action2 == s.prev_action);
  CHECK_FALSE(r.terminated);
}

TEST_CASE("zero state with zero action only advances the gait clock") {
  EnvConfig cfg;
  ToyState s = make_zero_state(cfg);
  StepResult r = step(s, Tensor::vec({0, 0, 0, 0, 0}), cfg);
  CHECK(r.state.pos_x == 0.0);
  CHECK(r.state.pos_y == 0.0);
  CHECK(r.state.vel_x == 0.0);
  CHECK(r.state.vel_y == 0.0);
  CHECK(r.state.yaw_rate == 0.0);
  for (double v : r.state.joint_vel) CHECK(v == 0.0);
  CHECK(r.state.phase() == doctest::Approx(2.0 * M_PI * cfg.dt / cfg.gait_period).epsilon(1e-15));
}

TEST_CASE("reward examples match closed-form values") {
  EnvConfig cfg;
  ToyState s = make_zero_state(cfg);
  Tensor zero = Tensor::vec({0, 0, 0, 0, 0});

  // Zero state, zero command: both tracking terms saturate at 2, alive 2.
  auto [r1, b1] = reward(s, zero, s, cfg);
  CHECK(r1 == doctest::Approx(6.0).epsilon(1e-15));

  // Forward command 0.5 while standing still: squared error equals sigma,
  // so the linear tracking term is exactly 2/e.
  ToyState s2 = s;
  s2.command = {0.5, 0.0, 0.0};
  auto [r2, b2] = reward(s2, zero, s2, cfg);
  CHECK(b2.tracking_lin == doctest::Approx(2.0 / std::exp(1.0)).epsilon(1e-14));
  CHECK(b2.tracking_ang == 2.0);
}

TEST_CASE("command range grows by 0.05 only above 0.8 tracking") {
  CHECK(update_curriculum(0.5, 0.9) == doctest::Approx(0.55));
  CHECK(update_curriculum(0.5, 0.8) == 0.5);
  CHECK(update_curriculum(0.5, 0.2) == 0.5);
  CHECK(update_curriculum(0.98, 0.95) == 1.0);
  CHECK(update_curriculum(1.0, 0.95) == 1.0);
  CHECK_THROWS(update_curriculum(1.5, 0.9));
}

TEST_CASE("both stance gates are zero at the phase boundary") {
  EnvConfig cfg;
  ToyState s = make_zero_state(cfg);
  s.set_phase_parts(0.0, 0);
  CHECK(stance_left_of(s) == 0.0);
  CHECK(stance_right_of(s) == 0.0);
  s.set_phase_parts(0.0, 1);
  CHECK(stance_left_of(s) == 0.0);
  CHECK(stance_right_of(s) == 0.0);
  s.set_phase_parts(1.5, 0);
  CHECK(stance_left_of(s) == 1.0);
  CHECK(stance_right_of(s) == 0.0);
  s.set_phase_parts(1.5, 1);
  CHECK(stance_left_of(s) == 0.0);
  CHECK(stance_right_of(s) == 1.0);
}

TEST_CASE("mirrored transitions and rewards are exactly consistent") {
  EnvConfig cfg;
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> uni(-0.8, 0.8);
  for (int trial = 0; trial < 200; ++trial) {
    ToyState s = verify::random_toy_state(cfg, rng);
    Tensor a({5});
    for (double& v : a.data()) v = uni(rng);
    Tensor am = Tensor::vec(mirror_action_vec(a.data(), 2, 1));

    StepResult r1 = step(s, a, cfg);
    StepResult r2 = step(mirror_state(s, cfg), am, cfg);
    Tensor lhs = pack_state(mirror_state(r1.state, cfg));
    Tensor rhs = pack_state(r2.state);
    for (std::size_t i = 0; i < lhs.size(); ++i)
      CHECK(std::abs(lhs[i] - rhs[i]) < 1e-12);
    CHECK(std::abs(r1.reward - r2.reward) < 1e-12);
    CHECK(std::abs(r1.breakdown.swing_drive - r2.breakdown.swing_drive) < 1e-12);

    // Observation equivariance under the declared transform.
    LayoutProfile p = build_toy_profile(2, 1);
    Tensor o1 = p.f_o().apply(observe(s, cfg));
    Tensor o2 = observe(mirror_state(s, cfg), cfg);
    for (std::size_t i = 0; i < o1.size(); ++i) CHECK(std::abs(o1[i] - o2[i]) < 1e-14);
  }
}

TEST_CASE("mirroring the state twice is the identity") {
  EnvConfig cfg;
  std::mt19937_64 rng(5);
  ToyState s = verify::random_toy_state(cfg, rng);
  Tensor once = pack_state(s);
  Tensor twice = pack_state(mirror_state(mirror_state(s, cfg), cfg));
  for (std::size_t i = 0; i < once.size(); ++i) CHECK(once[i] == twice[i]);
}

TEST_CASE("targets beyond the actuator limit behave like the clamped target") {
  EnvConfig cfg;
  ToyState s = golden_state();
  Tensor big = Tensor::vec({2.0, -3.0, 1.5, 5.0, -2.0});
  Tensor clamped = Tensor::vec({1.0, -1.0, 1.0, 1.0, -1.0});
  StepResult r1 = step(s, big, cfg);
  StepResult r2 = step(s, clamped, cfg);
  for (std::size_t i = 0; i < 5; ++i) {
    CHECK(r1.state.joint_pos[i] == r2.state.joint_pos[i]);
    CHECK(r1.state.joint_vel[i] == r2.state.joint_vel[i]);
  }
  // The action-rate penalty still sees the raw action.
  CHECK(r1.breakdown.action_rate < r2.breakdown.action_rate);
}

TEST_CASE("episode stream is reproducible for a fixed seed") {
  EnvConfig cfg;
  BilateralTracker e1(cfg, 42), e2(cfg, 42);
  Tensor o1 = e1.reset_episode(0.5);
  Tensor o2 = e2.reset_episode(0.5);
  for (std::size_t i = 0; i < o1.size(); ++i) CHECK(o1[i] == o2[i]);
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> uni(-0.5, 0.5);
  for (int t = 0; t < 50; ++t) {
    Tensor a({5});
    for (double& v : a.data()) v = uni(rng);
    StepResult r1 = e1.step_episode(a);
    StepResult r2 = e2.step_episode(a);
    CHECK(r1.reward == r2.reward);
    for (std::size_t i = 0; i < r1.observation.size(); ++i)
      CHECK(r1.observation[i] == r2.observation[i]);
  }
}

TEST_CASE("episodes terminate at the configured step budget") {
  EnvConfig cfg;
  cfg.episode_steps = 3;
  BilateralTracker e(cfg, 1);
  e.reset_episode(0.0);
  Tensor a = Tensor::vec({0, 0, 0, 0, 0});
  CHECK_FALSE(e.step_episode(a).terminated);
  CHECK_FALSE(e.step_episode(a).terminated);
  CHECK(e.step_episode(a).terminated);
}

TEST_CASE("config JSON round-trips and rejects unknown keys") {
  EnvConfig cfg;
  cfg.kp = 17.0;
  cfg.action_limit = 0.7;
  EnvConfig back = EnvConfig::from_json(cfg.to_json());
  CHECK(back.kp == 17.0);
  CHECK(back.action_limit == 0.7);
  CHECK(back.dt == cfg.dt);

  nlohmann::json bad = cfg.to_json();
  bad["kp_gain"] = 3.0;
  CHECK_THROWS(EnvConfig::from_json(bad));
  nlohmann::json neg = cfg.to_json();
  neg["dt"] = -0.01;
  CHECK_THROWS(EnvConfig::from_json(neg));
}

TEST_CASE("drag zones select the matching terrain strip") {
  std::array<double, 3> terrain{1.1, 0.9, 1.3};
  CHECK(drag_multiplier(0.7, terrain, 0.5) == 1.1);
  CHECK(drag_multiplier(0.0, terrain, 0.5) == 0.9);
  CHECK(drag_multiplier(-0.7, terrain, 0.5) == 1.3);
  CHECK(drag_multiplier(0.5, terrain, 0.5) == 0.9);
}
