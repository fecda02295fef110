#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "symmeq/metrics.hpp"
#include "symmeq/verify.hpp"

using namespace symmeq;
using namespace symmeq::metrics;

namespace {

Trajectory constant_traj(std::size_t steps, double vx, double vy, double wz,
                         std::array<double, 3> cmd) {
  Trajectory t;
  t.dt = 0.02;
  for (std::size_t i = 0; i < steps; ++i) {
    TrajectoryStep s;
    s.vel_x = vx;
    s.vel_y = vy;
    s.yaw_rate = wz;
    s.command = cmd;
    s.action = {0, 0, 0, 0, 0};
    t.steps.push_back(s);
  }
  return t;
}

Actor make_actor(bool equivariant, std::uint64_t seed) {
  LayoutProfile p = build_toy_profile(2, 1);
  ActorConfig cfg;
  cfg.encoder_widths = {8};
  cfg.policy_widths = {8};
  cfg.equivariant = equivariant;
  std::mt19937_64 rng(seed);
  return Actor(p, cfg, rng);
}

}  // namespace

TEST_CASE("angle wrapping lands in the half-open interval") {
  CHECK(wrap_angle(0.0) == 0.0);
  CHECK(wrap_angle(M_PI) == doctest::Approx(M_PI));
  CHECK(wrap_angle(-M_PI) == doctest::Approx(M_PI));
  CHECK(wrap_angle(3.0 * M_PI) == doctest::Approx(M_PI));
  CHECK(wrap_angle(2.0 * M_PI + 0.1) == doctest::Approx(0.1));
  CHECK(wrap_angle(-0.1) == doctest::Approx(-0.1));
}

TEST_CASE("velocity tracking error on constant trajectories") {
  // Perfect tracking.
  CHECK(te_v(constant_traj(10, 0.5, 0.0, 0.0, {0.5, 0.0, 0.0})) == doctest::Approx(0.0));
  // Constant offset of 0.1 in x.
  CHECK(te_v(constant_traj(10, 0.4, 0.0, 0.0, {0.5, 0.0, 0.0})) == doctest::Approx(0.1));
  // 3-4-5 offset.
  CHECK(te_v(constant_traj(10, 0.3, 0.4, 0.0, {0.0, 0.0, 0.0})) == doctest::Approx(0.5));
}

TEST_CASE("position error of a stationary agent under a forward command") {
  // Command (1, 0, 0) while standing still at the origin: the ideal pose is
  // matched to the recorded pose at step 0 and then advances 1 * dt per step,
  // so the error at step t is t * dt.
  Trajectory t = constant_traj(5, 0.0, 0.0, 0.0, {1.0, 0.0, 0.0});
  Curve c = te_p(t);
  REQUIRE(c.per_step.size() == 5);
  for (std::size_t i = 0; i < 5; ++i)
    CHECK(c.per_step[i] == doctest::Approx(i * t.dt).epsilon(1e-12));
}

TEST_CASE("heading error wraps across the branch cut") {
  // Ideal heading starts matched at 3.1 and stays there (zero yaw command);
  // a recorded jump to -3.1 is only 2*pi - 6.2 away after wrapping.
  Trajectory t = constant_traj(2, 0.0, 0.0, 0.0, {0.0, 0.0, 0.0});
  t.steps[0].heading = 3.1;
  t.steps[1].heading = -3.1;
  Curve c = te_o(t);
  CHECK(c.per_step[0] == doctest::Approx(0.0));
  CHECK(std::abs(c.per_step[1]) == doctest::Approx(2.0 * M_PI - 6.2));
}

TEST_CASE("temporal symmetry score of an alternating gait is zero") {
  LayoutProfile p = build_toy_profile(2, 1);
  std::vector<std::vector<double>> actions;
  std::vector<double> a = {0.3, -0.2, 0.1, 0.4, 0.25};
  std::vector<double> am = env::mirror_action_vec(a, 2, 1);
  // Period 4 steps: a, a, F_a(a), F_a(a), ... exactly half-period symmetric.
  for (int cycle = 0; cycle < 5; ++cycle) {
    actions.push_back(a);
    actions.push_back(a);
    actions.push_back(am);
    actions.push_back(am);
  }
  CHECK(temp_s_actions(actions, p.f_a(), 4) == doctest::Approx(0.0));

  // A one-sided gait (always the same action) scores ||a - F_a(a)||.
  std::vector<std::vector<double>> onesided(20, a);
  double expect = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) expect += (a[i] - am[i]) * (a[i] - am[i]);
  CHECK(temp_s_actions(onesided, p.f_a(), 4) == doctest::Approx(std::sqrt(expect)));

  CHECK_THROWS(temp_s_actions(actions, p.f_a(), 3));  // odd period
  CHECK_THROWS(temp_s_actions({a, a}, p.f_a(), 40));  // too short
}

TEST_CASE("spatial symmetry score separates constrained from free policies") {
  Actor se = make_actor(true, 1);
  Actor vanilla = make_actor(false, 1);
  std::mt19937_64 rng(2);
  Tensor hist({32, se.input_width()});
  std::uniform_real_distribution<double> uni(-1.0, 1.0);
  for (double& v : hist.data()) v = uni(rng);
  CHECK(spat_s(se, hist) < 1e-12);
  CHECK(spat_s(vanilla, hist) > 1e-3);
}

TEST_CASE("metrics are invariant under trajectory mirroring") {
  LayoutProfile p = build_toy_profile(2, 1);
  Actor actor = make_actor(false, 7);
  env::EnvConfig cfg;
  cfg.enable_obs_noise = false;
  cfg.enable_randomization = false;
  std::mt19937_64 rng(3);
  env::ToyState s0 = verify::random_toy_state(cfg, rng);
  s0.draw = env::DynamicsDraw{};
  Trajectory traj = rollout_trajectory(actor, cfg, s0, 60);
  REQUIRE(traj.steps.size() == 60);
  Trajectory mirrored = mirror_trajectory(traj, p.f_a());

  CHECK(te_v(mirrored) == doctest::Approx(te_v(traj)).epsilon(1e-10));
  CHECK(te_p(mirrored).mean == doctest::Approx(te_p(traj).mean).epsilon(1e-10));
  CHECK(te_o(mirrored).mean == doctest::Approx(te_o(traj).mean).epsilon(1e-10));
  CHECK(temp_s(mirrored, p.f_a(), 40) == doctest::Approx(temp_s(traj, p.f_a(), 40)).epsilon(1e-10));
}

TEST_CASE("mirror rollout error is tiny for constrained policies only") {
  Actor se = make_actor(true, 11);
  Actor vanilla = make_actor(false, 11);
  env::EnvConfig cfg;
  cfg.enable_obs_noise = false;
  double e_se = mirror_rollout_error(se, cfg, 5, 100);
  double e_v = mirror_rollout_error(vanilla, cfg, 5, 100);
  CHECK(e_se < 1e-6);
  CHECK(e_v > 1e-3);
}

TEST_CASE("policy evaluation aggregates finite statistics deterministically") {
  Actor actor = make_actor(true, 13);
  env::EnvConfig cfg;
  cfg.enable_obs_noise = false;
  MetricsReport r1 = evaluate_policy(actor, cfg, 3, 80, 17, 0.5);
  MetricsReport r2 = evaluate_policy(actor, cfg, 3, 80, 17, 0.5);
  CHECK(r1.episodes == 3);
  CHECK(r1.te_v.mean == r2.te_v.mean);
  CHECK(r1.spat_s.mean == r2.spat_s.mean);
  CHECK(std::isfinite(r1.te_p.mean));
  CHECK(std::isfinite(r1.temp_s.stddev));
  CHECK(r1.spat_s.mean < 1e-10);

  nlohmann::json j = r1.to_json();
  CHECK(j.contains("te_v"));
  std::string csv = r1.to_csv();
  CHECK(csv.find("te_v") != std::string::npos);
}

TEST_CASE("statistics helper computes mean and spread") {
  MetricStat s = stat_of({1.0, 2.0, 3.0, 4.0});
  CHECK(s.mean == doctest::Approx(2.5));
  CHECK(s.stddev == doctest::Approx(std::sqrt(5.0 / 4.0)));
  MetricStat single = stat_of({2.0});
  CHECK(single.mean == 2.0);
  CHECK(single.stddev == 0.0);
}

TEST_CASE("direction probe covers eight commands and renders plots") {
  Actor actor = make_actor(true, 17);
  env::EnvConfig cfg;
  cfg.enable_obs_noise = false;
  cfg.enable_randomization = false;
  auto runs = eight_direction_runs(actor, cfg, 40, 0.5);
  REQUIRE(runs.size() == 8);
  for (const auto& run : runs) {
    CHECK(run.traj.steps.size() == 40);
    CHECK(run.command[2] == 0.0);
    CHECK(run.pos_err.per_step.size() == 40);
  }
  // Commands are pairwise distinct.
  for (std::size_t i = 0; i < 8; ++i)
    for (std::size_t j = i + 1; j < 8; ++j)
      CHECK((runs[i].command[0] != runs[j].command[0] ||
             runs[i].command[1] != runs[j].command[1]));

  std::string svg = path_overlay_svg(runs, "paths");
  CHECK(svg.find("<svg") != std::string::npos);
  CHECK(svg.find("</svg>") != std::string::npos);

  std::string chart = line_chart_svg({{0.0, 0.5, 1.0}, {1.0, 0.5, 0.0}}, {"a", "b"}, "test", 0.02);
  CHECK(chart.find("<svg") != std::string::npos);

  std::string csv = trajectory_csv(runs[0].traj);
  CHECK(csv.find('\n') != std::string::npos);
  CHECK(std::count(csv.begin(), csv.end(), '\n') >= 40);
}

TEST_CASE("recorded histories feed the policy that generated the rollout") {
  Actor actor = make_actor(true, 19);
  env::EnvConfig cfg;
  cfg.enable_obs_noise = false;
  cfg.enable_randomization = false;
  env::ToyState s0 = env::make_zero_state(cfg);
  s0.command = {0.4, 0.0, 0.1};
  Tensor histories;
  std::vector<env::ToyState> states;
  Trajectory traj = rollout_trajectory(actor, cfg, s0, 30, &histories, &states);
  REQUIRE(histories.rows() == 30);
  REQUIRE(states.size() == 30);
  CHECK(histories.cols() == actor.input_width());
  // The recorded action at step t is the mean action of the recorded history.
  for (std::size_t t = 0; t < 30; ++t) {
    Tensor h({actor.input_width()});
    for (std::size_t i = 0; i < h.size(); ++i) h[i] = histories.at(t, i);
    Tensor a = actor.mean_action_vec(h);
    for (std::size_t i = 0; i < a.size(); ++i)
      CHECK(a[i] == doctest::Approx(traj.steps[t].action[i]).epsilon(1e-12));
  }
}
