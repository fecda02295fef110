#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "symmeq/env.hpp"
#include "symmeq/eqnn.hpp"
#include "symmeq/signed_perm.hpp"
#include "symmeq/tensor.hpp"

namespace symmeq::metrics {

struct TrajectoryStep {
  double vel_x = 0.0, vel_y = 0.0, yaw_rate = 0.0;  // body frame
  double pos_x = 0.0, pos_y = 0.0, heading = 0.0;   // world frame
  std::array<double, 3> command{0.0, 0.0, 0.0};
  std::vector<double> action;
  double phase = 0.0;
};

struct Trajectory {
  double dt = 0.02;
  std::vector<TrajectoryStep> steps;
};

// Wraps an angle to (-pi, pi].
double wrap_angle(double a);

// Mean over steps of the Euclidean norm of the body-velocity tracking error.
double te_v(const Trajectory& traj);

struct Curve {
  std::vector<double> per_step;
  double mean = 0.0;
};

// Planar distance to the ideal pose integrated from the commands:
// psi*_{t+1} = psi*_t + c_w dt, p*_{t+1} = p*_t + R(psi*_t) (c_x, c_y) dt.
Curve te_p(const Trajectory& traj);

// Wrapped heading error against the same ideal-pose integrator.
Curve te_o(const Trajectory& traj);

// Mean over valid t of ||a_t - F_a(a_{t + period/2})||.
double temp_s(const Trajectory& traj, const SignedPermutation& f_a, std::size_t period_steps);
double temp_s_actions(const std::vector<std::vector<double>>& actions,
                      const SignedPermutation& f_a, std::size_t period_steps);

// Mean over rows of ||pi(o) - F_a(pi(F_o(o)))|| on deterministic means.
// Rows fixed by the history mirror are skipped (degenerate contributions).
double spat_s(const Actor& actor, const Tensor& histories);

// Mirror of a recorded trajectory: flips the lateral/yaw quantities and
// applies F_a to the actions. Used by the metric invariance properties.
Trajectory mirror_trajectory(const Trajectory& traj, const SignedPermutation& f_a);

// Deterministic noise-free rollout from a given state using mean actions and
// a zero-padded history window. Records the trajectory and, optionally, every
// history row presented to the policy.
Trajectory rollout_trajectory(const Actor& actor, const env::EnvConfig& cfg, env::ToyState s0,
                              std::size_t steps, Tensor* histories_out = nullptr,
                              std::vector<env::ToyState>* states_out = nullptr);

// Rolls out from s0 and from mirror_state(s0); returns the maximum
// componentwise deviation between the second trajectory and the mirror of the
// first, over the packed states of all steps.
double mirror_rollout_error(const Actor& actor, const env::EnvConfig& cfg, std::uint64_t seed,
                            std::size_t steps = 200);

struct MetricStat {
  double mean = 0.0;
  double stddev = 0.0;
};

MetricStat stat_of(const std::vector<double>& values);

struct MetricsReport {
  MetricStat te_v, te_p, te_o, temp_s, spat_s;
  std::size_t episodes = 0;

  nlohmann::json to_json() const;
  std::string to_csv() const;
};

// Random-command evaluation: per-episode metrics aggregated to mean/stddev.
// Episodes use the passed env config as-is (caller controls noise flags).
MetricsReport evaluate_policy(const Actor& actor, const env::EnvConfig& cfg,
                              std::size_t episodes, std::size_t steps_per_episode,
                              std::uint64_t seed, double command_level = 1.0);

struct DirectionRun {
  std::array<double, 3> command{0.0, 0.0, 0.0};
  Trajectory traj;
  Curve pos_err, heading_err;
};

// Fixed-command probe set: (±v, 0), (0, ±v), (±v, ±v), zero yaw command.
std::vector<DirectionRun> eight_direction_runs(const Actor& actor, const env::EnvConfig& cfg,
                                               std::size_t steps, double speed = 0.5);

std::string trajectory_csv(const Trajectory& traj);

// Minimal SVG emitters: series-vs-time chart and world-frame path overlay
// (ideal paths dashed, actual solid).
std::string line_chart_svg(const std::vector<std::vector<double>>& series,
                           const std::vector<std::string>& labels, const std::string& title,
                           double dt);
std::string path_overlay_svg(const std::vector<DirectionRun>& runs, const std::string& title);

}  // namespace symmeq::metrics
