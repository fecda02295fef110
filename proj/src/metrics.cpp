#include "symmeq/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace symmeq::metrics {

namespace {

constexpr double kTwoPi = 2.0 * M_PI;

void require_nonempty(const Trajectory& traj, const char* who) {
  if (traj.steps.empty()) throw std::invalid_argument(std::string(who) + ": empty trajectory");
}

// Ideal pose integrated from the recorded commands, matched at the start.
struct IdealPose {
  double x, y, psi;
};

std::vector<IdealPose> ideal_poses(const Trajectory& traj) {
  std::vector<IdealPose> out(traj.steps.size());
  IdealPose p{traj.steps.front().pos_x, traj.steps.front().pos_y, traj.steps.front().heading};
  for (std::size_t t = 0; t < traj.steps.size(); ++t) {
    out[t] = p;
    const auto& c = traj.steps[t].command;
    double cs = std::cos(p.psi), sn = std::sin(p.psi);
    p.x += (cs * c[0] - sn * c[1]) * traj.dt;
    p.y += (sn * c[0] + cs * c[1]) * traj.dt;
    p.psi += c[2] * traj.dt;
  }
  return out;
}

}  // namespace

double wrap_angle(double a) {
  double w = std::fmod(a, kTwoPi);
  if (w <= -M_PI) w += kTwoPi;
  if (w > M_PI) w -= kTwoPi;
  return w;
}

double te_v(const Trajectory& traj) {
  require_nonempty(traj, "te_v");
  double acc = 0.0;
  for (const auto& s : traj.steps) {
    double ex = s.vel_x - s.command[0];
    double ey = s.vel_y - s.command[1];
    double ew = s.yaw_rate - s.command[2];
    acc += std::sqrt(ex * ex + ey * ey + ew * ew);
  }
  return acc / static_cast<double>(traj.steps.size());
}

Curve te_p(const Trajectory& traj) {
  require_nonempty(traj, "te_p");
  std::vector<IdealPose> ideal = ideal_poses(traj);
  Curve out;
  out.per_step.resize(traj.steps.size());
  for (std::size_t t = 0; t < traj.steps.size(); ++t) {
    double dx = traj.steps[t].pos_x - ideal[t].x;
    double dy = traj.steps[t].pos_y - ideal[t].y;
    out.per_step[t] = std::sqrt(dx * dx + dy * dy);
    out.mean += out.per_step[t];
  }
  out.mean /= static_cast<double>(out.per_step.size());
  return out;
}

Curve te_o(const Trajectory& traj) {
  require_nonempty(traj, "te_o");
  std::vector<IdealPose> ideal = ideal_poses(traj);
  Curve out;
  out.per_step.resize(traj.steps.size());
  for (std::size_t t = 0; t < traj.steps.size(); ++t) {
    out.per_step[t] = std::abs(wrap_angle(traj.steps[t].heading - ideal[t].psi));
    out.mean += out.per_step[t];
  }
  out.mean /= static_cast<double>(out.per_step.size());
  return out;
}

double temp_s_actions(const std::vector<std::vector<double>>& actions,
                      const SignedPermutation& f_a, std::size_t period_steps) {
  if (period_steps == 0 || period_steps % 2 != 0)
    throw std::invalid_argument("temp_s: period must be a positive even step count");
  std::size_t half = period_steps / 2;
  if (actions.size() <= half)
    throw std::invalid_argument("temp_s: trajectory shorter than half a period");
  double acc = 0.0;
  std::size_t count = 0;
  for (std::size_t t = 0; t + half < actions.size(); ++t) {
    std::vector<double> mirrored = f_a.apply(actions[t + half]);
    double sq = 0.0;
    for (std::size_t i = 0; i < mirrored.size(); ++i) {
      double d = actions[t][i] - mirrored[i];
      sq += d * d;
    }
    acc += std::sqrt(sq);
    ++count;
  }
  return acc / static_cast<double>(count);
}

double temp_s(const Trajectory& traj, const SignedPermutation& f_a, std::size_t period_steps) {
  std::vector<std::vector<double>> actions;
  actions.reserve(traj.steps.size());
  for (const auto& s : traj.steps) actions.push_back(s.action);
  return temp_s_actions(actions, f_a, period_steps);
}

double spat_s(const Actor& actor, const Tensor& histories) {
  if (histories.rank() != 2 || histories.cols() != actor.input_width())
    throw std::invalid_argument("spat_s: history batch has wrong width");
  SignedPermutation hist_rep = repeat_rep(actor.f_o(), actor.history_len() + 1);
  std::size_t n = histories.rows(), w = histories.cols();

  Tensor mirrored = Tensor::matrix(n, w);
  std::vector<bool> fixed(n, true);
  std::vector<double> row(w);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t j = 0; j < w; ++j) row[j] = histories.at(r, j);
    std::vector<double> mrow = hist_rep.apply(row);
    for (std::size_t j = 0; j < w; ++j) {
      mirrored.at(r, j) = mrow[j];
      if (std::abs(mrow[j] - row[j]) > 1e-12) fixed[r] = false;
    }
  }

  Tensor mu = actor.mean_action(histories);
  Tensor mu_m = actor.mean_action(mirrored);
  const SignedPermutation& f_a = actor.f_a();
  double acc = 0.0;
  std::size_t count = 0;
  for (std::size_t r = 0; r < n; ++r) {
    if (fixed[r]) continue;
    double sq = 0.0;
    for (std::size_t i = 0; i < mu.cols(); ++i) {
      double d = mu.at(r, i) - f_a.sign_of(i) * mu_m.at(r, f_a.target_of(i));
      sq += d * d;
    }
    // d above is mu - F_a(mu_m) read through the involution: F_a(y)[j] with
    // j = target(i) equals sign(i) * y[i].
    acc += std::sqrt(sq);
    ++count;
  }
  if (count == 0) throw std::invalid_argument("spat_s: all histories are mirror-fixed");
  return acc / static_cast<double>(count);
}

Trajectory mirror_trajectory(const Trajectory& traj, const SignedPermutation& f_a) {
  Trajectory out = traj;
  for (auto& s : out.steps) {
    s.vel_y = -s.vel_y;
    s.yaw_rate = -s.yaw_rate;
    s.pos_y = -s.pos_y;
    s.heading = -s.heading;
    s.command[1] = -s.command[1];
    s.command[2] = -s.command[2];
    s.action = f_a.apply(s.action);
    s.phase = s.phase < M_PI ? s.phase + M_PI : s.phase - M_PI;
  }
  return out;
}

Trajectory rollout_trajectory(const Actor& actor, const env::EnvConfig& cfg, env::ToyState s0,
                              std::size_t steps, Tensor* histories_out,
                              std::vector<env::ToyState>* states_out) {
  std::size_t obs_dim = actor.obs_dim();
  std::size_t width = actor.input_width();
  if (obs_dim != 6 + 3 * cfg.action_dim() + 2)
    throw std::invalid_argument("rollout_trajectory: actor/env observation size mismatch");

  if (histories_out) *histories_out = Tensor::matrix(steps, width);
  Trajectory traj;
  traj.dt = cfg.dt;

  std::vector<double> hist(width, 0.0);
  Tensor obs = env::observe(s0, cfg);
  std::copy(obs.data().begin(), obs.data().end(), hist.end() - obs_dim);

  env::ToyState s = s0;
  for (std::size_t t = 0; t < steps; ++t) {
    if (states_out) states_out->push_back(s);
    if (histories_out)
      for (std::size_t j = 0; j < width; ++j) histories_out->at(t, j) = hist[j];

    Tensor a = actor.mean_action_vec(Tensor::vec(hist));

    TrajectoryStep rec;
    rec.vel_x = s.vel_x;
    rec.vel_y = s.vel_y;
    rec.yaw_rate = s.yaw_rate;
    rec.pos_x = s.pos_x;
    rec.pos_y = s.pos_y;
    rec.heading = s.heading;
    rec.command = s.command;
    rec.action = a.data();
    rec.phase = s.phase();
    traj.steps.push_back(std::move(rec));

    env::StepResult result = env::step(s, a, cfg);
    if (result.terminated && !result.diagnostic.empty()) break;
    s = result.state;
    std::copy(hist.begin() + obs_dim, hist.end(), hist.begin());
    std::copy(result.observation.data().begin(), result.observation.data().end(),
              hist.end() - obs_dim);
  }
  return traj;
}

double mirror_rollout_error(const Actor& actor, const env::EnvConfig& cfg, std::uint64_t seed,
                            std::size_t steps) {
  std::mt19937_64 rng(seed);
  env::ToyState s0 = env::reset(cfg, rng, 1.0);
  env::ToyState s0m = env::mirror_state(s0, cfg);

  std::vector<env::ToyState> states_a, states_b;
  rollout_trajectory(actor, cfg, s0, steps, nullptr, &states_a);
  rollout_trajectory(actor, cfg, s0m, steps, nullptr, &states_b);
  if (states_a.size() != states_b.size())
    throw std::runtime_error("mirror_rollout_error: trajectories diverged in length");

  double worst = 0.0;
  for (std::size_t t = 0; t < states_a.size(); ++t) {
    Tensor mirrored = env::pack_state(env::mirror_state(states_a[t], cfg));
    Tensor other = env::pack_state(states_b[t]);
    for (std::size_t i = 0; i < mirrored.size(); ++i)
      worst = std::max(worst, std::abs(mirrored[i] - other[i]));
  }
  return worst;
}

MetricStat stat_of(const std::vector<double>& values) {
  MetricStat s;
  if (values.empty()) return s;
  for (double v : values) s.mean += v;
  s.mean /= static_cast<double>(values.size());
  for (double v : values) s.stddev += (v - s.mean) * (v - s.mean);
  s.stddev = std::sqrt(s.stddev / static_cast<double>(values.size()));
  return s;
}

nlohmann::json MetricsReport::to_json() const {
  auto stat = [](const MetricStat& s) {
    return nlohmann::json{{"mean", s.mean}, {"stddev", s.stddev}};
  };
  return nlohmann::json{{"episodes", episodes}, {"te_v", stat(te_v)},     {"te_p", stat(te_p)},
                        {"te_o", stat(te_o)},   {"temp_s", stat(temp_s)}, {"spat_s", stat(spat_s)}};
}

std::string MetricsReport::to_csv() const {
  std::ostringstream out;
  out << "metric,mean,stddev\n";
  auto row = [&](const char* name, const MetricStat& s) {
    out << name << ',' << s.mean << ',' << s.stddev << '\n';
  };
  row("te_v", te_v);
  row("te_p", te_p);
  row("te_o", te_o);
  row("temp_s", temp_s);
  row("spat_s", spat_s);
  return out.str();
}

MetricsReport evaluate_policy(const Actor& actor, const env::EnvConfig& cfg,
                              std::size_t episodes, std::size_t steps_per_episode,
                              std::uint64_t seed, double command_level) {
  if (episodes == 0 || steps_per_episode == 0)
    throw std::invalid_argument("evaluate_policy: episodes and steps must be positive");
  std::size_t obs_dim = actor.obs_dim();
  std::size_t width = actor.input_width();
  std::size_t period = static_cast<std::size_t>(std::lround(cfg.gait_period / cfg.dt));

  env::BilateralTracker tracker(cfg, seed);
  std::vector<double> v_tev, v_tep, v_teo, v_temps, v_spats;

  for (std::size_t ep = 0; ep < episodes; ++ep) {
    Tensor obs = tracker.reset_episode(command_level);
    std::vector<double> hist(width, 0.0);
    std::copy(obs.data().begin(), obs.data().end(), hist.end() - obs_dim);

    Trajectory traj;
    traj.dt = cfg.dt;
    Tensor histories = Tensor::matrix(steps_per_episode, width);
    std::size_t recorded = 0;

    for (std::size_t t = 0; t < steps_per_episode; ++t) {
      const env::ToyState& s = tracker.state();
      Tensor a = actor.mean_action_vec(Tensor::vec(hist));

      TrajectoryStep rec;
      rec.vel_x = s.vel_x;
      rec.vel_y = s.vel_y;
      rec.yaw_rate = s.yaw_rate;
      rec.pos_x = s.pos_x;
      rec.pos_y = s.pos_y;
      rec.heading = s.heading;
      rec.command = s.command;
      rec.action = a.data();
      rec.phase = s.phase();
      traj.steps.push_back(std::move(rec));
      for (std::size_t j = 0; j < width; ++j) histories.at(recorded, j) = hist[j];
      ++recorded;

      env::StepResult result = tracker.step_episode(a);
      if (result.terminated) break;
      std::copy(hist.begin() + obs_dim, hist.end(), hist.begin());
      std::copy(result.observation.data().begin(), result.observation.data().end(),
                hist.end() - obs_dim);
    }

    Tensor used = Tensor::matrix(recorded, width);
    for (std::size_t r = 0; r < recorded; ++r)
      for (std::size_t j = 0; j < width; ++j) used.at(r, j) = histories.at(r, j);

    v_tev.push_back(te_v(traj));
    v_tep.push_back(te_p(traj).mean);
    v_teo.push_back(te_o(traj).mean);
    if (traj.steps.size() > period / 2) v_temps.push_back(temp_s(traj, actor.f_a(), period));
    v_spats.push_back(spat_s(actor, used));
  }

  MetricsReport report;
  report.episodes = episodes;
  report.te_v = stat_of(v_tev);
  report.te_p = stat_of(v_tep);
  report.te_o = stat_of(v_teo);
  report.temp_s = stat_of(v_temps);
  report.spat_s = stat_of(v_spats);
  return report;
}

std::vector<DirectionRun> eight_direction_runs(const Actor& actor, const env::EnvConfig& cfg,
                                               std::size_t steps, double speed) {
  const double d = speed;
  std::vector<std::array<double, 3>> commands = {{d, 0, 0},  {-d, 0, 0}, {0, d, 0},  {0, -d, 0},
                                                 {d, d, 0},  {d, -d, 0}, {-d, d, 0}, {-d, -d, 0}};
  std::vector<DirectionRun> runs;
  for (const auto& c : commands) {
    env::ToyState s0 = env::make_zero_state(cfg);
    s0.command = c;
    DirectionRun run;
    run.command = c;
    run.traj = rollout_trajectory(actor, cfg, s0, steps);
    run.pos_err = te_p(run.traj);
    run.heading_err = te_o(run.traj);
    runs.push_back(std::move(run));
  }
  return runs;
}

std::string trajectory_csv(const Trajectory& traj) {
  std::ostringstream out;
  std::size_t adim = traj.steps.empty() ? 0 : traj.steps.front().action.size();
  out << "step,time,vel_x,vel_y,yaw_rate,pos_x,pos_y,heading,cmd_x,cmd_y,cmd_yaw,phase";
  for (std::size_t i = 0; i < adim; ++i) out << ",action_" << i;
  out << '\n';
  for (std::size_t t = 0; t < traj.steps.size(); ++t) {
    const auto& s = traj.steps[t];
    out << t << ',' << static_cast<double>(t) * traj.dt << ',' << s.vel_x << ',' << s.vel_y << ','
        << s.yaw_rate << ',' << s.pos_x << ',' << s.pos_y << ',' << s.heading << ','
        << s.command[0] << ',' << s.command[1] << ',' << s.command[2] << ',' << s.phase;
    for (double a : s.action) out << ',' << a;
    out << '\n';
  }
  return out.str();
}

namespace {

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                          "#9467bd", "#8c564b", "#17becf", "#7f7f7f"};

struct Bounds {
  double lo = 0.0, hi = 1.0;
  void include(double v) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  double span() const { return hi - lo > 1e-12 ? hi - lo : 1.0; }
};

}  // namespace

std::string line_chart_svg(const std::vector<std::vector<double>>& series,
                           const std::vector<std::string>& labels, const std::string& title,
                           double dt) {
  const double width = 640, height = 400, margin = 50;
  Bounds yb;
  std::size_t longest = 1;
  for (const auto& s : series) {
    longest = std::max(longest, s.size());
    for (double v : s) yb.include(v);
  }
  std::ostringstream out;
  out << "<svg xmlns='http://www.w3.org/2000/svg' width='" << width << "' height='" << height
      << "'>\n<rect width='100%' height='100%' fill='white'/>\n";
  out << "<text x='" << width / 2 << "' y='20' text-anchor='middle' font-size='14'>" << title
      << "</text>\n";
  out << "<line x1='" << margin << "' y1='" << height - margin << "' x2='" << width - margin
      << "' y2='" << height - margin << "' stroke='black'/>\n";
  out << "<line x1='" << margin << "' y1='" << margin << "' x2='" << margin << "' y2='"
      << height - margin << "' stroke='black'/>\n";
  out << "<text x='10' y='" << margin << "' font-size='10'>" << yb.hi << "</text>\n";
  out << "<text x='10' y='" << height - margin << "' font-size='10'>" << yb.lo << "</text>\n";
  out << "<text x='" << width - margin << "' y='" << height - margin + 20 << "' font-size='10'>"
      << static_cast<double>(longest - 1) * dt << "s</text>\n";
  for (std::size_t si = 0; si < series.size(); ++si) {
    const auto& s = series[si];
    if (s.empty()) continue;
    out << "<polyline fill='none' stroke='" << kPalette[si % 8] << "' stroke-width='1.5' points='";
    for (std::size_t t = 0; t < s.size(); ++t) {
      double x = margin + (width - 2 * margin) * static_cast<double>(t) /
                              static_cast<double>(std::max<std::size_t>(longest - 1, 1));
      double y = height - margin - (height - 2 * margin) * (s[t] - yb.lo) / yb.span();
      out << x << ',' << y << ' ';
    }
    out << "'/>\n";
    if (si < labels.size())
      out << "<text x='" << width - margin + 2 << "' y='" << margin + 14.0 * si
          << "' font-size='10' fill='" << kPalette[si % 8] << "'>" << labels[si] << "</text>\n";
  }
  out << "</svg>\n";
  return out.str();
}

std::string path_overlay_svg(const std::vector<DirectionRun>& runs, const std::string& title) {
  const double width = 560, height = 560, margin = 50;
  Bounds xb, yb;
  for (const auto& run : runs)
    for (const auto& s : run.traj.steps) {
      xb.include(s.pos_x);
      yb.include(s.pos_y);
    }
  double span = std::max(xb.span(), yb.span());
  auto px = [&](double x) { return margin + (width - 2 * margin) * (x - xb.lo) / span; };
  auto py = [&](double y) { return height - margin - (height - 2 * margin) * (y - yb.lo) / span; };

  std::ostringstream out;
  out << "<svg xmlns='http://www.w3.org/2000/svg' width='" << width << "' height='" << height
      << "'>\n<rect width='100%' height='100%' fill='white'/>\n";
  out << "<text x='" << width / 2 << "' y='20' text-anchor='middle' font-size='14'>" << title
      << "</text>\n";
  for (std::size_t ri = 0; ri < runs.size(); ++ri) {
    const auto& run = runs[ri];
    if (run.traj.steps.empty()) continue;
    // Ideal path, integrated from the command.
    out << "<polyline fill='none' stroke='#aaaaaa' stroke-dasharray='4 3' points='";
    double ix = run.traj.steps.front().pos_x, iy = run.traj.steps.front().pos_y;
    double ipsi = run.traj.steps.front().heading;
    for (const auto& s : run.traj.steps) {
      out << px(ix) << ',' << py(iy) << ' ';
      double cs = std::cos(ipsi), sn = std::sin(ipsi);
      ix += (cs * s.command[0] - sn * s.command[1]) * run.traj.dt;
      iy += (sn * s.command[0] + cs * s.command[1]) * run.traj.dt;
      ipsi += s.command[2] * run.traj.dt;
    }
    out << "'/>\n";
    out << "<polyline fill='none' stroke='" << kPalette[ri % 8] << "' stroke-width='1.5' points='";
    for (const auto& s : run.traj.steps) out << px(s.pos_x) << ',' << py(s.pos_y) << ' ';
    out << "'/>\n";
  }
  out << "</svg>\n";
  return out.str();
}

}  // namespace symmeq::metrics
