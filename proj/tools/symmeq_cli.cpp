#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "symmeq/env.hpp"
#include "symmeq/eqnn.hpp"
#include "symmeq/layout.hpp"
#include "symmeq/metrics.hpp"
#include "symmeq/rl.hpp"
#include "symmeq/verify.hpp"

namespace {

using nlohmann::json;
namespace fs = std::filesystem;
using namespace symmeq;

constexpr int kExitOk = 0;
constexpr int kExitPropertyFailure = 1;
constexpr int kExitUsage = 2;

// FNV-1a over the canonical config dump; identifies a run configuration.
std::string config_hash(const json& j) {
  std::string s = j.dump();
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string resolve_out(const std::string& out) {
  const char* root = std::getenv("SYMMEQ_OUT");
  if (root && *root && !out.empty() && out.front() != '/')
    return std::string(root) + "/" + out;
  if (root && *root && out.empty()) return root;
  return out;
}

struct CommonArgs {
  std::string config, out, profile = "toy", preset;
  std::vector<std::uint64_t> seeds;
  std::uint64_t seed = 0;
  bool seed_set = false;
  std::string variant;
  std::size_t episodes = 64, iterations = 0, workers = 1;
  bool deterministic = false;
};

int run_train(const CommonArgs& args) {
  rl::TrainConfig cfg;
  if (!args.config.empty()) cfg = rl::TrainConfig::from_json(rl::read_json_file(args.config));
  if (!args.variant.empty()) cfg.variant.variant = rl::variant_from_name(args.variant);
  if (args.iterations > 0) cfg.iterations = args.iterations;
  cfg.workers = args.workers;
  if (args.deterministic) cfg.deterministic = true;
  std::string out_root = resolve_out(args.out.empty() ? cfg.out_dir : args.out);
  if (out_root.empty()) {
    std::cerr << "train: an output directory is required (--out or SYMMEQ_OUT)\n";
    return kExitUsage;
  }

  std::vector<std::uint64_t> seeds = args.seeds;
  if (seeds.empty()) seeds.push_back(args.seed_set ? args.seed : cfg.seed);

  for (std::uint64_t seed : seeds) {
    rl::TrainConfig run_cfg = cfg;
    run_cfg.seed = seed;
    run_cfg.out_dir =
        seeds.size() > 1 ? out_root + "/seed" + std::to_string(seed) : out_root;
    json cfg_json = run_cfg.to_json();

    rl::TrainResult result = rl::train(run_cfg);

    json manifest{{"command", "train"},
                  {"variant", rl::variant_name(run_cfg.variant.variant)},
                  {"seed", seed},
                  {"config_hash", config_hash(cfg_json)},
                  {"config", cfg_json},
                  {"wall_seconds", result.wall_seconds},
                  {"iterations", run_cfg.iterations},
                  {"checkpoint", result.checkpoint_path},
                  {"metrics_csv", result.csv_path}};
    if (!result.history.empty()) {
      const auto& last = result.history.back();
      manifest["final"] = {{"mean_return", last.mean_return},
                           {"tracking_ratio", last.tracking_ratio},
                           {"spat_s", last.spat_s},
                           {"temp_s", last.temp_s},
                           {"curriculum_level", last.curriculum_level}};
    }
    rl::write_text_file(run_cfg.out_dir + "/manifest.json", manifest.dump(2));
    std::cout << "trained " << rl::variant_name(run_cfg.variant.variant) << " seed " << seed
              << " -> " << run_cfg.out_dir << " (" << result.wall_seconds << "s)\n";
  }
  return kExitOk;
}

int run_eval(const CommonArgs& args) {
  if (args.config.empty()) {
    std::cerr << "eval: --config must point to a checkpoint JSON\n";
    return kExitUsage;
  }
  if (args.episodes == 0) {
    std::cerr << "eval: --episodes must be positive\n";
    return kExitUsage;
  }
  rl::Checkpoint ckpt = rl::checkpoint_from_json(rl::read_json_file(args.config));
  std::string out = resolve_out(args.out);
  if (!out.empty()) fs::create_directories(out);

  env::EnvConfig eval_cfg = ckpt.env_cfg;
  if (args.deterministic) {
    eval_cfg.enable_obs_noise = false;
    eval_cfg.enable_randomization = false;
  }

  if (args.preset == "eight-dir") {
    auto runs = metrics::eight_direction_runs(*ckpt.actor, eval_cfg, 400);
    for (std::size_t i = 0; i < runs.size(); ++i) {
      if (!out.empty())
        rl::write_text_file(out + "/direction_" + std::to_string(i) + ".csv",
                            metrics::trajectory_csv(runs[i].traj));
    }
    if (!out.empty())
      rl::write_text_file(out + "/paths.svg",
                          metrics::path_overlay_svg(runs, "command-direction paths"));
    std::cout << "eight-direction preset: " << runs.size() << " trajectories"
              << (out.empty() ? "" : " -> " + out) << "\n";
    return kExitOk;
  }

  metrics::MetricsReport report = metrics::evaluate_policy(
      *ckpt.actor, eval_cfg, args.episodes, eval_cfg.episode_steps,
      args.seed_set ? args.seed : 0);
  std::cout << report.to_csv();
  if (!out.empty()) {
    json manifest{{"command", "eval"},
                  {"checkpoint", args.config},
                  {"variant", ckpt.variant},
                  {"episodes", args.episodes},
                  {"seed", args.seed_set ? args.seed : 0},
                  {"config_hash", config_hash(rl::read_json_file(args.config))},
                  {"report", report.to_json()}};
    rl::write_text_file(out + "/report.csv", report.to_csv());
    rl::write_text_file(out + "/report.json", report.to_json().dump(2));
    rl::write_text_file(out + "/manifest.json", manifest.dump(2));

    // TE-P / TE-O curves of a deterministic probe episode.
    env::EnvConfig probe_cfg = ckpt.env_cfg;
    probe_cfg.enable_obs_noise = false;
    std::mt19937_64 rng(args.seed_set ? args.seed : 0);
    env::ToyState s0 = env::reset(probe_cfg, rng, 1.0);
    metrics::Trajectory traj =
        metrics::rollout_trajectory(*ckpt.actor, probe_cfg, s0, probe_cfg.episode_steps);
    metrics::Curve tp = metrics::te_p(traj), to = metrics::te_o(traj);
    rl::write_text_file(out + "/tracking_curves.svg",
                        metrics::line_chart_svg({tp.per_step, to.per_step},
                                                {"position error (m)", "heading error (rad)"},
                                                "pose tracking error", probe_cfg.dt));
  }
  return kExitOk;
}

int run_verify(const CommonArgs& args) {
  std::vector<verify::CheckResult> checks;
  if (args.profile == "g1") {
    LayoutProfile profile = build_g1_profile();
    auto pc = verify::profile_checks(profile);
    checks.insert(checks.end(), pc.begin(), pc.end());
  } else if (args.profile == "toy") {
    env::EnvConfig env_cfg;
    LayoutProfile profile = build_toy_profile(env_cfg.joints_per_side, env_cfg.center_joints);
    auto pc = verify::profile_checks(profile);
    checks.insert(checks.end(), pc.begin(), pc.end());
    auto ec = verify::env_symmetry_checks(env_cfg, 1000, args.seed_set ? args.seed : 7);
    checks.insert(checks.end(), ec.begin(), ec.end());

    if (!args.config.empty()) {
      rl::Checkpoint ckpt = rl::checkpoint_from_json(rl::read_json_file(args.config));
      auto nc = verify::network_checks(*ckpt.actor, *ckpt.critic, *ckpt.profile, 200, 11);
      checks.insert(checks.end(), nc.begin(), nc.end());
    } else {
      LayoutProfile full = build_toy_profile(env_cfg.joints_per_side, env_cfg.center_joints);
      std::mt19937_64 rng(args.seed_set ? args.seed : 3);
      Actor actor(full, ActorConfig{}, rng);
      Critic critic(full, CriticConfig{}, rng);
      auto nc = verify::network_checks(actor, critic, full, 200, 11);
      checks.insert(checks.end(), nc.begin(), nc.end());
    }
  } else {
    std::cerr << "verify: --profile must be 'toy' or 'g1'\n";
    return kExitUsage;
  }

  std::cout << verify::format_table(checks);
  bool ok = verify::all_passed(checks);
  std::cout << (ok ? "all checks passed\n" : "CHECKS FAILED\n");
  return ok ? kExitOk : kExitPropertyFailure;
}

int run_rollout(const CommonArgs& args) {
  if (args.config.empty()) {
    std::cerr << "rollout: --config must point to a checkpoint JSON\n";
    return kExitUsage;
  }
  std::string out = resolve_out(args.out);
  if (out.empty()) {
    std::cerr << "rollout: an output directory is required (--out or SYMMEQ_OUT)\n";
    return kExitUsage;
  }
  rl::Checkpoint ckpt = rl::checkpoint_from_json(rl::read_json_file(args.config));
  fs::create_directories(out);
  env::EnvConfig cfg = ckpt.env_cfg;
  cfg.enable_obs_noise = false;
  std::mt19937_64 rng(args.seed_set ? args.seed : 0);
  for (std::size_t ep = 0; ep < std::max<std::size_t>(args.episodes, 1); ++ep) {
    env::ToyState s0 = env::reset(cfg, rng, 1.0);
    metrics::Trajectory traj =
        metrics::rollout_trajectory(*ckpt.actor, cfg, s0, cfg.episode_steps);
    rl::write_text_file(out + "/trajectory_" + std::to_string(ep) + ".csv",
                        metrics::trajectory_csv(traj));
  }
  json manifest{{"command", "rollout"},
                {"checkpoint", args.config},
                {"episodes", std::max<std::size_t>(args.episodes, 1)},
                {"seed", args.seed_set ? args.seed : 0},
                {"config_hash", config_hash(rl::read_json_file(args.config))}};
  rl::write_text_file(out + "/manifest.json", manifest.dump(2));
  std::cout << "wrote " << std::max<std::size_t>(args.episodes, 1) << " trajectories -> " << out
            << "\n";
  return kExitOk;
}

int run_plot(const CommonArgs& args) {
  if (args.config.empty()) {
    std::cerr << "plot: --config must point to a metrics or trajectory CSV\n";
    return kExitUsage;
  }
  std::string out = resolve_out(args.out);
  if (out.empty()) {
    std::cerr << "plot: an output directory is required (--out or SYMMEQ_OUT)\n";
    return kExitUsage;
  }
  std::ifstream f(args.config);
  if (!f) {
    std::cerr << "plot: cannot open " << args.config << "\n";
    return kExitUsage;
  }
  std::string header;
  std::getline(f, header);
  std::vector<std::string> columns;
  {
    std::stringstream ss(header);
    std::string col;
    while (std::getline(ss, col, ',')) columns.push_back(col);
  }
  std::vector<std::vector<double>> table(columns.size());
  std::string line;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::size_t c = 0;
    while (std::getline(ss, cell, ',') && c < columns.size())
      table[c++].push_back(std::strtod(cell.c_str(), nullptr));
  }
  if (table.empty() || table[0].empty()) {
    std::cerr << "plot: no data rows in " << args.config << "\n";
    return kExitUsage;
  }
  fs::create_directories(out);
  std::vector<std::vector<double>> series;
  std::vector<std::string> labels;
  for (std::size_t c = 1; c < columns.size(); ++c) {
    series.push_back(table[c]);
    labels.push_back(columns[c]);
  }
  rl::write_text_file(out + "/plot.svg",
                      metrics::line_chart_svg(series, labels,
                                              fs::path(args.config).filename().string(), 1.0));
  std::cout << "wrote " << out << "/plot.svg\n";
  return kExitOk;
}

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--config", args.config, "input JSON/CSV for this subcommand");
  cmd->add_option("--variant", args.variant, "se-policy | se-actor-only | vanilla | vanilla-regu");
  auto* seed_opt = cmd->add_option("--seed", args.seed, "single RNG seed");
  cmd->add_option("--seeds", args.seeds, "list of RNG seeds");
  cmd->add_option("--out", args.out, "output directory");
  cmd->add_option("--profile", args.profile, "layout profile: toy | g1");
  cmd->add_option("--episodes", args.episodes, "episode count for eval/rollout");
  cmd->add_option("--iterations", args.iterations, "training iteration count");
  cmd->add_option("--workers", args.workers, "worker count for rollout collection");
  cmd->add_flag("--deterministic", args.deterministic, "force serial, noise-free execution");
  cmd->add_option("--preset", args.preset, "evaluation preset (eight-dir)");
  cmd->parse_complete_callback([seed_opt, &args] { args.seed_set = seed_opt->count() > 0; });
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"symmetry-equivariant policy toolkit"};
  app.require_subcommand(1);

  CommonArgs targs, eargs, vargs, rargs, pargs;
  add_common(app.add_subcommand("train", "train a policy variant"), targs);
  add_common(app.add_subcommand("eval", "evaluate a checkpoint"), eargs);
  add_common(app.add_subcommand("verify", "run the symmetry property checks"), vargs);
  add_common(app.add_subcommand("rollout", "export raw trajectories"), rargs);
  add_common(app.add_subcommand("plot", "re-render SVG charts from CSV"), pargs);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (app.got_subcommand("train")) return run_train(targs);
    if (app.got_subcommand("eval")) return run_eval(eargs);
    if (app.got_subcommand("verify")) return run_verify(vargs);
    if (app.got_subcommand("rollout")) return run_rollout(rargs);
    if (app.got_subcommand("plot")) return run_plot(pargs);
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitPropertyFailure;
  }
  return kExitUsage;
}
