#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "symmeq/env.hpp"
#include "symmeq/eqnn.hpp"
#include "symmeq/layout.hpp"

namespace symmeq::verify {

struct CheckResult {
  std::string name;
  bool passed = false;
  double residual = 0.0;
  double tolerance = 0.0;
  bool informational = false;  // reported but not counted as a failure
};

bool all_passed(const std::vector<CheckResult>& checks);
std::string format_table(const std::vector<CheckResult>& checks);

// Involutions of all five transforms plus swap-pair structure of the
// component lists (partners map onto each other with the declared sign).
std::vector<CheckResult> profile_checks(const LayoutProfile& profile);

// A random reachable-ish state with all fields perturbed (pose, velocities,
// joints, phase, commands, terrain, dynamics draw).
env::ToyState random_toy_state(const env::EnvConfig& cfg, std::mt19937_64& rng);

// step/mirror commutation and reward invariance over random (s, a) pairs.
// Returns per-property results with max residuals.
std::vector<CheckResult> env_symmetry_checks(const env::EnvConfig& cfg, std::size_t pairs,
                                             std::uint64_t seed, double transition_tol = 1e-10,
                                             double reward_tol = 1e-12);

// Intertwiner residuals of every equivariant layer, actor equivariance
// (mean-action residual on random histories), critic invariance. For vanilla
// components the equivariance rows are informational.
std::vector<CheckResult> network_checks(const Actor& actor, const Critic& critic,
                                        const LayoutProfile& profile, std::size_t samples,
                                        std::uint64_t seed);

}  // namespace symmeq::verify
