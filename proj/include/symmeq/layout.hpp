#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "symmeq/signed_perm.hpp"

namespace symmeq {

// One named block of a vector space together with how the mirror acts on it.
struct ComponentSpec {
  enum class Kind { Fixed, Negated, Swap };

  std::string name;
  std::size_t dim = 0;
  Kind kind = Kind::Fixed;
  std::string partner;        // swap only
  std::vector<double> signs;  // swap only, per dimension

  static ComponentSpec fixed(std::string name, std::size_t dim);
  static ComponentSpec negated(std::string name, std::size_t dim);
  static ComponentSpec swap(std::string name, std::size_t dim, std::string partner, double sign);
};

// Assembles the SignedPermutation for an ordered component list. Swap partners
// must both be present, have equal dimension, and carry matching signs.
SignedPermutation assemble_transform(const std::vector<ComponentSpec>& components);

std::size_t total_dim(const std::vector<ComponentSpec>& components);

// Named decomposition of the observation/action/state/height-map spaces with
// their mirror transforms, plus the latent size used by the encoder.
class LayoutProfile {
 public:
  LayoutProfile(std::string name, std::vector<ComponentSpec> observation,
                std::vector<ComponentSpec> action, std::vector<ComponentSpec> state,
                std::vector<ComponentSpec> height_map, std::size_t latent_size);

  const std::string& name() const { return name_; }
  std::size_t latent_size() const { return latent_size_; }

  const std::vector<ComponentSpec>& observation_components() const { return observation_; }
  const std::vector<ComponentSpec>& action_components() const { return action_; }
  const std::vector<ComponentSpec>& state_components() const { return state_; }
  const std::vector<ComponentSpec>& height_map_components() const { return height_map_; }

  std::size_t obs_dim() const { return f_o_.size(); }
  std::size_t action_dim() const { return f_a_.size(); }
  std::size_t height_dim() const { return f_h_.size(); }

  const SignedPermutation& f_o() const { return f_o_; }
  const SignedPermutation& f_a() const { return f_a_; }
  const SignedPermutation& f_s() const { return f_s_; }
  const SignedPermutation& f_h() const { return f_h_; }
  const SignedPermutation& f_z() const { return f_z_; }

  nlohmann::json to_json() const;
  static LayoutProfile from_json(const nlohmann::json& j);

 private:
  std::string name_;
  std::vector<ComponentSpec> observation_, action_, state_, height_map_;
  std::size_t latent_size_;
  SignedPermutation f_o_, f_a_, f_s_, f_h_, f_z_;
};

// The humanoid layout: 92-dim observation, 27-dim action, 187-dim height map,
// latent size 64. Joint blocks ordered (left arm 7, right arm 7, left leg 6,
// right leg 6, waist 1).
LayoutProfile build_g1_profile();

// Desk-scale planar layout with k joints per side and m center joints.
LayoutProfile build_toy_profile(std::size_t k, std::size_t m, std::size_t latent_size = 16);

}  // namespace symmeq
