#include "symmeq/layout.hpp"

#include <map>
#include <stdexcept>

namespace symmeq {

ComponentSpec ComponentSpec::fixed(std::string name, std::size_t dim) {
  return {std::move(name), dim, Kind::Fixed, {}, {}};
}

ComponentSpec ComponentSpec::negated(std::string name, std::size_t dim) {
  return {std::move(name), dim, Kind::Negated, {}, {}};
}

ComponentSpec ComponentSpec::swap(std::string name, std::size_t dim, std::string partner,
                                  double sign) {
  return {std::move(name), dim, Kind::Swap, std::move(partner), std::vector<double>(dim, sign)};
}

std::size_t total_dim(const std::vector<ComponentSpec>& components) {
  std::size_t n = 0;
  for (const auto& c : components) n += c.dim;
  return n;
}

SignedPermutation assemble_transform(const std::vector<ComponentSpec>& components) {
  std::size_t n = total_dim(components);
  std::map<std::string, std::pair<std::size_t, const ComponentSpec*>> offsets;
  std::size_t off = 0;
  for (const auto& c : components) {
    if (c.dim == 0) throw std::invalid_argument("assemble_transform: zero-dim component " + c.name);
    if (!offsets.emplace(c.name, std::make_pair(off, &c)).second)
      throw std::invalid_argument("assemble_transform: duplicate component " + c.name);
    off += c.dim;
  }

  std::vector<std::size_t> target(n);
  std::vector<double> sign(n);
  off = 0;
  for (const auto& c : components) {
    switch (c.kind) {
      case ComponentSpec::Kind::Fixed:
        for (std::size_t i = 0; i < c.dim; ++i) {
          target[off + i] = off + i;
          sign[off + i] = 1.0;
        }
        break;
      case ComponentSpec::Kind::Negated:
        for (std::size_t i = 0; i < c.dim; ++i) {
          target[off + i] = off + i;
          sign[off + i] = -1.0;
        }
        break;
      case ComponentSpec::Kind::Swap: {
        auto it = offsets.find(c.partner);
        if (it == offsets.end())
          throw std::invalid_argument("assemble_transform: missing swap partner of " + c.name);
        const ComponentSpec& p = *it->second.second;
        if (p.dim != c.dim)
          throw std::invalid_argument("assemble_transform: swap partners differ in dimension: " +
                                      c.name + " / " + c.partner);
        if (p.kind != ComponentSpec::Kind::Swap || p.partner != c.name || p.signs != c.signs)
          throw std::invalid_argument("assemble_transform: inconsistent swap pair " + c.name);
        if (c.signs.size() != c.dim)
          throw std::invalid_argument("assemble_transform: sign length mismatch in " + c.name);
        std::size_t poff = it->second.first;
        for (std::size_t i = 0; i < c.dim; ++i) {
          target[off + i] = poff + i;
          sign[off + i] = c.signs[i];
        }
        break;
      }
    }
    off += c.dim;
  }

  SignedPermutation t(std::move(target), std::move(sign));
  if (!t.is_involution())
    throw std::invalid_argument("assemble_transform: assembled transform is not an involution");
  return t;
}

LayoutProfile::LayoutProfile(std::string name, std::vector<ComponentSpec> observation,
                             std::vector<ComponentSpec> action, std::vector<ComponentSpec> state,
                             std::vector<ComponentSpec> height_map, std::size_t latent_size)
    : name_(std::move(name)),
      observation_(std::move(observation)),
      action_(std::move(action)),
      state_(std::move(state)),
      height_map_(std::move(height_map)),
      latent_size_(latent_size),
      f_o_(assemble_transform(observation_)),
      f_a_(assemble_transform(action_)),
      f_s_(assemble_transform(state_)),
      f_h_(assemble_transform(height_map_)),
      f_z_(regular_rep(latent_size / 2)) {
  if (latent_size_ % 2 != 0)
    throw std::invalid_argument("LayoutProfile: latent size must be even");
}

namespace {

const char* kind_name(ComponentSpec::Kind k) {
  switch (k) {
    case ComponentSpec::Kind::Fixed: return "fixed";
    case ComponentSpec::Kind::Negated: return "negated";
    case ComponentSpec::Kind::Swap: return "swap";
  }
  return "fixed";
}

ComponentSpec::Kind kind_from_name(const std::string& s) {
  if (s == "fixed") return ComponentSpec::Kind::Fixed;
  if (s == "negated") return ComponentSpec::Kind::Negated;
  if (s == "swap") return ComponentSpec::Kind::Swap;
  throw std::invalid_argument("unknown component kind: " + s);
}

nlohmann::json components_to_json(const std::vector<ComponentSpec>& components) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& c : components) {
    nlohmann::json j{{"name", c.name}, {"dim", c.dim}, {"kind", kind_name(c.kind)}};
    if (c.kind == ComponentSpec::Kind::Swap) {
      j["partner"] = c.partner;
      j["signs"] = c.signs;
    }
    arr.push_back(std::move(j));
  }
  return arr;
}

std::vector<ComponentSpec> components_from_json(const nlohmann::json& arr) {
  std::vector<ComponentSpec> out;
  for (const auto& j : arr) {
    ComponentSpec c;
    c.name = j.at("name").get<std::string>();
    c.dim = j.at("dim").get<std::size_t>();
    c.kind = kind_from_name(j.at("kind").get<std::string>());
    if (c.kind == ComponentSpec::Kind::Swap) {
      c.partner = j.at("partner").get<std::string>();
      c.signs = j.at("signs").get<std::vector<double>>();
    }
    out.push_back(std::move(c));
  }
  return out;
}

}  // namespace

nlohmann::json LayoutProfile::to_json() const {
  return nlohmann::json{{"name", name_},
                        {"latent_size", latent_size_},
                        {"observation", components_to_json(observation_)},
                        {"action", components_to_json(action_)},
                        {"state", components_to_json(state_)},
                        {"height_map", components_to_json(height_map_)}};
}

LayoutProfile LayoutProfile::from_json(const nlohmann::json& j) {
  return LayoutProfile(j.at("name").get<std::string>(),
                       components_from_json(j.at("observation")),
                       components_from_json(j.at("action")), components_from_json(j.at("state")),
                       components_from_json(j.at("height_map")),
                       j.at("latent_size").get<std::size_t>());
}

namespace {

// Joint-space blocks shared by positions, velocities, and actions: bilateral
// pairs swap with sign -1, the waist stays put with sign +1.
std::vector<ComponentSpec> g1_joint_blocks(const std::string& prefix) {
  return {
      ComponentSpec::swap(prefix + "_left_arm", 7, prefix + "_right_arm", -1.0),
      ComponentSpec::swap(prefix + "_right_arm", 7, prefix + "_left_arm", -1.0),
      ComponentSpec::swap(prefix + "_left_leg", 6, prefix + "_right_leg", -1.0),
      ComponentSpec::swap(prefix + "_right_leg", 6, prefix + "_left_leg", -1.0),
      ComponentSpec::fixed(prefix + "_waist", 1),
  };
}

void append(std::vector<ComponentSpec>& to, std::vector<ComponentSpec> blocks) {
  for (auto& b : blocks) to.push_back(std::move(b));
}

}  // namespace

LayoutProfile build_g1_profile() {
  std::vector<ComponentSpec> obs{
      ComponentSpec::negated("ang_vel_x", 1), ComponentSpec::fixed("ang_vel_y", 1),
      ComponentSpec::negated("ang_vel_z", 1), ComponentSpec::fixed("gravity_x", 1),
      ComponentSpec::negated("gravity_y", 1), ComponentSpec::fixed("gravity_z", 1),
      ComponentSpec::fixed("cmd_x", 1),       ComponentSpec::negated("cmd_y", 1),
      ComponentSpec::negated("cmd_yaw", 1),
  };
  append(obs, g1_joint_blocks("joint_pos"));
  append(obs, g1_joint_blocks("joint_vel"));
  append(obs, g1_joint_blocks("prev_action"));
  obs.push_back(ComponentSpec::negated("phase", 2));

  std::vector<ComponentSpec> action = g1_joint_blocks("action");

  std::vector<ComponentSpec> height{
      ComponentSpec::swap("height_left", 93, "height_right", 1.0),
      ComponentSpec::fixed("height_middle", 1),
      ComponentSpec::swap("height_right", 93, "height_left", 1.0),
  };

  std::vector<ComponentSpec> state = obs;  // observation doubles as the state analog here

  return LayoutProfile("g1", std::move(obs), std::move(action), std::move(state),
                       std::move(height), 64);
}

LayoutProfile build_toy_profile(std::size_t k, std::size_t m, std::size_t latent_size) {
  if (k < 1) throw std::invalid_argument("build_toy_profile: k must be >= 1");

  auto joint_blocks = [&](const std::string& prefix) {
    std::vector<ComponentSpec> blocks{
        ComponentSpec::swap(prefix + "_left", k, prefix + "_right", -1.0),
        ComponentSpec::swap(prefix + "_right", k, prefix + "_left", -1.0),
    };
    if (m > 0) blocks.push_back(ComponentSpec::negated(prefix + "_center", m));
    return blocks;
  };

  std::vector<ComponentSpec> obs{
      ComponentSpec::fixed("vel_x", 1),   ComponentSpec::negated("vel_y", 1),
      ComponentSpec::negated("yaw_rate", 1), ComponentSpec::fixed("cmd_x", 1),
      ComponentSpec::negated("cmd_y", 1), ComponentSpec::negated("cmd_yaw", 1),
  };
  append(obs, joint_blocks("joint_pos"));
  append(obs, joint_blocks("joint_vel"));
  append(obs, joint_blocks("prev_action"));
  obs.push_back(ComponentSpec::negated("phase_sin", 1));
  obs.push_back(ComponentSpec::negated("phase_cos", 1));

  std::vector<ComponentSpec> action = joint_blocks("action");

  std::vector<ComponentSpec> height{
      ComponentSpec::swap("height_left", 1, "height_right", 1.0),
      ComponentSpec::fixed("height_middle", 1),
      ComponentSpec::swap("height_right", 1, "height_left", 1.0),
  };

  std::vector<ComponentSpec> state{
      ComponentSpec::fixed("pos_x", 1),   ComponentSpec::negated("pos_y", 1),
      ComponentSpec::negated("heading", 1), ComponentSpec::fixed("vel_x", 1),
      ComponentSpec::negated("vel_y", 1), ComponentSpec::negated("yaw_rate", 1),
  };
  append(state, joint_blocks("joint_pos"));
  append(state, joint_blocks("joint_vel"));
  state.push_back(ComponentSpec::negated("phase_sin", 1));
  state.push_back(ComponentSpec::negated("phase_cos", 1));
  state.push_back(ComponentSpec::fixed("cmd_x", 1));
  state.push_back(ComponentSpec::negated("cmd_y", 1));
  state.push_back(ComponentSpec::negated("cmd_yaw", 1));
  append(state, joint_blocks("prev_action1"));
  append(state, joint_blocks("prev_action2"));
  append(state, {ComponentSpec::swap("height_left", 1, "height_right", 1.0),
                 ComponentSpec::fixed("height_middle", 1),
                 ComponentSpec::swap("height_right", 1, "height_left", 1.0)});

  return LayoutProfile("toy", std::move(obs), std::move(action), std::move(state),
                       std::move(height), latent_size);
}

}  // namespace symmeq
