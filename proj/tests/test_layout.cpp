#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "symmeq/layout.hpp"

using namespace symmeq;

TEST_CASE("desk-scale profile has the expected dimensions") {
  LayoutProfile p = build_toy_profile(2, 1);
  CHECK(p.obs_dim() == 23);
  CHECK(p.action_dim() == 5);
  CHECK(p.height_dim() == 3);
  CHECK(p.latent_size() == 16);
  CHECK(p.f_z().size() == 16);
  CHECK(p.f_o().is_involution());
  CHECK(p.f_a().is_involution());
  CHECK(p.f_s().is_involution());
  CHECK(p.f_h().is_involution());
  CHECK(p.f_z().is_involution());
  CHECK(p.f_z().is_pure_permutation());
}

TEST_CASE("desk-scale action transform swaps sides with sign -1 and negates center") {
  LayoutProfile p = build_toy_profile(2, 1);
  const SignedPermutation& fa = p.f_a();
  // left pair (0,1) <-> right pair (2,3) with sign -1, center 4 negated.
  CHECK(fa.target_of(0) == 2);
  CHECK(fa.target_of(1) == 3);
  CHECK(fa.target_of(2) == 0);
  CHECK(fa.target_of(3) == 1);
  CHECK(fa.target_of(4) == 4);
  for (std::size_t i = 0; i < 5; ++i) CHECK(fa.sign_of(i) == -1.0);
}

TEST_CASE("desk-scale observation transform acts blockwise") {
  LayoutProfile p = build_toy_profile(2, 1);
  const SignedPermutation& fo = p.f_o();
  // vel_x fixed, vel_y/yaw_rate negated, cmd_x fixed, cmd_y/cmd_yaw negated.
  std::vector<double> head_signs = {1, -1, -1, 1, -1, -1};
  for (std::size_t i = 0; i < 6; ++i) {
    CHECK(fo.target_of(i) == i);
    CHECK(fo.sign_of(i) == head_signs[i]);
  }
  // Three joint-space blocks of 5 at offsets 6, 11, 16; then phase sin/cos.
  for (std::size_t block = 0; block < 3; ++block) {
    std::size_t off = 6 + 5 * block;
    CHECK(fo.target_of(off + 0) == off + 2);
    CHECK(fo.target_of(off + 1) == off + 3);
    CHECK(fo.target_of(off + 2) == off + 0);
    CHECK(fo.target_of(off + 3) == off + 1);
    CHECK(fo.target_of(off + 4) == off + 4);
    for (std::size_t i = 0; i < 5; ++i) CHECK(fo.sign_of(off + i) == -1.0);
  }
  CHECK(fo.target_of(21) == 21);
  CHECK(fo.sign_of(21) == -1.0);
  CHECK(fo.target_of(22) == 22);
  CHECK(fo.sign_of(22) == -1.0);
}

TEST_CASE("humanoid profile has the published dimensions") {
  LayoutProfile p = build_g1_profile();
  CHECK(p.obs_dim() == 92);
  CHECK(p.action_dim() == 27);
  CHECK(p.height_dim() == 187);
  CHECK(p.latent_size() == 64);
  CHECK(p.f_o().is_involution());
  CHECK(p.f_a().is_involution());
  CHECK(p.f_h().is_involution());
}

// Independent index/sign oracle for the 92-dim humanoid observation,
// reconstructed from the declared ordering: 3 base angular velocities,
// 3 gravity components, 3 commands, then three 27-dim joint blocks
// (left arm 7, right arm 7, left leg 6, right leg 6, waist 1), then the
// 2-dim clock signal.
TEST_CASE("humanoid observation transform matches the frozen oracle") {
  LayoutProfile p = build_g1_profile();
  const SignedPermutation& fo = p.f_o();

  std::vector<std::size_t> target(92);
  std::vector<double> sign(92);
  auto self = [&](std::size_t i, double s) {
    target[i] = i;
    sign[i] = s;
  };
  // Roll and yaw rates flip, pitch rate is preserved.
  self(0, -1.0);
  self(1, 1.0);
  self(2, -1.0);
  // Gravity: lateral component flips.
  self(3, 1.0);
  self(4, -1.0);
  self(5, 1.0);
  // Commands: forward preserved, lateral and yaw flipped.
  self(6, 1.0);
  self(7, -1.0);
  self(8, -1.0);
  for (std::size_t block = 0; block < 3; ++block) {
    std::size_t off = 9 + 27 * block;
    for (std::size_t i = 0; i < 7; ++i) {  // arms
      target[off + i] = off + 7 + i;
      sign[off + i] = -1.0;
      target[off + 7 + i] = off + i;
      sign[off + 7 + i] = -1.0;
    }
    for (std::size_t i = 0; i < 6; ++i) {  // legs
      target[off + 14 + i] = off + 20 + i;
      sign[off + 14 + i] = -1.0;
      target[off + 20 + i] = off + 14 + i;
      sign[off + 20 + i] = -1.0;
    }
    self(off + 26, 1.0);  // waist
  }
  self(90, -1.0);  // clock signal flips by the half-period shift
  self(91, -1.0);

  for (std::size_t i = 0; i < 92; ++i) {
    CHECK(fo.target_of(i) == target[i]);
    CHECK(fo.sign_of(i) == sign[i]);
  }
}

TEST_CASE("humanoid action transform matches the frozen oracle") {
  LayoutProfile p = build_g1_profile();
  const SignedPermutation& fa = p.f_a();
  for (std::size_t i = 0; i < 7; ++i) {
    CHECK(fa.target_of(i) == 7 + i);
    CHECK(fa.target_of(7 + i) == i);
  }
  for (std::size_t i = 0; i < 6; ++i) {
    CHECK(fa.target_of(14 + i) == 20 + i);
    CHECK(fa.target_of(20 + i) == 14 + i);
  }
  CHECK(fa.target_of(26) == 26);
  for (std::size_t i = 0; i < 26; ++i) CHECK(fa.sign_of(i) == -1.0);
  CHECK(fa.sign_of(26) == 1.0);
}

TEST_CASE("humanoid height map swaps side strips and fixes the center column") {
  LayoutProfile p = build_g1_profile();
  const SignedPermutation& fh = p.f_h();
  for (std::size_t i = 0; i < 93; ++i) {
    CHECK(fh.target_of(i) == 94 + i);
    CHECK(fh.sign_of(i) == 1.0);
    CHECK(fh.target_of(94 + i) == i);
    CHECK(fh.sign_of(94 + i) == 1.0);
  }
  CHECK(fh.target_of(93) == 93);
  CHECK(fh.sign_of(93) == 1.0);
  CHECK(fh.is_pure_permutation());
}

TEST_CASE("profile JSON round-trips exactly") {
  for (const LayoutProfile& p : {build_toy_profile(2, 1), build_g1_profile()}) {
    LayoutProfile q = LayoutProfile::from_json(p.to_json());
    CHECK(q.name() == p.name());
    CHECK(q.latent_size() == p.latent_size());
    CHECK(q.f_o() == p.f_o());
    CHECK(q.f_a() == p.f_a());
    CHECK(q.f_s() == p.f_s());
    CHECK(q.f_h() == p.f_h());
    CHECK(q.f_z() == p.f_z());
  }
}

TEST_CASE("assembly rejects malformed component lists") {
  using CS = ComponentSpec;
  CHECK_THROWS(assemble_transform({CS::swap("a", 2, "missing", 1.0)}));
  CHECK_THROWS(assemble_transform({CS::swap("a", 2, "b", 1.0), CS::swap("b", 3, "a", 1.0)}));
  CHECK_THROWS(assemble_transform({CS::swap("a", 2, "b", 1.0), CS::swap("b", 2, "a", -1.0)}));
  CHECK_THROWS(assemble_transform({CS::fixed("a", 1), CS::fixed("a", 1)}));
  CHECK_THROWS(assemble_transform({CS::fixed("a", 0)}));
  CHECK_THROWS(build_toy_profile(0, 1));
  CHECK_THROWS(build_toy_profile(2, 1, 15));  // odd latent size
}
