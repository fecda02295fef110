#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "symmeq/intertwiner.hpp"
#include "symmeq/signed_perm.hpp"

using namespace symmeq;

namespace {

SignedPermutation trivial1() { return SignedPermutation::identity(1); }
SignedPermutation sign1() { return SignedPermutation({0}, {-1.0}); }

// Random block-diagonal involution built from trivial, sign, and 2-dim swap
// blocks, with total dimension <= max_dim.
SignedPermutation random_rep(std::mt19937_64& rng, std::size_t max_dim) {
  SignedPermutation rep;
  std::size_t dim = 0;
  std::uniform_int_distribution<int> pick(0, 2);
  while (true) {
    int kind = pick(rng);
    std::size_t need = kind == 2 ? 2 : 1;
    if (dim + need > max_dim) break;
    SignedPermutation block = kind == 0 ? trivial1() : kind == 1 ? sign1() : regular_rep(1);
    rep = rep.size() == 0 ? block : direct_sum(rep, block);
    dim += need;
    if (dim == max_dim || (rng() & 3) == 0) break;
  }
  return rep.size() == 0 ? trivial1() : rep;
}

Tensor random_theta(std::size_t n, std::mt19937_64& rng) {
  Tensor t({n});
  std::uniform_real_distribution<double> uni(-1.5, 1.5);
  for (double& v : t.data()) v = uni(rng);
  return t;
}

}  // namespace

TEST_CASE("swap pair to swap pair has two free parameters") {
  WeightPlan plan = solve_intertwiner_basis(regular_rep(1), regular_rep(1));
  CHECK(plan.free_count == 2);
  CHECK(constraint_nullspace_dim(regular_rep(1), regular_rep(1)) == 2);
}

TEST_CASE("sign to swap pair has one free parameter with opposite entries") {
  WeightPlan plan = solve_intertwiner_basis(sign1(), regular_rep(1));
  CHECK(plan.free_count == 1);
  CHECK(constraint_nullspace_dim(sign1(), regular_rep(1)) == 1);
  std::mt19937_64 rng(1);
  Tensor w = realize_weight(plan, random_theta(plan.free_count, rng));
  CHECK(w.rows() == 2);
  CHECK(w.cols() == 1);
  CHECK(w.at(0, 0) == -w.at(1, 0));
}

TEST_CASE("trivial to sign is frozen to zero") {
  WeightPlan plan = solve_intertwiner_basis(trivial1(), sign1());
  CHECK(plan.free_count == 0);
  CHECK(constraint_nullspace_dim(trivial1(), sign1()) == 0);
  Tensor w = realize_weight(plan, Tensor({0}));
  CHECK(w.at(0, 0) == 0.0);
}

TEST_CASE("plan free count matches the brute-force nullspace dimension") {
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 300; ++trial) {
    SignedPermutation rin = random_rep(rng, 6);
    SignedPermutation rout = random_rep(rng, 6);
    WeightPlan plan = solve_intertwiner_basis(rin, rout);
    CHECK(plan.free_count == constraint_nullspace_dim(rin, rout));

    // Orbits partition all matrix entries.
    std::size_t covered = 0;
    for (const auto& orbit : plan.orbits) covered += orbit.entries.size();
    CHECK(covered == rin.size() * rout.size());

    // Every realized weight commutes with the representations.
    Tensor w = realize_weight(plan, random_theta(plan.free_count, rng));
    CHECK(intertwiner_residual(rin, rout, w) < 1e-12);
  }
}

TEST_CASE("realized bias is fixed by the output representation") {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 100; ++trial) {
    SignedPermutation rout = random_rep(rng, 6);
    BiasPlan plan = project_bias(rout);
    Tensor b = realize_bias(plan, random_theta(plan.free_count, rng));
    Tensor moved = rout.apply(b);
    for (std::size_t i = 0; i < b.size(); ++i) CHECK(moved[i] == doctest::Approx(b[i]).epsilon(1e-14));

    // Free count equals the fixed-subspace dimension: one per +1 self-loop,
    // one per swapped pair with +1 sign, zero for -1 self-loops.
    std::size_t expect = 0;
    for (std::size_t i = 0; i < rout.size(); ++i) {
      std::size_t j = rout.target_of(i);
      if (j == i && rout.sign_of(i) > 0) expect += 1;
      if (j > i && rout.sign_of(i) > 0) expect += 1;
    }
    CHECK(plan.free_count == expect);
  }
}

TEST_CASE("non-involution representations are rejected") {
  SignedPermutation cycle({1, 2, 0}, {1.0, 1.0, 1.0});
  CHECK_THROWS(solve_intertwiner_basis(cycle, trivial1()));
  CHECK_THROWS(solve_intertwiner_basis(trivial1(), cycle));
  CHECK_THROWS(project_bias(cycle));
}

TEST_CASE("perturbing a realized weight off the basis breaks the residual") {
  WeightPlan plan = solve_intertwiner_basis(sign1(), regular_rep(1));
  std::mt19937_64 rng(3);
  Tensor w = realize_weight(plan, random_theta(plan.free_count, rng));
  w.at(0, 0) += 0.1;
  CHECK(intertwiner_residual(sign1(), regular_rep(1), w) > 0.05);
}
