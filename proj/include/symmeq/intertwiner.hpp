#pragma once

#include <memory>
#include <utility>
#include <vector>

#include "symmeq/autodiff.hpp"
#include "symmeq/signed_perm.hpp"
#include "symmeq/tensor.hpp"

namespace symmeq {

// One weight-sharing unit: matrix entries tied to a single free coefficient.
// Orbits have size 1 or 2 under (i,j) -> (sigma_out(i), sigma_in(j)). A
// size-1 orbit with relative sign -1 is frozen to zero.
struct IntertwinerOrbit {
  std::vector<std::pair<std::size_t, std::size_t>> entries;
  std::vector<double> signs;  // per entry, relative to the free coefficient
  bool frozen_zero = false;
};

// Full basis of the solution space of W * rho_in = rho_out * W, one free
// parameter per non-frozen orbit.
struct WeightPlan {
  std::size_t out_dim = 0;
  std::size_t in_dim = 0;
  std::vector<IntertwinerOrbit> orbits;  // partition of all matrix entries
  std::size_t free_count = 0;
  std::shared_ptr<const ad::ScatterPlan> scatter;  // theta [free_count] -> W [out, in]
};

// Basis of vectors with b = rho_out * b.
struct BiasPlan {
  std::size_t dim = 0;
  std::vector<IntertwinerOrbit> orbits;  // entries hold (index, 0)
  std::size_t free_count = 0;
  std::shared_ptr<const ad::ScatterPlan> scatter;  // theta [free_count] -> b [dim]
};

// Both representations must be involutions.
WeightPlan solve_intertwiner_basis(const SignedPermutation& rho_in,
                                   const SignedPermutation& rho_out);

BiasPlan project_bias(const SignedPermutation& rho_out);

Tensor realize_weight(const WeightPlan& plan, const Tensor& theta);
Tensor realize_bias(const BiasPlan& plan, const Tensor& theta);

// Max-abs residual of W * rho_in - rho_out * W. Zero (to rounding) for any
// realized weight.
double intertwiner_residual(const SignedPermutation& rho_in, const SignedPermutation& rho_out,
                            const Tensor& w);

// Brute-force dimension of the null space of the vectorized constraint.
// Independent oracle for plan free counts; intended for small representations.
std::size_t constraint_nullspace_dim(const SignedPermutation& rho_in,
                                     const SignedPermutation& rho_out);

}  // namespace symmeq
