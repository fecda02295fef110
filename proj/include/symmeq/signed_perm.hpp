#pragma once

#include <cstddef>
#include <stdexcept>
#include <vector>

#include "symmeq/tensor.hpp"

namespace symmeq {

// One generator of the C2 reflection group acting on R^n:
// (apply(x))[target[i]] = sign[i] * x[i]. Every transform in this project is
// its own inverse.
class SignedPermutation {
 public:
  SignedPermutation() = default;
  SignedPermutation(std::vector<std::size_t> target, std::vector<double> sign);

  static SignedPermutation identity(std::size_t n);

  std::size_t size() const { return target_.size(); }
  const std::vector<std::size_t>& target() const { return target_; }
  const std::vector<double>& sign() const { return sign_; }

  std::size_t target_of(std::size_t i) const { return target_[i]; }
  double sign_of(std::size_t i) const { return sign_[i]; }

  Tensor apply(const Tensor& x) const;
  std::vector<double> apply(const std::vector<double>& x) const;

  // apply(result, x) == apply(*this, other.apply(x))
  SignedPermutation compose(const SignedPermutation& other) const;

  bool is_identity() const;
  bool is_involution() const { return compose(*this).is_identity(); }
  // Pure permutation: every sign is +1 (the only reps pointwise activations
  // are allowed on).
  bool is_pure_permutation() const;

  bool operator==(const SignedPermutation& other) const {
    return target_ == other.target_ && sign_ == other.sign_;
  }

 private:
  std::vector<std::size_t> target_;
  std::vector<double> sign_;
};

// The 2-dimensional-regular-representation stack: pairs (2i, 2i+1) swapped
// with sign +1. Used for latent features and all hidden layers.
SignedPermutation regular_rep(std::size_t pairs);

// Block-diagonal concatenation of two representations.
SignedPermutation direct_sum(const SignedPermutation& a, const SignedPermutation& b);

// n copies of rep, block diagonal.
SignedPermutation repeat_rep(const SignedPermutation& rep, std::size_t n);

// Applies the observation transform independently to every timestep row of a
// stacked history [rows, width]. Row order is unchanged.
Tensor mirror_history(const SignedPermutation& f_o, const Tensor& history);

}  // namespace symmeq
