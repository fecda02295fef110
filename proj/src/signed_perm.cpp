#include "symmeq/signed_perm.hpp"

#include <cmath>

namespace symmeq {

SignedPermutation::SignedPermutation(std::vector<std::size_t> target, std::vector<double> sign)
    : target_(std::move(target)), sign_(std::move(sign)) {
  if (target_.size() != sign_.size())
    throw std::invalid_argument("SignedPermutation: target/sign length mismatch");
  std::vector<bool> seen(target_.size(), false);
  for (std::size_t t : target_) {
    if (t >= target_.size() || seen[t])
      throw std::invalid_argument("SignedPermutation: target is not a bijection");
    seen[t] = true;
  }
  for (double s : sign_)
    if (s != 1.0 && s != -1.0)
      throw std::invalid_argument("SignedPermutation: signs must be +1 or -1");
}

SignedPermutation SignedPermutation::identity(std::size_t n) {
  std::vector<std::size_t> target(n);
  for (std::size_t i = 0; i < n; ++i) target[i] = i;
  return SignedPermutation(std::move(target), std::vector<double>(n, 1.0));
}

Tensor SignedPermutation::apply(const Tensor& x) const {
  if (x.size() != size()) throw std::invalid_argument("SignedPermutation::apply: length mismatch");
  Tensor out(x.shape());
  for (std::size_t i = 0; i < size(); ++i) out[target_[i]] = sign_[i] * x[i];
  return out;
}

std::vector<double> SignedPermutation::apply(const std::vector<double>& x) const {
  if (x.size() != size()) throw std::invalid_argument("SignedPermutation::apply: length mismatch");
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < size(); ++i) out[target_[i]] = sign_[i] * x[i];
  return out;
}

SignedPermutation SignedPermutation::compose(const SignedPermutation& other) const {
  if (size() != other.size())
    throw std::invalid_argument("SignedPermutation::compose: length mismatch");
  // result(x) = this(other(x)): x[i] lands at other.target[i] with other.sign[i],
  // then at target[other.target[i]] with the product of signs.
  std::vector<std::size_t> target(size());
  std::vector<double> sign(size());
  for (std::size_t i = 0; i < size(); ++i) {
    target[i] = target_[other.target_[i]];
    sign[i] = sign_[other.target_[i]] * other.sign_[i];
  }
  return SignedPermutation(std::move(target), std::move(sign));
}

bool SignedPermutation::is_identity() const {
  for (std::size_t i = 0; i < size(); ++i)
    if (target_[i] != i || sign_[i] != 1.0) return false;
  return true;
}

bool SignedPermutation::is_pure_permutation() const {
  for (double s : sign_)
    if (s != 1.0) return false;
  return true;
}

SignedPermutation regular_rep(std::size_t pairs) {
  std::vector<std::size_t> target(2 * pairs);
  for (std::size_t i = 0; i < pairs; ++i) {
    target[2 * i] = 2 * i + 1;
    target[2 * i + 1] = 2 * i;
  }
  return SignedPermutation(std::move(target), std::vector<double>(2 * pairs, 1.0));
}

SignedPermutation direct_sum(const SignedPermutation& a, const SignedPermutation& b) {
  std::size_t na = a.size(), nb = b.size();
  std::vector<std::size_t> target(na + nb);
  std::vector<double> sign(na + nb);
  for (std::size_t i = 0; i < na; ++i) {
    target[i] = a.target_of(i);
    sign[i] = a.sign_of(i);
  }
  for (std::size_t i = 0; i < nb; ++i) {
    target[na + i] = na + b.target_of(i);
    sign[na + i] = b.sign_of(i);
  }
  return SignedPermutation(std::move(target), std::move(sign));
}

SignedPermutation repeat_rep(const SignedPermutation& rep, std::size_t n) {
  SignedPermutation out = SignedPermutation::identity(0);
  for (std::size_t i = 0; i < n; ++i) out = direct_sum(out, rep);
  return out;
}

Tensor mirror_history(const SignedPermutation& f_o, const Tensor& history) {
  if (history.rank() != 2 || history.cols() != f_o.size())
    throw std::invalid_argument("mirror_history: width mismatch");
  Tensor out(history.shape());
  for (std::size_t r = 0; r < history.rows(); ++r)
    for (std::size_t i = 0; i < f_o.size(); ++i)
      out.at(r, f_o.target_of(i)) = f_o.sign_of(i) * history.at(r, i);
  return out;
}

}  // namespace symmeq
