#include "symmeq/intertwiner.hpp"

#include <cmath>
#include <stdexcept>

namespace symmeq {

namespace {

void require_involution(const SignedPermutation& rho, const char* role) {
  if (!rho.is_involution())
    throw std::invalid_argument(std::string("solve_intertwiner_basis: ") + role +
                                " representation is not an involution");
}

std::shared_ptr<const ad::ScatterPlan> build_scatter(const std::vector<IntertwinerOrbit>& orbits,
                                                     std::vector<std::size_t> out_shape,
                                                     std::size_t row_stride) {
  auto plan = std::make_shared<ad::ScatterPlan>();
  plan->out_shape = std::move(out_shape);
  std::size_t slot = 0;
  for (const auto& orbit : orbits) {
    if (orbit.frozen_zero) continue;
    for (std::size_t e = 0; e < orbit.entries.size(); ++e) {
      plan->out_index.push_back(orbit.entries[e].first * row_stride + orbit.entries[e].second);
      plan->src_index.push_back(slot);
      plan->coeff.push_back(orbit.signs[e]);
    }
    ++slot;
  }
  return plan;
}

}  // namespace

WeightPlan solve_intertwiner_basis(const SignedPermutation& rho_in,
                                   const SignedPermutation& rho_out) {
  require_involution(rho_in, "input");
  require_involution(rho_out, "output");

  std::size_t m = rho_out.size(), n = rho_in.size();
  WeightPlan plan;
  plan.out_dim = m;
  plan.in_dim = n;

  std::vector<bool> seen(m * n, false);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (seen[i * n + j]) continue;
      std::size_t pi = rho_out.target_of(i);
      std::size_t pj = rho_in.target_of(j);
      double rel = rho_out.sign_of(i) * rho_in.sign_of(j);
      IntertwinerOrbit orbit;
      if (pi == i && pj == j) {
        orbit.entries = {{i, j}};
        orbit.signs = {1.0};
        orbit.frozen_zero = rel < 0.0;  // w = -w forces w = 0
      } else {
        orbit.entries = {{i, j}, {pi, pj}};
        orbit.signs = {1.0, rel};
        seen[pi * n + pj] = true;
      }
      seen[i * n + j] = true;
      if (!orbit.frozen_zero) ++plan.free_count;
      plan.orbits.push_back(std::move(orbit));
    }
  }
  plan.scatter = build_scatter(plan.orbits, {m, n}, n);
  return plan;
}

BiasPlan project_bias(const SignedPermutation& rho_out) {
  require_involution(rho_out, "output");
  std::size_t n = rho_out.size();
  BiasPlan plan;
  plan.dim = n;
  std::vector<bool> seen(n, false);
  for (std::size_t i = 0; i < n; ++i) {
    if (seen[i]) continue;
    std::size_t p = rho_out.target_of(i);
    IntertwinerOrbit orbit;
    if (p == i) {
      orbit.entries = {{i, 0}};
      orbit.signs = {1.0};
      orbit.frozen_zero = rho_out.sign_of(i) < 0.0;
    } else {
      orbit.entries = {{i, 0}, {p, 0}};
      orbit.signs = {1.0, rho_out.sign_of(i)};
      seen[p] = true;
    }
    seen[i] = true;
    if (!orbit.frozen_zero) ++plan.free_count;
    plan.orbits.push_back(std::move(orbit));
  }
  plan.scatter = build_scatter(plan.orbits, {n}, 1);
  return plan;
}

Tensor realize_weight(const WeightPlan& plan, const Tensor& theta) {
  if (theta.size() != plan.free_count)
    throw std::invalid_argument("realize_weight: parameter count mismatch");
  Tensor w(plan.scatter->out_shape);
  const auto& sp = *plan.scatter;
  for (std::size_t k = 0; k < sp.out_index.size(); ++k)
    w[sp.out_index[k]] += sp.coeff[k] * theta[sp.src_index[k]];
  return w;
}

Tensor realize_bias(const BiasPlan& plan, const Tensor& theta) {
  if (theta.size() != plan.free_count)
    throw std::invalid_argument("realize_bias: parameter count mismatch");
  Tensor b(plan.scatter->out_shape);
  const auto& sp = *plan.scatter;
  for (std::size_t k = 0; k < sp.out_index.size(); ++k)
    b[sp.out_index[k]] += sp.coeff[k] * theta[sp.src_index[k]];
  return b;
}

double intertwiner_residual(const SignedPermutation& rho_in, const SignedPermutation& rho_out,
                            const Tensor& w) {
  std::size_t m = rho_out.size(), n = rho_in.size();
  if (w.rank() != 2 || w.rows() != m || w.cols() != n)
    throw std::invalid_argument("intertwiner_residual: shape mismatch");
  // (rho_out W)[target_out(i), j] = sign_out(i) W[i, j]
  // (W rho_in)[i, j] = W[i, target_in^-1... ] computed via scatter of columns.
  Tensor lhs = Tensor::matrix(m, n);  // rho_out * W
  Tensor rhs = Tensor::matrix(m, n);  // W * rho_in
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      lhs.at(rho_out.target_of(i), j) = rho_out.sign_of(i) * w.at(i, j);
      // column j of rho_in has entry sign_in(j) at row target_in(j)
      rhs.at(i, j) = rho_in.sign_of(j) * w.at(i, rho_in.target_of(j));
    }
  double worst = 0.0;
  for (std::size_t i = 0; i < m * n; ++i) worst = std::max(worst, std::abs(rhs[i] - lhs[i]));
  return worst;
}

std::size_t constraint_nullspace_dim(const SignedPermutation& rho_in,
                                     const SignedPermutation& rho_out) {
  std::size_t m = rho_out.size(), n = rho_in.size();
  std::size_t dim = m * n;
  // Row per constraint entry (a, j): (rho_out W - W rho_in)[a, j] = 0.
  std::vector<std::vector<double>> mat(dim, std::vector<double>(dim, 0.0));
  for (std::size_t a = 0; a < m; ++a)
    for (std::size_t j = 0; j < n; ++j) {
      std::size_t row = a * n + j;
      // rho_out W contributes sign_out(sigma_out(a)) * W[sigma_out(a), j]
      std::size_t i = rho_out.target_of(a);  // involution: sigma_out(a)
      mat[row][i * n + j] += rho_out.sign_of(i);
      // W rho_in contributes sign_in(j) * W[a, sigma_in(j)]
      mat[row][a * n + rho_in.target_of(j)] -= rho_in.sign_of(j);
    }
  // Gaussian elimination; entries stay in {-2,-1,0,1,2}, so exact.
  std::size_t rank = 0;
  for (std::size_t col = 0; col < dim && rank < dim; ++col) {
    std::size_t pivot = rank;
    while (pivot < dim && std::abs(mat[pivot][col]) < 1e-9) ++pivot;
    if (pivot == dim) continue;
    std::swap(mat[rank], mat[pivot]);
    double p = mat[rank][col];
    for (std::size_t r = 0; r < dim; ++r) {
      if (r == rank || std::abs(mat[r][col]) < 1e-9) continue;
      double f = mat[r][col] / p;
      for (std::size_t c = col; c < dim; ++c) mat[r][c] -= f * mat[rank][c];
    }
    ++rank;
  }
  return dim - rank;
}

}  // namespace symmeq
