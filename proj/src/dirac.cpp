#include "selfmod/dirac.hpp"

#include <algorithm>
#include <cmath>

namespace selfmod {

namespace {
constexpr complex_t I_UNIT(0.0, 1.0);
}

DiracPotential::DiracPotential(SampledScalarField p_values,
                               SampledScalarField p_prime_values)
    : p(std::move(p_values)), p_prime(std::move(p_prime_values)) {
  require_same_grid(p.grid, p_prime.grid, "DiracPotential");
}

DiracPotential DiracPotential::from_values(SampledScalarField p_values) {
  auto d = differentiate(p_values);
  return DiracPotential(std::move(p_values), std::move(d));
}

real_t DiracPotential::derivative_mismatch() const {
  const auto d = differentiate(p);
  real_t m = 0.0;
  for (std::size_t j = 0; j < d.size(); ++j)
    m = std::max(m, std::abs(d[j] - p_prime[j]));
  return m;
}

SpinorField::SpinorField(Grid g)
    : grid(g), values(g.n(), Eigen::Vector2cd::Zero()) {}

SampledScalarField SpinorField::component(int c) const {
  SampledScalarField out(grid);
  for (std::size_t j = 0; j < values.size(); ++j) out.values[j] = values[j](c);
  return out;
}

SpinorField dirac_apply(const DiracPotential& p, const SpinorField& y) {
  require_same_grid(p.grid(), y.grid, "dirac_apply");
  const auto d0 = differentiate(y.component(0));
  const auto d1 = differentiate(y.component(1));
  SpinorField out(y.grid);
  for (std::size_t j = 0; j < y.values.size(); ++j) {
    const complex_t pj = p.p[j];
    const auto& yj = y.values[j];
    out.values[j](0) = I_UNIT * d0[j] + pj * yj(1);
    out.values[j](1) = -I_UNIT * d1[j] + std::conj(pj) * yj(0);
  }
  return out;
}

MatrixPotential schrodinger_from_dirac(const DiracPotential& p) {
  MatrixPotential q(p.grid(), 2, true);
  for (std::size_t j = 0; j < q.size(); ++j) {
    const real_t mod2 = std::norm(p.p[j]);
    const complex_t dp = p.p_prime[j];
    auto& M = q.values[j];
    M(0, 0) = mod2;
    M(1, 1) = mod2;
    M(0, 1) = I_UNIT * dp;
    M(1, 0) = -I_UNIT * std::conj(dp);
  }
  return q;
}

real_t dirac_square_residual(const DiracPotential& p, const SpinorField& y,
                             std::optional<real_t> bc_tol) {
  require_same_grid(p.grid(), y.grid, "dirac_square_residual");
  const real_t h = y.grid.h();
  real_t scale = 0.0;
  for (const auto& v : y.values) scale = std::max(scale, v.norm());
  const real_t tol = bc_tol.value_or(10.0 * h * h * (1.0 + scale));

  const auto y0 = y.component(0);
  const auto y1 = y.component(1);
  const auto dy0 = differentiate(y0);
  const auto dy1 = differentiate(y1);
  const real_t bc = std::max({std::abs(y0[0]), std::abs(y1[0]),
                              std::abs(dy0[0]), std::abs(dy1[0])});
  if (bc > tol)
    throw BoundaryConditionError("spinor violates y(0) = y'(0) = 0 (defect " +
                                 std::to_string(bc) + ")");

  const auto lhs = dirac_apply(p, dirac_apply(p, y));
  const auto q = schrodinger_from_dirac(p);
  const auto ddy0 = second_difference(y0);
  const auto ddy1 = second_difference(y1);

  // Nodes where D(D y) only sees central differences.
  real_t res = 0.0;
  for (std::size_t j = 2; j + 2 < y.values.size(); ++j) {
    Eigen::Vector2cd rhs(-ddy0[j], -ddy1[j]);
    rhs += q.values[j] * y.values[j];
    res = std::max(res, (lhs.values[j] - rhs).norm());
  }
  return res;
}

bool is_exceptional_sufficient(const DiracPotential& p, real_t tol) {
  // Mean direction of p^2 fixes the candidate axis modulo pi.
  complex_t acc(0.0, 0.0);
  for (const auto& v : p.p.values)
    if (std::abs(v) > tol) acc += v * v / std::abs(v);
  if (std::abs(acc) == 0.0) {
    // Either p vanishes on the whole grid or the squared phases cancel.
    return std::all_of(p.p.values.begin(), p.p.values.end(),
                       [&](complex_t v) { return std::abs(v) <= tol; });
  }
  const complex_t axis = std::polar(1.0, -0.5 * std::arg(acc));
  for (const auto& v : p.p.values) {
    if (std::abs(v) <= tol) continue;
    if (std::abs((v * axis).imag()) > tol * (1.0 + std::abs(v))) return false;
  }
  return true;
}

MatrixPotential shift_potential(const MatrixPotential& q, real_t gamma) {
  MatrixPotential out = q;
  for (auto& M : out.values)
    M += gamma * Eigen::MatrixXcd::Identity(q.k, q.k);
  return out;
}

Eigen::Matrix2cd sigma_flip() {
  Eigen::Matrix2cd s;
  s << 0.0, -1.0, 1.0, 0.0;
  return s;
}

}  // namespace selfmod
