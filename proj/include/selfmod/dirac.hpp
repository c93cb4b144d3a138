#pragma once

#include "selfmod/grid.hpp"

#include <optional>

namespace selfmod {

// Complex Dirac potential p with its derivative channel p'.
struct DiracPotential {
  SampledScalarField p;
  SampledScalarField p_prime;

  DiracPotential() = default;
  DiracPotential(SampledScalarField p_values, SampledScalarField p_prime_values);

  // p' taken from finite differences of p.
  static DiracPotential from_values(SampledScalarField p_values);

  template <class F, class DF>
  static DiracPotential sample(const Grid& g, F&& f, DF&& df) {
    return DiracPotential(SampledScalarField::sample(g, f),
                          SampledScalarField::sample(g, df));
  }

  const Grid& grid() const { return p.grid; }
  DiracPotential conj() const { return {p.conj(), p_prime.conj()}; }

  // ||differentiate(p) - p'||_inf
  real_t derivative_mismatch() const;
};

struct SpinorField {
  Grid grid;
  std::vector<Eigen::Vector2cd> values;

  SpinorField() = default;
  explicit SpinorField(Grid g);  // zeros

  template <class F>
  static SpinorField sample(const Grid& g, F&& f) {
    SpinorField out(g);
    for (std::size_t j = 0; j < g.n(); ++j) out.values[j] = f(g.x(j));
    return out;
  }

  SampledScalarField component(int c) const;
};

class BoundaryConditionError : public Error {
 public:
  using Error::Error;
};

// i*sigma3*y' + P*y with P = [[0, p], [conj p, 0]].
SpinorField dirac_apply(const DiracPotential& p, const SpinorField& y);

// Q = i*sigma3*P' + P^2 = [[|p|^2, i p'], [-i conj(p'), |p|^2]].
MatrixPotential schrodinger_from_dirac(const DiracPotential& p);

// max over nodes 2..n-3 (central stencils only) of |D(D y) - (-y'' + Q y)|. The spinor must satisfy
// y(0) = y'(0) = 0 to within bc_tol (default scales with h^2).
real_t dirac_square_residual(const DiracPotential& p, const SpinorField& y,
                             std::optional<real_t> bc_tol = std::nullopt);

// Sufficient test for the exceptional case: arg p is constant modulo pi on
// {|p| > tol}. A false result means "not certified", not "non-exceptional".
bool is_exceptional_sufficient(const DiracPotential& p, real_t tol);

MatrixPotential shift_potential(const MatrixPotential& q, real_t gamma);

// The flip sigma = [[0, -1], [1, 0]] relating Q(conj p) to Q(p).
Eigen::Matrix2cd sigma_flip();

}  // namespace selfmod
