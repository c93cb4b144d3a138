#include "selfmod/unitary.hpp"

#include <unsupported/Eigen/NonLinearOptimization>
#include <unsupported/Eigen/NumericalDiff>

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>

namespace selfmod {

namespace {

constexpr real_t TWO_PI = 2.0 * std::numbers::pi;

real_t wrap_angle(real_t a) {
  real_t r = std::fmod(a, TWO_PI);
  if (r < 0.0) r += TWO_PI;
  if (r >= TWO_PI) r = 0.0;
  return r;
}

U2Matrix u2_conjugation_only(real_t beta, real_t gamma, real_t phi) {
  return u2_from_params({0.0, beta, gamma, phi});
}

// Precomputed K_{abcd} = sum_j Q1_{ab} Q2_{cd} so that
// sum_j tr(Q1_j theta Q2_j theta^*) = sum K_{abcd} theta_{bc} conj(theta_{ad}).
struct ConjugationObjective {
  std::array<complex_t, 16> K{};
  real_t norms = 0.0;  // sum_j ||Q1_j||^2 + ||Q2_j||^2

  ConjugationObjective(const MatrixPotential& q1, const MatrixPotential& q2,
                       std::size_t first, std::size_t last) {
    for (std::size_t j = first; j < last; ++j) {
      const auto& A = q1.values[j];
      const auto& B = q2.values[j];
      norms += A.squaredNorm() + B.squaredNorm();
      for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b)
          for (int c = 0; c < 2; ++c)
            for (int d = 0; d < 2; ++d)
              K[((a * 2 + b) * 2 + c) * 2 + d] += A(a, b) * B(c, d);
    }
  }

  real_t operator()(const U2Matrix& t) const {
    complex_t s(0.0, 0.0);
    for (int a = 0; a < 2; ++a)
      for (int b = 0; b < 2; ++b)
        for (int c = 0; c < 2; ++c)
          for (int d = 0; d < 2; ++d)
            s += K[((a * 2 + b) * 2 + c) * 2 + d] * t(b, c) *
                 std::conj(t(a, d));
    return std::max(0.0, norms - 2.0 * s.real());
  }
};

// Stacked residual entries of Q1_j - theta Q2_j theta^* for LM.
struct ConjugationResidual {
  using Scalar = double;
  using InputType = Eigen::VectorXd;
  using ValueType = Eigen::VectorXd;
  using JacobianType = Eigen::MatrixXd;
  enum { InputsAtCompileTime = Eigen::Dynamic, ValuesAtCompileTime = Eigen::Dynamic };

  const MatrixPotential* q1;
  const MatrixPotential* q2;
  std::size_t first;
  std::size_t last;

  int inputs() const { return 3; }
  int values() const { return static_cast<int>(8 * (last - first)); }

  int operator()(const Eigen::VectorXd& x, Eigen::VectorXd& f) const {
    const U2Matrix t = u2_conjugation_only(x(0), x(1), x(2));
    Eigen::Index o = 0;
    for (std::size_t j = first; j < last; ++j) {
      const Eigen::Matrix2cd d = q1->values[j] - t * q2->values[j] * t.adjoint();
      for (int r = 0; r < 2; ++r)
        for (int c = 0; c < 2; ++c) {
          f(o++) = d(r, c).real();
          f(o++) = d(r, c).imag();
        }
    }
    return 0;
  }
};

real_t sup_conjugation_residual(const MatrixPotential& q1,
                                const MatrixPotential& q2,
                                const Eigen::MatrixXcd& theta,
                                std::size_t first, std::size_t last) {
  real_t m = 0.0;
  for (std::size_t j = first; j < last; ++j)
    m = std::max(m, (q1.values[j] - theta * q2.values[j] * theta.adjoint()).norm());
  return m;
}

}  // namespace

U2Params U2Params::normalized() const {
  if (phi < -1e-12 || phi > 0.5 * std::numbers::pi + 1e-12)
    throw Error("U2Params: phi must lie in [0, pi/2]");
  return {wrap_angle(alpha), wrap_angle(beta), wrap_angle(gamma),
          std::clamp(phi, 0.0, 0.5 * std::numbers::pi)};
}

U2Matrix u2_from_params(const U2Params& p) {
  const real_t c = std::cos(p.phi);
  const real_t s = std::sin(p.phi);
  const complex_t eb = std::polar(1.0, p.beta);
  const complex_t eg = std::polar(1.0, p.gamma);
  U2Matrix t;
  t << c, s * eg, -s * eb, c * eb * eg;
  return std::polar(1.0, p.alpha) * t;
}

real_t unitarity_defect(const Eigen::MatrixXcd& theta) {
  return (theta * theta.adjoint() -
          Eigen::MatrixXcd::Identity(theta.rows(), theta.cols()))
      .norm();
}

U2Params params_from_u2(const U2Matrix& t, real_t tol) {
  if (unitarity_defect(t) > tol)
    throw NotUnitaryError("params_from_u2: matrix is not unitary");
  // Entries: t11 = e^{ia} cos, t12 = e^{i(a+g)} sin, t21 = -e^{i(a+b)} sin,
  // t22 = e^{i(a+b+g)} cos.
  const real_t c = std::abs(t(0, 0));
  const real_t s = std::abs(t(0, 1));
  const real_t phi = std::atan2(s, c);
  constexpr real_t degenerate = 1e-14;
  U2Params out;
  out.phi = phi;
  if (s <= degenerate) {
    out.alpha = std::arg(t(0, 0));
    out.gamma = 0.0;
    out.beta = std::arg(t(1, 1)) - out.alpha;
  } else if (c <= degenerate) {
    out.gamma = 0.0;
    out.alpha = std::arg(t(0, 1));
    out.beta = std::arg(-t(1, 0)) - out.alpha;
  } else {
    out.alpha = std::arg(t(0, 0));
    out.gamma = std::arg(t(0, 1)) - out.alpha;
    out.beta = std::arg(-t(1, 0)) - out.alpha;
  }
  return out.normalized();
}

U2Params random_u2_params(std::mt19937_64& rng) {
  std::uniform_real_distribution<real_t> angle(0.0, TWO_PI);
  std::uniform_real_distribution<real_t> unit(0.0, 1.0);
  U2Params p;
  p.alpha = angle(rng);
  p.beta = angle(rng);
  p.gamma = angle(rng);
  p.phi = std::acos(std::sqrt(unit(rng)));
  return p;
}

MatrixPotential conjugate_potential(const MatrixPotential& q,
                                    const Eigen::MatrixXcd& theta) {
  if (theta.rows() != q.k || theta.cols() != q.k)
    throw Error("conjugate_potential: dimension mismatch");
  const auto id = Eigen::MatrixXcd::Identity(q.k, q.k);
  if (theta == id) return q;
  MatrixPotential out(q.grid, q.k, q.hermitian);
  // The scalar part commutes with theta; only the traceless part is rotated.
  for (std::size_t j = 0; j < q.size(); ++j) {
    const complex_t s = q.values[j].trace() / static_cast<real_t>(q.k);
    out.values[j] = theta * (q.values[j] - s * id) * theta.adjoint();
    out.values[j].diagonal().array() += s;
  }
  return out;
}

std::optional<real_t> dirac_shape_equivalent(const SampledScalarField& p1,
                                             const SampledScalarField& p2,
                                             real_t tol) {
  require_same_grid(p1.grid, p2.grid, "dirac_shape_equivalent");
  if (p1.sup_norm() == 0.0 && p2.sup_norm() == 0.0) return 0.0;
  // Correlation sum rather than pointwise ratios: robust at zeros of p2.
  complex_t corr(0.0, 0.0);
  for (std::size_t j = 0; j < p1.size(); ++j)
    corr += p1.grid.weight(j) * p1[j] * std::conj(p2[j]);
  const real_t a = std::abs(corr) > 0.0 ? wrap_angle(std::arg(corr)) : 0.0;
  const complex_t rot = std::polar(1.0, a);
  real_t sup = 0.0;
  for (std::size_t j = 0; j < p1.size(); ++j)
    sup = std::max(sup, std::abs(p1[j] - rot * p2[j]));
  if (sup <= tol * (1.0 + p2.sup_norm())) return a;
  return std::nullopt;
}

std::optional<real_t> dirac_shape_equivalent(const DiracPotential& p1,
                                             const DiracPotential& p2,
                                             real_t tol) {
  return dirac_shape_equivalent(p1.p, p2.p, tol);
}

U2Fit fit_u2_conjugator(const MatrixPotential& q1, const MatrixPotential& q2,
                        std::size_t first, std::size_t last,
                        const U2FitOptions& options) {
  require_same_grid(q1.grid, q2.grid, "fit_u2_conjugator");
  if (q1.k != 2 || q2.k != 2)
    throw Error("fit_u2_conjugator: potentials must be 2x2");
  last = std::min(last, q1.size());
  if (first >= last) throw Error("fit_u2_conjugator: empty node range");

  const ConjugationObjective objective(q1, q2, first, last);
  const int ns = std::max(options.seeds_per_axis, 2);
  struct Seed {
    real_t value;
    Eigen::Vector3d x;
  };
  std::vector<Seed> seeds;
  seeds.reserve(static_cast<std::size_t>(ns) * ns * ns);
  for (int ib = 0; ib < ns; ++ib)
    for (int ig = 0; ig < ns; ++ig)
      for (int ip = 0; ip < ns; ++ip) {
        const real_t b = TWO_PI * ib / ns;
        const real_t g = TWO_PI * ig / ns;
        const real_t f = 0.5 * std::numbers::pi * ip / (ns - 1);
        seeds.push_back({objective(u2_conjugation_only(b, g, f)), {b, g, f}});
      }
  const auto keep = std::min<std::size_t>(
      std::max(options.refined_seeds, 1), seeds.size());
  std::partial_sort(seeds.begin(), seeds.begin() + static_cast<long>(keep),
                    seeds.end(), [](const Seed& a, const Seed& b) {
                      return a.value < b.value;
                    });

  ConjugationResidual residual{&q1, &q2, first, last};
  U2Fit best;
  best.sum_squares = std::numeric_limits<real_t>::infinity();
  for (std::size_t s = 0; s < keep; ++s) {
    Eigen::VectorXd x = seeds[s].x;
    Eigen::NumericalDiff<ConjugationResidual> diff(residual);
    Eigen::LevenbergMarquardt<Eigen::NumericalDiff<ConjugationResidual>> lm(diff);
    lm.parameters.maxfev = 4 * options.refine_steps;
    lm.parameters.ftol = 1e-15;
    lm.parameters.xtol = 1e-15;
    lm.minimize(x);
    U2Matrix t = u2_conjugation_only(x(0), x(1), x(2));
    real_t value = objective(t);
    if (value > seeds[s].value) {
      t = u2_conjugation_only(seeds[s].x(0), seeds[s].x(1), seeds[s].x(2));
      value = seeds[s].value;
    }
    if (value < best.sum_squares) {
      best.theta = t;
      best.sum_squares = value;
    }
  }
  best.sup_residual = sup_conjugation_residual(q1, q2, best.theta, first, last);
  return best;
}

std::optional<U2Matrix> schrodinger_shape_equivalent(
    const MatrixPotential& q1, const MatrixPotential& q2, real_t tol,
    const U2FitOptions& options) {
  require_same_grid(q1.grid, q2.grid, "schrodinger_shape_equivalent");
  if (q1.k != 2 || q2.k != 2)
    throw Error("schrodinger_shape_equivalent: potentials must be 2x2");
  if (sup_conjugation_residual(q1, q2, U2Matrix::Identity(), 0, q1.size()) <= tol)
    return U2Matrix::Identity();
  const auto fit = fit_u2_conjugator(q1, q2, 0, q1.size(), options);
  if (fit.sup_residual <= tol) return fit.theta;
  return std::nullopt;
}

}  // namespace selfmod
