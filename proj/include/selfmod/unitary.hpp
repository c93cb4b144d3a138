#pragma once

#include "selfmod/dirac.hpp"
#include "selfmod/grid.hpp"

#include <optional>
#include <random>

namespace selfmod {

// theta = e^{i alpha} diag(1, e^{i beta}) Rot(phi) diag(1, e^{i gamma}),
// Rot(phi) = [[cos phi, sin phi], [-sin phi, cos phi]].
struct U2Params {
  real_t alpha = 0.0;
  real_t beta = 0.0;
  real_t gamma = 0.0;
  real_t phi = 0.0;  // in [0, pi/2]

  // Angles reduced to [0, 2*pi); phi checked.
  U2Params normalized() const;
};

using U2Matrix = Eigen::Matrix2cd;

class NotUnitaryError : public Error {
 public:
  using Error::Error;
};

U2Matrix u2_from_params(const U2Params& params);

// Inverse of u2_from_params up to gauge. At phi = 0 or pi/2 only one
// combination of beta and gamma is determined; gamma is set to 0 there.
U2Params params_from_u2(const U2Matrix& theta, real_t tol = 1e-10);

real_t unitarity_defect(const Eigen::MatrixXcd& theta);  // ||theta theta^* - I||_F

// Haar-like sample: uniform alpha, beta, gamma and phi = arccos(sqrt(u)).
U2Params random_u2_params(std::mt19937_64& rng);

// Nodewise theta Q theta^*.
MatrixPotential conjugate_potential(const MatrixPotential& q,
                                    const Eigen::MatrixXcd& theta);

// Constant a in [0, 2*pi) with p1 = e^{ia} p2, if the sup residual stays
// within tol * (1 + ||p2||_inf).
std::optional<real_t> dirac_shape_equivalent(const DiracPotential& p1,
                                             const DiracPotential& p2,
                                             real_t tol);
std::optional<real_t> dirac_shape_equivalent(const SampledScalarField& p1,
                                             const SampledScalarField& p2,
                                             real_t tol);

// Best constant theta in U(2) for Q1 ~ theta Q2 theta^* over the nodes
// [first, last). Seeds a (beta, gamma, phi) lattice, then refines the best
// seeds with Levenberg-Marquardt.
struct U2FitOptions {
  int seeds_per_axis = 24;
  int refine_steps = 50;
  int refined_seeds = 3;
};

struct U2Fit {
  U2Matrix theta;
  real_t sum_squares = 0.0;    // sum_j ||Q1_j - theta Q2_j theta^*||_F^2
  real_t sup_residual = 0.0;   // max_j ||Q1_j - theta Q2_j theta^*||_F
};

U2Fit fit_u2_conjugator(const MatrixPotential& q1, const MatrixPotential& q2,
                        std::size_t first, std::size_t last,
                        const U2FitOptions& options = {});

std::optional<U2Matrix> schrodinger_shape_equivalent(
    const MatrixPotential& q1, const MatrixPotential& q2, real_t tol,
    const U2FitOptions& options = {});

}  // namespace selfmod
