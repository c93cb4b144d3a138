#pragma once

#include "selfmod/grid.hpp"

#include <optional>
#include <vector>

namespace selfmod {

class WaveError : public Error {
 public:
  using Error::Error;
};

class FactorizationError : public Error {
 public:
  using Error::Error;
};

// Aligned discretization of u_tt - u_xx + Q u = 0 on [0, T]: m time nodes,
// dx = dt = T/(m-1), spatial nodes reaching past T.
struct WaveDiscretization {
  real_t T = 1.0;
  std::size_t m = 101;
  int k = 1;
  std::size_t margin = 2;  // spatial nodes beyond x = T
  real_t cfl = 1.0;        // dt/dx

  WaveDiscretization() = default;
  WaveDiscretization(real_t horizon, std::size_t time_nodes, int dim);

  real_t dt() const { return T / static_cast<real_t>(m - 1); }
  real_t dx() const { return dt() / cfl; }
  Grid time_grid() const { return Grid(dt(), m); }
  std::size_t spatial_nodes() const { return m + margin; }
  Grid spatial_grid() const { return Grid(dx(), spatial_nodes()); }
  void validate() const;
};

// Control f on the time grid: m rows, k channels.
using ControlSamples = Eigen::MatrixXcd;

// Solution of the boundary-controlled system at t = T on the spatial grid,
// (spatial_nodes) x k. Requires f(0) = 0 to within compat_tol.
Eigen::MatrixXcd solve_wave_ibvp(const MatrixPotential& q, const ControlSamples& f,
                                 const WaveDiscretization& disc,
                                 real_t compat_tol = 1e-12);

// Columns j*k + l: u^f(., T) restricted to x_0..x_{m-1} for the unit control
// at time node j in channel l. Rows i*k + a. Raw nodal values.
struct ControlMatrix {
  WaveDiscretization disc;
  Eigen::MatrixXcd W;
  std::vector<real_t> control_weights;  // trapezoid on t_0..t_{m-1}
  std::vector<real_t> state_weights;    // trapezoid on x_0..x_{m-1}
};

ControlMatrix assemble_control_operator(const MatrixPotential& q,
                                        const WaveDiscretization& disc);

// Gram matrix of the reachable states in trapezoid-orthonormal coordinates,
// C = (D_x^{1/2} W D_t^{-1/2})^* (D_x^{1/2} W D_t^{-1/2}). Hermitian.
struct ConnectingMatrix {
  WaveDiscretization disc;
  Eigen::MatrixXcd C;
  std::vector<real_t> control_weights;
};

ConnectingMatrix connecting_operator(const ControlMatrix& w);

// C = V^* V with V preserving every subspace of controls supported in
// [T - s, T]: in natural time order V is block lower triangular (k x k blocks)
// with Hermitian positive definite diagonal blocks.
struct TriangularFactor {
  int k = 1;
  std::size_t blocks = 0;
  Eigen::MatrixXcd V;

  // V^{-1} b by block forward substitution.
  Eigen::VectorXcd solve(const Eigen::VectorXcd& b) const;
  Eigen::VectorXcd apply(const Eigen::VectorXcd& x) const;
};

TriangularFactor nest_factorize(const Eigen::MatrixXcd& C, int k,
                                real_t tol_chol = 1e-10);
TriangularFactor nest_factorize(const ConnectingMatrix& C, real_t tol_chol = 1e-10);

// Block reversal of m blocks of size k (time or space reversal).
Eigen::MatrixXcd reversal_matrix(std::size_t m, int k);

// W_mod = Y V Y_0 (reversal on both sides), in orthonormal coordinates.
struct ModelControl {
  int k = 1;
  std::size_t blocks = 0;
  Eigen::MatrixXcd W_mod;
  TriangularFactor V;

  Eigen::VectorXcd apply(const Eigen::VectorXcd& f) const;
  Eigen::VectorXcd solve(const Eigen::VectorXcd& g) const;  // W_mod^{-1} g
};

ModelControl model_control(const TriangularFactor& V, const WaveDiscretization& disc);

enum class TestProfile {
  PowerWindow,  // (T - t)^2 t^{i+1} e_i
  FlatWindow,   // (T - t)^2 e_i
};

struct ExtractionOptions {
  std::size_t trim = 3;
  TestProfile profile = TestProfile::PowerWindow;
  real_t singular_tol = 1e-13;
  // D2 on W_mod^{-1} g: continue the control by zero before t = 0 (it is at
  // rest there) instead of a one-sided stencil at that end.
  bool control_rest_extension = true;
};

struct ModelPotential {
  MatrixPotential Q_mod;         // on the time grid [0, T]
  std::vector<bool> reliable;    // false inside the trim margins
  std::size_t trim = 0;
};

ModelPotential extract_model_potential(const ModelControl& w_mod,
                                       const WaveDiscretization& disc,
                                       const ExtractionOptions& options = {});

struct ConjugatorEstimate {
  Eigen::MatrixXcd phi;
  real_t residual = 0.0;      // sqrt(sum ||Q_mod - phi Q phi^*||^2 / sum ||Q||^2)
  real_t rms_residual = 0.0;  // sqrt(mean ||Q_mod - phi Q phi^*||^2)
  real_t sup_residual = 0.0;
};

// Constant unitary phi minimizing sum_j ||Q_mod_j - phi Q_j phi^*||_F^2 over
// nodes [first, last).
ConjugatorEstimate estimate_conjugator(const MatrixPotential& q_mod,
                                       const MatrixPotential& q,
                                       std::size_t first, std::size_t last);
// Same over nodes with tau in [trim, T - trim].
ConjugatorEstimate estimate_conjugator(const MatrixPotential& q_mod,
                                       const MatrixPotential& q, real_t trim);

// Residuals of a given phi on nodes [first, last).
ConjugatorEstimate evaluate_conjugator(const MatrixPotential& q_mod,
                                       const MatrixPotential& q,
                                       const Eigen::MatrixXcd& phi,
                                       std::size_t first, std::size_t last);

struct WaveModelOptions {
  std::optional<real_t> gamma_shift;  // add gamma I, run, subtract gamma I
  ExtractionOptions extraction;
  real_t tol_chol = 1e-10;
};

struct WaveModelResult {
  WaveDiscretization disc;
  MatrixPotential Q_on_grid;   // input sampled on the time grid
  ModelPotential model;
  ConjugatorEstimate conjugator;
  real_t connecting_hermitian_defect = 0.0;
  real_t cholesky_residual = 0.0;  // ||V^*V - C||_F / ||C||_F
  real_t connecting_identity_defect = 0.0;  // ||C - I||_F
  real_t factor_identity_defect = 0.0;      // ||V - I||_F
  // Retained for diagnostics and binary dumps.
  Eigen::MatrixXcd W, C, V, W_mod;
};

// Samples q onto the aligned time grid (q must cover [0, T] on a grid whose
// step divides dt, or be sampled directly on it).
MatrixPotential resample_to(const MatrixPotential& q, const Grid& target);

WaveModelResult wave_model_pipeline(const MatrixPotential& q,
                                    const WaveDiscretization& disc,
                                    const WaveModelOptions& options = {});

}  // namespace selfmod
