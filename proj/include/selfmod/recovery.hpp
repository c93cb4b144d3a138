#pragma once

#include "selfmod/dirac.hpp"
#include "selfmod/unitary.hpp"

#include <optional>
#include <string>
#include <vector>

namespace selfmod {

class LinearlyIndependentError : public Error {
 public:
  using Error::Error;
};

class InconsistentInputError : public Error {
 public:
  using Error::Error;
};

// Thresholds for the recovery stages. Unset entries resolve from the grid
// step and the data scale, see resolve().
struct RecoveryTolerances {
  std::optional<real_t> zero;         // |p(0)| and ||z2|| cut-off
  std::optional<real_t> dependence;   // normalized smallest singular value
  std::optional<real_t> consistency;  // ||p_hat| - |p|| / (1 + ||p||)
  std::optional<real_t> angle;        // min |sin(kappa1 - kappa2)| for case 3a
  std::optional<real_t> negative_trace;
  bool canonical_orientation = true;  // pipeline only

  struct Resolved {
    real_t zero, dependence, consistency, angle, negative_trace;
  };
  Resolved resolve(real_t h, real_t data_scale) const;
};

// Q = |p|^2 I + [[r, z], [conj z, -r]]
struct RZDecomposition {
  Grid grid;
  std::vector<real_t> p_abs_sq;
  std::vector<real_t> r;
  std::vector<complex_t> z;

  real_t scale() const;  // max_j sqrt(r^2 + |z|^2)
};

RZDecomposition decompose(const MatrixPotential& q_scrambled,
                          const RecoveryTolerances& tol = {});

enum class DependencyCase { AllZero, RankOne, RankTwo };
std::string to_string(DependencyCase c);

struct AnnihilatorResult {
  Eigen::Vector3d c = Eigen::Vector3d::UnitX();
  real_t residual = 0.0;
  DependencyCase dependency_case = DependencyCase::AllZero;
  Eigen::Vector3d singular_values = Eigen::Vector3d::Zero();
};

// Unit c with c1 r + c2 Re z + c3 Im z = 0 on the grid, from the right singular
// vector of the smallest singular value of [r | Re z | Im z].
AnnihilatorResult find_annihilator(const RZDecomposition& d,
                                   const RecoveryTolerances& tol = {});

struct AnnihilatorAngles {
  real_t gamma1 = 0.0;  // [0, 2 pi)
  real_t phi1 = 0.0;    // [0, pi/2]
};

// c ~ (cos 2phi1, sin 2phi1 cos gamma1, sin 2phi1 sin gamma1)
AnnihilatorAngles angles_from_annihilator(const Eigen::Vector3d& c);

struct Z2Result {
  SampledScalarField z2;
  U2Matrix theta1;
  real_t r2_sup = 0.0;
  // max |z2 - closed form| with the closed form
  // -sin(2phi1) r + cos^2(phi1) e^{-i gamma1} z - sin^2(phi1) e^{i gamma1} conj(z)
  real_t closed_form_discrepancy = 0.0;
};

// theta1 = u2_from_params(0, 0, gamma1, phi1); z2 is the (1,2) entry of
// theta1 Q theta1^*. Throws if the diagonal part r2 is not annihilated.
Z2Result compute_z2(const MatrixPotential& q_scrambled, real_t gamma1,
                    real_t phi1, const RecoveryTolerances& tol = {});

enum class RecoveryKind { Unique, ConjugatePair, Inconsistent };
enum class RecoveryCase { Case1, Case2, Case3a, Case3b };
std::string to_string(RecoveryKind k);
std::string to_string(RecoveryCase c);

struct PhaseDiagnostics {
  real_t modulus_residual = 0.0;  // max | |p_hat| - |p| |
  real_t kappa0 = 0.0;
  std::optional<std::size_t> x0, x1, x2;  // node indices
  real_t sin_separation = 0.0;            // |sin(kappa(x1) - kappa(x2))|
  real_t unit_circle_defect = 0.0;        // | |(cos, sin)| - 1 | before renormalizing
  real_t arccos_argument = 0.0;
  real_t imag_defect = 0.0;               // case 3b: max |Im(e^{-i psi} z2)|
  std::string message;
};

struct PipelineDiagnostics {
  AnnihilatorResult annihilator;
  AnnihilatorAngles angles;
  real_t r2_sup = 0.0;
  real_t closed_form_discrepancy = 0.0;
  bool orientation_flipped = false;
  RecoveryTolerances::Resolved tolerances{};
};

struct RecoveryOutcome {
  RecoveryKind kind = RecoveryKind::Inconsistent;
  RecoveryCase case_taken = RecoveryCase::Case1;
  std::vector<DiracPotential> candidates;
  PhaseDiagnostics diagnostics;
  std::optional<PipelineDiagnostics> pipeline;
};

// Solves |p_hat| = p_abs, p_hat' = z2 through the cases 1, 2, 3a, 3b.
RecoveryOutcome recover_phat(const std::vector<real_t>& p_abs,
                             const SampledScalarField& z2,
                             const RecoveryTolerances& tol = {});

// decompose -> find_annihilator -> angles -> compute_z2 -> recover_phat.
// With canonical_orientation the reported class is the member of
// {[p_hat], [conj p_hat]} with Im <p_hat, p_hat'> >= 0, so the output depends
// only on the unitary orbit of the input.
RecoveryOutcome recover_pipeline(const MatrixPotential& q_scrambled,
                                 const RecoveryTolerances& tol = {});

// Im sum_j w_j conj(p_j) p'_j; flips sign under conjugation, invariant under
// constant phases.
real_t orientation(const DiracPotential& p);

struct CandidateMatch {
  std::optional<real_t> phase_to_p;       // candidate = e^{ia} p
  std::optional<real_t> phase_to_conj_p;  // candidate = e^{ia} conj p
};

struct TruthReport {
  std::vector<CandidateMatch> candidates;
  int matches = 0;  // matched (candidate, {p, conj p}) pairs
  bool any_match() const { return matches > 0; }
  bool exactly_one() const { return matches == 1; }
};

TruthReport resolve_against_truth(const RecoveryOutcome& outcome,
                                  const DiracPotential& p_true, real_t tol);

}  // namespace selfmod
