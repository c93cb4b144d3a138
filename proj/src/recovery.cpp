#include "selfmod/recovery.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace selfmod {

namespace {

constexpr real_t PI = std::numbers::pi;

real_t sup_abs(const std::vector<real_t>& v) {
  real_t m = 0.0;
  for (real_t x : v) m = std::max(m, std::abs(x));
  return m;
}

std::size_t argmax_abs(const SampledScalarField& f) {
  std::size_t best = 0;
  for (std::size_t j = 1; j < f.size(); ++j)
    if (std::abs(f[j]) > std::abs(f[best])) best = j;
  return best;
}

// |Im(conj(a) b)| = |a| |b| |sin(arg b - arg a)|
real_t cross(complex_t a, complex_t b) {
  return std::abs((std::conj(a) * b).imag());
}

real_t modulus_residual(const SampledScalarField& p_hat,
                        const std::vector<real_t>& p_abs) {
  real_t m = 0.0;
  for (std::size_t j = 0; j < p_abs.size(); ++j)
    m = std::max(m, std::abs(std::abs(p_hat[j]) - p_abs[j]));
  return m;
}

}  // namespace

RecoveryTolerances::Resolved RecoveryTolerances::resolve(real_t h,
                                                         real_t data_scale) const {
  Resolved r{};
  r.zero = zero.value_or(1e-8 * (1.0 + data_scale));
  r.dependence = dependence.value_or(std::max(1e-6, 50.0 * h * h));
  r.consistency = consistency.value_or(std::max(1e-6, 100.0 * h * h));
  r.angle = angle.value_or(10.0 * r.consistency);
  r.negative_trace = negative_trace.value_or(1e-10 * (1.0 + data_scale));
  return r;
}

std::string to_string(DependencyCase c) {
  switch (c) {
    case DependencyCase::AllZero: return "all-zero";
    case DependencyCase::RankOne: return "rank-one";
    case DependencyCase::RankTwo: return "rank-two";
  }
  return "unknown";
}

std::string to_string(RecoveryKind k) {
  switch (k) {
    case RecoveryKind::Unique: return "Unique";
    case RecoveryKind::ConjugatePair: return "ConjugatePair";
    case RecoveryKind::Inconsistent: return "Inconsistent";
  }
  return "unknown";
}

std::string to_string(RecoveryCase c) {
  switch (c) {
    case RecoveryCase::Case1: return "1";
    case RecoveryCase::Case2: return "2";
    case RecoveryCase::Case3a: return "3a";
    case RecoveryCase::Case3b: return "3b";
  }
  return "unknown";
}

real_t RZDecomposition::scale() const {
  real_t m = 0.0;
  for (std::size_t j = 0; j < r.size(); ++j)
    m = std::max(m, std::sqrt(r[j] * r[j] + std::norm(z[j])));
  return m;
}

RZDecomposition decompose(const MatrixPotential& q, const RecoveryTolerances& tol) {
  if (q.k != 2) throw Error("decompose: potential must be 2x2");
  const real_t scale = q.sup_norm();
  const auto t = tol.resolve(q.grid.h(), scale);
  if (q.hermitian_defect() > 1e-8 * (1.0 + scale))
    throw InconsistentInputError("decompose: potential is not Hermitian");

  RZDecomposition d;
  d.grid = q.grid;
  d.p_abs_sq.resize(q.size());
  d.r.resize(q.size());
  d.z.resize(q.size());
  for (std::size_t j = 0; j < q.size(); ++j) {
    const auto& M = q.values[j];
    d.p_abs_sq[j] = 0.5 * (M(0, 0).real() + M(1, 1).real());
    d.r[j] = 0.5 * (M(0, 0).real() - M(1, 1).real());
    d.z[j] = M(0, 1);
    if (d.p_abs_sq[j] < -t.negative_trace)
      throw InconsistentInputError(
          "decompose: negative trace part at node " + std::to_string(j) +
          "; not the square of a Dirac operator");
  }
  return d;
}

AnnihilatorResult find_annihilator(const RZDecomposition& d,
                                   const RecoveryTolerances& tol) {
  const auto n = static_cast<Eigen::Index>(d.r.size());
  const auto t = tol.resolve(d.grid.h(), d.scale());
  Eigen::MatrixXd A(n, 3);
  for (Eigen::Index j = 0; j < n; ++j) {
    const auto u = static_cast<std::size_t>(j);
    A(j, 0) = d.r[u];
    A(j, 1) = d.z[u].real();
    A(j, 2) = d.z[u].imag();
  }

  AnnihilatorResult out;
  if (A.cwiseAbs().maxCoeff() <= t.zero) {
    out.dependency_case = DependencyCase::AllZero;
    return out;
  }

  Eigen::JacobiSVD<Eigen::MatrixXd> svd(A, Eigen::ComputeThinV);
  const Eigen::Vector3d s = svd.singularValues();
  const Eigen::Matrix3d V = svd.matrixV();
  out.singular_values = s;
  out.residual = s(0) > 0.0 ? s(2) / s(0) : 0.0;
  if (out.residual > t.dependence)
    throw LinearlyIndependentError(
        "find_annihilator: r, Re z, Im z are linearly independent "
        "(normalized smallest singular value " + std::to_string(out.residual) + ")");

  if (s(1) / s(0) <= t.dependence) {
    out.dependency_case = DependencyCase::RankOne;
    // Two-dimensional null space; prefer the member closest to (1, 0, 0),
    // which leaves an already diagonal-free input untouched.
    const Eigen::Vector3d e1 = Eigen::Vector3d::UnitX();
    Eigen::Vector3d c = V.col(1) * V.col(1).dot(e1) + V.col(2) * V.col(2).dot(e1);
    out.c = c.norm() > 1e-8 ? c.normalized() : Eigen::Vector3d(V.col(2));
  } else {
    out.dependency_case = DependencyCase::RankTwo;
    out.c = V.col(2);
  }
  // Deterministic sign: first clearly nonzero component positive.
  for (int i = 0; i < 3; ++i) {
    if (std::abs(out.c(i)) > 1e-12) {
      if (out.c(i) < 0.0) out.c = -out.c;
      break;
    }
  }
  return out;
}

AnnihilatorAngles angles_from_annihilator(const Eigen::Vector3d& c_in) {
  const real_t norm = c_in.norm();
  if (!(norm > 0.0)) throw Error("angles_from_annihilator: zero vector");
  const Eigen::Vector3d c = c_in / norm;
  AnnihilatorAngles a;
  const real_t two_phi = std::acos(std::clamp(c(0), -1.0, 1.0));
  a.phi1 = 0.5 * two_phi;
  if (std::hypot(c(1), c(2)) > 1e-14) {
    a.gamma1 = std::atan2(c(2), c(1));
    if (a.gamma1 < 0.0) a.gamma1 += 2.0 * PI;
  }
  return a;
}

Z2Result compute_z2(const MatrixPotential& q, real_t gamma1, real_t phi1,
                    const RecoveryTolerances& tol) {
  const auto d = decompose(q, tol);
  const real_t scale = d.scale();
  const auto t = tol.resolve(q.grid.h(), scale);

  Z2Result out;
  out.theta1 = u2_from_params({0.0, 0.0, gamma1, phi1});
  out.z2 = SampledScalarField(q.grid);
  const real_t s2 = std::sin(2.0 * phi1);
  const real_t c1sq = std::cos(phi1) * std::cos(phi1);
  const real_t s1sq = std::sin(phi1) * std::sin(phi1);
  const complex_t eg = std::polar(1.0, gamma1);
  for (std::size_t j = 0; j < q.size(); ++j) {
    const Eigen::Matrix2cd M = out.theta1 * q.values[j] * out.theta1.adjoint();
    out.z2[j] = M(0, 1);
    out.r2_sup = std::max(out.r2_sup, 0.5 * std::abs(M(0, 0).real() - M(1, 1).real()));
    const complex_t closed = -s2 * d.r[j] + c1sq * std::conj(eg) * d.z[j] -
                             s1sq * eg * std::conj(d.z[j]);
    out.closed_form_discrepancy =
        std::max(out.closed_form_discrepancy, std::abs(closed - out.z2[j]));
  }
  if (out.r2_sup > std::max(10.0 * t.dependence * scale, t.zero))
    throw InconsistentInputError("compute_z2: diagonal part r2 not annihilated (" +
                                 std::to_string(out.r2_sup) + ")");
  return out;
}

RecoveryOutcome recover_phat(const std::vector<real_t>& p_abs,
                             const SampledScalarField& z2,
                             const RecoveryTolerances& tol) {
  if (p_abs.size() != z2.size())
    throw GridError("recover_phat: |p| and z2 lengths differ");
  const Grid& grid = z2.grid;
  const real_t p_scale = sup_abs(p_abs);
  const auto t = tol.resolve(grid.h(), std::max(p_scale, z2.sup_norm()));
  const real_t consistency_bound = t.consistency * (1.0 + p_scale);

  RecoveryOutcome out;
  auto& diag = out.diagnostics;
  const real_t p0 = p_abs.front();
  const auto prefix = integrate_prefix(z2);

  auto finish = [&](RecoveryKind kind) {
    out.kind = kind;
    diag.modulus_residual = 0.0;
    for (const auto& c : out.candidates)
      diag.modulus_residual =
          std::max(diag.modulus_residual, modulus_residual(c.p, p_abs));
    if (out.kind != RecoveryKind::Inconsistent &&
        diag.modulus_residual > consistency_bound) {
      out.kind = RecoveryKind::Inconsistent;
      diag.message = "modulus constraint violated: " +
                     std::to_string(diag.modulus_residual);
    }
    return out;
  };

  if (p0 <= t.zero) {
    out.case_taken = RecoveryCase::Case1;
    out.candidates.emplace_back(prefix, z2);
    return finish(RecoveryKind::Unique);
  }

  if (z2.sup_norm() <= t.zero) {
    out.case_taken = RecoveryCase::Case2;
    SampledScalarField constant(grid, std::vector<complex_t>(grid.n(), p0));
    out.candidates.emplace_back(constant, SampledScalarField(grid));
    return finish(RecoveryKind::Unique);
  }

  // Case 3: cos(kappa0) Re I(x) + sin(kappa0) Im I(x) = b(x).
  auto rhs = [&](std::size_t j) {
    return (p_abs[j] * p_abs[j] - p0 * p0 - std::norm(prefix[j])) / (2.0 * p0);
  };
  const std::size_t x0 = argmax_abs(prefix);
  diag.x0 = x0;
  if (std::abs(prefix[x0]) <= t.zero) {
    // z2 is not identically zero but all its prefix integrals vanish.
    diag.message = "prefix integrals of z2 vanish";
    out.case_taken = RecoveryCase::Case2;
    return finish(RecoveryKind::Inconsistent);
  }

  // Pair (x1, x2) maximizing the determinant |Im(conj I1 I2)|, by alternating
  // maximization started from x0.
  std::size_t i1 = x0, i2 = x0;
  for (int sweep = 0; sweep < 3; ++sweep) {
    std::size_t best = i2;
    real_t best_val = -1.0;
    for (std::size_t j = 0; j < prefix.size(); ++j) {
      if (std::abs(prefix[j]) <= t.zero) continue;
      const real_t v = cross(prefix[i1], prefix[j]);
      if (v > best_val) {
        best_val = v;
        best = j;
      }
    }
    i2 = best;
    std::swap(i1, i2);
  }
  const complex_t I1 = prefix[i1];
  const complex_t I2 = prefix[i2];
  const real_t det = (std::conj(I1) * I2).imag();
  diag.sin_separation = std::abs(det) / (std::abs(I1) * std::abs(I2));

  if (diag.sin_separation > t.angle) {
    out.case_taken = RecoveryCase::Case3a;
    diag.x1 = i1;
    diag.x2 = i2;
    // [Re I1, Im I1; Re I2, Im I2] (c, s)^T = (b1, b2)^T
    const real_t b1 = rhs(i1), b2 = rhs(i2);
    const real_t c = (b1 * I2.imag() - b2 * I1.imag()) / (I1.real() * I2.imag() - I1.imag() * I2.real());
    const real_t s = (I1.real() * b2 - I2.real() * b1) / (I1.real() * I2.imag() - I1.imag() * I2.real());
    diag.unit_circle_defect = std::abs(std::hypot(c, s) - 1.0);
    diag.kappa0 = std::atan2(s, c);
    SampledScalarField p_hat(grid);
    const complex_t start = std::polar(p0, diag.kappa0);
    for (std::size_t j = 0; j < grid.n(); ++j) p_hat[j] = start + prefix[j];
    out.candidates.emplace_back(p_hat, z2);
    if (diag.unit_circle_defect > std::sqrt(t.consistency)) {
      diag.message = "linear system for (cos kappa0, sin kappa0) off the unit circle";
      return finish(RecoveryKind::Inconsistent);
    }
    return finish(RecoveryKind::Unique);
  }

  // Case 3b: z2 real up to a constant phase psi.
  out.case_taken = RecoveryCase::Case3b;
  const real_t psi = std::arg(prefix[x0]);
  const complex_t unrotate = std::polar(1.0, -psi);
  SampledScalarField z2_real(grid), j_real(grid);
  for (std::size_t j = 0; j < grid.n(); ++j) {
    const complex_t v = unrotate * z2[j];
    diag.imag_defect = std::max(diag.imag_defect, std::abs(v.imag()));
    z2_real[j] = v.real();
    j_real[j] = (unrotate * prefix[j]).real();
  }
  if (diag.imag_defect > t.consistency * (1.0 + z2.sup_norm())) {
    diag.message = "z2 is not real up to a constant phase";
    return finish(RecoveryKind::Inconsistent);
  }
  real_t arg = rhs(x0) / std::abs(prefix[x0]);
  diag.arccos_argument = arg;
  if (std::abs(arg) > 1.0 + t.consistency) {
    diag.message = "arccos argument outside [-1, 1]: " + std::to_string(arg);
    return finish(RecoveryKind::Inconsistent);
  }
  arg = std::clamp(arg, -1.0, 1.0);
  const real_t kappa = std::acos(arg);
  diag.kappa0 = kappa;
  for (real_t sign : {1.0, -1.0}) {
    SampledScalarField p_hat(grid);
    const complex_t start = std::polar(p0, sign * kappa);
    for (std::size_t j = 0; j < grid.n(); ++j) p_hat[j] = start + j_real[j];
    out.candidates.emplace_back(p_hat, z2_real);
  }
  return finish(RecoveryKind::ConjugatePair);
}

real_t orientation(const DiracPotential& p) {
  return weighted_inner_product(p.p, p.p_prime).imag();
}

RecoveryOutcome recover_pipeline(const MatrixPotential& q,
                                 const RecoveryTolerances& tol) {
  const auto d = decompose(q, tol);
  PipelineDiagnostics pd;
  pd.annihilator = find_annihilator(d, tol);
  pd.angles = angles_from_annihilator(pd.annihilator.c);
  const auto z2 = compute_z2(q, pd.angles.gamma1, pd.angles.phi1, tol);
  pd.r2_sup = z2.r2_sup;
  pd.closed_form_discrepancy = z2.closed_form_discrepancy;

  std::vector<real_t> p_abs(d.p_abs_sq.size());
  for (std::size_t j = 0; j < p_abs.size(); ++j)
    p_abs[j] = std::sqrt(std::max(0.0, d.p_abs_sq[j]));
  auto out = recover_phat(p_abs, z2.z2, tol);
  pd.tolerances = tol.resolve(q.grid.h(), std::max(sup_abs(p_abs), z2.z2.sup_norm()));

  if (tol.canonical_orientation && !out.candidates.empty()) {
    const auto& lead = out.candidates.front();
    const real_t w = orientation(lead);
    const real_t scale = std::sqrt(std::abs(weighted_inner_product(lead.p, lead.p)) *
                                   std::abs(weighted_inner_product(lead.p_prime, lead.p_prime)));
    if (w < -1e-12 * (1.0 + scale)) {
      if (out.kind == RecoveryKind::ConjugatePair) {
        std::swap(out.candidates[0], out.candidates[1]);
      } else {
        for (auto& c : out.candidates) c = c.conj();
      }
      pd.orientation_flipped = true;
    }
  }
  out.pipeline = pd;
  return out;
}

TruthReport resolve_against_truth(const RecoveryOutcome& outcome,
                                  const DiracPotential& p_true, real_t tol) {
  TruthReport report;
  const auto conj_p = p_true.p.conj();
  for (const auto& c : outcome.candidates) {
    CandidateMatch m;
    m.phase_to_p = dirac_shape_equivalent(c.p, p_true.p, tol);
    m.phase_to_conj_p = dirac_shape_equivalent(c.p, conj_p, tol);
    report.matches += (m.phase_to_p ? 1 : 0) + (m.phase_to_conj_p ? 1 : 0);
    report.candidates.push_back(m);
  }
  return report;
}

}  // namespace selfmod
