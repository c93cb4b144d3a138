#include "selfmod/wave_model.hpp"

#include "selfmod/unitary.hpp"

#include <algorithm>
#include <cmath>

namespace selfmod {

namespace {

using Index = Eigen::Index;

// Potential flattened node-major for the stepping loops: entry (i, a, b) at
// i*k*k + a*k + b.
std::vector<complex_t> flatten_potential(const MatrixPotential& q, std::size_t nodes) {
  const int k = q.k;
  std::vector<complex_t> out(nodes * k * k);
  for (std::size_t i = 0; i < nodes; ++i)
    for (int a = 0; a < k; ++a)
      for (int b = 0; b < k; ++b) out[(i * k + a) * k + b] = q.values[i](a, b);
  return out;
}

// One leapfrog step on nodes 1..limit; node 0 carries the boundary value.
void leapfrog_step(const std::vector<complex_t>& qf, int k, real_t lambda2,
                   real_t dt2, std::size_t limit, const std::vector<complex_t>& prev,
                   const std::vector<complex_t>& cur, std::vector<complex_t>& next) {
  const real_t centre = 2.0 * (1.0 - lambda2);
  for (std::size_t i = 1; i <= limit; ++i) {
    const complex_t* qi = &qf[i * k * k];
    for (int a = 0; a < k; ++a) {
      const std::size_t o = i * k + a;
      complex_t qu(0.0, 0.0);
      for (int b = 0; b < k; ++b) qu += qi[a * k + b] * cur[i * k + b];
      next[o] = centre * cur[o] + lambda2 * (cur[o + k] + cur[o - k]) - prev[o] -
                dt2 * qu;
    }
  }
}

void check_potential(const MatrixPotential& q, const WaveDiscretization& disc,
                     const char* what) {
  if (q.k != disc.k) throw WaveError(std::string(what) + ": dimension mismatch");
  if (q.size() < disc.spatial_nodes())
    throw WaveError(std::string(what) + ": potential does not cover the spatial grid");
  if (std::abs(q.grid.h() - disc.dx()) > 1e-12 * disc.dx())
    throw WaveError(std::string(what) + ": potential must be sampled with step dx");
}

Eigen::MatrixXcd principal_sqrt(const Eigen::MatrixXcd& S, Eigen::MatrixXcd& inv,
                                real_t floor) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(S);
  const Eigen::VectorXd ev = es.eigenvalues();
  if (!(ev.minCoeff() > floor))
    throw FactorizationError("nest_factorize: pivot block not positive definite "
                             "(smallest eigenvalue " + std::to_string(ev.minCoeff()) + ")");
  const Eigen::VectorXd s = ev.cwiseSqrt();
  const Eigen::MatrixXcd& U = es.eigenvectors();
  inv = U * s.cwiseInverse().asDiagonal() * U.adjoint();
  return U * s.asDiagonal() * U.adjoint();
}

// Second difference of node-major samples (m nodes, k channels per node).
// zero_tail: treat the value beyond the last node as 0 (control at rest
// before t = 0 in reversed time); otherwise a one-sided stencil.
Eigen::VectorXcd second_difference_nodes(const Eigen::VectorXcd& v, std::size_t m,
                                         int k, real_t h, bool zero_tail) {
  Eigen::VectorXcd out(v.size());
  const real_t h2 = h * h;
  auto at = [&](std::size_t i, int a) { return v(static_cast<Index>(i * k + a)); };
  for (int a = 0; a < k; ++a) {
    out(a) = (2.0 * at(0, a) - 5.0 * at(1, a) + 4.0 * at(2, a) - at(3, a)) / h2;
    for (std::size_t i = 1; i + 1 < m; ++i)
      out(static_cast<Index>(i * k + a)) =
          (at(i + 1, a) - 2.0 * at(i, a) + at(i - 1, a)) / h2;
    const std::size_t l = m - 1;
    out(static_cast<Index>(l * k + a)) =
        zero_tail ? (-2.0 * at(l, a) + at(l - 1, a)) / h2
                  : (2.0 * at(l, a) - 5.0 * at(l - 1, a) + 4.0 * at(l - 2, a) -
                     at(l - 3, a)) / h2;
  }
  return out;
}

Eigen::VectorXd repeated_weights(const std::vector<real_t>& w, int k) {
  Eigen::VectorXd out(static_cast<Index>(w.size()) * k);
  for (std::size_t i = 0; i < w.size(); ++i)
    for (int a = 0; a < k; ++a) out(static_cast<Index>(i * k + a)) = w[i];
  return out;
}

}  // namespace

WaveDiscretization::WaveDiscretization(real_t horizon, std::size_t time_nodes, int dim)
    : T(horizon), m(time_nodes), k(dim) {
  validate();
}

void WaveDiscretization::validate() const {
  if (!(T > 0.0)) throw WaveError("wave discretization: T must be positive");
  if (m < 5) throw WaveError("wave discretization: need at least 5 time nodes");
  if (k < 1) throw WaveError("wave discretization: k must be positive");
  if (!(cfl > 0.0) || cfl > 1.0 + 1e-12)
    throw WaveError("wave discretization: CFL condition dt/dx <= 1 violated");
}

Eigen::MatrixXcd solve_wave_ibvp(const MatrixPotential& q, const ControlSamples& f,
                                 const WaveDiscretization& disc, real_t compat_tol) {
  disc.validate();
  if (f.rows() != static_cast<Index>(disc.m) || f.cols() != disc.k)
    throw WaveError("solve_wave_ibvp: control must be m x k");
  if (f.row(0).norm() > compat_tol)
    throw WaveError("solve_wave_ibvp: control violates f(0) = 0");
  // General CFL: spatial grid on [0, T] at step dx plus margin.
  const std::size_t nx =
      static_cast<std::size_t>(std::llround(disc.T / disc.dx())) + 1 + disc.margin;
  if (q.k != disc.k || q.size() < nx ||
      std::abs(q.grid.h() - disc.dx()) > 1e-12 * disc.dx())
    throw WaveError("solve_wave_ibvp: potential must be sampled with step dx past T");

  const int k = disc.k;
  const auto qf = flatten_potential(q, nx);
  const real_t lambda2 = disc.cfl * disc.cfl;
  const real_t dt2 = disc.dt() * disc.dt();
  std::vector<complex_t> prev(nx * k), cur(nx * k), next(nx * k);
  for (int a = 0; a < k; ++a) cur[a] = f(0, a);
  for (std::size_t n = 0; n + 1 < disc.m; ++n) {
    leapfrog_step(qf, k, lambda2, dt2, nx - 2, prev, cur, next);
    for (int a = 0; a < k; ++a) {
      next[a] = f(static_cast<Index>(n + 1), a);
      next[(nx - 1) * k + a] = 0.0;
    }
    std::swap(prev, cur);
    std::swap(cur, next);
  }
  Eigen::MatrixXcd u(static_cast<Index>(nx), k);
  for (std::size_t i = 0; i < nx; ++i)
    for (int a = 0; a < k; ++a) u(static_cast<Index>(i), a) = cur[i * k + a];
  return u;
}

ControlMatrix assemble_control_operator(const MatrixPotential& q,
                                        const WaveDiscretization& disc) {
  disc.validate();
  if (std::abs(disc.cfl - 1.0) > 1e-12)
    throw WaveError("assemble_control_operator: aligned scheme (dx = dt) required");
  check_potential(q, disc, "assemble_control_operator");

  const int k = disc.k;
  const std::size_t m = disc.m;
  const std::size_t nx = disc.spatial_nodes();
  const auto qf = flatten_potential(q, nx);
  const real_t dt2 = disc.dt() * disc.dt();

  ControlMatrix out;
  out.disc = disc;
  out.W = Eigen::MatrixXcd::Zero(static_cast<Index>(m) * k, static_cast<Index>(m) * k);
  out.control_weights = disc.time_grid().weights();
  out.state_weights = out.control_weights;

  std::vector<complex_t> prev(nx * k), cur(nx * k), next(nx * k);
  for (std::size_t j = 0; j < m; ++j) {
    for (int l = 0; l < k; ++l) {
      // Unit pulse at t_j in channel l. Before t_j the state is at rest, and
      // after s steps the front sits at node s.
      std::fill(prev.begin(), prev.end(), complex_t(0.0));
      std::fill(cur.begin(), cur.end(), complex_t(0.0));
      std::fill(next.begin(), next.end(), complex_t(0.0));
      cur[l] = 1.0;
      for (std::size_t n = j; n + 1 < m; ++n) {
        const std::size_t limit = std::min(n + 1 - j, nx - 2);
        leapfrog_step(qf, k, 1.0, dt2, limit, prev, cur, next);
        for (int a = 0; a < k; ++a) next[a] = 0.0;
        std::swap(prev, cur);
        std::swap(cur, next);
      }
      const Index col = static_cast<Index>(j) * k + l;
      for (std::size_t i = 0; i < m; ++i)
        for (int a = 0; a < k; ++a)
          out.W(static_cast<Index>(i) * k + a, col) = cur[i * k + a];
    }
  }
  return out;
}

ConnectingMatrix connecting_operator(const ControlMatrix& w) {
  const int k = w.disc.k;
  const Eigen::VectorXd sx = repeated_weights(w.state_weights, k).cwiseSqrt();
  const Eigen::VectorXd st = repeated_weights(w.control_weights, k).cwiseSqrt();
  const Eigen::MatrixXcd Wt = sx.asDiagonal() * w.W * st.cwiseInverse().asDiagonal();
  ConnectingMatrix out;
  out.disc = w.disc;
  out.control_weights = w.control_weights;
  out.C = Wt.adjoint() * Wt;
  // Gram matrices are Hermitian; remove rounding asymmetry.
  out.C = 0.5 * (out.C + out.C.adjoint()).eval();
  return out;
}

Eigen::MatrixXcd reversal_matrix(std::size_t m, int k) {
  const Index n = static_cast<Index>(m) * k;
  Eigen::MatrixXcd J = Eigen::MatrixXcd::Zero(n, n);
  for (std::size_t i = 0; i < m; ++i)
    for (int a = 0; a < k; ++a)
      J(static_cast<Index>(i) * k + a, static_cast<Index>(m - 1 - i) * k + a) = 1.0;
  return J;
}

namespace {

Eigen::MatrixXcd block_reverse(const Eigen::MatrixXcd& A, std::size_t m, int k) {
  Eigen::MatrixXcd out(A.rows(), A.cols());
  const Index kk = k;
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < m; ++j)
      out.block(static_cast<Index>(i) * kk, static_cast<Index>(j) * kk, kk, kk) =
          A.block(static_cast<Index>(m - 1 - i) * kk, static_cast<Index>(m - 1 - j) * kk,
                  kk, kk);
  return out;
}

Eigen::VectorXcd block_reverse(const Eigen::VectorXcd& v, std::size_t m, int k) {
  Eigen::VectorXcd out(v.size());
  for (std::size_t i = 0; i < m; ++i)
    out.segment(static_cast<Index>(i) * k, k) =
        v.segment(static_cast<Index>(m - 1 - i) * k, k);
  return out;
}

}  // namespace

TriangularFactor nest_factorize(const Eigen::MatrixXcd& C, int k, real_t tol_chol) {
  if (C.rows() != C.cols() || k < 1 || C.rows() % k != 0)
    throw FactorizationError("nest_factorize: matrix must be square with k x k blocks");
  const Index n = C.rows();
  const std::size_t blocks = static_cast<std::size_t>(n / k);
  const real_t cnorm = C.norm();
  if ((C - C.adjoint()).norm() > 1e-10 * (1.0 + cnorm))
    throw FactorizationError("nest_factorize: matrix is not Hermitian");

  // Nest subspaces (late controls first) become leading blocks after reversal,
  // where the factor is block upper triangular: Cr = R^* R.
  Eigen::MatrixXcd A = block_reverse(C, blocks, k);
  Eigen::MatrixXcd R = Eigen::MatrixXcd::Zero(n, n);
  const real_t floor = 1e-14 * (1.0 + cnorm);
  for (std::size_t b = 0; b < blocks; ++b) {
    const Index o = static_cast<Index>(b) * k;
    const Index rest = n - o - k;
    Eigen::MatrixXcd S = A.block(o, o, k, k).selfadjointView<Eigen::Upper>();
    Eigen::MatrixXcd S_inv;
    R.block(o, o, k, k) = principal_sqrt(S, S_inv, floor);
    if (rest > 0) {
      const Eigen::MatrixXcd row = S_inv * A.block(o, o + k, k, rest);
      R.block(o, o + k, k, rest) = row;
      A.bottomRightCorner(rest, rest)
          .selfadjointView<Eigen::Upper>()
          .rankUpdate(row.adjoint(), -1.0);
    }
  }

  TriangularFactor out;
  out.k = k;
  out.blocks = blocks;
  out.V = block_reverse(R, blocks, k);
  const real_t res = (out.V.adjoint() * out.V - C).norm() / std::max(cnorm, 1e-300);
  if (res > tol_chol)
    throw FactorizationError("nest_factorize: residual ||V*V - C|| / ||C|| = " +
                             std::to_string(res));
  return out;
}

TriangularFactor nest_factorize(const ConnectingMatrix& C, real_t tol_chol) {
  return nest_factorize(C.C, C.disc.k, tol_chol);
}

Eigen::VectorXcd TriangularFactor::solve(const Eigen::VectorXcd& b) const {
  // V is block lower triangular in natural order.
  Eigen::VectorXcd x(b.size());
  for (std::size_t blk = 0; blk < blocks; ++blk) {
    const Index o = static_cast<Index>(blk) * k;
    Eigen::VectorXcd r = b.segment(o, k);
    if (o > 0) r.noalias() -= V.block(o, 0, k, o) * x.head(o);
    x.segment(o, k) = V.block(o, o, k, k).partialPivLu().solve(r);
  }
  return x;
}

Eigen::VectorXcd TriangularFactor::apply(const Eigen::VectorXcd& x) const {
  return V * x;
}

ModelControl model_control(const TriangularFactor& V, const WaveDiscretization& disc) {
  if (V.blocks != disc.m || V.k != disc.k)
    throw WaveError("model_control: factor does not match the discretization");
  ModelControl out;
  out.k = V.k;
  out.blocks = V.blocks;
  out.V = V;
  out.W_mod = block_reverse(V.V, V.blocks, V.k);
  return out;
}

Eigen::VectorXcd ModelControl::apply(const Eigen::VectorXcd& f) const {
  return W_mod * f;
}

Eigen::VectorXcd ModelControl::solve(const Eigen::VectorXcd& g) const {
  return block_reverse(V.solve(block_reverse(g, blocks, k)), blocks, k);
}

ModelPotential extract_model_potential(const ModelControl& w_mod,
                                       const WaveDiscretization& disc,
                                       const ExtractionOptions& options) {
  const int k = disc.k;
  const std::size_t m = disc.m;
  const real_t h = disc.dt();
  const Grid grid = disc.time_grid();
  if (2 * options.trim + 1 >= m)
    throw WaveError("extract_model_potential: trim margin leaves no interior");
  const Eigen::VectorXd sw =
      repeated_weights(grid.weights(), k).cwiseSqrt();

  // Test controls g_i = profile_i(tau) e_i, vanishing with first derivative at T.
  auto profile = [&](int i, real_t tau) {
    const real_t window = (disc.T - tau) * (disc.T - tau);
    if (options.profile == TestProfile::FlatWindow) return window;
    return window * std::pow(tau, i + 2);  // i is 0-based: t^{i+1} for i = 1..k
  };

  std::vector<Eigen::VectorXcd> g(k), w(k);
  for (int i = 0; i < k; ++i) {
    g[i] = Eigen::VectorXcd::Zero(static_cast<Index>(m) * k);
    for (std::size_t j = 0; j < m; ++j)
      g[i](static_cast<Index>(j) * k + i) = profile(i, grid.x(j));
    // Raw coordinates: W_mod,raw = D^{-1/2} W_mod D^{1/2}.
    const Eigen::VectorXcd f =
        w_mod.solve(sw.asDiagonal() * g[i]).cwiseQuotient(sw.cast<complex_t>());
    // f lives in reversed time; its last node is the control at t = 0.
    const Eigen::VectorXcd d = -second_difference_nodes(f, m, k, h, options.control_rest_extension);
    w[i] = w_mod.apply(sw.asDiagonal() * d).cwiseQuotient(sw.cast<complex_t>()) +
           second_difference_nodes(g[i], m, k, h, false);
  }

  ModelPotential out;
  out.trim = options.trim;
  out.Q_mod = MatrixPotential(grid, k, true);
  out.reliable.assign(m, false);
  const std::size_t lo = options.trim, hi = m - 1 - options.trim;
  for (std::size_t j = lo; j <= hi; ++j) {
    Eigen::MatrixXcd G(k, k), Wm(k, k);
    for (int i = 0; i < k; ++i) {
      G.col(i) = g[i].segment(static_cast<Index>(j) * k, k);
      Wm.col(i) = w[i].segment(static_cast<Index>(j) * k, k);
    }
    Eigen::FullPivLU<Eigen::MatrixXcd> lu(G);
    if (std::abs(lu.determinant()) <= options.singular_tol)
      throw WaveError("extract_model_potential: test functions singular at node " +
                      std::to_string(j));
    // Q_mod G = Wm  =>  Q_mod^T = G^T \ Wm^T
    const Eigen::MatrixXcd Qm =
        G.transpose().fullPivLu().solve(Wm.transpose()).transpose();
    out.Q_mod.values[j] = 0.5 * (Qm + Qm.adjoint());
    out.reliable[j] = true;
  }
  // Margins: nearest reliable value, flagged unreliable.
  for (std::size_t j = 0; j < lo; ++j) out.Q_mod.values[j] = out.Q_mod.values[lo];
  for (std::size_t j = hi + 1; j < m; ++j) out.Q_mod.values[j] = out.Q_mod.values[hi];
  return out;
}

ConjugatorEstimate evaluate_conjugator(const MatrixPotential& q_mod,
                                       const MatrixPotential& q,
                                       const Eigen::MatrixXcd& phi,
                                       std::size_t first, std::size_t last) {
  ConjugatorEstimate e;
  e.phi = phi;
  real_t num = 0.0, den = 0.0;
  for (std::size_t j = first; j < last; ++j) {
    const real_t d = (q_mod.values[j] - phi * q.values[j] * phi.adjoint()).norm();
    num += d * d;
    den += q.values[j].squaredNorm();
    e.sup_residual = std::max(e.sup_residual, d);
  }
  const auto count = static_cast<real_t>(std::max<std::size_t>(last - first, 1));
  e.rms_residual = std::sqrt(num / count);
  e.residual = den > 0.0 ? std::sqrt(num / den) : std::sqrt(num);
  return e;
}

ConjugatorEstimate estimate_conjugator(const MatrixPotential& q_mod,
                                       const MatrixPotential& q, std::size_t first,
                                       std::size_t last) {
  require_same_grid(q_mod.grid, q.grid, "estimate_conjugator");
  if (q_mod.k != q.k) throw Error("estimate_conjugator: dimension mismatch");
  last = std::min(last, q.size());
  if (first >= last) throw Error("estimate_conjugator: empty node range");
  const int k = q.k;

  if (k == 2) {
    const auto fit = fit_u2_conjugator(q_mod, q, first, last);
    return evaluate_conjugator(q_mod, q, fit.theta, first, last);
  }

  // Smallest eigenvector of sum_j A_j^* A_j, A_j vec(phi) = vec(Q_mod phi - phi Q),
  // then polar projection onto U(k).
  const Index kk = static_cast<Index>(k) * k;
  Eigen::MatrixXcd N = Eigen::MatrixXcd::Zero(kk, kk);
  const Eigen::MatrixXcd Ik = Eigen::MatrixXcd::Identity(k, k);
  for (std::size_t j = first; j < last; ++j) {
    Eigen::MatrixXcd A(kk, kk);
    // vec(Q_mod X) = (I kron Q_mod) vec X ; vec(X Q) = (Q^T kron I) vec X
    for (int r = 0; r < k; ++r)
      for (int c = 0; c < k; ++c)
        A.block(r * k, c * k, k, k) =
            Ik(r, c) * q_mod.values[j] - q.values[j](c, r) * Ik;
    N.noalias() += A.adjoint() * A;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(N);
  const Eigen::VectorXcd v = es.eigenvectors().col(0);
  const Eigen::MatrixXcd X = Eigen::Map<const Eigen::MatrixXcd>(v.data(), k, k);
  Eigen::JacobiSVD<Eigen::MatrixXcd> svd(X, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Eigen::MatrixXcd phi = svd.matrixU() * svd.matrixV().adjoint();
  return evaluate_conjugator(q_mod, q, phi, first, last);
}

ConjugatorEstimate estimate_conjugator(const MatrixPotential& q_mod,
                                       const MatrixPotential& q, real_t trim) {
  const real_t h = q.grid.h();
  const auto first = static_cast<std::size_t>(std::ceil(trim / h - 1e-9));
  const std::size_t last = q.size() - first;
  return estimate_conjugator(q_mod, q, first, last);
}

MatrixPotential resample_to(const MatrixPotential& q, const Grid& target) {
  MatrixPotential out(target, q.k, q.hermitian);
  const real_t h = q.grid.h();
  const std::size_t n = q.size();
  for (std::size_t j = 0; j < target.n(); ++j) {
    const real_t s = target.x(j) / h;
    const auto i = static_cast<std::size_t>(std::floor(s + 1e-9));
    if (i + 1 >= n) {
      out.values[j] = q.values[n - 1];
      continue;
    }
    const real_t frac = std::max(0.0, s - static_cast<real_t>(i));
    out.values[j] = frac < 1e-9 ? q.values[i]
                                : ((1.0 - frac) * q.values[i] + frac * q.values[i + 1]).eval();
  }
  return out;
}

WaveModelResult wave_model_pipeline(const MatrixPotential& q,
                                    const WaveDiscretization& disc,
                                    const WaveModelOptions& options) {
  disc.validate();
  if (q.k != disc.k) throw WaveError("wave_model_pipeline: dimension mismatch");
  if (q.grid.length() < disc.T * (1.0 - 1e-12))
    throw WaveError("wave_model_pipeline: potential does not cover [0, T]");

  WaveModelResult res;
  res.disc = disc;
  MatrixPotential q_space = resample_to(q, disc.spatial_grid());
  if (options.gamma_shift) q_space = shift_potential(q_space, *options.gamma_shift);

  const auto W = assemble_control_operator(q_space, disc);
  const auto C = connecting_operator(W);
  const Index n = C.C.rows();
  res.connecting_hermitian_defect = (C.C - C.C.adjoint()).norm();
  res.connecting_identity_defect = (C.C - Eigen::MatrixXcd::Identity(n, n)).norm();
  const auto V = nest_factorize(C, options.tol_chol);
  res.cholesky_residual = (V.V.adjoint() * V.V - C.C).norm() / C.C.norm();
  res.factor_identity_defect = (V.V - Eigen::MatrixXcd::Identity(n, n)).norm();
  const auto Wm = model_control(V, disc);
  res.model = extract_model_potential(Wm, disc, options.extraction);
  if (options.gamma_shift)
    res.model.Q_mod = shift_potential(res.model.Q_mod, -*options.gamma_shift);

  res.Q_on_grid = resample_to(q, disc.time_grid());
  const std::size_t t = res.model.trim;
  res.conjugator = estimate_conjugator(res.model.Q_mod, res.Q_on_grid, t, disc.m - t);
  res.W = W.W;
  res.C = C.C;
  res.V = V.V;
  res.W_mod = Wm.W_mod;
  return res;
}

}  // namespace selfmod
