#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "selfmod/families.hpp"
#include "selfmod/unitary.hpp"
#include "selfmod/wave_model.hpp"

#include <cmath>
#include <numbers>
#include <random>

using namespace selfmod;

namespace {

using Index = Eigen::Index;

MatrixPotential potential_for(const WaveDiscretization& d, auto q_of_x) {
  const std::size_t nx =
      static_cast<std::size_t>(std::llround(d.T / d.dx())) + 1 + d.margin;
  const Grid g(d.dx(), nx);
  MatrixPotential q(g, d.k, true);
  for (std::size_t j = 0; j < g.n(); ++j) q.values[j] = q_of_x(g.x(j));
  return q;
}

MatrixPotential zero_potential(const WaveDiscretization& d) {
  return potential_for(d, [&](real_t) { return Eigen::MatrixXcd::Zero(d.k, d.k); });
}

Eigen::MatrixXcd scalar(real_t v) { return Eigen::MatrixXcd::Constant(1, 1, v); }

// Smooth control vanishing to high order at t = 0.
complex_t bump(real_t t) {
  return t <= 0.0 ? complex_t(0.0) : complex_t(std::pow(std::sin(2.0 * t), 4), 0.3 * t * t * t);
}

Eigen::MatrixXcd random_hermitian(Index n, std::mt19937_64& rng) {
  std::normal_distribution<real_t> n01;
  Eigen::MatrixXcd A(n, n);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j) A(i, j) = complex_t(n01(rng), n01(rng));
  return 0.5 * (A + A.adjoint());
}

Eigen::MatrixXcd random_unitary(Index n, std::mt19937_64& rng) {
  std::normal_distribution<real_t> n01;
  Eigen::MatrixXcd A(n, n);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j) A(i, j) = complex_t(n01(rng), n01(rng));
  return Eigen::HouseholderQR<Eigen::MatrixXcd>(A).householderQ();
}

real_t trimmed_sup(const MatrixPotential& a, const MatrixPotential& b, std::size_t trim) {
  real_t s = 0.0;
  for (std::size_t j = trim; j + trim < a.size(); ++j)
    s = std::max(s, (a.values[j] - b.values[j]).norm());
  return s;
}

}  // namespace

TEST_CASE("discretization") {
  const WaveDiscretization d(2.0, 41, 3);
  CHECK(d.dt() == doctest::Approx(0.05));
  CHECK(d.dx() == d.dt());
  CHECK(d.spatial_grid().length() >= d.T);
  CHECK_THROWS_AS(WaveDiscretization(0.0, 41, 1), WaveError);
  CHECK_THROWS_AS(WaveDiscretization(1.0, 3, 1), WaveError);
  WaveDiscretization bad(1.0, 41, 1);
  bad.cfl = 1.5;
  CHECK_THROWS_AS(bad.validate(), WaveError);
}

TEST_CASE("solve_wave_ibvp") {
  const WaveDiscretization d(1.0, 101, 1);
  const auto free = zero_potential(d);
  SUBCASE("zero control") {
    const auto u = solve_wave_ibvp(free, Eigen::MatrixXcd::Zero(101, 1), d);
    CHECK(u.norm() == 0.0);
  }
  SUBCASE("free transport is exact on the aligned grid") {
    Eigen::MatrixXcd f(101, 1);
    for (Index n = 0; n < 101; ++n) f(n, 0) = bump(d.time_grid().x(static_cast<std::size_t>(n)));
    const auto u = solve_wave_ibvp(free, f, d);
    for (Index i = 0; i < u.rows(); ++i) {
      const real_t x = d.dx() * static_cast<real_t>(i);
      const complex_t expect = x <= d.T + 1e-12 ? bump(d.T - x) : complex_t(0.0);
      CHECK(std::abs(u(i, 0) - expect) < 1e-13);
    }
  }
  SUBCASE("constant potential converges at second order") {
    auto run = [](std::size_t m, real_t cfl) {
      WaveDiscretization dd(1.0, m, 1);
      dd.cfl = cfl;
      const auto q = potential_for(dd, [](real_t) { return scalar(4.0); });
      Eigen::MatrixXcd f(static_cast<Index>(m), 1);
      for (std::size_t n = 0; n < m; ++n) f(static_cast<Index>(n), 0) = bump(dd.time_grid().x(n));
      const auto u = solve_wave_ibvp(q, f, dd);
      return u;  // on x_i = i dx
    };
    // Reference on a 8x finer grid, compared at the coarse nodes.
    const auto ref = run(801, 1.0);
    auto err = [&](std::size_t m) {
      const auto u = run(m, 1.0);
      const std::size_t stride = 800 / (m - 1);
      real_t e = 0.0;
      for (std::size_t i = 0; i < m; ++i)
        e = std::max(e, std::abs(u(static_cast<Index>(i), 0) - ref(static_cast<Index>(i * stride), 0)));
      return e;
    };
    const real_t e1 = err(101), e2 = err(201);
    CHECK(e1 < 1e-3);
    CHECK(e1 / e2 > 3.0);
    // dt/dx = 1/2: spatial step 0.01, every 8th reference node.
    const auto u_half = run(201, 0.5);
    REQUIRE(u_half.rows() >= 101);
    real_t e = 0.0;
    for (std::size_t i = 0; i < 101; ++i)
      e = std::max(e, std::abs(u_half(static_cast<Index>(i), 0) - ref(static_cast<Index>(8 * i), 0)));
    CHECK(e < 1e-3);
  }
  SUBCASE("incompatible data") {
    Eigen::MatrixXcd f = Eigen::MatrixXcd::Zero(101, 1);
    f(0, 0) = 1.0;
    CHECK_THROWS_AS(solve_wave_ibvp(free, f, d), WaveError);
    CHECK_THROWS_AS(solve_wave_ibvp(free, Eigen::MatrixXcd::Zero(50, 1), d), WaveError);
  }
}

TEST_CASE("assemble_control_operator") {
  SUBCASE("free scalar system is the time reversal") {
    const WaveDiscretization d(1.0, 51, 1);
    const auto W = assemble_control_operator(zero_potential(d), d);
    CHECK((W.W - reversal_matrix(51, 1)).norm() == 0.0);
  }
  SUBCASE("free k = 2 system decouples") {
    const WaveDiscretization d(1.0, 31, 2);
    const auto W = assemble_control_operator(zero_potential(d), d);
    Eigen::MatrixXcd expect = Eigen::MatrixXcd::Zero(62, 62);
    for (Index i = 0; i < 31; ++i) expect.block(2 * i, 2 * (30 - i), 2, 2).setIdentity();
    CHECK((W.W - expect).norm() == 0.0);
  }
  SUBCASE("finite propagation speed holds exactly") {
    const WaveDiscretization d(1.0, 41, 2);
    const Grid g = d.spatial_grid();
    const auto p = make_potential({"linear-phase", {1, 1, 1, 0}}, g);
    const auto W = assemble_control_operator(schrodinger_from_dirac(p), d);
    for (Index j = 0; j < 41; ++j)
      for (Index i = 41 - j; i < 41; ++i)  // x_i > T - t_j
        CHECK(W.W.block(2 * i, 2 * j, 2, 2).norm() == 0.0);
  }
  SUBCASE("columns are IBVP solves") {
    const WaveDiscretization d(1.0, 21, 1);
    const auto q = potential_for(d, [](real_t x) { return scalar(1.0 + x * x); });
    const auto W = assemble_control_operator(q, d);
    Eigen::MatrixXcd f = Eigen::MatrixXcd::Zero(21, 1);
    f(7, 0) = 1.0;
    const auto u = solve_wave_ibvp(q, f, d);
    CHECK((W.W.col(7) - u.topRows(21).col(0)).norm() < 1e-14);
  }
  SUBCASE("coarse potential is rejected") {
    const WaveDiscretization d(1.0, 21, 1);
    const MatrixPotential q(Grid(0.1, 30), 1, true);
    CHECK_THROWS_AS(assemble_control_operator(q, d), WaveError);
  }
}

TEST_CASE("connecting_operator") {
  SUBCASE("free system gives the identity") {
    const WaveDiscretization d(1.0, 61, 1);
    const auto C = connecting_operator(assemble_control_operator(zero_potential(d), d));
    CHECK((C.C - Eigen::MatrixXcd::Identity(61, 61)).norm() < 1e-14);
  }
  SUBCASE("Hermitian and positive definite") {
    const WaveDiscretization d(1.0, 41, 2);
    const auto p = make_potential({"bump", {1.0, 0.5, 0.3, 2.0}}, d.spatial_grid());
    const auto C = connecting_operator(assemble_control_operator(schrodinger_from_dirac(p), d));
    CHECK((C.C - C.C.adjoint()).norm() <= 1e-12);
    const Eigen::VectorXd ev = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd>(C.C).eigenvalues();
    CHECK(ev.minCoeff() > 0.0);
  }
}

TEST_CASE("nest_factorize") {
  SUBCASE("identity") {
    const auto V = nest_factorize(Eigen::MatrixXcd::Identity(8, 8), 2);
    CHECK((V.V - Eigen::MatrixXcd::Identity(8, 8)).norm() == 0.0);
  }
  SUBCASE("diagonal") {
    Eigen::MatrixXcd C = Eigen::MatrixXcd::Zero(2, 2);
    C.diagonal() << 4.0, 9.0;
    const auto V = nest_factorize(C, 1);
    CHECK(std::abs(V.V(0, 0) - 2.0) < 1e-15);
    CHECK(std::abs(V.V(1, 1) - 3.0) < 1e-15);
    CHECK(std::abs(V.V(0, 1)) + std::abs(V.V(1, 0)) == 0.0);
  }
  SUBCASE("scalar blocks agree with dense Cholesky after reversal") {
    std::mt19937_64 rng(1);
    const Index n = 40;
    Eigen::MatrixXcd H = random_hermitian(n, rng);
    const Eigen::MatrixXcd C =
        Eigen::MatrixXcd::Identity(n, n) + 0.3 * H / H.norm();
    const Eigen::MatrixXcd J = reversal_matrix(static_cast<std::size_t>(n), 1);
    const Eigen::MatrixXcd L = (J * C * J).llt().matrixL();
    const Eigen::MatrixXcd expect = J * L.adjoint() * J;
    CHECK((nest_factorize(C, 1).V - expect).norm() < 1e-12);
  }
  SUBCASE("block factor differs from dense Cholesky by a block-diagonal unitary") {
    std::mt19937_64 rng(2);
    const int k = 2;
    const Index n = 60;
    Eigen::MatrixXcd H = random_hermitian(n, rng);
    const Eigen::MatrixXcd C = Eigen::MatrixXcd::Identity(n, n) + 0.3 * H / H.norm();
    const auto F = nest_factorize(C, k);
    const Eigen::MatrixXcd J = reversal_matrix(static_cast<std::size_t>(n / k), k);
    const Eigen::MatrixXcd R = J * F.V * J;
    const Eigen::MatrixXcd Rc = Eigen::MatrixXcd((J * C * J).llt().matrixL()).adjoint();
    const Eigen::MatrixXcd U = R * Rc.inverse();
    CHECK((U * U.adjoint() - Eigen::MatrixXcd::Identity(n, n)).norm() < 1e-10);
    for (Index b = 0; b < n / k; ++b)
      CHECK((U.block(b * k, 0, k, n).norm() - U.block(b * k, b * k, k, k).norm()) < 1e-10);
    CHECK((F.V.adjoint() * F.V - C).norm() <= 1e-12 * C.norm());
  }
  SUBCASE("structure, nest invariance and solves") {
    std::mt19937_64 rng(3);
    const int k = 3;
    const Index n = 45;
    Eigen::MatrixXcd H = random_hermitian(n, rng);
    const Eigen::MatrixXcd C = Eigen::MatrixXcd::Identity(n, n) + 0.3 * H / H.norm();
    const auto F = nest_factorize(C, k);
    for (Index bi = 0; bi < n / k; ++bi) {
      for (Index bj = bi + 1; bj < n / k; ++bj)
        CHECK(F.V.block(bi * k, bj * k, k, k).norm() == 0.0);
      const Eigen::MatrixXcd D = F.V.block(bi * k, bi * k, k, k);
      CHECK((D - D.adjoint()).norm() < 1e-13);
      CHECK(Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd>(D).eigenvalues().minCoeff() > 0.0);
    }
    // Controls supported on the last s blocks stay there.
    Eigen::VectorXcd f = Eigen::VectorXcd::Zero(n);
    f.tail(4 * k).setRandom();
    CHECK((F.apply(f)).head(n - 4 * k).norm() == 0.0);
    const Eigen::VectorXcd b = Eigen::VectorXcd::Random(n);
    CHECK((F.V * F.solve(b) - b).norm() < 1e-12);
  }
  SUBCASE("rejects indefinite or non-Hermitian input") {
    Eigen::MatrixXcd C = Eigen::MatrixXcd::Identity(4, 4);
    C(1, 1) = -1.0;
    CHECK_THROWS_AS(nest_factorize(C, 1), FactorizationError);
    Eigen::MatrixXcd N = Eigen::MatrixXcd::Identity(4, 4);
    N(0, 1) = 0.5;
    CHECK_THROWS_AS(nest_factorize(N, 1), FactorizationError);
    CHECK_THROWS_AS(nest_factorize(Eigen::MatrixXcd::Identity(5, 5), 2), FactorizationError);
  }
}

TEST_CASE("reversal and model control") {
  const Eigen::MatrixXcd J = reversal_matrix(7, 2);
  CHECK((J * J - Eigen::MatrixXcd::Identity(14, 14)).norm() == 0.0);
  const WaveDiscretization d(1.0, 7, 2);
  TriangularFactor id;
  id.k = 2;
  id.blocks = 7;
  id.V = Eigen::MatrixXcd::Identity(14, 14);
  const auto W = model_control(id, d);
  CHECK((W.W_mod - Eigen::MatrixXcd::Identity(14, 14)).norm() == 0.0);
  const Eigen::VectorXcd g = Eigen::VectorXcd::Random(14);
  CHECK((W.apply(W.solve(g)) - g).norm() < 1e-14);
  CHECK_THROWS_AS(model_control(id, WaveDiscretization(1.0, 8, 2)), WaveError);
}

TEST_CASE("model potential extraction") {
  SUBCASE("free system") {
    const WaveDiscretization d(1.0, 101, 2);
    const auto r = wave_model_pipeline(zero_potential(d), d);
    CHECK(r.connecting_identity_defect < 1e-12);
    CHECK(r.factor_identity_defect < 1e-12);
    real_t s = 0.0;
    for (std::size_t j = 3; j + 3 < d.m; ++j) s = std::max(s, r.model.Q_mod.values[j].norm());
    CHECK(s < 1e-6);
    CHECK((r.conjugator.phi * r.conjugator.phi.adjoint() - Eigen::MatrixXcd::Identity(2, 2)).norm() < 1e-12);
  }
  SUBCASE("scalar constant") {
    const WaveDiscretization d(1.0, 101, 1);
    const auto r = wave_model_pipeline(potential_for(d, [](real_t) { return scalar(1.0); }), d);
    CHECK(trimmed_sup(r.model.Q_mod, r.Q_on_grid, 3) < 1e-6);
    CHECK_FALSE(r.model.reliable[2]);
    CHECK(r.model.reliable[3]);
    CHECK(r.model.reliable[97]);
    CHECK_FALSE(r.model.reliable[98]);
  }
  SUBCASE("diagonal 2x2 keeps its eigenvalues") {
    const WaveDiscretization d(1.0, 101, 2);
    const auto q = potential_for(d, [](real_t x) {
      Eigen::MatrixXcd M = Eigen::MatrixXcd::Zero(2, 2);
      M.diagonal() << 1.0 + x, 2.0 * std::cos(3.0 * x);
      return M;
    });
    const auto r = wave_model_pipeline(q, d);
    for (std::size_t j = 3; j + 3 < d.m; ++j) {
      const Eigen::VectorXd a =
          Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd>(r.model.Q_mod.values[j]).eigenvalues();
      const Eigen::VectorXd b =
          Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd>(r.Q_on_grid.values[j]).eigenvalues();
      CHECK((a - b).cwiseAbs().maxCoeff() < 1e-6);
    }
  }
  SUBCASE("flat window profile") {
    const WaveDiscretization d(1.0, 81, 1);
    WaveModelOptions o;
    o.extraction.profile = TestProfile::FlatWindow;
    const auto q = potential_for(d, [](real_t x) { return scalar(1.0 + std::sin(x)); });
    const auto r = wave_model_pipeline(q, d, o);
    CHECK(trimmed_sup(r.model.Q_mod, r.Q_on_grid, 3) < 1e-6);
  }
  SUBCASE("gamma shift round trip") {
    const WaveDiscretization d(1.0, 81, 1);
    const auto q = potential_for(d, [](real_t x) { return scalar(-3.0 + std::sin(4.0 * x)); });
    WaveModelOptions o;
    o.gamma_shift = 5.0;
    const auto shifted = wave_model_pipeline(q, d, o);
    const auto plain = wave_model_pipeline(q, d);
    CHECK(trimmed_sup(shifted.model.Q_mod, plain.model.Q_mod, 3) < 1e-6);
    CHECK(trimmed_sup(shifted.model.Q_mod, shifted.Q_on_grid, 3) < 1e-6);
  }
  SUBCASE("trim larger than the grid") {
    const WaveDiscretization d(1.0, 7, 1);
    WaveModelOptions o;
    o.extraction.trim = 3;
    CHECK_THROWS_AS(wave_model_pipeline(zero_potential(d), d, o), WaveError);
  }
}

TEST_CASE("estimate_conjugator") {
  const Grid g = Grid::covering(1.0, 0.01);
  const auto q = schrodinger_from_dirac(make_potential({"linear-phase", {1, 1, 1, 0}}, g));
  SUBCASE("identity") {
    const auto e = estimate_conjugator(q, q, 0, g.n());
    CHECK(e.residual < 1e-12);
  }
  SUBCASE("constructed 2x2 conjugate") {
    std::mt19937_64 rng(6);
    const auto t0 = u2_from_params(random_u2_params(rng));
    const auto e = estimate_conjugator(conjugate_potential(q, t0), q, 0, g.n());
    CHECK(e.residual <= 1e-10);
    CHECK(unitarity_defect(e.phi) < 1e-12);
  }
  SUBCASE("constructed 3x3 conjugate") {
    std::mt19937_64 rng(7);
    MatrixPotential q3(g, 3, true);
    for (std::size_t j = 0; j < g.n(); ++j) {
      const real_t x = g.x(j);
      q3.values[j] << 1.0 + x, complex_t(0.0, x), 0.5,
                      complex_t(0.0, -x), std::cos(2.0 * x), complex_t(x * x, 0.2),
                      0.5, complex_t(x * x, -0.2), -1.0 + 2.0 * x * x;
    }
    const auto U = random_unitary(3, rng);
    const auto e = estimate_conjugator(conjugate_potential(q3, U), q3, 0, g.n());
    CHECK(e.residual <= 1e-10);
    CHECK(unitarity_defect(e.phi) < 1e-12);
  }
  SUBCASE("trim overload uses the interior") {
    MatrixPotential noisy = q;
    noisy.values[0] += Eigen::MatrixXcd::Identity(2, 2);
    noisy.values[g.n() - 1] += Eigen::MatrixXcd::Identity(2, 2);
    CHECK(estimate_conjugator(noisy, q, 0.05).residual < 1e-12);
    CHECK(estimate_conjugator(noisy, q, 0, g.n()).residual > 1e-3);
  }
}

TEST_CASE("resample_to") {
  const Grid fine(0.01, 201);
  MatrixPotential q(fine, 1, true);
  for (std::size_t j = 0; j < fine.n(); ++j) q.values[j] = scalar(3.0 * fine.x(j) - 1.0);
  const auto out = resample_to(q, Grid(0.025, 41));
  for (std::size_t j = 0; j < 41; ++j)
    CHECK(std::abs(out.values[j](0, 0) - (3.0 * 0.025 * j - 1.0)) < 1e-12);
}
