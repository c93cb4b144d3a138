#include "selfmod/grid.hpp"

#include <algorithm>
#include <cmath>

namespace selfmod {

Grid::Grid(real_t h, std::size_t n) : h_(h), n_(n) {
  if (!(h > 0.0) || !std::isfinite(h))
    throw GridError("grid step must be positive and finite");
  if (n < 2) throw GridError("grid needs at least two nodes");
}

std::vector<real_t> Grid::weights() const {
  std::vector<real_t> w(n_);
  for (std::size_t j = 0; j < n_; ++j) w[j] = weight(j);
  return w;
}

Grid Grid::covering(real_t x_max, real_t h) {
  if (!(x_max > 0.0) || !(h > 0.0))
    throw GridError("covering grid needs x_max > 0 and h > 0");
  const auto cells = static_cast<std::size_t>(std::llround(x_max / h));
  const std::size_t n = std::max<std::size_t>(cells, 1) + 1;
  return Grid(x_max / static_cast<real_t>(n - 1), n);
}

void require_same_grid(const Grid& a, const Grid& b, const char* what) {
  if (!(a == b))
    throw GridError(std::string("grid mismatch in ") + what);
}

SampledScalarField::SampledScalarField(Grid g, std::vector<complex_t> v)
    : grid(g), values(std::move(v)) {
  if (values.size() != grid.n())
    throw GridError("scalar field length does not match grid");
}

SampledScalarField::SampledScalarField(Grid g)
    : grid(g), values(g.n(), complex_t(0.0, 0.0)) {}

SampledScalarField SampledScalarField::conj() const {
  SampledScalarField out(grid);
  for (std::size_t j = 0; j < size(); ++j) out.values[j] = std::conj(values[j]);
  return out;
}

real_t SampledScalarField::sup_norm() const {
  real_t m = 0.0;
  for (const auto& v : values) m = std::max(m, std::abs(v));
  return m;
}

SampledMatrixField::SampledMatrixField(Grid g, int dim, bool herm)
    : grid(g), k(dim), values(g.n(), Eigen::MatrixXcd::Zero(dim, dim)),
      hermitian(herm) {
  if (dim < 1) throw GridError("matrix field dimension must be positive");
}

real_t SampledMatrixField::hermitian_defect() const {
  real_t m = 0.0;
  for (const auto& M : values) m = std::max(m, (M - M.adjoint()).norm());
  return m;
}

real_t SampledMatrixField::sup_norm() const {
  real_t m = 0.0;
  for (const auto& M : values) m = std::max(m, M.norm());
  return m;
}

SampledScalarField differentiate(const SampledScalarField& f) {
  const std::size_t n = f.size();
  if (n < 3) throw GridError("differentiate needs at least 3 nodes");
  const real_t h = f.grid.h();
  SampledScalarField d(f.grid);
  const auto& v = f.values;
  d.values[0] = (-3.0 * v[0] + 4.0 * v[1] - v[2]) / (2.0 * h);
  for (std::size_t j = 1; j + 1 < n; ++j)
    d.values[j] = (v[j + 1] - v[j - 1]) / (2.0 * h);
  d.values[n - 1] = (3.0 * v[n - 1] - 4.0 * v[n - 2] + v[n - 3]) / (2.0 * h);
  return d;
}

SampledScalarField second_difference(const SampledScalarField& f) {
  const std::size_t n = f.size();
  if (n < 4) throw GridError("second_difference needs at least 4 nodes");
  const real_t h2 = f.grid.h() * f.grid.h();
  SampledScalarField d(f.grid);
  const auto& v = f.values;
  d.values[0] = (2.0 * v[0] - 5.0 * v[1] + 4.0 * v[2] - v[3]) / h2;
  for (std::size_t j = 1; j + 1 < n; ++j)
    d.values[j] = (v[j + 1] - 2.0 * v[j] + v[j - 1]) / h2;
  d.values[n - 1] =
      (2.0 * v[n - 1] - 5.0 * v[n - 2] + 4.0 * v[n - 3] - v[n - 4]) / h2;
  return d;
}

SampledScalarField integrate_prefix(const SampledScalarField& f) {
  SampledScalarField out(f.grid);
  const real_t half_h = 0.5 * f.grid.h();
  complex_t acc(0.0, 0.0);
  out.values[0] = acc;
  for (std::size_t j = 1; j < f.size(); ++j) {
    acc += half_h * (f.values[j - 1] + f.values[j]);
    out.values[j] = acc;
  }
  return out;
}

complex_t weighted_inner_product(const SampledScalarField& f,
                                 const SampledScalarField& g) {
  require_same_grid(f.grid, g.grid, "weighted_inner_product");
  complex_t s(0.0, 0.0);
  for (std::size_t j = 0; j < f.size(); ++j)
    s += f.grid.weight(j) * std::conj(f.values[j]) * g.values[j];
  return s;
}

complex_t weighted_inner_product(const Grid& grid, int dim,
                                 const Eigen::VectorXcd& f,
                                 const Eigen::VectorXcd& g) {
  const auto expected = static_cast<Eigen::Index>(grid.n()) * dim;
  if (f.size() != expected || g.size() != expected)
    throw GridError("vector field length does not match grid");
  complex_t s(0.0, 0.0);
  for (std::size_t j = 0; j < grid.n(); ++j) {
    const auto off = static_cast<Eigen::Index>(j) * dim;
    s += grid.weight(j) * f.segment(off, dim).dot(g.segment(off, dim));
  }
  return s;
}

}  // namespace selfmod
