#pragma once

#include <Eigen/Dense>

#include <complex>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace selfmod {

using real_t = double;
using complex_t = std::complex<double>;

// Error hierarchy shared by every module.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class GridError : public Error {
 public:
  using Error::Error;
};

// Uniform grid x_j = j*h, j = 0..n-1, always starting at 0.
class Grid {
 public:
  Grid() = default;
  Grid(real_t h, std::size_t n);

  real_t h() const { return h_; }
  std::size_t n() const { return n_; }
  real_t x(std::size_t j) const { return static_cast<real_t>(j) * h_; }
  real_t length() const { return x(n_ - 1); }

  // Trapezoid weights: h/2 at both ends, h elsewhere.
  real_t weight(std::size_t j) const {
    return (j == 0 || j + 1 == n_) ? 0.5 * h_ : h_;
  }
  std::vector<real_t> weights() const;

  // Grid on [0, x_max] with step as close to h as the node count allows.
  static Grid covering(real_t x_max, real_t h);

  bool operator==(const Grid& other) const {
    return n_ == other.n_ && h_ == other.h_;
  }

 private:
  real_t h_ = 1.0;
  std::size_t n_ = 0;
};

void require_same_grid(const Grid& a, const Grid& b, const char* what);

struct SampledScalarField {
  Grid grid;
  std::vector<complex_t> values;

  SampledScalarField() = default;
  SampledScalarField(Grid g, std::vector<complex_t> v);
  explicit SampledScalarField(Grid g);  // zeros

  template <class F>
  static SampledScalarField sample(const Grid& g, F&& f) {
    SampledScalarField out(g);
    for (std::size_t j = 0; j < g.n(); ++j) out.values[j] = f(g.x(j));
    return out;
  }

  std::size_t size() const { return values.size(); }
  complex_t operator[](std::size_t j) const { return values[j]; }
  complex_t& operator[](std::size_t j) { return values[j]; }

  SampledScalarField conj() const;
  real_t sup_norm() const;
};

// Field of k x k complex matrices, one per node.
struct SampledMatrixField {
  Grid grid;
  int k = 0;
  std::vector<Eigen::MatrixXcd> values;
  bool hermitian = false;

  SampledMatrixField() = default;
  SampledMatrixField(Grid g, int dim, bool herm = false);  // zeros

  std::size_t size() const { return values.size(); }
  const Eigen::MatrixXcd& operator[](std::size_t j) const { return values[j]; }
  Eigen::MatrixXcd& operator[](std::size_t j) { return values[j]; }

  // max_j ||M_j - M_j^*||_F
  real_t hermitian_defect() const;
  real_t sup_norm() const;  // max_j ||M_j||_F
};

using MatrixPotential = SampledMatrixField;

// Central differences inside, second-order one-sided stencils at the ends.
SampledScalarField differentiate(const SampledScalarField& f);

// Three-point second difference inside, four-point one-sided at the ends.
SampledScalarField second_difference(const SampledScalarField& f);

// Cumulative trapezoid integral, zero at node 0.
SampledScalarField integrate_prefix(const SampledScalarField& f);

// sum_j w_j conj(f_j) g_j with trapezoid weights.
complex_t weighted_inner_product(const SampledScalarField& f,
                                 const SampledScalarField& g);

// Vector-valued variant: values are stacked node-major, `dim` entries per node.
complex_t weighted_inner_product(const Grid& grid, int dim,
                                 const Eigen::VectorXcd& f,
                                 const Eigen::VectorXcd& g);

}  // namespace selfmod
