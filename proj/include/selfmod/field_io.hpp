#pragma once

#include "selfmod/dirac.hpp"
#include "selfmod/grid.hpp"
#include "selfmod/unitary.hpp"

#include <json.hpp>

#include <string>

namespace selfmod {

using json = nlohmann::json;

class IoError : public Error {
 public:
  using Error::Error;
};

// Scalar field: {"h", "n", "re", "im"}; the derivative channel, when present,
// is stored as "p_prime": {"re", "im"}.
json to_json(const SampledScalarField& f);
json to_json(const DiracPotential& p);
SampledScalarField scalar_field_from_json(const json& j);
// Uses "p_prime" when present, finite differences otherwise.
DiracPotential dirac_potential_from_json(const json& j);

// Matrix field: {"h", "n", "k", "hermitian", "entries"}; entries holds one
// row-major list of k*k [re, im] pairs per node.
json to_json(const SampledMatrixField& q);
SampledMatrixField matrix_field_from_json(const json& j);

json to_json(const U2Params& p);
U2Params u2_params_from_json(const json& j);
json matrix_to_json(const Eigen::MatrixXcd& m);  // rows of [re, im] pairs

json read_json_file(const std::string& path);
void write_json_file(const std::string& path, const json& j);

// CSV: x, re, im per node (scalar) or x followed by re/im of each entry.
void write_csv(const std::string& path, const SampledScalarField& f);
void write_csv(const std::string& path, const SampledMatrixField& q);

// Row-major little-endian complex128 pairs in `path`, shape in `path`.json.
void write_binary_matrix(const std::string& path, const Eigen::MatrixXcd& m);
Eigen::MatrixXcd read_binary_matrix(const std::string& path);

}  // namespace selfmod
