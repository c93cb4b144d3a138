#include "selfmod/field_io.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iomanip>

namespace selfmod {

namespace {

std::vector<real_t> reals(const std::vector<complex_t>& v) {
  std::vector<real_t> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = v[i].real();
  return out;
}

std::vector<real_t> imags(const std::vector<complex_t>& v) {
  std::vector<real_t> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = v[i].imag();
  return out;
}

std::vector<complex_t> complex_values(const json& re, const json& im, std::size_t n,
                                      const char* what) {
  if (!re.is_array() || !im.is_array() || re.size() != n || im.size() != n)
    throw IoError(std::string(what) + ": re/im arrays must have n entries");
  std::vector<complex_t> out(n);
  for (std::size_t i = 0; i < n; ++i)
    out[i] = complex_t(re[i].get<real_t>(), im[i].get<real_t>());
  return out;
}

Grid grid_from_json(const json& j, const char* what) {
  if (!j.is_object() || !j.contains("h") || !j.contains("n"))
    throw IoError(std::string(what) + ": missing \"h\" or \"n\"");
  try {
    return Grid(j.at("h").get<real_t>(), j.at("n").get<std::size_t>());
  } catch (const GridError& e) {
    throw IoError(std::string(what) + ": " + e.what());
  }
}

}  // namespace

json to_json(const SampledScalarField& f) {
  return {{"h", f.grid.h()},
          {"n", f.grid.n()},
          {"re", reals(f.values)},
          {"im", imags(f.values)}};
}

json to_json(const DiracPotential& p) {
  json j = to_json(p.p);
  j["p_prime"] = {{"re", reals(p.p_prime.values)}, {"im", imags(p.p_prime.values)}};
  return j;
}

SampledScalarField scalar_field_from_json(const json& j) {
  try {
    const Grid g = grid_from_json(j, "scalar field");
    if (!j.contains("re") || !j.contains("im"))
      throw IoError("scalar field: missing \"re\" or \"im\"");
    return SampledScalarField(g, complex_values(j["re"], j["im"], g.n(), "scalar field"));
  } catch (const json::exception& e) {
    throw IoError(std::string("scalar field: ") + e.what());
  }
}

DiracPotential dirac_potential_from_json(const json& j) {
  SampledScalarField p = scalar_field_from_json(j);
  if (!j.contains("p_prime")) return DiracPotential::from_values(std::move(p));
  try {
    const json& d = j["p_prime"];
    SampledScalarField dp(p.grid, complex_values(d.at("re"), d.at("im"), p.grid.n(),
                                                 "p_prime"));
    return DiracPotential(std::move(p), std::move(dp));
  } catch (const json::exception& e) {
    throw IoError(std::string("p_prime: ") + e.what());
  }
}

json to_json(const SampledMatrixField& q) {
  json entries = json::array();
  for (const auto& m : q.values) {
    json node = json::array();
    for (int r = 0; r < q.k; ++r)
      for (int c = 0; c < q.k; ++c) node.push_back({m(r, c).real(), m(r, c).imag()});
    entries.push_back(std::move(node));
  }
  return {{"h", q.grid.h()},
          {"n", q.grid.n()},
          {"k", q.k},
          {"hermitian", q.hermitian},
          {"entries", std::move(entries)}};
}

SampledMatrixField matrix_field_from_json(const json& j) {
  try {
    const Grid g = grid_from_json(j, "matrix field");
    const int k = j.at("k").get<int>();
    if (k < 1) throw IoError("matrix field: k must be positive");
    const json& entries = j.at("entries");
    if (!entries.is_array() || entries.size() != g.n())
      throw IoError("matrix field: \"entries\" must have n nodes");
    SampledMatrixField q(g, k, j.value("hermitian", false));
    for (std::size_t i = 0; i < g.n(); ++i) {
      const json& node = entries[i];
      if (!node.is_array() || node.size() != static_cast<std::size_t>(k * k))
        throw IoError("matrix field: node " + std::to_string(i) + " needs k*k entries");
      for (int r = 0; r < k; ++r)
        for (int c = 0; c < k; ++c) {
          const json& e = node[static_cast<std::size_t>(r * k + c)];
          q.values[i](r, c) = complex_t(e.at(0).get<real_t>(), e.at(1).get<real_t>());
        }
    }
    return q;
  } catch (const json::exception& e) {
    throw IoError(std::string("matrix field: ") + e.what());
  }
}

json to_json(const U2Params& p) {
  return {{"alpha", p.alpha}, {"beta", p.beta}, {"gamma", p.gamma}, {"phi", p.phi}};
}

U2Params u2_params_from_json(const json& j) {
  try {
    return U2Params{j.at("alpha").get<real_t>(), j.at("beta").get<real_t>(),
                    j.at("gamma").get<real_t>(), j.at("phi").get<real_t>()}
        .normalized();
  } catch (const json::exception& e) {
    throw IoError(std::string("U2 parameters: ") + e.what());
  }
}

json matrix_to_json(const Eigen::MatrixXcd& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c)
      row.push_back({m(r, c).real(), m(r, c).imag()});
    rows.push_back(std::move(row));
  }
  return rows;
}

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw IoError(path + ": " + e.what());
  }
}

void write_json_file(const std::string& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out << j.dump(2) << '\n';
}

void write_csv(const std::string& path, const SampledScalarField& f) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out << std::setprecision(17) << "x,re,im\n";
  for (std::size_t j = 0; j < f.size(); ++j)
    out << f.grid.x(j) << ',' << f[j].real() << ',' << f[j].imag() << '\n';
}

void write_csv(const std::string& path, const SampledMatrixField& q) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out << std::setprecision(17) << "x";
  for (int r = 0; r < q.k; ++r)
    for (int c = 0; c < q.k; ++c)
      out << ",re_" << r << c << ",im_" << r << c;
  out << '\n';
  for (std::size_t j = 0; j < q.size(); ++j) {
    out << q.grid.x(j);
    for (int r = 0; r < q.k; ++r)
      for (int c = 0; c < q.k; ++c)
        out << ',' << q.values[j](r, c).real() << ',' << q.values[j](r, c).imag();
    out << '\n';
  }
}

void write_binary_matrix(const std::string& path, const Eigen::MatrixXcd& m) {
  static_assert(std::endian::native == std::endian::little,
                "binary dumps assume a little-endian host");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      const double pair[2] = {m(r, c).real(), m(r, c).imag()};
      out.write(reinterpret_cast<const char*>(pair), sizeof(pair));
    }
  write_json_file(path + ".json", {{"rows", m.rows()},
                                   {"cols", m.cols()},
                                   {"dtype", "complex128"},
                                   {"order", "row-major"},
                                   {"endian", "little"}});
}

Eigen::MatrixXcd read_binary_matrix(const std::string& path) {
  const json meta = read_json_file(path + ".json");
  const auto rows = meta.at("rows").get<Eigen::Index>();
  const auto cols = meta.at("cols").get<Eigen::Index>();
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  Eigen::MatrixXcd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) {
      double pair[2];
      if (!in.read(reinterpret_cast<char*>(pair), sizeof(pair)))
        throw IoError(path + ": truncated binary matrix");
      m(r, c) = complex_t(pair[0], pair[1]);
    }
  return m;
}

}  // namespace selfmod
