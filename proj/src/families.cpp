#include "selfmod/families.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

namespace selfmod {

namespace {

constexpr complex_t I(0.0, 1.0);

std::size_t expected_params(const std::string& family) {
  if (family == "zero") return 0;
  if (family == "constant") return 2;
  if (family == "linear-phase") return 4;
  if (family == "real-linear") return 2;
  if (family == "bump") return 4;
  if (family == "polynomial") return 0;  // any even count >= 2
  throw FamilyError("unknown family '" + family + "'");
}

}  // namespace

const std::vector<std::string>& family_names() {
  static const std::vector<std::string> names{"zero",        "constant",   "linear-phase",
                                              "real-linear", "polynomial", "bump"};
  return names;
}

FamilySpec parse_family_spec(const std::string& text) {
  FamilySpec spec;
  const auto colon = text.find(':');
  spec.family = text.substr(0, colon);
  if (colon != std::string::npos) {
    std::stringstream ss(text.substr(colon + 1));
    std::string item;
    while (std::getline(ss, item, ',')) {
      try {
        std::size_t used = 0;
        spec.params.push_back(std::stod(item, &used));
        if (used != item.size()) throw std::invalid_argument(item);
      } catch (const std::exception&) {
        throw FamilyError("bad family parameter '" + item + "'");
      }
    }
  }
  expected_params(spec.family);
  if (colon != std::string::npos) validate_family(spec);
  return spec;
}

void validate_family(const FamilySpec& spec) {
  const std::size_t want = expected_params(spec.family);
  if (spec.family == "polynomial") {
    if (spec.params.size() < 2 || spec.params.size() % 2 != 0)
      throw FamilyError("polynomial needs complex coefficient pairs re,im,...");
    return;
  }
  if (spec.params.size() != want)
    throw FamilyError(spec.family + " needs " + std::to_string(want) + " parameters");
  if (spec.family == "bump" && !(spec.params[2] > 0.0))
    throw FamilyError("bump width must be positive");
}

FamilySpec random_family(const std::string& family, std::mt19937_64& rng) {
  expected_params(family);
  std::uniform_real_distribution<real_t> u(0.0, 1.0);
  auto in = [&](real_t lo, real_t hi) { return lo + (hi - lo) * u(rng); };
  FamilySpec s{family, {}};
  if (family == "constant") {
    s.params = {in(-1.0, 1.0), in(-1.0, 1.0)};
  } else if (family == "linear-phase") {
    const real_t sign = u(rng) < 0.5 ? -1.0 : 1.0;
    s.params = {in(0.5, 1.5), in(0.5, 1.5), sign * in(0.5, 2.0),
                in(0.0, 2.0 * std::numbers::pi)};
  } else if (family == "real-linear") {
    s.params = {in(0.5, 1.5), in(0.5, 1.5)};
  } else if (family == "polynomial") {
    for (int k = 0; k < 3; ++k) {
      s.params.push_back(in(-1.0, 1.0));
      s.params.push_back(in(-1.0, 1.0));
    }
  } else if (family == "bump") {
    s.params = {in(0.5, 1.5), in(0.5, 2.5), in(0.5, 1.5), in(-2.0, 2.0)};
  }
  return s;
}

DiracPotential make_potential(const FamilySpec& spec, const Grid& grid) {
  validate_family(spec);
  const auto& a = spec.params;
  if (spec.family == "zero")
    return DiracPotential::sample(grid, [](real_t) { return complex_t(0.0); },
                                  [](real_t) { return complex_t(0.0); });
  if (spec.family == "constant")
    return DiracPotential::sample(grid, [&](real_t) { return complex_t(a[0], a[1]); },
                                  [](real_t) { return complex_t(0.0); });
  if (spec.family == "linear-phase") {
    return DiracPotential::sample(
        grid,
        [&](real_t x) { return (a[0] + a[1] * x) * std::exp(I * (a[2] * x + a[3])); },
        [&](real_t x) {
          return std::exp(I * (a[2] * x + a[3])) * (a[1] + I * a[2] * (a[0] + a[1] * x));
        });
  }
  if (spec.family == "real-linear")
    return DiracPotential::sample(grid, [&](real_t x) { return complex_t(a[0] + a[1] * x); },
                                  [&](real_t) { return complex_t(a[1]); });
  if (spec.family == "polynomial") {
    const std::size_t deg = a.size() / 2;
    auto coeff = [&](std::size_t k) { return complex_t(a[2 * k], a[2 * k + 1]); };
    return DiracPotential::sample(
        grid,
        [&](real_t x) {
          complex_t s(0.0);
          for (std::size_t k = deg; k-- > 0;) s = s * x + coeff(k);
          return s;
        },
        [&](real_t x) {
          complex_t s(0.0);
          for (std::size_t k = deg; k-- > 1;) s = s * x + static_cast<real_t>(k) * coeff(k);
          return s;
        });
  }
  // bump
  auto p = [&](real_t x) {
    const real_t y = (x - a[1]) / a[2];
    return a[0] * std::exp(-y * y) * std::exp(I * a[3] * x);
  };
  return DiracPotential::sample(grid, p, [&](real_t x) {
    return p(x) * (-2.0 * (x - a[1]) / (a[2] * a[2]) + I * a[3]);
  });
}

}  // namespace selfmod
