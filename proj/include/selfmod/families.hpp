#pragma once

#include "selfmod/dirac.hpp"

#include <random>
#include <string>
#include <vector>

namespace selfmod {

// Synthetic Dirac potentials with exact derivative channels.
//   zero
//   constant      (re, im)                 p = re + i im
//   linear-phase  (a, b, c, d)             p = (a + b x) e^{i (c x + d)}
//   real-linear   (a, b)                   p = a + b x
//   polynomial    (re0, im0, re1, im1, ...) p = sum_k (re_k + i im_k) x^k
//   bump          (amp, centre, width, c)  p = amp e^{-(x - centre)^2 / width^2} e^{i c x}
struct FamilySpec {
  std::string family;
  std::vector<real_t> params;
};

class FamilyError : public Error {
 public:
  using Error::Error;
};

const std::vector<std::string>& family_names();

// "name" or "name:v1,v2,..."; explicit parameters are validated.
FamilySpec parse_family_spec(const std::string& text);

// Checks the parameter count and ranges.
void validate_family(const FamilySpec& spec);

// Seeded parameters. linear-phase draws a, b in [0.5, 1.5], |c| in [0.5, 2]
// with random sign, d in [0, 2 pi), so the argument is never constant.
FamilySpec random_family(const std::string& family, std::mt19937_64& rng);

DiracPotential make_potential(const FamilySpec& spec, const Grid& grid);

}  // namespace selfmod
