#include "selfmod/families.hpp"
#include "selfmod/field_io.hpp"
#include "selfmod/recovery.hpp"
#include "selfmod/unitary.hpp"
#include "selfmod/wave_model.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <sstream>

using namespace selfmod;

namespace {

enum ExitCode : int {
  kOk = 0,
  kParse = 2,      // bad arguments, unreadable or malformed files
  kFailed = 3,     // inconsistency, residual criterion not met, not equivalent
  kBreakdown = 4,  // factorization breakdown
};

std::string utc_timestamp() {
  const std::time_t now =
      std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

std::vector<real_t> parse_numbers(const std::string& text, std::size_t count,
                                  const char* what) {
  std::vector<real_t> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t used = 0;
    try {
      out.push_back(std::stod(item, &used));
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != item.size())
      throw IoError(std::string(what) + ": bad number '" + item + "'");
  }
  if (out.size() != count)
    throw IoError(std::string(what) + ": expected " + std::to_string(count) + " numbers");
  return out;
}

struct Tolerances {
  std::optional<real_t> zero, dependence, consistency, angle, negative_trace;
  bool raw_orientation = false;

  RecoveryTolerances get() const {
    RecoveryTolerances t;
    t.zero = zero;
    t.dependence = dependence;
    t.consistency = consistency;
    t.angle = angle;
    t.negative_trace = negative_trace;
    t.canonical_orientation = !raw_orientation;
    return t;
  }
};

json resolved_json(const RecoveryTolerances::Resolved& r) {
  return {{"zero", r.zero},
          {"dependence", r.dependence},
          {"consistency", r.consistency},
          {"angle", r.angle},
          {"negative_trace", r.negative_trace}};
}

void emit(const json& report, const std::string& out) {
  if (out.empty())
    std::cout << report.dump(2) << '\n';
  else
    write_json_file(out, report);
}

// gen

struct GenArgs {
  std::string family = "linear-phase";
  std::optional<std::uint64_t> seed;
  real_t h = 1e-3;
  real_t xmax = 5.0;
  std::string out, csv;
};

int cmd_gen(const GenArgs& a) {
  FamilySpec spec = parse_family_spec(a.family);
  if (spec.params.empty() && spec.family != "zero") {
    std::mt19937_64 rng(a.seed.value_or(0));
    spec = random_family(spec.family, rng);
  }
  const auto p = make_potential(spec, Grid::covering(a.xmax, a.h));
  json j = to_json(p);
  j["family"] = spec.family;
  j["params"] = spec.params;
  if (a.out.empty())
    std::cout << j.dump() << '\n';
  else
    write_json_file(a.out, j);
  if (!a.csv.empty()) write_csv(a.csv, p.p);
  return kOk;
}

// forward

struct IoArgs {
  std::string in, out, csv;
};

int cmd_forward(const IoArgs& a) {
  const auto p = dirac_potential_from_json(read_json_file(a.in));
  const auto q = schrodinger_from_dirac(p);
  emit(to_json(q), a.out);
  if (!a.csv.empty()) write_csv(a.csv, q);
  return kOk;
}

// scramble

struct ScrambleArgs {
  IoArgs io;
  std::string theta;         // "a,b,g,phi" or "random"
  std::string theta_matrix;  // 8 numbers, row-major re,im
  std::uint64_t seed = 0;
};

int cmd_scramble(const ScrambleArgs& a) {
  const auto q = matrix_field_from_json(read_json_file(a.io.in));
  if (q.k != 2) throw IoError("scramble: potential must be 2x2");
  U2Matrix theta;
  json theta_info;
  if (!a.theta_matrix.empty()) {
    if (!a.theta.empty()) throw IoError("scramble: give --theta or --theta-matrix, not both");
    const auto v = parse_numbers(a.theta_matrix, 8, "--theta-matrix");
    theta << complex_t(v[0], v[1]), complex_t(v[2], v[3]), complex_t(v[4], v[5]),
        complex_t(v[6], v[7]);
    theta_info = to_json(params_from_u2(theta));
  } else {
    U2Params params;
    if (a.theta.empty() || a.theta == "random") {
      std::mt19937_64 rng(a.seed);
      params = random_u2_params(rng);
    } else {
      const auto v = parse_numbers(a.theta, 4, "--theta");
      params = U2Params{v[0], v[1], v[2], v[3]}.normalized();
    }
    theta = u2_from_params(params);
    theta_info = to_json(params);
  }
  json j = to_json(conjugate_potential(q, theta));
  j["theta"] = theta_info;
  emit(j, a.io.out);
  if (!a.io.csv.empty()) write_csv(a.io.csv, conjugate_potential(q, theta));
  return kOk;
}

// recover

struct RecoverArgs {
  IoArgs io;
  Tolerances tol;
};

json candidate_json(const DiracPotential& p) { return to_json(p); }

int cmd_recover(const RecoverArgs& a) {
  const auto q = matrix_field_from_json(read_json_file(a.io.in));
  const auto tol = a.tol.get();
  json report{{"timestamp", utc_timestamp()}};
  RecoveryOutcome out;
  try {
    out = recover_pipeline(q, tol);
  } catch (const LinearlyIndependentError& e) {
    report["kind"] = "Inconsistent";
    report["error"] = e.what();
    emit(report, a.io.out);
    return kFailed;
  } catch (const InconsistentInputError& e) {
    report["kind"] = "Inconsistent";
    report["error"] = e.what();
    emit(report, a.io.out);
    return kFailed;
  }

  report["case"] = to_string(out.case_taken);
  report["kind"] = to_string(out.kind);
  json cands = json::array();
  for (const auto& c : out.candidates) cands.push_back(candidate_json(c));
  report["candidates"] = cands;
  const auto& d = out.diagnostics;
  json residuals{{"modulus_residual", d.modulus_residual},
                 {"unit_circle_defect", d.unit_circle_defect},
                 {"sin_separation", d.sin_separation},
                 {"arccos_argument", d.arccos_argument},
                 {"imag_defect", d.imag_defect},
                 {"kappa0", d.kappa0}};
  if (!d.message.empty()) report["message"] = d.message;
  if (out.pipeline) {
    const auto& pd = *out.pipeline;
    const auto& an = pd.annihilator;
    report["annihilator"] = {
        {"c", {an.c(0), an.c(1), an.c(2)}},
        {"residual", an.residual},
        {"dependency_case", to_string(an.dependency_case)},
        {"singular_values",
         {an.singular_values(0), an.singular_values(1), an.singular_values(2)}},
        {"gamma1", pd.angles.gamma1},
        {"phi1", pd.angles.phi1}};
    residuals["r2_sup"] = pd.r2_sup;
    residuals["closed_form_discrepancy"] = pd.closed_form_discrepancy;
    report["orientation_flipped"] = pd.orientation_flipped;
    report["tolerances"] = resolved_json(pd.tolerances);
  }
  report["residuals"] = residuals;
  emit(report, a.io.out);
  if (!a.io.csv.empty() && !out.candidates.empty())
    write_csv(a.io.csv, out.candidates.front().p);
  return out.kind == RecoveryKind::Inconsistent ? kFailed : kOk;
}

// wavemodel

struct WaveArgs {
  IoArgs io;
  real_t T = 1.0;
  std::optional<real_t> h;
  std::optional<std::size_t> m;
  std::optional<real_t> gamma;
  std::size_t trim = 3;
  std::string profile = "power";
  real_t tol_chol = 1e-10;
  real_t tol_conjugator = 5e-2;
  std::string dump;
};

int cmd_wavemodel(const WaveArgs& a) {
  const auto q = matrix_field_from_json(read_json_file(a.io.in));
  std::size_t m = a.m.value_or(201);
  if (!a.m && a.h) m = static_cast<std::size_t>(std::llround(a.T / *a.h)) + 1;
  WaveDiscretization disc(a.T, m, q.k);
  WaveModelOptions opts;
  opts.gamma_shift = a.gamma;
  opts.tol_chol = a.tol_chol;
  opts.extraction.trim = a.trim;
  if (a.profile == "flat")
    opts.extraction.profile = TestProfile::FlatWindow;
  else if (a.profile != "power")
    throw IoError("--profile must be 'power' or 'flat'");

  json report{{"timestamp", utc_timestamp()}, {"T", disc.T}, {"h", disc.dt()},
              {"m", disc.m}, {"k", disc.k}, {"trim", a.trim}};
  WaveModelResult res;
  try {
    res = wave_model_pipeline(q, disc, opts);
  } catch (const FactorizationError& e) {
    report["error"] = e.what();
    emit(report, a.io.out);
    return kBreakdown;
  }
  const auto& c = res.conjugator;
  report["cholesky_residual"] = res.cholesky_residual;
  report["connecting_hermitian_defect"] = res.connecting_hermitian_defect;
  report["connecting_identity_defect"] = res.connecting_identity_defect;
  report["factor_identity_defect"] = res.factor_identity_defect;
  report["conjugator"] = {{"phi", matrix_to_json(c.phi)},
                          {"residual", c.residual},
                          {"rms_residual", c.rms_residual},
                          {"sup_residual", c.sup_residual}};
  report["tolerances"] = {{"chol", a.tol_chol}, {"conjugator", a.tol_conjugator}};
  if (a.gamma) report["gamma_shift"] = *a.gamma;
  report["Q_mod"] = to_json(res.model.Q_mod);
  report["reliable"] = res.model.reliable;
  emit(report, a.io.out);
  if (!a.io.csv.empty()) write_csv(a.io.csv, res.model.Q_mod);
  if (!a.dump.empty()) {
    std::filesystem::create_directories(a.dump);
    const std::filesystem::path dir(a.dump);
    write_binary_matrix((dir / "W.bin").string(), res.W);
    write_binary_matrix((dir / "C.bin").string(), res.C);
    write_binary_matrix((dir / "V.bin").string(), res.V);
    write_binary_matrix((dir / "W_mod.bin").string(), res.W_mod);
  }
  return c.residual <= a.tol_conjugator ? kOk : kFailed;
}

// compare

struct CompareArgs {
  std::string a, b, out;
  real_t tol = 1e-6;
};

int cmd_compare(const CompareArgs& a) {
  const auto p1 = dirac_potential_from_json(read_json_file(a.a));
  const auto p2 = dirac_potential_from_json(read_json_file(a.b));
  const auto phase = dirac_shape_equivalent(p1, p2, a.tol);
  json report{{"timestamp", utc_timestamp()},
              {"tolerance", a.tol},
              {"equivalent", phase.has_value()},
              {"exceptional_first", is_exceptional_sufficient(p1, a.tol)},
              {"exceptional_second", is_exceptional_sufficient(p2, a.tol)}};
  if (phase) report["phase"] = *phase;
  emit(report, a.out);
  return phase ? kOk : kFailed;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Dirac/Schroedinger self-modeling experiments"};
  app.set_help_flag("--help", "Print this help message and exit");
  app.require_subcommand(1);

  GenArgs gen;
  auto* g = app.add_subcommand("gen", "Sample a synthetic Dirac potential");
  g->add_option("--family", gen.family, "family or family:p1,p2,...")
      ->capture_default_str();
  g->add_option("--seed", gen.seed, "seed for random family parameters (default 0)");
  g->add_option("--h", gen.h, "grid step")->capture_default_str()->check(CLI::PositiveNumber);
  g->add_option("--xmax", gen.xmax, "interval end")->capture_default_str()->check(CLI::PositiveNumber);
  g->add_option("--out", gen.out, "output JSON (stdout if omitted)");
  g->add_option("--csv", gen.csv, "CSV of p");

  IoArgs fwd;
  auto* f = app.add_subcommand("forward", "Schroedinger potential of a Dirac potential");
  f->add_option("--in", fwd.in, "Dirac potential JSON")->required();
  f->add_option("--out", fwd.out, "matrix field JSON");
  f->add_option("--csv", fwd.csv, "CSV of Q");

  ScrambleArgs scr;
  auto* s = app.add_subcommand("scramble", "Conjugate a 2x2 potential by a constant unitary");
  s->add_option("--in", scr.io.in, "matrix field JSON")->required();
  s->add_option("--out", scr.io.out, "matrix field JSON");
  s->add_option("--csv", scr.io.csv, "CSV of the scrambled field");
  s->add_option("--theta", scr.theta, "\"alpha,beta,gamma,phi\" or \"random\"");
  s->add_option("--theta-matrix", scr.theta_matrix, "row-major re,im of the 4 entries");
  s->add_option("--seed", scr.seed, "seed for a random theta")->capture_default_str();

  RecoverArgs rec;
  auto* r = app.add_subcommand("recover", "Recover the Dirac shape class from a scrambled Q");
  r->add_option("--in", rec.io.in, "matrix field JSON")->required();
  r->add_option("--out", rec.io.out, "report JSON");
  r->add_option("--csv", rec.io.csv, "CSV of the leading candidate");
  r->add_option("--tol-zero", rec.tol.zero)->check(CLI::PositiveNumber);
  r->add_option("--tol-dependence", rec.tol.dependence)->check(CLI::PositiveNumber);
  r->add_option("--tol-consistency", rec.tol.consistency)->check(CLI::PositiveNumber);
  r->add_option("--tol-angle", rec.tol.angle)->check(CLI::PositiveNumber);
  r->add_option("--tol-negative-trace", rec.tol.negative_trace)->check(CLI::PositiveNumber);
  r->add_flag("--raw-orientation", rec.tol.raw_orientation,
              "report candidates without the orientation normalization");

  WaveArgs wav;
  auto* w = app.add_subcommand("wavemodel", "Wave functional model of a matrix potential");
  w->add_option("--in", wav.io.in, "matrix field JSON")->required();
  w->add_option("--out", wav.io.out, "report JSON");
  w->add_option("--csv", wav.io.csv, "CSV of Q_mod");
  w->add_option("--T", wav.T, "horizon")->capture_default_str()->check(CLI::PositiveNumber);
  w->add_option("--h", wav.h, "time step (sets m = T/h + 1)")->check(CLI::PositiveNumber);
  w->add_option("--m", wav.m, "time nodes (default 201)");
  w->add_option("--gamma", wav.gamma, "shift Q by gamma I during the run");
  w->add_option("--trim", wav.trim, "trim margin in cells")->capture_default_str();
  w->add_option("--profile", wav.profile, "test profile: power or flat")->capture_default_str();
  w->add_option("--tol-chol", wav.tol_chol)->capture_default_str()->check(CLI::PositiveNumber);
  w->add_option("--tol-conjugator", wav.tol_conjugator)->capture_default_str()->check(CLI::PositiveNumber);
  w->add_option("--dump", wav.dump, "directory for binary W, C, V, W_mod");

  CompareArgs cmp;
  auto* c = app.add_subcommand("compare", "Dirac shape equivalence of two potentials");
  c->add_option("first", cmp.a, "Dirac potential JSON")->required();
  c->add_option("second", cmp.b, "Dirac potential JSON")->required();
  c->add_option("--tol", cmp.tol)->capture_default_str()->check(CLI::PositiveNumber);
  c->add_option("--out", cmp.out, "report JSON");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kParse;
  }

  try {
    if (*g) return cmd_gen(gen);
    if (*f) return cmd_forward(fwd);
    if (*s) return cmd_scramble(scr);
    if (*r) return cmd_recover(rec);
    if (*w) return cmd_wavemodel(wav);
    if (*c) return cmd_compare(cmp);
  } catch (const FactorizationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kBreakdown;
  } catch (const InconsistentInputError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kFailed;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kParse;
  }
  return kOk;
}
