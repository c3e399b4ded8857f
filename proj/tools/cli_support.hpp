#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "polyrelax/constitutive.hpp"
#include "polyrelax/gasdyn.hpp"

namespace polyrelax::cli {

// Minimal TOML subset: [section] / [section.sub] headers and flat
// `key = value` lines, where value is "string", true/false, a number, or a
// single-line numeric array [a, b, c].  Comments start with '#' outside
// quotes.  Errors carry the offending line number.
struct TomlValue {
  enum class Kind { string, number, boolean, array };
  Kind kind = Kind::number;
  std::string str;
  double num = 0.0;
  bool flag = false;
  std::vector<double> arr;
  int line = 0;
};
using TomlDoc = std::map<std::string, TomlValue>;  // key: "section.key"
TomlDoc parse_toml(const std::string& text);

// Run configuration (defaults double as the smoke setup).
struct RunConfig {
  // [model] / [model.params]
  std::string family = "quadratic";
  ModelParams params;
  std::optional<double> declared_gamma_I, declared_gamma_v, declared_M;
  // [grid]
  int n_cells = 128;
  double x_min = 0.0, x_max = 1.0;
  // [time]
  double t_end = 0.2;
  double cfl = 0.4;
  int snapshot_stride = 0;
  // [relax]
  double epsilon = 0.1;
  std::vector<double> eps_list;
  double slope_threshold = 0.8;
  // [init]
  std::string init_kind = "sine";
  double amplitude = 0.1;
  int wavenumber = 1;
  bool prepared = true;
  std::optional<double> vel_amplitude;
  double shear = 0.4;
  double tau_amplitude = 0.0;
  // [output]
  std::string out_dir = "out";
  // [numerics]
  int reconstruction_order = 1;  // 1: first order, 2: slope-limited
  bool deterministic_reduction = true;
  double w_min = 0.1;
  double rho_min = 1e-3;
  // [check] / [study]
  int n_samples = 2000;
  int refine_factor = 4;
  int n_compare = 10;
  double floor_safety = 3.0;
  // [run]
  uint64_t seed = 20240817;
  int threads = 1;
  // bookkeeping
  std::string raw_text;
  std::string source_path = "<inline>";
};

RunConfig config_from_text(const std::string& text,
                           const std::string& path = "<inline>");
RunConfig load_config(const std::string& path);

bool is_gas_family(const std::string& family);
GasModel build_gas_model(const RunConfig& cfg);
ConstitutiveModel build_solid_model(const RunConfig& cfg);

std::string sha1_hex(const std::string& bytes);

// Exit codes: pass / scientific failure / usage or config / runtime abort.
inline constexpr int kExitPass = 0;
inline constexpr int kExitScience = 1;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitAbort = 3;

// Individual commands (exposed for tests); each writes its manifest before
// computing and returns an exit code.
int cmd_check_model(const RunConfig& cfg);
int cmd_simulate(const RunConfig& cfg);
int cmd_converge(const RunConfig& cfg);
int cmd_gas_check(const RunConfig& cfg);
int cmd_gas_simulate(const RunConfig& cfg);
int cmd_gas_converge(const RunConfig& cfg);
int cmd_gas_crosscheck(const RunConfig& cfg);
int cmd_selftest(bool perturb);

// Full argument handling (subcommands, flags, error-to-exit-code mapping).
int run_cli(int argc, const char* const* argv);
int run_cli(const std::vector<std::string>& args);  // without program name

}  // namespace polyrelax::cli
