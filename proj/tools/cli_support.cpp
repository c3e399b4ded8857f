#include "cli_support.hpp"

#include <openssl/evp.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "polyrelax/diagnostics.hpp"
#include "polyrelax/dynamics.hpp"
#include "polyrelax/entropy.hpp"
#include "polyrelax/errors.hpp"
#include "polyrelax/minors.hpp"

namespace polyrelax::cli {

namespace fs = std::filesystem;
using nlohmann::json;

// ---------------------------------------------------------------- TOML subset

namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

[[noreturn]] void toml_fail(int line, const std::string& what) {
  std::ostringstream msg;
  msg << "config parse error (line " << line << "): " << what;
  throw ConfigError(msg.str());
}

double parse_number(const std::string& s, int line) {
  try {
    size_t pos = 0;
    const double x = std::stod(s, &pos);
    if (pos != s.size()) toml_fail(line, "trailing characters after number '" + s + "'");
    return x;
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception&) {
    toml_fail(line, "invalid number '" + s + "'");
  }
}

}  // namespace

TomlDoc parse_toml(const std::string& text) {
  TomlDoc doc;
  std::string section;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string body;
    bool in_str = false;
    for (const char c : line) {
      if (c == '"') in_str = !in_str;
      if (c == '#' && !in_str) break;
      body += c;
    }
    if (in_str) toml_fail(lineno, "unterminated string");
    body = trim(body);
    if (body.empty()) continue;

    if (body.front() == '[') {
      if (body.back() != ']') toml_fail(lineno, "unterminated section header");
      section = trim(body.substr(1, body.size() - 2));
      if (section.empty()) toml_fail(lineno, "empty section name");
      for (const char c : section)
        if (!std::isalnum(static_cast<unsigned char>(c)) && c != '_' && c != '.' &&
            c != '-')
          toml_fail(lineno, "invalid character in section name");
      continue;
    }

    const auto eq = body.find('=');
    if (eq == std::string::npos) toml_fail(lineno, "expected 'key = value'");
    const std::string key = trim(body.substr(0, eq));
    const std::string val = trim(body.substr(eq + 1));
    if (key.empty()) toml_fail(lineno, "empty key");
    if (val.empty()) toml_fail(lineno, "missing value for '" + key + "'");
    const std::string full = section.empty() ? key : section + "." + key;
    if (doc.count(full)) toml_fail(lineno, "duplicate key '" + full + "'");

    TomlValue v;
    v.line = lineno;
    if (val.front() == '"') {
      if (val.size() < 2 || val.back() != '"')
        toml_fail(lineno, "unterminated string value");
      v.kind = TomlValue::Kind::string;
      v.str = val.substr(1, val.size() - 2);
      if (v.str.find('"') != std::string::npos)
        toml_fail(lineno, "embedded quote in string value");
    } else if (val == "true" || val == "false") {
      v.kind = TomlValue::Kind::boolean;
      v.flag = (val == "true");
    } else if (val.front() == '[') {
      if (val.back() != ']') toml_fail(lineno, "arrays must close on the same line");
      v.kind = TomlValue::Kind::array;
      std::string inner = trim(val.substr(1, val.size() - 2));
      while (!inner.empty()) {
        const auto comma = inner.find(',');
        const std::string item = trim(inner.substr(0, comma));
        if (item.empty()) toml_fail(lineno, "empty array element");
        v.arr.push_back(parse_number(item, lineno));
        if (comma == std::string::npos) break;
        inner = trim(inner.substr(comma + 1));
        if (inner.empty()) toml_fail(lineno, "trailing comma in array");
      }
    } else {
      v.kind = TomlValue::Kind::number;
      v.num = parse_number(val, lineno);
    }
    doc.emplace(full, std::move(v));
  }
  return doc;
}

// ------------------------------------------------------------- configuration

namespace {

// Typed accessors over a parsed document, tracking which keys were read so
// that typos surface as errors instead of silently using defaults.
class Fields {
 public:
  explicit Fields(const TomlDoc& doc) : doc_(doc) {}

  bool has(const std::string& key) const { return doc_.count(key) != 0; }

  double number(const std::string& key, double fallback) {
    const TomlValue* v = take(key);
    if (v == nullptr) return fallback;
    if (v->kind != TomlValue::Kind::number) fail(key, *v, "a number");
    return v->num;
  }

  std::optional<double> opt_number(const std::string& key) {
    const TomlValue* v = take(key);
    if (v == nullptr) return std::nullopt;
    if (v->kind != TomlValue::Kind::number) fail(key, *v, "a number");
    return v->num;
  }

  int integer(const std::string& key, int fallback) {
    const TomlValue* v = take(key);
    if (v == nullptr) return fallback;
    if (v->kind != TomlValue::Kind::number || v->num != std::floor(v->num))
      fail(key, *v, "an integer");
    return static_cast<int>(v->num);
  }

  bool boolean(const std::string& key, bool fallback) {
    const TomlValue* v = take(key);
    if (v == nullptr) return fallback;
    if (v->kind != TomlValue::Kind::boolean) fail(key, *v, "true or false");
    return v->flag;
  }

  std::string str(const std::string& key, const std::string& fallback) {
    const TomlValue* v = take(key);
    if (v == nullptr) return fallback;
    if (v->kind != TomlValue::Kind::string) fail(key, *v, "a quoted string");
    return v->str;
  }

  std::vector<double> array(const std::string& key) {
    const TomlValue* v = take(key);
    if (v == nullptr) return {};
    if (v->kind != TomlValue::Kind::array) fail(key, *v, "an array of numbers");
    return v->arr;
  }

  // Every remaining key under `prefix.` is handed to `sink`.
  void drain_section(const std::string& prefix,
                     const std::function<void(const std::string&, const TomlValue&)>& sink) {
    for (const auto& [key, value] : doc_) {
      if (consumed_.count(key)) continue;
      if (key.rfind(prefix + ".", 0) == 0) {
        consumed_.insert(key);
        sink(key.substr(prefix.size() + 1), value);
      }
    }
  }

  void finish() const {
    for (const auto& [key, value] : doc_)
      if (!consumed_.count(key)) {
        std::ostringstream msg;
        msg << "config error (line " << value.line << "): unknown field '" << key
            << "'";
        throw ConfigError(msg.str());
      }
  }

 private:
  const TomlValue* take(const std::string& key) {
    const auto it = doc_.find(key);
    if (it == doc_.end()) return nullptr;
    consumed_.insert(key);
    return &it->second;
  }

  [[noreturn]] static void fail(const std::string& key, const TomlValue& v,
                                const std::string& want) {
    std::ostringstream msg;
    msg << "config error (line " << v.line << "): field '" << key << "' must be "
        << want;
    throw ConfigError(msg.str());
  }

  const TomlDoc& doc_;
  std::set<std::string> consumed_;
};

void require_positive(double x, const std::string& field) {
  if (!(x > 0.0))
    throw ConfigError("config error: field '" + field + "' must be positive");
}

void validate(const RunConfig& cfg) {
  if (cfg.n_cells < 8) throw ConfigError("config error: grid.n_cells must be >= 8");
  if (!(cfg.x_max > cfg.x_min))
    throw ConfigError("config error: grid.x_max must exceed grid.x_min");
  require_positive(cfg.t_end, "time.t_end");
  require_positive(cfg.cfl, "time.cfl");
  if (cfg.snapshot_stride < 0)
    throw ConfigError("config error: time.snapshot_stride must be >= 0");
  if (!(cfg.epsilon >= 0.0))
    throw ConfigError("config error: relax.epsilon must be >= 0");
  for (size_t i = 0; i < cfg.eps_list.size(); ++i) {
    if (!(cfg.eps_list[i] > 0.0) || !std::isfinite(cfg.eps_list[i]))
      throw ConfigError("config error: relax.eps_list entries must be positive");
    if (i > 0 && !(cfg.eps_list[i] < cfg.eps_list[i - 1]))
      throw ConfigError("config error: relax.eps_list must be strictly decreasing");
  }
  require_positive(cfg.slope_threshold, "relax.slope_threshold");
  if (cfg.init_kind != "sine")
    throw ConfigError("config error: init.kind must be \"sine\"");
  if (cfg.wavenumber < 1)
    throw ConfigError("config error: init.wavenumber must be >= 1");
  require_positive(cfg.w_min, "numerics.w_min");
  require_positive(cfg.rho_min, "numerics.rho_min");
  if (cfg.reconstruction_order != 1 && cfg.reconstruction_order != 2)
    throw ConfigError("config error: numerics.reconstruction_order must be 1 or 2");
  if (cfg.n_samples < 2)
    throw ConfigError("config error: check.n_samples must be >= 2");
  if (cfg.refine_factor < 2)
    throw ConfigError("config error: study.refine_factor must be >= 2");
  if (cfg.n_compare < 1)
    throw ConfigError("config error: study.n_compare must be >= 1");
  if (cfg.floor_safety < 1.0)
    throw ConfigError("config error: study.floor_safety must be >= 1");
  if (cfg.threads < 1) throw ConfigError("config error: run.threads must be >= 1");
  if (cfg.out_dir.empty())
    throw ConfigError("config error: output.directory must not be empty");
}

}  // namespace

RunConfig config_from_text(const std::string& text, const std::string& path) {
  const TomlDoc doc = parse_toml(text);
  Fields f(doc);
  RunConfig cfg;
  cfg.raw_text = text;
  cfg.source_path = path;

  cfg.family = f.str("model.family", cfg.family);
  cfg.params.dim = f.integer("model.dim", 3);
  cfg.params.xi0 = f.str("model.xi0", "identity");
  if (const auto bh = f.opt_number("model.box_halfwidth"))
    cfg.params.box_halfwidth = *bh;
  cfg.declared_gamma_I = f.opt_number("model.gamma_I");
  cfg.declared_gamma_v = f.opt_number("model.gamma_v");
  cfg.declared_M = f.opt_number("model.M");
  f.drain_section("model.params", [&](const std::string& key, const TomlValue& v) {
    if (v.kind != TomlValue::Kind::number)
      throw ConfigError("config error (line " + std::to_string(v.line) +
                        "): model.params entries must be numbers");
    cfg.params.value[key] = v.num;
  });

  cfg.n_cells = f.integer("grid.n_cells", cfg.n_cells);
  cfg.x_min = f.number("grid.x_min", cfg.x_min);
  cfg.x_max = f.number("grid.x_max", cfg.x_max);

  cfg.t_end = f.number("time.t_end", cfg.t_end);
  cfg.cfl = f.number("time.cfl", cfg.cfl);
  cfg.snapshot_stride = f.integer("time.snapshot_stride", cfg.snapshot_stride);

  cfg.epsilon = f.number("relax.epsilon", cfg.epsilon);
  cfg.eps_list = f.array("relax.eps_list");
  cfg.slope_threshold = f.number("relax.slope_threshold", cfg.slope_threshold);

  cfg.init_kind = f.str("init.kind", cfg.init_kind);
  cfg.amplitude = f.number("init.amplitude", cfg.amplitude);
  cfg.wavenumber = f.integer("init.wavenumber", cfg.wavenumber);
  cfg.prepared = f.boolean("init.prepared", cfg.prepared);
  cfg.vel_amplitude = f.opt_number("init.vel_amplitude");
  cfg.shear = f.number("init.shear", cfg.shear);
  cfg.tau_amplitude = f.number("init.tau_amplitude", cfg.tau_amplitude);

  cfg.out_dir = f.str("output.directory", cfg.out_dir);

  cfg.reconstruction_order =
      f.integer("numerics.reconstruction_order", cfg.reconstruction_order);
  cfg.deterministic_reduction =
      f.boolean("numerics.deterministic_reduction", cfg.deterministic_reduction);
  cfg.w_min = f.number("numerics.w_min", cfg.w_min);
  cfg.rho_min = f.number("numerics.rho_min", cfg.rho_min);

  cfg.n_samples = f.integer("check.n_samples", cfg.n_samples);
  cfg.refine_factor = f.integer("study.refine_factor", cfg.refine_factor);
  cfg.n_compare = f.integer("study.n_compare", cfg.n_compare);
  cfg.floor_safety = f.number("study.floor_safety", cfg.floor_safety);

  const double seed_num = f.number("run.seed", static_cast<double>(cfg.seed));
  if (seed_num < 0 || seed_num != std::floor(seed_num))
    throw ConfigError("config error: run.seed must be a nonnegative integer");
  cfg.seed = static_cast<uint64_t>(seed_num);
  cfg.threads = f.integer("run.threads", cfg.threads);

  f.finish();
  validate(cfg);
  return cfg;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("config error: cannot read '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return config_from_text(buf.str(), path);
}

// ------------------------------------------------------------ model builders

bool is_gas_family(const std::string& family) {
  return family == "gas-default" || family == "gas-two-term";
}

GasModel build_gas_model(const RunConfig& cfg) {
  if (!is_gas_family(cfg.family))
    throw ConfigError("config error: '" + cfg.family + "' is not a gas family");
  GasParams q;
  q.kappa = cfg.params.get("kappa", q.kappa);
  q.gamma = cfg.params.get("gamma", q.gamma);
  q.a = cfg.params.get("a", q.a);
  q.beta = cfg.params.get("beta", q.beta);
  q.b = cfg.params.get("b", q.b);
  q.rho_lo = cfg.params.get("rho_lo", q.rho_lo);
  q.rho_hi = cfg.params.get("rho_hi", q.rho_hi);
  q.rho_min = cfg.rho_min;
  return builtin_gas(cfg.family == "gas-default" ? "default" : "two-term", q);
}

ConstitutiveModel build_solid_model(const RunConfig& cfg) {
  if (is_gas_family(cfg.family))
    throw ConfigError("config error: '" + cfg.family +
                      "' needs the gas command family");
  try {
    return builtin_model(cfg.family, cfg.params);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("config error: ") + e.what());
  }
}

// ------------------------------------------------------------------- writers

std::string sha1_hex(const std::string& bytes) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha1(), nullptr);
  static const char* hex = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned i = 0; i < len; ++i) {
    out += hex[md[i] >> 4];
    out += hex[md[i] & 0xF];
  }
  return out;
}

namespace {

std::string g17(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

void write_text(const fs::path& path, const std::string& text) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write '" + path.string() + "'");
  out << text;
}

void write_csv(const fs::path& path, const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& rows) {
  std::string text;
  for (size_t i = 0; i < header.size(); ++i) {
    if (i) text += ',';
    text += header[i];
  }
  text += '\n';
  for (const auto& row : rows) {
    for (size_t i = 0; i < row.size(); ++i) {
      if (i) text += ',';
      text += g17(row[i]);
    }
    text += '\n';
  }
  write_text(path, text);
}

void write_json_file(const fs::path& path, const json& j) {
  write_text(path, j.dump(2) + "\n");
}

json config_json(const RunConfig& cfg) {
  json params = json::object();
  for (const auto& [key, value] : cfg.params.value) params[key] = value;
  json model = {{"family", cfg.family},
                {"dim", cfg.params.dim},
                {"xi0", cfg.params.xi0},
                {"params", params}};
  if (cfg.params.box_halfwidth) model["box_halfwidth"] = *cfg.params.box_halfwidth;
  if (cfg.declared_gamma_I) model["gamma_I"] = *cfg.declared_gamma_I;
  if (cfg.declared_gamma_v) model["gamma_v"] = *cfg.declared_gamma_v;
  if (cfg.declared_M) model["M"] = *cfg.declared_M;
  json init = {{"kind", cfg.init_kind},       {"amplitude", cfg.amplitude},
               {"wavenumber", cfg.wavenumber}, {"prepared", cfg.prepared},
               {"shear", cfg.shear},           {"tau_amplitude", cfg.tau_amplitude}};
  if (cfg.vel_amplitude) init["vel_amplitude"] = *cfg.vel_amplitude;
  return json{
      {"model", model},
      {"grid", {{"n_cells", cfg.n_cells}, {"x_min", cfg.x_min}, {"x_max", cfg.x_max}}},
      {"time",
       {{"t_end", cfg.t_end},
        {"cfl", cfg.cfl},
        {"snapshot_stride", cfg.snapshot_stride}}},
      {"relax",
       {{"epsilon", cfg.epsilon},
        {"eps_list", cfg.eps_list},
        {"slope_threshold", cfg.slope_threshold}}},
      {"init", init},
      {"numerics",
       {{"reconstruction_order", cfg.reconstruction_order},
        {"deterministic_reduction", cfg.deterministic_reduction},
        {"w_min", cfg.w_min},
        {"rho_min", cfg.rho_min}}},
      {"check", {{"n_samples", cfg.n_samples}}},
      {"study",
       {{"refine_factor", cfg.refine_factor},
        {"n_compare", cfg.n_compare},
        {"floor_safety", cfg.floor_safety}}},
      {"run", {{"seed", cfg.seed}, {"threads", cfg.threads}}},
  };
}

// Emitted before any computation starts.
void write_manifest(const RunConfig& cfg, const std::string& command,
                    const std::vector<std::string>& outputs) {
  const json manifest = {
      {"command", command},
      {"config_path", cfg.source_path},
      {"config_sha1", sha1_hex(cfg.raw_text)},
      {"config", config_json(cfg)},
      {"anchors",
       {{"internal_energy", "e(1) = 0"}, {"relaxation_potential", "G(1) = 0"}}},
      {"outputs", outputs},
  };
  write_json_file(fs::path(cfg.out_dir) / "manifest.json", manifest);
}

void write_abort(const RunConfig& cfg, const std::string& reason) {
  write_json_file(fs::path(cfg.out_dir) / "abort.json",
                  json{{"aborted", true}, {"reason", reason}});
}

SlabMotion motion_from(const RunConfig& cfg) {
  return sine_motion(cfg.params.dim, cfg.amplitude, cfg.wavenumber,
                     cfg.vel_amplitude.value_or(0.0), cfg.shear);
}

std::vector<double> effective_eps_list(const RunConfig& cfg) {
  return cfg.eps_list;
}

}  // namespace

// ------------------------------------------------------------------ commands

int cmd_check_model(const RunConfig& cfg) {
  if (is_gas_family(cfg.family)) return cmd_gas_check(cfg);
  write_manifest(cfg, "check-model", {"certificate.json"});

  json cert = {{"family", cfg.family}};
  std::vector<std::string> violated;

  // Declared constants are claims; (h1) is gamma_I > gamma_v.
  if (cfg.declared_gamma_I && cfg.declared_gamma_v) {
    const bool ok = *cfg.declared_gamma_I > *cfg.declared_gamma_v;
    cert["declared"] = {{"gamma_I", *cfg.declared_gamma_I},
                        {"gamma_v", *cfg.declared_gamma_v},
                        {"h1_pass", ok}};
    if (!ok) violated.push_back("(h1)");
  }

  if (violated.empty()) {
    const ConstitutiveModel model = build_solid_model(cfg);
    const H0Report h0 = check_h0(model, model.box, cfg.n_samples, cfg.seed);
    const bool h0_pass = h0.inversions_failed == 0 && h0.min_eig_Sigma > 0.0 &&
                         h0.max_roundtrip_residual <= 1e-8;
    cert["h0"] = {{"min_eig_Sigma", h0.min_eig_Sigma},
                  {"inversions_ok", h0.inversions_ok},
                  {"inversions_failed", h0.inversions_failed},
                  {"max_roundtrip_residual", h0.max_roundtrip_residual},
                  {"subspace", h0.subspace},
                  {"pass", h0_pass}};
    if (!h0_pass) violated.push_back("(h0)");

    const H1Report h1 = check_h1(model, cfg.n_samples, cfg.seed);
    cert["h1"] = {{"gamma_I_declared", model.gamma_I},
                  {"gamma_v_declared", model.gamma_v},
                  {"gamma_I_est", h1.gamma_I_est},
                  {"gamma_v_est", h1.gamma_v_est},
                  {"min_eig_sigma_E", h1.min_eig_sigma_E},
                  {"subspace", h1.subspace},
                  {"pass", h1.pass}};
    if (!h1.pass) violated.push_back("(h1)");

    const H2Report h2 = check_h2(model, cfg.n_samples, cfg.seed);
    const bool h2_pass = h2.M_est <= model.M * (1.0 + 1e-9) + 1e-12;
    cert["h2"] = {{"M_declared", model.M},
                  {"M_est", h2.M_est},
                  {"hess_norm_max", h2.hess_norm_max},
                  {"third_fd_max", h2.third_fd_max},
                  {"pass", h2_pass}};
    if (!h2_pass) violated.push_back("(h2)");

    const EntropyStructure structure =
        build_G(model, default_tau_box(model, 512, cfg.seed), model.xi0);
    const CharReport ch = check_char(structure, cfg.n_samples, cfg.seed);
    cert["char"] = {{"zero_set_xi_max", ch.zero_set_xi_max},
                    {"zero_set_tau_max", ch.zero_set_tau_max},
                    {"min_eig_G", ch.min_eig_G},
                    {"min_eig_Sigma", ch.min_eig_Sigma},
                    {"convexity_gap_min", ch.convexity_gap_min},
                    {"ineq2_min", ch.ineq2_min},
                    {"monotone_min", ch.monotone_min},
                    {"pass", ch.pass}};
    if (!ch.pass) violated.push_back("(char)");

    cert["delta"] = delta_estimate(model.gamma_I, model.gamma_v);
  }

  cert["violated"] = violated;
  cert["pass"] = violated.empty();
  write_json_file(fs::path(cfg.out_dir) / "certificate.json", cert);
  std::cout << cert.dump(2) << "\n";
  return violated.empty() ? kExitPass : kExitScience;
}

int cmd_gas_check(const RunConfig& cfg) {
  write_manifest(cfg, "gas check", {"certificate.json"});
  const GasModel gas = build_gas_model(cfg);
  const GasConditionReport r = check_a_conditions(gas, cfg.n_samples, cfg.seed);
  const json cert = {
      {"family", cfg.family},
      {"box", {gas.rho_lo, gas.rho_hi}},
      {"n_samples", r.n_samples},
      {"a0", {{"margin", r.a0_margin}, {"pass", r.a0_pass}}},
      {"a1", {{"margin", r.a1_margin}, {"pass", r.a1_pass}}},
      {"a2",
       {{"pair_margin", r.a2_pair_margin},
        {"pair_pass", r.a2_pair_pass},
        {"diag_margin", r.a2_diag_margin},
        {"diag_pass", r.a2_diag_pass}}},
      {"a3", {{"margin", r.a3_pair_margin}, {"pass", r.a3_pass}}},
      {"rhoE_hessian",
       {{"lead_margin", r.rhoE_lead_margin},
        {"det_margin", r.rhoE_det_margin},
        {"pass", r.rhoE_pass}}},
      {"pass", r.pass},
  };
  write_json_file(fs::path(cfg.out_dir) / "certificate.json", cert);
  std::cout << cert.dump(2) << "\n";
  return r.pass ? kExitPass : kExitScience;
}

int cmd_simulate(const RunConfig& cfg) {
  if (is_gas_family(cfg.family)) return cmd_gas_simulate(cfg);
  write_manifest(cfg, "simulate", {"series.csv", "final.csv"});

  const ConstitutiveModel model = build_solid_model(cfg);
  const EntropyStructure structure =
      build_G(model, default_tau_box(model, 512, cfg.seed), model.xi0);
  const SlabGrid grid(cfg.n_cells, cfg.x_min, cfg.x_max);
  const RelaxState init =
      init_from_motion(grid, motion_from(cfg), model, cfg.prepared, nullptr, cfg.w_min);

  RunOptions opts;
  opts.t_end = cfg.t_end;
  opts.eps = cfg.epsilon;
  opts.cfl = cfg.cfl;
  opts.snapshot_stride = cfg.snapshot_stride;
  opts.muscl = cfg.reconstruction_order >= 2;
  opts.w_min = cfg.w_min;
  opts.target_times = {cfg.t_end};

  RelaxTrajectory tr;
  try {
    tr = run_relax(init, model, structure, opts);
  } catch (const SolverAbort& e) {
    write_abort(cfg, e.what());
    std::cerr << "abort: " << e.what() << "\n";
    return kExitAbort;
  }

  std::vector<std::vector<double>> series;
  for (const auto& r : tr.records)
    series.push_back({r.t, r.total_entropy, r.dissipation_cum,
                      r.total_entropy + r.dissipation_cum, r.max_grad_f});
  write_csv(fs::path(cfg.out_dir) / "series.csv",
            {"t", "total_H", "dissipation_cum", "comb", "max_grad_F"}, series);

  const RelaxState& fin = tr.snapshots.back();
  const int iw = w_index(fin.dim);
  std::vector<std::vector<double>> rows;
  for (int j = 0; j < fin.cells(); ++j) {
    const Mat F = fin.deformation(j);
    rows.push_back({grid.center(j), fin.v(0, j), fin.v(1, j), fin.v(2, j), F(0, 0),
                    F(1, 0), F(2, 0), determinant(F), fin.tau(iw, j)});
  }
  write_csv(fs::path(cfg.out_dir) / "final.csv",
            {"x", "v1", "v2", "v3", "F11", "F21", "F31", "detF", "tau_w"}, rows);

  std::cout << "simulate: " << tr.steps << " steps to t = " << g17(fin.t)
            << ", H-monitor max violation " << g17(tr.h_violation_max) << ", wrote "
            << cfg.out_dir << "\n";
  return kExitPass;
}

int cmd_gas_simulate(const RunConfig& cfg) {
  write_manifest(cfg, "gas simulate", {"series.csv", "final.csv"});
  const GasModel gas = build_gas_model(cfg);
  const SlabGrid grid(cfg.n_cells, cfg.x_min, cfg.x_max);
  const EulerState init = gas_init(grid, gas, cfg.amplitude,
                                   cfg.vel_amplitude.value_or(0.0), cfg.wavenumber,
                                   cfg.tau_amplitude);
  GasRunOptions opts;
  opts.t_end = cfg.t_end;
  opts.eps = cfg.epsilon;
  opts.cfl = cfg.cfl;
  opts.snapshot_stride = cfg.snapshot_stride;
  opts.target_times = {cfg.t_end};

  GasTrajectory tr;
  try {
    tr = run_euler_relax(init, gas, opts);
  } catch (const SolverAbort& e) {
    write_abort(cfg, e.what());
    std::cerr << "abort: " << e.what() << "\n";
    return kExitAbort;
  }

  std::vector<std::vector<double>> series;
  for (const auto& r : tr.records)
    series.push_back({r.t, r.total_H, r.dissipation_cum});
  write_csv(fs::path(cfg.out_dir) / "series.csv",
            {"t", "total_H", "dissipation_cum"}, series);

  const EulerState& fin = tr.snapshots.back();
  std::vector<std::vector<double>> rows;
  for (int j = 0; j < fin.cells(); ++j)
    rows.push_back({grid.center(j), fin.rho[j], fin.u(j), fin.tau[j],
                    entropy_H(gas, fin.rho[j], fin.m[j], fin.tau[j])});
  write_csv(fs::path(cfg.out_dir) / "final.csv", {"x", "rho", "u", "tau", "H"}, rows);

  std::cout << "gas simulate: " << tr.steps << " steps to t = " << g17(fin.t)
            << ", wrote " << cfg.out_dir << "\n";
  return kExitPass;
}

int cmd_converge(const RunConfig& cfg) {
  if (is_gas_family(cfg.family)) return cmd_gas_converge(cfg);
  const std::vector<double> eps_list = effective_eps_list(cfg);
  if (eps_list.size() < 3)
    throw ConfigError("config error: converge needs relax.eps_list with >= 3 entries");
  write_manifest(cfg, "converge", {"convergence.csv", "summary.json"});

  const ConstitutiveModel model = build_solid_model(cfg);
  const EntropyStructure structure =
      build_G(model, default_tau_box(model, 512, cfg.seed), model.xi0);
  StudyOptions opt;
  opt.n_cells = cfg.n_cells;
  opt.refine_factor = cfg.refine_factor;
  opt.t_end = cfg.t_end;
  opt.cfl = cfg.cfl;
  opt.muscl = cfg.reconstruction_order >= 2;
  opt.n_compare = cfg.n_compare;
  opt.w_min = cfg.w_min;
  opt.floor_safety = cfg.floor_safety;

  const ConvergenceTable table =
      convergence_study(model, structure, motion_from(cfg), opt, eps_list);

  std::vector<std::vector<double>> rows;
  std::vector<double> excluded;
  for (const auto& r : table.rows) {
    rows.push_back({r.eps, r.sup_e_r, r.v_gap, r.F_gap, r.tau_gap,
                    r.aborted ? 1.0 : 0.0, r.floor_limited ? 1.0 : 0.0});
    if (r.aborted || r.floor_limited) excluded.push_back(r.eps);
  }
  write_csv(fs::path(cfg.out_dir) / "convergence.csv",
            {"eps", "sup_e_r", "v_gap_L2", "F_gap_L2", "tau_gap_L2", "aborted",
             "floor_limited"},
            rows);

  const bool pass = table.slope_valid && table.fit.slope >= cfg.slope_threshold;
  const json summary = {{"slope", table.fit.slope},
                        {"slope_half_width", table.fit.half_width},
                        {"slope_valid", table.slope_valid},
                        {"floor_estimate", table.floor_estimate},
                        {"excluded_eps", excluded},
                        {"compare_times", table.compare_times},
                        {"threshold", cfg.slope_threshold},
                        {"pass", pass}};
  write_json_file(fs::path(cfg.out_dir) / "summary.json", summary);
  std::cout << summary.dump(2) << "\n";
  return pass ? kExitPass : kExitScience;
}

int cmd_gas_converge(const RunConfig& cfg) {
  const std::vector<double> eps_list = effective_eps_list(cfg);
  if (eps_list.size() < 3)
    throw ConfigError("config error: converge needs relax.eps_list with >= 3 entries");
  write_manifest(cfg, "gas converge", {"eps_study.csv", "summary.json"});

  const GasModel gas = build_gas_model(cfg);
  GasEpsStudyOptions opt;
  opt.n_cells = cfg.n_cells;
  opt.t_end = cfg.t_end;
  opt.cfl = cfg.cfl;
  opt.rho_amp = cfg.amplitude;
  opt.vel_amp = cfg.vel_amplitude.value_or(0.0);
  opt.wavenumber = cfg.wavenumber;
  opt.tau_amp = cfg.tau_amplitude;
  opt.n_compare = cfg.n_compare;

  const GasEpsStudy study = gas_eps_study(gas, opt, eps_list);
  std::vector<std::vector<double>> rows;
  for (const auto& r : study.rows)
    rows.push_back({r.eps, r.l1_rho_gap, r.l1_u_gap});
  write_csv(fs::path(cfg.out_dir) / "eps_study.csv",
            {"eps", "l1_rho_gap", "l1_u_gap"}, rows);

  const bool pass = study.rho_monotone && study.u_monotone;
  const json summary = {{"rho_monotone", study.rho_monotone},
                        {"u_monotone", study.u_monotone},
                        {"pass", pass}};
  write_json_file(fs::path(cfg.out_dir) / "summary.json", summary);
  std::cout << summary.dump(2) << "\n";
  return pass ? kExitPass : kExitScience;
}

int cmd_gas_crosscheck(const RunConfig& cfg) {
  write_manifest(cfg, "gas crosscheck", {"crosscheck.json"});
  const GasModel gas = build_gas_model(cfg);
  CrossCheckOptions opt;
  opt.n_cells = cfg.n_cells;
  opt.t_end = cfg.t_end;
  opt.eps = cfg.epsilon;
  opt.cfl = cfg.cfl;
  opt.vel_amp = cfg.vel_amplitude.value_or(0.05);
  opt.wavenumber = cfg.wavenumber;
  opt.tau_amp = cfg.tau_amplitude;
  opt.muscl = cfg.reconstruction_order >= 2;
  opt.w_min = cfg.w_min;

  CrossCheckReport rep;
  try {
    rep = lagrangean_cross_check(gas, opt);
  } catch (const SolverAbort& e) {
    write_abort(cfg, e.what());
    std::cerr << "abort: " << e.what() << "\n";
    return kExitAbort;
  }
  const json out = {{"n_cells", rep.n_cells},
                    {"l1_density_gap", rep.l1_density_gap},
                    {"abel_residual_l1", rep.abel_residual_l1},
                    {"map_min_slope", rep.map_min_slope}};
  write_json_file(fs::path(cfg.out_dir) / "crosscheck.json", out);
  std::cout << out.dump(2) << "\n";
  return kExitPass;
}

int cmd_selftest(bool perturb) {
  int failures = 0;
  const auto check = [&](const std::string& name, double value, double target,
                         double tol) {
    const double gap = std::abs(value - target);
    if (gap <= tol) {
      std::cout << "ok: " << name << "\n";
    } else {
      std::cout << "FAIL: " << name << " |" << g17(value) << " - " << g17(target)
                << "| = " << g17(gap) << " > " << g17(tol) << "\n";
      ++failures;
    }
  };

  {
    Rng rng(2024);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    double worst = 0.0;
    for (int s = 0; s < 100; ++s) {
      Mat F(3, 3);
      for (int i = 0; i < 9; ++i) F(i / 3, i % 3) = u(rng) + (i % 4 == 0 ? 1.5 : 0.0);
      const Mat lhs = F * cofactor(F).transpose();
      worst = std::max(worst,
                       (lhs - determinant(F) * Mat::Identity(3, 3)).cwiseAbs().maxCoeff() /
                           std::max(1.0, std::abs(determinant(F))));
    }
    check("minors: F cof(F)^T = det F I", worst, 0.0, 1e-12);
  }
  {
    ModelParams p;
    p.value = {{"gamma_E", 3.5}, {"gamma_v", 0.5}};
    const ConstitutiveModel quad = builtin_model("quadratic", p);
    const EntropyStructure s = build_G(quad, default_tau_box(quad), quad.xi0);
    const Box tb = s.tau_box();
    double lam = s.hessian_psi_min_eig(quad.xi0, tb.center());
    if (perturb) lam += 1e-3;  // test hook: simulated regression
    check("entropy: quadratic psi-hessian minimum eigenvalue", lam,
          3.0 - std::sqrt(2.0), 1e-10);
    // G(tau) = |tau|^2/(2 gamma_v) - tau . xi0 + const for the quadratic family.
    const Vec t1 = tb.center(), t2 = 0.5 * (tb.center() + tb.lo);
    check("entropy: quadratic G closed form", s.G_value(t1) - s.G_value(t2),
          (t1.squaredNorm() - t2.squaredNorm()) / (2.0 * 0.5) -
              quad.xi0.dot(t1 - t2),
          1e-10);
    check("entropy: delta estimate", delta_estimate(4.0, 0.5),
          3.0 - std::sqrt(2.0), 1e-15);
  }
  {
    const GasModel gas = builtin_gas("default");
    check("gasdyn: entropy anchor H(1,0,1)", entropy_H(gas, 1.0, 0.0, 1.0), 1.0,
          1e-14);
    check("gasdyn: dissipation D(1,2)", gas_dissipation(gas, 1.0, 2.0), 0.5, 1e-14);
    const GasConditionReport r = check_a_conditions(gas, 801);
    check("gasdyn: certificate margin a0", r.a0_margin, 0.25, 1e-12);
    check("gasdyn: certificate margin a1", r.a1_margin, 1.0, 1e-12);
    check("gasdyn: certificate margin a3", r.a3_pair_margin, 1.0, 1e-12);
    EulerState s;
    s.grid = SlabGrid(16);
    s.rho = Vec::Constant(16, 1.2);
    s.m = Vec::Constant(16, 0.36);
    s.tau = Vec::Constant(16, gas.P.p(1.2));
    for (int i = 0; i < 5; ++i) s = step_euler_relax(s, gas, 1e-3, 0.1);
    check("gasdyn: uniform equilibrium fixed point",
          (s.rho.array() - 1.2).abs().maxCoeff(), 0.0, 1e-14);
  }

  if (failures > 0) {
    std::cout << "selftest: " << failures << " failure(s)\n";
    return kExitScience;
  }
  std::cout << "selftest: all oracles pass\n";
  return kExitPass;
}

// ------------------------------------------------------------------ frontend

namespace {

struct SharedFlags {
  std::string config_path;
  std::string out_dir;
  std::string eps_csv;
  int threads = 0;
  std::string seed_str;
};

std::vector<double> parse_eps_csv(const std::string& csv) {
  std::vector<double> out;
  std::string item;
  std::istringstream in(csv);
  while (std::getline(in, item, ',')) {
    item = trim(item);
    if (item.empty()) throw ConfigError("usage error: empty entry in --eps list");
    out.push_back(parse_number(item, 0));
  }
  if (out.empty()) throw ConfigError("usage error: --eps list is empty");
  return out;
}

void add_shared_flags(CLI::App* sub, SharedFlags& flags) {
  sub->add_option("--config", flags.config_path, "TOML configuration file");
  sub->add_option("--out", flags.out_dir, "output directory override");
  sub->add_option("--eps", flags.eps_csv, "comma-separated relaxation times");
  sub->add_option("--threads", flags.threads, "worker thread budget (recorded)");
  sub->add_option("--seed", flags.seed_str, "sampling RNG seed override");
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"Relaxation experiments for polyconvex elastodynamics and gas dynamics"};
  app.require_subcommand(1);
  SharedFlags flags;
  std::string selected;
  bool perturb = false;

  const auto leaf = [&](CLI::App* parent, const std::string& name,
                        const std::string& help, const std::string& tag) {
    CLI::App* sub = parent->add_subcommand(name, help);
    add_shared_flags(sub, flags);
    sub->callback([&selected, tag] { selected = tag; });
    return sub;
  };

  leaf(&app, "check-model", "hypothesis certificates for the configured model",
       "check-model");
  leaf(&app, "simulate", "run the configured relaxation experiment", "simulate");
  leaf(&app, "converge", "eps-convergence study against a refined reference",
       "converge");
  CLI::App* gas = app.add_subcommand("gas", "Eulerian pressure-relaxation commands");
  gas->require_subcommand(1);
  leaf(gas, "check", "gas condition certificates", "gas-check");
  leaf(gas, "simulate", "run the Eulerian relaxation solver", "gas-simulate");
  leaf(gas, "converge", "gas eps-study against the projected reference",
       "gas-converge");
  leaf(gas, "crosscheck", "Lagrangean/Eulerian consistency check", "gas-crosscheck");
  CLI::App* self = leaf(&app, "selftest", "run the embedded analytic oracles",
                        "selftest");
  self->add_flag("--perturb", perturb,
                 "perturb an internal constant (failure-path test hook)");

  try {
    app.parse(argc, const_cast<char**>(argv));
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitPass : kExitUsage;
  }

  try {
    if (selected == "selftest") return cmd_selftest(perturb);

    if (flags.config_path.empty())
      throw ConfigError("usage error: --config is required for this command");
    RunConfig cfg = load_config(flags.config_path);
    if (!flags.out_dir.empty()) cfg.out_dir = flags.out_dir;
    if (!flags.eps_csv.empty()) cfg.eps_list = parse_eps_csv(flags.eps_csv);
    if (flags.threads > 0) cfg.threads = flags.threads;
    if (!flags.seed_str.empty()) {
      try {
        cfg.seed = std::stoull(flags.seed_str);
      } catch (const std::exception&) {
        throw ConfigError("usage error: --seed must be an unsigned integer");
      }
    }
    for (size_t i = 0; i < cfg.eps_list.size(); ++i)
      if (!(cfg.eps_list[i] > 0.0) ||
          (i > 0 && !(cfg.eps_list[i] < cfg.eps_list[i - 1])))
        throw ConfigError(
            "config error: eps list must be positive and strictly decreasing");

    if (selected == "check-model") return cmd_check_model(cfg);
    if (selected == "simulate") return cmd_simulate(cfg);
    if (selected == "converge") return cmd_converge(cfg);
    if (selected == "gas-check") return cmd_gas_check(cfg);
    if (selected == "gas-simulate") return cmd_gas_simulate(cfg);
    if (selected == "gas-converge") return cmd_gas_converge(cfg);
    if (selected == "gas-crosscheck") return cmd_gas_crosscheck(cfg);
    throw ConfigError("usage error: no command selected");
  } catch (const ConfigError& e) {
    std::cerr << e.what() << "\n";
    return kExitUsage;
  } catch (const SolverAbort& e) {
    std::cerr << "abort: " << e.what() << "\n";
    return kExitAbort;
  } catch (const NoConvergenceError& e) {
    std::cerr << "abort: " << e.what() << "\n";
    return kExitAbort;
  }
}

int run_cli(const std::vector<std::string>& args) {
  std::vector<std::string> full;
  full.push_back("polyrelax");
  full.insert(full.end(), args.begin(), args.end());
  std::vector<const char*> argv;
  argv.reserve(full.size());
  for (const auto& a : full) argv.push_back(a.c_str());
  return run_cli(static_cast<int>(argv.size()), argv.data());
}

}  // namespace polyrelax::cli
