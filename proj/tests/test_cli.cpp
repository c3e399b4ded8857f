#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "cli_support.hpp"
#include "polyrelax/errors.hpp"

using namespace polyrelax;
using namespace polyrelax::cli;
namespace fs = std::filesystem;

namespace {

// Scratch directory per test binary run; cleaned up on destruction.
struct Scratch {
  fs::path root;
  Scratch() {
    root = fs::temp_directory_path() / "polyrelax_cli_test";
    fs::remove_all(root);
    fs::create_directories(root);
  }
  ~Scratch() { fs::remove_all(root); }
  std::string dir(const std::string& name) const { return (root / name).string(); }
  std::string file(const std::string& name, const std::string& text) const {
    const fs::path p = root / name;
    std::ofstream(p, std::ios::binary) << text;
    return p.string();
  }
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

const char* kQuadratic =
    "[model]\n"
    "family = \"quadratic\"\n"
    "[model.params]\n"
    "gamma_E = 3.5\n"
    "gamma_v = 0.5\n"
    "[grid]\n"
    "n_cells = 64\n"
    "[time]\n"
    "t_end = 0.05\n"
    "[check]\n"
    "n_samples = 200\n";

const char* kGas =
    "[model]\n"
    "family = \"gas-default\"\n"
    "[grid]\n"
    "n_cells = 48\n"
    "[time]\n"
    "t_end = 0.1\n"
    "[relax]\n"
    "eps_list = [0.1, 0.05, 0.025]\n"
    "[init]\n"
    "amplitude = 0.05\n"
    "vel_amplitude = 0.05\n"
    "[check]\n"
    "n_samples = 400\n"
    "[study]\n"
    "n_compare = 4\n";

}  // namespace

TEST_CASE("toml subset: kinds, sections, comments") {
  const TomlDoc doc = parse_toml(
      "# leading comment\n"
      "top = 1\n"
      "[alpha]\n"
      "name = \"value # not a comment\"\n"
      "flag = true\n"
      "list = [1, 2.5, -3e-1]  # trailing comment\n"
      "[alpha.beta]\n"
      "x = -4.5\n");
  CHECK(doc.at("top").num == 1.0);
  CHECK(doc.at("alpha.name").str == "value # not a comment");
  CHECK(doc.at("alpha.flag").flag);
  REQUIRE(doc.at("alpha.list").arr.size() == 3);
  CHECK(doc.at("alpha.list").arr[1] == 2.5);
  CHECK(doc.at("alpha.list").arr[2] == -0.3);
  CHECK(doc.at("alpha.beta.x").num == -4.5);
  CHECK(doc.at("alpha.beta.x").line == 8);
}

TEST_CASE("toml subset: line-numbered diagnostics") {
  const auto error_text = [](const std::string& text) {
    try {
      parse_toml(text);
      return std::string("no error");
    } catch (const ConfigError& e) {
      return std::string(e.what());
    }
  };
  CHECK(error_text("a = 1\na = 2\n").find("line 2") != std::string::npos);
  CHECK(error_text("a = 1\na = 2\n").find("duplicate") != std::string::npos);
  CHECK(error_text("x 3\n").find("line 1") != std::string::npos);
  CHECK(error_text("s = \"open\n").find("unterminated") != std::string::npos);
  CHECK(error_text("v = [1, ]\n").find("trailing comma") != std::string::npos);
  CHECK(error_text("v = [1, two]\n").find("invalid number") != std::string::npos);
  CHECK(error_text("[sec\nk = 1\n").find("section") != std::string::npos);
}

TEST_CASE("config: defaults, overrides, strict keys") {
  const RunConfig cfg = config_from_text(kQuadratic);
  CHECK(cfg.family == "quadratic");
  CHECK(cfg.params.value.at("gamma_E") == 3.5);
  CHECK(cfg.n_cells == 64);
  CHECK(cfg.t_end == 0.05);
  CHECK(cfg.cfl == 0.4);           // default survives
  CHECK(cfg.epsilon == 0.1);       // default survives
  CHECK(cfg.seed == 20240817ULL);  // default survives
  CHECK(!cfg.vel_amplitude.has_value());

  CHECK_THROWS_AS(config_from_text("[grid]\nn_cellz = 64\n"), ConfigError);
  CHECK_THROWS_AS(config_from_text("[time]\nt_end = -1.0\n"), ConfigError);
  CHECK_THROWS_AS(config_from_text("[grid]\nn_cells = 4\n"), ConfigError);
  CHECK_THROWS_AS(config_from_text("[relax]\neps_list = [0.1, 0.1]\n"), ConfigError);
  CHECK_THROWS_AS(config_from_text("[relax]\neps_list = [0.1, -0.05]\n"), ConfigError);
  CHECK_THROWS_AS(config_from_text("[numerics]\nreconstruction_order = 3\n"),
                  ConfigError);
  CHECK_THROWS_AS(config_from_text("[run]\nthreads = 0\n"), ConfigError);
  CHECK_THROWS_AS(config_from_text("[init]\nkind = \"square\"\n"), ConfigError);
  // model.params is free-form numeric; strings there are rejected.
  CHECK_THROWS_AS(config_from_text("[model.params]\nname = \"x\"\n"), ConfigError);
  CHECK(config_from_text("[model.params]\nanything_goes = 7.0\n")
            .params.value.count("anything_goes") == 1);
}

TEST_CASE("check-model: quadratic certificate passes, declared (h1) fails by name") {
  Scratch sc;
  CHECK(run_cli({"check-model", "--config", sc.file("quad.toml", kQuadratic),
                 "--out", sc.dir("chk")}) == kExitPass);
  const std::string cert = slurp(fs::path(sc.dir("chk")) / "certificate.json");
  CHECK(cert.find("\"pass\": true") != std::string::npos);
  CHECK(slurp(fs::path(sc.dir("chk")) / "manifest.json").find("config_sha1") !=
        std::string::npos);

  const std::string bad =
      "[model]\nfamily = \"quadratic\"\ngamma_I = 1.0\ngamma_v = 2.0\n"
      "[model.params]\ngamma_E = 3.5\ngamma_v = 0.5\n";
  CHECK(run_cli({"check-model", "--config", sc.file("bad.toml", bad), "--out",
                 sc.dir("chk_bad")}) == kExitScience);
  CHECK(slurp(fs::path(sc.dir("chk_bad")) / "certificate.json").find("(h1)") !=
        std::string::npos);
}

TEST_CASE("gas check: certificate emitted, literal pair condition reported") {
  Scratch sc;
  const int rc = run_cli({"gas", "check", "--config", sc.file("gas.toml", kGas),
                          "--out", sc.dir("gchk")});
  CHECK(rc == kExitScience);  // the all-pairs inequality fails on this family
  const std::string cert = slurp(fs::path(sc.dir("gchk")) / "certificate.json");
  CHECK(cert.find("\"a0\"") != std::string::npos);
  CHECK(cert.find("\"a3\"") != std::string::npos);
  CHECK(cert.find("\"pair_pass\": false") != std::string::npos);
  CHECK(cert.find("\"diag_pass\": true") != std::string::npos);
}

TEST_CASE("simulate: smoke run, created out dir, byte-identical reruns") {
  Scratch sc;
  const std::string cfg = sc.file("quad.toml", kQuadratic);
  const std::string out1 = sc.dir("sim/nested/deep");  // must be created
  CHECK(run_cli({"simulate", "--config", cfg, "--out", out1}) == kExitPass);
  CHECK(fs::exists(fs::path(out1) / "manifest.json"));
  CHECK(fs::exists(fs::path(out1) / "series.csv"));
  CHECK(fs::exists(fs::path(out1) / "final.csv"));

  const std::string out2 = sc.dir("sim2");
  CHECK(run_cli({"simulate", "--config", cfg, "--out", out2}) == kExitPass);
  CHECK(slurp(fs::path(out1) / "series.csv") == slurp(fs::path(out2) / "series.csv"));
  CHECK(slurp(fs::path(out1) / "final.csv") == slurp(fs::path(out2) / "final.csv"));

  const std::string head = slurp(fs::path(out1) / "series.csv");
  CHECK(head.rfind("t,total_H,dissipation_cum,comb,max_grad_F", 0) == 0);
}

TEST_CASE("simulate: determinant-floor abort retains partial artifacts") {
  Scratch sc;
  const std::string cfg = sc.file(
      "abort.toml",
      "[model]\nfamily = \"quadratic\"\n"
      "[model.params]\ngamma_E = 3.5\ngamma_v = 0.5\n"
      "[time]\nt_end = 0.3\n"
      "[grid]\nn_cells = 32\n"
      "[init]\namplitude = 0.02\nvel_amplitude = 1.2\n"
      "[numerics]\nw_min = 0.8\n");
  const std::string out = sc.dir("abort");
  CHECK(run_cli({"simulate", "--config", cfg, "--out", out}) == kExitAbort);
  CHECK(fs::exists(fs::path(out) / "manifest.json"));  // written pre-run
  const std::string reason = slurp(fs::path(out) / "abort.json");
  CHECK(reason.find("determinant floor") != std::string::npos);
}

TEST_CASE("converge: usage gate, science gate, identical csv bytes") {
  Scratch sc;
  const std::string cfg = sc.file("quad.toml", kQuadratic);
  // fewer than three epsilons is a usage error
  CHECK(run_cli({"converge", "--config", cfg, "--out", sc.dir("c0"), "--eps",
                 "0.1,0.05"}) == kExitUsage);

  const std::string small =
      "[model]\nfamily = \"quadratic\"\n"
      "[model.params]\ngamma_E = 3.5\ngamma_v = 0.5\n"
      "[grid]\nn_cells = 48\n"
      "[time]\nt_end = 0.1\n"
      "[relax]\neps_list = [0.1, 0.05, 0.025]\n"
      "[numerics]\nreconstruction_order = 2\n"
      "[study]\nn_compare = 4\n";
  const std::string cvg = sc.file("cvg.toml", small);
  CHECK(run_cli({"converge", "--config", cvg, "--out", sc.dir("c1")}) == kExitPass);
  const std::string summary = slurp(fs::path(sc.dir("c1")) / "summary.json");
  CHECK(summary.find("\"pass\": true") != std::string::npos);
  CHECK(run_cli({"converge", "--config", cvg, "--out", sc.dir("c2")}) == kExitPass);
  CHECK(slurp(fs::path(sc.dir("c1")) / "convergence.csv") ==
        slurp(fs::path(sc.dir("c2")) / "convergence.csv"));
}

TEST_CASE("gas converge and crosscheck") {
  Scratch sc;
  const std::string cfg = sc.file("gas.toml", kGas);
  CHECK(run_cli({"gas", "converge", "--config", cfg, "--out", sc.dir("gc")}) ==
        kExitPass);
  CHECK(slurp(fs::path(sc.dir("gc")) / "summary.json")
            .find("\"rho_monotone\": true") != std::string::npos);
  CHECK(fs::exists(fs::path(sc.dir("gc")) / "eps_study.csv"));

  const std::string xc =
      "[model]\nfamily = \"gas-default\"\n"
      "[grid]\nn_cells = 32\n"
      "[time]\nt_end = 0.1\n"
      "[init]\nvel_amplitude = 0.05\n";
  CHECK(run_cli({"gas", "crosscheck", "--config", sc.file("xc.toml", xc), "--out",
                 sc.dir("gx")}) == kExitPass);
  const std::string rep = slurp(fs::path(sc.dir("gx")) / "crosscheck.json");
  CHECK(rep.find("l1_density_gap") != std::string::npos);
  CHECK(rep.find("abel_residual_l1") != std::string::npos);
}

TEST_CASE("usage errors and selftest") {
  Scratch sc;
  CHECK(run_cli({"simulate"}) == kExitUsage);  // --config required
  CHECK(run_cli({"simulate", "--config", sc.file("broken.toml", "x 3\n")}) ==
        kExitUsage);
  CHECK(run_cli({"no-such-command"}) == kExitUsage);
  CHECK(run_cli({"gas"}) == kExitUsage);  // gas requires a subcommand
  CHECK(run_cli({"selftest"}) == kExitPass);
  CHECK(run_cli({"selftest", "--perturb"}) == kExitScience);
}
