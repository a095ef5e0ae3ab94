#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <numbers>
#include <sstream>

#include "nsstab/commands.hpp"
#include "nsstab/config.hpp"
#include "nsstab/report_io.hpp"
#include "nsstab/snapshot_io.hpp"

using namespace nsstab;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("nsstab_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void spit(const fs::path& p, const std::string& s) {
  std::ofstream out(p, std::ios::binary);
  out << s;
}

EnvLookup env_of(std::map<std::string, std::string> vars) {
  return [vars](const std::string& k) -> std::optional<std::string> {
    auto it = vars.find(k);
    if (it == vars.end()) return std::nullopt;
    return it->second;
  };
}

const EnvLookup kNoEnv = env_of({});

FlowState sample_state() {
  PeriodicGrid g(3.0, 3, 8);
  PerturbationSpec s;
  s.gamma = 0.2;
  s.mean = {0.1, -0.2, 0.3};
  FlowState f = make_perturbation(g, s);
  f.t = 1.25;
  return f;
}

}  // namespace

TEST_CASE("snapshot round trip") {
  const FlowState s = sample_state();
  const FlowState r = decode_state(encode_state(s));
  CHECK(r.t == 1.25);
  CHECK(r.role == Role::perturbation);
  CHECK(r.mean[2] == 0.3);
  CHECK(max_coeff_difference(r.u_bar, s.u_bar) < 1e-16);
  const fs::path dir = scratch("snap");
  write_state(dir / "a.snap", s);
  CHECK(max_coeff_difference(read_state(dir / "a.snap").u_bar, s.u_bar) < 1e-16);
}

TEST_CASE("damaged snapshots raise integrity errors") {
  std::vector<std::uint8_t> bytes = encode_state(sample_state());
  SUBCASE("flipped payload byte") {
    bytes[bytes.size() / 2] ^= 0x10;
    CHECK_THROWS_AS(decode_state(bytes), IntegrityError);
  }
  SUBCASE("truncated") {
    bytes.resize(bytes.size() - 9);
    CHECK_THROWS_AS(decode_state(bytes), IntegrityError);
  }
  SUBCASE("bad magic") {
    bytes[0] = 'X';
    CHECK_THROWS_AS(decode_state(bytes), IntegrityError);
  }
  SUBCASE("missing file") { CHECK_THROWS_AS(read_state("/nonexistent/nsstab.snap"), IntegrityError); }
}

TEST_CASE("field snapshots") {
  PeriodicGrid g(2.0, 2, 8);
  SpectralField u(g, 1);
  u.set_coeff(0, {1, 2, 0}, {0.5, 0.25});
  const fs::path dir = scratch("field");
  write_field(dir / "f.snap", u, 3.5);
  double t = 0.0;
  const SpectralField r = read_field(dir / "f.snap", &t);
  CHECK(t == 3.5);
  CHECK(max_coeff_difference(r, u) < 1e-16);
}

TEST_CASE("number formatting round trips") {
  for (double v : {0.1, 1.0 / 3.0, 1e-300, -2.5e17, 0.0}) CHECK(std::stod(format_double(v)) == v);
  CHECK(format_double(std::numeric_limits<double>::infinity()) == "inf");
  CHECK(json_number(std::numeric_limits<double>::infinity()) == "Infinity");
  CHECK(std::isnan(json_to_double(json_number(std::nan("")))));
  CHECK(json_to_double(json_number(0.7)) == 0.7);
}

TEST_CASE("CSV round trip") {
  CsvTable t;
  t.header = {"t", "x"};
  t.rows = {{0.0, 1.0 / 3.0}, {0.1, std::numeric_limits<double>::infinity()}};
  const CsvTable r = parse_csv(to_csv(t));
  CHECK(r.header == t.header);
  CHECK(r.rows[0][1] == 1.0 / 3.0);
  CHECK(std::isinf(r.rows[1][1]));
}

TEST_CASE("sha256 of a known string") {
  CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_CASE("sealed reports detect edits") {
  json cfg = default_config();
  json rep = {{"kind", "certificate"}, {"value", 1.5}};
  seal_report(rep, cfg);
  CHECK(rep.contains("input_hash"));
  CHECK(verify_report(rep));
  json edited = rep;
  edited["value"] = 1.6;
  CHECK_FALSE(verify_report(edited));
  json later = rep;
  later["generated_at"] = "2000-01-01T00:00:00Z";
  CHECK(verify_report(later));
}

TEST_CASE("svg plot is well formed") {
  const std::string svg = svg_line_plot("x", "t", {{"a", {0, 1, 2}, {1e-3, 1e-4, 1e-5}}}, true);
  CHECK(svg.rfind("<svg", 0) == 0);
  CHECK(svg.find("</svg>") != std::string::npos);
  CHECK(svg.find("<polyline") != std::string::npos);
}

TEST_CASE("config strictness") {
  SUBCASE("defaults") {
    const json d = load_config_text("{}", kNoEnv);
    CHECK(d == default_config());
  }
  SUBCASE("unknown key names the path") {
    try {
      load_config_text(R"({"physics": {"viscocity": 1.0}})", kNoEnv);
      FAIL("accepted an unknown key");
    } catch (const ConfigError& e) {
      CHECK(std::string(e.what()).find("physics.viscocity") != std::string::npos);
    }
  }
  SUBCASE("type errors name the key") {
    try {
      load_config_text(R"({"grid": {"N": "big"}})", kNoEnv);
      FAIL("accepted a string");
    } catch (const ConfigError& e) {
      CHECK(std::string(e.what()).find("grid.N") != std::string::npos);
    }
  }
  SUBCASE("syntax errors give the line") {
    try {
      load_config_text("{\n  \"grid\": {\n    \"N\": 16,\n  }\n}", kNoEnv);
      FAIL("accepted bad JSON");
    } catch (const ConfigError& e) {
      CHECK(std::string(e.what()).find("line 4") != std::string::npos);
    }
  }
  SUBCASE("invalid physics") {
    const json d = load_config_text(R"({"physics": {"nu": -1.0}})", kNoEnv);
    CHECK_THROWS_AS(scenario_from_config(d), InvalidInput);
  }
  SUBCASE("environment overrides") {
    const json d = load_config_text(R"({"solver": {"dt": 0.5}})",
                                    env_of({{"NSSTAB_SOLVER_DT", "0.25"}, {"NSSTAB_NAME", "from_env"},
                                            {"NSSTAB_BASE_FORCING_FAMILY", "periodic_decaying"}}));
    CHECK(d["solver"]["dt"] == 0.25);
    CHECK(d["name"] == "from_env");
    CHECK(d["base_forcing"]["family"] == "periodic_decaying");
    CHECK_THROWS_AS(load_config_text("{}", env_of({{"NSSTAB_GRID_N", "sixteen"}})), ConfigError);
  }
  SUBCASE("sweeps") {
    const json d = load_config_text(R"({"scenarios": [{"name": "a"}, {"perturbation": {"gamma": 4e-4}}]})", kNoEnv);
    const auto runs = expand_scenarios(d);
    REQUIRE(runs.size() == 2);
    CHECK(runs[0]["name"] == "a");
    CHECK(runs[1]["perturbation"]["gamma"] == 4e-4);
    CHECK_THROWS_AS(load_config_text(R"({"scenarios": [{"bogus": 1}]})", kNoEnv), ConfigError);
  }
}

// ---------------------------------------------------------------------------
// Commands

namespace {

struct Run {
  int code;
  std::string out, err;
};

template <class F>
Run run(F f, const CommandOptions& o) {
  std::ostringstream out, err;
  const int code = f(o, out, err);
  return {code, out.str(), err.str()};
}

CommandOptions with_config(const fs::path& dir, const json& cfg) {
  spit(dir / "config.json", cfg.dump());
  CommandOptions o;
  o.config_path = (dir / "config.json").string();
  o.out_dir = (dir / "out").string();
  return o;
}

}  // namespace

TEST_CASE("simulate with zero data") {
  const fs::path dir = scratch("sim_zero");
  const Run r = run(cmd_simulate, with_config(dir, {{"grid", {{"N", 8}}}, {"solver", {{"t_end", 0.2}, {"dt", 0.05}}}}));
  CHECK(r.code == kExitOk);
  const CsvTable t = parse_csv(slurp(dir / "out" / "series.csv"));
  CHECK(t.rows.size() == 5);
  for (const auto& row : t.rows) CHECK(row[1] == 0.0);
  CHECK(fs::exists(dir / "out" / "trajectory.json"));
}

TEST_CASE("simulate the Taylor-Green preset") {
  const fs::path dir = scratch("sim_tg");
  const json cfg = {{"base_initial", {{"amplitude", 1.0}}}, {"solver", {{"t_end", 1.0}, {"dt", 1e-3}}}};
  const Run r = run(cmd_simulate, with_config(dir, cfg));
  REQUIRE(r.code == kExitOk);
  const CsvTable t = parse_csv(slurp(dir / "out" / "series.csv"));
  CHECK(t.header[1] == "l2_sq");
  CHECK(t.rows.back()[0] == doctest::Approx(1.0));
  CHECK(t.rows.back()[1] == doctest::Approx(std::exp(-4.0) * t.rows.front()[1]).epsilon(1e-6));
}

TEST_CASE("simulate full3d and pair systems") {
  const fs::path dir = scratch("sim_3d");
  json cfg = {{"grid", {{"N", 8}}}, {"solver", {{"t_end", 0.1}, {"dt", 0.05}}}, {"simulate", {{"system", "full3d"}}}};
  CHECK(run(cmd_simulate, with_config(dir, cfg)).code == kExitOk);
  cfg["simulate"]["system"] = "pair";
  CHECK(run(cmd_simulate, with_config(dir, cfg)).code == kExitOk);
  CHECK(fs::exists(dir / "out" / "perturbation" / "series.csv"));
  cfg["simulate"]["system"] = "spectral";
  CHECK(run(cmd_simulate, with_config(dir, cfg)).code == kExitConfig);
}

TEST_CASE("simulate resumes from a snapshot") {
  const fs::path dir = scratch("sim_resume");
  json cfg = {{"grid", {{"N", 8}}},
              {"base_initial", {{"amplitude", 1.0}}},
              {"solver", {{"t_end", 0.5}, {"dt", 0.01}}},
              {"simulate", {{"snapshot_times", {0.5}}}}};
  REQUIRE(run(cmd_simulate, with_config(dir, cfg)).code == kExitOk);
  fs::path last;
  for (const auto& e : fs::directory_iterator(dir / "out" / "snapshots")) last = std::max(last, e.path());
  const FlowState s = read_state(last);
  CHECK(s.t == doctest::Approx(0.5));
  const fs::path dir2 = scratch("sim_resume2");
  cfg["simulate"]["resume"] = last.string();
  REQUIRE(run(cmd_simulate, with_config(dir2, cfg)).code == kExitOk);
  const CsvTable t = parse_csv(slurp(dir2 / "out" / "series.csv"));
  CHECK(t.rows.front()[0] == doctest::Approx(0.5));
  CHECK(t.rows.back()[0] == doctest::Approx(1.0));
  // corrupted resume file
  std::string bytes = slurp(last);
  bytes[bytes.size() / 2] ^= 0x01;
  spit(dir2 / "bad.snap", bytes);
  cfg["simulate"]["resume"] = (dir2 / "bad.snap").string();
  const Run bad = run(cmd_simulate, with_config(dir2, cfg));
  CHECK(bad.code == kExitIntegrity);
  CHECK(bad.err.find("integrity") != std::string::npos);
}

TEST_CASE("simulate reports a solver abort with exit 4") {
  const fs::path dir = scratch("sim_abort");
  const json cfg = {{"base_initial", {{"amplitude", 80.0}}}, {"solver", {{"t_end", 0.5}, {"dt", 0.05}}}};
  const Run r = run(cmd_simulate, with_config(dir, cfg));
  CHECK(r.code == kExitSolver);
  CHECK(fs::exists(dir / "out" / "series.csv"));
}

TEST_CASE("malformed config exits with 2 and names the key") {
  const fs::path dir = scratch("bad_cfg");
  const Run r = run(cmd_simulate, with_config(dir, {{"physics", {{"viscocity", 1.0}}}}));
  CHECK(r.code == kExitConfig);
  CHECK(r.err.find("viscocity") != std::string::npos);
}

TEST_CASE("certify") {
  const fs::path dir = scratch("certify");
  SUBCASE("zero data") {
    const Run r = run(cmd_certify, with_config(dir, {{"grid", {{"N", 8}}}, {"window", {{"T", 3.0}}}, {"constants", {{"samples", 100}, {"N", 8}}}}));
    REQUIRE(r.code == kExitOk);
    const json j = json::parse(slurp(dir / "out" / "certificate.json"));
    CHECK(json_to_double(j["abar_chain"]["abar3_sq"]) == 1.0);
    CHECK(j["abar_chain"]["membership"] == true);
    CHECK(j["gamma_hypothesis"] == "satisfied");
    CHECK(j["schema_version"] == kCertificateSchemaVersion);
    CHECK(verify_report(j));
  }
  SUBCASE("the first forcing example reports Abar1^2 = 1 / 2") {
    const json cfg = {{"grid", {{"N", 16}}},
                      {"window", {{"T", 40.0}, {"k_max", 8}}},
                      {"base_forcing", {{"family", "constant_plus_decaying"}, {"a", {1.0, 0.0}}, {"epsilon", 1.0}, {"lambda", 1.0}}},
                      {"constants", {{"samples", 100}, {"N", 8}}}};
    REQUIRE(run(cmd_certify, with_config(dir, cfg)).code == kExitOk);
    const json j = json::parse(slurp(dir / "out" / "certificate.json"));
    CHECK(json_to_double(j["abar_chain"]["abar1_sq"]) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(j["a_chain"]["A9"] == "Infinity");
  }
  SUBCASE("gamma above gamma_* is reported, not an error") {
    const json cfg = {{"grid", {{"N", 8}}}, {"window", {{"T", 3.0}}}, {"perturbation", {{"gamma", 1e3}}}, {"constants", {{"samples", 100}, {"N", 8}}}};
    REQUIRE(run(cmd_certify, with_config(dir, cfg)).code == kExitOk);
    const json j = json::parse(slurp(dir / "out" / "certificate.json"));
    CHECK(j["gamma_hypothesis"] == "violated");
  }
}

TEST_CASE("stability, report verification and sweeps") {
  const fs::path dir = scratch("stability");
  const json cfg = {{"grid", {{"N", 8}}},
                    {"window", {{"T", 3.0}, {"count", 2}}},
                    {"solver", {{"dt", 0.05}}},
                    {"perturbation", {{"gamma", 1e-4}, {"fill", 0.0}}},
                    {"constants", {{"samples", 100}, {"N", 8}}}};
  CommandOptions o = with_config(dir, cfg);
  o.svg = true;
  const Run r = run(cmd_stability, o);
  REQUIRE(r.code == kExitOk);
  const fs::path out = dir / "out";
  const json j = json::parse(slurp(out / "report.json"));
  CHECK(j["verdicts"]["never_exceeded"] == true);
  CHECK(fs::exists(out / "x2.svg"));
  const CsvTable series = parse_csv(slurp(out / "series.csv"));
  for (const auto& row : series.rows) CHECK(row[1] == 0.0);
  CHECK(parse_csv(slurp(out / "windows.csv")).rows.size() == 2);

  // identical inputs give byte-identical reports apart from the timestamp
  const std::string first = slurp(out / "report.json");
  REQUIRE(run(cmd_stability, o).code == kExitOk);
  json a = json::parse(first), b = json::parse(slurp(out / "report.json"));
  a.erase("generated_at");
  b.erase("generated_at");
  CHECK(a.dump() == b.dump());

  CommandOptions ro;
  ro.out_dir = out.string();
  ro.svg = true;
  fs::remove(out / "x2.svg");
  CHECK(run(cmd_report, ro).code == kExitOk);
  CHECK(fs::exists(out / "x2.svg"));
  json tampered = json::parse(first);
  tampered["verdicts"]["never_exceeded"] = false;
  spit(out / "report.json", tampered.dump(2));
  CHECK(run(cmd_report, ro).code == kExitIntegrity);

  json sweep = cfg;
  sweep["scenarios"] = {{{"name", "s0"}}, {{"name", "s1"}, {"perturbation", {{"gamma", 1e-6}}}}};
  CommandOptions so = with_config(dir, sweep);
  so.jobs = 2;
  REQUIRE(run(cmd_stability, so).code == kExitOk);
  CHECK(fs::exists(out / "s0" / "report.json"));
  CHECK(fs::exists(out / "s1" / "report.json"));
}

TEST_CASE("stability with a corrupted initial snapshot exits with 3") {
  const fs::path dir = scratch("stability_bad");
  spit(dir / "u0.snap", "NSSTSNP1 not really a snapshot");
  const json cfg = {{"grid", {{"N", 8}}}, {"window", {{"T", 3.0}, {"count", 1}}}, {"solver", {{"dt", 0.05}}},
                    {"perturbation", {{"initial_snapshot", (dir / "u0.snap").string()}}},
                    {"constants", {{"samples", 100}, {"N", 8}}}};
  const Run r = run(cmd_stability, with_config(dir, cfg));
  CHECK(r.code == kExitIntegrity);
  CHECK(r.err.find("integrity") != std::string::npos);
}
