#include "nsstab/config.hpp"

#include <cctype>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace nsstab {

using nlohmann::json;

json default_config() {
  const Scenario s;
  return {
      {"name", s.name},
      {"grid", {{"L", s.L}, {"N", s.N}}},
      {"physics", {{"nu", s.nu}}},
      {"solver", {{"dt", s.dt}, {"t_end", 1.0}, {"scheme", "if_ab2"}, {"cfl_max", s.cfl_max}, {"dealias", true}}},
      {"window", {{"T", s.T}, {"count", s.windows}, {"k_max", s.k_max}}},
      {"base_forcing",
       {{"family", to_string(s.base_forcing.family)},
        {"a", json::array({s.base_forcing.a[0], s.base_forcing.a[1]})},
        {"epsilon", s.base_forcing.epsilon},
        {"lambda", s.base_forcing.lambda},
        {"mode", json::array({s.base_forcing.mode[0], s.base_forcing.mode[1]})},
        {"unit_h1", s.base_forcing.unit_h1}}},
      {"base_initial", {{"amplitude", s.base_initial_amplitude}}},
      {"perturbation",
       {{"gamma", s.perturbation.gamma},
        {"k0", s.perturbation.k0},
        {"seed", s.perturbation.seed},
        {"fill", s.perturbation.fill},
        {"mean", json::array({0.0, 0.0, 0.0})},
        {"initial_snapshot", ""}}},
      {"g",
       {{"amplitude", s.g.amplitude},
        {"rate", s.g.rate},
        {"mode", json::array({s.g.mode[0], s.g.mode[1], s.g.mode[2]})},
        {"mean", json::array({0.0, 0.0, 0.0})},
        {"mean_rate", s.g.mean_rate}}},
      {"constants",
       {{"mode", to_string(s.constants_mode)},
        {"samples", s.calibration.samples},
        {"seed", s.calibration.seed},
        {"N", s.calibration.N},
        {"headroom", s.calibration.headroom}}},
      {"certificate", {{"epsilon", s.epsilon}}},
      {"simulate", {{"system", "base2d"}, {"snapshot_times", json::array()}, {"resume", ""}}},
      {"output", {{"dir", "out"}, {"svg", false}}},
  };
}

namespace {

std::string line_of(const std::string& text, std::size_t byte) {
  std::size_t line = 1;
  for (std::size_t i = 0; i < byte && i < text.size(); ++i)
    if (text[i] == '\n') ++line;
  return std::to_string(line);
}

bool same_kind(const json& def, const json& v) {
  if (def.is_boolean()) return v.is_boolean();
  if (def.is_number_unsigned()) return v.is_number_unsigned() || (v.is_number_integer() && v.get<long long>() >= 0);
  if (def.is_number_integer()) return v.is_number_integer();
  if (def.is_number()) return v.is_number();
  if (def.is_string()) return v.is_string();
  if (def.is_array()) {
    if (!v.is_array()) return false;
    if (!def.empty() && v.size() != def.size()) return false;
    const json& proto = def.empty() ? json(0.0) : def.front();
    for (const json& e : v) {
      if (proto.is_number_integer() ? !e.is_number_integer() : !e.is_number()) return false;
    }
    return true;
  }
  return false;
}

std::string kind_name(const json& def) {
  if (def.is_boolean()) return "a boolean";
  if (def.is_number_unsigned()) return "a non-negative integer";
  if (def.is_number_integer()) return "an integer";
  if (def.is_number()) return "a number";
  if (def.is_string()) return "a string";
  if (def.is_array()) {
    const bool ints = !def.empty() && def.front().is_number_integer();
    return (def.empty() ? std::string("an array") : "an array of " + std::to_string(def.size())) +
           (ints ? " integers" : " numbers");
  }
  return "an object";
}

// Merges src into dst strictly against the default shape.
void merge(json& dst, const json& src, const json& shape, const std::string& path) {
  if (!src.is_object()) throw ConfigError("config: '" + (path.empty() ? "<root>" : path) + "' must be an object");
  for (const auto& [key, value] : src.items()) {
    const std::string p = path.empty() ? key : path + "." + key;
    if (path.empty() && key == "scenarios") continue;
    if (!shape.contains(key)) throw ConfigError("config: unknown key '" + p + "'");
    const json& def = shape[key];
    if (def.is_object()) {
      merge(dst[key], value, def, p);
    } else {
      if (!same_kind(def, value)) throw ConfigError("config: '" + p + "' must be " + kind_name(def));
      dst[key] = value;
    }
  }
}

std::string upper(std::string s) {
  for (char& c : s) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return s;
}

void apply_env(json& doc, const json& shape, const EnvLookup& env) {
  for (const auto& [section, keys] : shape.items()) {
    if (!keys.is_object()) {
      if (auto v = env("NSSTAB_" + upper(section))) doc[section] = *v;
      continue;
    }
    for (const auto& [key, def] : keys.items()) {
      const std::string var = "NSSTAB_" + upper(section) + "_" + upper(key);
      const auto raw = env(var);
      if (!raw) continue;
      json v = json::parse(*raw, nullptr, false);
      if (v.is_discarded() || (def.is_string() && !v.is_string())) v = *raw;
      if (!same_kind(def, v))
        throw ConfigError("config: environment variable " + var + " must be " + kind_name(def));
      doc[section][key] = v;
    }
  }
}

}  // namespace

EnvLookup process_env() {
  return [](const std::string& name) -> std::optional<std::string> {
    const char* v = std::getenv(name.c_str());
    if (!v) return std::nullopt;
    return std::string(v);
  };
}

json load_config_text(const std::string& text, const EnvLookup& env) {
  json user;
  try {
    user = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError("config: syntax error at line " + line_of(text, e.byte) + ": " + e.what());
  }
  const json shape = default_config();
  json doc = shape;
  merge(doc, user, shape, "");
  if (user.contains("scenarios")) {
    const json& sc = user["scenarios"];
    if (!sc.is_array()) throw ConfigError("config: 'scenarios' must be an array");
    for (std::size_t i = 0; i < sc.size(); ++i) {
      json probe = doc;
      merge(probe, sc[i], shape, "scenarios[" + std::to_string(i) + "]");
    }
    doc["scenarios"] = sc;
  }
  apply_env(doc, shape, env);
  return doc;
}

json load_config_file(const std::string& path, const EnvLookup& env) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot read " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return load_config_text(ss.str(), env);
}

std::vector<json> expand_scenarios(const json& resolved) {
  if (!resolved.contains("scenarios")) return {resolved};
  json base = resolved;
  base.erase("scenarios");
  const json shape = default_config();
  std::vector<json> out;
  for (std::size_t i = 0; i < resolved["scenarios"].size(); ++i) {
    json d = base;
    merge(d, resolved["scenarios"][i], shape, "scenarios[" + std::to_string(i) + "]");
    if (!resolved["scenarios"][i].contains("name")) d["name"] = base["name"].get<std::string>() + "_" + std::to_string(i);
    out.push_back(std::move(d));
  }
  return out;
}

namespace {

template <std::size_t K, class T>
std::array<T, K> arr(const json& j) {
  std::array<T, K> a{};
  for (std::size_t i = 0; i < K; ++i) a[i] = j.at(i).get<T>();
  return a;
}

Scheme scheme_from(const std::string& s) {
  if (s == "if_ab2") return Scheme::if_ab2;
  if (s == "if_rk3") return Scheme::if_rk3;
  throw ConfigError("config: 'solver.scheme' must be if_ab2 or if_rk3");
}

template <class F>
auto wrap(const std::string& what, F&& f) {
  try {
    return f();
  } catch (const InvalidInput& e) {
    throw ConfigError(std::string("config: ") + what + ": " + e.what());
  }
}

}  // namespace

SolverConfig solver_from_config(const json& d) {
  SolverConfig c;
  c.nu = d["physics"]["nu"].get<double>();
  c.dt = d["solver"]["dt"].get<double>();
  c.t_end = d["solver"]["t_end"].get<double>();
  c.scheme = scheme_from(d["solver"]["scheme"].get<std::string>());
  c.cfl_max = d["solver"]["cfl_max"].get<double>();
  c.dealias = d["solver"]["dealias"].get<bool>();
  wrap("solver", [&] {
    c.validate();
    return 0;
  });
  return c;
}

Scenario scenario_from_config(const json& d) {
  Scenario s;
  s.name = d["name"].get<std::string>();
  s.L = d["grid"]["L"].get<double>();
  s.N = d["grid"]["N"].get<int>();
  s.nu = d["physics"]["nu"].get<double>();
  s.dt = d["solver"]["dt"].get<double>();
  s.scheme = scheme_from(d["solver"]["scheme"].get<std::string>());
  s.cfl_max = d["solver"]["cfl_max"].get<double>();
  s.T = d["window"]["T"].get<double>();
  s.windows = d["window"]["count"].get<int>();
  s.k_max = d["window"]["k_max"].get<int>();
  const json& bf = d["base_forcing"];
  s.base_forcing.family = wrap("base_forcing.family",
                               [&] { return forcing_family_from_string(bf["family"].get<std::string>()); });
  s.base_forcing.a = arr<2, double>(bf["a"]);
  s.base_forcing.epsilon = bf["epsilon"].get<double>();
  s.base_forcing.lambda = bf["lambda"].get<double>();
  s.base_forcing.mode = arr<2, int>(bf["mode"]);
  s.base_forcing.unit_h1 = bf["unit_h1"].get<bool>();
  s.base_initial_amplitude = d["base_initial"]["amplitude"].get<double>();
  const json& p = d["perturbation"];
  s.perturbation.gamma = p["gamma"].get<double>();
  s.perturbation.k0 = p["k0"].get<double>();
  s.perturbation.seed = p["seed"].get<std::uint64_t>();
  s.perturbation.fill = p["fill"].get<double>();
  s.perturbation.mean = arr<3, double>(p["mean"]);
  const json& g = d["g"];
  s.g.amplitude = g["amplitude"].get<double>();
  s.g.rate = g["rate"].get<double>();
  s.g.mode = arr<3, int>(g["mode"]);
  s.g.mean = arr<3, double>(g["mean"]);
  s.g.mean_rate = g["mean_rate"].get<double>();
  const json& c = d["constants"];
  s.constants_mode = wrap("constants.mode", [&] { return constants_mode_from_string(c["mode"].get<std::string>()); });
  s.calibration.samples = c["samples"].get<int>();
  s.calibration.seed = c["seed"].get<std::uint64_t>();
  s.calibration.N = c["N"].get<int>();
  s.calibration.headroom = c["headroom"].get<double>();
  s.epsilon = d["certificate"]["epsilon"].get<double>();
  s.perturbation_snapshot = p["initial_snapshot"].get<std::string>();
  wrap("scenario", [&] {
    s.validate();
    return 0;
  });
  return s;
}

}  // namespace nsstab
