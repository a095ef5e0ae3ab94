#pragma once

/// @file config.hpp
/// @brief Strict JSON run configuration with environment overrides.
///
/// A document is merged over the defaults section by section. Unknown keys and
/// ill-typed values are rejected with the offending key path. After the file,
/// variables named NSSTAB_<SECTION>_<KEY> override single entries (the value is
/// parsed as JSON when possible, otherwise taken as a string).

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "nsstab/experiments.hpp"
#include "nsstab/ns_integrator.hpp"

namespace nsstab {

class ConfigError : public InvalidInput {
 public:
  using InvalidInput::InvalidInput;
};

/// Full default document; every accepted key appears in it.
nlohmann::json default_config();

/// Environment lookup, replaceable in tests.
using EnvLookup = std::function<std::optional<std::string>(const std::string&)>;
EnvLookup process_env();

/// Parses text (reporting the line of a syntax error), merges it over the
/// defaults and applies environment overrides. Sweep entries under
/// "scenarios" are checked against the same schema.
nlohmann::json load_config_text(const std::string& text, const EnvLookup& env = process_env());
nlohmann::json load_config_file(const std::string& path, const EnvLookup& env = process_env());

/// One resolved document per sweep entry (or the document itself without a sweep).
std::vector<nlohmann::json> expand_scenarios(const nlohmann::json& resolved);

Scenario scenario_from_config(const nlohmann::json& resolved);
SolverConfig solver_from_config(const nlohmann::json& resolved);

}  // namespace nsstab
