#pragma once

/// @file report_io.hpp
/// @brief JSON reports, CSV series, SVG plots and content hashes.
///
/// Floats are written in the shortest decimal form that round-trips. In JSON,
/// non-finite values become the strings "Infinity", "-Infinity" and "NaN".

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "nsstab/certificate.hpp"
#include "nsstab/experiments.hpp"

namespace nsstab {

inline constexpr int kReportSchemaVersion = 1;

std::string format_double(double v);
nlohmann::json json_number(double v);
/// Inverse of json_number.
double json_to_double(const nlohmann::json& j);

std::string sha256_hex(const std::string& data);

nlohmann::json to_json(const InterpolationConstants& c);
nlohmann::json to_json(const HypothesisFlag& f);
nlohmann::json to_json(const BaseInputs& in);
nlohmann::json to_json(const PerturbationInputs& in);
nlohmann::json to_json(const AbarChain& a);
nlohmann::json to_json(const AChain& a);
nlohmann::json to_json(const BChain& b);
nlohmann::json to_json(const SmallnessReport& s);
nlohmann::json to_json(const WindowSummary& w);
nlohmann::json to_json(const BarrierReport& b);

struct CertificateReport {
  InterpolationConstants constants;
  BaseInputs base_in;
  PerturbationInputs pert_in;
  AbarChain abar;
  AChain a;
  BChain b;
  double a0 = 0.0;
  bool has_a0 = false;
  bool has_perturbation = false;
};

/// Certificate document with schema version and stable keys.
nlohmann::json certificate_json(const CertificateReport& r);

/// Full stability report; `config` is embedded verbatim.
nlohmann::json stability_json(const StabilityResult& r, const nlohmann::json& config);

/// Adds "input_hash" (SHA-256 of the canonical config dump) and "report_hash"
/// (SHA-256 of the document without the hash and timestamp fields).
void seal_report(nlohmann::json& report, const nlohmann::json& config, bool with_timestamp = true);
/// Recomputes report_hash; false when the document was altered.
bool verify_report(const nlohmann::json& report);

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
};
std::string to_csv(const CsvTable& t);
CsvTable parse_csv(const std::string& text);

CsvTable series_table(const StabilityResult& r);
CsvTable windows_table(const StabilityResult& r);
CsvTable trajectory_table(const Trajectory& traj);

struct PlotSeries {
  std::string label;
  std::vector<double> x, y;
};
/// Line plot; log_y plots log10 of positive values.
std::string svg_line_plot(const std::string& title, const std::string& x_label, const std::vector<PlotSeries>& series,
                          bool log_y = false);

}  // namespace nsstab
