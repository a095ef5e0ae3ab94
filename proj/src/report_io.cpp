#include "nsstab/report_io.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <sstream>

namespace nsstab {

using nlohmann::json;

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

json json_number(double v) {
  if (std::isnan(v)) return "NaN";
  if (std::isinf(v)) return v > 0 ? "Infinity" : "-Infinity";
  return v;
}

double json_to_double(const json& j) {
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "Infinity") return HUGE_VAL;
    if (s == "-Infinity") return -HUGE_VAL;
    if (s == "NaN") return std::nan("");
  }
  throw InvalidInput("expected a number");
}

std::string sha256_hex(const std::string& data) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr) != 1) throw Error("sha256 failed");
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(hex[md[i] >> 4]);
    out.push_back(hex[md[i] & 15]);
  }
  return out;
}

// ---------------------------------------------------------------------------
// JSON views

json to_json(const InterpolationConstants& c) {
  const auto& p = c.primitives;
  return {{"mode", to_string(c.mode)},
          {"nu", json_number(c.poincare.nu)},
          {"L", json_number(c.poincare.L)},
          {"kappa", json_number(c.poincare.kappa)},
          {"c_s1", json_number(c.poincare.c_s1)},
          {"c_1", json_number(c.poincare.c_1)},
          {"primitives",
           {{"a3", json_number(p.a3)},
            {"a4", json_number(p.a4)},
            {"a_inf", json_number(p.a_inf)},
            {"b3", json_number(p.b3)},
            {"b6", json_number(p.b6)}}},
          {"c_s2", json_number(c.c_s2)},
          {"c_s3", json_number(c.c_s3)},
          {"c_s4", json_number(c.c_s4)},
          {"c_2", json_number(c.c_2)},
          {"c_3", json_number(c.c_3)},
          {"c_4", json_number(c.c_4)}};
}

json to_json(const HypothesisFlag& f) {
  return {{"name", f.name},
          {"holds", f.holds},
          {"lhs", json_number(f.lhs)},
          {"rhs", json_number(f.rhs)},
          {"time_condition", f.time_condition}};
}

namespace {

json sup_json(const WindowSup& w) {
  return {{"value", json_number(w.value)}, {"certified", w.certified}, {"windows", w.windows}};
}

json flags_json(const std::vector<HypothesisFlag>& flags) {
  json a = json::array();
  for (const auto& f : flags) a.push_back(to_json(f));
  return a;
}

}  // namespace

json to_json(const BaseInputs& in) {
  return {{"T", json_number(in.T)},
          {"f_l2_window_sup", sup_json(in.f_l2)},
          {"f_grad_window_sup", sup_json(in.f_grad)},
          {"f_h1_window_sup", sup_json(in.f_h1)},
          {"v0_l2_sq", json_number(in.v0_l2_sq)},
          {"v0_grad_sq", json_number(in.v0_grad_sq)},
          {"v0_hess_sq", json_number(in.v0_hess_sq)},
          {"v0_h1_sq", json_number(in.v0_h1_sq)},
          {"drift_sup", {{"value", json_number(in.drift.value)}, {"certified", in.drift.certified}}}};
}

json to_json(const PerturbationInputs& in) {
  return {{"T", json_number(in.T)},
          {"g_l2_window_sup", sup_json(in.g_l2)},
          {"drift_window_sup", {{"value", json_number(in.b2_sq)}, {"certified", in.b2_certified}}},
          {"drift_sup", {{"value", json_number(in.drift.value)}, {"certified", in.drift.certified}}},
          {"u0_l2_sq", json_number(in.u0_l2_sq)},
          {"u0_h1_sq", json_number(in.u0_h1_sq)}};
}

json to_json(const AbarChain& a) {
  return {{"T", json_number(a.T)},
          {"abar1_sq", json_number(a.abar1_sq)},
          {"abar2_sq", json_number(a.abar2_sq)},
          {"abar3_sq", json_number(a.abar3_sq)},
          {"abar4_sq", json_number(a.abar4_sq)},
          {"abar1_certified", a.abar1_certified},
          {"abar4_certified", a.abar4_certified},
          {"T_star", json_number(a.t_star)},
          {"membership", a.membership},
          {"flags", flags_json(a.flags)}};
}

json to_json(const AChain& a) {
  return {{"T", json_number(a.T)},
          {"A1_sq", json_number(a.a1_sq)},
          {"A2_sq", json_number(a.a2_sq)},
          {"A3_sq", json_number(a.a3_sq)},
          {"A4_sq", json_number(a.a4_sq)},
          {"A5_sq", json_number(a.a5_sq)},
          {"A6_sq", json_number(a.a6_sq)},
          {"A7_sq", json_number(a.a7_sq)},
          {"A8_sq", json_number(a.a8_sq)},
          {"A9", json_number(a.a9)},
          {"A10_sq", json_number(a.a10_sq)},
          {"A11_sq", json_number(a.a11_sq)},
          {"A12_sq", json_number(a.a12_sq)},
          {"A13_sq", json_number(a.a13_sq)},
          {"A14_sq", json_number(a.a14_sq)},
          {"certified", a.certified},
          {"hypotheses_hold", a.hypotheses_hold()},
          {"time_conditions_hold", a.time_conditions_hold()},
          {"flags", flags_json(a.flags)}};
}

json to_json(const BChain& b) {
  return {{"T", json_number(b.T)},
          {"gamma", json_number(b.gamma)},
          {"gamma_star", json_number(b.gamma_star)},
          {"B1_sq", json_number(b.b1_sq)},
          {"B2_sq", json_number(b.b2_sq)},
          {"B3_sq", json_number(b.b3_sq)},
          {"B4_sq", json_number(b.b4_sq)},
          {"B5_sq", json_number(b.b5_sq)},
          {"B6_l2", json_number(b.b6_l2)},
          {"B6_mean", json_number(b.b6_mean)},
          {"B7_sq", json_number(b.b7_sq)},
          {"certified", b.certified},
          {"hypotheses_hold", b.hypotheses_hold()},
          {"time_conditions_hold", b.time_conditions_hold()},
          {"flags", flags_json(b.flags)}};
}

json to_json(const SmallnessReport& s) {
  return {{"gamma", json_number(s.gamma)},
          {"threshold", json_number(s.threshold)},
          {"max_g2", json_number(s.max_g2)},
          {"max_hypothesis_lhs", json_number(s.max_hypothesis_lhs)},
          {"g2_holds", s.g2_holds},
          {"hypothesis_holds", s.hypothesis_holds},
          {"epsilon", json_number(s.epsilon)},
          {"gbar_sum_max", json_number(s.gbar_sum_max)},
          {"gbar_max_addend", json_number(s.gbar_max_addend)},
          {"gbar_rule", "sum of addends"},
          {"gbar_holds", s.gbar_holds},
          {"gamma_ok", s.gamma_ok},
          {"samples", s.t.size()}};
}

json to_json(const WindowSummary& w) {
  json wins = json::array();
  for (const WindowStats& s : w.windows) {
    wins.push_back({{"k", s.k},
                    {"sup_vs_h1", json_number(s.sup_vs_h1)},
                    {"sup_vs_h2", json_number(s.sup_vs_h2)},
                    {"sup_u_l2", json_number(s.sup_u_l2)},
                    {"sup_u_h1", json_number(s.sup_u_h1)},
                    {"int_vs_h2_sq", json_number(s.int_vs_h2)},
                    {"int_vs_h3_sq", json_number(s.int_vs_h3)},
                    {"int_u_h1_sq", json_number(s.int_u_h1)},
                    {"int_u_h2_sq", json_number(s.int_u_h2)},
                    {"int_vs_t_sq", json_number(s.int_vs_t)},
                    {"int_u_t_sq", json_number(s.int_u_t)},
                    {"int_grad_q_sq", json_number(s.int_gradq)},
                    {"int_grad_p_s_sq", json_number(s.int_gradp_s)}});
  }
  json checks = json::array();
  for (const BoundCheck& c : w.checks)
    checks.push_back({{"name", c.name},
                      {"k", c.k},
                      {"value", json_number(c.value)},
                      {"bound", json_number(c.bound)},
                      {"holds", c.holds}});
  json ratios = json::array();
  for (double r : w.max_ratio) ratios.push_back(json_number(r));
  return {{"windows", wins},
          {"consecutive_max_ratio", ratios},
          {"uniform", w.uniform},
          {"checks", checks},
          {"notices", w.notices}};
}

json to_json(const BarrierReport& b) {
  json j = {{"gamma", json_number(b.gamma)},
            {"gamma_star", json_number(b.gamma_star)},
            {"never_exceeded", b.never_exceeded},
            {"max_x2", json_number(b.max_x2)},
            {"nesting_holds", b.nesting_holds},
            {"checked", b.checked},
            {"violations", b.violations},
            {"max_violation", json_number(b.max_violation)},
            {"max_residual", json_number(b.max_residual)},
            {"raw_violations", b.raw_violations},
            {"raw_max_violation", json_number(b.raw_max_violation)}};
  j["first_exceedance_time"] = b.first_exceedance_time ? json_number(*b.first_exceedance_time) : json(nullptr);
  return j;
}

json certificate_json(const CertificateReport& r) {
  json j;
  j["schema_version"] = kCertificateSchemaVersion;
  j["kind"] = "certificate";
  j["constants"] = to_json(r.constants);
  j["T"] = json_number(r.a.T);
  j["T_star"] = json_number(t_star(r.constants.poincare));
  j["gamma_star"] = json_number(gamma_star(r.constants));
  j["inputs"] = {{"base", to_json(r.base_in)}};
  j["abar_chain"] = to_json(r.abar);
  j["a_chain"] = to_json(r.a);
  j["A0"] = r.has_a0 ? json_number(r.a0) : json(nullptr);
  j["truncation"] = {{"f_l2_certified", r.base_in.f_l2.certified},
                     {"f_grad_certified", r.base_in.f_grad.certified},
                     {"f_h1_certified", r.base_in.f_h1.certified},
                     {"base_drift_certified", r.base_in.drift.certified}};
  if (r.has_perturbation) {
    j["inputs"]["perturbation"] = to_json(r.pert_in);
    j["b_chain"] = to_json(r.b);
    j["gamma_hypothesis"] = r.b.gamma_ok() ? "satisfied" : "violated";
    j["truncation"]["g_l2_certified"] = r.pert_in.g_l2.certified;
    j["truncation"]["perturbation_drift_certified"] = r.pert_in.drift.certified;
  }
  return j;
}

json stability_json(const StabilityResult& r, const json& config) {
  CertificateReport cr;
  cr.constants = r.constants;
  cr.base_in = r.base_in;
  cr.pert_in = r.pert_in;
  cr.abar = r.abar;
  cr.a = r.a;
  cr.b = r.b;
  cr.a0 = r.a0;
  cr.has_a0 = r.scenario.base_forcing.family != ForcingFamily::zero;
  cr.has_perturbation = true;
  json j;
  j["schema_version"] = kReportSchemaVersion;
  j["kind"] = "stability";
  j["scenario"] = r.scenario.name;
  j["config"] = config;
  j["T"] = json_number(r.T);
  j["t_end"] = json_number(r.t_end);
  j["certificate"] = certificate_json(cr);
  j["smallness"] = to_json(r.smallness);
  j["barrier"] = to_json(r.barrier);
  j["windows"] = to_json(r.windows);
  auto h21 = [](const std::vector<H21Window>& v) {
    json a = json::array();
    for (const H21Window& w : v)
      a.push_back({{"k", w.k},
                   {"int_t_sq", json_number(w.int_t_sq)},
                   {"int_h2_sq", json_number(w.int_h2_sq)},
                   {"int_grad_p_sq", json_number(w.int_gradp_sq)},
                   {"h21_sq", json_number(w.h21_sq)}});
    return a;
  };
  j["h21_base"] = h21(r.h21_base);
  j["h21_perturbation"] = h21(r.h21_perturbation);
  j["envelope_constant_note"] = "B7_sq and the gradient envelope bound are evaluated with c = 1; reported, not asserted";
  j["verdicts"] = {{"never_exceeded", r.barrier.never_exceeded},
                   {"barrier_violations", r.barrier.violations},
                   {"uniform_windows", r.windows.uniform},
                   {"membership", r.abar.membership},
                   {"gamma_hypothesis", r.b.gamma_ok() ? "satisfied" : "violated"},
                   {"aborted", r.aborted}};
  if (r.aborted) j["abort_reason"] = r.abort_reason;
  j["warnings"] = r.warnings;
  return j;
}

namespace {

json hash_body(json report) {
  report.erase("report_hash");
  report.erase("generated_at");
  return report;
}

}  // namespace

void seal_report(json& report, const json& config, bool with_timestamp) {
  report["input_hash"] = sha256_hex(config.dump());
  report["report_hash"] = sha256_hex(hash_body(report).dump());
  if (with_timestamp) {
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    char buf[32];
    std::tm tm{};
    gmtime_r(&now, &tm);
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    report["generated_at"] = buf;
  }
}

bool verify_report(const json& report) {
  if (!report.contains("report_hash") || !report["report_hash"].is_string()) return false;
  return report["report_hash"].get<std::string>() == sha256_hex(hash_body(report).dump());
}

// ---------------------------------------------------------------------------
// CSV

std::string to_csv(const CsvTable& t) {
  std::string out;
  for (std::size_t i = 0; i < t.header.size(); ++i) {
    if (i) out += ',';
    out += t.header[i];
  }
  out += '\n';
  for (const auto& row : t.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) out += ',';
      out += format_double(row[i]);
    }
    out += '\n';
  }
  return out;
}

CsvTable parse_csv(const std::string& text) {
  CsvTable t;
  std::istringstream in(text);
  std::string line;
  auto split = [](const std::string& s) {
    std::vector<std::string> f;
    std::string cur;
    for (char ch : s) {
      if (ch == ',') {
        f.push_back(cur);
        cur.clear();
      } else if (ch != '\r') {
        cur.push_back(ch);
      }
    }
    f.push_back(cur);
    return f;
  };
  if (!std::getline(in, line)) return t;
  t.header = split(line);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    for (const std::string& f : split(line)) {
      if (f == "inf") row.push_back(HUGE_VAL);
      else if (f == "-inf") row.push_back(-HUGE_VAL);
      else if (f == "nan") row.push_back(std::nan(""));
      else {
        double v = 0.0;
        auto res = std::from_chars(f.data(), f.data() + f.size(), v);
        if (res.ec != std::errc() || res.ptr != f.data() + f.size()) throw InvalidInput("csv: bad number '" + f + "'");
        row.push_back(v);
      }
    }
    if (row.size() != t.header.size()) throw InvalidInput("csv: row width differs from header");
    t.rows.push_back(std::move(row));
  }
  return t;
}

CsvTable series_table(const StabilityResult& r) {
  CsvTable t;
  t.header = {"t",         "X2",        "Y2",       "G2",        "hypothesis_lhs", "vs_l2_sq",
              "vs_h1_sq",  "vs_h2_sq",  "vs_grad_l3", "u_l2_sq", "u_h2_sq",        "u_dt_sq",
              "u_gradq_sq", "vs_mean_1", "vs_mean_2", "u_mean_1", "u_mean_2",      "u_mean_3"};
  const auto& sb = r.trajectories.base.samples;
  const auto& sp = r.trajectories.perturbation.samples;
  for (std::size_t i = 0; i < sp.size() && i < sb.size(); ++i) {
    const NormSample& b = sb[i];
    const NormSample& p = sp[i];
    auto m = [](const MeanVector& v, std::size_t k) { return k < v.size() ? v[k] : 0.0; };
    t.rows.push_back({p.t, p.h_sq[1], p.h_sq[2], i < r.smallness.g2.size() ? r.smallness.g2[i] : 0.0,
                      i < r.smallness.hypothesis_lhs.size() ? r.smallness.hypothesis_lhs[i] : 0.0, b.h_sq[0],
                      b.h_sq[1], b.h_sq[2], b.grad_l3, p.h_sq[0], p.h_sq[2], p.dt_sq, p.gradp_sq, m(b.mean, 0),
                      m(b.mean, 1), m(p.mean, 0), m(p.mean, 1), m(p.mean, 2)});
  }
  return t;
}

CsvTable windows_table(const StabilityResult& r) {
  CsvTable t;
  t.header = {"k",           "sup_vs_h1",   "sup_vs_h2", "sup_u_l2",  "sup_u_h1",    "int_vs_h2_sq",
              "int_vs_h3_sq", "int_u_h1_sq", "int_u_h2_sq", "int_vs_t_sq", "int_u_t_sq", "int_grad_q_sq",
              "int_grad_p_s_sq", "h21_u_sq"};
  for (const WindowStats& s : r.windows.windows) {
    const double h21 = static_cast<std::size_t>(s.k) < r.h21_perturbation.size()
                           ? r.h21_perturbation[static_cast<std::size_t>(s.k)].h21_sq
                           : 0.0;
    t.rows.push_back({double(s.k), s.sup_vs_h1, s.sup_vs_h2, s.sup_u_l2, s.sup_u_h1, s.int_vs_h2, s.int_vs_h3,
                      s.int_u_h1, s.int_u_h2, s.int_vs_t, s.int_u_t, s.int_gradq, s.int_gradp_s, h21});
  }
  return t;
}

CsvTable trajectory_table(const Trajectory& traj) {
  CsvTable t;
  t.header = {"t",       "l2_sq",  "h1_sq",   "h2_sq",         "h3_sq",   "grad_sq",   "hess_sq",
              "dt_sq",   "gradp_sq", "forcing_inner", "grad_l3", "max_speed", "mean_1",
              "mean_2",  "mean_3"};
  for (const NormSample& s : traj.samples) {
    auto m = [&](std::size_t k) { return k < s.mean.size() ? s.mean[k] : 0.0; };
    t.rows.push_back({s.t, s.h_sq[0], s.h_sq[1], s.h_sq[2], s.h_sq[3], s.grad_sq, s.hess_sq, s.dt_sq, s.gradp_sq,
                      s.forcing_inner, s.grad_l3, s.max_speed, m(0), m(1), m(2)});
  }
  return t;
}

// ---------------------------------------------------------------------------
// SVG

namespace {

std::string esc(const std::string& s) {
  std::string o;
  for (char c : s) {
    if (c == '<') o += "&lt;";
    else if (c == '>') o += "&gt;";
    else if (c == '&') o += "&amp;";
    else o += c;
  }
  return o;
}

std::string fmt(double v) {
  char b[32];
  std::snprintf(b, sizeof(b), "%.2f", v);
  return b;
}

std::string tick(double v) {
  char b[32];
  std::snprintf(b, sizeof(b), "%.3g", v);
  return b;
}

}  // namespace

std::string svg_line_plot(const std::string& title, const std::string& x_label, const std::vector<PlotSeries>& series,
                          bool log_y) {
  const double W = 720, H = 440, ml = 80, mr = 160, mt = 40, mb = 50;
  double x0 = HUGE_VAL, x1 = -HUGE_VAL, y0 = HUGE_VAL, y1 = -HUGE_VAL;
  auto ty = [log_y](double y) { return log_y ? (y > 0 ? std::log10(y) : std::nan("")) : y; };
  for (const auto& s : series) {
    for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
      const double y = ty(s.y[i]);
      if (!std::isfinite(s.x[i]) || !std::isfinite(y)) continue;
      x0 = std::min(x0, s.x[i]);
      x1 = std::max(x1, s.x[i]);
      y0 = std::min(y0, y);
      y1 = std::max(y1, y);
    }
  }
  if (!(x1 > x0)) { x0 = 0; x1 = 1; }
  if (!(y1 > y0)) { y0 = std::isfinite(y0) ? y0 - 1 : 0; y1 = y0 + 2; }
  const double pw = W - ml - mr, ph = H - mt - mb;
  auto px = [&](double x) { return ml + (x - x0) / (x1 - x0) * pw; };
  auto py = [&](double y) { return mt + ph - (y - y0) / (y1 - y0) * ph; };
  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};

  std::ostringstream o;
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  o << "<text x=\"" << fmt(ml) << "\" y=\"24\" font-size=\"15\">" << esc(title) << "</text>\n";
  o << "<rect x=\"" << fmt(ml) << "\" y=\"" << fmt(mt) << "\" width=\"" << fmt(pw) << "\" height=\"" << fmt(ph)
    << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double xv = x0 + (x1 - x0) * i / 4.0, yv = y0 + (y1 - y0) * i / 4.0;
    o << "<text x=\"" << fmt(px(xv)) << "\" y=\"" << fmt(H - mb + 18) << "\" text-anchor=\"middle\">" << tick(xv)
      << "</text>\n";
    o << "<text x=\"" << fmt(ml - 6) << "\" y=\"" << fmt(py(yv) + 4) << "\" text-anchor=\"end\">"
      << (log_y ? "1e" + tick(yv) : tick(yv)) << "</text>\n";
  }
  o << "<text x=\"" << fmt(ml + pw / 2) << "\" y=\"" << fmt(H - 10) << "\" text-anchor=\"middle\">" << esc(x_label)
    << "</text>\n";
  for (std::size_t k = 0; k < series.size(); ++k) {
    const auto& s = series[k];
    const char* col = colors[k % 6];
    o << "<polyline fill=\"none\" stroke=\"" << col << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
      const double y = ty(s.y[i]);
      if (!std::isfinite(s.x[i]) || !std::isfinite(y)) continue;
      o << fmt(px(s.x[i])) << ',' << fmt(py(y)) << ' ';
    }
    o << "\"/>\n";
    o << "<text x=\"" << fmt(W - mr + 10) << "\" y=\"" << fmt(mt + 16 + 18 * k) << "\" fill=\"" << col << "\">"
      << esc(s.label) << "</text>\n";
  }
  o << "</svg>\n";
  return o.str();
}

}  // namespace nsstab
