#include "nsstab/commands.hpp"

#include <atomic>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <ostream>
#include <sstream>
#include <thread>
#include <vector>

#include "nsstab/config.hpp"
#include "nsstab/experiments.hpp"
#include "nsstab/report_io.hpp"
#include "nsstab/snapshot_io.hpp"

namespace nsstab {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json resolve(const CommandOptions& opt) {
  json d = opt.config_path.empty() ? load_config_text("{}") : load_config_file(opt.config_path);
  auto apply = [&](json& doc) {
    if (opt.out_dir) doc["output"]["dir"] = *opt.out_dir;
    if (opt.seed) doc["perturbation"]["seed"] = *opt.seed;
    if (opt.svg) doc["output"]["svg"] = true;
  };
  apply(d);
  if (d.contains("scenarios"))
    for (json& s : d["scenarios"]) {
      if (opt.seed && s.contains("perturbation")) s["perturbation"]["seed"] = *opt.seed;
    }
  return d;
}

// Runs body and maps exceptions onto the exit-code contract.
template <class F>
int guarded(std::ostream& err, F&& body) {
  try {
    return body();
  } catch (const IntegrityError& e) {
    err << "integrity error: " << e.what() << "\n";
    return kExitIntegrity;
  } catch (const SolverAbort& e) {
    err << "solver abort: " << e.what() << "\n";
    return kExitSolver;
  } catch (const InvalidInput& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitInternal;
  }
}

std::string read_text(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw IntegrityError("cannot read " + p.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

PlotSeries column_series(const CsvTable& t, const std::string& xcol, const std::string& ycol, std::string label) {
  PlotSeries s;
  s.label = std::move(label);
  std::size_t xi = t.header.size(), yi = t.header.size();
  for (std::size_t i = 0; i < t.header.size(); ++i) {
    if (t.header[i] == xcol) xi = i;
    if (t.header[i] == ycol) yi = i;
  }
  if (xi == t.header.size() || yi == t.header.size()) return s;
  for (const auto& r : t.rows) {
    s.x.push_back(r[xi]);
    s.y.push_back(r[yi]);
  }
  return s;
}

void write_stability_svgs(const fs::path& dir, const CsvTable& series, const CsvTable& windows, double gamma) {
  PlotSeries x2 = column_series(series, "t", "X2", "X^2(t)");
  PlotSeries g{"gamma", {}, {}};
  if (!x2.x.empty()) {
    g.x = {x2.x.front(), x2.x.back()};
    g.y = {gamma, gamma};
  }
  write_file_atomic(dir / "x2.svg", svg_line_plot("X^2 against gamma", "t", {x2, g}, true));
  write_file_atomic(dir / "windows.svg",
                    svg_line_plot("window sups", "k",
                                  {column_series(windows, "k", "sup_vs_h1", "sup ||v_s||_H1"),
                                   column_series(windows, "k", "sup_u_h1", "sup ||u||_H1"),
                                   column_series(windows, "k", "sup_u_l2", "sup ||u||_L2")},
                                  true));
}

}  // namespace

// ---------------------------------------------------------------------------

int cmd_simulate(const CommandOptions& opt, std::ostream& out, std::ostream& err) {
  return guarded(err, [&]() -> int {
    const json d = resolve(opt);
    if (d.contains("scenarios")) throw ConfigError("config: 'scenarios' is only accepted by the stability command");
    const Scenario s = scenario_from_config(d);
    const SolverConfig cfg = solver_from_config(d);
    const std::string system = d["simulate"]["system"].get<std::string>();
    const std::string resume = d["simulate"]["resume"].get<std::string>();
    EvolveOptions eo;
    for (const json& t : d["simulate"]["snapshot_times"]) eo.snapshot_times.push_back(t.get<double>());
    eo.window = s.T;
    const fs::path dir = d["output"]["dir"].get<std::string>();
    const PeriodicGrid g2(s.L, 2, s.N), g3(s.L, 3, s.N);

    bool aborted = false;
    std::string reason;
    if (system == "base2d" || system == "full3d") {
      const Role role = system == "base2d" ? Role::base2d : Role::full3d;
      FlowState v0;
      if (!resume.empty()) {
        v0 = read_state(resume);
        if (v0.role != role || !(v0.u_bar.grid() == (role == Role::base2d ? g2 : g3)))
          throw ConfigError("config: resume snapshot does not match simulate.system and grid");
      } else if (role == Role::base2d) {
        v0 = base_initial_state(g2, s.base_initial_amplitude);
      } else {
        const FlowState b = base_initial_state(g2, s.base_initial_amplitude);
        const FlowState u = make_perturbation(g3, s.perturbation);
        v0 = FlowState::from_velocity(
            lift_2d_to_3d(b.velocity(), g3) + with_mean(u.u_bar, u.mean), Role::full3d);
      }
      SolverConfig c = cfg;
      c.t_end = v0.t + cfg.t_end;
      Trajectory tr;
      if (role == Role::base2d) {
        tr = evolve_base_2d(v0, forcing_families(s.base_forcing, g2, s.T), c, eo);
      } else {
        tr = evolve_full_3d(v0, full_forcing(s.base_forcing, s.g, g3, s.T), c, eo);
      }
      write_trajectory(dir, tr);
      const CsvTable t = trajectory_table(tr);
      write_file_atomic(dir / "series.csv", to_csv(t));
      if (d["output"]["svg"].get<bool>())
        write_file_atomic(dir / "energy.svg",
                          svg_line_plot("||u_bar||^2", "t", {column_series(t, "t", "l2_sq", "L2 energy")}, true));
      aborted = tr.aborted;
      reason = tr.abort_reason;
      if (!tr.samples.empty())
        out << system << ": " << tr.samples.size() << " samples, final ||u_bar||^2 = "
            << format_double(tr.samples.back().h_sq[0]) << "\n";
    } else if (system == "pair") {
      if (!resume.empty()) throw ConfigError("config: simulate.resume is not supported for the pair system");
      const FlowState b = base_initial_state(g2, s.base_initial_amplitude);
      const FlowState u = make_perturbation(g3, s.perturbation);
      const PairTrajectory p = evolve_pair(b, forcing_families(s.base_forcing, g2, s.T), u,
                                           perturbation_forcing(s.g, g3), cfg, eo);
      write_trajectory(dir / "base", p.base);
      write_trajectory(dir / "perturbation", p.perturbation);
      for (const auto& [name, tr] : {std::pair{"base", &p.base}, std::pair{"perturbation", &p.perturbation}}) {
        const CsvTable t = trajectory_table(*tr);
        write_file_atomic(dir / name / "series.csv", to_csv(t));
        if (d["output"]["svg"].get<bool>())
          write_file_atomic(dir / name / "energy.svg",
                            svg_line_plot("||u_bar||^2", "t", {column_series(t, "t", "l2_sq", "L2 energy")}, true));
      }
      aborted = p.base.aborted || p.perturbation.aborted;
      reason = p.base.aborted ? p.base.abort_reason : p.perturbation.abort_reason;
      out << "pair: " << p.base.samples.size() << " samples\n";
    } else {
      throw ConfigError("config: 'simulate.system' must be base2d, full3d or pair");
    }
    write_file_atomic(dir / "config.json", d.dump(2) + "\n");
    if (aborted) {
      err << "solver abort: " << reason << "\n";
      return kExitSolver;
    }
    return kExitOk;
  });
}

int cmd_certify(const CommandOptions& opt, std::ostream& out, std::ostream& err) {
  return guarded(err, [&]() -> int {
    const json d = resolve(opt);
    if (d.contains("scenarios")) throw ConfigError("config: 'scenarios' is only accepted by the stability command");
    const Scenario s = scenario_from_config(d);
    const PeriodicGrid g2(s.L, 2, s.N), g3(s.L, 3, s.N);
    CertificateReport r;
    r.constants = interpolation_constants(s.nu, s.L, s.constants_mode, s.calibration);
    const double T = s.T > 0.0 ? s.T : choose_window_length(s, r.constants);
    const Forcing f = forcing_families(s.base_forcing, g2, T);
    const FlowState v0 = base_initial_state(g2, s.base_initial_amplitude);
    r.base_in = base_inputs(f, v0, T, s.k_max);
    r.abar = abar_chain(r.base_in, r.constants);
    r.a = a_chain(r.base_in, r.constants);
    if (s.base_forcing.family != ForcingFamily::zero) {
      r.has_a0 = true;
      r.a0 = a0_threshold(decaying_h1_integral(s.base_forcing, g2), r.abar.abar2_sq, r.constants);
    }
    const FlowState u0 =
        s.perturbation_snapshot.empty() ? make_perturbation(g3, s.perturbation) : read_state(s.perturbation_snapshot);
    r.pert_in = perturbation_inputs(perturbation_forcing(s.g, g3), u0, T, s.k_max);
    r.b = b_chain(r.pert_in, r.a, r.constants, s.perturbation.gamma);
    r.has_perturbation = true;
    json j = certificate_json(r);
    j["config"] = d;
    seal_report(j, d);
    const fs::path dir = d["output"]["dir"].get<std::string>();
    write_file_atomic(dir / "certificate.json", j.dump(2) + "\n");
    out << "T = " << format_double(T) << ", T_* = " << format_double(r.abar.t_star)
        << ", Abar3^2 = " << format_double(r.abar.abar3_sq) << ", membership = " << (r.abar.membership ? "yes" : "no")
        << ", gamma_hypothesis = " << (r.b.gamma_ok() ? "satisfied" : "violated") << "\n";
    return kExitOk;
  });
}

namespace {

struct StabilityOutcome {
  int code = kExitOk;
  std::string message;
};

StabilityOutcome run_one(const json& d, const fs::path& dir) {
  StabilityOutcome o;
  std::ostringstream err;
  o.code = guarded(err, [&]() -> int {
    const Scenario s = scenario_from_config(d);
    const StabilityResult r = run_stability_experiment(s);
    json j = stability_json(r, d);
    seal_report(j, d);
    const CsvTable series = series_table(r), windows = windows_table(r);
    write_file_atomic(dir / "series.csv", to_csv(series));
    write_file_atomic(dir / "windows.csv", to_csv(windows));
    if (d["output"]["svg"].get<bool>()) write_stability_svgs(dir, series, windows, s.perturbation.gamma);
    write_file_atomic(dir / "report.json", j.dump(2) + "\n");
    std::ostringstream msg;
    msg << s.name << ": T = " << format_double(r.T) << ", max X^2 = " << format_double(r.barrier.max_x2)
        << ", never_exceeded = " << (r.barrier.never_exceeded ? "true" : "false")
        << ", barrier violations = " << r.barrier.violations << "\n";
    o.message = msg.str();
    if (r.aborted) {
      o.message += s.name + ": solver abort: " + r.abort_reason + "\n";
      return kExitSolver;
    }
    return kExitOk;
  });
  if (o.code != kExitOk && o.message.empty()) o.message = err.str();
  else if (o.code != kExitOk) o.message += err.str();
  return o;
}

}  // namespace

int cmd_stability(const CommandOptions& opt, std::ostream& out, std::ostream& err) {
  return guarded(err, [&]() -> int {
    const json d = resolve(opt);
    const std::vector<json> runs = expand_scenarios(d);
    for (const json& r : runs) scenario_from_config(r);  // reject bad entries before any work
    const fs::path root = d["output"]["dir"].get<std::string>();
    const bool sweep = d.contains("scenarios");
    std::vector<StabilityOutcome> results(runs.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
      for (std::size_t i = next++; i < runs.size(); i = next++) {
        const fs::path dir = sweep ? root / runs[i]["name"].get<std::string>() : root;
        results[i] = run_one(runs[i], dir);
      }
    };
    const int jobs = std::max(1, std::min<int>(opt.jobs, static_cast<int>(runs.size())));
    std::vector<std::thread> pool;
    for (int j = 1; j < jobs; ++j) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
    int code = kExitOk;
    for (const auto& r : results) {
      (r.code == kExitOk ? out : err) << r.message;
      if (r.code != kExitOk && code == kExitOk) code = r.code;
    }
    return code;
  });
}

int cmd_report(const CommandOptions& opt, std::ostream& out, std::ostream& err) {
  return guarded(err, [&]() -> int {
    const json d = resolve(opt);
    const fs::path dir = d["output"]["dir"].get<std::string>();
    fs::path file = dir / "report.json";
    if (!fs::exists(file)) file = dir / "certificate.json";
    if (!fs::exists(file)) throw ConfigError("report: no report.json or certificate.json in " + dir.string());
    json j = json::parse(read_text(file), nullptr, false);
    if (j.is_discarded()) throw IntegrityError("report: " + file.string() + " is not valid JSON");
    if (!verify_report(j)) throw IntegrityError("report: content hash mismatch in " + file.string());
    out << "kind: " << j.value("kind", "?") << "\n";
    if (j.contains("verdicts")) out << "verdicts: " << j["verdicts"].dump() << "\n";
    if (j.contains("abar_chain")) out << "membership: " << j["abar_chain"]["membership"].dump() << "\n";
    if (j.contains("gamma_hypothesis")) out << "gamma_hypothesis: " << j["gamma_hypothesis"].dump() << "\n";
    if (opt.svg && j.value("kind", "") == "stability") {
      const CsvTable series = parse_csv(read_text(dir / "series.csv"));
      const CsvTable windows = parse_csv(read_text(dir / "windows.csv"));
      write_stability_svgs(dir, series, windows, json_to_double(j["barrier"]["gamma"]));
      out << "plots written to " << dir.string() << "\n";
    }
    return kExitOk;
  });
}

}  // namespace nsstab
