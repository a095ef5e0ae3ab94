#pragma once

/// @file experiments.hpp
/// @brief Base flow plus perturbation runs, window statistics, and empirical
/// checks of the certified bounds and of the barrier argument.

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "nsstab/certificate.hpp"
#include "nsstab/constants.hpp"
#include "nsstab/forcing.hpp"
#include "nsstab/ns_integrator.hpp"

namespace nsstab {

enum class ForcingFamily {
  zero,
  constant_plus_decaying,  // f_s = a + eps exp(-lambda t) phi
  periodic_decaying,       // f_sT(t) = eps exp(-lambda (t - kT)) phi on [kT, (k+1)T)
};
const char* to_string(ForcingFamily f);
ForcingFamily forcing_family_from_string(const std::string& s);

struct BaseForcingSpec {
  ForcingFamily family = ForcingFamily::zero;
  std::array<double, 2> a{0.0, 0.0};
  double epsilon = 0.0;
  double lambda = 1.0;
  std::array<int, 2> mode{0, 1};  // phi is the solenoidal sine mode with this wavevector
  /// phi normalized to unit H^1 norm on the 3D box.
  bool unit_h1 = true;
};

/// The shape phi of a decaying forcing term: mean-free, solenoidal, x3-independent.
SpectralField forcing_shape(const PeriodicGrid& grid2d, std::array<int, 2> mode, bool unit_h1);

/// Builds the base forcing. The periodic family needs the window length.
Forcing forcing_families(const BaseForcingSpec& spec, const PeriodicGrid& grid2d, double T = 0.0);

/// int_0^inf ||h_bar||^2_{H^1} on the 3D box for the decaying part.
double decaying_h1_integral(const BaseForcingSpec& spec, const PeriodicGrid& grid2d);

struct PerturbationSpec {
  double gamma = 1e-4;
  double k0 = 2.0;
  std::uint64_t seed = 1;
  double fill = 1.0 - 1e-9;  // ||u(0)||^2_{H^1} = fill * gamma; 0 gives the zero field
  std::array<double, 3> mean{0.0, 0.0, 0.0};
};

/// Random solenoidal field with |u_k| ~ exp(-|m|^2 / k0^2) on 1 <= |m| <= N/4,
/// scaled so that ||u(0)||^2_{H^1} = fill * gamma.
FlowState make_perturbation(const PeriodicGrid& grid3d, const PerturbationSpec& spec);

struct PerturbationForcingSpec {
  double amplitude = 0.0;  // g_bar = amplitude exp(-rate t) psi, psi unit L2
  double rate = 1.0;
  std::array<int, 3> mode{1, 0, 0};
  std::array<double, 3> mean{0.0, 0.0, 0.0};  // mean(g) = mean exp(-mean_rate t)
  double mean_rate = 1.0;
};

Forcing perturbation_forcing(const PerturbationForcingSpec& spec, const PeriodicGrid& grid3d);

/// Lifted base forcing plus g on the 3D grid, the forcing of the full flow.
/// The periodic family cannot be combined with a nonzero g.
Forcing full_forcing(const BaseForcingSpec& base, const PerturbationForcingSpec& g, const PeriodicGrid& grid3d,
                     double T = 0.0);

/// Base initial state: amplitude (sin x1 cos x2, -cos x1 sin x2) with k = 2 pi / L.
FlowState base_initial_state(const PeriodicGrid& grid2d, double amplitude);

struct Scenario {
  std::string name = "scenario";
  double L = 6.283185307179586;
  int N = 32;
  double nu = 1.0;
  double T = 0.0;  // 0 selects the smallest T that passes every time condition
  int windows = 5;
  double dt = 0.02;
  Scheme scheme = Scheme::if_ab2;
  double cfl_max = 0.5;
  BaseForcingSpec base_forcing;
  double base_initial_amplitude = 0.0;  // Taylor-Green-shaped base initial field
  PerturbationSpec perturbation;
  std::string perturbation_snapshot;  // when set, u(0) is read from this snapshot file
  PerturbationForcingSpec g;
  ConstantsMode constants_mode = ConstantsMode::empirical_calibrated;
  CalibrationOptions calibration;
  int k_max = 64;
  double epsilon = 0.5;

  void validate() const;
};

/// Smallest T (times a 2% margin) satisfying every time condition of the chains.
double choose_window_length(const Scenario& s, const InterpolationConstants& c);

struct WindowStats {
  int k = 0;
  // sup over the window
  double sup_vs_h1 = 0, sup_vs_h2 = 0, sup_u_l2 = 0, sup_u_h1 = 0;
  // integrals over the window
  double int_vs_h2 = 0, int_vs_h3 = 0, int_u_h1 = 0, int_u_h2 = 0;
  double int_vs_t = 0, int_u_t = 0, int_gradq = 0, int_gradp_s = 0;
  // squared quantities used by the one-sided checks
  double vs_l2_sq_start = 0;   // ||v_s(kT)||^2
  double sup_vs_l2_sq = 0;     // sup ||v_s||^2
  double sup_vs_hess_sq = 0;   // sup ||v_sxx||^2
  double max_h1_plus_h2 = 0;   // max_t ||v_s(t)||^2_{H^1} + int_{kT}^t ||v_s||^2_{H^2}
  double max_grad_plus_h2 = 0; // max_t ||v_sx(t)||^2 + c_s1 int_{kT}^t ||v_s||^2_{H^2}
  double max_u_energy = 0;     // max_t ||u(t)||^2 + c_1 int_{kT}^t ||u||^2_{H^1}
  double sup_u_h1_sq = 0;      // sup X^2
};

struct BoundCheck {
  std::string name;
  int k = -1;
  double value = 0.0;
  double bound = 0.0;
  bool holds = true;
};

struct WindowSummary {
  std::vector<WindowStats> windows;
  std::vector<std::string> notices;
  std::vector<double> max_ratio;  // per window k >= 1: max over stats of sup_k / sup_{k-1}
  bool uniform = true;            // every ratio <= 1.05
  std::vector<BoundCheck> checks;
};

/// Per-window statistics from a pair trajectory (samples at every step).
WindowSummary window_statistics(const PairTrajectory& traj, double T, double c_1,
                                 const AChain* a = nullptr, const BChain* b = nullptr);

struct H21Window {
  int k = 0;
  double int_t_sq = 0.0;      // int ||u_t||^2
  double int_h2_sq = 0.0;     // int ||u||^2_{H^2}
  double int_gradp_sq = 0.0;  // int ||grad p_bar||^2
  double h21_sq = 0.0;        // int_t + int_h2
};

std::vector<H21Window> h21_window_norm(const Trajectory& traj, double T);

struct BarrierReport {
  double gamma = 0.0;
  double gamma_star = 0.0;
  std::vector<double> t, x2, y2, g2;
  bool never_exceeded = true;
  std::optional<double> first_exceedance_time;
  double max_x2 = 0.0;
  bool nesting_holds = true;  // X <= Y
  // discrete (c_1/2) form
  int violations = 0;
  double max_violation = 0.0;
  double max_residual = -1e300;  // max of lhs - rhs - slack
  // raw form with c_3 X^6
  int raw_violations = 0;
  double raw_max_violation = 0.0;
  int checked = 0;
};

/// Discrete check of dX^2/dt <= -(c_1/2) X^2 + G^2 and of the raw form
/// dX^2/dt <= -X^2 (c_1 - c_3 X^4) + G^2 at every interior sample.
BarrierReport barrier_monitor(const std::vector<double>& t, const std::vector<double>& x2,
                              const std::vector<double>& g2, double c_1, double c_3, double gamma,
                              const std::vector<double>& y2 = {});

struct StabilityResult {
  Scenario scenario;
  InterpolationConstants constants;
  double T = 0.0;
  double t_end = 0.0;
  PairTrajectory trajectories;
  BaseInputs base_in;
  PerturbationInputs pert_in;
  AbarChain abar;
  AChain a;
  BChain b;
  double a0 = 0.0;  // only for the constant-plus-decaying family
  SmallnessReport smallness;
  WindowSummary windows;
  std::vector<H21Window> h21_base, h21_perturbation;
  BarrierReport barrier;
  std::vector<std::string> warnings;
  bool aborted = false;
  std::string abort_reason;
};

StabilityResult run_stability_experiment(const Scenario& scenario);

/// The scenario of the acceptance run: a = (1, 0) plus a decaying mode, gamma = 1e-4, N = 32.
Scenario reference_scenario();

}  // namespace nsstab
