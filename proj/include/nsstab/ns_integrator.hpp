#pragma once

/// @file ns_integrator.hpp
/// @brief Integrating-factor pseudo-spectral stepping for the 2D base flow, the
/// full 3D flow and the perturbation system, with exact mean tracking.
///
/// Every velocity is carried as a mean-free solenoidal part plus a spatially
/// constant mean. The mean obeys d/dt mean = mean(f) and is advanced in closed
/// form. Advection by the mean is a constant-coefficient operator, so it is
/// folded into the per-mode integrating factor together with the viscous term:
///
///   E(t_a, t_b) = exp(-nu |k|^2 (t_b - t_a) - i k . int_{t_a}^{t_b} m(s) ds).

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "nsstab/forcing.hpp"
#include "nsstab/spectral_field.hpp"

namespace nsstab {

/// The run cannot continue (non-finite state, CFL violation).
class SolverAbort : public Error {
 public:
  SolverAbort(const std::string& what, double advisory_dt = 0.0) : Error(what), advisory_dt_(advisory_dt) {}
  /// Suggested step size when the abort came from the CFL check, otherwise 0.
  [[nodiscard]] double advisory_dt() const { return advisory_dt_; }

 private:
  double advisory_dt_;
};

enum class Scheme { if_ab2, if_rk3 };
enum class Role { base2d, full3d, perturbation };

const char* to_string(Scheme s);
const char* to_string(Role r);

struct SolverConfig {
  double nu = 1.0;
  double dt = 1e-3;
  double t_end = 1.0;
  Scheme scheme = Scheme::if_ab2;
  bool dealias = true;
  /// Bound on dt * max|u - mean(u)| * N / L at every accepted step.
  double cfl_max = 0.5;

  void validate() const;
};

struct FlowState {
  double t = 0.0;
  SpectralField u_bar;  // mean-free, solenoidal
  MeanVector mean;
  Role role = Role::base2d;

  /// Splits a velocity field into mean and Leray-projected mean-free part.
  static FlowState from_velocity(const SpectralField& velocity, Role role, double t = 0.0);
  static FlowState zero(const PeriodicGrid& grid, Role role, double t = 0.0);
  /// u_bar + mean.
  [[nodiscard]] SpectralField velocity() const;
};

/// Per-step diagnostics. Base-flow values are reported on the 3D box
/// [0, L]^3 (squared L2-type quantities carry a factor L, L_p norms L^{1/p}).
struct NormSample {
  double t = 0.0;
  std::array<double, 4> h_sq{};  // ||u_bar||^2_{H^s}, s = 0..3
  double grad_sq = 0.0;          // ||grad u_bar||^2
  double hess_sq = 0.0;          // ||grad^2 u_bar||^2
  double dt_sq = 0.0;            // ||d/dt u_bar||^2
  double gradp_sq = 0.0;         // ||grad p_bar||^2 (pressure gradient of the bar system)
  double forcing_inner = 0.0;    // <f_bar, u_bar>
  double grad_l3 = 0.0;          // ||grad u_bar||_{L3}; base flow only
  double max_speed = 0.0;        // max |u_bar| (advecting fluctuation for the perturbation)
  MeanVector mean;
};

struct Trajectory {
  Role role = Role::base2d;
  double nu = 1.0;
  double dt = 0.0;
  /// Factor applied to squared norms of the stored samples (L for the base flow).
  double measure_scale = 1.0;
  std::vector<NormSample> samples;
  std::vector<FlowState> snapshots;
  bool aborted = false;
  std::string abort_reason;
  double advisory_dt = 0.0;

  /// Snapshot whose time is closest to t.
  [[nodiscard]] const FlowState& snapshot_near(double t) const;
};

struct EvolveOptions {
  /// Extra times at which full states are kept (snapped to the step grid).
  std::vector<double> snapshot_times;
  /// Window length T > 0 adds every kT to the snapshot times and enables the
  /// window sanity checks (dt <= T <= t_end).
  double window = 0.0;
};

/// Carry-over data for the two-step scheme when stepping one state at a time.
struct StepHistory {
  bool valid = false;
  SpectralField n_prev;
  std::array<double, 3> disp_prev{};
  double h_prev = 0.0;
};

/// -P[(w . grad) u], dealiased. w and u share a grid; w may have any mean.
SpectralField nonlinear_term(const SpectralField& u, const SpectralField& advecting);

/// Full right side of the perturbation equation without the forcing:
/// -P[(u.grad)u_bar + (v_s.grad)u_bar + (u.grad)v_s_bar], with u = u_bar + u_mean
/// and v_s = v_s_bar + v_s_mean (the 2D base field lifted to 3D).
SpectralField perturbation_term(const SpectralField& u_bar, const MeanVector& u_mean,
                                const SpectralField& vs_bar_2d, const MeanVector& vs_mean);

/// mean(t1) = mean(t0) + int_{t0}^{t1} mean(f) dt.
MeanVector mean_ode_step(const MeanVector& mean, const Forcing& forcing, double t0, double t1);

/// One step of a base2d or full3d state. With if_ab2 and an empty or absent
/// history the step is taken with the three-stage scheme and the history is filled.
FlowState step(const FlowState& state, const Forcing& forcing, const SolverConfig& cfg,
               StepHistory* history = nullptr);

Trajectory evolve_base_2d(const FlowState& v0, const Forcing& forcing, const SolverConfig& cfg,
                          const EvolveOptions& options = {});
Trajectory evolve_full_3d(const FlowState& v0, const Forcing& forcing, const SolverConfig& cfg,
                          const EvolveOptions& options = {});

struct PairTrajectory {
  Trajectory base;
  Trajectory perturbation;
};

/// Co-evolves the base flow and the perturbation in lockstep, so that every
/// stage of the perturbation sees the base flow at the same stage.
PairTrajectory evolve_pair(const FlowState& base0, const Forcing& base_forcing, const FlowState& u0,
                           const Forcing& g, const SolverConfig& cfg, const EvolveOptions& options = {});

struct EnergyResidual {
  std::vector<double> t;
  std::vector<double> r;
  double max_abs = 0.0;
};

/// r(t) = d/dt 1/2 ||u_bar||^2 + nu ||grad u_bar||^2 - <f_bar, u_bar>, with a
/// five-point difference in t, shifted inwards at the ends of the series.
EnergyResidual energy_balance_residual(const Trajectory& trajectory);

}  // namespace nsstab
