#pragma once

/// @file certificate.hpp
/// @brief The explicit constant chains of the base-flow and perturbation
/// estimates, their time-largeness hypotheses, and the smallness checks.
///
/// Every quantity is evaluated by literal substitution. Non-finite values are
/// legitimate results (a divergent supremum is a violated hypothesis, not an
/// error), and 0 * inf is taken as 0 throughout.

#include <functional>
#include <string>
#include <vector>

#include "nsstab/constants.hpp"
#include "nsstab/forcing.hpp"
#include "nsstab/ns_integrator.hpp"

namespace nsstab {

inline constexpr int kCertificateSchemaVersion = 1;

/// sup over windows k of a window integral.
struct WindowSup {
  double value = 0.0;
  bool certified = true;  // false when only k = 0..K_max was examined
  int windows = 0;
};

/// sup over t >= 0 of |mean(t)|, mean(t) = mean(0) + int_0^t mean(f).
struct DriftSup {
  double value = 0.0;
  bool certified = true;
};

struct HypothesisFlag {
  std::string name;
  bool holds = true;
  double lhs = 0.0;
  double rhs = 0.0;
  /// A largeness condition on T (as opposed to a finiteness or smallness condition on the data).
  bool time_condition = true;
};

/// Data the base-flow chains are built from (norms on the 3D box).
struct BaseInputs {
  double T = 0.0;
  WindowSup f_l2;    // sup_k int ||f_bar||^2
  WindowSup f_grad;  // sup_k int ||grad f_bar||^2
  WindowSup f_h1;    // sup_k int ||f_bar||^2_{H^1}
  double v0_l2_sq = 0.0;
  double v0_grad_sq = 0.0;
  double v0_hess_sq = 0.0;
  double v0_h1_sq = 0.0;
  DriftSup drift;  // base-flow mean
};

/// Data for the perturbation chain.
struct PerturbationInputs {
  double T = 0.0;
  WindowSup g_l2;   // sup_k int ||g_bar||^2
  double b2_sq = 0.0;  // sup_k int_{kT}^{(k+1)T} |mean u(t)|^2 dt
  bool b2_certified = true;
  DriftSup drift;  // perturbation mean
  double u0_l2_sq = 0.0;
  double u0_h1_sq = 0.0;
};

/// a * b with 0 * inf = 0.
double safe_mul(double a, double b);

WindowSup window_sup(const Forcing& f, double T, ForcingNorm norm, int k_max, double scale = 1.0);
DriftSup drift_sup(const Forcing& f, const MeanVector& m0, double horizon);
/// sup_k int_{kT}^{(k+1)T} |m0 + int_0^t mean(f)|^2 dt
WindowSup drift_window_sup(const Forcing& f, const MeanVector& m0, double T, int k_max, const DriftSup& drift);

/// base2d forcing and initial state; 2D norms are converted to the 3D box.
BaseInputs base_inputs(const Forcing& f_s, const FlowState& v0, double T, int k_max = 64);
PerturbationInputs perturbation_inputs(const Forcing& g, const FlowState& u0, double T, int k_max = 64);

/// T_* = 2 ln 2 / c_s1
double t_star(const PoincareConstants& p);
/// gamma_* = (c_1 / (2 c_3))^{1/4}
double gamma_star(const InterpolationConstants& c);

/// x_k for x_{j+1} = a + r x_j in closed form: a (1 - r^k) / (1 - r) + r^k x0.
double geometric_iterate(double a, double r, double x0, int k);
/// The bound a / (1 - r) + r^k x0 used to close the window iterations.
double geometric_bound(double a, double r, double x0, int k);

struct AbarChain {
  double T = 0.0;
  double abar1_sq = 0.0;
  double abar2_sq = 0.0;
  double abar3_sq = 0.0;
  double abar4_sq = 0.0;
  bool abar1_certified = true;
  bool abar4_certified = true;
  double t_star = 0.0;
  bool membership = false;
  std::vector<HypothesisFlag> flags;
};

AbarChain abar_chain(const BaseInputs& in, const InterpolationConstants& c);

/// A_0 = c_1 (H + Abar2^2) + (H + 1) exp(c_2 (H + Abar2^2)), H = int_0^inf ||h_bar||^2_{H^1}.
double a0_threshold(double h_integral, double abar2_sq, const InterpolationConstants& c);

struct AChain {
  double T = 0.0;
  double a1_sq = 0, a2_sq = 0, a3_sq = 0, a4_sq = 0, a5_sq = 0, a6_sq = 0, a7_sq = 0, a8_sq = 0;
  double a9 = 0, a9_sq = 0;
  double a10_sq = 0, a11_sq = 0, a12_sq = 0, a13_sq = 0, a14_sq = 0;
  bool certified = true;  // every supremum certified
  std::vector<HypothesisFlag> flags;
  [[nodiscard]] bool hypotheses_hold() const;
  [[nodiscard]] bool time_conditions_hold() const;
};

AChain a_chain(const BaseInputs& in, const InterpolationConstants& c);

struct BChain {
  double T = 0.0;
  double gamma = 0.0;
  double gamma_star = 0.0;
  double b1_sq = 0, b2_sq = 0, b3_sq = 0, b4_sq = 0, b5_sq = 0;
  double b6_l2 = 0;    // sup ||u_bar||_{L2} bound, taken as B5
  double b6_mean = 0;  // sup |mean u(t)|
  double b7_sq = 0;    // envelope constant c = 1
  bool certified = true;
  std::vector<HypothesisFlag> flags;
  [[nodiscard]] bool hypotheses_hold() const;
  [[nodiscard]] bool time_conditions_hold() const;
  [[nodiscard]] bool gamma_ok() const { return gamma <= gamma_star; }
};

BChain b_chain(const PerturbationInputs& in, const AChain& a, const InterpolationConstants& c, double gamma);

/// Pointwise evaluation of the barrier forcing term and the smallness hypotheses.
struct SmallnessReport {
  double gamma = 0.0;
  double threshold = 0.0;  // c_1 gamma / 4
  std::vector<double> t;
  std::vector<double> g2;  // c_3 ||v_sx||^2_{L3} [B6^2 + |drift|^2] + c_4 ||g_bar||^2, B6 = b6_l2
  std::vector<double> hypothesis_lhs;  // c_3 ||v_sx||^2_{L3} [||v_sx||^2_{L3} B5^2 + |drift|^2] + c_3 ||g_bar||^2
  double max_g2 = 0.0;
  double max_hypothesis_lhs = 0.0;
  bool g2_holds = true;
  bool hypothesis_holds = true;
  // Gbar(t) <= eps gamma, addends: B1^2, ||u_bar(0)||^2, B2^2, |drift(t)|^2, ||g_bar(t)||^2
  double epsilon = 0.5;
  double gbar_sum_max = 0.0;
  double gbar_max_addend = 0.0;
  bool gbar_holds = true;
  bool gamma_ok = true;
};

struct SmallnessInputs {
  std::vector<double> t;
  std::vector<double> vsx_l3;  // ||grad v_s(t)||_{L3}
  std::function<double(double)> drift_sq;  // |mean u(t)|^2
  std::function<double(double)> g_bar_sq;  // ||g_bar(t)||^2
  double u0_l2_sq = 0.0;
};

SmallnessReport smallness_check(double gamma, const InterpolationConstants& c, const BChain& b,
                                const SmallnessInputs& in, double epsilon = 0.5);

}  // namespace nsstab
