#include "nsstab/certificate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "nsstab/quadrature.hpp"

namespace nsstab {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double mul(double a, double b) { return safe_mul(a, b); }

// e^x * y with e^inf * 0 = 0
double exp_mul(double x, double y) {
  if (y == 0.0) return 0.0;
  return std::exp(x) * y;
}

HypothesisFlag flag_le(std::string name, double lhs, double rhs) {
  HypothesisFlag f;
  f.name = std::move(name);
  f.lhs = lhs;
  f.rhs = rhs;
  f.holds = lhs <= rhs;
  return f;
}

HypothesisFlag flag_ge(std::string name, double lhs, double rhs) {
  HypothesisFlag f;
  f.name = std::move(name);
  f.lhs = lhs;
  f.rhs = rhs;
  f.holds = lhs >= rhs;
  return f;
}

HypothesisFlag flag_finite(std::string name, double v) {
  HypothesisFlag f;
  f.name = std::move(name);
  f.lhs = v;
  f.rhs = kInf;
  f.holds = std::isfinite(v);
  f.time_condition = false;
  return f;
}

bool all_hold(const std::vector<HypothesisFlag>& flags, bool time_only, const std::string& skip = {}) {
  return std::all_of(flags.begin(), flags.end(), [&](const HypothesisFlag& f) {
    if (time_only && !f.time_condition) return true;
    return f.holds || (!skip.empty() && f.name == skip);
  });
}

MeanVector drift_at(const Forcing& f, const MeanVector& m0, double t) {
  MeanVector m = m0;
  if (f.components() == 0 || t == 0.0) return m;
  const MeanVector d = f.mean_integral(0.0, t);
  for (std::size_t i = 0; i < m.size() && i < d.size(); ++i) m[i] += d[i];
  return m;
}

}  // namespace

double safe_mul(double a, double b) {
  if (a == 0.0 || b == 0.0) return 0.0;
  return a * b;
}

// ---------------------------------------------------------------------------
// Suprema over windows

WindowSup window_sup(const Forcing& f, double T, ForcingNorm norm, int k_max, double scale) {
  if (!(T > 0.0)) throw InvalidInput("window_sup: T must be positive");
  if (k_max < 0) throw InvalidInput("window_sup: K_max must be non-negative");
  WindowSup out;
  if (f.components() == 0 || f.is_zero()) {
    out.windows = 0;
    return out;
  }
  if (auto p = f.period(); p && std::abs(*p - T) <= 1e-12 * T) {
    // Every window is a copy of the first.
    out.value = scale * f.window_integral(0.0, T, norm);
    out.windows = 1;
    return out;
  }
  double best = 0.0;
  for (int k = 0; k <= k_max; ++k) best = std::max(best, f.window_integral(k * T, (k + 1) * T, norm));
  out.windows = k_max + 1;
  if (auto tail = f.tail_window_bound(T, k_max + 1, norm)) {
    best = std::max(best, *tail);
    out.certified = true;
  } else {
    out.certified = false;
  }
  out.value = scale * best;
  return out;
}

DriftSup drift_sup(const Forcing& f, const MeanVector& m0, double horizon) {
  DriftSup out;
  const double base = std::sqrt(m0.norm_sq());
  if (f.components() == 0 || (f.mean_terms().empty() && f.kind() == Forcing::Kind::closed_form)) {
    out.value = base;
    return out;
  }
  if (f.mean_unbounded()) {
    out.value = kInf;
    out.certified = true;
    return out;
  }
  double best = base;
  const int n = 4096;
  for (int i = 1; i <= n; ++i) {
    const double t = horizon * static_cast<double>(i) / n;
    best = std::max(best, std::sqrt(drift_at(f, m0, t).norm_sq()));
  }
  MeanVector lim;
  if (f.mean_limit(&lim)) {
    MeanVector m = m0;
    for (std::size_t i = 0; i < m.size() && i < lim.size(); ++i) m[i] += lim[i];
    best = std::max(best, std::sqrt(m.norm_sq()));
    // One monotone term moves the mean along a segment, so |.| peaks at an end.
    out.certified = f.mean_terms().size() <= 1;
  } else {
    out.certified = false;
  }
  out.value = best;
  return out;
}

WindowSup drift_window_sup(const Forcing& f, const MeanVector& m0, double T, int k_max, const DriftSup& drift) {
  WindowSup out;
  out.windows = k_max + 1;
  if (!std::isfinite(drift.value)) {
    out.value = kInf;
    out.certified = true;
    return out;
  }
  if (f.components() == 0 || (f.mean_terms().empty() && f.kind() == Forcing::Kind::closed_form)) {
    out.value = T * m0.norm_sq();
    return out;
  }
  auto sq = [&](double t) { return drift_at(f, m0, t).norm_sq(); };
  double best = 0.0;
  for (int k = 0; k <= k_max; ++k) best = std::max(best, quad::adaptive_simpson(sq, k * T, (k + 1) * T, 1e-9));
  // Windows past K_max: T times the sup of |m|^2 on [(K_max + 1) T, inf).
  const double t_tail = (k_max + 1) * T;
  MeanVector lim;
  double tail = T * drift.value * drift.value;
  out.certified = drift.certified;
  if (f.mean_limit(&lim) && f.mean_terms().size() <= 1) {
    MeanVector m = m0;
    for (std::size_t i = 0; i < m.size() && i < lim.size(); ++i) m[i] += lim[i];
    tail = T * std::max(sq(t_tail), m.norm_sq());
    out.certified = true;
  }
  out.value = std::max(best, tail);
  return out;
}

BaseInputs base_inputs(const Forcing& f_s, const FlowState& v0, double T, int k_max) {
  if (v0.role != Role::base2d) throw InvalidInput("base_inputs: base2d state required");
  const double L = v0.u_bar.grid().L;
  BaseInputs in;
  in.T = T;
  in.f_l2 = window_sup(f_s, T, ForcingNorm::l2, k_max, L);
  in.f_grad = window_sup(f_s, T, ForcingNorm::gradient, k_max, L);
  in.f_h1 = window_sup(f_s, T, ForcingNorm::h1, k_max, L);
  in.v0_l2_sq = L * sobolev_norm_sq(v0.u_bar, 0);
  in.v0_grad_sq = L * derivative_seminorm_sq(v0.u_bar, 1);
  in.v0_hess_sq = L * derivative_seminorm_sq(v0.u_bar, 2);
  in.v0_h1_sq = in.v0_l2_sq + in.v0_grad_sq;
  in.drift = drift_sup(f_s, v0.mean, (k_max + 1) * T);
  return in;
}

PerturbationInputs perturbation_inputs(const Forcing& g, const FlowState& u0, double T, int k_max) {
  if (u0.role != Role::perturbation && u0.role != Role::full3d)
    throw InvalidInput("perturbation_inputs: 3D state required");
  PerturbationInputs in;
  in.T = T;
  in.g_l2 = window_sup(g, T, ForcingNorm::l2, k_max);
  in.drift = drift_sup(g, u0.mean, (k_max + 1) * T);
  const WindowSup b2 = drift_window_sup(g, u0.mean, T, k_max, in.drift);
  in.b2_sq = b2.value;
  in.b2_certified = b2.certified;
  in.u0_l2_sq = sobolev_norm_sq(u0.u_bar, 0);
  in.u0_h1_sq = in.u0_l2_sq + derivative_seminorm_sq(u0.u_bar, 1);
  return in;
}

// ---------------------------------------------------------------------------
// Thresholds

double t_star(const PoincareConstants& p) { return 2.0 * std::numbers::ln2 / p.c_s1; }

double gamma_star(const InterpolationConstants& c) {
  return std::pow(c.poincare.c_1 / (2.0 * c.c_3), 0.25);
}

double geometric_iterate(double a, double r, double x0, int k) {
  const double rk = std::pow(r, k);
  if (r == 1.0) return a * k + x0;
  return a * (1.0 - rk) / (1.0 - r) + mul(rk, x0);
}

double geometric_bound(double a, double r, double x0, int k) {
  if (!(r < 1.0)) return kInf;
  return a / (1.0 - r) + mul(std::pow(r, k), x0);
}

// ---------------------------------------------------------------------------
// Chains

AbarChain abar_chain(const BaseInputs& in, const InterpolationConstants& c) {
  AbarChain a;
  a.T = in.T;
  a.abar1_sq = in.f_h1.value;
  a.abar1_certified = in.f_h1.certified;
  a.abar2_sq = in.v0_h1_sq;
  const double s = a.abar1_sq + a.abar2_sq;
  a.abar3_sq = mul(c.poincare.c_1, mul(s, a.abar2_sq)) + exp_mul(c.c_2 * s, a.abar1_sq + 1.0);
  a.abar4_sq = in.drift.value * in.drift.value;
  a.abar4_certified = in.drift.certified;
  a.t_star = t_star(c.poincare);
  a.flags.push_back(flag_ge("T_ge_T_star", in.T, a.t_star));
  a.flags.push_back(flag_le("abar3_lt_T", a.abar3_sq, in.T));
  a.flags.back().holds = a.abar3_sq < in.T;
  a.flags.push_back(flag_finite("abar1_finite", a.abar1_sq));
  a.flags.push_back(flag_finite("abar4_finite", a.abar4_sq));
  a.membership = a.flags[0].holds && a.flags[1].holds;
  return a;
}

double a0_threshold(double h_integral, double abar2_sq, const InterpolationConstants& c) {
  const double s = h_integral + abar2_sq;
  return mul(c.poincare.c_1, s) + exp_mul(c.c_2 * s, h_integral + 1.0);
}

bool AChain::hypotheses_hold() const { return all_hold(flags, false, "grad_window_contraction_as_printed"); }
bool AChain::time_conditions_hold() const { return all_hold(flags, true, "grad_window_contraction_as_printed"); }

AChain a_chain(const BaseInputs& in, const InterpolationConstants& c) {
  const double cs1 = c.poincare.c_s1;
  const double T = in.T;
  AChain a;
  a.T = T;
  a.a1_sq = in.f_l2.value / cs1;
  a.a2_sq = a.a1_sq / (1.0 - std::exp(-cs1 * T)) + in.v0_l2_sq;
  a.a3_sq = a.a1_sq + a.a2_sq;
  a.a4_sq = mul(cs1, exp_mul(cs1 * a.a3_sq, a.a1_sq));
  a.a5_sq = a.a4_sq / (1.0 - std::exp(-cs1 * T / 2.0)) + in.v0_grad_sq;
  a.a6_sq = a.a4_sq + a.a5_sq;
  a.a7_sq = mul(c.c_s2 * (a.a6_sq + 1.0), a.a3_sq) + a.a5_sq;
  a.a8_sq = a.a3_sq + a.a7_sq;
  a.a9 = in.drift.value;
  a.a9_sq = a.a9 * a.a9;
  a.a10_sq = in.f_grad.value;
  a.a11_sq = mul(c.c_s3, exp_mul(c.c_s3 * a.a8_sq, a.a10_sq));
  a.a12_sq = 2.0 * a.a11_sq + in.v0_hess_sq;
  a.a13_sq = a.a11_sq + exp_mul(c.c_s4 * a.a8_sq, a.a12_sq);
  a.a14_sq = mul(c.c_s3, mul(a.a13_sq, a.a8_sq) + a.a10_sq) + a.a12_sq;
  a.certified = in.f_l2.certified && in.f_grad.certified && in.drift.certified;

  a.flags.push_back(flag_finite("a1_finite", a.a1_sq));
  a.flags.push_back(flag_finite("a10_finite", a.a10_sq));
  a.flags.push_back(flag_finite("a9_finite", a.a9));
  a.flags.push_back(flag_ge("T_absorbs_stretching", T, 2.0 * c.c_s2 * a.a3_sq / cs1));
  a.flags.push_back(flag_le("hessian_window_decay", -cs1 * T / 2.0 + c.c_s4 * a.a8_sq, 0.0));
  a.flags.push_back(flag_ge("grad_window_contraction", 1.0 - std::exp(-cs1 * T / 2.0), 0.5));
  a.flags.push_back(flag_ge("grad_window_contraction_as_printed", 1.0 - std::exp(cs1 * T / 2.0), 0.5));
  return a;
}

bool BChain::hypotheses_hold() const { return all_hold(flags, false); }
bool BChain::time_conditions_hold() const { return all_hold(flags, true); }

BChain b_chain(const PerturbationInputs& in, const AChain& a, const InterpolationConstants& c, double gamma) {
  const double c1 = c.poincare.c_1;
  const double c2 = c.c_2;
  const double T = in.T;
  BChain b;
  b.T = T;
  b.gamma = gamma;
  b.gamma_star = gamma_star(c);
  b.b1_sq = in.g_l2.value;
  b.b2_sq = in.b2_sq;
  const double e8 = c2 * a.a8_sq;
  b.b3_sq = exp_mul(e8, c2 * b.b1_sq + mul(c2 * a.a3_sq, b.b2_sq));
  b.b4_sq = b.b3_sq + exp_mul(e8, 2.0 * b.b3_sq + in.u0_l2_sq);
  b.b5_sq = mul(c2 * a.a8_sq, b.b4_sq) + mul(c2 * a.a3_sq, b.b2_sq) + c2 * b.b1_sq + b.b3_sq;
  b.b6_l2 = std::sqrt(b.b5_sq);
  b.b6_mean = in.drift.value;
  const double tg = (T + 1.0) * gamma * gamma;
  const double b6m2 = b.b6_mean * b.b6_mean;
  b.b7_sq = mul(tg + b6m2, mul(a.a8_sq, 1.0 + a.a8_sq + a.a9_sq) + a.a9_sq + tg) + gamma * gamma;
  b.certified = in.g_l2.certified && in.b2_certified && in.drift.certified && a.certified;

  b.flags.push_back(flag_finite("b1_finite", b.b1_sq));
  b.flags.push_back(flag_finite("b2_finite", b.b2_sq));
  b.flags.push_back(flag_le("perturbation_window_decay", -c1 * T / 2.0 + a.a8_sq, 0.0));
  b.flags.push_back(flag_le("perturbation_window_decay_c2", -c1 * T / 2.0 + c2 * a.a8_sq, 0.0));
  b.flags.push_back(flag_ge("perturbation_window_contraction", 1.0 - std::exp(-c1 * T / 2.0), 0.5));
  b.flags.push_back(flag_le("gamma_le_gamma_star", gamma, b.gamma_star));
  b.flags.push_back(flag_le("initial_h1_sq_le_gamma", in.u0_h1_sq, gamma));
  b.flags.push_back(flag_le("drift_sq_le_gamma", b6m2, gamma));
  for (std::size_t i = b.flags.size() - 3; i < b.flags.size(); ++i) b.flags[i].time_condition = false;
  return b;
}

// ---------------------------------------------------------------------------
// Smallness

SmallnessReport smallness_check(double gamma, const InterpolationConstants& c, const BChain& b,
                                const SmallnessInputs& in, double epsilon) {
  if (in.vsx_l3.size() != in.t.size()) throw InvalidInput("smallness_check: sample count mismatch");
  SmallnessReport r;
  r.gamma = gamma;
  r.epsilon = epsilon;
  r.threshold = c.poincare.c_1 * gamma / 4.0;
  r.gamma_ok = gamma <= b.gamma_star;
  r.t = in.t;
  const double b6sq = b.b6_l2 * b.b6_l2;
  const double fixed = b.b1_sq + in.u0_l2_sq + b.b2_sq;
  for (std::size_t i = 0; i < in.t.size(); ++i) {
    const double t = in.t[i];
    const double l3sq = in.vsx_l3[i] * in.vsx_l3[i];
    const double d2 = in.drift_sq ? in.drift_sq(t) : 0.0;
    const double g2 = in.g_bar_sq ? in.g_bar_sq(t) : 0.0;
    const double val = mul(c.c_3 * l3sq, b6sq + d2) + c.c_4 * g2;
    const double hyp = mul(c.c_3 * l3sq, mul(l3sq, b.b5_sq) + d2) + c.c_3 * g2;
    r.g2.push_back(val);
    r.hypothesis_lhs.push_back(hyp);
    r.max_g2 = std::max(r.max_g2, val);
    r.max_hypothesis_lhs = std::max(r.max_hypothesis_lhs, hyp);
    r.gbar_sum_max = std::max(r.gbar_sum_max, fixed + d2 + g2);
    r.gbar_max_addend = std::max({r.gbar_max_addend, b.b1_sq, in.u0_l2_sq, b.b2_sq, d2, g2});
  }
  if (in.t.empty()) {
    r.gbar_sum_max = fixed;
    r.gbar_max_addend = std::max({b.b1_sq, in.u0_l2_sq, b.b2_sq});
  }
  r.g2_holds = r.max_g2 <= r.threshold;
  r.hypothesis_holds = r.max_hypothesis_lhs <= r.threshold;
  r.gbar_holds = r.gbar_sum_max <= epsilon * gamma;
  return r;
}

}  // namespace nsstab
