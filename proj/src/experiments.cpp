#include "nsstab/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "nsstab/quadrature.hpp"
#include "nsstab/random.hpp"
#include "nsstab/snapshot_io.hpp"

namespace nsstab {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
// Window statistics below this are treated as zero by the uniformity check.
constexpr double kStatFloor = 1e-24;

bool nonzero(const std::array<double, 3>& v) { return v[0] != 0.0 || v[1] != 0.0 || v[2] != 0.0; }

}  // namespace

const char* to_string(ForcingFamily f) {
  switch (f) {
    case ForcingFamily::zero: return "zero";
    case ForcingFamily::constant_plus_decaying: return "constant_plus_decaying";
    case ForcingFamily::periodic_decaying: return "periodic_decaying";
  }
  return "zero";
}

ForcingFamily forcing_family_from_string(const std::string& s) {
  if (s == "zero") return ForcingFamily::zero;
  if (s == "constant_plus_decaying") return ForcingFamily::constant_plus_decaying;
  if (s == "periodic_decaying") return ForcingFamily::periodic_decaying;
  throw InvalidInput("unknown forcing family '" + s + "'");
}

// ---------------------------------------------------------------------------
// Forcing families

SpectralField forcing_shape(const PeriodicGrid& grid2d, std::array<int, 2> mode, bool unit_h1) {
  if (grid2d.dim != 2) throw InvalidInput("forcing_shape: 2D grid required");
  if (mode[0] == 0 && mode[1] == 0) throw InvalidInput("forcing_shape: mode must be nonzero");
  const int cut = static_cast<int>(grid2d.dealias_cutoff());
  if (std::abs(mode[0]) > cut || std::abs(mode[1]) > cut) throw InvalidInput("forcing_shape: mode outside the resolved band");
  const double len = std::hypot(static_cast<double>(mode[0]), static_cast<double>(mode[1]));
  const double e1 = -mode[1] / len, e2 = mode[0] / len;
  SpectralField f(grid2d, 2);
  // e sin(k . x) has coefficient -i e / 2 at +m.
  f.set_coeff(0, {mode[0], mode[1], 0}, Complex(0.0, -0.5 * e1));
  f.set_coeff(1, {mode[0], mode[1], 0}, Complex(0.0, -0.5 * e2));
  if (unit_h1) f = (1.0 / std::sqrt(grid2d.L * sobolev_norm_sq(f, 1))) * f;
  f.mark_mean_free(true);
  f.mark_solenoidal(true);
  return f;
}

Forcing forcing_families(const BaseForcingSpec& spec, const PeriodicGrid& grid2d, double T) {
  switch (spec.family) {
    case ForcingFamily::zero:
      return Forcing::zero(grid2d, 2);
    case ForcingFamily::constant_plus_decaying: {
      if (!(spec.lambda > 0.0)) throw InvalidInput("forcing: decay rate lambda must be positive");
      std::vector<FieldTerm> terms;
      if (spec.epsilon != 0.0)
        terms.push_back({forcing_shape(grid2d, spec.mode, spec.unit_h1),
                         TimeProfile::exponential(spec.epsilon, spec.lambda)});
      std::vector<MeanTerm> means;
      if (spec.a[0] != 0.0 || spec.a[1] != 0.0)
        means.push_back({MeanVector(std::vector<double>{spec.a[0], spec.a[1]}), TimeProfile::constant(1.0)});
      return Forcing::closed_form(grid2d, 2, std::move(terms), std::move(means));
    }
    case ForcingFamily::periodic_decaying: {
      if (!(spec.lambda > 0.0)) throw InvalidInput("forcing: decay rate lambda must be positive");
      if (!(T > 0.0)) throw InvalidInput("forcing: the periodic family needs T > 0");
      std::vector<FieldTerm> terms;
      if (spec.epsilon != 0.0)
        terms.push_back({forcing_shape(grid2d, spec.mode, spec.unit_h1),
                         TimeProfile::exponential(spec.epsilon, spec.lambda)});
      const Forcing base = Forcing::closed_form(grid2d, 2, std::move(terms), {});
      return Forcing::periodic_extension(base, T);
    }
  }
  return Forcing::zero(grid2d, 2);
}

double decaying_h1_integral(const BaseForcingSpec& spec, const PeriodicGrid& grid2d) {
  if (spec.family == ForcingFamily::zero || spec.epsilon == 0.0) return 0.0;
  if (!(spec.lambda > 0.0)) throw InvalidInput("forcing: decay rate lambda must be positive");
  const SpectralField phi = forcing_shape(grid2d, spec.mode, spec.unit_h1);
  return spec.epsilon * spec.epsilon * grid2d.L * sobolev_norm_sq(phi, 1) / (2.0 * spec.lambda);
}

// ---------------------------------------------------------------------------
// Perturbation data

FlowState make_perturbation(const PeriodicGrid& grid3d, const PerturbationSpec& spec) {
  if (grid3d.dim != 3) throw InvalidInput("make_perturbation: 3D grid required");
  if (!(spec.gamma >= 0.0)) throw InvalidInput("make_perturbation: gamma must be non-negative");
  if (!(spec.k0 > 0.0)) throw InvalidInput("make_perturbation: k0 must be positive");
  FlowState s = FlowState::zero(grid3d, Role::perturbation);
  s.mean = MeanVector(std::vector<double>{spec.mean[0], spec.mean[1], spec.mean[2]});
  if (!(spec.fill >= 0.0 && spec.fill < 1.0)) throw InvalidInput("make_perturbation: fill must lie in [0, 1)");
  if (spec.gamma == 0.0 || spec.fill == 0.0) return s;
  Rng rng(spec.seed);
  const double k0 = spec.k0;
  SpectralField u = random_solenoidal(grid3d, rng, [k0](double r) { return std::exp(-r * r / (k0 * k0)); }, 1.0,
                                      grid3d.N / 4.0);
  const double h1 = sobolev_norm_sq(u, 1);
  if (!(h1 > 0.0)) throw InvalidInput("make_perturbation: empty spectrum");
  u = std::sqrt(spec.gamma * spec.fill / h1) * u;
  u.mark_mean_free(true);
  u.mark_solenoidal(true);
  s.u_bar = std::move(u);
  return s;
}

Forcing perturbation_forcing(const PerturbationForcingSpec& spec, const PeriodicGrid& grid3d) {
  std::vector<FieldTerm> terms;
  std::vector<MeanTerm> means;
  if (spec.amplitude != 0.0) {
    if (spec.mode[0] == 0 && spec.mode[1] == 0 && spec.mode[2] == 0)
      throw InvalidInput("perturbation forcing: mode must be nonzero");
    // A unit vector orthogonal to the wavevector.
    const std::array<double, 3> m{double(spec.mode[0]), double(spec.mode[1]), double(spec.mode[2])};
    std::array<double, 3> ref{0.0, 0.0, 1.0};
    if (m[0] == 0.0 && m[1] == 0.0) ref = {1.0, 0.0, 0.0};
    std::array<double, 3> e{m[1] * ref[2] - m[2] * ref[1], m[2] * ref[0] - m[0] * ref[2],
                            m[0] * ref[1] - m[1] * ref[0]};
    const double n = std::sqrt(e[0] * e[0] + e[1] * e[1] + e[2] * e[2]);
    SpectralField psi(grid3d, 3);
    for (int c = 0; c < 3; ++c) psi.set_coeff(c, spec.mode, Complex(0.0, -0.5 * e[c] / n));
    psi = (1.0 / sobolev_norm(psi, 0)) * psi;
    psi.mark_mean_free(true);
    psi.mark_solenoidal(true);
    terms.push_back({std::move(psi), TimeProfile::exponential(spec.amplitude, spec.rate)});
  }
  if (nonzero(spec.mean)) {
    if (!(spec.mean_rate > 0.0)) throw InvalidInput("perturbation forcing: mean_rate must be positive");
    means.push_back({MeanVector(std::vector<double>{spec.mean[0], spec.mean[1], spec.mean[2]}),
                     TimeProfile::exponential(1.0, spec.mean_rate)});
  }
  if (terms.empty() && means.empty()) return Forcing::zero(grid3d, 3);
  return Forcing::closed_form(grid3d, 3, std::move(terms), std::move(means));
}

Forcing full_forcing(const BaseForcingSpec& base, const PerturbationForcingSpec& g, const PeriodicGrid& grid3d,
                     double T) {
  const PeriodicGrid g2(grid3d.L, 2, grid3d.N);
  const Forcing gf = perturbation_forcing(g, grid3d);
  if (base.family == ForcingFamily::zero) return gf.components() ? gf : Forcing::zero(grid3d, 3);
  if (!(base.lambda > 0.0)) throw InvalidInput("forcing: decay rate lambda must be positive");
  std::vector<FieldTerm> terms;
  std::vector<MeanTerm> means;
  if (base.epsilon != 0.0) {
    SpectralField phi = lift_2d_to_3d(forcing_shape(g2, base.mode, base.unit_h1), grid3d);
    phi.mark_mean_free(true);
    terms.push_back({std::move(phi), TimeProfile::exponential(base.epsilon, base.lambda)});
  }
  if (base.family == ForcingFamily::periodic_decaying) {
    if (!gf.is_zero()) throw InvalidInput("forcing: the periodic family cannot be combined with g");
    if (!(T > 0.0)) throw InvalidInput("forcing: the periodic family needs T > 0");
    return Forcing::periodic_extension(Forcing::closed_form(grid3d, 3, std::move(terms), {}), T);
  }
  if (base.a[0] != 0.0 || base.a[1] != 0.0)
    means.push_back({MeanVector(std::vector<double>{base.a[0], base.a[1], 0.0}), TimeProfile::constant(1.0)});
  for (const FieldTerm& t : gf.terms()) terms.push_back(t);
  for (const MeanTerm& m : gf.mean_terms()) means.push_back(m);
  return Forcing::closed_form(grid3d, 3, std::move(terms), std::move(means));
}

// ---------------------------------------------------------------------------
// Scenario

void Scenario::validate() const {
  if (!(L > 0.0)) throw InvalidInput("scenario: L must be positive");
  if (N < 4 || N % 2 != 0) throw InvalidInput("scenario: N must be even and at least 4");
  if (!(nu > 0.0)) throw InvalidInput("scenario: nu must be positive");
  if (T < 0.0) throw InvalidInput("scenario: T must be non-negative");
  if (windows < 1) throw InvalidInput("scenario: at least one window required");
  if (!(dt > 0.0)) throw InvalidInput("scenario: dt must be positive");
  if (T > 0.0 && dt > T) throw InvalidInput("scenario: dt exceeds T");
  if (!(cfl_max > 0.0)) throw InvalidInput("scenario: cfl_max must be positive");
  if (!(perturbation.gamma >= 0.0)) throw InvalidInput("scenario: gamma must be non-negative");
  if (k_max < 0) throw InvalidInput("scenario: k_max must be non-negative");
  if (!(epsilon > 0.0)) throw InvalidInput("scenario: epsilon must be positive");
  if (base_forcing.family != ForcingFamily::zero && !(base_forcing.lambda > 0.0))
    throw InvalidInput("scenario: decay rate lambda must be positive");
}

namespace {

}  // namespace

FlowState base_initial_state(const PeriodicGrid& g2, double amplitude) {
  if (amplitude == 0.0) return FlowState::zero(g2, Role::base2d);
  PhysicalField p(g2, 2);
  const double k = 2.0 * std::numbers::pi / g2.L;
  for (int j = 0; j < g2.N; ++j) {
    for (int i = 0; i < g2.N; ++i) {
      const double x = g2.L * i / g2.N, y = g2.L * j / g2.N;
      const std::size_t idx = static_cast<std::size_t>(j) * g2.N + i;
      p.component(0)[idx] = amplitude * std::sin(k * x) * std::cos(k * y);
      p.component(1)[idx] = -amplitude * std::cos(k * x) * std::sin(k * y);
    }
  }
  return FlowState::from_velocity(transform_forward(p), Role::base2d);
}

namespace {

double required_window(const AChain& a, const AbarChain& abar, const InterpolationConstants& c) {
  const double cs1 = c.poincare.c_s1, c1 = c.poincare.c_1;
  double req = t_star(c.poincare);
  req = std::max(req, 2.0 * c.c_s2 * a.a3_sq / cs1);
  req = std::max(req, 2.0 * c.c_s4 * a.a8_sq / cs1);
  req = std::max(req, 2.0 * a.a8_sq / c1);
  req = std::max(req, 2.0 * c.c_2 * a.a8_sq / c1);
  req = std::max(req, abar.abar3_sq * (1.0 + 1e-12));
  return req;
}

}  // namespace

double choose_window_length(const Scenario& s, const InterpolationConstants& c) {
  const PeriodicGrid g2(s.L, 2, s.N);
  const FlowState v0 = base_initial_state(g2, s.base_initial_amplitude);
  double T = 1.02 * t_star(c.poincare);
  for (int it = 0; it < 200; ++it) {
    const Forcing f = forcing_families(s.base_forcing, g2, T);
    const BaseInputs in = base_inputs(f, v0, T, s.k_max);
    const AChain a = a_chain(in, c);
    const AbarChain abar = abar_chain(in, c);
    const double req = required_window(a, abar, c);
    if (!std::isfinite(req)) throw InvalidInput("no finite window length satisfies the time conditions");
    if (T >= req) return T;
    T = 1.02 * req;
  }
  throw InvalidInput("window length selection did not settle");
}

// ---------------------------------------------------------------------------
// Window statistics

namespace {

struct WindowRange {
  std::size_t i0, i1;  // inclusive sample indices
};

std::vector<WindowRange> window_ranges(const std::vector<NormSample>& s, double T, std::vector<std::string>* notices) {
  std::vector<WindowRange> out;
  if (s.size() < 2) return out;
  const double t0 = s.front().t;
  const double tol = 1e-9 * T;
  std::size_t i = 0;
  for (int k = 0;; ++k) {
    const double a = t0 + k * T, b = t0 + (k + 1) * T;
    while (i < s.size() && s[i].t < a - tol) ++i;
    if (i >= s.size()) break;
    std::size_t j = i;
    while (j + 1 < s.size() && s[j + 1].t <= b + tol) ++j;
    if (s[j].t < b - tol) {
      if (j > i && notices) notices->push_back("window " + std::to_string(k) + " incomplete; excluded");
      break;
    }
    out.push_back({i, j});
    i = j;
  }
  return out;
}

template <class F>
double integral(const std::vector<NormSample>& s, const WindowRange& w, F&& f) {
  std::vector<double> v;
  v.reserve(w.i1 - w.i0 + 1);
  for (std::size_t i = w.i0; i <= w.i1; ++i) v.push_back(f(s[i]));
  if (v.size() < 2) return 0.0;
  return quad::uniform_samples(v, s[w.i0 + 1].t - s[w.i0].t);
}

// max over t of value(t) + weight * int_{start}^t integrand, trapezoid in t.
template <class V, class I>
double running_max(const std::vector<NormSample>& s, const WindowRange& w, double weight, V&& value, I&& integrand) {
  double acc = 0.0, best = value(s[w.i0]);
  for (std::size_t i = w.i0 + 1; i <= w.i1; ++i) {
    acc += 0.5 * (s[i].t - s[i - 1].t) * (integrand(s[i - 1]) + integrand(s[i]));
    best = std::max(best, value(s[i]) + weight * acc);
  }
  return best;
}

template <class F>
double sup(const std::vector<NormSample>& s, const WindowRange& w, F&& f) {
  double m = 0.0;
  for (std::size_t i = w.i0; i <= w.i1; ++i) m = std::max(m, f(s[i]));
  return m;
}

double ratio(double prev, double cur) {
  if (prev > kStatFloor) return cur / prev;
  return cur <= kStatFloor ? 0.0 : kInf;
}

void add_check(WindowSummary& out, const std::string& name, int k, double value, double bound) {
  out.checks.push_back({name, k, value, bound, value <= bound});
}

}  // namespace

WindowSummary window_statistics(const PairTrajectory& traj, double T, double c_1, const AChain* a, const BChain* b) {
  if (!(T > 0.0)) throw InvalidInput("window_statistics: T must be positive");
  WindowSummary out;
  const auto& sb = traj.base.samples;
  const auto& sp = traj.perturbation.samples;
  if (sb.size() != sp.size()) throw InvalidInput("window_statistics: base and perturbation sample counts differ");
  for (std::size_t i = 0; i < sb.size(); ++i)
    if (sb[i].t != sp[i].t) throw InvalidInput("window_statistics: base and perturbation timestamps differ");
  const std::vector<WindowRange> ranges = window_ranges(sb, T, &out.notices);

  for (std::size_t k = 0; k < ranges.size(); ++k) {
    const WindowRange& w = ranges[k];
    WindowStats st;
    st.k = static_cast<int>(k);
    st.sup_vs_h1 = std::sqrt(sup(sb, w, [](const NormSample& s) { return s.h_sq[1]; }));
    st.sup_vs_h2 = std::sqrt(sup(sb, w, [](const NormSample& s) { return s.h_sq[2]; }));
    st.sup_u_l2 = std::sqrt(sup(sp, w, [](const NormSample& s) { return s.h_sq[0]; }));
    st.sup_u_h1 = std::sqrt(sup(sp, w, [](const NormSample& s) { return s.h_sq[1]; }));
    st.int_vs_h2 = integral(sb, w, [](const NormSample& s) { return s.h_sq[2]; });
    st.int_vs_h3 = integral(sb, w, [](const NormSample& s) { return s.h_sq[3]; });
    st.int_u_h1 = integral(sp, w, [](const NormSample& s) { return s.h_sq[1]; });
    st.int_u_h2 = integral(sp, w, [](const NormSample& s) { return s.h_sq[2]; });
    st.int_vs_t = integral(sb, w, [](const NormSample& s) { return s.dt_sq; });
    st.int_u_t = integral(sp, w, [](const NormSample& s) { return s.dt_sq; });
    st.int_gradq = integral(sp, w, [](const NormSample& s) { return s.gradp_sq; });
    st.int_gradp_s = integral(sb, w, [](const NormSample& s) { return s.gradp_sq; });

    st.vs_l2_sq_start = sb[w.i0].h_sq[0];
    st.sup_vs_l2_sq = sup(sb, w, [](const NormSample& s) { return s.h_sq[0]; });
    st.sup_vs_hess_sq = sup(sb, w, [](const NormSample& s) { return s.hess_sq; });
    auto h2 = [](const NormSample& s) { return s.h_sq[2]; };
    st.max_h1_plus_h2 = running_max(sb, w, 1.0, [](const NormSample& s) { return s.h_sq[1]; }, h2);
    st.max_grad_plus_h2 = running_max(sb, w, c_1, [](const NormSample& s) { return s.grad_sq; }, h2);
    st.max_u_energy = running_max(
        sp, w, c_1, [](const NormSample& s) { return s.h_sq[0]; }, [](const NormSample& s) { return s.h_sq[1]; });
    st.sup_u_h1_sq = sup(sp, w, [](const NormSample& s) { return s.h_sq[1]; });
    out.windows.push_back(st);
  }

  for (std::size_t k = 1; k < out.windows.size(); ++k) {
    const WindowStats& p = out.windows[k - 1];
    const WindowStats& c = out.windows[k];
    const double pairs[][2] = {
        {p.sup_vs_h1 * p.sup_vs_h1, c.sup_vs_h1 * c.sup_vs_h1}, {p.sup_vs_h2 * p.sup_vs_h2, c.sup_vs_h2 * c.sup_vs_h2},
        {p.sup_u_l2 * p.sup_u_l2, c.sup_u_l2 * c.sup_u_l2},     {p.sup_u_h1 * p.sup_u_h1, c.sup_u_h1 * c.sup_u_h1},
        {p.int_vs_h2, c.int_vs_h2},                             {p.int_vs_h3, c.int_vs_h3},
        {p.int_u_h1, c.int_u_h1},                               {p.int_u_h2, c.int_u_h2},
        {p.int_vs_t, c.int_vs_t},                               {p.int_u_t, c.int_u_t},
        {p.int_gradq, c.int_gradq},                             {p.int_gradp_s, c.int_gradp_s}};
    double m = 0.0;
    for (const auto& q : pairs) m = std::max(m, ratio(q[0], q[1]));
    out.max_ratio.push_back(m);
    if (m > 1.05) out.uniform = false;
  }

  if (a && a->time_conditions_hold()) {
    for (const WindowStats& st : out.windows) {
      add_check(out, "vs_l2_at_kT_le_A2", st.k, st.vs_l2_sq_start, a->a2_sq);
      add_check(out, "sup_vs_l2_le_A3", st.k, st.sup_vs_l2_sq, a->a3_sq);
      add_check(out, "vs_grad_plus_int_h2_le_A8", st.k, st.max_grad_plus_h2, a->a8_sq);
      add_check(out, "vs_h1_plus_int_h2_le_A8", st.k, st.max_h1_plus_h2, a->a8_sq);
      add_check(out, "sup_vs_hess_le_A13", st.k, st.sup_vs_hess_sq, a->a13_sq);
    }
  }
  if (b && a && a->time_conditions_hold() && b->time_conditions_hold()) {
    for (const WindowStats& st : out.windows)
      add_check(out, "u_energy_le_B5", st.k, st.max_u_energy, b->b5_sq);
  }
  if (b) {
    for (const WindowStats& st : out.windows) {
      BoundCheck c{"sup_x2_lt_gamma", st.k, st.sup_u_h1_sq, b->gamma, st.sup_u_h1_sq < b->gamma};
      out.checks.push_back(c);
    }
  }
  return out;
}

std::vector<H21Window> h21_window_norm(const Trajectory& traj, double T) {
  if (!(T > 0.0)) throw InvalidInput("h21_window_norm: T must be positive");
  const auto& s = traj.samples;
  if (s.size() < 3) throw InvalidInput("h21_window_norm: needs dense samples");
  const double h = s[1].t - s[0].t;
  if (h > T / 2.0 + 1e-12) throw InvalidInput("h21_window_norm: sampling too sparse for the window length");
  std::vector<H21Window> out;
  const std::vector<WindowRange> ranges = window_ranges(s, T, nullptr);
  for (std::size_t k = 0; k < ranges.size(); ++k) {
    H21Window w;
    w.k = static_cast<int>(k);
    w.int_t_sq = integral(s, ranges[k], [](const NormSample& x) { return x.dt_sq; });
    w.int_h2_sq = integral(s, ranges[k], [](const NormSample& x) { return x.h_sq[2]; });
    w.int_gradp_sq = integral(s, ranges[k], [](const NormSample& x) { return x.gradp_sq; });
    w.h21_sq = w.int_t_sq + w.int_h2_sq;
    out.push_back(w);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Barrier

BarrierReport barrier_monitor(const std::vector<double>& t, const std::vector<double>& x2,
                              const std::vector<double>& g2, double c_1, double c_3, double gamma,
                              const std::vector<double>& y2) {
  if (t.size() != x2.size() || t.size() != g2.size() || (!y2.empty() && y2.size() != t.size()))
    throw InvalidInput("barrier_monitor: series lengths differ");
  for (std::size_t i = 1; i < t.size(); ++i)
    if (!(t[i] > t[i - 1])) throw InvalidInput("barrier_monitor: timestamps must increase");
  BarrierReport r;
  r.gamma = gamma;
  r.t = t;
  r.x2 = x2;
  r.y2 = y2;
  r.g2 = g2;
  for (std::size_t i = 0; i < t.size(); ++i) {
    r.max_x2 = std::max(r.max_x2, x2[i]);
    if (!(x2[i] < gamma) && r.never_exceeded) {
      r.never_exceeded = false;
      r.first_exceedance_time = t[i];
    }
    if (!y2.empty() && x2[i] > y2[i] * (1.0 + 1e-12)) r.nesting_holds = false;
  }
  for (std::size_t i = 1; i + 1 < t.size(); ++i) {
    if (x2[i] > gamma) continue;
    const double h = t[i + 1] - t[i];
    const double d = (x2[i + 1] - x2[i]) / h;
    // Forward difference vs right side at the left end: curvature plus the
    // variation of the right side across the step.
    const double err = std::abs(x2[i + 1] - 2.0 * x2[i] + x2[i - 1]) / (2.0 * h) +
                       0.5 * c_1 * std::abs(x2[i + 1] - x2[i]) + std::abs(g2[i + 1] - g2[i]);
    const double slack = 10.0 * err;
    const double rhs = -0.5 * c_1 * x2[i] + g2[i];
    const double res = d - rhs - slack;
    r.max_residual = std::max(r.max_residual, res);
    if (res > 0.0) {
      ++r.violations;
      r.max_violation = std::max(r.max_violation, res);
    }
    const double x = x2[i];
    const double raw_rhs = -x * (c_1 - c_3 * x * x) + g2[i];
    const double raw_err = err + c_3 * 3.0 * x * x * std::abs(x2[i + 1] - x2[i]);
    const double raw_res = d - raw_rhs - 10.0 * raw_err;
    if (raw_res > 0.0) {
      ++r.raw_violations;
      r.raw_max_violation = std::max(r.raw_max_violation, raw_res);
    }
    ++r.checked;
  }
  if (r.checked == 0) r.max_residual = 0.0;
  return r;
}

// ---------------------------------------------------------------------------
// Orchestration

Scenario reference_scenario() {
  Scenario s;
  s.name = "reference";
  s.L = 2.0 * std::numbers::pi;
  s.N = 32;
  s.nu = 1.0;
  s.T = 0.0;
  s.windows = 5;
  s.dt = 0.02;
  s.base_forcing.family = ForcingFamily::constant_plus_decaying;
  s.base_forcing.a = {1.0, 0.0};
  s.base_forcing.epsilon = 0.35;
  s.base_forcing.lambda = 1.0;
  s.base_forcing.mode = {0, 1};
  s.perturbation.gamma = 1e-4;
  s.perturbation.k0 = 2.0;
  s.perturbation.seed = 7;
  s.constants_mode = ConstantsMode::empirical_calibrated;
  return s;
}

StabilityResult run_stability_experiment(const Scenario& scenario) {
  scenario.validate();
  StabilityResult r;
  r.scenario = scenario;
  r.constants = interpolation_constants(scenario.nu, scenario.L, scenario.constants_mode, scenario.calibration);
  const InterpolationConstants& c = r.constants;
  r.T = scenario.T > 0.0 ? scenario.T : choose_window_length(scenario, c);
  r.t_end = scenario.windows * r.T;
  if (scenario.dt > r.T) throw InvalidInput("scenario: dt exceeds T");

  const PeriodicGrid g2(scenario.L, 2, scenario.N), g3(scenario.L, 3, scenario.N);
  const Forcing f_s = forcing_families(scenario.base_forcing, g2, r.T);
  const FlowState v0 = base_initial_state(g2, scenario.base_initial_amplitude);
  FlowState u0 = scenario.perturbation_snapshot.empty() ? make_perturbation(g3, scenario.perturbation)
                                                       : read_state(scenario.perturbation_snapshot);
  if (u0.role != Role::perturbation || !(u0.u_bar.grid() == g3))
    throw InvalidInput("perturbation snapshot does not match the scenario grid");
  u0.t = 0.0;  // a snapshot taken later in another run becomes u(0) here
  const Forcing g = perturbation_forcing(scenario.g, g3);
  const double gamma = scenario.perturbation.gamma;

  r.base_in = base_inputs(f_s, v0, r.T, scenario.k_max);
  r.abar = abar_chain(r.base_in, c);
  r.a = a_chain(r.base_in, c);
  r.pert_in = perturbation_inputs(g, u0, r.T, scenario.k_max);
  r.b = b_chain(r.pert_in, r.a, c, gamma);
  if (scenario.base_forcing.family != ForcingFamily::zero)
    r.a0 = a0_threshold(decaying_h1_integral(scenario.base_forcing, g2), r.abar.abar2_sq, c);

  if (!r.abar.membership) r.warnings.push_back("(T, f_s) is not in the admissible set");
  for (const auto* flags : {&r.a.flags, &r.b.flags})
    for (const HypothesisFlag& f : *flags)
      if (!f.holds && f.name != "grad_window_contraction_as_printed") r.warnings.push_back("hypothesis " + f.name + " fails");
  if (!r.b.gamma_ok()) r.warnings.push_back("gamma exceeds gamma_star; no claim is made about X(t)");

  SolverConfig cfg;
  cfg.nu = scenario.nu;
  // Equal steps that land on every window boundary.
  cfg.dt = r.T / std::ceil(r.T / scenario.dt - 1e-9);
  cfg.t_end = r.t_end;
  cfg.scheme = scenario.scheme;
  cfg.cfl_max = scenario.cfl_max;
  EvolveOptions opts;
  opts.window = r.T;
  r.trajectories = evolve_pair(v0, f_s, u0, g, cfg, opts);
  if (r.trajectories.base.aborted) {
    r.aborted = true;
    r.abort_reason = r.trajectories.base.abort_reason;
    r.warnings.push_back("solver aborted: " + r.abort_reason);
  }

  const auto& sb = r.trajectories.base.samples;
  const auto& sp = r.trajectories.perturbation.samples;
  SmallnessInputs in;
  for (const NormSample& s : sb) {
    in.t.push_back(s.t);
    in.vsx_l3.push_back(s.grad_l3);
  }
  const MeanVector m0 = u0.mean;
  in.drift_sq = [&g, m0](double t) {
    MeanVector m = m0;
    if (!g.mean_terms().empty() && t > 0.0) {
      const MeanVector d = g.mean_integral(0.0, t);
      for (std::size_t i = 0; i < m.size(); ++i) m[i] += d[i];
    }
    return m.norm_sq();
  };
  in.g_bar_sq = [&g](double t) { return g.is_zero() ? 0.0 : g.norm_sq_at(t, ForcingNorm::l2); };
  in.u0_l2_sq = r.pert_in.u0_l2_sq;
  r.smallness = smallness_check(gamma, c, r.b, in, scenario.epsilon);

  std::vector<double> t, x2, y2;
  for (const NormSample& s : sp) {
    t.push_back(s.t);
    x2.push_back(s.h_sq[1]);
    y2.push_back(s.h_sq[2]);
  }
  r.barrier = barrier_monitor(t, x2, r.smallness.g2, c.poincare.c_1, c.c_3, gamma, y2);
  r.barrier.gamma_star = r.b.gamma_star;

  r.windows = window_statistics(r.trajectories, r.T, c.poincare.c_1, &r.a, &r.b);
  if (sb.size() >= 3) {
    r.h21_base = h21_window_norm(r.trajectories.base, r.T);
    r.h21_perturbation = h21_window_norm(r.trajectories.perturbation, r.T);
  }
  return r;
}

}  // namespace nsstab
