#include "nsstab/constants.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "nsstab/random.hpp"

namespace nsstab {

PoincareConstants poincare_constants(double nu, double L) {
  if (!(nu > 0.0) || !(L > 0.0)) throw InvalidInput("poincare_constants: nu and L must be positive");
  PoincareConstants p;
  p.nu = nu;
  p.L = L;
  const double k = 2.0 * std::numbers::pi / L;
  p.kappa = k * k;
  p.c_s1 = nu * p.kappa / (1.0 + p.kappa);
  p.c_1 = p.c_s1;
  return p;
}

double poincare_ratio(const SpectralField& u, double nu) {
  const double h1 = sobolev_norm_sq(u, 1);
  if (h1 == 0.0) return HUGE_VAL;
  return nu * derivative_seminorm_sq(u, 1) / h1;
}

const char* to_string(ConstantsMode m) {
  return m == ConstantsMode::analytic_conservative ? "analytic_conservative" : "empirical_calibrated";
}

ConstantsMode constants_mode_from_string(const std::string& s) {
  if (s == "analytic_conservative") return ConstantsMode::analytic_conservative;
  if (s == "empirical_calibrated") return ConstantsMode::empirical_calibrated;
  throw InvalidInput("unknown constants mode '" + s + "'");
}

// ---------------------------------------------------------------------------
// Analytic primitives

namespace {

// (sum_{m != 0} 1 / rho(k))^{1/2} with rho the H^2 weight of a 2D mode,
// truncated at |m|_inf <= M and closed by a tail bound.
double lattice_sum_h2(double L) {
  const double u = 2.0 * std::numbers::pi / L;
  const int M = 400;
  double sum = 0.0;
  for (int a = -M; a <= M; ++a) {
    for (int b = -M; b <= M; ++b) {
      if (a == 0 && b == 0) continue;
      const double x = u * a, y = u * b;
      const double x2 = x * x, y2 = y * y;
      sum += 1.0 / (1.0 + x2 + y2 + x2 * x2 + x2 * y2 + y2 * y2);
    }
  }
  // rho >= (3/4)|k|^4 and #{|m|_inf = j} = 8j give a tail <= (4/3)(4 / M^2) / u^4.
  const double tail = (4.0 / 3.0) * (4.0 / (static_cast<double>(M) * M)) / std::pow(u, 4);
  return sum + tail;
}

}  // namespace

Primitives analytic_primitives(double L) {
  if (!(L > 0.0)) throw InvalidInput("analytic_primitives: L must be positive");
  Primitives p;
  const double a4_2d = std::sqrt(2.0 + 1.0 / (2.0 * std::numbers::pi));
  p.a4 = a4_2d * std::pow(L, -0.25);
  p.a3 = std::pow(p.a4, 2.0 / 3.0);
  const double ainf_2d = std::sqrt(lattice_sum_h2(L) / (L * L));
  p.a_inf = ainf_2d / std::sqrt(L);
  p.b6 = 2.0 + 1.0 / (2.0 * std::numbers::pi);
  p.b3 = std::sqrt(p.b6);
  return p;
}

// ---------------------------------------------------------------------------
// Rayleigh ratios

namespace {

double safe_ratio(double num, double den) { return den > 0.0 ? num / den : 0.0; }

}  // namespace

double ratio_a3(const SpectralField& w) {
  const double L = w.grid().L;
  const double lp = std::cbrt(L) * lp_norm(w, 3);
  const double g = std::sqrt(L * derivative_seminorm_sq(w, 1));
  const double n = std::sqrt(L * sobolev_norm_sq(w, 0));
  return safe_ratio(lp, std::cbrt(g) * std::pow(n, 2.0 / 3.0));
}

double ratio_a4(const SpectralField& w) {
  const double L = w.grid().L;
  const double lp = std::pow(L, 0.25) * lp_norm(w, 4);
  const double g = std::sqrt(L * derivative_seminorm_sq(w, 1));
  const double n = std::sqrt(L * sobolev_norm_sq(w, 0));
  return safe_ratio(lp, std::sqrt(g * n));
}

double ratio_a_inf(const SpectralField& w) {
  const double L = w.grid().L;
  return safe_ratio(lp_norm(w, kLinf), std::sqrt(L * sobolev_norm_sq(w, 2)));
}

double ratio_b3(const SpectralField& w) {
  const double g = std::sqrt(derivative_seminorm_sq(w, 1));
  const double n = std::sqrt(sobolev_norm_sq(w, 0));
  return safe_ratio(lp_norm(w, 3), std::sqrt(g * n));
}

double ratio_b6(const SpectralField& w) {
  return safe_ratio(lp_norm(w, 6), std::sqrt(derivative_seminorm_sq(w, 1)));
}

// ---------------------------------------------------------------------------
// Calibration

namespace {

// Mixture of broadband, power-law and narrow-shell spectra; half of the draws
// are replaced by their gradient, the shape the inequalities are applied to.
SpectralField calibration_field(const PeriodicGrid& grid, Rng& rng) {
  const double cutoff = grid.dealias_cutoff() * std::sqrt(static_cast<double>(grid.dim));
  const int family = static_cast<int>(rng.bits() % 3);
  SpectralField f;
  if (family == 0) {
    const double k0 = rng.uniform(0.7, 6.0);
    f = random_field(grid, grid.dim, rng, [k0](double r) { return std::exp(-r * r / (k0 * k0)); }, 1.0, cutoff);
  } else if (family == 1) {
    const double p = rng.uniform(0.0, 3.0);
    f = random_field(grid, grid.dim, rng, [p](double r) { return std::pow(r, -p); }, 1.0, cutoff);
  } else {
    const double r0 = rng.uniform(1.0, grid.dealias_cutoff());
    f = random_field(grid, grid.dim, rng, [](double) { return 1.0; }, r0, r0 + 0.75);
  }
  if (rng.uniform() < 0.5) f = gradient(f);
  return f;
}

}  // namespace

Primitives calibrated_primitives(double L, const CalibrationOptions& opt) {
  if (opt.samples < 1) throw InvalidInput("calibration: at least one sample required");
  Rng rng(opt.seed);
  const PeriodicGrid g2(L, 2, opt.N), g3(L, 3, opt.N);
  Primitives obs;
  for (int i = 0; i < opt.samples; ++i) {
    SpectralField w = calibration_field(g2, rng);
    obs.a3 = std::max(obs.a3, ratio_a3(w));
    obs.a4 = std::max(obs.a4, ratio_a4(w));
    obs.a_inf = std::max(obs.a_inf, ratio_a_inf(w));
  }
  for (int i = 0; i < opt.samples; ++i) {
    SpectralField w = calibration_field(g3, rng);
    obs.b3 = std::max(obs.b3, ratio_b3(w));
    obs.b6 = std::max(obs.b6, ratio_b6(w));
  }
  // A calibrated value never exceeds the proved bound.
  const Primitives an = analytic_primitives(L);
  Primitives p;
  p.a3 = std::min(opt.headroom * obs.a3, an.a3);
  p.a4 = std::min(opt.headroom * obs.a4, an.a4);
  p.a_inf = std::min(opt.headroom * obs.a_inf, an.a_inf);
  p.b3 = std::min(opt.headroom * obs.b3, an.b3);
  p.b6 = std::min(opt.headroom * obs.b6, an.b6);
  return p;
}

InterpolationConstants assemble_constants(const PoincareConstants& pc, const Primitives& p, ConstantsMode mode) {
  InterpolationConstants c;
  c.mode = mode;
  c.poincare = pc;
  c.primitives = p;
  const double nu = pc.nu;
  const double ik = 1.0 / pc.kappa;
  c.c_s2 = std::max(2.0 * std::pow(p.a3, 6) / nu, 2.0 / nu);
  c.c_s3 = (3.0 / nu) * std::max(p.a_inf * p.a_inf + 4.0 * std::pow(p.a4, 4), 1.0);
  c.c_s4 = c.c_s3 / pc.c_s1;
  c.c_2 = (3.0 / nu) * std::max({p.b6 * p.b6 * std::max(1.0, 2.0 * p.a3 * p.a3), 1.0, ik});
  c.c_3 = (8.0 / nu) * std::max({27.0 * std::pow(p.b6 * p.b3, 4) / (nu * nu), p.b6 * p.b6 * (1.0 + ik), (1.0 + ik) * (1.0 + ik)});
  c.c_4 = c.c_3;
  return c;
}

InterpolationConstants interpolation_constants(double nu, double L, ConstantsMode mode,
                                               const CalibrationOptions& options) {
  const PoincareConstants pc = poincare_constants(nu, L);
  const Primitives p =
      mode == ConstantsMode::analytic_conservative ? analytic_primitives(L) : calibrated_primitives(L, options);
  return assemble_constants(pc, p, mode);
}

}  // namespace nsstab
