#include "nsstab/quadrature.hpp"

#include <array>
#include <cmath>

#include "nsstab/spectral_field.hpp"

namespace nsstab::quad {
namespace {

double simpson_step(const std::function<double(double)>& f, double a, double b, double fa, double fm,
                    double fb, double whole, double tol, int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m);
  const double rm = 0.5 * (m + b);
  const double flm = f(lm);
  const double frm = f(rm);
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  const double delta = left + right - whole;
  if (depth <= 0 || std::abs(delta) <= 15.0 * tol) return left + right + delta / 15.0;
  return simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
         simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

}  // namespace

double adaptive_simpson(const std::function<double(double)>& f, double a, double b, double rel_tol,
                        double abs_tol, int max_depth) {
  if (a == b) return 0.0;
  // A coarse Gauss pass sets the scale for the relative tolerance.
  double scale = 0.0;
  constexpr int kPanels = 8;
  const double h = (b - a) / kPanels;
  double total = 0.0;
  for (int i = 0; i < kPanels; ++i) scale += std::abs(gauss_legendre(f, a + i * h, a + (i + 1) * h));
  const double tol = std::max(rel_tol * scale, abs_tol) / kPanels;
  for (int i = 0; i < kPanels; ++i) {
    const double lo = a + i * h;
    const double hi = lo + h;
    const double fa = f(lo), fb = f(hi), fm = f(0.5 * (lo + hi));
    const double whole = h / 6.0 * (fa + 4.0 * fm + fb);
    total += simpson_step(f, lo, hi, fa, fm, fb, whole, tol, max_depth);
  }
  return total;
}

double gauss_legendre(const std::function<double(double)>& f, double a, double b) {
  static constexpr std::array<double, 5> x = {0.0, 0.5384693101056831, -0.5384693101056831,
                                              0.9061798459386640, -0.9061798459386640};
  static constexpr std::array<double, 5> w = {0.5688888888888889, 0.4786286704993665, 0.4786286704993665,
                                              0.2369268850561891, 0.2369268850561891};
  const double mid = 0.5 * (a + b);
  const double half = 0.5 * (b - a);
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) s += w[i] * f(mid + half * x[i]);
  return s * half;
}

double uniform_samples(std::span<const double> v, double h) {
  const std::size_t n = v.size();
  if (n < 2) return 0.0;
  if (n == 2) return 0.5 * h * (v[0] + v[1]);
  std::size_t intervals = n - 1;
  double total = 0.0;
  std::size_t start = 0;
  if (intervals % 2 == 1) {
    if (intervals == 1) return 0.5 * h * (v[0] + v[1]);
    // Simpson 3/8 on the first three intervals.
    total += 3.0 * h / 8.0 * (v[0] + 3.0 * v[1] + 3.0 * v[2] + v[3]);
    start = 3;
    intervals -= 3;
  }
  for (std::size_t i = start; i + 2 < n; i += 2) total += h / 3.0 * (v[i] + 4.0 * v[i + 1] + v[i + 2]);
  return total;
}

double trapezoid(std::span<const double> t, std::span<const double> v) {
  if (t.size() != v.size()) throw InvalidInput("trapezoid: abscissa/value length mismatch");
  double total = 0.0;
  for (std::size_t i = 1; i < t.size(); ++i) total += 0.5 * (t[i] - t[i - 1]) * (v[i] + v[i - 1]);
  return total;
}

}  // namespace nsstab::quad
