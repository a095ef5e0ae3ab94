#include "nsstab/random.hpp"

#include <cmath>
#include <numbers>

namespace nsstab {

double Rng::uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

double Rng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u1 = uniform();
  while (u1 <= 0.0) u1 = uniform();
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double th = 2.0 * std::numbers::pi * u2;
  spare_ = r * std::sin(th);
  has_spare_ = true;
  return r * std::cos(th);
}

SpectralField random_field(const PeriodicGrid& grid, int components, Rng& rng,
                           const std::function<double(double)>& amplitude, double m_min, double m_max) {
  SpectralField out(grid, components);
  const GridTables& t = tables(grid);
  for (int c = 0; c < components; ++c) {
    auto d = out.mutable_component(c);
    for (std::size_t s = 0; s < d.size(); ++s) {
      // Draw for every slot so the stream does not depend on the band.
      const double re = rng.normal(), im = rng.normal();
      if (!t.retained[s] || t.nyquist[s]) continue;
      const MultiIndex m = grid.mode(s);
      const double r = std::sqrt(static_cast<double>(m[0] * m[0] + m[1] * m[1] + m[2] * m[2]));
      if (r < m_min || r > m_max || r == 0.0) continue;
      d[s] = amplitude(r) * Complex(re, im) / std::numbers::sqrt2;
    }
  }
  out.enforce_hermitian();
  out.mark_mean_free(true);
  return out;
}

SpectralField random_solenoidal(const PeriodicGrid& grid, Rng& rng, const std::function<double(double)>& amplitude,
                                double m_min, double m_max) {
  SpectralField f = leray_project(random_field(grid, grid.dim, rng, amplitude, m_min, m_max));
  f.mark_mean_free(true);
  return f;
}

}  // namespace nsstab
