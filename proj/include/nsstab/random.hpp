#pragma once

/// @file random.hpp
/// @brief Seeded random fields. Bit-identical across platforms: the engine is
/// mt19937_64 and doubles are built from its output by hand.

#include <cstdint>
#include <functional>
#include <random>

#include "nsstab/spectral_field.hpp"

namespace nsstab {

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}
  /// Uniform in [0, 1) with 53 random bits.
  double uniform();
  double uniform(double a, double b) { return a + (b - a) * uniform(); }
  /// Standard normal via Box-Muller.
  double normal();
  std::uint64_t bits() { return engine_(); }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

/// Mean-free real field with complex Gaussian coefficients of standard deviation
/// amplitude(|m|) on modes with m_min <= |m| <= m_max (Euclidean integer norm),
/// restricted to the dealiased band. Nyquist modes are left empty.
SpectralField random_field(const PeriodicGrid& grid, int components, Rng& rng,
                           const std::function<double(double)>& amplitude, double m_min, double m_max);

/// Leray-projected random_field.
SpectralField random_solenoidal(const PeriodicGrid& grid, Rng& rng, const std::function<double(double)>& amplitude,
                                double m_min, double m_max);

}  // namespace nsstab
