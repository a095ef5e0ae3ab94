#pragma once

/// @file constants.hpp
/// @brief Poincare rate and the interpolation constants entering the energy estimates.
///
/// All constants refer to the 3D box [0, L]^3. Base-flow inequalities are applied
/// to x3-independent fields, so their primitive constants pick up the powers of
/// L that convert 2D norms to norms on the 3D box. The derivation of each
/// assembled constant is in docs/constants.md.

#include <cstdint>
#include <string>

#include "nsstab/spectral_field.hpp"

namespace nsstab {

struct PoincareConstants {
  double nu = 1.0;
  double L = 0.0;
  double kappa = 0.0;  // (2 pi / L)^2, lowest eigenvalue of -Laplacian on mean-free fields
  double c_s1 = 0.0;   // nu kappa / (1 + kappa)
  double c_1 = 0.0;    // same value for the perturbation
};

PoincareConstants poincare_constants(double nu, double L);

/// nu ||grad u||^2 / ||u||^2_{H^1} for a mean-free field; >= c_s1 always, equal on lowest modes.
double poincare_ratio(const SpectralField& u, double nu);

enum class ConstantsMode { analytic_conservative, empirical_calibrated };
const char* to_string(ConstantsMode m);
ConstantsMode constants_mode_from_string(const std::string& s);

/// Primitive functional inequalities, each for mean-free fields:
///   a3:    ||w||_{L3} <= a3 ||grad w||^{1/3} ||w||^{2/3}   (x3-independent w)
///   a4:    ||w||_{L4} <= a4 ||grad w||^{1/2} ||w||^{1/2}   (x3-independent w)
///   a_inf: ||w||_{Linf} <= a_inf ||w||_{H^2}               (x3-independent w)
///   b6:    ||w||_{L6} <= b6 ||grad w||                      (3D w)
///   b3:    ||w||_{L3} <= b3 ||grad w||^{1/2} ||w||^{1/2}    (3D w)
struct Primitives {
  double a3 = 0.0;
  double a4 = 0.0;
  double a_inf = 0.0;
  double b3 = 0.0;
  double b6 = 0.0;
};

/// Bounds proved in docs/constants.md.
Primitives analytic_primitives(double L);

struct CalibrationOptions {
  int samples = 1000;
  std::uint64_t seed = 20240611ULL;
  int N = 16;
  double headroom = 1.1;
};

/// headroom x the largest observed ratio over random band-limited fields.
Primitives calibrated_primitives(double L, const CalibrationOptions& options = {});

// Rayleigh ratios of the primitive inequalities. 2D fields are measured on the 3D box.
double ratio_a3(const SpectralField& w2d);
double ratio_a4(const SpectralField& w2d);
double ratio_a_inf(const SpectralField& w2d);
double ratio_b3(const SpectralField& w3d);
double ratio_b6(const SpectralField& w3d);

struct InterpolationConstants {
  ConstantsMode mode = ConstantsMode::analytic_conservative;
  PoincareConstants poincare;
  Primitives primitives;
  double c_s2 = 0.0;
  double c_s3 = 0.0;
  double c_s4 = 0.0;  // c_s3 / c_s1
  double c_2 = 0.0;
  double c_3 = 0.0;
  double c_4 = 0.0;
};

/// Assembles the constants from primitives:
///   c_s2 = max(2 a3^6 / nu, 2 / nu)
///   c_s3 = (3 / nu) max(a_inf^2 + 4 a4^4, 1),  c_s4 = c_s3 / c_s1
///   c_2  = (3 / nu) max(b6^2 max(1, 2 a3^2), 1, 1 / kappa)
///   c_3  = (8 / nu) max(27 (b6 b3)^4 / nu^2, b6^2 (1 + 1 / kappa), (1 + 1 / kappa)^2),  c_4 = c_3
InterpolationConstants assemble_constants(const PoincareConstants& p, const Primitives& prim, ConstantsMode mode);

InterpolationConstants interpolation_constants(double nu, double L, ConstantsMode mode,
                                               const CalibrationOptions& options = {});

}  // namespace nsstab
