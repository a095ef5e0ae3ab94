#pragma once

#include <functional>
#include <span>

namespace nsstab::quad {

/// Adaptive Simpson on [a, b] with relative tolerance `rel_tol` (absolute floor `abs_tol`).
double adaptive_simpson(const std::function<double(double)>& f, double a, double b,
                        double rel_tol = 1e-10, double abs_tol = 1e-300, int max_depth = 40);

/// 5-point Gauss-Legendre rule on [a, b]; exact for polynomials of degree <= 9.
double gauss_legendre(const std::function<double(double)>& f, double a, double b);

/// Uniform-sample integral: composite Simpson, with a 3/8 panel when the
/// interval count is odd. Falls back to the trapezoid rule for two samples.
double uniform_samples(std::span<const double> values, double h);

/// Same rule on possibly non-uniform abscissae, via the trapezoid rule.
double trapezoid(std::span<const double> t, std::span<const double> values);

}  // namespace nsstab::quad
