#pragma once

/// @file spectral_field.hpp
/// @brief Fourier representation of real periodic fields on the box [0, L]^dim.
///
/// Coefficients are stored in the real-to-complex half layout: the x1 axis is
/// halved (m1 in [0, N/2]) and x1 is the fastest physical index. The forward
/// transform carries the factor 1/N^dim, so coeff(0) is the arithmetic mean of
/// the samples and a field's L2 norm is |Omega| * sum_k |u_k|^2.

#include <array>
#include <complex>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

namespace nsstab {

using Complex = std::complex<double>;
using MultiIndex = std::array<int, 3>;

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Rejected input: bad shapes, mismatched grids, out-of-range parameters.
class InvalidInput : public Error {
 public:
  using Error::Error;
};

struct PeriodicGrid {
  double L = 2.0 * 3.14159265358979323846;
  int dim = 3;
  int N = 16;

  PeriodicGrid() = default;
  PeriodicGrid(double length, int dimension, int resolution);

  [[nodiscard]] double volume() const;
  [[nodiscard]] double wavenumber_unit() const;  // 2 pi / L
  [[nodiscard]] std::size_t physical_size() const;
  [[nodiscard]] std::size_t spectral_size() const;
  [[nodiscard]] int half() const { return N / 2 + 1; }
  /// Largest retained |m_i| under the 2/3 rule.
  [[nodiscard]] int dealias_cutoff() const { return N / 3; }

  /// Integer wavevector of a stored spectral slot.
  [[nodiscard]] MultiIndex mode(std::size_t slot) const;
  /// Slot holding mode m, or the slot of -m when m1 < 0 (conjugate lookup).
  [[nodiscard]] std::size_t slot(MultiIndex m, bool* conjugated = nullptr) const;

  friend bool operator==(const PeriodicGrid& a, const PeriodicGrid& b) {
    return a.L == b.L && a.dim == b.dim && a.N == b.N;
  }
};

/// Per-grid wavevector tables shared by all fields on the grid.
struct GridTables {
  std::vector<double> k1, k2, k3;     // physical wavevector components
  std::vector<double> k_sq;           // |k|^2
  std::vector<double> weight;         // 1 or 2: multiplicity in the half layout
  std::vector<unsigned char> retained;  // 2/3-rule mask
  std::vector<unsigned char> nyquist;   // bit i set when |m_i| == N/2
};

const GridTables& tables(const PeriodicGrid& grid);

/// Real samples, component-major; within a component x1 is fastest.
struct PhysicalField {
  PeriodicGrid grid;
  int components = 1;
  std::vector<double> data;

  PhysicalField() = default;
  PhysicalField(PeriodicGrid g, int comps);
  [[nodiscard]] std::span<double> component(int c);
  [[nodiscard]] std::span<const double> component(int c) const;
  /// Coordinates of a flat sample index within a component.
  [[nodiscard]] std::array<double, 3> position(std::size_t index) const;
};

struct MeanVector {
  std::vector<double> value;

  MeanVector() = default;
  explicit MeanVector(std::size_t components) : value(components, 0.0) {}
  explicit MeanVector(std::vector<double> v) : value(std::move(v)) {}
  [[nodiscard]] std::size_t size() const { return value.size(); }
  [[nodiscard]] double norm_sq() const;
  double& operator[](std::size_t i) { return value[i]; }
  double operator[](std::size_t i) const { return value[i]; }
};

class SpectralField {
 public:
  SpectralField() = default;
  SpectralField(PeriodicGrid grid, int components);

  [[nodiscard]] const PeriodicGrid& grid() const { return grid_; }
  [[nodiscard]] int components() const { return components_; }
  [[nodiscard]] std::size_t slots() const { return grid_.spectral_size(); }

  [[nodiscard]] std::span<const Complex> component(int c) const;
  /// Mutable access clears the mean-free and solenoidal flags.
  [[nodiscard]] std::span<Complex> mutable_component(int c);

  /// Coefficient of mode m (any sign convention, Hermitian lookup for m1 < 0).
  [[nodiscard]] Complex coeff(int c, MultiIndex m) const;
  /// Sets mode m and keeps the Hermitian partner consistent.
  void set_coeff(int c, MultiIndex m, Complex value);

  [[nodiscard]] bool mean_free() const { return mean_free_; }
  [[nodiscard]] bool solenoidal() const { return solenoidal_; }
  void mark_mean_free(bool v) { mean_free_ = v; }
  void mark_solenoidal(bool v) { solenoidal_ = v; }

  /// Projects the self-conjugate planes (m1 = 0, N/2) onto Hermitian data.
  void enforce_hermitian();
  /// Largest |coeff(-m) - conj(coeff(m))| over all stored modes.
  [[nodiscard]] double hermitian_defect() const;

  SpectralField& operator+=(const SpectralField& o);
  SpectralField& operator-=(const SpectralField& o);
  SpectralField& operator*=(double s);
  /// this += a * o
  void axpy(double a, const SpectralField& o);

 private:
  PeriodicGrid grid_;
  int components_ = 0;
  std::vector<Complex> data_;
  bool mean_free_ = false;
  bool solenoidal_ = false;
};

SpectralField operator+(SpectralField a, const SpectralField& b);
SpectralField operator-(SpectralField a, const SpectralField& b);
SpectralField operator*(double s, SpectralField a);

SpectralField transform_forward(const PhysicalField& field);
PhysicalField transform_backward(const SpectralField& field);

/// D^alpha applied componentwise; odd derivatives vanish on Nyquist modes.
SpectralField derivative(const SpectralField& field, MultiIndex alpha);
/// Jacobian components d_j u_i, stored at index i * dim + j.
SpectralField gradient(const SpectralField& field);
SpectralField divergence(const SpectralField& field);
SpectralField leray_project(const SpectralField& field);
/// Gradient part removed by leray_project: k (k . u) / |k|^2.
SpectralField gradient_part(const SpectralField& field);

MeanVector mean(const SpectralField& field);
SpectralField subtract_mean(const SpectralField& field);
SpectralField with_mean(const SpectralField& field, const MeanVector& m);

/// Squared-sum Sobolev norm (sum_{|alpha| <= s} ||D^alpha u||^2)^{1/2}.
double sobolev_norm(const SpectralField& field, int s);
double sobolev_norm_sq(const SpectralField& field, int s);
/// ||nabla^s u||^2 summed over every ordered index tuple: |Omega| sum |k|^{2s} |u_k|^2.
double derivative_seminorm_sq(const SpectralField& field, int s);
/// Real L2 inner product over the box.
double inner_product(const SpectralField& a, const SpectralField& b);

inline constexpr int kLinf = 0;
/// p in {2, 3, 4, 6} or kLinf; equal-weight grid quadrature of |u|^p.
double lp_norm(const SpectralField& field, int p);
double lp_norm(const PhysicalField& field, int p);

SpectralField dealias(const SpectralField& field);
[[nodiscard]] bool is_dealiased(const SpectralField& field);

SpectralField lift_2d_to_3d(const SpectralField& field2d, const PeriodicGrid& grid3d);

/// Pointwise product sum_j a_j(x) b_j(x) style helpers on samples.
PhysicalField broadcast_2d_to_3d(const PhysicalField& field2d, const PeriodicGrid& grid3d);

/// L2 norm of the spectral divergence.
double divergence_l2(const SpectralField& field);
/// Largest |coeff(0)| over components.
double zero_mode_magnitude(const SpectralField& field);
double max_coeff_difference(const SpectralField& a, const SpectralField& b);

void require_same_grid(const SpectralField& a, const SpectralField& b, const char* what);

}  // namespace nsstab
