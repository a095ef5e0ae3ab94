#pragma once

/// @file forcing.hpp
/// @brief Body-force schedules f(x, t) split into a mean vector and a mean-free field.

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "nsstab/spectral_field.hpp"

namespace nsstab {

/// Scalar time factor theta(t).
struct TimeProfile {
  enum class Kind { constant, exponential, sine, cosine };
  Kind kind = Kind::constant;
  double amplitude = 1.0;
  double rate = 0.0;   // exponential: amplitude * exp(-rate t)
  double omega = 0.0;  // sine/cosine: amplitude * sin(omega t + phase)
  double phase = 0.0;

  static TimeProfile constant(double a) { return {Kind::constant, a, 0.0, 0.0, 0.0}; }
  static TimeProfile exponential(double a, double rate) { return {Kind::exponential, a, rate, 0.0, 0.0}; }
  static TimeProfile sine(double a, double omega, double phase = 0.0) { return {Kind::sine, a, 0.0, omega, phase}; }
  static TimeProfile cosine(double a, double omega, double phase = 0.0) { return {Kind::cosine, a, 0.0, omega, phase}; }

  [[nodiscard]] double value(double t) const;
  /// Closed-form integral over [a, b].
  [[nodiscard]] double integral(double a, double b) const;
  /// Non-increasing |theta| on [0, inf): constant or decaying exponential.
  [[nodiscard]] bool monotone_nonincreasing() const;
  /// Envelope bound sup_{s >= t} |theta(s)|.
  [[nodiscard]] double envelope_from(double t) const;
};

struct FieldTerm {
  SpectralField shape;  // mean-free part of the spatial profile
  TimeProfile profile;
};

struct MeanTerm {
  MeanVector direction;
  TimeProfile profile;
};

/// Norm used by forcing window integrals.
enum class ForcingNorm { l2, gradient, h1 };

/// f(x, t) = sum_j theta_j(t) phi_j(x) + sum_i eta_i(t) a_i, with phi_j mean-free.
class Forcing {
 public:
  enum class Kind { closed_form, sampled_series, periodic_extension };

  Forcing() = default;
  static Forcing zero(PeriodicGrid grid, int components);
  static Forcing closed_form(PeriodicGrid grid, int components, std::vector<FieldTerm> terms,
                             std::vector<MeanTerm> mean_terms);
  /// Linear interpolation between samples (full fields, mean included); held
  /// constant outside the sampled range.
  static Forcing sampled(std::vector<double> times, std::vector<SpectralField> samples);
  /// f_T(x, t) = base(x, t - kT) for kT <= t < (k+1)T.
  static Forcing periodic_extension(const Forcing& base, double period);

  [[nodiscard]] Kind kind() const { return kind_; }
  [[nodiscard]] const PeriodicGrid& grid() const { return grid_; }
  [[nodiscard]] int components() const { return components_; }
  [[nodiscard]] bool is_zero() const;
  [[nodiscard]] std::optional<double> period() const;

  /// Mean-free part f-bar(t), with the mean-free flag set.
  [[nodiscard]] SpectralField mean_free_at(double t) const;
  [[nodiscard]] MeanVector mean_at(double t) const;
  /// integral_{t0}^{t1} mean(f)(s) ds
  [[nodiscard]] MeanVector mean_integral(double t0, double t1) const;
  /// integral_{t0}^{t1} (t1 - s) mean(f)(s) ds: displacement contribution of the forcing.
  [[nodiscard]] MeanVector mean_moment(double t0, double t1) const;

  /// ||f-bar(t)||^2 in the chosen norm.
  [[nodiscard]] double norm_sq_at(double t, ForcingNorm norm) const;
  /// integral_{t0}^{t1} ||f-bar(t)||^2 dt: closed form for constant/exponential
  /// term sets, adaptive Simpson (1e-10 relative) otherwise.
  [[nodiscard]] double window_integral(double t0, double t1, ForcingNorm norm) const;

  /// sup over windows k >= k0 of the window integral, bounded from the term envelopes.
  /// Returns nullopt when no decaying envelope exists.
  [[nodiscard]] std::optional<double> tail_window_bound(double T, int k0, ForcingNorm norm) const;
  /// True when the mean grows without bound (a nonzero constant mean term).
  [[nodiscard]] bool mean_unbounded() const;
  /// True when every mean term is constant or exponential, so the integrated
  /// mean is monotone per term and its supremum is reached in the limit or sampled.
  [[nodiscard]] bool mean_limit(MeanVector* limit) const;

  [[nodiscard]] const std::vector<FieldTerm>& terms() const { return terms_; }
  [[nodiscard]] const std::vector<MeanTerm>& mean_terms() const { return mean_terms_; }

 private:
  double gram(std::size_t i, std::size_t j, ForcingNorm norm) const;
  void build_gram();

  Kind kind_ = Kind::closed_form;
  PeriodicGrid grid_;
  int components_ = 0;
  std::vector<FieldTerm> terms_;
  std::vector<MeanTerm> mean_terms_;
  std::vector<double> gram_l2_, gram_grad_;
  std::vector<double> times_;
  std::vector<SpectralField> samples_;
  std::shared_ptr<const Forcing> base_;
  double period_ = 0.0;
};

}  // namespace nsstab
