#include "nsstab/forcing.hpp"

#include <algorithm>
#include <cmath>

#include "nsstab/quadrature.hpp"

namespace nsstab {

// ---------------------------------------------------------------------------
// TimeProfile

double TimeProfile::value(double t) const {
  switch (kind) {
    case Kind::constant: return amplitude;
    case Kind::exponential: return amplitude * std::exp(-rate * t);
    case Kind::sine: return amplitude * std::sin(omega * t + phase);
    case Kind::cosine: return amplitude * std::cos(omega * t + phase);
  }
  return 0.0;
}

double TimeProfile::integral(double a, double b) const {
  switch (kind) {
    case Kind::constant: return amplitude * (b - a);
    case Kind::exponential:
      if (rate == 0.0) return amplitude * (b - a);
      return amplitude * (std::exp(-rate * a) - std::exp(-rate * b)) / rate;
    case Kind::sine:
      if (omega == 0.0) return amplitude * std::sin(phase) * (b - a);
      return -amplitude * (std::cos(omega * b + phase) - std::cos(omega * a + phase)) / omega;
    case Kind::cosine:
      if (omega == 0.0) return amplitude * std::cos(phase) * (b - a);
      return amplitude * (std::sin(omega * b + phase) - std::sin(omega * a + phase)) / omega;
  }
  return 0.0;
}

bool TimeProfile::monotone_nonincreasing() const {
  if (kind == Kind::constant) return true;
  if (kind == Kind::exponential) return rate >= 0.0;
  return omega == 0.0;
}

double TimeProfile::envelope_from(double t) const {
  switch (kind) {
    case Kind::constant: return std::abs(amplitude);
    case Kind::exponential: return rate >= 0.0 ? std::abs(amplitude) * std::exp(-rate * t) : HUGE_VAL;
    default: return std::abs(amplitude);
  }
}

// ---------------------------------------------------------------------------
// Forcing construction

Forcing Forcing::zero(PeriodicGrid grid, int components) {
  return closed_form(grid, components, {}, {});
}

Forcing Forcing::closed_form(PeriodicGrid grid, int components, std::vector<FieldTerm> terms,
                             std::vector<MeanTerm> mean_terms) {
  Forcing f;
  f.kind_ = Kind::closed_form;
  f.grid_ = grid;
  f.components_ = components;
  for (auto& t : terms) {
    if (!(t.shape.grid() == grid) || t.shape.components() != components)
      throw InvalidInput("forcing: term shape does not match the forcing grid");
    t.shape = subtract_mean(t.shape);
  }
  for (const auto& m : mean_terms)
    if (m.direction.size() != static_cast<std::size_t>(components))
      throw InvalidInput("forcing: mean direction has the wrong length");
  f.terms_ = std::move(terms);
  f.mean_terms_ = std::move(mean_terms);
  f.build_gram();
  return f;
}

Forcing Forcing::sampled(std::vector<double> times, std::vector<SpectralField> samples) {
  if (times.empty() || times.size() != samples.size())
    throw InvalidInput("forcing: sampled series needs matching, non-empty times and fields");
  for (std::size_t i = 1; i < times.size(); ++i)
    if (!(times[i] > times[i - 1])) throw InvalidInput("forcing: sample times must increase strictly");
  for (const auto& s : samples)
    if (!(s.grid() == samples.front().grid()) || s.components() != samples.front().components())
      throw InvalidInput("forcing: sampled fields must share a grid");
  Forcing f;
  f.kind_ = Kind::sampled_series;
  f.grid_ = samples.front().grid();
  f.components_ = samples.front().components();
  f.times_ = std::move(times);
  f.samples_ = std::move(samples);
  return f;
}

Forcing Forcing::periodic_extension(const Forcing& base, double period) {
  if (!(period > 0.0)) throw InvalidInput("forcing: period must be positive");
  Forcing f;
  f.kind_ = Kind::periodic_extension;
  f.grid_ = base.grid_;
  f.components_ = base.components_;
  f.base_ = std::make_shared<const Forcing>(base);
  f.period_ = period;
  return f;
}

void Forcing::build_gram() {
  const std::size_t n = terms_.size();
  gram_l2_.assign(n * n, 0.0);
  gram_grad_.assign(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const SpectralField gi = gradient(terms_[i].shape);
    for (std::size_t j = i; j < n; ++j) {
      const double l2 = inner_product(terms_[i].shape, terms_[j].shape);
      const double gr = inner_product(gi, gradient(terms_[j].shape));
      gram_l2_[i * n + j] = gram_l2_[j * n + i] = l2;
      gram_grad_[i * n + j] = gram_grad_[j * n + i] = gr;
    }
  }
}

double Forcing::gram(std::size_t i, std::size_t j, ForcingNorm norm) const {
  const std::size_t n = terms_.size();
  switch (norm) {
    case ForcingNorm::l2: return gram_l2_[i * n + j];
    case ForcingNorm::gradient: return gram_grad_[i * n + j];
    case ForcingNorm::h1: return gram_l2_[i * n + j] + gram_grad_[i * n + j];
  }
  return 0.0;
}

bool Forcing::is_zero() const {
  switch (kind_) {
    case Kind::closed_form: {
      for (const auto& t : terms_)
        if (t.profile.amplitude != 0.0 && sobolev_norm_sq(t.shape, 0) > 0.0) return false;
      for (const auto& m : mean_terms_)
        if (m.profile.amplitude != 0.0 && m.direction.norm_sq() > 0.0) return false;
      return true;
    }
    case Kind::sampled_series:
      for (const auto& s : samples_)
        if (sobolev_norm_sq(s, 0) > 0.0) return false;
      return true;
    case Kind::periodic_extension: return base_->is_zero();
  }
  return true;
}

std::optional<double> Forcing::period() const {
  if (kind_ == Kind::periodic_extension) return period_;
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Evaluation

namespace {

// Bracketing sample index and interpolation weight for sampled forcing.
std::pair<std::size_t, double> locate(const std::vector<double>& times, double t) {
  if (t <= times.front()) return {0, 0.0};
  if (t >= times.back()) return {times.size() - 1, 0.0};
  auto it = std::upper_bound(times.begin(), times.end(), t);
  const std::size_t hi = static_cast<std::size_t>(it - times.begin());
  const std::size_t lo = hi - 1;
  return {lo, (t - times[lo]) / (times[hi] - times[lo])};
}

}  // namespace

SpectralField Forcing::mean_free_at(double t) const {
  switch (kind_) {
    case Kind::closed_form: {
      SpectralField out(grid_, components_);
      for (const auto& term : terms_) {
        const double th = term.profile.value(t);
        if (th != 0.0) out.axpy(th, term.shape);
      }
      out.mark_mean_free(true);
      return out;
    }
    case Kind::sampled_series: {
      auto [i, w] = locate(times_, t);
      SpectralField out = subtract_mean(samples_[i]);
      if (w > 0.0) {
        out *= (1.0 - w);
        out.axpy(w, subtract_mean(samples_[i + 1]));
      }
      out.mark_mean_free(true);
      return out;
    }
    case Kind::periodic_extension: {
      const double local = t - period_ * std::floor(t / period_);
      return base_->mean_free_at(local);
    }
  }
  return {};
}

MeanVector Forcing::mean_at(double t) const {
  switch (kind_) {
    case Kind::closed_form: {
      MeanVector m(static_cast<std::size_t>(components_));
      for (const auto& term : mean_terms_) {
        const double th = term.profile.value(t);
        for (std::size_t c = 0; c < m.size(); ++c) m[c] += th * term.direction[c];
      }
      return m;
    }
    case Kind::sampled_series: {
      auto [i, w] = locate(times_, t);
      MeanVector m = mean(samples_[i]);
      if (w > 0.0) {
        MeanVector m2 = mean(samples_[i + 1]);
        for (std::size_t c = 0; c < m.size(); ++c) m[c] = (1.0 - w) * m[c] + w * m2[c];
      }
      return m;
    }
    case Kind::periodic_extension: {
      const double local = t - period_ * std::floor(t / period_);
      return base_->mean_at(local);
    }
  }
  return {};
}

MeanVector Forcing::mean_integral(double t0, double t1) const {
  MeanVector out(static_cast<std::size_t>(components_));
  if (t1 == t0) return out;
  switch (kind_) {
    case Kind::closed_form:
      for (const auto& term : mean_terms_) {
        const double I = term.profile.integral(t0, t1);
        for (std::size_t c = 0; c < out.size(); ++c) out[c] += I * term.direction[c];
      }
      return out;
    case Kind::sampled_series: {
      // Piecewise linear: integrate exactly over each sub-interval.
      std::vector<double> cuts{t0};
      for (double s : times_)
        if (s > t0 && s < t1) cuts.push_back(s);
      cuts.push_back(t1);
      for (std::size_t i = 1; i < cuts.size(); ++i) {
        MeanVector a = mean_at(cuts[i - 1]), b = mean_at(cuts[i]);
        const double h = cuts[i] - cuts[i - 1];
        for (std::size_t c = 0; c < out.size(); ++c) out[c] += 0.5 * h * (a[c] + b[c]);
      }
      return out;
    }
    case Kind::periodic_extension: {
      double a = t0;
      while (a < t1) {
        const double k = std::floor(a / period_);
        const double end = std::min(t1, (k + 1.0) * period_);
        MeanVector part = base_->mean_integral(a - k * period_, end - k * period_);
        for (std::size_t c = 0; c < out.size(); ++c) out[c] += part[c];
        if (end <= a) break;
        a = end;
      }
      return out;
    }
  }
  return out;
}

MeanVector Forcing::mean_moment(double t0, double t1) const {
  MeanVector out(static_cast<std::size_t>(components_));
  if (t1 == t0) return out;
  for (std::size_t c = 0; c < out.size(); ++c) {
    out[c] = quad::gauss_legendre([&](double s) { return (t1 - s) * mean_at(s)[c]; }, t0, t1);
  }
  return out;
}

double Forcing::norm_sq_at(double t, ForcingNorm norm) const {
  switch (kind_) {
    case Kind::closed_form: {
      const std::size_t n = terms_.size();
      std::vector<double> th(n);
      for (std::size_t i = 0; i < n; ++i) th[i] = terms_[i].profile.value(t);
      double s = 0.0;
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) s += th[i] * th[j] * gram(i, j, norm);
      return s;
    }
    case Kind::sampled_series:
    case Kind::periodic_extension: {
      SpectralField f = mean_free_at(t);
      switch (norm) {
        case ForcingNorm::l2: return sobolev_norm_sq(f, 0);
        case ForcingNorm::gradient: return derivative_seminorm_sq(f, 1);
        case ForcingNorm::h1: return sobolev_norm_sq(f, 1);
      }
    }
  }
  return 0.0;
}

double Forcing::window_integral(double t0, double t1, ForcingNorm norm) const {
  if (t1 <= t0) return 0.0;
  if (kind_ == Kind::periodic_extension) {
    double total = 0.0;
    double a = t0;
    while (a < t1) {
      const double k = std::floor(a / period_);
      const double end = std::min(t1, (k + 1.0) * period_);
      if (end <= a) break;
      total += base_->window_integral(a - k * period_, end - k * period_, norm);
      a = end;
    }
    return total;
  }
  if (kind_ == Kind::closed_form) {
    bool closed = true;
    for (const auto& t : terms_)
      if (t.profile.kind != TimeProfile::Kind::constant && t.profile.kind != TimeProfile::Kind::exponential)
        closed = false;
    if (closed) {
      // theta_i theta_j = a_i a_j exp(-(r_i + r_j) t)
      double s = 0.0;
      const std::size_t n = terms_.size();
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
          const auto& p = terms_[i].profile;
          const auto& q = terms_[j].profile;
          const double rate = (p.kind == TimeProfile::Kind::exponential ? p.rate : 0.0) +
                              (q.kind == TimeProfile::Kind::exponential ? q.rate : 0.0);
          const TimeProfile prod = TimeProfile::exponential(p.amplitude * q.amplitude, rate);
          s += prod.integral(t0, t1) * gram(i, j, norm);
        }
      }
      return s;
    }
  }
  return quad::adaptive_simpson([&](double t) { return norm_sq_at(t, norm); }, t0, t1, 1e-10);
}

std::optional<double> Forcing::tail_window_bound(double T, int k0, ForcingNorm norm) const {
  if (kind_ == Kind::periodic_extension) {
    if (std::abs(T - period_) <= 1e-14 * T) return window_integral(0.0, T, norm);
    return std::nullopt;
  }
  if (kind_ != Kind::closed_form) return std::nullopt;
  // ||f(t)|| <= sum_j env_j(t) ||phi_j||, non-increasing when every term is.
  const double t = k0 * T;
  double env = 0.0;
  for (std::size_t j = 0; j < terms_.size(); ++j) {
    if (!terms_[j].profile.monotone_nonincreasing()) return std::nullopt;
    env += terms_[j].profile.envelope_from(t) * std::sqrt(std::max(0.0, gram(j, j, norm)));
  }
  return T * env * env;
}

bool Forcing::mean_unbounded() const {
  switch (kind_) {
    case Kind::closed_form:
      for (const auto& m : mean_terms_) {
        const bool persistent = m.profile.kind == TimeProfile::Kind::constant ||
                                (m.profile.kind == TimeProfile::Kind::exponential && m.profile.rate <= 0.0);
        if (persistent && m.profile.amplitude != 0.0 && m.direction.norm_sq() > 0.0) return true;
      }
      return false;
    case Kind::sampled_series: return mean(samples_.back()).norm_sq() > 0.0;
    case Kind::periodic_extension: {
      MeanVector net = base_->mean_integral(0.0, period_);
      return net.norm_sq() > 0.0;
    }
  }
  return false;
}

bool Forcing::mean_limit(MeanVector* limit) const {
  if (kind_ != Kind::closed_form) return false;
  MeanVector lim(static_cast<std::size_t>(components_));
  for (const auto& m : mean_terms_) {
    if (m.profile.kind != TimeProfile::Kind::exponential || m.profile.rate <= 0.0) return false;
    const double I = m.profile.amplitude / m.profile.rate;
    for (std::size_t c = 0; c < lim.size(); ++c) lim[c] += I * m.direction[c];
  }
  if (limit) *limit = lim;
  return true;
}

}  // namespace nsstab
