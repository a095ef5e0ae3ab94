#include "nsstab/spectral_field.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <string>
#include <tuple>

#include "nsstab/fft.hpp"

namespace nsstab {

// ---------------------------------------------------------------------------
// PeriodicGrid

PeriodicGrid::PeriodicGrid(double length, int dimension, int resolution)
    : L(length), dim(dimension), N(resolution) {
  if (!(L > 0.0) || !std::isfinite(L)) throw InvalidInput("grid: L must be positive");
  if (dim != 2 && dim != 3) throw InvalidInput("grid: dim must be 2 or 3");
  if (N < 4 || N % 2 != 0) throw InvalidInput("grid: N must be even and >= 4");
}

double PeriodicGrid::volume() const { return std::pow(L, dim); }

double PeriodicGrid::wavenumber_unit() const { return 2.0 * std::numbers::pi / L; }

std::size_t PeriodicGrid::physical_size() const {
  std::size_t n = 1;
  for (int d = 0; d < dim; ++d) n *= static_cast<std::size_t>(N);
  return n;
}

std::size_t PeriodicGrid::spectral_size() const {
  return physical_size() / static_cast<std::size_t>(N) * static_cast<std::size_t>(half());
}

namespace {

int signed_mode(int j, int N) { return j <= N / 2 ? j : j - N; }
int wrap_index(int m, int N) { return ((m % N) + N) % N; }

}  // namespace

MultiIndex PeriodicGrid::mode(std::size_t slot) const {
  const auto h = static_cast<std::size_t>(half());
  const auto n = static_cast<std::size_t>(N);
  MultiIndex m{0, 0, 0};
  m[0] = static_cast<int>(slot % h);
  std::size_t rest = slot / h;
  m[1] = signed_mode(static_cast<int>(rest % n), N);
  if (dim == 3) m[2] = signed_mode(static_cast<int>(rest / n), N);
  return m;
}

std::size_t PeriodicGrid::slot(MultiIndex m, bool* conjugated) const {
  bool conj = false;
  if (dim == 2) m[2] = 0;
  // Reduce m1 into (-N/2, N/2]; negative m1 lives in the conjugate slot.
  m[0] = signed_mode(wrap_index(m[0], N), N);
  if (m[0] < 0) {
    for (int& c : m) c = -c;
    conj = true;
  }
  if (conjugated) *conjugated = conj;
  const auto h = static_cast<std::size_t>(half());
  const auto n = static_cast<std::size_t>(N);
  std::size_t s = static_cast<std::size_t>(m[0]) + h * static_cast<std::size_t>(wrap_index(m[1], N));
  if (dim == 3) s += h * n * static_cast<std::size_t>(wrap_index(m[2], N));
  return s;
}

const GridTables& tables(const PeriodicGrid& grid) {
  static std::mutex mtx;
  static std::map<std::tuple<double, int, int>, std::unique_ptr<GridTables>> cache;
  std::lock_guard lock(mtx);
  auto key = std::make_tuple(grid.L, grid.dim, grid.N);
  auto it = cache.find(key);
  if (it != cache.end()) return *it->second;

  auto t = std::make_unique<GridTables>();
  const std::size_t n = grid.spectral_size();
  const double unit = grid.wavenumber_unit();
  t->k1.resize(n);
  t->k2.resize(n);
  t->k3.resize(n);
  t->k_sq.resize(n);
  t->weight.resize(n);
  t->retained.resize(n);
  t->nyquist.resize(n);
  const int cut = grid.dealias_cutoff();
  for (std::size_t s = 0; s < n; ++s) {
    MultiIndex m = grid.mode(s);
    t->k1[s] = unit * m[0];
    t->k2[s] = unit * m[1];
    t->k3[s] = unit * m[2];
    t->k_sq[s] = t->k1[s] * t->k1[s] + t->k2[s] * t->k2[s] + t->k3[s] * t->k3[s];
    t->weight[s] = (m[0] == 0 || m[0] == grid.N / 2) ? 1.0 : 2.0;
    bool keep = true;
    unsigned char nyq = 0;
    for (int d = 0; d < grid.dim; ++d) {
      if (std::abs(m[d]) > cut) keep = false;
      if (std::abs(m[d]) == grid.N / 2) nyq |= static_cast<unsigned char>(1u << d);
    }
    t->retained[s] = keep ? 1 : 0;
    t->nyquist[s] = nyq;
  }
  return *cache.emplace(key, std::move(t)).first->second;
}

// ---------------------------------------------------------------------------
// PhysicalField / MeanVector

PhysicalField::PhysicalField(PeriodicGrid g, int comps)
    : grid(g), components(comps), data(g.physical_size() * static_cast<std::size_t>(comps), 0.0) {
  if (comps < 1) throw InvalidInput("physical field: components must be >= 1");
}

std::span<double> PhysicalField::component(int c) {
  const std::size_t n = grid.physical_size();
  return {data.data() + n * static_cast<std::size_t>(c), n};
}

std::span<const double> PhysicalField::component(int c) const {
  const std::size_t n = grid.physical_size();
  return {data.data() + n * static_cast<std::size_t>(c), n};
}

std::array<double, 3> PhysicalField::position(std::size_t index) const {
  const auto n = static_cast<std::size_t>(grid.N);
  const double h = grid.L / grid.N;
  std::array<double, 3> x{0.0, 0.0, 0.0};
  x[0] = h * static_cast<double>(index % n);
  x[1] = h * static_cast<double>((index / n) % n);
  if (grid.dim == 3) x[2] = h * static_cast<double>(index / (n * n));
  return x;
}

double MeanVector::norm_sq() const {
  double s = 0.0;
  for (double v : value) s += v * v;
  return s;
}

// ---------------------------------------------------------------------------
// SpectralField

SpectralField::SpectralField(PeriodicGrid grid, int components)
    : grid_(grid), components_(components), data_(grid.spectral_size() * static_cast<std::size_t>(components)) {
  if (components < 1) throw InvalidInput("spectral field: components must be >= 1");
}

std::span<const Complex> SpectralField::component(int c) const {
  const std::size_t n = slots();
  return {data_.data() + n * static_cast<std::size_t>(c), n};
}

std::span<Complex> SpectralField::mutable_component(int c) {
  mean_free_ = false;
  solenoidal_ = false;
  const std::size_t n = slots();
  return {data_.data() + n * static_cast<std::size_t>(c), n};
}

Complex SpectralField::coeff(int c, MultiIndex m) const {
  bool conj = false;
  std::size_t s = grid_.slot(m, &conj);
  Complex v = component(c)[s];
  return conj ? std::conj(v) : v;
}

void SpectralField::set_coeff(int c, MultiIndex m, Complex value) {
  bool conj = false;
  std::size_t s = grid_.slot(m, &conj);
  auto comp = mutable_component(c);
  comp[s] = conj ? std::conj(value) : value;
  MultiIndex stored = grid_.mode(s);
  if (stored[0] == 0 || stored[0] == grid_.N / 2) {
    MultiIndex neg{-stored[0], -stored[1], -stored[2]};
    // The partner of a self-conjugate plane mode is stored in the same plane.
    if (stored[0] == grid_.N / 2) neg[0] = stored[0];
    std::size_t sn = grid_.slot(neg);
    if (sn == s) {
      comp[s] = Complex(comp[s].real(), 0.0);
    } else {
      comp[sn] = std::conj(comp[s]);
    }
  }
}

void SpectralField::enforce_hermitian() {
  const std::size_t n = slots();
  const int Nq = grid_.N / 2;
  for (int c = 0; c < components_; ++c) {
    Complex* d = data_.data() + n * static_cast<std::size_t>(c);
    for (std::size_t s = 0; s < n; ++s) {
      MultiIndex m = grid_.mode(s);
      if (m[0] != 0 && m[0] != Nq) continue;
      MultiIndex neg{m[0], -m[1], -m[2]};
      std::size_t sn = grid_.slot(neg);
      if (sn < s) continue;
      if (sn == s) {
        d[s] = Complex(d[s].real(), 0.0);
      } else {
        Complex avg = 0.5 * (d[s] + std::conj(d[sn]));
        d[s] = avg;
        d[sn] = std::conj(avg);
      }
    }
  }
}

double SpectralField::hermitian_defect() const {
  const std::size_t n = slots();
  const int Nq = grid_.N / 2;
  double worst = 0.0;
  for (int c = 0; c < components_; ++c) {
    auto d = component(c);
    for (std::size_t s = 0; s < n; ++s) {
      MultiIndex m = grid_.mode(s);
      if (m[0] != 0 && m[0] != Nq) continue;
      std::size_t sn = grid_.slot(MultiIndex{m[0], -m[1], -m[2]});
      worst = std::max(worst, std::abs(d[sn] - std::conj(d[s])));
    }
  }
  return worst;
}

void require_same_grid(const SpectralField& a, const SpectralField& b, const char* what) {
  if (!(a.grid() == b.grid())) throw InvalidInput(std::string(what) + ": grid mismatch");
  if (a.components() != b.components())
    throw InvalidInput(std::string(what) + ": component count mismatch");
}

SpectralField& SpectralField::operator+=(const SpectralField& o) {
  require_same_grid(*this, o, "add");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
  mean_free_ = mean_free_ && o.mean_free_;
  solenoidal_ = solenoidal_ && o.solenoidal_;
  return *this;
}

SpectralField& SpectralField::operator-=(const SpectralField& o) {
  require_same_grid(*this, o, "subtract");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= o.data_[i];
  mean_free_ = mean_free_ && o.mean_free_;
  solenoidal_ = solenoidal_ && o.solenoidal_;
  return *this;
}

SpectralField& SpectralField::operator*=(double s) {
  for (auto& v : data_) v *= s;
  return *this;
}

void SpectralField::axpy(double a, const SpectralField& o) {
  require_same_grid(*this, o, "axpy");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += a * o.data_[i];
  mean_free_ = mean_free_ && o.mean_free_;
  solenoidal_ = solenoidal_ && o.solenoidal_;
}

SpectralField operator+(SpectralField a, const SpectralField& b) { return a += b; }
SpectralField operator-(SpectralField a, const SpectralField& b) { return a -= b; }
SpectralField operator*(double s, SpectralField a) { return a *= s; }

// ---------------------------------------------------------------------------
// Transforms

SpectralField transform_forward(const PhysicalField& field) {
  const PeriodicGrid& g = field.grid;
  if (field.data.size() != g.physical_size() * static_cast<std::size_t>(field.components))
    throw InvalidInput("transform_forward: sample array does not match grid shape");
  SpectralField out(g, field.components);
  const double scale = 1.0 / static_cast<double>(g.physical_size());
  for (int c = 0; c < field.components; ++c) {
    auto dst = out.mutable_component(c);
    fft::forward(g.dim, g.N, field.component(c), dst);
    for (auto& v : dst) v *= scale;
  }
  out.enforce_hermitian();
  return out;
}

PhysicalField transform_backward(const SpectralField& field) {
  PhysicalField out(field.grid(), field.components());
  for (int c = 0; c < field.components(); ++c) {
    fft::backward(field.grid().dim, field.grid().N, field.component(c), out.component(c));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Differential operators

namespace {

Complex i_pow(int n) {
  switch (((n % 4) + 4) % 4) {
    case 0: return {1.0, 0.0};
    case 1: return {0.0, 1.0};
    case 2: return {-1.0, 0.0};
    default: return {0.0, -1.0};
  }
}

double int_pow(double x, int n) {
  double r = 1.0;
  for (int i = 0; i < n; ++i) r *= x;
  return r;
}

}  // namespace

SpectralField derivative(const SpectralField& field, MultiIndex alpha) {
  const PeriodicGrid& g = field.grid();
  int order = 0;
  for (int d = 0; d < 3; ++d) {
    if (alpha[d] < 0) throw InvalidInput("derivative: negative multi-index");
    if (d >= g.dim && alpha[d] != 0) throw InvalidInput("derivative: multi-index exceeds dimension");
    order += alpha[d];
  }
  if (order > 3) throw InvalidInput("derivative: order above 3 is not supported");
  const GridTables& t = tables(g);
  SpectralField out(g, field.components());
  const Complex phase = i_pow(order);
  const double* ks[3] = {t.k1.data(), t.k2.data(), t.k3.data()};
  for (int c = 0; c < field.components(); ++c) {
    auto src = field.component(c);
    auto dst = out.mutable_component(c);
    for (std::size_t s = 0; s < src.size(); ++s) {
      double mult = 1.0;
      bool zero = false;
      for (int d = 0; d < g.dim; ++d) {
        if (alpha[d] == 0) continue;
        if ((alpha[d] % 2 == 1) && (t.nyquist[s] & (1u << d))) zero = true;
        mult *= int_pow(ks[d][s], alpha[d]);
      }
      dst[s] = zero ? Complex{} : phase * mult * src[s];
    }
  }
  out.mark_mean_free(order >= 1 || field.mean_free());
  return out;
}

SpectralField gradient(const SpectralField& field) {
  const PeriodicGrid& g = field.grid();
  const GridTables& t = tables(g);
  const double* ks[3] = {t.k1.data(), t.k2.data(), t.k3.data()};
  SpectralField out(g, field.components() * g.dim);
  for (int i = 0; i < field.components(); ++i) {
    auto src = field.component(i);
    for (int j = 0; j < g.dim; ++j) {
      auto dst = out.mutable_component(i * g.dim + j);
      const unsigned char bit = static_cast<unsigned char>(1u << j);
      for (std::size_t s = 0; s < src.size(); ++s) {
        dst[s] = (t.nyquist[s] & bit) ? Complex{} : Complex(0.0, ks[j][s]) * src[s];
      }
    }
  }
  out.mark_mean_free(true);
  return out;
}

SpectralField divergence(const SpectralField& field) {
  const PeriodicGrid& g = field.grid();
  if (field.components() != g.dim) throw InvalidInput("divergence: vector field required");
  const GridTables& t = tables(g);
  const double* ks[3] = {t.k1.data(), t.k2.data(), t.k3.data()};
  SpectralField out(g, 1);
  auto dst = out.mutable_component(0);
  for (int j = 0; j < g.dim; ++j) {
    auto src = field.component(j);
    const unsigned char bit = static_cast<unsigned char>(1u << j);
    for (std::size_t s = 0; s < src.size(); ++s) {
      if (!(t.nyquist[s] & bit)) dst[s] += Complex(0.0, ks[j][s]) * src[s];
    }
  }
  out.mark_mean_free(true);
  return out;
}

namespace {

// Splits u into P u (solenoidal) and u - P u; either output may be null.
void helmholtz_split(const SpectralField& field, SpectralField* solenoidal, SpectralField* grad) {
  const PeriodicGrid& g = field.grid();
  if (field.components() != g.dim) throw InvalidInput("leray_project: vector field with dim components required");
  const GridTables& t = tables(g);
  const double* ks[3] = {t.k1.data(), t.k2.data(), t.k3.data()};
  const std::size_t n = field.slots();
  if (solenoidal) *solenoidal = field;
  if (grad) *grad = SpectralField(g, g.dim);
  std::array<std::span<const Complex>, 3> in;
  std::array<std::span<Complex>, 3> out_s, out_g;
  for (int j = 0; j < g.dim; ++j) {
    in[j] = field.component(j);
    if (solenoidal) out_s[j] = solenoidal->mutable_component(j);
    if (grad) out_g[j] = grad->mutable_component(j);
  }
  for (std::size_t s = 0; s < n; ++s) {
    if (t.k_sq[s] == 0.0) continue;
    Complex kdotu{};
    for (int j = 0; j < g.dim; ++j) kdotu += ks[j][s] * in[j][s];
    const Complex f = kdotu / t.k_sq[s];
    for (int j = 0; j < g.dim; ++j) {
      const Complex part = ks[j][s] * f;
      if (solenoidal) out_s[j][s] = in[j][s] - part;
      if (grad) out_g[j][s] = part;
    }
  }
  if (solenoidal) {
    solenoidal->mark_mean_free(field.mean_free());
    solenoidal->mark_solenoidal(true);
  }
  if (grad) grad->mark_mean_free(true);
}

}  // namespace

SpectralField leray_project(const SpectralField& field) {
  SpectralField out;
  helmholtz_split(field, &out, nullptr);
  return out;
}

SpectralField gradient_part(const SpectralField& field) {
  SpectralField out;
  helmholtz_split(field, nullptr, &out);
  return out;
}

// ---------------------------------------------------------------------------
// Means

MeanVector mean(const SpectralField& field) {
  MeanVector m(static_cast<std::size_t>(field.components()));
  for (int c = 0; c < field.components(); ++c) m[static_cast<std::size_t>(c)] = field.component(c)[0].real();
  return m;
}

SpectralField subtract_mean(const SpectralField& field) {
  SpectralField out = field;
  for (int c = 0; c < out.components(); ++c) out.mutable_component(c)[0] = Complex{};
  out.mark_mean_free(true);
  out.mark_solenoidal(field.solenoidal());
  return out;
}

SpectralField with_mean(const SpectralField& field, const MeanVector& m) {
  if (m.size() != static_cast<std::size_t>(field.components()))
    throw InvalidInput("with_mean: mean vector length mismatch");
  SpectralField out = field;
  for (int c = 0; c < out.components(); ++c) out.mutable_component(c)[0] = Complex(m[static_cast<std::size_t>(c)], 0.0);
  out.mark_solenoidal(field.solenoidal());
  out.mark_mean_free(m.norm_sq() == 0.0);
  return out;
}

// ---------------------------------------------------------------------------
// Norms

namespace {

// sum over multi-indices |alpha| <= s of k^(2 alpha)
double sobolev_weight(double a, double b, double c, int dim, int s) {
  double total = 0.0;
  const double sq[3] = {a * a, b * b, c * c};
  for (int a1 = 0; a1 <= s; ++a1) {
    for (int a2 = 0; a1 + a2 <= s; ++a2) {
      if (dim == 2) {
        total += int_pow(sq[0], a1) * int_pow(sq[1], a2);
        continue;
      }
      for (int a3 = 0; a1 + a2 + a3 <= s; ++a3) {
        total += int_pow(sq[0], a1) * int_pow(sq[1], a2) * int_pow(sq[2], a3);
      }
    }
  }
  return total;
}

}  // namespace

double sobolev_norm_sq(const SpectralField& field, int s) {
  if (s < 0 || s > 3) throw InvalidInput("sobolev_norm: s must be in 0..3");
  const PeriodicGrid& g = field.grid();
  const GridTables& t = tables(g);
  double total = 0.0;
  for (int c = 0; c < field.components(); ++c) {
    auto d = field.component(c);
    for (std::size_t i = 0; i < d.size(); ++i) {
      const double a = std::norm(d[i]);
      if (a == 0.0) continue;
      total += t.weight[i] * sobolev_weight(t.k1[i], t.k2[i], t.k3[i], g.dim, s) * a;
    }
  }
  return total * g.volume();
}

double sobolev_norm(const SpectralField& field, int s) { return std::sqrt(sobolev_norm_sq(field, s)); }

double derivative_seminorm_sq(const SpectralField& field, int s) {
  if (s < 0 || s > 4) throw InvalidInput("derivative_seminorm: s must be in 0..4");
  const PeriodicGrid& g = field.grid();
  const GridTables& t = tables(g);
  double total = 0.0;
  for (int c = 0; c < field.components(); ++c) {
    auto d = field.component(c);
    for (std::size_t i = 0; i < d.size(); ++i) {
      total += t.weight[i] * int_pow(t.k_sq[i], s) * std::norm(d[i]);
    }
  }
  return total * g.volume();
}

double inner_product(const SpectralField& a, const SpectralField& b) {
  require_same_grid(a, b, "inner_product");
  const GridTables& t = tables(a.grid());
  double total = 0.0;
  for (int c = 0; c < a.components(); ++c) {
    auto x = a.component(c);
    auto y = b.component(c);
    for (std::size_t i = 0; i < x.size(); ++i) total += t.weight[i] * (x[i] * std::conj(y[i])).real();
  }
  return total * a.grid().volume();
}

double lp_norm(const PhysicalField& field, int p) {
  if (p != 2 && p != 3 && p != 4 && p != 6 && p != kLinf) throw InvalidInput("lp_norm: unsupported p");
  const std::size_t n = field.grid.physical_size();
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double mag_sq = 0.0;
    for (int c = 0; c < field.components; ++c) {
      const double v = field.data[static_cast<std::size_t>(c) * n + i];
      mag_sq += v * v;
    }
    switch (p) {
      case kLinf: acc = std::max(acc, std::sqrt(mag_sq)); break;
      case 2: acc += mag_sq; break;
      case 3: acc += mag_sq * std::sqrt(mag_sq); break;
      case 4: acc += mag_sq * mag_sq; break;
      default: acc += mag_sq * mag_sq * mag_sq; break;
    }
  }
  if (p == kLinf) return acc;
  const double cell = field.grid.volume() / static_cast<double>(n);
  return std::pow(acc * cell, 1.0 / p);
}

double lp_norm(const SpectralField& field, int p) { return lp_norm(transform_backward(field), p); }

SpectralField dealias(const SpectralField& field) {
  const GridTables& t = tables(field.grid());
  SpectralField out = field;
  for (int c = 0; c < out.components(); ++c) {
    auto d = out.mutable_component(c);
    for (std::size_t i = 0; i < d.size(); ++i)
      if (!t.retained[i]) d[i] = Complex{};
  }
  out.mark_mean_free(field.mean_free());
  out.mark_solenoidal(field.solenoidal());
  return out;
}

bool is_dealiased(const SpectralField& field) {
  const GridTables& t = tables(field.grid());
  for (int c = 0; c < field.components(); ++c) {
    auto d = field.component(c);
    for (std::size_t i = 0; i < d.size(); ++i)
      if (!t.retained[i] && d[i] != Complex{}) return false;
  }
  return true;
}

SpectralField lift_2d_to_3d(const SpectralField& field2d, const PeriodicGrid& grid3d) {
  const PeriodicGrid& g2 = field2d.grid();
  if (g2.dim != 2 || grid3d.dim != 3) throw InvalidInput("lift_2d_to_3d: expects a 2D field and a 3D grid");
  if (g2.L != grid3d.L || g2.N != grid3d.N) throw InvalidInput("lift_2d_to_3d: L or N mismatch");
  const int comps = field2d.components() == 2 ? 3 : field2d.components();
  SpectralField out(grid3d, comps);
  // Slot layout of the m3 = 0 plane coincides with the 2D layout.
  for (int c = 0; c < field2d.components(); ++c) {
    auto src = field2d.component(c);
    auto dst = out.mutable_component(c);
    std::copy(src.begin(), src.end(), dst.begin());
  }
  out.mark_mean_free(field2d.mean_free());
  out.mark_solenoidal(field2d.solenoidal() && comps == 3);
  return out;
}

PhysicalField broadcast_2d_to_3d(const PhysicalField& field2d, const PeriodicGrid& grid3d) {
  if (field2d.grid.dim != 2 || grid3d.dim != 3 || field2d.grid.N != grid3d.N)
    throw InvalidInput("broadcast_2d_to_3d: grid mismatch");
  PhysicalField out(grid3d, field2d.components);
  const std::size_t plane = field2d.grid.physical_size();
  for (int c = 0; c < field2d.components; ++c) {
    auto src = field2d.component(c);
    auto dst = out.component(c);
    for (int z = 0; z < grid3d.N; ++z) std::copy(src.begin(), src.end(), dst.begin() + static_cast<std::ptrdiff_t>(plane * static_cast<std::size_t>(z)));
  }
  return out;
}

double divergence_l2(const SpectralField& field) { return sobolev_norm(divergence(field), 0); }

double zero_mode_magnitude(const SpectralField& field) {
  double worst = 0.0;
  for (int c = 0; c < field.components(); ++c) worst = std::max(worst, std::abs(field.component(c)[0]));
  return worst;
}

double max_coeff_difference(const SpectralField& a, const SpectralField& b) {
  require_same_grid(a, b, "max_coeff_difference");
  double worst = 0.0;
  for (int c = 0; c < a.components(); ++c) {
    auto x = a.component(c);
    auto y = b.component(c);
    for (std::size_t i = 0; i < x.size(); ++i) worst = std::max(worst, std::abs(x[i] - y[i]));
  }
  return worst;
}

}  // namespace nsstab
