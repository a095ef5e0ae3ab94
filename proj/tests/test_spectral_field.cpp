#include <doctest.h>

#include <cmath>
#include <numbers>

#include "nsstab/fft.hpp"
#include "nsstab/random.hpp"
#include "nsstab/spectral_field.hpp"
#include "oracle.hpp"

using namespace nsstab;
using std::numbers::pi;

namespace {

SpectralField sine_x1(const PeriodicGrid& g, int comps = 1) {
  PhysicalField f(g, comps);
  for (std::size_t i = 0; i < g.physical_size(); ++i) f.component(0)[i] = std::sin(2.0 * pi / g.L * f.position(i)[0]);
  return transform_forward(f);
}

SpectralField random_vector(const PeriodicGrid& g, std::uint64_t seed) {
  Rng rng(seed);
  return random_field(g, g.dim, rng, [](double r) { return std::exp(-r * r / 8.0); }, 1.0, g.N / 3.0);
}

}  // namespace

TEST_CASE("grid rejects odd or tiny resolutions") {
  CHECK_THROWS_AS(PeriodicGrid(2 * pi, 3, 15), InvalidInput);
  CHECK_THROWS_AS(PeriodicGrid(-1.0, 3, 16), InvalidInput);
  CHECK_THROWS_AS(PeriodicGrid(2 * pi, 4, 16), InvalidInput);
}

TEST_CASE("forward and backward transforms round trip") {
  for (int dim : {2, 3}) {
    PeriodicGrid g(3.0, dim, 8);
    Rng rng(11);
    PhysicalField f(g, 2);
    for (double& v : f.data) v = rng.normal();
    const PhysicalField back = transform_backward(transform_forward(f));
    double err = 0.0;
    for (std::size_t i = 0; i < f.data.size(); ++i) err = std::max(err, std::abs(back.data[i] - f.data[i]));
    CHECK(err < 1e-13);
  }
}

TEST_CASE("coefficients of a cosine match the analytic values") {
  PeriodicGrid g(2 * pi, 3, 8);
  const auto f = oracle::sample(g, 1, {{{1, 2, -1}, 3.0, 0.4, 0}});
  const SpectralField u = transform_forward(f);
  const Complex expected = 1.5 * std::polar(1.0, 0.4);
  CHECK(std::abs(u.coeff(0, {1, 2, -1}) - expected) < 1e-14);
  CHECK(std::abs(u.coeff(0, {-1, -2, 1}) - std::conj(expected)) < 1e-14);
  CHECK(std::abs(u.coeff(0, {1, 2, 1})) < 1e-14);
}

TEST_CASE("set_coeff keeps Hermitian symmetry") {
  PeriodicGrid g(2 * pi, 3, 8);
  SpectralField u(g, 1);
  u.set_coeff(0, {0, 2, -3}, {1.0, 2.0});
  CHECK(u.hermitian_defect() < 1e-15);
  CHECK(u.coeff(0, {0, -2, 3}) == Complex(1.0, -2.0));
}

TEST_CASE("derivative of a sine is the cosine") {
  PeriodicGrid g(3.0, 2, 16);
  const SpectralField d = derivative(sine_x1(g), {1, 0, 0});
  const PhysicalField p = transform_backward(d);
  double err = 0.0;
  for (std::size_t i = 0; i < g.physical_size(); ++i) {
    const double x = p.position(i)[0];
    err = std::max(err, std::abs(p.component(0)[i] - 2 * pi / 3.0 * std::cos(2 * pi / 3.0 * x)));
  }
  CHECK(err < 1e-13);
}

TEST_CASE("derivative of a constant vanishes") {
  PeriodicGrid g(2 * pi, 3, 8);
  SpectralField c(g, 1);
  c.set_coeff(0, {0, 0, 0}, 4.0);
  CHECK(sobolev_norm(derivative(c, {0, 1, 0}), 0) == 0.0);
}

TEST_CASE("mixed derivative matches centered differences with second-order error") {
  // d^2/dx1dx2 of a random smooth field against a centered-difference stencil on the samples
  auto fd_error = [](int N) {
    PeriodicGrid g(2 * pi, 2, N);
    const std::vector<oracle::Term> terms{{{1, 1, 0}, 1.0, 0.3, 0}, {{2, -1, 0}, 0.5, 1.1, 0}, {{1, -3, 0}, 0.2, 2.0, 0}};
    const PhysicalField f = oracle::sample(g, 1, terms);
    const PhysicalField spec = transform_backward(derivative(transform_forward(f), {1, 1, 0}));
    const double h = g.L / N;
    double err = 0.0;
    auto at = [&](int i, int j) { return f.data[((j + N) % N) * N + (i + N) % N]; };
    for (int j = 0; j < N; ++j)
      for (int i = 0; i < N; ++i) {
        const double fd = (at(i + 1, j + 1) - at(i + 1, j - 1) - at(i - 1, j + 1) + at(i - 1, j - 1)) / (4 * h * h);
        err = std::max(err, std::abs(fd - spec.data[j * N + i]));
      }
    return err;
  };
  const double e16 = fd_error(16), e32 = fd_error(32);
  CHECK(e16 / e32 > 3.5);
  CHECK(e16 / e32 < 4.5);
}

TEST_CASE("Leray projection") {
  PeriodicGrid g(2 * pi, 3, 16);
  SUBCASE("solenoidal fields are fixed") {
    const SpectralField p = leray_project(random_vector(g, 3));
    CHECK(max_coeff_difference(leray_project(p), p) < 1e-14);
    CHECK(p.solenoidal());
  }
  SUBCASE("gradients are removed and the mean is kept") {
    SpectralField grad = gradient(sine_x1(g));
    SpectralField v(g, 3);
    for (int c = 0; c < 3; ++c) {
      auto dst = v.mutable_component(c);
      auto src = grad.component(c);
      std::copy(src.begin(), src.end(), dst.begin());
    }
    MeanVector m(std::vector<double>{1.0, -2.0, 0.5});
    const SpectralField p = leray_project(with_mean(v, m));
    CHECK(sobolev_norm(subtract_mean(p), 0) < 1e-13);
    CHECK(mean(p)[1] == doctest::Approx(-2.0));
  }
  SUBCASE("random fields become divergence free") {
    const SpectralField u = random_vector(g, 17);
    CHECK(divergence_l2(leray_project(u)) < 1e-12 * sobolev_norm(u, 1));
  }
  SUBCASE("scalar input is rejected") { CHECK_THROWS_AS(leray_project(sine_x1(g)), InvalidInput); }
}

TEST_CASE("mean and subtract_mean") {
  PeriodicGrid g(5.0, 3, 8);
  Rng rng(5);
  PhysicalField f(g, 3);
  for (double& v : f.data) v = rng.uniform(-1, 2);
  const SpectralField u = transform_forward(f);
  const MeanVector m = mean(u);
  for (int c = 0; c < 3; ++c) {
    double avg = 0.0;
    for (double v : f.component(c)) avg += v;
    avg /= static_cast<double>(g.physical_size());
    CHECK(std::abs(m[c] - avg) < 1e-13);
  }
  const SpectralField bar = subtract_mean(u);
  CHECK(bar.mean_free());
  CHECK(zero_mode_magnitude(bar) == 0.0);
  CHECK(max_coeff_difference(with_mean(bar, m), u) == 0.0);
  CHECK(std::abs(mean(sine_x1(g))[0]) < 1e-16);
}

TEST_CASE("Sobolev norms of a single sine on the 2 pi cube") {
  PeriodicGrid g(2 * pi, 3, 64);
  const SpectralField u = sine_x1(g);
  CHECK(sobolev_norm_sq(u, 0) == doctest::Approx(4 * pi * pi * pi).epsilon(1e-13));
  CHECK(sobolev_norm_sq(u, 1) == doctest::Approx(8 * pi * pi * pi).epsilon(1e-13));
  CHECK(sobolev_norm(SpectralField(g, 3), 2) == 0.0);
  CHECK_THROWS_AS(sobolev_norm(u, 4), InvalidInput);
}

TEST_CASE("Sobolev norms match the analytic sums over multi-indices") {
  for (int dim : {2, 3}) {
    PeriodicGrid g(4.0, dim, 16);
    Rng rng(100 + dim);
    const auto terms = oracle::random_terms(g, dim, rng, 12, 5);
    const SpectralField u = transform_forward(oracle::sample(g, dim, terms));
    for (int s = 0; s <= 3; ++s) CHECK(sobolev_norm_sq(u, s) == doctest::Approx(oracle::hs_sq(g, terms, s)).epsilon(1e-11));
  }
}

TEST_CASE("H1 norm against physical-space quadrature of |u|^2 + |grad u|^2") {
  PeriodicGrid g(2 * pi, 3, 16);
  Rng rng(8);
  const auto terms = oracle::random_terms(g, 3, rng, 10, 4);
  double q = oracle::physical_l2_sq(oracle::sample(g, 3, terms));
  for (int d = 0; d < 3; ++d) {
    std::array<int, 3> a{0, 0, 0};
    a[d] = 1;
    q += oracle::physical_l2_sq(oracle::sample(g, 3, terms, a));
  }
  const SpectralField u = transform_forward(oracle::sample(g, 3, terms));
  CHECK(sobolev_norm_sq(u, 1) == doctest::Approx(q).epsilon(1e-10));
}

TEST_CASE("derivative seminorm counts ordered index tuples") {
  PeriodicGrid g(2 * pi, 2, 16);
  const std::vector<oracle::Term> t{{{1, 1, 0}, 1.0, 0.0, 0}};
  const SpectralField u = transform_forward(oracle::sample(g, 1, t));
  // |k|^4 = 4 for k = (1, 1); the multi-index sum gives k1^4 + k1^2 k2^2 + k2^4 = 3
  CHECK(derivative_seminorm_sq(u, 2) == doctest::Approx(4.0 * 0.5 * g.volume()));
  CHECK(sobolev_norm_sq(u, 2) - sobolev_norm_sq(u, 1) == doctest::Approx(3.0 * 0.5 * g.volume()));
}

TEST_CASE("Lp norms") {
  PeriodicGrid g(2 * pi, 3, 16);
  SpectralField c(g, 1);
  c.set_coeff(0, {0, 0, 0}, -3.0);
  CHECK(lp_norm(c, 3) == doctest::Approx(3.0 * std::cbrt(g.volume())));
  CHECK(lp_norm(c, kLinf) == doctest::Approx(3.0));
  const SpectralField s = sine_x1(g);
  CHECK(std::pow(lp_norm(s, 4), 4) == doctest::Approx(3.0 / 8.0 * std::pow(2 * pi, 3)).epsilon(1e-12));
  const SpectralField r = random_vector(g, 2);
  CHECK(lp_norm(r, 2) == doctest::Approx(sobolev_norm(r, 0)).epsilon(1e-12));
  CHECK_THROWS_AS(lp_norm(s, 5), InvalidInput);
}

TEST_CASE("dealias") {
  PeriodicGrid g(2 * pi, 3, 12);
  SpectralField u(g, 1);
  u.set_coeff(0, {4, -4, 3}, {1.0, 0.5});
  CHECK(max_coeff_difference(dealias(u), u) == 0.0);
  CHECK(is_dealiased(u));
  SpectralField n(g, 1);
  n.set_coeff(0, {6, 0, 0}, 1.0);
  CHECK(sobolev_norm(dealias(n), 0) == 0.0);
  const SpectralField r = random_vector(PeriodicGrid(2 * pi, 3, 12), 4);
  CHECK(max_coeff_difference(dealias(dealias(r)), dealias(r)) == 0.0);
}

TEST_CASE("dealiased product equals the truncated convolution") {
  // N = 8 in 2D: a, b on the retained band, product compared with the direct convolution
  PeriodicGrid g(2 * pi, 2, 8);
  Rng rng(42);
  const SpectralField a = random_field(g, 1, rng, [](double) { return 1.0; }, 1.0, 3.0);
  const SpectralField b = random_field(g, 1, rng, [](double) { return 1.0; }, 1.0, 3.0);
  const PhysicalField pa = transform_backward(a), pb = transform_backward(b);
  PhysicalField prod(g, 1);
  for (std::size_t i = 0; i < prod.data.size(); ++i) prod.data[i] = pa.data[i] * pb.data[i];
  const SpectralField p = dealias(transform_forward(prod));
  const int cut = g.dealias_cutoff();
  double err = 0.0;
  for (int m1 = -cut; m1 <= cut; ++m1)
    for (int m2 = -cut; m2 <= cut; ++m2) {
      Complex conv = 0.0;
      for (int p1 = -cut; p1 <= cut; ++p1)
        for (int p2 = -cut; p2 <= cut; ++p2) {
          const int q1 = m1 - p1, q2 = m2 - p2;
          if (std::abs(q1) > cut || std::abs(q2) > cut) continue;
          conv += a.coeff(0, {p1, p2, 0}) * b.coeff(0, {q1, q2, 0});
        }
      err = std::max(err, std::abs(conv - p.coeff(0, {m1, m2, 0})));
    }
  CHECK(err < 1e-14);
}

TEST_CASE("lift_2d_to_3d") {
  PeriodicGrid g2(2 * pi, 2, 16), g3(2 * pi, 3, 16);
  SUBCASE("zero stays zero") { CHECK(sobolev_norm(lift_2d_to_3d(SpectralField(g2, 2), g3), 0) == 0.0); }
  SUBCASE("no x3 dependence, L2 norm picks up L") {
    Rng rng(1);
    const SpectralField u = leray_project(random_field(g2, 2, rng, [](double) { return 1.0; }, 1.0, 5.0));
    const SpectralField l = lift_2d_to_3d(u, g3);
    CHECK(l.components() == 3);
    CHECK(sobolev_norm(derivative(l, {0, 0, 1}), 0) == 0.0);
    CHECK(sobolev_norm(SpectralField(l), 0) > 0.0);
    CHECK(sobolev_norm_sq(l, 0) == doctest::Approx(g2.L * sobolev_norm_sq(u, 0)).epsilon(1e-13));
    CHECK(oracle::physical_l2_sq(transform_backward(l)) == doctest::Approx(g2.L * sobolev_norm_sq(u, 0)).epsilon(1e-12));
    CHECK(divergence_l2(l) < 1e-13);
  }
  SUBCASE("mismatched grids are rejected") {
    CHECK_THROWS_AS(lift_2d_to_3d(SpectralField(g2, 2), PeriodicGrid(2 * pi, 3, 8)), InvalidInput);
    CHECK_THROWS_AS(lift_2d_to_3d(SpectralField(g2, 2), PeriodicGrid(3.0, 3, 16)), InvalidInput);
  }
}

TEST_CASE("derivative commutes with the projector on solenoidal fields") {
  PeriodicGrid g(2 * pi, 3, 16);
  const SpectralField p = leray_project(random_vector(g, 9));
  const SpectralField d = derivative(p, {1, 2, 0});
  CHECK(max_coeff_difference(leray_project(d), d) < 1e-13);
}

TEST_CASE("Poincare inequality with equality on the lowest modes") {
  PeriodicGrid g(3.0, 3, 16);
  const double kappa = std::pow(2 * pi / g.L, 2);
  const SpectralField r = random_vector(g, 21);
  CHECK(derivative_seminorm_sq(r, 1) >= kappa * sobolev_norm_sq(r, 0));
  SpectralField low(g, 1);
  low.set_coeff(0, {0, 1, 0}, {0.3, -0.2});
  low.set_coeff(0, {0, 0, 1}, {0.1, 0.7});
  CHECK(derivative_seminorm_sq(low, 1) == doctest::Approx(kappa * sobolev_norm_sq(low, 0)).epsilon(1e-14));
}
