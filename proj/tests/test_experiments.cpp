#include <doctest.h>

#include <cmath>
#include <numbers>

#include "nsstab/experiments.hpp"

using namespace nsstab;
using std::numbers::pi;

namespace {

PairTrajectory pair_run(const FlowState& b0, const Forcing& fs, const FlowState& u0, double dt, double t_end, double T) {
  SolverConfig c;
  c.dt = dt;
  c.t_end = t_end;
  EvolveOptions eo;
  eo.window = T;
  return evolve_pair(b0, fs, u0, Forcing::zero(u0.u_bar.grid(), 3), c, eo);
}

}  // namespace

TEST_CASE("forcing families") {
  PeriodicGrid g(2 * pi, 2, 16);
  SUBCASE("the decaying shape has unit H1 norm on the 3D box") {
    const SpectralField phi = forcing_shape(g, {0, 1}, true);
    CHECK(g.L * sobolev_norm_sq(phi, 1) == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(divergence_l2(phi) < 1e-15);
    CHECK(zero_mode_magnitude(phi) == 0.0);
  }
  SUBCASE("decaying integral is eps^2 / (2 lambda) for a unit mode") {
    BaseForcingSpec s;
    s.family = ForcingFamily::constant_plus_decaying;
    s.epsilon = 1.0;
    s.lambda = 2.5;
    CHECK(decaying_h1_integral(s, g) == doctest::Approx(1.0 / 5.0).epsilon(1e-14));
    const Forcing f = forcing_families(s, g);
    CHECK(g.L * f.window_integral(0.0, 60.0, ForcingNorm::h1) == doctest::Approx(0.2).epsilon(1e-12));
  }
  SUBCASE("a = (1, 0), h = 0 has no bar part but a growing mean") {
    BaseForcingSpec s;
    s.family = ForcingFamily::constant_plus_decaying;
    s.a = {1.0, 0.0};
    const Forcing f = forcing_families(s, g);
    CHECK(f.norm_sq_at(3.0, ForcingNorm::h1) == 0.0);
    CHECK(f.mean_at(3.0)[0] == 1.0);
    CHECK(f.mean_unbounded());
  }
  SUBCASE("periodic family needs T and repeats exactly") {
    BaseForcingSpec s;
    s.family = ForcingFamily::periodic_decaying;
    s.epsilon = 0.5;
    CHECK_THROWS_AS(forcing_families(s, g), InvalidInput);
    const Forcing f = forcing_families(s, g, 2.0);
    CHECK(f.window_integral(0.0, 2.0, ForcingNorm::h1) == f.window_integral(14.0, 16.0, ForcingNorm::h1));
  }
  SUBCASE("non-positive decay rate is rejected") {
    BaseForcingSpec s;
    s.family = ForcingFamily::constant_plus_decaying;
    s.lambda = 0.0;
    CHECK_THROWS_AS(forcing_families(s, g), InvalidInput);
  }
  SUBCASE("names round trip") {
    for (ForcingFamily f : {ForcingFamily::zero, ForcingFamily::constant_plus_decaying, ForcingFamily::periodic_decaying})
      CHECK(forcing_family_from_string(to_string(f)) == f);
    CHECK_THROWS_AS(forcing_family_from_string("steady"), InvalidInput);
  }
}

TEST_CASE("perturbation generator") {
  PeriodicGrid g(2 * pi, 3, 16);
  PerturbationSpec s;
  s.gamma = 3e-4;
  s.seed = 99;
  s.mean = {0.01, 0.0, -0.02};
  const FlowState u = make_perturbation(g, s);
  CHECK(sobolev_norm_sq(u.u_bar, 1) == doctest::Approx(3e-4 * (1 - 1e-9)).epsilon(1e-13));
  CHECK(sobolev_norm_sq(u.u_bar, 1) <= 3e-4);
  CHECK(divergence_l2(u.u_bar) < 1e-14);
  CHECK(u.mean[2] == -0.02);
  CHECK(u.role == Role::perturbation);
  // support on 1 <= |m| <= N / 4
  for (std::size_t i = 0; i < u.u_bar.slots(); ++i) {
    const MultiIndex m = g.mode(i);
    const double r = std::sqrt(double(m[0] * m[0] + m[1] * m[1] + m[2] * m[2]));
    if (r > 4.0 + 1e-12)
      for (int c = 0; c < 3; ++c) CHECK(u.u_bar.component(c)[i] == Complex(0.0));
  }
  const FlowState v = make_perturbation(g, s);
  CHECK(max_coeff_difference(u.u_bar, v.u_bar) == 0.0);
  s.seed = 100;
  CHECK(max_coeff_difference(u.u_bar, make_perturbation(g, s).u_bar) > 0.0);
}

TEST_CASE("barrier monitor") {
  SUBCASE("zero series") {
    const std::vector<double> t{0, 0.1, 0.2, 0.3}, z(4, 0.0);
    const BarrierReport r = barrier_monitor(t, z, z, 0.5, 8.0, 1e-4);
    CHECK(r.never_exceeded);
    CHECK(r.violations == 0);
    CHECK(r.max_residual == 0.0);
  }
  SUBCASE("exponential decay at the critical rate") {
    const double c1 = 0.5, gamma = 1e-4;
    std::vector<double> t, x2, g2;
    for (int i = 0; i <= 2000; ++i) {
      t.push_back(0.01 * i);
      x2.push_back(gamma * (1 - 1e-9) * std::exp(-c1 * t.back() / 2));
      g2.push_back(0.0);
    }
    const BarrierReport r = barrier_monitor(t, x2, g2, c1, 8.0, gamma);
    CHECK(r.violations == 0);
    // the raw form asks for decay close to the rate c_1, twice as fast
    CHECK(r.raw_violations == 1999);
    CHECK(r.never_exceeded);
    CHECK(r.checked == 1999);
  }
  SUBCASE("growth faster than allowed is caught") {
    std::vector<double> t, x2, g2;
    for (int i = 0; i <= 100; ++i) {
      t.push_back(0.01 * i);
      x2.push_back(1e-6 * (1 + 5 * t.back()));
      g2.push_back(0.0);
    }
    const BarrierReport r = barrier_monitor(t, x2, g2, 0.5, 8.0, 1.0);
    CHECK(r.violations > 0);
  }
  SUBCASE("exceedance time and nesting") {
    const std::vector<double> t{0, 1, 2}, x2{0.5, 1.5, 0.2}, g2(3, 0.0), y2{1.0, 1.0, 1.0};
    const BarrierReport r = barrier_monitor(t, x2, g2, 0.5, 8.0, 1.0, y2);
    CHECK_FALSE(r.never_exceeded);
    CHECK(*r.first_exceedance_time == 1.0);
    CHECK_FALSE(r.nesting_holds);
  }
  SUBCASE("mismatched series are rejected") {
    CHECK_THROWS_AS(barrier_monitor({0, 1}, {0, 0, 0}, {0, 0}, 0.5, 8, 1), InvalidInput);
    CHECK_THROWS_AS(barrier_monitor({0, 0}, {0, 0}, {0, 0}, 0.5, 8, 1), InvalidInput);
  }
}

TEST_CASE("window statistics of zero data") {
  PeriodicGrid g2(2 * pi, 2, 8), g3(2 * pi, 3, 8);
  const PairTrajectory p =
      pair_run(FlowState::zero(g2, Role::base2d), Forcing::zero(g2, 2), FlowState::zero(g3, Role::perturbation), 0.05, 2.0, 0.5);
  const WindowSummary w = window_statistics(p, 0.5, 0.5);
  CHECK(w.windows.size() == 4);
  CHECK(w.uniform);
  for (const auto& s : w.windows) {
    CHECK(s.sup_vs_h1 == 0.0);
    CHECK(s.int_u_h2 == 0.0);
  }
}

TEST_CASE("incomplete final window is excluded with a notice") {
  PeriodicGrid g2(2 * pi, 2, 8), g3(2 * pi, 3, 8);
  const PairTrajectory p = pair_run(base_initial_state(g2, 0.1), Forcing::zero(g2, 2), FlowState::zero(g3, Role::perturbation), 0.05, 1.25, 0.5);
  const WindowSummary w = window_statistics(p, 0.5, 0.5);
  CHECK(w.windows.size() == 2);
  CHECK(w.notices.size() == 1);
}

TEST_CASE("Taylor-Green window sups decay by exp(-2 nu T) in L2") {
  PeriodicGrid g2(2 * pi, 2, 16), g3(2 * pi, 3, 16);
  const double T = 0.5;
  const PairTrajectory p = pair_run(base_initial_state(g2, 1.0), Forcing::zero(g2, 2), FlowState::zero(g3, Role::perturbation), 1e-3, 4 * T, T);
  const WindowSummary w = window_statistics(p, T, 0.5);
  REQUIRE(w.windows.size() == 4);
  for (std::size_t k = 1; k < w.windows.size(); ++k) {
    const double r = std::sqrt(w.windows[k].sup_vs_l2_sq / w.windows[k - 1].sup_vs_l2_sq);
    CHECK(r == doctest::Approx(std::exp(-2 * T)).epsilon(1e-9));
    CHECK(w.windows[k].sup_vs_h1 >= std::sqrt(p.base.samples[k * 500].h_sq[1]));
  }
  CHECK(w.uniform);
}

TEST_CASE("Taylor-Green H21 window norm against the closed form") {
  PeriodicGrid g2(2 * pi, 2, 16);
  SolverConfig c;
  c.dt = 1e-3;
  c.t_end = 2.0;
  const FlowState v0 = base_initial_state(g2, 1.0);
  const Trajectory tr = evolve_base_2d(v0, Forcing::zero(g2, 2), c);
  const auto h = h21_window_norm(tr, 1.0);
  REQUIRE(h.size() == 2);
  const double e0 = tr.samples.front().h_sq[0];  // on the 3D box
  for (int k = 0; k < 2; ++k) {
    // v = v0 e^{-2t}: ||v_t||^2 = 4 e0 e^{-4t}, ||v||^2_{H^2} = e0 (1 + 2 + 3) e^{-4t}, multi-index sum
    const double window = (std::exp(-4.0 * k) - std::exp(-4.0 * (k + 1))) / 4.0;
    CHECK(h[k].int_t_sq == doctest::Approx(4 * e0 * window).epsilon(1e-6));
    CHECK(h[k].int_h2_sq == doctest::Approx(6 * e0 * window).epsilon(1e-6));
    // p is quadratic in v: ||grad p||^2 = e0 e^{-8t} / 2 for unit amplitude
    const double window8 = (std::exp(-8.0 * k) - std::exp(-8.0 * (k + 1))) / 8.0;
    CHECK(h[k].int_gradp_sq == doctest::Approx(0.5 * e0 * window8).epsilon(1e-6));
  }
  CHECK_THROWS_AS(h21_window_norm(tr, 1e-3), InvalidInput);
}

TEST_CASE("scenario validation and window length") {
  Scenario s = reference_scenario();
  s.N = 31;
  CHECK_THROWS_AS(s.validate(), InvalidInput);
  s = reference_scenario();
  s.base_forcing.lambda = -1.0;
  CHECK_THROWS_AS(s.validate(), InvalidInput);
  s = reference_scenario();
  s.calibration.samples = 200;
  s.calibration.N = 8;
  const InterpolationConstants c = interpolation_constants(s.nu, s.L, s.constants_mode, s.calibration);
  const double T = choose_window_length(s, c);
  const PeriodicGrid g2(s.L, 2, s.N);
  const BaseInputs in = base_inputs(forcing_families(s.base_forcing, g2, T), base_initial_state(g2, 0.0), T, 16);
  const AChain a = a_chain(in, c);
  CHECK(a.time_conditions_hold());
  CHECK(abar_chain(in, c).membership);
}

TEST_CASE("zero forcing and zero perturbation give a trivially true verdict") {
  Scenario s;
  s.N = 8;
  s.T = 3.0;
  s.windows = 2;
  s.dt = 0.05;
  s.perturbation.gamma = 1e-4;
  s.perturbation.fill = 0.0;
  s.calibration.samples = 100;
  s.calibration.N = 8;
  const StabilityResult r = run_stability_experiment(s);
  CHECK(r.barrier.never_exceeded);
  CHECK(r.barrier.max_x2 == 0.0);
  CHECK(r.barrier.violations == 0);
  for (const auto& w : r.windows.windows) CHECK(w.sup_u_h1 == 0.0);
}

TEST_CASE("gamma above gamma_* is only flagged") {
  Scenario s;
  s.N = 8;
  s.T = 3.0;
  s.windows = 1;
  s.dt = 0.05;
  s.calibration.samples = 100;
  s.calibration.N = 8;
  s.perturbation.gamma = 50.0;
  const StabilityResult r = run_stability_experiment(s);
  CHECK_FALSE(r.b.gamma_ok());
  CHECK_FALSE(r.smallness.gamma_ok);
}
