#include <doctest.h>

#include <cmath>
#include <limits>
#include <numbers>

#include "nsstab/certificate.hpp"
#include "nsstab/experiments.hpp"

using namespace nsstab;
using std::numbers::pi;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

InterpolationConstants unit_constants() {
  InterpolationConstants c = assemble_constants(poincare_constants(1.0, 2 * pi), analytic_primitives(2 * pi),
                                                ConstantsMode::analytic_conservative);
  return c;
}

const HypothesisFlag& flag(const std::vector<HypothesisFlag>& flags, const std::string& name) {
  for (const auto& f : flags)
    if (f.name == name) return f;
  FAIL("missing flag " << name);
  return flags.front();
}

BaseInputs zero_inputs(double T) {
  BaseInputs in;
  in.T = T;
  return in;
}

}  // namespace

TEST_CASE("T_* and gamma_*") {
  PoincareConstants p;
  p.c_s1 = 0.5;
  CHECK(t_star(p) == doctest::Approx(4 * std::log(2.0)));
  p.c_s1 = std::log(2.0);
  CHECK(t_star(p) == doctest::Approx(2.0));
  InterpolationConstants c;
  c.poincare.c_1 = 0.5;
  c.c_3 = 8.0;
  CHECK(gamma_star(c) == doctest::Approx(std::pow(1.0 / 32.0, 0.25)));
  const double g1 = gamma_star(c);
  c.c_3 = 32.0;
  CHECK(gamma_star(c) == doctest::Approx(g1 / std::sqrt(2.0)));
  CHECK(1.0 - std::exp(-0.5 * 4 * std::log(2.0) / 2.0) == doctest::Approx(0.5));
}

TEST_CASE("safe multiplication treats 0 * inf as 0") {
  CHECK(safe_mul(0.0, kInf) == 0.0);
  CHECK(safe_mul(kInf, 0.0) == 0.0);
  CHECK(safe_mul(2.0, kInf) == kInf);
  CHECK(safe_mul(2.0, 3.0) == 6.0);
}

TEST_CASE("geometric iteration matches the recursion") {
  for (double r : {0.01, 0.3, 0.77, 0.999}) {
    double x = 2.5;
    const double a = 0.7;
    for (int k = 0; k <= 50; ++k) {
      CHECK(geometric_iterate(a, r, 2.5, k) == doctest::Approx(x).epsilon(1e-12));
      CHECK(x <= geometric_bound(a, r, 2.5, k) * (1 + 1e-14));
      x = a + r * x;
    }
  }
}

TEST_CASE("zero data collapses every chain") {
  const InterpolationConstants c = unit_constants();
  const BaseInputs in = zero_inputs(3.0);
  const AbarChain ab = abar_chain(in, c);
  CHECK(ab.abar1_sq == 0.0);
  CHECK(ab.abar2_sq == 0.0);
  CHECK(ab.abar3_sq == 1.0);
  CHECK(ab.abar4_sq == 0.0);
  const AChain a = a_chain(in, c);
  for (double v : {a.a1_sq, a.a2_sq, a.a3_sq, a.a4_sq, a.a5_sq, a.a6_sq, a.a7_sq, a.a8_sq, a.a9, a.a10_sq, a.a11_sq,
                   a.a12_sq, a.a13_sq, a.a14_sq})
    CHECK(v == 0.0);
  PerturbationInputs pin;
  pin.T = 3.0;
  const BChain b = b_chain(pin, a, c, 1e-4);
  for (double v : {b.b1_sq, b.b2_sq, b.b3_sq, b.b4_sq, b.b5_sq, b.b6_l2, b.b6_mean}) CHECK(v == 0.0);
}

TEST_CASE("zero data membership is T > max(T_*, 1)") {
  const InterpolationConstants c = unit_constants();
  const double ts = t_star(c.poincare);
  CHECK(ts > 1.0);
  CHECK_FALSE(abar_chain(zero_inputs(0.5 * ts), c).membership);
  CHECK(abar_chain(zero_inputs(ts), c).membership);
  // with a faster rate T_* < 1 and the Abar3 bound decides
  InterpolationConstants fast = c;
  fast.poincare.c_s1 = 10.0;
  CHECK_FALSE(abar_chain(zero_inputs(1.0), fast).membership);
  CHECK(abar_chain(zero_inputs(1.01), fast).membership);
}

TEST_CASE("chain identities hold exactly") {
  const InterpolationConstants c = unit_constants();
  BaseInputs in = zero_inputs(5.0);
  in.f_l2.value = 0.3;
  in.f_grad.value = 0.2;
  in.f_h1.value = 0.5;
  in.v0_l2_sq = 0.1;
  in.v0_grad_sq = 0.2;
  in.v0_hess_sq = 0.4;
  in.v0_h1_sq = 0.3;
  const AChain a = a_chain(in, c);
  CHECK(a.a3_sq == a.a1_sq + a.a2_sq);
  CHECK(a.a6_sq == a.a4_sq + a.a5_sq);
  CHECK(a.a8_sq == a.a3_sq + a.a7_sq);
  CHECK(a.a14_sq == c.c_s3 * (a.a13_sq * a.a8_sq + a.a10_sq) + a.a12_sq);
  PerturbationInputs pin;
  pin.T = 5.0;
  pin.g_l2.value = 0.01;
  pin.b2_sq = 0.02;
  pin.u0_l2_sq = 1e-4;
  const BChain b = b_chain(pin, a, c, 1e-4);
  CHECK(b.b5_sq == c.c_2 * a.a8_sq * b.b4_sq + c.c_2 * a.a3_sq * b.b2_sq + c.c_2 * b.b1_sq + b.b3_sq);
  CHECK(b.b4_sq == b.b3_sq + std::exp(c.c_2 * a.a8_sq) * (2 * b.b3_sq + 1e-4));
}

TEST_CASE("A1 and A2 for a constant forcing norm") {
  const InterpolationConstants c = unit_constants();
  PeriodicGrid g(2 * pi, 2, 16);
  SpectralField s(g, 2);
  s.set_coeff(0, {0, 1, 0}, Complex(0, -0.5));
  const Forcing f = Forcing::closed_form(g, 2, {{s, TimeProfile::constant(1.0)}}, {});
  const double T = 2.0;
  const double phi = f.norm_sq_at(0.0, ForcingNorm::l2) * g.L;  // on the 3D box
  FlowState v0 = FlowState::zero(g, Role::base2d);
  const BaseInputs in = base_inputs(f, v0, T, 8);
  CHECK(in.f_l2.value == doctest::Approx(phi * T).epsilon(1e-12));
  const AChain a = a_chain(in, c);
  const double cs1 = c.poincare.c_s1;
  CHECK(a.a1_sq == doctest::Approx(phi * T / cs1).epsilon(1e-12));
  CHECK(a.a2_sq == doctest::Approx(a.a1_sq / (1 - std::exp(-cs1 * T))).epsilon(1e-14));
}

TEST_CASE("monotonicity of the chains in their inputs") {
  const InterpolationConstants c = unit_constants();
  BaseInputs in = zero_inputs(4.0);
  in.f_l2.value = in.f_grad.value = in.f_h1.value = 0.05;
  in.v0_l2_sq = in.v0_grad_sq = in.v0_hess_sq = in.v0_h1_sq = 0.05;
  const AChain base = a_chain(in, c);
  for (double BaseInputs::*field : {&BaseInputs::v0_l2_sq, &BaseInputs::v0_grad_sq, &BaseInputs::v0_hess_sq}) {
    BaseInputs up = in;
    up.*field *= 1.1;
    const AChain a = a_chain(up, c);
    CHECK(a.a8_sq >= base.a8_sq);
    CHECK(a.a14_sq >= base.a14_sq);
  }
  BaseInputs up = in;
  up.f_l2.value *= 1.1;
  CHECK(a_chain(up, c).a14_sq >= base.a14_sq);
}

TEST_CASE("non-finite inputs are findings, not errors") {
  const InterpolationConstants c = unit_constants();
  BaseInputs in = zero_inputs(4.0);
  in.drift.value = kInf;
  const AChain a = a_chain(in, c);
  CHECK(std::isinf(a.a9));
  CHECK_FALSE(flag(a.flags, "a9_finite").holds);
  CHECK_FALSE(flag(a.flags, "a9_finite").time_condition);
  CHECK(a.time_conditions_hold());
  CHECK_FALSE(a.hypotheses_hold());
}

TEST_CASE("constant mean forcing of the perturbation gives an infinite B2") {
  PeriodicGrid g(2 * pi, 3, 8);
  const Forcing gf = Forcing::closed_form(g, 3, {}, {{MeanVector(std::vector<double>{0.2, 0, 0}), TimeProfile::constant(1.0)}});
  const PerturbationInputs in = perturbation_inputs(gf, FlowState::zero(g, Role::perturbation), 2.0, 8);
  CHECK(std::isinf(in.b2_sq));
  // the window integral of |m t|^2 over [kT, (k+1)T] is m^2 ((k+1)^3 - k^3) T^3 / 3
  const DriftSup d = drift_sup(gf, MeanVector(3), 100.0);
  const WindowSup w = drift_window_sup(gf, MeanVector(3), 2.0, 3, d);
  CHECK(std::isinf(w.value));
  // B2 enters through c_2 A3^2 B2^2, so it is only visible with nonzero base data
  BaseInputs base = zero_inputs(2.0);
  base.v0_l2_sq = 0.1;
  const BChain b = b_chain(in, a_chain(base, unit_constants()), unit_constants(), 1e-4);
  CHECK(std::isinf(b.b5_sq));
  CHECK(std::isfinite(b_chain(in, a_chain(zero_inputs(2.0), unit_constants()), unit_constants(), 1e-4).b5_sq));
  CHECK_FALSE(flag(b.flags, "b2_finite").holds);
}

TEST_CASE("decaying mean forcing gives finite drift data") {
  PeriodicGrid g(2 * pi, 3, 8);
  const Forcing gf =
      Forcing::closed_form(g, 3, {}, {{MeanVector(std::vector<double>{0.2, 0, 0}), TimeProfile::exponential(1.0, 2.0)}});
  const PerturbationInputs in = perturbation_inputs(gf, FlowState::zero(g, Role::perturbation), 2.0, 8);
  CHECK(in.drift.certified);
  CHECK(in.drift.value == doctest::Approx(0.1).epsilon(1e-10));
  CHECK(std::isfinite(in.b2_sq));
  CHECK(in.b2_sq <= 2.0 * 0.01 * (1 + 1e-12));
}

TEST_CASE("hypothesis flags are reported for every time condition") {
  const InterpolationConstants c = unit_constants();
  const AChain a = a_chain(zero_inputs(0.1), c);
  for (const char* n : {"T_absorbs_stretching", "hessian_window_decay", "grad_window_contraction", "grad_window_contraction_as_printed"}) CHECK(flag(a.flags, n).time_condition);
  CHECK_FALSE(flag(a.flags, "grad_window_contraction").holds);
  CHECK_FALSE(flag(a.flags, "grad_window_contraction_as_printed").holds);
  PerturbationInputs pin;
  pin.T = 0.1;
  const BChain b = b_chain(pin, a, c, 1e-4);
  for (const char* n : {"perturbation_window_decay", "perturbation_window_decay_c2", "perturbation_window_contraction"}) CHECK(flag(b.flags, n).time_condition);
  CHECK_FALSE(b.time_conditions_hold());
  // the literal form with the positive exponent never holds
  CHECK_FALSE(flag(a_chain(zero_inputs(1e3), c).flags, "grad_window_contraction_as_printed").holds);
}

TEST_CASE("gamma above gamma_* is flagged") {
  const InterpolationConstants c = unit_constants();
  const AChain a = a_chain(zero_inputs(10.0), c);
  PerturbationInputs pin;
  pin.T = 10.0;
  const double gs = gamma_star(c);
  CHECK(b_chain(pin, a, c, 0.5 * gs).gamma_ok());
  const BChain big = b_chain(pin, a, c, 2.0 * gs);
  CHECK_FALSE(big.gamma_ok());
  CHECK_FALSE(flag(big.flags, "gamma_le_gamma_star").holds);
}

TEST_CASE("smallness check with zero data") {
  const InterpolationConstants c = unit_constants();
  const AChain a = a_chain(zero_inputs(10.0), c);
  PerturbationInputs pin;
  pin.T = 10.0;
  const BChain b = b_chain(pin, a, c, 1e-6);
  SmallnessInputs in;
  in.t = {0.0, 1.0, 2.0};
  in.vsx_l3 = {0.0, 0.0, 0.0};
  in.drift_sq = [](double) { return 0.0; };
  in.g_bar_sq = [](double) { return 0.0; };
  const SmallnessReport r = smallness_check(1e-6, c, b, in);
  CHECK(r.max_g2 == 0.0);
  CHECK(r.g2_holds);
  CHECK(r.gbar_holds);
  CHECK(r.threshold == doctest::Approx(c.poincare.c_1 * 1e-6 / 4));
  in.vsx_l3 = {0.0};
  CHECK_THROWS_AS(smallness_check(1e-6, c, b, in), InvalidInput);
}

TEST_CASE("decaying forcing integral and Abar1") {
  PeriodicGrid g(2 * pi, 2, 16);
  BaseForcingSpec s;
  s.family = ForcingFamily::constant_plus_decaying;
  s.epsilon = 1.0;
  s.lambda = 1.0;
  CHECK(decaying_h1_integral(s, g) == doctest::Approx(0.5).epsilon(1e-13));
  const Forcing f = forcing_families(s, g);
  const BaseInputs in = base_inputs(f, FlowState::zero(g, Role::base2d), 3.0, 16);
  // the first window holds all but e^{-2 T} of the total
  CHECK(in.f_h1.value == doctest::Approx(0.5 * (1 - std::exp(-6.0))).epsilon(1e-10));
  CHECK(in.f_h1.certified);
}

TEST_CASE("a constant force alone has zero bar part") {
  PeriodicGrid g(2 * pi, 2, 16);
  BaseForcingSpec s;
  s.family = ForcingFamily::constant_plus_decaying;
  s.a = {1.0, 0.0};
  s.epsilon = 0.0;
  const Forcing f = forcing_families(s, g);
  for (double T : {0.5, 3.0, 20.0}) {
    const BaseInputs in = base_inputs(f, FlowState::zero(g, Role::base2d), T, 8);
    CHECK(abar_chain(in, unit_constants()).abar1_sq == 0.0);
    CHECK(std::isinf(in.drift.value));
  }
}

TEST_CASE("membership of the first forcing example for T > max(T_*, A_0)") {
  // A_0 dominates Abar3^2 whenever Abar2^2 <= 1
  PeriodicGrid g(2 * pi, 2, 16);
  for (double eps : {0.1, 0.35}) {
    for (double amp : {0.0, 0.05}) {
      BaseForcingSpec s;
      s.family = ForcingFamily::constant_plus_decaying;
      s.a = {1.0, 0.0};
      s.epsilon = eps;
      const InterpolationConstants c = unit_constants();
      const FlowState v0 = base_initial_state(g, amp);
      const double abar2 = base_inputs(forcing_families(s, g), v0, 1.0, 4).v0_h1_sq;
      REQUIRE(abar2 <= 1.0);
      const double a0 = a0_threshold(decaying_h1_integral(s, g), abar2, c);
      const double lo = std::max(t_star(c.poincare), a0);
      for (double T : {lo * 1.0001, lo * 1.5, lo * 4.0}) {
        const BaseInputs in = base_inputs(forcing_families(s, g), v0, T, 16);
        CHECK(abar_chain(in, c).membership);
      }
    }
  }
}

TEST_CASE("A_0 can fall below Abar3^2 when Abar2^2 > 1") {
  InterpolationConstants c = unit_constants();
  c.poincare.c_1 = 0.5;
  c.c_2 = 0.1;
  BaseInputs in = zero_inputs(1.0);
  in.v0_h1_sq = 3.0;
  CHECK(a0_threshold(0.0, 3.0, c) < abar_chain(in, c).abar3_sq);
}

TEST_CASE("membership of the periodic forcing example") {
  PeriodicGrid g(2 * pi, 2, 16);
  BaseForcingSpec s;
  s.family = ForcingFamily::periodic_decaying;
  s.epsilon = 0.3;
  const InterpolationConstants c = unit_constants();
  const double a0 = a0_threshold(decaying_h1_integral(s, g), 0.0, c);
  const double T = std::max(t_star(c.poincare), a0) * 1.01;
  const Forcing f = forcing_families(s, g, T);
  CHECK(f.window_integral(0.0, T, ForcingNorm::h1) == f.window_integral(7 * T, 8 * T, ForcingNorm::h1));
  const BaseInputs in = base_inputs(f, FlowState::zero(g, Role::base2d), T, 16);
  CHECK(in.f_h1.value == doctest::Approx(g.L * f.window_integral(0.0, T, ForcingNorm::h1)));
  const AbarChain ab = abar_chain(in, c);
  CHECK(ab.abar3_sq < T);
  CHECK(ab.membership);
}
