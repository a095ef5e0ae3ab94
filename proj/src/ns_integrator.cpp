#include "nsstab/ns_integrator.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace nsstab {

const char* to_string(Scheme s) {
  switch (s) {
    case Scheme::if_ab2: return "if_ab2";
    case Scheme::if_rk3: return "if_rk3";
  }
  return "?";
}

const char* to_string(Role r) {
  switch (r) {
    case Role::base2d: return "base2d";
    case Role::full3d: return "full3d";
    case Role::perturbation: return "perturbation";
  }
  return "?";
}

void SolverConfig::validate() const {
  if (!(nu > 0.0)) throw InvalidInput("solver: nu must be positive");
  if (!(dt > 0.0)) throw InvalidInput("solver: dt must be positive");
  if (!(t_end >= 0.0) || !std::isfinite(t_end)) throw InvalidInput("solver: t_end must be finite and nonnegative");
  if (!(cfl_max > 0.0)) throw InvalidInput("solver: cfl_max must be positive");
}

FlowState FlowState::from_velocity(const SpectralField& velocity, Role role, double t) {
  const int want_dim = role == Role::base2d ? 2 : 3;
  if (velocity.grid().dim != want_dim || velocity.components() != want_dim)
    throw InvalidInput(std::string("FlowState: velocity shape does not match role ") + to_string(role));
  FlowState s;
  s.t = t;
  s.role = role;
  s.mean = nsstab::mean(velocity);
  s.u_bar = leray_project(subtract_mean(velocity));
  s.u_bar.mark_mean_free(true);
  return s;
}

FlowState FlowState::zero(const PeriodicGrid& grid, Role role, double t) {
  return from_velocity(SpectralField(grid, grid.dim), role, t);
}

SpectralField FlowState::velocity() const { return with_mean(u_bar, mean); }

const FlowState& Trajectory::snapshot_near(double t) const {
  if (snapshots.empty()) throw InvalidInput("trajectory: no snapshots stored");
  auto best = snapshots.begin();
  for (auto it = snapshots.begin(); it != snapshots.end(); ++it)
    if (std::abs(it->t - t) < std::abs(best->t - t)) best = it;
  return *best;
}

MeanVector mean_ode_step(const MeanVector& m, const Forcing& forcing, double t0, double t1) {
  MeanVector inc = forcing.mean_integral(t0, t1);
  if (inc.size() != m.size()) throw InvalidInput("mean_ode_step: forcing and mean have different lengths");
  MeanVector out = m;
  for (std::size_t c = 0; c < out.size(); ++c) out[c] += inc[c];
  return out;
}

namespace {

using Vec3 = std::array<double, 3>;

// Advection sum_j a_j(x) G_{i j}(x), G stored as dim x dim gradient samples.
void accumulate_advection(const double* const* a, int a_comps, const PhysicalField& grad, int grad_dim,
                          int out_comps, std::size_t n, std::size_t grad_period, PhysicalField& out) {
  for (int i = 0; i < std::min(out_comps, grad_dim); ++i) {
    double* dst = out.component(i).data();
    for (int j = 0; j < std::min(a_comps, grad_dim); ++j) {
      const double* aj = a[j];
      const double* gij = grad.component(i * grad_dim + j).data();
      for (std::size_t p = 0; p < n; ++p) dst[p] += aj[p] * gij[p % grad_period];
    }
  }
}

double max_magnitude(const std::vector<const double*>& comps, std::size_t n) {
  double worst = 0.0;
  for (std::size_t p = 0; p < n; ++p) {
    double s = 0.0;
    for (const double* c : comps) s += c[p] * c[p];
    worst = std::max(worst, s);
  }
  return std::sqrt(worst);
}

struct RhsOut {
  SpectralField n;  // projected explicit right side, forcing included
  SpectralField f;  // projected forcing part of n
  double gradp_sq = 0.0;
  double max_speed = 0.0;
  double grad_l3 = 0.0;
  double forcing_inner = 0.0;
};

// Splits the unprojected right side, records the pressure gradient and forcing work.
void finish_rhs(SpectralField term, const SpectralField& forcing_bar, const SpectralField& u, bool do_dealias,
                RhsOut& out) {
  if (do_dealias) term = dealias(term);
  for (int c = 0; c < term.components(); ++c) term.mutable_component(c)[0] = Complex{};
  out.gradp_sq = sobolev_norm_sq(gradient_part(term), 0);
  out.n = leray_project(term);
  out.n.mark_mean_free(true);
  out.forcing_inner = inner_product(forcing_bar, u);
  out.f = leray_project(forcing_bar);
  for (int c = 0; c < out.f.components(); ++c) out.f.mutable_component(c)[0] = Complex{};
}

SpectralField forcing_bar(const Forcing& f, double t, const PeriodicGrid& grid, int comps, bool do_dealias) {
  if (f.is_zero()) return SpectralField(grid, comps);
  SpectralField fb = f.mean_free_at(t);
  if (!(fb.grid() == grid) || fb.components() != comps)
    throw InvalidInput("solver: forcing grid does not match the state grid");
  return do_dealias ? dealias(fb) : fb;
}

// Mean velocity of one system, advanced in closed form from its forcing.
struct MeanTrack {
  MeanVector m;
  const Forcing* f = nullptr;
  double t = 0.0;

  [[nodiscard]] MeanVector at(double t1) const { return t1 == t ? m : mean_ode_step(m, *f, t, t1); }
  // int_t^{t1} m(s) ds
  [[nodiscard]] Vec3 displacement(double t1) const {
    Vec3 X{};
    MeanVector mom = f->mean_moment(t, t1);
    for (std::size_t c = 0; c < m.size(); ++c) X[c] = m[c] * (t1 - t) + mom[c];
    return X;
  }
  void advance(double t1) {
    m = at(t1);
    t = t1;
  }
};

Vec3 operator+(Vec3 a, const Vec3& b) {
  for (int i = 0; i < 3; ++i) a[i] += b[i];
  return a;
}
Vec3 operator-(Vec3 a, const Vec3& b) {
  for (int i = 0; i < 3; ++i) a[i] -= b[i];
  return a;
}

// field <- E * field with E = exp(-nu |k|^2 h - i k . X); Nyquist directions carry no phase.
void apply_factor(SpectralField& field, double nu, double h, const Vec3& X) {
  const GridTables& t = tables(field.grid());
  const std::size_t n = field.slots();
  std::vector<Complex> factor(n);
  for (std::size_t s = 0; s < n; ++s) {
    double phase = 0.0;
    if (!(t.nyquist[s] & 1u)) phase += t.k1[s] * X[0];
    if (!(t.nyquist[s] & 2u)) phase += t.k2[s] * X[1];
    if (!(t.nyquist[s] & 4u)) phase += t.k3[s] * X[2];
    factor[s] = std::exp(-nu * t.k_sq[s] * h) * Complex(std::cos(phase), -std::sin(phase));
  }
  const bool mf = field.mean_free(), sol = field.solenoidal();
  for (int c = 0; c < field.components(); ++c) {
    auto d = field.mutable_component(c);
    for (std::size_t s = 0; s < n; ++s) d[s] *= factor[s];
  }
  field.mark_mean_free(mf);
  field.mark_solenoidal(sol);
}

// One integrating-factor system (base2d or full3d), or the coupled pair when
// `pair` is set: block 0 is then the 2D base flow and block 1 the perturbation.
class Engine {
 public:
  Engine(const SolverConfig& cfg, bool pair) : cfg_(cfg), pair_(pair) {}

  struct Block {
    SpectralField u;
    const Forcing* forcing = nullptr;
    std::vector<int> advected_by;  // indices into tracks_
    StepHistory hist;
  };

  void add_track(MeanVector m, const Forcing* f, double t) { tracks_.push_back(MeanTrack{std::move(m), f, t}); }
  void add_block(SpectralField u, const Forcing* f, std::vector<int> advected_by) {
    blocks_.push_back(Block{std::move(u), f, std::move(advected_by), {}});
  }

  std::vector<Block>& blocks() { return blocks_; }
  std::vector<MeanTrack>& tracks() { return tracks_; }

  // Mean advecting block b at time t, padded to three components.
  Vec3 advecting_mean(std::size_t b, double t) const {
    Vec3 m{};
    for (int k : blocks_[b].advected_by) {
      MeanVector v = tracks_[static_cast<std::size_t>(k)].at(t);
      for (std::size_t c = 0; c < v.size(); ++c) m[c] += v[c];
    }
    return m;
  }

  // int_{track.t}^{t1} of the advecting mean of block b.
  Vec3 displacement(std::size_t b, double t1) const {
    Vec3 X{};
    for (int k : blocks_[b].advected_by) X = X + tracks_[static_cast<std::size_t>(k)].displacement(t1);
    return X;
  }

  std::vector<RhsOut> rhs(double t, const std::vector<SpectralField>& u) const {
    std::vector<RhsOut> out(u.size());
    if (!pair_) {
      single_rhs(t, u[0], *blocks_[0].forcing, out[0]);
      return out;
    }
    PhysicalField base_phys, base_grad;
    single_rhs(t, u[0], *blocks_[0].forcing, out[0], &base_phys, &base_grad);
    pert_rhs(t, u[1], base_phys, base_grad, out[1]);
    return out;
  }

  // Advances every block and track by h. `now` is the right side at the current state.
  void advance(double h, std::vector<RhsOut> now) {
    const double t0 = tracks_.front().t;
    const std::size_t nb = blocks_.size();
    for (std::size_t b = 0; b < nb; ++b) check_cfl(h, now[b].max_speed, blocks_[b].u.grid());

    const bool ab2 = cfg_.scheme == Scheme::if_ab2 &&
                     std::all_of(blocks_.begin(), blocks_.end(), [&](const Block& bl) {
                       return bl.hist.valid && std::abs(bl.hist.h_prev - h) <= 1e-12 * h;
                     });
    std::vector<Vec3> disp(nb);
    for (std::size_t b = 0; b < nb; ++b) disp[b] = displacement(b, t0 + h);

    // The history keeps the advective part only; AB2 integrates the forcing,
    // which is known in closed form, by Simpson's rule through the factor.
    for (std::size_t b = 0; b < nb; ++b) now[b].n.axpy(-1.0, now[b].f);
    if (ab2) {
      const double tm = t0 + 0.5 * h, t1 = t0 + h;
      for (std::size_t b = 0; b < nb; ++b) {
        Block& bl = blocks_[b];
        SpectralField next = bl.u;
        next.axpy(1.5 * h, now[b].n);
        next.axpy(h / 6.0, now[b].f);
        apply_factor(next, cfg_.nu, h, disp[b]);
        SpectralField old = bl.hist.n_prev;
        apply_factor(old, cfg_.nu, 2.0 * h, disp[b] + bl.hist.disp_prev);
        next.axpy(-0.5 * h, old);
        if (!bl.forcing->is_zero()) {
          const PeriodicGrid& g = bl.u.grid();
          const int comps = bl.u.components();
          SpectralField fm = projected_forcing(*bl.forcing, tm, g, comps);
          apply_factor(fm, cfg_.nu, t1 - tm, disp[b] - displacement(b, tm));
          next.axpy(4.0 * h / 6.0, fm);
          next.axpy(h / 6.0, projected_forcing(*bl.forcing, t1, g, comps));
        }
        bl.u = std::move(next);
      }
    } else {
      std::vector<RhsOut> full(nb);
      for (std::size_t b = 0; b < nb; ++b) {
        full[b].n = now[b].n;
        full[b].n += now[b].f;
      }
      rk3(t0, h, full);
    }
    for (std::size_t b = 0; b < nb; ++b) {
      Block& bl = blocks_[b];
      bl.hist.valid = true;
      bl.hist.n_prev = std::move(now[b].n);
      bl.hist.disp_prev = disp[b];
      bl.hist.h_prev = h;
      bl.u = leray_project(subtract_mean(bl.u));
      bl.u.mark_mean_free(true);
      const double e = sobolev_norm_sq(bl.u, 0);
      if (!std::isfinite(e))
        throw SolverAbort("solver: non-finite state at t = " + std::to_string(t0 + h));
    }
    for (auto& tr : tracks_) tr.advance(t0 + h);
  }

  double time() const { return tracks_.front().t; }
  const SolverConfig& config() const { return cfg_; }

 private:
  SpectralField projected_forcing(const Forcing& f, double t, const PeriodicGrid& g, int comps) const {
    SpectralField p = leray_project(forcing_bar(f, t, g, comps, cfg_.dealias));
    for (int c = 0; c < p.components(); ++c) p.mutable_component(c)[0] = Complex{};
    return p;
  }

  void check_cfl(double h, double speed, const PeriodicGrid& g) const {
    if (speed <= 0.0) return;
    const double limit = cfg_.cfl_max * g.L / (g.N * speed);
    if (h > limit)
      throw SolverAbort("solver: CFL limit exceeded at t = " + std::to_string(time()) + " (dt " +
                            std::to_string(h) + " > " + std::to_string(limit) + ")",
                        0.9 * limit);
  }

  // Low-storage three-stage scheme in integrating-factor form; every factor
  // runs forward in time.
  void rk3(double t0, double h, std::vector<RhsOut>& stage0) {
    static constexpr double gamma[3] = {8.0 / 15.0, 5.0 / 12.0, 3.0 / 4.0};
    static constexpr double zeta[3] = {0.0, -17.0 / 60.0, -5.0 / 12.0};
    static constexpr double node[4] = {0.0, 8.0 / 15.0, 2.0 / 3.0, 1.0};
    const std::size_t nb = blocks_.size();
    std::vector<SpectralField> u(nb);
    for (std::size_t b = 0; b < nb; ++b) u[b] = blocks_[b].u;
    std::vector<SpectralField> n_prev(nb);
    std::vector<Vec3> X_prev(nb);  // displacement from t0 to the previous stage node
    std::vector<Vec3> X_cur(nb);   // displacement from t0 to the current stage node
    for (int j = 0; j < 3; ++j) {
      const double tj = t0 + node[j] * h;
      const double tj1 = t0 + node[j + 1] * h;
      std::vector<RhsOut> nj;
      if (j == 0) {
        nj.resize(nb);
        for (std::size_t b = 0; b < nb; ++b) nj[b].n = stage0[b].n;
      } else {
        nj = rhs(tj, u);
      }
      for (std::size_t b = 0; b < nb; ++b) {
        const Vec3 X_next = displacement(b, tj1);
        SpectralField next = u[b];
        next.axpy(h * gamma[j], nj[b].n);
        apply_factor(next, cfg_.nu, tj1 - tj, X_next - X_cur[b]);
        if (j > 0) {
          SpectralField carry = n_prev[b];
          apply_factor(carry, cfg_.nu, tj1 - (t0 + node[j - 1] * h), X_next - X_prev[b]);
          next.axpy(h * zeta[j], carry);
        }
        u[b] = std::move(next);
        n_prev[b] = std::move(nj[b].n);
        X_prev[b] = X_cur[b];
        X_cur[b] = X_next;
      }
    }
    for (std::size_t b = 0; b < nb; ++b) blocks_[b].u = std::move(u[b]);
  }

  void single_rhs(double t, const SpectralField& u, const Forcing& f, RhsOut& out,
                  PhysicalField* keep_phys = nullptr, PhysicalField* keep_grad = nullptr) const {
    const PeriodicGrid& g = u.grid();
    const int d = g.dim;
    PhysicalField U = transform_backward(u);
    PhysicalField G = transform_backward(gradient(u));
    const std::size_t n = g.physical_size();
    std::vector<const double*> a(static_cast<std::size_t>(d));
    for (int j = 0; j < d; ++j) a[static_cast<std::size_t>(j)] = U.component(j).data();
    PhysicalField adv(g, d);
    accumulate_advection(a.data(), d, G, d, d, n, n, adv);
    for (auto& v : adv.data) v = -v;
    SpectralField fb = forcing_bar(f, t, g, d, cfg_.dealias);
    SpectralField term = transform_forward(adv);
    term += fb;
    finish_rhs(std::move(term), fb, u, cfg_.dealias, out);
    out.max_speed = max_magnitude(a, n);
    if (d == 2 || !pair_) out.grad_l3 = lp_norm(G, 3);
    if (keep_phys) *keep_phys = std::move(U);
    if (keep_grad) *keep_grad = std::move(G);
  }

  // -(w.grad)u_bar - ((u_bar + m_u).grad)v_s_bar with w = u_bar + v_s_bar, plus g_bar.
  void pert_rhs(double t, const SpectralField& u, const PhysicalField& base_phys, const PhysicalField& base_grad,
                RhsOut& out) const {
    const PeriodicGrid& g = u.grid();
    const std::size_t n = g.physical_size();
    const std::size_t plane = base_phys.grid.physical_size();
    PhysicalField U = transform_backward(u);
    PhysicalField G = transform_backward(gradient(u));
    const Vec3 mu = perturbation_mean(t);

    PhysicalField w(g, 3);
    for (int j = 0; j < 3; ++j) {
      auto dst = w.component(j);
      auto src = U.component(j);
      std::copy(src.begin(), src.end(), dst.begin());
      if (j < 2) {
        const double* b = base_phys.component(j).data();
        for (std::size_t p = 0; p < n; ++p) dst[p] += b[p % plane];
      }
    }
    std::vector<const double*> wa{w.component(0).data(), w.component(1).data(), w.component(2).data()};
    PhysicalField adv(g, 3);
    accumulate_advection(wa.data(), 3, G, 3, 3, n, n, adv);

    PhysicalField um(g, 2);
    for (int j = 0; j < 2; ++j) {
      auto dst = um.component(j);
      auto src = U.component(j);
      for (std::size_t p = 0; p < n; ++p) dst[p] = src[p] + mu[static_cast<std::size_t>(j)];
    }
    std::vector<const double*> ua{um.component(0).data(), um.component(1).data()};
    accumulate_advection(ua.data(), 2, base_grad, 2, 3, n, plane, adv);
    for (auto& v : adv.data) v = -v;

    SpectralField gb = forcing_bar(*blocks_[1].forcing, t, g, 3, cfg_.dealias);
    SpectralField term = transform_forward(adv);
    term += gb;
    finish_rhs(std::move(term), gb, u, cfg_.dealias, out);
    out.max_speed = max_magnitude(wa, n);
  }

  Vec3 perturbation_mean(double t) const {
    Vec3 m{};
    MeanVector v = tracks_.back().at(t);
    for (std::size_t c = 0; c < v.size(); ++c) m[c] = v[c];
    return m;
  }

  SolverConfig cfg_;
  bool pair_;
  std::vector<Block> blocks_;
  std::vector<MeanTrack> tracks_;
};

NormSample make_sample(double t, const SpectralField& u, const RhsOut& r, const Vec3& adv_mean, double nu,
                       const MeanVector& m, double scale, double l3_scale) {
  NormSample s;
  s.t = t;
  for (int k = 0; k < 4; ++k) s.h_sq[static_cast<std::size_t>(k)] = scale * sobolev_norm_sq(u, k);
  s.grad_sq = scale * derivative_seminorm_sq(u, 1);
  s.hess_sq = scale * derivative_seminorm_sq(u, 2);
  // d/dt u_bar = -nu |k|^2 u - i (k . m) u + N
  const GridTables& tb = tables(u.grid());
  SpectralField du = r.n;
  for (int c = 0; c < u.components(); ++c) {
    auto src = u.component(c);
    auto dst = du.mutable_component(c);
    for (std::size_t p = 0; p < src.size(); ++p) {
      double kx = 0.0;
      if (!(tb.nyquist[p] & 1u)) kx += tb.k1[p] * adv_mean[0];
      if (!(tb.nyquist[p] & 2u)) kx += tb.k2[p] * adv_mean[1];
      if (!(tb.nyquist[p] & 4u)) kx += tb.k3[p] * adv_mean[2];
      dst[p] += Complex(-nu * tb.k_sq[p], -kx) * src[p];
    }
  }
  s.dt_sq = scale * sobolev_norm_sq(du, 0);
  s.gradp_sq = scale * r.gradp_sq;
  s.forcing_inner = scale * r.forcing_inner;
  s.grad_l3 = l3_scale * r.grad_l3;
  s.max_speed = r.max_speed;
  s.mean = m;
  return s;
}

struct RunPlan {
  long steps = 0;
  double h = 0.0;
  std::set<long> snapshot_steps;
};

RunPlan plan_run(double t0, const SolverConfig& cfg, const EvolveOptions& opt) {
  cfg.validate();
  const double span = cfg.t_end - t0;
  if (span < 0.0) throw InvalidInput("solver: t_end precedes the initial time");
  if (opt.window > 0.0) {
    if (cfg.dt > opt.window) throw InvalidInput("solver: dt exceeds the window length T");
    if (cfg.t_end < opt.window) throw InvalidInput("solver: t_end is shorter than one window T");
  }
  RunPlan p;
  p.steps = span == 0.0 ? 0 : static_cast<long>(std::ceil(span / cfg.dt - 1e-9));
  p.h = p.steps > 0 ? span / static_cast<double>(p.steps) : cfg.dt;
  auto snap = [&](double t) {
    if (t < t0 - 1e-12 || t > cfg.t_end + 1e-12) return;
    p.snapshot_steps.insert(std::clamp(std::lround((t - t0) / p.h), 0L, p.steps));
  };
  snap(t0);
  snap(cfg.t_end);
  for (double t : opt.snapshot_times) snap(t);
  if (opt.window > 0.0)
    for (long k = 0; k * opt.window <= cfg.t_end + 1e-9 * opt.window; ++k) snap(k * opt.window);
  return p;
}

Trajectory new_trajectory(Role role, const SolverConfig& cfg, double h, double scale) {
  Trajectory tr;
  tr.role = role;
  tr.nu = cfg.nu;
  tr.dt = h;
  tr.measure_scale = scale;
  return tr;
}

Trajectory evolve_single(const FlowState& v0, const Forcing& forcing, const SolverConfig& cfg,
                         const EvolveOptions& opt, Role role) {
  if (v0.role != role) throw InvalidInput(std::string("evolve: initial state must have role ") + to_string(role));
  const RunPlan plan = plan_run(v0.t, cfg, opt);
  const double L = v0.u_bar.grid().L;
  const double scale = role == Role::base2d ? L : 1.0;
  const double l3_scale = role == Role::base2d ? std::cbrt(L) : 1.0;
  Trajectory tr = new_trajectory(role, cfg, plan.h, scale);

  Engine eng(cfg, false);
  eng.add_track(v0.mean, &forcing, v0.t);
  eng.add_block(cfg.dealias ? dealias(v0.u_bar) : v0.u_bar, &forcing, {0});
  try {
    for (long n = 0;; ++n) {
      const double t = eng.time();
      std::vector<SpectralField> u{eng.blocks()[0].u};
      std::vector<RhsOut> r = eng.rhs(t, u);
      const MeanVector m = eng.tracks()[0].m;
      tr.samples.push_back(make_sample(t, u[0], r[0], eng.advecting_mean(0, t), cfg.nu, m, scale, l3_scale));
      if (plan.snapshot_steps.count(n)) tr.snapshots.push_back(FlowState{t, u[0], m, role});
      if (n == plan.steps) break;
      eng.advance(plan.h, std::move(r));
    }
  } catch (const SolverAbort& e) {
    tr.aborted = true;
    tr.abort_reason = e.what();
    tr.advisory_dt = e.advisory_dt();
  }
  return tr;
}

}  // namespace

SpectralField nonlinear_term(const SpectralField& u, const SpectralField& advecting) {
  require_same_grid(u, advecting, "nonlinear_term");
  const PeriodicGrid& g = u.grid();
  const int d = g.dim;
  if (advecting.components() != d) throw InvalidInput("nonlinear_term: advecting field needs dim components");
  PhysicalField W = transform_backward(advecting);
  PhysicalField G = transform_backward(gradient(u));
  const std::size_t n = g.physical_size();
  std::vector<const double*> a(static_cast<std::size_t>(d));
  for (int j = 0; j < d; ++j) a[static_cast<std::size_t>(j)] = W.component(j).data();
  PhysicalField adv(g, u.components());
  // (w.grad) u_i = sum_j w_j d_j u_i; gradient() lays out u_i's derivatives at i * dim + j.
  for (int i = 0; i < u.components(); ++i) {
    double* dst = adv.component(i).data();
    for (int j = 0; j < d; ++j) {
      const double* gij = G.component(i * d + j).data();
      for (std::size_t p = 0; p < n; ++p) dst[p] -= a[static_cast<std::size_t>(j)][p] * gij[p];
    }
  }
  SpectralField out = dealias(transform_forward(adv));
  if (out.components() == d) out = leray_project(out);
  return out;
}

SpectralField perturbation_term(const SpectralField& u_bar, const MeanVector& u_mean,
                                 const SpectralField& vs_bar_2d, const MeanVector& vs_mean) {
  const PeriodicGrid& g = u_bar.grid();
  if (g.dim != 3 || vs_bar_2d.grid().dim != 2) throw InvalidInput("perturbation_term: expects 3D u and 2D v_s");
  if (u_mean.size() != 3 || vs_mean.size() != 2) throw InvalidInput("perturbation_term: mean vector lengths");
  SpectralField vs = lift_2d_to_3d(vs_bar_2d, g);
  SpectralField u_full = with_mean(u_bar, u_mean);
  SpectralField w = u_full + vs;
  w = with_mean(w, MeanVector({u_mean[0] + vs_mean[0], u_mean[1] + vs_mean[1], u_mean[2]}));
  SpectralField out = nonlinear_term(u_bar, w);
  out += nonlinear_term(vs, u_full);
  out = subtract_mean(out);
  return out;
}

FlowState step(const FlowState& state, const Forcing& forcing, const SolverConfig& cfg, StepHistory* history) {
  if (state.role == Role::perturbation)
    throw InvalidInput("step: the perturbation is advanced together with its base flow (evolve_pair)");
  cfg.validate();
  Engine eng(cfg, false);
  eng.add_track(state.mean, &forcing, state.t);
  eng.add_block(cfg.dealias ? dealias(state.u_bar) : state.u_bar, &forcing, {0});
  if (history) eng.blocks()[0].hist = *history;
  std::vector<SpectralField> u{eng.blocks()[0].u};
  eng.advance(cfg.dt, eng.rhs(state.t, u));
  if (history) *history = eng.blocks()[0].hist;
  return FlowState{eng.time(), eng.blocks()[0].u, eng.tracks()[0].m, state.role};
}

Trajectory evolve_base_2d(const FlowState& v0, const Forcing& forcing, const SolverConfig& cfg,
                          const EvolveOptions& options) {
  return evolve_single(v0, forcing, cfg, options, Role::base2d);
}

Trajectory evolve_full_3d(const FlowState& v0, const Forcing& forcing, const SolverConfig& cfg,
                          const EvolveOptions& options) {
  return evolve_single(v0, forcing, cfg, options, Role::full3d);
}

PairTrajectory evolve_pair(const FlowState& base0, const Forcing& base_forcing, const FlowState& u0,
                           const Forcing& g, const SolverConfig& cfg, const EvolveOptions& options) {
  if (base0.role != Role::base2d || u0.role != Role::perturbation)
    throw InvalidInput("evolve_pair: expects a base2d state and a perturbation state");
  const PeriodicGrid& g2 = base0.u_bar.grid();
  const PeriodicGrid& g3 = u0.u_bar.grid();
  if (g2.L != g3.L || g2.N != g3.N) throw InvalidInput("evolve_pair: base and perturbation grids differ");
  if (std::abs(base0.t - u0.t) > 1e-12 * std::max(1.0, std::abs(base0.t)))
    throw InvalidInput("evolve_pair: base and perturbation start at different times");

  const RunPlan plan = plan_run(base0.t, cfg, options);
  const double L = g2.L;
  PairTrajectory out;
  out.base = new_trajectory(Role::base2d, cfg, plan.h, L);
  out.perturbation = new_trajectory(Role::perturbation, cfg, plan.h, 1.0);

  Engine eng(cfg, true);
  eng.add_track(base0.mean, &base_forcing, base0.t);
  eng.add_track(u0.mean, &g, base0.t);
  eng.add_block(cfg.dealias ? dealias(base0.u_bar) : base0.u_bar, &base_forcing, {0});
  eng.add_block(cfg.dealias ? dealias(u0.u_bar) : u0.u_bar, &g, {0, 1});
  try {
    for (long n = 0;; ++n) {
      const double t = eng.time();
      std::vector<SpectralField> u{eng.blocks()[0].u, eng.blocks()[1].u};
      std::vector<RhsOut> r = eng.rhs(t, u);
      const MeanVector ms = eng.tracks()[0].m, mu = eng.tracks()[1].m;
      out.base.samples.push_back(make_sample(t, u[0], r[0], eng.advecting_mean(0, t), cfg.nu, ms, L, std::cbrt(L)));
      out.perturbation.samples.push_back(make_sample(t, u[1], r[1], eng.advecting_mean(1, t), cfg.nu, mu, 1.0, 1.0));
      if (plan.snapshot_steps.count(n)) {
        out.base.snapshots.push_back(FlowState{t, u[0], ms, Role::base2d});
        out.perturbation.snapshots.push_back(FlowState{t, u[1], mu, Role::perturbation});
      }
      if (n == plan.steps) break;
      eng.advance(plan.h, std::move(r));
    }
  } catch (const SolverAbort& e) {
    for (Trajectory* tr : {&out.base, &out.perturbation}) {
      tr->aborted = true;
      tr->abort_reason = e.what();
      tr->advisory_dt = e.advisory_dt();
    }
  }
  return out;
}

namespace {

// Weights w_j with f'(x0) ~ sum_j w_j f(x_j): derivative of the Lagrange interpolant.
std::vector<double> derivative_weights(const std::vector<double>& x, double x0) {
  const std::size_t m = x.size();
  std::vector<double> w(m, 0.0);
  for (std::size_t j = 0; j < m; ++j) {
    double denom = 1.0;
    for (std::size_t k = 0; k < m; ++k)
      if (k != j) denom *= x[j] - x[k];
    double num = 0.0;
    for (std::size_t l = 0; l < m; ++l) {
      if (l == j) continue;
      double prod = 1.0;
      for (std::size_t k = 0; k < m; ++k)
        if (k != j && k != l) prod *= x0 - x[k];
      num += prod;
    }
    w[j] = num / denom;
  }
  return w;
}

}  // namespace

EnergyResidual energy_balance_residual(const Trajectory& tr) {
  const auto& s = tr.samples;
  const std::size_t n = s.size();
  if (n < 3) throw InvalidInput("energy_balance_residual: needs at least three samples");
  EnergyResidual out;
  // Five-point stencils (fewer for short series), centered where possible and
  // shifted inwards near the ends, so every sample gets a fourth-order derivative.
  const std::size_t width = std::min<std::size_t>(5, n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t lo = std::min(i >= width / 2 ? i - width / 2 : 0, n - width);
    std::vector<double> x(width);
    for (std::size_t j = 0; j < width; ++j) x[j] = s[lo + j].t - s[i].t;
    const std::vector<double> w = derivative_weights(x, 0.0);
    double dE = 0.0;
    for (std::size_t j = 0; j < width; ++j) dE += w[j] * 0.5 * s[lo + j].h_sq[0];
    const double r = dE + tr.nu * s[i].grad_sq - s[i].forcing_inner;
    out.t.push_back(s[i].t);
    out.r.push_back(r);
    out.max_abs = std::max(out.max_abs, std::abs(r));
  }
  return out;
}

}  // namespace nsstab
