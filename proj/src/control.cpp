#include "cgl/control.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>
#include <random>

#include "cgl/parallel.hpp"

namespace cgl {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double log10_from_ln2(double ln_sq) { return 0.5 * ln_sq / std::numbers::ln10; }

double l2_sq(const ThetaStepper& st, const CVector& u) { return std::max(0.0, u.dot(st.apply_mass(u)).real()); }

double h1_sq(const ThetaStepper& st, const CVector& u) {
  return l2_sq(st, u) + std::max(0.0, u.dot(st.apply_stiffness(u)).real());
}

double ctrl_sq(const ThetaStepper& st, const CVector& h) {
  return std::max(0.0, h.dot(st.apply_control_mass(h)).real());
}

// weights below are logarithms; samples with a vanishing field are skipped
double weighted_log10(const std::vector<double>& log_terms) { return log10_from_ln2(log_sum_exp(log_terms)); }

void zero_outside(Trajectory& h, const RVector& mask) {
  for (auto& frame : h.frames) {
    for (Eigen::Index i = 0; i < frame.size(); ++i) {
      if (mask[i] <= 0.0) frame[i] = 0.0;
    }
  }
}

double support_violation(const Trajectory& h, const RVector& mask) {
  double worst = 0.0;
  for (const auto& frame : h.frames) {
    for (Eigen::Index i = 0; i < frame.size(); ++i) {
      if (mask[i] <= 0.0) worst = std::max(worst, std::abs(frame[i]));
    }
  }
  return worst;
}

double terminal_ratio(const ThetaStepper& st, const Trajectory& y) {
  const double end = std::sqrt(l2_sq(st, y.frames.back()));
  const double start = std::sqrt(l2_sq(st, y.frames.front()));
  return start > 0.0 ? end / start : end;
}

VNormLedger ledger(const ThetaStepper& st, const NodeEnvelope& env, const Trajectory& y, const Trajectory& h,
                   const Trajectory& f) {
  const Params& p = st.params();
  const TimeGrid& grid = st.grid();
  const double s = p.s;
  std::vector<double> state, cset, clit, h2;
  double h1 = -kInf;
  for (int k = 0; k <= grid.steps; ++k) {
    const double tau = theta_weight(grid, p.theta, k);
    if (tau <= 0.0) continue;
    const double lt = std::log(tau);
    const double ly = l2_sq(st, y.frames[k]);
    if (ly > 0.0) {
      state.push_back(lt + 2.0 * s * env.phi_check[k] + std::log(ly));
      const CVector lap = st.mass_solve(st.apply_stiffness(y.frames[k]));
      const double hy = h1_sq(st, y.frames[k]);
      h2.push_back(lt + (2.0 / 3.0) * s * env.phi_hat[k] + std::log(hy + l2_sq(st, lap)));
      h1 = std::max(h1, (2.0 / 3.0) * s * env.phi_hat[k] + std::log(hy));
    }
    if (!h.frames.empty()) {
      const double lh = ctrl_sq(st, h.frames[k]);
      if (lh > 0.0) {
        const double base = lt + 2.0 * s * env.phi_check[k] + std::log(lh);
        cset.push_back(base - 3.0 * std::log(env.xi_hat[k]));
        clit.push_back(base + 6.0 * std::log(env.xi_hat[k]));
      }
    }
  }
  VNormLedger out;
  out.state = weighted_log10(state);
  out.control_set = weighted_log10(cset);
  out.control_literal = weighted_log10(clit);
  out.source = weighted_source_log10(st.ops(), p, env, f);
  out.capacity_h2 = weighted_log10(h2);
  out.capacity_h1 = log10_from_ln2(h1);
  return out;
}

}  // namespace

VariationalSystem::VariationalSystem(const ThetaStepper& stepper, const NodeEnvelope& env)
    : stepper_(&stepper),
      steps_(stepper.grid().steps),
      n_(stepper.size()),
      dt_(stepper.grid().dt()),
      theta_(stepper.params().theta) {
  require(env.log_rho.size() == steps_ + 1, "VariationalSystem: envelope does not match the time grid");
  rho_.resize(steps_ + 1);
  ctrl_gain_.resize(steps_ + 1);
  const double log_floor = std::log(stepper.params().weight_floor);
  for (int k = 0; k <= steps_; ++k) {
    rho_[k] = std::exp(env.log_rho[k]);
    ctrl_gain_[k] = k < steps_ ? std::exp(env.log_rho[k] + 3.0 * std::log(env.xi_hat[k])) : 0.0;
    if (env.log_rho[k] < log_floor) ++underflow_;
  }

  // Diagonal block n is [ρ_n X_n M^{-1} X_n^H + ρ_{n-1} B M^{-1} B^H] / Δt^2 + e_n M_ω with X_0 = M, X_n = S.
  // It is replaced by a^2 K M^{-1} K^H / Δt^2, a^2 = ρ_n + ρ_{n-1}, K = (ρ_n X_n + ρ_{n-1} B) / a^2 + γ M_ω.
  const CSpMat M = stepper.ops().mass().cast<Complex>();
  const CSpMat A = (Complex(1.0, stepper.params().alpha) *
                    stepper.ops().stiffness(stepper.params().a, stepper.params().b).cast<Complex>())
                       .eval();
  const CSpMat Mc = stepper.ops().mass_control.cast<Complex>();
  auto omega = [&](int k) { return (k >= 1 ? theta_ : 0.0) + (k <= steps_ - 1 ? 1.0 - theta_ : 0.0); };
  std::vector<std::pair<double, double>> keys;
  blocks_.resize(steps_ + 1);
  for (int n = 0; n <= steps_; ++n) {
    const double rn = n < steps_ ? rho_[n] : 0.0;
    const double rp = n >= 1 ? rho_[n - 1] : 0.0;
    const double a2 = rn + rp;
    if (!(a2 > 0.0)) continue;
    double e = 0.0;
    if (n >= 1 && omega(n) > 0.0) e += theta_ * theta_ * ctrl_gain_[n] / omega(n);
    if (n >= 1 && omega(n - 1) > 0.0) e += (1.0 - theta_) * (1.0 - theta_) * ctrl_gain_[n - 1] / omega(n - 1);
    const double beta = n == 0 ? 0.0 : (rn * theta_ - rp * (1.0 - theta_)) / a2;
    const double gamma = dt_ * std::sqrt(e / a2);
    const std::pair<double, double> key{beta, gamma};
    auto found = std::find(keys.begin(), keys.end(), key);
    int idx = static_cast<int>(found - keys.begin());
    if (found == keys.end()) {
      CSpMat K = M + Complex(beta * dt_) * A + Complex(gamma) * Mc;
      K.makeCompressed();
      auto lu = std::make_unique<Eigen::SparseLU<CSpMat>>();
      lu->compute(K);
      if (lu->info() != Eigen::Success) throw NumericalError("VariationalSystem: preconditioner factorization failed");
      factors_.push_back(std::move(lu));
      keys.push_back(key);
    }
    blocks_[n] = {dt_ * dt_ / a2, idx};
  }
}

SpaceTimeVector VariationalSystem::precondition(const SpaceTimeVector& r) const {
  SpaceTimeVector out = SpaceTimeVector::Zero(r.size());
  const ThetaStepper& st = *stepper_;
  for (int n = 0; n <= steps_; ++n) {
    const BlockFactor& bf = blocks_[n];
    if (bf.factor < 0) continue;
    const auto& lu = *factors_[bf.factor];
    const CVector y = lu.solve(r.segment(static_cast<Eigen::Index>(n) * n_, n_));
    const CVector w = st.apply_mass(y).conjugate();
    out.segment(static_cast<Eigen::Index>(n) * n_, n_) = bf.scale * CVector(lu.solve(w)).conjugate();
  }
  return out;
}

CVector VariationalSystem::adjoint_residual(const SpaceTimeVector& z, int n) const {
  const ThetaStepper& st = *stepper_;
  CVector r = -st.apply_BH(z.segment(static_cast<Eigen::Index>(n + 1) * n_, n_));
  const CVector zn = z.segment(static_cast<Eigen::Index>(n) * n_, n_);
  r += n == 0 ? st.apply_mass(zn) : st.apply_SH(zn);
  return r / dt_;
}

SpaceTimeVector VariationalSystem::apply(const SpaceTimeVector& z) const {
  require(z.size() == size(), "VariationalSystem::apply: size mismatch");
  const ThetaStepper& st = *stepper_;
  std::vector<CVector> Y(steps_ + 1, CVector::Zero(n_));
  for (int n = 0; n < steps_; ++n) {
    if (rho_[n] > 0.0) Y[n] = rho_[n] * st.mass_solve(adjoint_residual(z, n));
  }
  const Trajectory H = control_part(z);
  SpaceTimeVector out(size());
  out.segment(0, n_) = st.apply_mass(Y[0]) / dt_;
  for (int n = 0; n < steps_; ++n) {
    CVector row = (st.apply_S(Y[n + 1]) - st.apply_B(Y[n])) / dt_;
    row += st.apply_control_mass(theta_ * H.frames[n + 1] + (1.0 - theta_) * H.frames[n]);
    out.segment(static_cast<Eigen::Index>(n + 1) * n_, n_) = row;
  }
  return out;
}

SpaceTimeVector VariationalSystem::rhs(const CVector& u0, const Trajectory& f) const {
  require(u0.size() == n_, "VariationalSystem::rhs: initial data size mismatch");
  const ThetaStepper& st = *stepper_;
  static const Trajectory none;
  SpaceTimeVector b(size());
  b.segment(0, n_) = st.apply_mass(u0) / dt_;
  CVector prev = st.forcing_at(f, none, 0);
  for (int n = 0; n < steps_; ++n) {
    CVector next = st.forcing_at(f, none, n + 1);
    b.segment(static_cast<Eigen::Index>(n + 1) * n_, n_) = theta_ * next + (1.0 - theta_) * prev;
    prev = std::move(next);
  }
  return b;
}

Trajectory VariationalSystem::as_trajectory(const SpaceTimeVector& z, TrajectoryKind kind) const {
  Trajectory t;
  t.grid = stepper_->grid();
  t.kind = kind;
  t.frames.resize(steps_ + 1);
  for (int k = 0; k <= steps_; ++k) t.frames[k] = z.segment(static_cast<Eigen::Index>(k) * n_, n_);
  return t;
}

Trajectory VariationalSystem::state(const SpaceTimeVector& z) const {
  Trajectory y = Trajectory::zeros(stepper_->grid(), n_, TrajectoryKind::forward);
  for (int n = 0; n < steps_; ++n) {
    if (rho_[n] > 0.0) y.frames[n] = rho_[n] * stepper_->mass_solve(adjoint_residual(z, n));
  }
  return y;
}

Trajectory VariationalSystem::control_part(const SpaceTimeVector& z) const {
  Trajectory h = Trajectory::zeros(stepper_->grid(), n_, TrajectoryKind::control);
  for (int k = 0; k < steps_; ++k) {
    if (ctrl_gain_[k] <= 0.0) continue;
    double w = 0.0;
    CVector avg = CVector::Zero(n_);
    if (k >= 1) {
      avg += theta_ * z.segment(static_cast<Eigen::Index>(k) * n_, n_);
      w += theta_;
    }
    if (k <= steps_ - 1) {
      avg += (1.0 - theta_) * z.segment(static_cast<Eigen::Index>(k + 1) * n_, n_);
      w += 1.0 - theta_;
    }
    if (w > 0.0) h.frames[k] = (ctrl_gain_[k] / w) * avg;
  }
  return h;
}

double weighted_source_log10(const OperatorSet& ops, const Params& params, const NodeEnvelope& env,
                             const Trajectory& f) {
  if (f.frames.empty()) return -kInf;
  std::vector<double> terms;
  const TimeGrid& grid = f.grid;
  require(env.phi_hat.size() == grid.steps + 1, "weighted_source_log10: envelope does not match the time grid");
  for (int k = 0; k <= grid.steps; ++k) {
    const double tau = theta_weight(grid, params.theta, k);
    if (tau <= 0.0) continue;
    CVector fs = f.frames[k];
    double sq = energy_product(ops, fs, fs).real();
    if (!f.surface_frames.empty()) {
      // replace the trace part by f_Γ
      const CVector& g = f.surface_frames[k];
      sq += (g.dot(ops.mass_surface.cast<Complex>() * g) - fs.dot(ops.mass_surface.cast<Complex>() * fs)).real();
    }
    if (!(sq > 0.0)) continue;
    if (!std::isfinite(env.phi_hat[k])) return kInf;
    terms.push_back(std::log(tau) + 2.0 * params.s * env.phi_hat[k] - 3.0 * std::log(env.xi_check[k]) +
                    std::log(sq));
  }
  return weighted_log10(terms);
}

double control_norm(const ThetaStepper& stepper, const Trajectory& h) {
  if (h.frames.empty()) return 0.0;
  double sum = 0.0;
  for (int k = 0; k < static_cast<int>(h.frames.size()); ++k) {
    sum += theta_weight(h.grid, stepper.params().theta, k) * ctrl_sq(stepper, h.frames[k]);
  }
  return std::sqrt(sum);
}

namespace {

CgReport solve_system(const VariationalSystem& sys, const Params& p, const SpaceTimeVector& b, SpaceTimeVector& z,
                      int maxit) {
  const auto inner = [](const CVector& x, const CVector& y) { return x.dot(y).real(); };
  return conjugate_gradient([&](const CVector& v) { return sys.apply(v); }, inner, b, z, p.cg_tol, maxit,
                            [&](const CVector& r) { return sys.precondition(r); });
}

ControlResult fi_result(const VariationalSystem& sys, const ThetaStepper& stepper, const NodeEnvelope& env,
                        const CVector& u0, const Trajectory& f, const SpaceTimeVector& z, const CgReport& cg) {
  ControlResult res;
  res.cg_iters = cg.iterations;
  res.cg_residual = cg.relative_residual;
  res.converged = cg.converged;
  res.underflow_nodes = sys.underflow_nodes();
  res.z_star = sys.as_trajectory(z, TrajectoryKind::adjoint);
  res.y_star = sys.state(z);
  res.h = sys.control_part(z);
  for (auto& frame : res.h.frames) frame = -frame;
  zero_outside(res.h, stepper.ops().control_mask);
  res.y = solve_forward(stepper, u0, f, res.h);
  res.terminal_ratio = terminal_ratio(stepper, res.y);
  res.control_norm = control_norm(stepper, res.h);
  res.support_violation = support_violation(res.h, stepper.ops().control_mask);
  res.weighted_norms = ledger(stepper, env, res.y_star, res.h, f);
  return res;
}

void require_admissible(const ThetaStepper& stepper, const NodeEnvelope& env, const Trajectory& f) {
  const double src = weighted_source_log10(stepper.ops(), stepper.params(), env, f);
  require(src != kInf && !std::isnan(src),
          "solve_fi_variational: source is not admissible (weighted norm is infinite; it must vanish at t = T)");
}

}  // namespace

ControlResult solve_fi_variational(const ThetaStepper& stepper, const NodeEnvelope& env, const CVector& u0,
                                   const Trajectory& f) {
  require_admissible(stepper, env, f);
  require(std::isfinite(u0.norm()), "solve_fi_variational: non-finite initial data");
  const VariationalSystem sys(stepper, env);
  SpaceTimeVector z = SpaceTimeVector::Zero(sys.size());
  const CgReport cg = solve_system(sys, stepper.params(), sys.rhs(u0, f), z, stepper.params().cg_maxit);
  return fi_result(sys, stepper, env, u0, f, z, cg);
}

ControlResult solve_fi_variational(const OperatorSet& ops, const Params& params, const TimeGrid& grid, double sup,
                                   const CVector& u0, const Trajectory& f) {
  const ThetaStepper stepper(ops, params, grid);
  return solve_fi_variational(stepper, node_envelope(params, grid, sup), u0, f);
}

ControlResult penalized_hum(const ThetaStepper& stepper, const CVector& u0, const Trajectory& f, double eps_penalty) {
  require(eps_penalty > 0.0, "penalized_hum: eps_penalty must be positive");
  const Params& p = stepper.params();
  const TimeGrid& grid = stepper.grid();
  const int n = stepper.size();
  static const Trajectory none;
  const Trajectory g0 = Trajectory::zeros(grid, n, TrajectoryKind::source);
  const CVector zero = CVector::Zero(n);

  auto controls_of = [&](const CVector& zT) {
    const Trajectory z = solve_adjoint(stepper, zT, g0);
    Trajectory h = Trajectory::zeros(grid, n, TrajectoryKind::control);
    for (int k = 0; k <= grid.steps; ++k) h.frames[k] = multiplier_average(z, p.theta, k);
    return std::make_pair(z, h);
  };
  auto gramian = [&](const CVector& zT) {
    const Trajectory h = controls_of(zT).second;
    const Trajectory y = solve_forward(stepper, zero, none, h);
    return CVector(y.frames.back() + eps_penalty * zT);
  };
  const auto inner = [&](const CVector& x, const CVector& y) { return x.dot(stepper.apply_mass(y)).real(); };

  const Trajectory free = solve_forward(stepper, u0, f, none);
  const CVector b = free.frames.back();
  CVector zT = CVector::Zero(n);
  const CgReport cg = conjugate_gradient(gramian, inner, b, zT, p.cg_tol, p.cg_maxit);

  ControlResult res;
  res.cg_iters = cg.iterations;
  res.cg_residual = cg.relative_residual;
  res.converged = cg.converged;
  auto [z, h] = controls_of(zT);
  for (auto& frame : h.frames) frame = -frame;
  zero_outside(h, stepper.ops().control_mask);
  res.z_star = std::move(z);
  res.h = std::move(h);
  res.y = solve_forward(stepper, u0, f, res.h);
  res.terminal_ratio = terminal_ratio(stepper, res.y);
  res.control_norm = control_norm(stepper, res.h);
  res.support_violation = support_violation(res.h, stepper.ops().control_mask);
  return res;
}

std::vector<AdjointSample> adjoint_samples(int count, std::uint64_t seed, const DiskGeometry& geom) {
  require(count >= 0, "adjoint_samples: negative count");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  const double R = geom.R;
  auto mode = [&] {
    Mode m;
    m.amplitude = Complex(normal(rng), normal(rng));
    const double r = 0.8 * R * std::sqrt(unit(rng));
    const double a = 2.0 * std::numbers::pi * unit(rng);
    m.center = Point(r * std::cos(a), r * std::sin(a));
    m.beta = (0.5 + 2.0 * unit(rng)) / (R * R);
    m.wave = Point(4.0 * unit(rng) - 2.0, 4.0 * unit(rng) - 2.0) / R;
    return m;
  };
  std::vector<AdjointSample> out(count);
  for (auto& s : out) {
    s.terminal.time_power = 0;
    const int nt = 1 + static_cast<int>(unit(rng) * 2.0);
    for (int q = 0; q < nt; ++q) s.terminal.modes.push_back(mode());
    s.source.time_power = 1;
    s.source.modes.push_back(mode());
    s.has_source = unit(rng) < 0.5;
  }
  return out;
}

namespace {

CVector sample_at(const TestFunction& fn, const Mesh& mesh, double t, double T) {
  CVector out(mesh.vertex_count());
  for (int i = 0; i < mesh.vertex_count(); ++i) out[i] = fn.eval<double>(mesh.vertices[i], t, T).v;
  return out;
}

}  // namespace

ObservabilityReport observability_constant(const OperatorSet& ops, const Mesh& mesh, const Params& params,
                                           const TimeGrid& grid, double sup,
                                           const std::vector<AdjointSample>& samples, int threads) {
  require(samples.size() >= 10, "observability_constant: need at least 10 samples");
  require(grid.steps >= 2, "observability_constant: need interior time nodes");
  require(mesh.vertex_count() == ops.size(), "observability_constant: mesh and operators disagree");
  check_weight_range(params, sup);
  const ThetaStepper stepper(ops, params, grid);
  const double s = params.s;
  std::vector<Envelope<double>> env(grid.steps + 1);
  for (int k = 1; k < grid.steps; ++k) {
    env[k] = envelope_at(grid.node(k), grid.T, s, params.lambda, params.m, sup, params.strict_weights);
  }
  const int count = static_cast<int>(samples.size());
  std::vector<double> ratio(count, std::numeric_limits<double>::quiet_NaN());

  parallel_for(count, threads, [&](int j) {
    const AdjointSample& smp = samples[j];
    const CVector zT = sample_at(smp.terminal, mesh, 0.0, grid.T);
    Trajectory g = Trajectory::zeros(grid, ops.size(), TrajectoryKind::source);
    if (smp.has_source) {
      for (int k = 0; k <= grid.steps; ++k) g.frames[k] = sample_at(smp.source, mesh, grid.node(k), grid.T);
    }
    const Trajectory z = solve_adjoint(stepper, zT, g);
    std::vector<double> lhs, rhs;
    const double z0 = l2_sq(stepper, z.frames[0]);
    if (z0 > 0.0) lhs.push_back(std::log(z0));
    const double ldt = std::log(grid.dt());
    for (int k = 1; k < grid.steps; ++k) {
      const Envelope<double>& e = env[k];
      const CVector zb = multiplier_average(z, params.theta, k);
      const double m2 = l2_sq(stepper, zb);
      const double k2 = std::max(0.0, zb.dot(stepper.apply_stiffness(zb)).real());
      const double c2 = ctrl_sq(stepper, zb);
      const double g2 = l2_sq(stepper, g.frames[k]);
      const double wl = ldt - 2.0 * s * e.phi_hat;
      const double wr = ldt - 2.0 * s * e.phi_check;
      if (m2 > 0.0) lhs.push_back(wl + 3.0 * std::log(e.xi_check) + std::log(m2));
      if (k2 > 0.0) lhs.push_back(wl + std::log(e.xi_check) + std::log(k2));
      if (g2 > 0.0) rhs.push_back(wr + std::log(g2));
      if (c2 > 0.0) rhs.push_back(wr + 3.0 * std::log(e.xi_hat) + std::log(c2));
    }
    const double l = log_sum_exp(lhs), r = log_sum_exp(rhs);
    if (std::isfinite(l) && std::isfinite(r)) ratio[j] = (l - r) / std::numbers::ln10;
  });

  ObservabilityReport rep;
  rep.log10_max_ratio = -kInf;
  for (double r : ratio) {
    if (std::isnan(r)) {
      ++rep.excluded;
      continue;
    }
    rep.log10_ratios.push_back(r);
    rep.log10_max_ratio = std::max(rep.log10_max_ratio, r);
  }
  rep.max_ratio = std::pow(10.0, rep.log10_max_ratio);
  return rep;
}

ObservabilityReport observability_constant(const OperatorSet& ops, const Mesh& mesh, const Params& params,
                                           const TimeGrid& grid, double sup, int sample_count, std::uint64_t seed,
                                           const DiskGeometry& geom, int threads) {
  return observability_constant(ops, mesh, params, grid, sup, adjoint_samples(sample_count, seed, geom), threads);
}

ControlResult nonlinear_null_control(const ThetaStepper& stepper, const NodeEnvelope& env, const CVector& u0,
                                     NonlinearControlLog& log) {
  const Params& p = stepper.params();
  const OperatorSet& ops = stepper.ops();
  require(std::isfinite(hk_norms(ops, u0).H1), "nonlinear_null_control: non-finite initial data");
  log = NonlinearControlLog{};
  static const Trajectory none;
  const CVector zero = CVector::Zero(stepper.size());

  // the right-hand side is linear in (u0, f), so each sweep only solves for the change in f
  const VariationalSystem sys(stepper, env);
  SpaceTimeVector z = SpaceTimeVector::Zero(sys.size());
  const CgReport first = solve_system(sys, p, sys.rhs(u0, none), z, p.cg_maxit);
  ControlResult current = fi_result(sys, stepper, env, u0, none, z, first);
  Trajectory f_prev;
  double previous_increment = 0.0;
  int non_contracting = 0;
  auto fail = [&](const std::string& why) {
    log.diverged = true;
    log.reason = why;
  };
  auto num = [](double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3g", v);
    return std::string(buf);
  };

  for (int it = 1; it <= p.picard_maxit; ++it) {
    Trajectory f = Trajectory::zeros(stepper.grid(), stepper.size(), TrajectoryKind::source);
    for (int k = 0; k <= stepper.grid().steps; ++k) f.frames[k] = cubic_source(p, current.y_star.frames[k]);

    NonlinearIterate rec;
    rec.iteration = it;
    rec.source_norm = weighted_source_log10(ops, p, env, f);
    rec.capacity_ratio = rec.source_norm - 3.0 * current.weighted_norms.capacity_h1;
    if (std::isnan(rec.source_norm) || rec.source_norm == kInf) {
      log.iterations.push_back(rec);
      fail("weighted source check failed at iteration " + std::to_string(it));
      return current;
    }
    SpaceTimeVector dz = SpaceTimeVector::Zero(sys.size());
    const SpaceTimeVector db = sys.rhs(zero, f) - sys.rhs(zero, f_prev);
    const CgReport cg = solve_system(sys, p, db, dz, p.picard_cg_maxit);
    z += dz;
    Trajectory dh = sys.control_part(dz);
    zero_outside(dh, ops.control_mask);
    rec.cg_iters = cg.iterations;
    rec.control_increment = control_norm(stepper, dh);
    rec.contraction = it == 1 || previous_increment == 0.0 ? 0.0 : rec.control_increment / previous_increment;
    log.iterations.push_back(rec);
    if (it > 1) log.max_contraction = std::max(log.max_contraction, rec.contraction);

    current = fi_result(sys, stepper, env, u0, f, z, cg);
    f_prev = std::move(f);
    if (!std::isfinite(rec.control_increment) || !std::isfinite(current.control_norm)) {
      fail("non-finite control at iteration " + std::to_string(it));
      return current;
    }
    const double target = p.picard_tol * std::max(current.control_norm, 1e-300);
    if (rec.control_increment <= target) {
      log.converged = true;
      break;
    }
    if (it > 1 && rec.contraction > 0.0 && rec.contraction < 1.0) {
      const double remaining = std::log(target / rec.control_increment) / std::log(rec.contraction);
      if (it + remaining > p.picard_maxit) {
        fail("contraction " + num(rec.contraction) + " cannot reach picard_tol within picard_maxit");
        return current;
      }
    }
    non_contracting = (it > 1 && rec.contraction >= 1.0) ? non_contracting + 1 : 0;
    if (non_contracting >= 3) {
      fail("contraction factor >= 1 for 3 consecutive iterations (last " + num(rec.contraction) + ")");
      return current;
    }
    previous_increment = rec.control_increment;
  }
  if (!log.converged) {
    fail("no convergence within picard_maxit iterations");
    return current;
  }

  const double u0_norm = std::sqrt(l2_sq(stepper, u0));
  const double scale = u0_norm > 0.0 ? stepper.grid().T / u0_norm : 1.0;
  log.state_residual = scale * cubic_residual(stepper, current.y_star, none, current.h);
  try {
    const CubicResult cubic = solve_cubic(stepper, u0, none, current.h);
    log.cubic_residual = scale * cubic_residual(stepper, cubic.state, none, current.h);
    log.final_terminal_ratio = terminal_ratio(stepper, cubic.state);
    current.y = cubic.state;
    current.terminal_ratio = log.final_terminal_ratio;
  } catch (const std::exception& e) {
    log.converged = false;
    fail(std::string("re-simulation of the cubic dynamics failed: ") + e.what());
  }
  return current;
}

DeltaEstimate estimate_delta(const ThetaStepper& stepper, const NodeEnvelope& env, const CVector& u0_direction,
                             std::vector<double> scales) {
  require(hk_norms(stepper.ops(), u0_direction).H1 > 0.0, "estimate_delta: direction must be nonzero");
  require(!scales.empty(), "estimate_delta: empty scale list");
  std::sort(scales.begin(), scales.end(), std::greater<>());
  DeltaEstimate est;
  for (double scale : scales) {
    require(scale > 0.0, "estimate_delta: scales must be positive");
    NonlinearControlLog log;
    bool ok = false;
    std::string why;
    try {
      const ControlResult r = nonlinear_null_control(stepper, env, scale * u0_direction, log);
      ok = log.converged && r.terminal_ratio <= 1e-3;
      why = log.converged ? (ok ? "" : "terminal ratio above 1e-3") : log.reason;
    } catch (const std::exception& e) {
      why = e.what();
    }
    est.scales.push_back(scale);
    est.converged.push_back(ok ? 1 : 0);
    est.reasons.push_back(why);
    if (ok) {
      est.delta = scale;
      break;
    }
  }
  return est;
}

}  // namespace cgl
