#include "cgl/evolution.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace cgl {

namespace {

bool finite(const CVector& v) { return v.allFinite(); }

const CVector& frame_or_empty(const Trajectory& t, int n) {
  static const CVector empty;
  return t.frames.empty() ? empty : t.frames[n];
}

void check_grid(const Trajectory& t, const TimeGrid& grid, int dofs, const char* what) {
  if (t.frames.empty()) return;
  require(t.grid == grid, std::string(what) + ": time grid mismatch");
  require(static_cast<int>(t.frames.size()) == grid.steps + 1, std::string(what) + ": frame count mismatch");
  require(t.frames[0].size() == dofs, std::string(what) + ": size mismatch");
  require(t.surface_frames.empty() || static_cast<int>(t.surface_frames.size()) == grid.steps + 1,
          std::string(what) + ": surface frame count mismatch");
}

}  // namespace

Trajectory Trajectory::zeros(const TimeGrid& grid, int dofs, TrajectoryKind kind) {
  Trajectory t;
  t.grid = grid;
  t.kind = kind;
  t.frames.assign(grid.steps + 1, CVector::Zero(dofs));
  return t;
}

double theta_weight(const TimeGrid& grid, double theta, int k) {
  double w = 0.0;
  if (k >= 1) w += theta;
  if (k <= grid.steps - 1) w += 1.0 - theta;
  return grid.dt() * w;
}

CVector multiplier_average(const Trajectory& z, double theta, int k) {
  const int N = z.grid.steps;
  const int dofs = static_cast<int>(z.frames[0].size());
  const double w = theta_weight(z.grid, theta, k) / z.grid.dt();
  if (w <= 0.0) return CVector::Zero(dofs);
  CVector out = CVector::Zero(dofs);
  if (k >= 1) out += theta * z.frames[k];
  if (k <= N - 1) out += (1.0 - theta) * z.frames[k + 1];
  return out / w;
}

ThetaStepper::ThetaStepper(const OperatorSet& ops, const Params& params, const TimeGrid& grid)
    : ops_(&ops), params_(params), grid_(grid) {
  require(grid.steps >= 1 && grid.T > 0, "ThetaStepper: invalid time grid");
  require(params.theta >= 0.5 && params.theta <= 1.0, "ThetaStepper: theta must lie in [1/2, 1]");
  const double dt = grid.dt();
  const double theta = params.theta;
  const Complex disp(1.0, params.alpha);
  Mb_ = ops.mass_bulk.cast<Complex>();
  Ms_ = ops.mass_surface.cast<Complex>();
  Mc_ = ops.mass_control.cast<Complex>();
  M_ = Mb_ + Ms_;
  K_ = (ops.stiff_bulk + ops.stiff_surface).cast<Complex>();
  A_ = (disp * (params.a * ops.stiff_bulk + params.b * ops.stiff_surface).cast<Complex>()).eval();
  S_ = M_ + Complex(theta * dt) * A_;
  B_ = M_ - Complex((1.0 - theta) * dt) * A_;
  S_.makeCompressed();
  lu_.analyzePattern(S_);
  lu_.factorize(S_);
  if (lu_.info() != Eigen::Success) throw NumericalError("ThetaStepper: factorization of the step matrix failed");
  mass_llt_.compute(ops.mass());
  if (mass_llt_.info() != Eigen::Success) throw NumericalError("ThetaStepper: mass matrix is not positive definite");
}

CVector ThetaStepper::solve(const CVector& rhs) const { return lu_.solve(rhs); }

// S is complex symmetric, so S^H x = r  <=>  S conj(x) = conj(r).
CVector ThetaStepper::solve_adjoint(const CVector& rhs) const {
  const CVector y = lu_.solve(rhs.conjugate());
  return y.conjugate();
}

CVector ThetaStepper::mass_solve(const CVector& rhs) const {
  const RVector re = mass_llt_.solve(rhs.real());
  const RVector im = mass_llt_.solve(rhs.imag());
  CVector out(rhs.size());
  out.real() = re;
  out.imag() = im;
  return out;
}

CVector ThetaStepper::apply_SH(const CVector& z) const { return (S_ * z.conjugate()).conjugate(); }
CVector ThetaStepper::apply_BH(const CVector& z) const { return (B_ * z.conjugate()).conjugate(); }

CVector ThetaStepper::forcing(const CVector& f, const CVector& f_surface, const CVector& h) const {
  CVector g = CVector::Zero(size());
  if (f.size() > 0) g += Mb_ * f;
  if (f_surface.size() > 0) {
    g += Ms_ * f_surface;
  } else if (f.size() > 0) {
    g += Ms_ * f;
  }
  if (h.size() > 0) g += Mc_ * h;
  return g;
}

CVector ThetaStepper::forcing_at(const Trajectory& f, const Trajectory& h, int node) const {
  static const CVector empty;
  const CVector& fs = f.surface_frames.empty() ? empty : f.surface_frames[node];
  return forcing(frame_or_empty(f, node), fs, frame_or_empty(h, node));
}

Trajectory solve_forward(const ThetaStepper& stepper, const CVector& u0, const Trajectory& f,
                         const Trajectory& h) {
  const TimeGrid& grid = stepper.grid();
  const int n = stepper.size();
  require(u0.size() == n, "solve_forward: initial data size mismatch");
  check_grid(f, grid, n, "solve_forward(f)");
  check_grid(h, grid, n, "solve_forward(h)");
  const double dt = grid.dt();
  const double theta = stepper.params().theta;

  Trajectory y;
  y.grid = grid;
  y.kind = TrajectoryKind::forward;
  y.frames.reserve(grid.steps + 1);
  y.frames.push_back(u0);
  CVector g_prev = stepper.forcing_at(f, h, 0);
  for (int step = 0; step < grid.steps; ++step) {
    CVector g_next = stepper.forcing_at(f, h, step + 1);
    CVector rhs = stepper.apply_B(y.frames.back()) + dt * (theta * g_next + (1.0 - theta) * g_prev);
    CVector next = stepper.solve(rhs);
    if (!finite(next)) {
      throw NumericalError("solve_forward: non-finite state at step " + std::to_string(step + 1));
    }
    y.frames.push_back(std::move(next));
    g_prev = std::move(g_next);
  }
  return y;
}

Trajectory solve_forward(const OperatorSet& ops, const Params& params, const CVector& u0,
                         const Trajectory& f, const Trajectory& h) {
  require(!f.frames.empty() || !h.frames.empty(),
          "solve_forward: a source or control trajectory must fix the time grid");
  TimeGrid grid = !f.frames.empty() ? f.grid : h.grid;
  ThetaStepper stepper(ops, params, grid);
  return solve_forward(stepper, u0, f, h);
}

Trajectory solve_adjoint(const ThetaStepper& stepper, const CVector& zT, const Trajectory& g) {
  const TimeGrid& grid = stepper.grid();
  const int n = stepper.size();
  const int N = grid.steps;
  require(zT.size() == n, "solve_adjoint: terminal data size mismatch");
  check_grid(g, grid, n, "solve_adjoint(g)");
  const double dt = grid.dt();
  const double theta = stepper.params().theta;
  static const Trajectory no_control;

  Trajectory z;
  z.grid = grid;
  z.kind = TrajectoryKind::adjoint;
  z.frames.assign(N + 1, CVector());

  auto source = [&](int node) { return stepper.forcing_at(g, no_control, node); };
  z.frames[N] = stepper.solve_adjoint(stepper.apply_mass(zT) - theta * dt * source(N));
  for (int k = N - 1; k >= 1; --k) {
    z.frames[k] = stepper.solve_adjoint(stepper.apply_BH(z.frames[k + 1]) - dt * source(k));
    if (!finite(z.frames[k])) {
      throw NumericalError("solve_adjoint: non-finite state at step " + std::to_string(k));
    }
  }
  z.frames[0] = stepper.mass_solve(stepper.apply_BH(z.frames[1]) - (1.0 - theta) * dt * source(0));
  return z;
}

Trajectory solve_adjoint(const OperatorSet& ops, const Params& params, const CVector& zT,
                         const Trajectory& g) {
  require(!g.frames.empty(), "solve_adjoint: the source trajectory fixes the time grid; pass zeros explicitly");
  ThetaStepper stepper(ops, params, g.grid);
  return solve_adjoint(stepper, zT, g);
}

DualityDefect duality_check(const OperatorSet& ops, const Params& params, const CVector& u0,
                            const Trajectory& f, const Trajectory& h, const CVector& zT,
                            const Trajectory& g) {
  const Trajectory* with_grid = !f.frames.empty() ? &f : !h.frames.empty() ? &h : &g;
  require(!with_grid->frames.empty(), "duality_check: at least one trajectory must fix the time grid");
  const TimeGrid grid = with_grid->grid;
  for (const Trajectory* t : {&f, &h, &g}) {
    require(t->frames.empty() || t->grid == grid, "duality_check: grid mismatch");
  }
  ThetaStepper stepper(ops, params, grid);
  const Trajectory y = solve_forward(stepper, u0, f, h);
  const Trajectory z = solve_adjoint(stepper, zT, g);
  const double theta = params.theta;
  static const Trajectory no_control;

  const int N = grid.steps;
  const double terminal = stepper.apply_mass(zT).dot(y.frames[N]).real();
  const double initial = stepper.apply_mass(z.frames[0]).dot(u0).real();
  double forcing = 0.0;
  double observed = 0.0;
  for (int k = 0; k <= N; ++k) {
    const double w = theta_weight(grid, theta, k);
    if (w > 0.0) {
      forcing += w * multiplier_average(z, theta, k).dot(stepper.forcing_at(f, h, k)).real();
      observed += w * stepper.forcing_at(g, no_control, k).dot(y.frames[k]).real();
    }
  }
  DualityDefect d;
  d.absolute = std::abs(terminal - initial - forcing - observed);
  const double scale = std::abs(terminal) + std::abs(initial) + std::abs(forcing) + std::abs(observed);
  d.relative = scale > 0.0 ? d.absolute / scale : 0.0;
  return d;
}

CVector cubic_source(const Params& params, const CVector& u) {
  const Complex coef(-params.c, -params.c * params.gamma);
  return (coef * u.array() * u.array().abs2()).matrix();
}

double c0_h1_norm(const OperatorSet& ops, const Trajectory& u) {
  double out = 0.0;
  for (const auto& frame : u.frames) out = std::max(out, hk_norms(ops, frame).H1);
  return out;
}

double l2_l2_norm(const OperatorSet& ops, const Trajectory& u, double theta) {
  double sum = 0.0;
  for (int k = 0; k < static_cast<int>(u.frames.size()); ++k) {
    sum += theta_weight(u.grid, theta, k) * energy_product(ops, u.frames[k], u.frames[k]).real();
  }
  return std::sqrt(sum);
}

namespace {

Trajectory add_cubic(const Params& params, const Trajectory& f, const Trajectory& state, int dofs) {
  Trajectory out;
  out.grid = state.grid;
  out.kind = TrajectoryKind::source;
  out.frames.resize(state.frames.size());
  for (std::size_t k = 0; k < state.frames.size(); ++k) {
    out.frames[k] = cubic_source(params, state.frames[k]);
    if (!f.frames.empty()) out.frames[k] += f.frames[k];
  }
  if (!f.surface_frames.empty()) {
    out.surface_frames.resize(state.frames.size());
    for (std::size_t k = 0; k < state.frames.size(); ++k) {
      out.surface_frames[k] = cubic_source(params, state.frames[k]) + f.surface_frames[k];
    }
  }
  (void)dofs;
  return out;
}

}  // namespace

CubicResult solve_cubic(const ThetaStepper& stepper, const CVector& u0, const Trajectory& f,
                        const Trajectory& h) {
  const OperatorSet& ops = stepper.ops();
  const Params& params = stepper.params();
  const double data = hk_norms(ops, u0).H1 + (f.frames.empty() ? 0.0 : l2_l2_norm(ops, f, params.theta));
  require(data <= params.cubic_gate,
          "solve_cubic: data above the smallness gate (||u0||_H1 + ||f|| = " + std::to_string(data) + ")");

  CubicResult result;
  static const Trajectory zero;
  result.state = solve_forward(stepper, u0, f, h);
  int non_contracting = 0;
  double previous = 0.0;
  for (int it = 0; it < params.picard_maxit; ++it) {
    const Trajectory source = add_cubic(params, f, result.state, stepper.size());
    Trajectory next = solve_forward(stepper, u0, source, h);
    double increment = 0.0;
    for (std::size_t k = 0; k < next.frames.size(); ++k) {
      increment = std::max(increment, hk_norms(ops, next.frames[k] - result.state.frames[k]).H1);
    }
    CubicIterate log{increment, it == 0 || previous == 0.0 ? 0.0 : increment / previous};
    result.log.push_back(log);
    result.state = std::move(next);
    if (!std::isfinite(increment)) throw NumericalError("solve_cubic: non-finite iterate");
    const double scale = c0_h1_norm(ops, result.state);
    if (increment <= params.picard_tol * scale || increment == 0.0) {
      result.converged = true;
      return result;
    }
    non_contracting = (it > 0 && log.contraction >= 1.0) ? non_contracting + 1 : 0;
    if (non_contracting >= 3) {
      throw NumericalError("solve_cubic: fixed-point map is not contracting (factor " +
                           std::to_string(log.contraction) + ")");
    }
    previous = increment;
  }
  (void)zero;
  return result;
}

CubicResult solve_cubic(const OperatorSet& ops, const Params& params, const CVector& u0,
                        const Trajectory& f, const Trajectory& h) {
  require(!f.frames.empty() || !h.frames.empty(),
          "solve_cubic: a source or control trajectory must fix the time grid");
  const TimeGrid grid = !f.frames.empty() ? f.grid : h.grid;
  ThetaStepper stepper(ops, params, grid);
  return solve_cubic(stepper, u0, f, h);
}

double cubic_residual(const ThetaStepper& stepper, const Trajectory& u, const Trajectory& f,
                      const Trajectory& h) {
  const Params& params = stepper.params();
  const TimeGrid& grid = stepper.grid();
  const double dt = grid.dt();
  const double theta = params.theta;
  const Trajectory source = add_cubic(params, f, u, stepper.size());
  double worst = 0.0;
  CVector g_prev = stepper.forcing_at(source, h, 0);
  for (int step = 0; step < grid.steps; ++step) {
    CVector g_next = stepper.forcing_at(source, h, step + 1);
    const CVector r = stepper.apply_S(u.frames[step + 1]) - stepper.apply_B(u.frames[step]) -
                      dt * (theta * g_next + (1.0 - theta) * g_prev);
    const CVector nodal = stepper.mass_solve(r) / dt;
    worst = std::max(worst, std::sqrt(std::max(0.0, nodal.dot(stepper.apply_mass(nodal)).real())));
    g_prev = std::move(g_next);
  }
  return worst;
}

EnergyReport energy_report(const Trajectory& traj, const OperatorSet& ops, double theta,
                           const Trajectory* source) {
  EnergyReport rep;
  const int count = static_cast<int>(traj.frames.size());
  rep.L2.resize(count);
  rep.H1.resize(count);
  double h1_time = 0.0;
  const CSpMat kb = ops.stiff_bulk.cast<Complex>();
  const CSpMat ks = ops.stiff_surface.cast<Complex>();
  for (int k = 0; k < count; ++k) {
    const CVector& u = traj.frames[k];
    const HkNorms nrm = hk_norms(ops, u);
    rep.L2[k] = nrm.L2;
    rep.H1[k] = nrm.H1;
    const double w = theta_weight(traj.grid, theta, k);
    rep.bulk_dissipation += w * std::max(0.0, u.dot(kb * u).real());
    rep.surface_dissipation += w * std::max(0.0, u.dot(ks * u).real());
    h1_time += w * nrm.H1 * nrm.H1;
  }
  if (count == 0) return rep;
  const double lhs = *std::max_element(rep.L2.begin(), rep.L2.end()) + std::sqrt(h1_time);
  double rhs = rep.L2[0];
  if (source != nullptr && !source->frames.empty()) rhs += l2_l2_norm(ops, *source, theta);
  rep.c1_ratio = rhs > 0.0 ? lhs / rhs : 0.0;
  return rep;
}

}  // namespace cgl
