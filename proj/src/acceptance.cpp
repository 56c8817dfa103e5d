#include "cgl/acceptance.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <numbers>
#include <ostream>
#include <random>
#include <sstream>

#include <Eigen/LU>

#include "cgl/assembly.hpp"
#include "cgl/carleman.hpp"
#include "cgl/control.hpp"
#include "cgl/desk.hpp"
#include "cgl/evolution.hpp"
#include "cgl/geometry.hpp"
#include "cgl/weights.hpp"

namespace cgl {

namespace {

using Clock = std::chrono::steady_clock;
constexpr double kPi = std::numbers::pi;

std::string fmt(const char* pattern, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, pattern, v);
  return buf;
}

CriterionResult criterion(int id, const char* title) {
  CriterionResult r;
  r.id = id;
  r.title = title;
  return r;
}

std::string sci(double v) { return fmt("%.3g", v); }

CVector random_field(std::mt19937_64& rng, int n) {
  std::normal_distribution<double> normal(0.0, 1.0);
  CVector v(n);
  for (int i = 0; i < n; ++i) v[i] = Complex(normal(rng), normal(rng));
  return v;
}

Trajectory random_trajectory(std::mt19937_64& rng, const TimeGrid& grid, int n, TrajectoryKind kind) {
  Trajectory t = Trajectory::zeros(grid, n, kind);
  for (auto& frame : t.frames) frame = random_field(rng, n);
  return t;
}

// ---------------------------------------------------------------- 1

CriterionResult assembly_check(const RunConfig& cfg, RunWriter* writer) {
  CriterionResult r = criterion(1, "weak-form assembly");
  r.budget_seconds = 1.0;
  const Desk d = make_desk(cfg, cfg.geom, cfg.h_target, cfg.steps);
  const RVector one = RVector::Ones(d.mesh.vertex_count());
  const double area = one.dot(d.ops.mass_bulk * one);
  const double length = one.dot(d.ops.mass_surface * one);
  const double R = cfg.geom.R;
  const double area_err = std::abs(area / (kPi * R * R) - 1.0);
  const double length_err = std::abs(length / (2.0 * kPi * R) - 1.0);
  const double kb = (d.ops.stiff_bulk * one).cwiseAbs().maxCoeff();
  const double ks = (d.ops.stiff_surface * one).cwiseAbs().maxCoeff();
  r.passed = area_err <= 0.01 && length_err <= 0.01 && kb <= 1e-13 && ks <= 1e-13;
  r.detail = "area err " + sci(area_err) + ", length err " + sci(length_err) + ", |K_bulk 1| " + sci(kb) +
             ", |K_surf 1| " + sci(ks) + ", dofs " + std::to_string(d.mesh.vertex_count());
  if (writer) {
    writer->write_json("assembly.json", Json{{"dofs", d.mesh.vertex_count()},
                                             {"h_max", d.mesh.h_max},
                                             {"area", area},
                                             {"boundary_length", length},
                                             {"stiff_bulk_constant", kb},
                                             {"stiff_surface_constant", ks}});
  }
  return r;
}

// ---------------------------------------------------------------- 2

struct MmsPoint {
  double h_target = 0.0;
  double h_max = 0.0;
  int steps = 0;
  double error = 0.0;
};

// u = e^{-t} (sin(x + 1/2) cos y + i x^2 y)
struct Manufactured {
  Params p;
  double R = 1.0;

  struct Values {
    Complex u, ux, uy, uxx, uyy, uxy;
  };

  static Values at(const Point& x, double t) {
    const double e = std::exp(-t);
    const double s = std::sin(x.x() + 0.5), c = std::cos(x.x() + 0.5);
    const double sy = std::sin(x.y()), cy = std::cos(x.y());
    const Complex i(0.0, 1.0);
    Values v;
    v.u = e * (s * cy + i * x.x() * x.x() * x.y());
    v.ux = e * (c * cy + i * 2.0 * x.x() * x.y());
    v.uy = e * (-s * sy + i * x.x() * x.x());
    v.uxx = e * (-s * cy + i * 2.0 * x.y());
    v.uyy = e * (-s * cy);
    v.uxy = e * (-c * sy + i * 2.0 * x.x());
    return v;
  }

  Complex bulk_source(const Point& x, double t) const {
    const Values v = at(x, t);
    return -v.u - p.a * Complex(1.0, p.alpha) * (v.uxx + v.uyy);
  }

  Complex surface_source(const Point& x, double t) const {
    const Values v = at(x, t);
    const double X = x.x(), Y = x.y();
    const Complex dn = (X * v.ux + Y * v.uy) / R;
    const Complex lap_g = (Y * Y * v.uxx - 2.0 * X * Y * v.uxy + X * X * v.uyy - X * v.ux - Y * v.uy) / (R * R);
    return -v.u + Complex(1.0, p.alpha) * (p.a * dn - p.b * lap_g);
  }
};

MmsPoint mms_run(const RunConfig& cfg, const DiskGeometry& geom, double h) {
  Params p = cfg.params;
  p.theta = 0.5;
  const int steps = static_cast<int>(std::ceil(4.0 * p.T / h));
  const Desk d = make_desk(cfg, geom, h, steps);
  const Manufactured mf{p, geom.R};
  const int n = d.mesh.vertex_count();
  Trajectory f = Trajectory::zeros(d.grid, n, TrajectoryKind::source);
  f.surface_frames.assign(steps + 1, CVector::Zero(n));
  for (int k = 0; k <= steps; ++k) {
    const double t = d.grid.node(k);
    for (int i = 0; i < n; ++i) {
      f.frames[k][i] = mf.bulk_source(d.mesh.vertices[i], t);
      if (d.mesh.on_boundary[i]) f.surface_frames[k][i] = mf.surface_source(d.mesh.vertices[i], t);
    }
  }
  CVector u0(n), uT(n);
  for (int i = 0; i < n; ++i) {
    u0[i] = Manufactured::at(d.mesh.vertices[i], 0.0).u;
    uT[i] = Manufactured::at(d.mesh.vertices[i], p.T).u;
  }
  const Trajectory u = solve_forward(d.ops, p, u0, f, Trajectory{});
  const CVector e = u.frames.back() - uT;
  return {h, d.mesh.h_max, steps, std::sqrt(std::abs(energy_product(d.ops, e, e)))};
}

CriterionResult forward_check(const RunConfig& cfg, RunWriter* writer) {
  CriterionResult r = criterion(2, "forward solver");
  r.budget_seconds = 120.0;

  // coarse meshes need r_inner > 2h
  DiskGeometry mms_geom{cfg.geom.R, 0.45 * cfg.geom.R, 0.6 * cfg.geom.R};
  std::vector<MmsPoint> pts;
  for (double h : {0.2, 0.1, 0.05}) pts.push_back(mms_run(cfg, mms_geom, h * cfg.geom.R));
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (const auto& q : pts) {
    const double x = std::log(q.h_max), y = std::log(q.error);
    sx += x, sy += y, sxx += x * x, sxy += x * y;
  }
  const double k = static_cast<double>(pts.size());
  const double order = (k * sxy - sx * sy) / (k * sxx - sx * sx);

  // dissipativity, theta = 1, no sources
  const Desk d = make_desk(cfg, cfg.geom, cfg.h_target, cfg.steps);
  Params p1 = cfg.params;
  p1.theta = 1.0;
  std::mt19937_64 rng(cfg.seed);
  const CVector u0 = bump(d, cfg, 1.0) + 0.1 * random_field(rng, d.mesh.vertex_count());
  const Trajectory free = solve_forward(ThetaStepper(d.ops, p1, d.grid), u0, Trajectory{}, Trajectory{});
  int violations = 0;
  double worst_growth = 0.0;
  for (int n = 0; n < cfg.steps; ++n) {
    const double a = std::abs(energy_product(d.ops, free.frames[n], free.frames[n]));
    const double b = std::abs(energy_product(d.ops, free.frames[n + 1], free.frames[n + 1]));
    worst_growth = std::max(worst_growth, b / a - 1.0);
    if (b > a * (1.0 + 1e-14)) ++violations;
  }

  // conjugation symmetry through the cubic solver
  Params pc = cfg.params;
  Params pm = pc;
  pm.alpha = -pc.alpha;
  pm.gamma = -pc.gamma;
  const CVector small = bump(d, cfg, 1e-4) + 1e-5 * random_field(rng, d.mesh.vertex_count());
  Trajectory f = random_trajectory(rng, d.grid, d.mesh.vertex_count(), TrajectoryKind::source);
  for (auto& frame : f.frames) frame *= 1e-5;
  Trajectory fbar = f;
  for (auto& frame : fbar.frames) frame = frame.conjugate();
  const Trajectory ua = solve_cubic(d.ops, pc, small, f).state;
  const Trajectory ub = solve_cubic(d.ops, pm, CVector(small.conjugate()), fbar).state;
  double sym = 0.0, scale = 0.0;
  for (std::size_t n = 0; n < ua.frames.size(); ++n) {
    sym = std::max(sym, (ua.frames[n].conjugate() - ub.frames[n]).cwiseAbs().maxCoeff());
    scale = std::max(scale, ua.frames[n].cwiseAbs().maxCoeff());
  }
  const double sym_rel = sym / scale;

  r.passed = order >= 1.8 && violations == 0 && sym_rel <= 1e-13;
  r.detail = "MMS order " + fmt("%.3f", order) + " (errors";
  for (const auto& q : pts) r.detail += " " + sci(q.error);
  r.detail += "), dissipativity violations " + std::to_string(violations) + ", conjugation defect " + sci(sym_rel);
  if (writer) {
    std::ostringstream csv;
    csv << "h_target,h_max,steps,error\n";
    for (const auto& q : pts) {
      csv << format_double(q.h_target) << ',' << format_double(q.h_max) << ',' << q.steps << ','
          << format_double(q.error) << '\n';
    }
    writer->write("mms.csv", csv.str());
    writer->write_json("forward.json", Json{{"mms_order", order},
                                            {"dissipativity_violations", violations},
                                            {"max_step_growth", worst_growth},
                                            {"conjugation_defect", sym_rel}});
  }
  return r;
}

// ---------------------------------------------------------------- 3

/// Multipliers of the dense space–time system L^H Λ = r, with L the block-bidiagonal forward operator.
std::vector<CVector> dense_adjoint(const OperatorSet& ops, const Params& p, const TimeGrid& grid, const CVector& zT,
                                   const Trajectory& g) {
  const int n = ops.size(), N = grid.steps;
  const double dt = grid.dt(), th = p.theta;
  const Eigen::MatrixXcd M = Eigen::MatrixXd(ops.mass()).cast<Complex>();
  const Eigen::MatrixXcd A = Complex(1.0, p.alpha) * Eigen::MatrixXd(ops.stiffness(p.a, p.b)).cast<Complex>();
  const Eigen::MatrixXcd S = M + th * dt * A, B = M - (1.0 - th) * dt * A;
  const int dim = (N + 1) * n;
  Eigen::MatrixXcd L = Eigen::MatrixXcd::Zero(dim, dim);
  L.block(0, 0, n, n) = M;
  for (int k = 0; k < N; ++k) {
    L.block((k + 1) * n, (k + 1) * n, n, n) = S;
    L.block((k + 1) * n, k * n, n, n) = -B;
  }
  Eigen::VectorXcd rhs(dim);
  for (int k = 0; k <= N; ++k) {
    const double tau = (k >= 1 ? th : 0.0) + (k <= N - 1 ? 1.0 - th : 0.0);
    rhs.segment(k * n, n) = -dt * tau * (M * g.frames[k]);
  }
  rhs.segment(N * n, n) += M * zT;
  const Eigen::VectorXcd lam = L.adjoint().partialPivLu().solve(rhs);
  std::vector<CVector> out(N + 1);
  for (int k = 0; k <= N; ++k) out[k] = lam.segment(k * n, n);
  return out;
}

CriterionResult duality_check_criterion(const RunConfig& cfg, RunWriter* writer) {
  CriterionResult r = criterion(3, "discrete duality");
  r.budget_seconds = 30.0;
  const DiskGeometry geom{cfg.geom.R, 0.65 * cfg.geom.R, 0.8 * cfg.geom.R};
  const Mesh mesh = build_mesh(geom, 0.3 * cfg.geom.R, cfg.mesh_seed);
  const OperatorSet ops = assemble(mesh);
  const int n = mesh.vertex_count();
  const TimeGrid grid{4, cfg.params.T};
  std::mt19937_64 rng(cfg.seed + 3);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  double worst = 0.0, oracle = 0.0;
  Json rows = Json::array();
  for (int trial = 0; trial < 20; ++trial) {
    Params p = cfg.params;
    p.a = 0.5 + 1.5 * unit(rng);
    p.b = 0.5 + 1.5 * unit(rng);
    p.alpha = (unit(rng) < 0.5 ? -1.0 : 1.0) * (0.1 + 2.0 * unit(rng));
    p.theta = 0.5 + 0.5 * unit(rng);
    const CVector u0 = random_field(rng, n), zT = random_field(rng, n);
    Trajectory f = random_trajectory(rng, grid, n, TrajectoryKind::source);
    if (trial % 2 == 1) f.surface_frames = random_trajectory(rng, grid, n, TrajectoryKind::source).frames;
    const Trajectory h = random_trajectory(rng, grid, n, TrajectoryKind::control);
    const Trajectory g = random_trajectory(rng, grid, n, TrajectoryKind::source);
    const DualityDefect dd = duality_check(ops, p, u0, f, h, zT, g);
    worst = std::max(worst, dd.relative);
    rows.push_back(Json{{"trial", trial}, {"theta", p.theta}, {"alpha", p.alpha}, {"relative_defect", dd.relative}});
    if (trial == 0) {
      const Trajectory z = solve_adjoint(ops, p, zT, g);
      const std::vector<CVector> lam = dense_adjoint(ops, p, grid, zT, g);
      double num = 0.0, den = 0.0;
      for (int k = 0; k <= grid.steps; ++k) {
        num += (z.frames[k] - lam[k]).squaredNorm();
        den += lam[k].squaredNorm();
      }
      oracle = std::sqrt(num / den);
    }
  }
  r.passed = worst <= 1e-10 && oracle <= 1e-10;
  r.detail = "max relative defect " + sci(worst) + " over 20 instances (" + std::to_string(n) +
             " dofs, 4 steps), dense oracle mismatch " + sci(oracle);
  if (writer) {
    writer->write_json("duality.json", Json{{"dofs", n}, {"dense_oracle_mismatch", oracle}, {"trials", rows}});
  }
  return r;
}

// ---------------------------------------------------------------- 4

/// Forward-mode value with a gradient in the plane.
struct Dual {
  double v = 0.0;
  double dx = 0.0, dy = 0.0;

  Dual() = default;
  Dual(double value) : v(value) {}
  Dual(double value, double gx, double gy) : v(value), dx(gx), dy(gy) {}

  friend Dual operator+(Dual a, Dual b) { return {a.v + b.v, a.dx + b.dx, a.dy + b.dy}; }
  friend Dual operator-(Dual a, Dual b) { return {a.v - b.v, a.dx - b.dx, a.dy - b.dy}; }
  friend Dual operator-(Dual a) { return {-a.v, -a.dx, -a.dy}; }
  friend Dual operator*(Dual a, Dual b) { return {a.v * b.v, a.dx * b.v + a.v * b.dx, a.dy * b.v + a.v * b.dy}; }
  friend Dual operator/(Dual a, Dual b) {
    const double q = a.v / b.v;
    return {q, (a.dx - q * b.dx) / b.v, (a.dy - q * b.dy) / b.v};
  }
  friend Dual exp(Dual a) {
    const double e = std::exp(a.v);
    return {e, e * a.dx, e * a.dy};
  }
  friend Dual expm1(Dual a) {
    const double e = std::exp(a.v);
    return {std::expm1(a.v), e * a.dx, e * a.dy};
  }
};

CriterionResult weight_check(const RunConfig& cfg, RunWriter* writer) {
  CriterionResult r = criterion(4, "weight calculus");
  r.budget_seconds = 5.0;
  const double R = cfg.geom.R, T = cfg.params.T, m = cfg.params.m;
  const double lambda = cfg.lambda_list.front();
  const double sup = R * R;
  std::mt19937_64 rng(cfg.seed + 4);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  double rel = 0.0, grad = 0.0, tangential = 0.0;
  for (int k = 0; k < 10000; ++k) {
    const double rad = R * std::sqrt(unit(rng)), ang = 2.0 * kPi * unit(rng);
    const double x = rad * std::cos(ang), y = rad * std::sin(ang);
    const double t = T * (0.005 + 0.99 * unit(rng));
    const double eta = sup - x * x - y * y;
    const double phi = carleman_phi(eta, t, T, lambda, m, sup);
    const double xi = carleman_xi(eta, t, T, lambda, m, sup);
    const double lead = std::exp(2.0 * lambda * m * sup) / (t * (T - t));
    rel = std::max(rel, std::abs(phi + xi - lead) / lead);

    const Dual eta_d(eta, -2.0 * x, -2.0 * y);
    const Dual phi_d = carleman_phi<Dual>(eta_d, t, T, lambda, m, sup);
    const double gx = -lambda * xi * (-2.0 * x), gy = -lambda * xi * (-2.0 * y);
    const double ref = std::hypot(gx, gy);
    if (ref > 0.0) grad = std::max(grad, std::hypot(phi_d.dx - gx, phi_d.dy - gy) / ref);

    // on the circle: the tangential derivative vanishes
    const double bx = R * std::cos(ang), by = R * std::sin(ang);
    const Dual eb(sup - bx * bx - by * by, -2.0 * bx, -2.0 * by);
    const Dual pb = carleman_phi<Dual>(eb, t, T, lambda, m, sup);
    const double normal = std::hypot(pb.dx, pb.dy);
    tangential = std::max(tangential, std::abs(-std::sin(ang) * pb.dx + std::cos(ang) * pb.dy) / normal);
  }
  const double half = 0.5 * T;
  const double mu_left = envelope_mu(half, T), mu_right = envelope_mu(std::nextafter(half, T), T);
  const double mu_jump = std::abs(mu_right - mu_left) / mu_left;
  r.passed = rel <= 1e-12 && grad <= 1e-12 && tangential <= 1e-12 && mu_jump <= 1e-14;
  r.detail = "phi/xi relation " + sci(rel) + ", gradient " + sci(grad) + ", tangential " + sci(tangential) +
             ", mu jump at T/2 " + sci(mu_jump);
  if (writer) {
    writer->write_json("weights.json", Json{{"samples", 10000},
                                            {"lambda", lambda},
                                            {"relation_defect", rel},
                                            {"gradient_defect", grad},
                                            {"tangential_gradient", tangential},
                                            {"mu_jump", mu_jump}});
  }
  return r;
}

// ---------------------------------------------------------------- 5

CriterionResult identity_check(const RunConfig& cfg, RunWriter* writer) {
  CriterionResult r = criterion(5, "conjugated identity");
  r.budget_seconds = 30.0;
  Params p = cfg.params;
  p.s = cfg.s_list.front();
  p.lambda = cfg.lambda_list.front();
  const TestFunctionFamily family = make_family(cfg.seed, cfg.family_size, cfg.geom);
  const auto points = collocation_points(cfg.geom, p.T, cfg.collocation_count, cfg.seed + 5);
  double bulk = 0.0, boundary = 0.0;
  Json rows = Json::array();
  for (std::size_t k = 0; k < family.members.size(); ++k) {
    const IdentityDefect d = conjugate_identity_defect(family.members[k], p, cfg.geom, points);
    bulk = std::max(bulk, d.bulk);
    boundary = std::max(boundary, d.boundary);
    Json row = to_json(d);
    row["member"] = k;
    rows.push_back(row);
  }
  r.passed = bulk <= 1e-9 && boundary <= 1e-9;
  r.detail = "bulk " + sci(bulk) + ", boundary " + sci(boundary) + " over " + std::to_string(family.members.size()) +
             " functions x " + std::to_string(points.size()) + " points";
  if (writer) writer->write_json("identity.json", Json{{"s", p.s}, {"lambda", p.lambda}, {"members", rows}});
  return r;
}

// ---------------------------------------------------------------- 6

CriterionResult carleman_check(const RunConfig& cfg, RunWriter* writer) {
  CriterionResult r = criterion(6, "Carleman ratio harness");
  r.budget_seconds = 300.0;
  const Desk d = make_desk(cfg, cfg.geom, cfg.h_target, cfg.steps);
  const TestFunctionFamily family = make_family(cfg.seed, cfg.family_size, cfg.geom);
  const auto rows = carleman_ratio(family, cfg.params, cfg.s_list, cfg.lambda_list, d.mesh, cfg.geom, d.grid,
                                   cfg.threads);
  bool nonneg = true;
  int impossible = 0;
  for (const auto& row : rows) {
    nonneg = nonneg && row.nonnegative;
    impossible += row.impossible;
  }
  const double lambda0 = cfg.lambda_list.front();
  std::vector<double> maxima;
  for (double s : cfg.s_list) {
    double mx = 0.0;
    for (const auto& row : rows) {
      if (row.s == s && row.lambda == lambda0 && !row.degenerate) mx = std::max(mx, row.ratio);
    }
    maxima.push_back(mx);
  }
  bool finite = true, monotone = true;
  for (std::size_t k = 0; k < maxima.size(); ++k) {
    finite = finite && std::isfinite(maxima[k]) && maxima[k] > 0.0;
    if (k > 0) monotone = monotone && maxima[k] <= 1.1 * maxima[k - 1];
  }
  r.passed = nonneg && impossible == 0 && finite && monotone;
  r.detail = std::string("terms non-negative ") + (nonneg ? "yes" : "no") + ", max ratios";
  for (double v : maxima) r.detail += " " + fmt("%.6g", v);
  r.detail += " at lambda " + fmt("%g", lambda0);
  if (writer) {
    std::ostringstream csv;
    write_ratio_csv(csv, rows);
    writer->write("carleman_ratio.csv", csv.str());
  }
  return r;
}

// ---------------------------------------------------------------- 7

CriterionResult linear_control_check(const RunConfig& cfg, RunWriter* writer) {
  CriterionResult r = criterion(7, "linear null control");
  r.budget_seconds = 300.0;
  const Desk d = make_desk(cfg, cfg.geom, cfg.h_target, cfg.steps);
  const ThetaStepper stepper(d.ops, cfg.params, d.grid);
  const NodeEnvelope env = node_envelope(cfg.params, d.grid, d.eta0.sup_norm);
  const CVector u0 = bump(d, cfg, cfg.u0_h1 * cfg.u0_scale);
  const ControlResult fi = solve_fi_variational(stepper, env, u0, Trajectory{});
  const ControlResult hum = penalized_hum(stepper, u0, Trajectory{}, cfg.hum_eps);

  Trajectory diff = fi.h;
  for (std::size_t k = 0; k < diff.frames.size(); ++k) diff.frames[k] -= hum.h.frames[k];
  const double gap = control_norm(stepper, diff) / hum.control_norm;
  const double norm_ratio = fi.control_norm / hum.control_norm;
  const double floor = cfg.params.weight_floor;
  const bool support = fi.support_violation <= floor && hum.support_violation <= floor;
  r.passed = fi.terminal_ratio <= 1e-3 && hum.terminal_ratio <= 1e-3 && std::abs(norm_ratio - 1.0) <= 0.25 && support;
  r.detail = "FI terminal ratio " + sci(fi.terminal_ratio) + " (cg " + std::to_string(fi.cg_iters) + ", residual " +
             sci(fi.cg_residual) + "), HUM terminal ratio " + sci(hum.terminal_ratio) + ", |h| FI " +
             sci(fi.control_norm) + " vs HUM " + sci(hum.control_norm) + " (ratio " + fmt("%.3f", norm_ratio) +
             ", relative difference " + sci(gap) + "), support " + (support ? "ok" : "violated");
  if (writer) {
    Json a = to_json(fi), b = to_json(hum);
    writer->write_json("control_fi.json", a);
    writer->write_json("control_hum.json", b);
    writer->write_json("control_compare.json",
                       Json{{"norm_ratio", norm_ratio}, {"relative_difference", gap}, {"hum_eps", cfg.hum_eps}});
    std::ostringstream h1, h2;
    write_trajectory_csv(h1, fi.h);
    write_trajectory_csv(h2, hum.h);
    writer->write("h_fi.csv", h1.str());
    writer->write("h_hum.csv", h2.str());
  }
  return r;
}

// ---------------------------------------------------------------- 8

CriterionResult observability_check(const RunConfig& cfg, RunWriter* writer) {
  CriterionResult r = criterion(8, "observability constant");
  r.budget_seconds = 300.0;
  const auto samples = adjoint_samples(cfg.observability_samples, cfg.seed + 8, cfg.geom);
  std::vector<ObservabilityReport> reports;
  std::vector<int> dofs;
  for (double h : {cfg.h_target, 0.5 * cfg.h_target}) {
    const Desk d = make_desk(cfg, cfg.geom, h, cfg.steps);
    reports.push_back(
        observability_constant(d.ops, d.mesh, cfg.params, d.grid, d.eta0.sup_norm, samples, cfg.threads));
    dofs.push_back(d.mesh.vertex_count());
  }
  const double l0 = reports[0].log10_max_ratio, l1 = reports[1].log10_max_ratio;
  const double change = std::isfinite(l0) && std::isfinite(l1) ? std::pow(10.0, std::abs(l1 - l0)) - 1.0 : INFINITY;
  r.passed = std::isfinite(change) && change <= 0.2;
  r.detail = "log10 max ratio " + fmt("%.4f", l0) + " -> " + fmt("%.4f", l1) + " (" + std::to_string(dofs[0]) + " -> " +
             std::to_string(dofs[1]) + " dofs), relative change " + sci(change);
  if (writer) {
    writer->write_json("observability.json",
                       Json{{"coarse", to_json(reports[0])},
                            {"fine", to_json(reports[1])},
                            {"relative_change", json_number(change)}});
  }
  return r;
}

// ---------------------------------------------------------------- 9

std::string jsonl(const NonlinearControlLog& log) {
  std::string out;
  for (const auto& it : log.iterations) out += to_json(it).dump() + "\n";
  return out;
}

CriterionResult nonlinear_check(const RunConfig& cfg, RunWriter* writer) {
  CriterionResult r = criterion(9, "nonlinear local null control");
  r.budget_seconds = 900.0;
  const Desk d = make_desk(cfg, cfg.geom, cfg.h_target, cfg.steps);
  const ThetaStepper stepper(d.ops, cfg.params, d.grid);
  const NodeEnvelope env = node_envelope(cfg.params, d.grid, d.eta0.sup_norm);

  NonlinearControlLog small;
  const ControlResult res = nonlinear_null_control(stepper, env, bump(d, cfg, cfg.u0_h1), small);
  const bool small_ok = small.converged && small.max_contraction < 0.5 && small.iterations.size() <= 10 &&
                        small.cubic_residual <= 1e-8 && res.terminal_ratio <= 1e-3;

  NonlinearControlLog large;
  nonlinear_null_control(stepper, env, bump(d, cfg, 100.0 * cfg.u0_h1), large);
  const bool large_ok = large.diverged && !large.reason.empty();

  const DeltaEstimate est = estimate_delta(stepper, env, bump(d, cfg, cfg.delta_direction_h1), cfg.delta_scales);
  const double delta_h1 = est.delta * cfg.delta_direction_h1;

  r.passed = small_ok && large_ok && est.delta > 0.0;
  r.detail = "x1: " + std::string(small.converged ? "converged" : "not converged: " + small.reason) + " in " +
             std::to_string(small.iterations.size()) + " iterations, max contraction " + sci(small.max_contraction) +
             ", cubic residual " + sci(small.cubic_residual) + ", terminal ratio " + sci(res.terminal_ratio) +
             "; x100: " + (large.diverged ? "diverged (" + large.reason + ")" : "no divergence") +
             "; delta " + sci(delta_h1) + " in H1";
  if (writer) {
    writer->write("nonlinear.jsonl", jsonl(small));
    writer->write_json("nonlinear.json", to_json(small));
    writer->write("nonlinear_x100.jsonl", jsonl(large));
    writer->write_json("nonlinear_x100.json", to_json(large));
    Json de = to_json(est);
    de["delta_h1"] = json_number(delta_h1);
    writer->write_json("estimate_delta.json", de);
  }
  return r;
}

bool same_outputs(const RunWriter& a, const RunWriter& b, std::string& detail) {
  if (a.outputs() != b.outputs()) {
    detail = "output file lists differ";
    return false;
  }
  int differing = 0;
  for (const auto& name : a.outputs()) {
    if (read_file(a.path(name)) != read_file(b.path(name))) {
      if (differing++ == 0) detail = "first differing file " + name;
    }
  }
  if (differing == 0) detail = std::to_string(a.outputs().size()) + " CSV/JSON files byte-identical";
  return differing == 0;
}

}  // namespace

bool AcceptanceReport::all_passed() const {
  return std::all_of(criteria.begin(), criteria.end(), [](const CriterionResult& c) { return c.ok(); });
}

std::string format_line(const CriterionResult& c) {
  const char* verdict = c.ok() ? "PASS" : "FAIL";
  std::string line = "criterion " + std::to_string(c.id) + " " + verdict + " " + c.title + ": " + c.detail;
  line += " [" + fmt("%.1f", c.seconds) + " s";
  if (std::isfinite(c.budget_seconds)) line += " / " + fmt("%.0f", c.budget_seconds) + " s";
  if (!c.within_budget()) line += ", over budget";
  return line + "]";
}

CriterionResult run_criterion(int id, const RunConfig& config, RunWriter* writer) {
  const auto start = Clock::now();
  CriterionResult r;
  switch (id) {
    case 1: r = assembly_check(config, writer); break;
    case 2: r = forward_check(config, writer); break;
    case 3: r = duality_check_criterion(config, writer); break;
    case 4: r = weight_check(config, writer); break;
    case 5: r = identity_check(config, writer); break;
    case 6: r = carleman_check(config, writer); break;
    case 7: r = linear_control_check(config, writer); break;
    case 8: r = observability_check(config, writer); break;
    case 9: r = nonlinear_check(config, writer); break;
    default: throw PreconditionError("run_criterion: no criterion " + std::to_string(id));
  }
  r.seconds = std::chrono::duration<double>(Clock::now() - start).count();
  return r;
}

AcceptanceReport run_acceptance(const RunConfig& config, const std::string& out_dir, std::ostream* progress) {
  namespace fs = std::filesystem;
  AcceptanceReport report;
  RunWriter first((fs::path(out_dir) / "run1").string());
  RunWriter second((fs::path(out_dir) / "run2").string());
  const auto start = Clock::now();
  std::string timing;

  auto run_once = [&](RunWriter& writer, bool record) {
    for (int id = 1; id < kCriteriaCount; ++id) {
      CriterionResult r;
      try {
        r = run_criterion(id, config, &writer);
      } catch (const std::exception& e) {
        r.id = id;
        r.title = "criterion " + std::to_string(id);
        r.detail = std::string("error: ") + e.what();
        r.budget_seconds = 1.0;
      }
      if (!record) continue;
      if (progress) *progress << format_line(r) << std::endl;
      timing += "criterion_" + std::to_string(id) + "_seconds = " + format_double(r.seconds) + "\n";
      report.criteria.push_back(std::move(r));
    }
  };

  run_once(first, true);
  const auto repeat_start = Clock::now();
  run_once(second, false);
  CriterionResult repro = criterion(10, "reproducibility");
  repro.budget_seconds = INFINITY;
  repro.passed = same_outputs(first, second, repro.detail);
  repro.seconds = std::chrono::duration<double>(Clock::now() - repeat_start).count();
  if (progress) *progress << format_line(repro) << std::endl;
  report.criteria.push_back(repro);

  Json checks = Json::object();
  for (const auto& c : report.criteria) checks[std::to_string(c.id)] = c.passed;
  const double wall = std::chrono::duration<double>(Clock::now() - start).count();
  first.finish(config, "verify-all", checks, wall, timing);
  second.finish(config, "verify-all", checks, wall, timing);
  return report;
}

}  // namespace cgl
