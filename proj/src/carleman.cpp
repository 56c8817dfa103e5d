#include "cgl/carleman.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>
#include <ostream>
#include <random>

#include "cgl/parallel.hpp"

namespace cgl {

template <class Real>
Jet<Real> TestFunction::eval(const Eigen::Matrix<Real, 2, 1>& x, Real t, Real T) const {
  using C = std::complex<Real>;
  using Vec = Eigen::Matrix<C, 2, 1>;
  Jet<Real> space;
  for (const Mode& mode : modes) {
    const Eigen::Matrix<Real, 2, 1> c = mode.center.cast<Real>();
    const Eigen::Matrix<Real, 2, 1> k = mode.wave.cast<Real>();
    const Real beta = static_cast<Real>(mode.beta);
    const Eigen::Matrix<Real, 2, 1> d = x - c;
    const C q(-beta * d.squaredNorm(), k.dot(x));
    const C g = C(static_cast<Real>(mode.amplitude.real()), static_cast<Real>(mode.amplitude.imag())) * std::exp(q);
    Vec dq;
    dq << C(-2 * beta * d.x(), k.x()), C(-2 * beta * d.y(), k.y());
    space.v += g;
    space.grad += g * dq;
    Eigen::Matrix<C, 2, 2> h = dq * dq.transpose();
    h(0, 0) += C(-2 * beta);
    h(1, 1) += C(-2 * beta);
    space.hess += g * h;
  }
  const Real base = t * (T - t);
  const Real tau = std::pow(base, static_cast<Real>(time_power));
  const Real dtau = time_power == 0 ? Real(0)
                                    : time_power * std::pow(base, static_cast<Real>(time_power - 1)) * (T - 2 * t);
  Jet<Real> out;
  out.v = tau * space.v;
  out.vt = dtau * space.v;
  out.grad = tau * space.grad;
  out.hess = tau * space.hess;
  return out;
}

template Jet<double> TestFunction::eval(const Eigen::Vector2d&, double, double) const;
template Jet<long double> TestFunction::eval(const Eigen::Matrix<long double, 2, 1>&, long double,
                                             long double) const;

TestFunctionFamily make_family(std::uint64_t seed, int count, const DiskGeometry& geom) {
  require(count >= 0, "make_family: negative count");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  const double R = geom.R;
  TestFunctionFamily family;
  family.seed = seed;
  for (int j = 0; j < count; ++j) {
    TestFunction f;
    const int modes = 1 + static_cast<int>(unit(rng) * 3.0);
    for (int q = 0; q < modes; ++q) {
      Mode m;
      m.amplitude = Complex(normal(rng), normal(rng));
      const double r = 0.6 * R * std::sqrt(unit(rng));
      const double a = 2.0 * std::numbers::pi * unit(rng);
      m.center = Point(r * std::cos(a), r * std::sin(a));
      m.beta = (0.5 + 2.5 * unit(rng)) / (R * R);
      m.wave = Point(6.0 * unit(rng) - 3.0, 6.0 * unit(rng) - 3.0) / R;
      f.modes.push_back(m);
    }
    family.members.push_back(std::move(f));
  }
  return family;
}

TestFunction control_bump(const DiskGeometry& geom) {
  TestFunction f;
  Mode m;
  m.center = Point(0.5 * geom.r_control, 0.0);
  m.beta = 1.0 / (geom.r_control * geom.r_control);
  f.modes.push_back(m);
  return f;
}

std::vector<CollocationPoint> collocation_points(const DiskGeometry& geom, double T, int count, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<CollocationPoint> pts(count);
  for (auto& p : pts) {
    const double r = geom.R * std::sqrt(unit(rng)) * 0.999;
    const double a = 2.0 * std::numbers::pi * unit(rng);
    p.x = Point(r * std::cos(a), r * std::sin(a));
    p.t = T * (0.2 + 0.6 * unit(rng));
  }
  return pts;
}

template <class Real>
ConjugateBundle<Real> conjugate_bundle(const TestFunction& v, const Params& params, const DiskGeometry& geom,
                                       const CollocationPoint& point) {
  using C = std::complex<Real>;
  using Vec = Eigen::Matrix<Real, 2, 1>;
  const Real a = params.a, b = params.b, alpha = params.alpha;
  const Real s = params.s, lam = params.lambda, m = params.m, T = params.T;
  const Real R = geom.R;
  const Real sup = R * R;
  const Real t = point.t;
  const C I(0, 1);
  const C conj_disp = C(1) - alpha * I;

  ConjugateBundle<Real> out;
  {
    const Vec x = point.x.cast<Real>();
    const Jet<Real> j = v.eval<Real>(x, t, T);
    const Real eta = sup - x.squaredNorm();
    const Vec geta = Real(-2) * x;
    const Real lap_eta = -4;
    const Real g2 = geta.squaredNorm();
    const Real xi = carleman_xi(eta, t, T, lam, m, sup);
    const Real phi_t = carleman_phi_t(eta, t, T, lam, m, sup);
    const Vec gphi = -lam * xi * geta;
    const Real lap_phi = -lam * lam * xi * g2 - lam * xi * lap_eta;

    const C w = j.v;
    const Eigen::Matrix<C, 2, 1> gw = j.grad - (s * j.v) * gphi.template cast<C>();
    const C gphi_gv = gphi.template cast<C>().dot(j.grad);
    const C lap_w = j.laplacian() - 2 * s * gphi_gv - s * lap_phi * j.v + s * s * gphi.squaredNorm() * j.v;
    const C wt = j.vt - s * phi_t * j.v;
    const C geta_gw = geta.x() * gw(0) + geta.y() * gw(1);

    const C first = s * s * lam * lam * g2 * xi * xi * w + lap_w;
    const C second = 2 * s * lam * xi * geta_gw + (s * lam * lam * g2 + s * lam * lap_eta) * xi * w;
    out.p1 = a * first + a * alpha * I * second + s * phi_t * w;
    out.p2 = -a * second - a * alpha * I * first + wt;
    out.r = j.vt + a * conj_disp * j.laplacian();
  }
  {
    const Real rx = point.x.norm();
    const Vec nu = rx > 0 ? Vec(point.x.cast<Real>() / static_cast<Real>(rx)) : Vec(1, 0);
    const Vec x = R * nu;
    const Vec tan(-nu.y(), nu.x());
    const Jet<Real> j = v.eval<Real>(x, t, T);
    const Real eta = 0;
    const Real dn_eta = Real(-2) * x.dot(nu);
    const Real xi = carleman_xi(eta, t, T, lam, m, sup);
    const Real phi_t = carleman_phi_t(eta, t, T, lam, m, sup);
    const Real dn_phi = -lam * xi * dn_eta;

    const C dn_v = nu.x() * j.grad(0) + nu.y() * j.grad(1);
    const C tht = (tan.template cast<C>().transpose() * j.hess * tan.template cast<C>())(0, 0);
    const C lapg_v = tht - dn_v / R;
    const C w = j.v;
    const C dn_w = dn_v - s * dn_phi * j.v;
    const C lapg_w = lapg_v;
    const C wt = j.vt - s * phi_t * j.v;
    const C f_gamma = j.vt - a * conj_disp * dn_v + b * conj_disp * lapg_v;
    const Real k = 2 * a * a / b;
    out.pg1 = b * lapg_w - k * alpha * I * s * lam * dn_eta * xi * w + s * phi_t * w;
    out.pg2 = -alpha * b * I * lapg_w + k * s * lam * dn_eta * xi * w + wt;
    out.rg = f_gamma - a * conj_disp * s * lam * dn_eta * xi * w + a * conj_disp * dn_w +
             k * conj_disp * s * lam * dn_eta * xi * w;
  }
  return out;
}

template ConjugateBundle<double> conjugate_bundle(const TestFunction&, const Params&, const DiskGeometry&,
                                                  const CollocationPoint&);
template ConjugateBundle<long double> conjugate_bundle(const TestFunction&, const Params&, const DiskGeometry&,
                                                       const CollocationPoint&);

IdentityDefect conjugate_identity_defect(const TestFunction& v, const Params& params, const DiskGeometry& geom,
                                         const std::vector<CollocationPoint>& points) {
  IdentityDefect d;
  for (std::size_t p = 0; p < points.size(); ++p) {
    const CollocationPoint& pt = points[p];
    require(pt.t > 0 && pt.t < params.T, "conjugate_identity_defect: collocation times must be interior");
    const auto b = conjugate_bundle<long double>(v, params, geom, pt);
    const long double bulk = std::abs(b.p1 + b.p2 - b.r) / std::max(std::abs(b.r), 1.0L);
    const long double bnd = std::abs(b.pg1 + b.pg2 - b.rg) / std::max(std::abs(b.rg), 1.0L);
    if (!std::isfinite(static_cast<double>(bulk)) || !std::isfinite(static_cast<double>(bnd))) {
      char buf[128];
      std::snprintf(buf, sizeof buf, "conjugate_identity_defect: non-finite value at point %zu (x=%g,%g t=%g)", p,
                    pt.x.x(), pt.x.y(), pt.t);
      throw NumericalError(buf);
    }
    const double prev = d.worst();
    d.bulk = std::max(d.bulk, static_cast<double>(bulk));
    d.boundary = std::max(d.boundary, static_cast<double>(bnd));
    if (d.worst() > prev) d.worst_point = static_cast<int>(p);
  }
  return d;
}

const std::vector<std::string>& carleman_term_names() {
  static const std::vector<std::string> names = {
      "bulk_v",  "bulk_grad",  "bulk_dt",     "bulk_lap",     "surf_v",  "surf_grad",
      "surf_dn", "surf_dt",    "surf_lapg",   "rhs_omega",    "rhs_bulk", "rhs_surf"};
  return names;
}

namespace {

// streaming log-sum-exp
struct LogAccumulator {
  double top = -std::numeric_limits<double>::infinity();
  double sum = 0.0;

  void add(double x) {
    if (!(x > -std::numeric_limits<double>::infinity())) return;
    if (x <= top) {
      sum += std::exp(x - top);
    } else {
      sum = sum * std::exp(top - x) + 1.0;
      top = x;
    }
  }
  double value() const { return sum > 0.0 ? top + std::log(sum) : -std::numeric_limits<double>::infinity(); }
};

struct Quadrature {
  RVector bulk, omega, surface;
};

Quadrature lumped_masses(const Mesh& mesh) {
  const OperatorSet ops = assemble(mesh);
  const RVector ones = RVector::Ones(mesh.vertex_count());
  return {ops.mass_bulk * ones, ops.mass_control * ones, ops.mass_surface * ones};
}

CarlemanRow evaluate_row(const TestFunction& v, int member, double s, double lam, const Params& base,
                         const Mesh& mesh, const DiskGeometry& geom, const TimeGrid& grid, const Quadrature& q) {
  constexpr int kTerms = 12;
  std::vector<LogAccumulator> acc(kTerms);
  CarlemanRow row;
  row.member_id = member;
  row.s = s;
  row.lambda = lam;
  const double a = base.a, b = base.b, alpha = base.alpha, m = base.m, T = grid.T;
  const double sup = geom.R * geom.R;
  const double log_floor = std::log(base.weight_floor);
  const Complex conj_disp(1.0, -alpha);
  const double log_dt = std::log(grid.dt());
  long clamped = 0, samples = 0;

  auto add = [&](int term, double log_base, double coef, double mag2) {
    if (coef < 0.0 || mag2 < 0.0) row.nonnegative = false;
    if (coef > 0.0 && mag2 > 0.0) acc[term].add(log_base + std::log(coef) + std::log(mag2));
  };

  for (int n = 1; n < grid.steps; ++n) {
    const double t = grid.node(n);
    for (int i = 0; i < mesh.vertex_count(); ++i) {
      const Point& x = mesh.vertices[i];
      const double eta = mesh.on_boundary[i] ? 0.0 : sup - x.squaredNorm();
      const double phi = carleman_phi(eta, t, T, lam, m, sup);
      const double xi = carleman_xi(eta, t, T, lam, m, sup);
      const double lw = -2.0 * s * phi;
      ++samples;
      if (lw < log_floor) ++clamped;
      const Jet<double> j = v.eval<double>(x, t, T);
      const double v2 = std::norm(j.v);
      const Complex lapv = j.laplacian();
      if (q.bulk[i] > 0.0) {
        const double lb = log_dt + std::log(q.bulk[i]) + lw;
        add(0, lb, s * s * s * std::pow(lam, 4) * xi * xi * xi, v2);
        add(1, lb, s * lam * lam * xi, j.grad.squaredNorm());
        add(2, lb, 1.0 / (s * xi), std::norm(j.vt));
        add(3, lb, 1.0 / (s * xi), std::norm(lapv));
        add(10, lb, 1.0, std::norm(j.vt + a * conj_disp * lapv));
      }
      if (q.omega[i] > 0.0) {
        add(9, log_dt + std::log(q.omega[i]) + lw, s * s * s * std::pow(lam, 4) * xi * xi * xi, v2);
      }
      if (mesh.on_boundary[i] && q.surface[i] > 0.0) {
        const double lb = log_dt + std::log(q.surface[i]) + lw;
        const Point nu = x / x.norm();
        const Point tan(-nu.y(), nu.x());
        const Complex dn = nu.x() * j.grad(0) + nu.y() * j.grad(1);
        const Complex dtan = tan.x() * j.grad(0) + tan.y() * j.grad(1);
        const Complex tht = (tan.cast<Complex>().transpose() * j.hess * tan.cast<Complex>())(0, 0);
        const Complex lapg = tht - dn / geom.R;
        add(4, lb, s * s * s * lam * lam * lam * xi * xi * xi, v2);
        add(5, lb, s * lam * xi, std::norm(dtan));
        add(6, lb, s * lam, std::norm(dn));
        add(7, lb, 1.0 / (s * xi), std::norm(j.vt));
        add(8, lb, 1.0 / (s * xi), std::norm(lapg));
        add(11, lb, 1.0, std::norm(j.vt - a * conj_disp * dn + b * conj_disp * lapg));
      }
    }
  }
  if (q.bulk.minCoeff() < 0.0 || q.surface.minCoeff() < 0.0 || q.omega.minCoeff() < 0.0) row.nonnegative = false;

  LogAccumulator lhs, rhs;
  row.log10_terms.resize(kTerms);
  for (int k = 0; k < kTerms; ++k) {
    const double lv = acc[k].value();
    row.log10_terms[k] = lv / std::numbers::ln10;
    (k < kCarlemanLhsTerms ? lhs : rhs).add(lv);
  }
  const double ll = lhs.value(), lr = rhs.value();
  const double ninf = -std::numeric_limits<double>::infinity();
  row.log10_lhs = ll / std::numbers::ln10;
  row.log10_rhs = lr / std::numbers::ln10;
  row.degenerate = ll == ninf && lr == ninf;
  row.impossible = lr == ninf && ll > ninf;
  if (row.degenerate) {
    row.ratio = std::numeric_limits<double>::quiet_NaN();
  } else if (row.impossible) {
    row.ratio = std::numeric_limits<double>::infinity();
  } else {
    row.ratio = std::exp(ll - lr);
  }
  row.clamped_fraction = samples > 0 ? static_cast<double>(clamped) / samples : 0.0;
  return row;
}

}  // namespace

std::vector<CarlemanRow> carleman_ratio(const TestFunctionFamily& family, const Params& params,
                                        const std::vector<double>& s_list, const std::vector<double>& lambda_list,
                                        const Mesh& mesh, const DiskGeometry& geom, const TimeGrid& grid,
                                        int threads) {
  require(grid.steps >= 2, "carleman_ratio: need interior time nodes");
  for (double s : s_list) require(s > 1.0, "carleman_ratio: s must exceed 1");
  for (double l : lambda_list) {
    require(l > 1.0, "carleman_ratio: lambda must exceed 1");
    Params p = params;
    p.lambda = l;
    check_weight_range(p, geom.R * geom.R);
  }
  const Quadrature q = lumped_masses(mesh);
  const int nm = static_cast<int>(family.members.size());
  const int ns = static_cast<int>(s_list.size());
  const int nl = static_cast<int>(lambda_list.size());
  std::vector<CarlemanRow> rows(static_cast<std::size_t>(nm) * ns * nl);
  parallel_for(static_cast<int>(rows.size()), threads, [&](int idx) {
    const int member = idx / (ns * nl);
    const int rest = idx % (ns * nl);
    const int si = rest / nl;
    const int li = rest % nl;
    rows[idx] = evaluate_row(family.members[member], member, s_list[si], lambda_list[li], params, mesh, geom, grid, q);
  });
  return rows;
}

void write_ratio_csv(std::ostream& out, const std::vector<CarlemanRow>& rows) {
  const auto& names = carleman_term_names();
  out << "member_id,s,lambda,log10_lhs,log10_rhs,ratio,clamped_fraction";
  for (const auto& n : names) out << ",log10_" << n;
  out << '\n';
  char buf[40];
  auto num = [&](double x) {
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return std::string(buf);
  };
  for (const auto& r : rows) {
    out << r.member_id << ',' << num(r.s) << ',' << num(r.lambda) << ',' << num(r.log10_lhs) << ','
        << num(r.log10_rhs) << ',' << num(r.ratio) << ',' << num(r.clamped_fraction);
    for (double t : r.log10_terms) out << ',' << num(t);
    out << '\n';
  }
}

}  // namespace cgl
