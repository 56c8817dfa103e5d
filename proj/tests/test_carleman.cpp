#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "cgl/carleman.hpp"
#include "support.hpp"

using namespace cgl;

namespace {

Params audit_params() {
  Params p;
  p.s = 5.0;
  p.lambda = 2.0;
  return p;
}

}  // namespace

TEST_CASE("test-function jets agree with finite differences") {
  const DiskGeometry geom;
  const TestFunctionFamily fam = make_family(3, 6, geom);
  const double d = 1e-6, T = 1.0;
  for (const TestFunction& v : fam.members) {
    for (const auto& [x, t] : {std::pair{Point(0.1, -0.2), 0.3}, std::pair{Point(-0.5, 0.4), 0.7}}) {
      const Jet<double> j = v.eval<double>(x, t, T);
      const Complex vt = (v.eval<double>(x, t + d, T).v - v.eval<double>(x, t - d, T).v) / (2 * d);
      CHECK(std::abs(vt - j.vt) <= 1e-8 * (1 + std::abs(j.vt)));
      for (int c = 0; c < 2; ++c) {
        Point e = Point::Zero();
        e[c] = d;
        const Jet<double> jp = v.eval<double>(x + e, t, T), jm = v.eval<double>(x - e, t, T);
        const Complex g = (jp.v - jm.v) / (2 * d);
        CHECK(std::abs(g - j.grad[c]) <= 1e-8 * (1 + std::abs(j.grad[c])));
        for (int r = 0; r < 2; ++r) {
          const Complex h = (jp.grad[r] - jm.grad[r]) / (2 * d);
          CHECK(std::abs(h - j.hess(r, c)) <= 1e-7 * (1 + std::abs(j.hess(r, c))));
        }
      }
    }
  }
}

TEST_CASE("conjugated identity holds on a random family") {
  const DiskGeometry geom;
  const Params p = audit_params();
  const TestFunctionFamily fam = make_family(1, 5, geom);
  const auto pts = collocation_points(geom, p.T, 60, 9);
  for (const TestFunction& v : fam.members) CHECK(conjugate_identity_defect(v, p, geom, pts).worst() <= 1e-9);
}

TEST_CASE("identity for the zero function is exact") {
  const DiskGeometry geom;
  const auto pts = collocation_points(geom, 1.0, 40, 2);
  const IdentityDefect d = conjugate_identity_defect(TestFunction{{}, 3}, audit_params(), geom, pts);
  CHECK(d.bulk == 0.0);
  CHECK(d.boundary == 0.0);
}

TEST_CASE("identity for a space-constant function") {
  // v = t^2 (T - t)^2: every spatial derivative of v vanishes, so each component reduces to a scalar
  using L = long double;
  using C = std::complex<L>;
  const DiskGeometry geom;
  const TestFunction v{{Mode{}}, 2};
  const Params p = audit_params();
  const L a = p.a, b = p.b, al = p.alpha, s = p.s, lam = p.lambda, m = p.m;
  const C I(0, 1);
  const auto pts = collocation_points(geom, p.T, 80, 4);
  for (const auto& pt : pts) {
    const L t = pt.t, g = t * t * (1 - t) * (1 - t), dg = 2 * t * (1 - t) * (1 - 2 * t);
    const L tt = t * (1 - t);
    const auto bundle = conjugate_bundle<L>(v, p, geom, pt);

    const L r2 = pt.x.squaredNorm();
    const L xi = std::exp(lam * (m + 1 - r2)) / tt;
    const L phi = (std::exp(2 * lam * m) - std::exp(lam * (m + 1 - r2))) / tt;
    const L phi_t = -phi * (1 - 2 * t) / tt;
    const L X = 2 * s * s * lam * lam * 4 * r2 * xi * xi * g + s * lam * lam * 4 * r2 * xi * g - 4 * s * lam * xi * g;
    const C p1 = a * X + a * al * I * X + s * phi_t * g;
    const C p2 = -a * X - a * al * I * X + dg - s * phi_t * g;
    const L scale = std::max({std::abs(p1), std::abs(p2), L(1)});
    CHECK(static_cast<double>(std::abs(bundle.p1 - p1) / scale) <= 1e-12);
    CHECK(static_cast<double>(std::abs(bundle.p2 - p2) / scale) <= 1e-12);
    CHECK(static_cast<double>(std::abs(bundle.r - dg)) <= 1e-15);
    CHECK(static_cast<double>(std::abs(bundle.p1 + bundle.p2 - bundle.r) / scale) <= 1e-12);

    const L xg = std::exp(lam * m) / tt;
    const L phig = (std::exp(2 * lam * m) - std::exp(lam * m)) / tt;
    const L phig_t = -phig * (1 - 2 * t) / tt;
    const L k = 2 * a * a / b, dn = -2;
    const C pg1 = -k * al * I * s * lam * dn * xg * g + s * phig_t * g;
    const C pg2 = k * s * lam * dn * xg * g + dg - s * phig_t * g;
    const C rg = dg + k * (L(1) - al * I) * s * lam * dn * xg * g;
    const L gscale = std::max({std::abs(pg1), std::abs(pg2), L(1)});
    CHECK(static_cast<double>(std::abs(bundle.pg1 - pg1) / gscale) <= 1e-12);
    CHECK(static_cast<double>(std::abs(bundle.pg2 - pg2) / gscale) <= 1e-12);
    CHECK(static_cast<double>(std::abs(bundle.rg - rg) / gscale) <= 1e-12);
    CHECK(static_cast<double>(std::abs(bundle.pg1 + bundle.pg2 - bundle.rg) / gscale) <= 1e-12);
  }
  CHECK(conjugate_identity_defect(v, p, geom, pts).worst() <= 1e-9);
}

TEST_CASE("families and collocation points are reproducible") {
  const DiskGeometry geom;
  const auto a = make_family(8, 4, geom), b = make_family(8, 4, geom);
  REQUIRE(a.members.size() == 4);
  for (std::size_t k = 0; k < 4; ++k) {
    REQUIRE(a.members[k].modes.size() == b.members[k].modes.size());
    for (std::size_t q = 0; q < a.members[k].modes.size(); ++q) {
      CHECK(a.members[k].modes[q].amplitude == b.members[k].modes[q].amplitude);
      CHECK(a.members[k].modes[q].center == b.members[k].modes[q].center);
    }
  }
  const auto p = collocation_points(geom, 1.0, 30, 3), q = collocation_points(geom, 1.0, 30, 3);
  for (std::size_t k = 0; k < p.size(); ++k) {
    CHECK(p[k].x == q[k].x);
    CHECK(p[k].t == q[k].t);
    CHECK(p[k].x.norm() < geom.R);
    CHECK(p[k].t > 0.0);
    CHECK(p[k].t < 1.0);
  }
}

TEST_CASE("ratio sweep terms are non-negative and finite in log scale") {
  const test::Small s;
  const TestFunctionFamily fam = make_family(2, 3, s.geom);
  const TimeGrid grid{8, 1.0};
  const auto rows = carleman_ratio(fam, Params{}, {5.0, 10.0}, {2.0}, s.mesh, s.geom, grid, 2);
  REQUIRE(rows.size() == 6);
  for (const auto& r : rows) {
    CHECK(r.nonnegative);
    CHECK(r.log10_terms.size() == carleman_term_names().size());
    CHECK(std::isfinite(r.log10_lhs));
    CHECK(std::isfinite(r.log10_rhs));
    CHECK(r.ratio >= 0.0);
    CHECK_FALSE(r.impossible);
  }
  const auto again = carleman_ratio(fam, Params{}, {5.0, 10.0}, {2.0}, s.mesh, s.geom, grid, 1);
  for (std::size_t k = 0; k < rows.size(); ++k) CHECK(rows[k].log10_lhs == again[k].log10_lhs);
}
