#include <doctest.h>

#include <cmath>
#include <numbers>
#include <sstream>

#include "cgl/assembly.hpp"
#include "cgl/geometry.hpp"

using namespace cgl;

namespace {

double signed_area(const Mesh& m, const std::array<int, 3>& t) {
  const Point a = m.vertices[t[0]], b = m.vertices[t[1]], c = m.vertices[t[2]];
  return 0.5 * ((b - a).x() * (c - a).y() - (b - a).y() * (c - a).x());
}

}  // namespace

TEST_CASE("mesh triangles are counter-clockwise and tile the inscribed polygon") {
  const DiskGeometry geom;
  const Mesh m = build_mesh(geom, 0.1, 3);
  double area = 0.0;
  for (const auto& t : m.triangles) {
    const double a = signed_area(m, t);
    CHECK(a > 0.0);
    area += a;
  }
  const int K = m.boundary_count();
  const double polygon = 0.5 * K * std::sin(2 * std::numbers::pi / K);
  double poly_exact = 0.0;
  for (int k = 0; k < K; ++k) {
    const Point p = m.vertices[m.boundary_loop[k]], q = m.vertices[m.boundary_loop[(k + 1) % K]];
    poly_exact += 0.5 * (p.x() * q.y() - p.y() * q.x());
  }
  CHECK(area == doctest::Approx(poly_exact).epsilon(1e-12));
  CHECK(poly_exact <= std::numbers::pi);
  CHECK(polygon > 0.0);
  CHECK(m.h_max <= 0.2);
}

TEST_CASE("boundary vertices lie on the circle with outward normals") {
  const DiskGeometry geom{2.0, 0.5, 1.0};
  const Mesh m = build_mesh(geom, 0.2, 0);
  double length = 0.0;
  for (int k = 0; k < m.boundary_count(); ++k) {
    const Point x = m.vertices[m.boundary_loop[k]];
    CHECK(x.norm() == doctest::Approx(2.0).epsilon(1e-14));
    CHECK(m.outward_normals[k].dot(x / 2.0) == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(m.on_boundary[m.boundary_loop[k]]);
    length += m.edge_arclength[k];
  }
  CHECK(length == doctest::Approx(4 * std::numbers::pi).epsilon(1e-12));
}

TEST_CASE("eta0 and its normal derivative") {
  const DiskGeometry geom;
  const Mesh m = build_mesh(geom, 0.1, 0);
  const Eta0Field e = build_eta0(m, geom);
  CHECK(e.sup_norm == doctest::Approx(1.0));
  for (int i = 0; i < m.vertex_count(); ++i) {
    CHECK(e.values[i] == doctest::Approx(1.0 - m.vertices[i].squaredNorm()).epsilon(1e-14));
    CHECK(e.values[i] >= -1e-14);
  }
  const RVector dn = normal_derivative_eta0(m, e);
  for (Eigen::Index k = 0; k < dn.size(); ++k) CHECK(dn[k] == doctest::Approx(-2.0).epsilon(1e-12));
}

TEST_CASE("control mask is an indicator ramp inside r_control") {
  const DiskGeometry geom;
  const Mesh m = build_mesh(geom, 0.1, 0);
  const RVector chi = control_mask(m, geom.r_control);
  for (int i = 0; i < m.vertex_count(); ++i) {
    const double r = m.vertices[i].norm();
    CHECK(chi[i] >= 0.0);
    CHECK(chi[i] <= 1.0);
    if (r >= geom.r_control) CHECK(chi[i] == 0.0);
    if (r <= geom.r_control - m.h_max) CHECK(chi[i] == 1.0);
  }
}

TEST_CASE("mesh text round trip") {
  const DiskGeometry geom;
  const Mesh m = build_mesh(geom, 0.1, 7);
  std::stringstream io;
  write_mesh(io, m);
  const Mesh back = read_mesh(io, geom);
  REQUIRE(back.vertex_count() == m.vertex_count());
  REQUIRE(back.triangles == m.triangles);
  CHECK(back.boundary_loop == m.boundary_loop);
  for (int i = 0; i < m.vertex_count(); ++i) CHECK((back.vertices[i] - m.vertices[i]).norm() == 0.0);
  CHECK(back.h_max == m.h_max);
}

TEST_CASE("mesh seeds are deterministic") {
  const DiskGeometry geom;
  const Mesh a = build_mesh(geom, 0.1, 5), b = build_mesh(geom, 0.1, 5);
  REQUIRE(a.vertex_count() == b.vertex_count());
  for (int i = 0; i < a.vertex_count(); ++i) CHECK(a.vertices[i] == b.vertices[i]);
}

TEST_CASE("invalid geometry and resolution are rejected") {
  CHECK_THROWS_AS(build_mesh(DiskGeometry{}, 0.5, 0), PreconditionError);
  CHECK_THROWS_AS(build_mesh(DiskGeometry{1.0, 0.6, 0.5}, 0.1, 0), PreconditionError);
  CHECK_THROWS_AS(build_mesh(DiskGeometry{-1.0, 0.25, 0.5}, 0.1, 0), PreconditionError);
  CHECK_THROWS_AS(build_mesh(DiskGeometry{}, 0.0, 0), PreconditionError);
}
