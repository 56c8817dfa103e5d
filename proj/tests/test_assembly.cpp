#include <doctest.h>

#include <cmath>
#include <numbers>

#include "cgl/assembly.hpp"
#include "support.hpp"

using namespace cgl;

namespace {

double polygon_area(const Mesh& m) {
  double a = 0.0;
  const int K = m.boundary_count();
  for (int k = 0; k < K; ++k) {
    const Point p = m.vertices[m.boundary_loop[k]], q = m.vertices[m.boundary_loop[(k + 1) % K]];
    a += 0.5 * (p.x() * q.y() - p.y() * q.x());
  }
  return a;
}

double asym(const SpMat& A) { return (SpMat(A - SpMat(A.transpose()))).norm(); }

}  // namespace

TEST_CASE("mass matrices integrate constants") {
  const DiskGeometry geom;
  const Mesh m = build_mesh(geom, 0.1, 2);
  const OperatorSet ops = assemble(m);
  const RVector one = RVector::Ones(m.vertex_count());
  CHECK(one.dot(ops.mass_bulk * one) == doctest::Approx(polygon_area(m)).epsilon(1e-12));
  CHECK(one.dot(ops.mass_surface * one) == doctest::Approx(2 * std::numbers::pi).epsilon(1e-12));
  CHECK(asym(ops.mass_bulk) == 0.0);
  CHECK(asym(ops.mass_surface) == 0.0);
  CHECK(asym(ops.stiff_bulk) <= 1e-14);
  CHECK(asym(ops.stiff_surface) <= 1e-14);
}

TEST_CASE("stiffness matrices annihilate constants and integrate linear gradients") {
  const DiskGeometry geom;
  const Mesh m = build_mesh(geom, 0.1, 2);
  const OperatorSet ops = assemble(m);
  const int n = m.vertex_count();
  const RVector one = RVector::Ones(n);
  CHECK((ops.stiff_bulk * one).norm() <= 1e-12);
  CHECK((ops.stiff_surface * one).norm() <= 1e-12);
  RVector x(n), y(n);
  for (int i = 0; i < n; ++i) {
    x[i] = m.vertices[i].x();
    y[i] = m.vertices[i].y();
  }
  CHECK(x.dot(ops.stiff_bulk * x) == doctest::Approx(polygon_area(m)).epsilon(1e-12));
  CHECK(x.dot(ops.stiff_bulk * y) == doctest::Approx(0.0).epsilon(1e-12));
  // ∫_Γ |∂_s x|^2 = π on the unit circle, approached at second order
  CHECK(x.dot(ops.stiff_surface * x) == doctest::Approx(std::numbers::pi).epsilon(2e-3));
}

TEST_CASE("control mass is the masked bulk mass") {
  const DiskGeometry geom;
  const Mesh m = build_mesh(geom, 0.1, 2);
  const OperatorSet ops = assemble(m);
  const SpMat expect = SpMat(ops.control_mask.asDiagonal()) * ops.mass_bulk * SpMat(ops.control_mask.asDiagonal());
  CHECK((SpMat(expect - ops.mass_control)).norm() <= 1e-15);
  for (int k = 0; k < ops.mass_control.outerSize(); ++k) {
    for (SpMat::InnerIterator it(ops.mass_control, k); it; ++it) {
      if (it.value() != 0.0) {
        CHECK(m.vertices[it.row()].norm() < geom.r_control);
      }
    }
  }
}

TEST_CASE("H1 norm of a constant is its L2 norm") {
  const test::Small s;
  const CVector one = CVector::Constant(s.ops.size(), Complex(0.0, 2.0));
  const HkNorms n = hk_norms(s.ops, one);
  CHECK(n.H1 == doctest::Approx(n.L2).epsilon(1e-12));
  CHECK(std::real(energy_product(s.ops, one, one)) == doctest::Approx(n.L2 * n.L2).epsilon(1e-12));
}
