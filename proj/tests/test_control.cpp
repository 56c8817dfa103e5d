#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <random>

#include "cgl/control.hpp"
#include "support.hpp"

using namespace cgl;

namespace {

struct Problem {
  test::Small s;
  Params p;
  TimeGrid grid{16, 1.0};
  Problem() { p.cg_maxit = 600; }
  NodeEnvelope env() const { return node_envelope(p, grid, 1.0); }
};

CVector bump(const Mesh& m, double amp) {
  CVector u(m.vertex_count());
  for (int i = 0; i < m.vertex_count(); ++i) {
    u[i] = amp * std::exp(-4 * (m.vertices[i] - Point(0.3, 0.1)).squaredNorm());
  }
  return u;
}

}  // namespace

TEST_CASE("conjugate gradient solves a small SPD system") {
  std::mt19937_64 rng(3);
  const int n = 12;
  const Eigen::MatrixXcd G = Eigen::MatrixXcd::Random(n, n);
  const Eigen::MatrixXcd A = G.adjoint() * G + Eigen::MatrixXcd::Identity(n, n);
  const CVector b = test::random_field(rng, n);
  CVector x;
  const auto inner = [](const CVector& u, const CVector& v) { return u.dot(v).real(); };
  const CgReport r = conjugate_gradient([&](const CVector& v) { return CVector(A * v); }, inner, b, x, 1e-13, 200);
  CHECK(r.converged);
  CHECK((A * x - b).norm() <= 1e-12 * b.norm());
}

TEST_CASE("variational operator is Hermitian and positive") {
  const Problem pr;
  const ThetaStepper stepper(pr.s.ops, pr.p, pr.grid);
  const VariationalSystem sys(stepper, pr.env());
  std::mt19937_64 rng(17);
  const int n = static_cast<int>(sys.size());
  for (int k = 0; k < 100; ++k) {
    const CVector w = test::random_field(rng, n), z = test::random_field(rng, n);
    const CVector aw = sys.apply(w), az = sys.apply(z);
    const Complex lhs = w.dot(az), rhs = aw.dot(z);
    CHECK(std::abs(lhs - rhs) <= 1e-12 * w.norm() * az.norm());
    CHECK(z.dot(az).real() > 0.0);
  }
}

TEST_CASE("flux identification is linear in the data") {
  const Problem pr;
  const ThetaStepper stepper(pr.s.ops, pr.p, pr.grid);
  const CVector u0 = bump(pr.s.mesh, 1.0);
  const ControlResult base = solve_fi_variational(stepper, pr.env(), u0, Trajectory{});
  const Complex kappa(-0.7, 2.3);
  const ControlResult scaled = solve_fi_variational(stepper, pr.env(), kappa * u0, Trajectory{});
  double diff = 0.0, ref = 0.0;
  for (std::size_t k = 0; k < base.h.frames.size(); ++k) {
    diff = std::max(diff, (scaled.h.frames[k] - kappa * base.h.frames[k]).norm());
    ref = std::max(ref, (kappa * base.h.frames[k]).norm());
  }
  CHECK(ref > 0.0);
  CHECK(diff <= 1e-9 * ref);
  CHECK(base.support_violation == 0.0);
  CHECK(base.terminal_ratio < 1.0);
}

TEST_CASE("zero data need no control") {
  const Problem pr;
  const ThetaStepper stepper(pr.s.ops, pr.p, pr.grid);
  const ControlResult r = solve_fi_variational(stepper, pr.env(), CVector::Zero(pr.s.ops.size()), Trajectory{});
  CHECK(r.converged);
  CHECK(test::max_abs(r.h) == 0.0);
  CHECK(r.control_norm == 0.0);
}

TEST_CASE("penalized HUM drives the state closer to zero as the penalty shrinks") {
  const Problem pr;
  const ThetaStepper stepper(pr.s.ops, pr.p, pr.grid);
  const CVector u0 = bump(pr.s.mesh, 1.0);
  double last = INFINITY;
  for (double eps : {1e-2, 1e-4, 1e-6}) {
    const ControlResult r = penalized_hum(stepper, u0, Trajectory{}, eps);
    CHECK(r.terminal_ratio < last);
    CHECK(r.support_violation == 0.0);
    last = r.terminal_ratio;
  }
  CHECK_THROWS_AS(penalized_hum(stepper, u0, Trajectory{}, 0.0), PreconditionError);
}

TEST_CASE("nonlinear control with small data converges") {
  Problem pr;
  pr.p.picard_cg_maxit = 200;
  const ThetaStepper stepper(pr.s.ops, pr.p, pr.grid);
  NonlinearControlLog log;
  const ControlResult r = nonlinear_null_control(stepper, pr.env(), bump(pr.s.mesh, 1e-3), log);
  CHECK(log.converged);
  CHECK_FALSE(log.diverged);
  CHECK(log.max_contraction < 1.0);
  CHECK(r.support_violation == 0.0);
}

TEST_CASE("delta estimation rejects a zero direction") {
  const Problem pr;
  const ThetaStepper stepper(pr.s.ops, pr.p, pr.grid);
  CHECK_THROWS_AS(estimate_delta(stepper, pr.env(), CVector::Zero(pr.s.ops.size()), {1.0, 0.5}),
                  PreconditionError);
}
