#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <random>

#include "cgl/evolution.hpp"
#include "support.hpp"

using namespace cgl;

namespace {

Eigen::MatrixXcd dense(const SpMat& a) { return Eigen::MatrixXd(a).cast<Complex>(); }

// θ-scheme stepped with dense matrices: S y^{n+1} = B y^n + dt (θ G^{n+1} + (1-θ) G^n)
std::vector<CVector> dense_forward(const OperatorSet& ops, const Params& p, const TimeGrid& grid, const CVector& u0,
                                   const Trajectory& f, const Trajectory& h) {
  const double dt = grid.dt();
  const Eigen::MatrixXcd M = dense(ops.mass_bulk) + dense(ops.mass_surface);
  const Eigen::MatrixXcd A = Complex(1.0, p.alpha) * (p.a * dense(ops.stiff_bulk) + p.b * dense(ops.stiff_surface));
  const Eigen::MatrixXcd S = M + p.theta * dt * A;
  const Eigen::MatrixXcd B = M - (1.0 - p.theta) * dt * A;
  const Eigen::MatrixXcd Mf = M, Mc = dense(ops.mass_control);
  auto G = [&](int n) { return CVector(Mf * f.frames[n] + Mc * h.frames[n]); };
  Eigen::PartialPivLU<Eigen::MatrixXcd> lu(S);
  std::vector<CVector> y{u0};
  for (int n = 0; n < grid.steps; ++n) {
    y.push_back(lu.solve(B * y[n] + dt * (p.theta * G(n + 1) + (1.0 - p.theta) * G(n))));
  }
  return y;
}

CVector smooth_field(const Mesh& m, double amp) {
  CVector u(m.vertex_count());
  for (int i = 0; i < m.vertex_count(); ++i) {
    const Point x = m.vertices[i];
    u[i] = amp * Complex(std::exp(-4 * (x - Point(0.3, 0.1)).squaredNorm()), 0.5 * x.x() * x.y());
  }
  return u;
}

}  // namespace

TEST_CASE("forward solver matches a dense theta-scheme") {
  const test::Small s;
  std::mt19937_64 rng(11);
  const int n = s.ops.size();
  for (double theta : {0.5, 1.0}) {
    Params p;
    p.theta = theta;
    const TimeGrid grid{5, 1.0};
    const CVector u0 = test::random_field(rng, n);
    const Trajectory f = test::random_trajectory(rng, grid, n, TrajectoryKind::source);
    const Trajectory h = test::random_trajectory(rng, grid, n, TrajectoryKind::control);
    const Trajectory y = solve_forward(s.ops, p, u0, f, h);
    const auto ref = dense_forward(s.ops, p, grid, u0, f, h);
    REQUIRE(static_cast<int>(y.frames.size()) == grid.steps + 1);
    for (int k = 0; k <= grid.steps; ++k) {
      CHECK((y.frames[k] - ref[k]).norm() <= 1e-11 * ref[k].norm());
    }
  }
}

TEST_CASE("zero data stay at zero and constants are steady") {
  const test::Small s;
  Params p;
  const TimeGrid grid{8, 1.0};
  const int n = s.ops.size();
  const Trajectory zero = solve_forward(ThetaStepper(s.ops, p, grid), CVector::Zero(n), Trajectory{}, Trajectory{});
  CHECK(static_cast<int>(zero.frames.size()) == grid.steps + 1);
  CHECK(test::max_abs(zero) == 0.0);
  const CVector one = CVector::Ones(n);
  p.theta = 0.5;
  const Trajectory y = solve_forward(s.ops, p, one, Trajectory::zeros(grid, n, TrajectoryKind::source), Trajectory{});
  for (const auto& frame : y.frames) CHECK((frame - one).cwiseAbs().maxCoeff() <= 1e-12);
  const Trajectory z = solve_adjoint(s.ops, p, one, Trajectory::zeros(grid, n, TrajectoryKind::source));
  for (const auto& frame : z.frames) CHECK((frame - one).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("forward and adjoint are in duality") {
  const test::Small s;
  std::mt19937_64 rng(5);
  const int n = s.ops.size();
  for (double theta : {0.5, 0.75, 1.0}) {
    Params p;
    p.theta = theta;
    const TimeGrid grid{6, 1.0};
    const CVector u0 = test::random_field(rng, n), zT = test::random_field(rng, n);
    const Trajectory f = test::random_trajectory(rng, grid, n, TrajectoryKind::source);
    const Trajectory h = test::random_trajectory(rng, grid, n, TrajectoryKind::control);
    const Trajectory g = test::random_trajectory(rng, grid, n, TrajectoryKind::source);
    const DualityDefect d = duality_check(s.ops, p, u0, f, h, zT, g);
    CHECK(d.relative <= 1e-12);
  }
}

TEST_CASE("implicit Euler dissipates the L2 energy") {
  const test::Small s;
  Params p;
  const TimeGrid grid{10, 1.0};
  const ThetaStepper stepper(s.ops, p, grid);
  const Trajectory y = solve_forward(stepper, smooth_field(s.mesh, 1.0), Trajectory{}, Trajectory{});
  const EnergyReport e = energy_report(y, s.ops, p.theta);
  for (std::size_t k = 1; k < e.L2.size(); ++k) CHECK(e.L2[k] <= e.L2[k - 1]);
  CHECK(e.bulk_dissipation > 0.0);
}

TEST_CASE("cubic solver") {
  const test::Small s;
  Params p;
  p.theta = 0.5;
  const TimeGrid grid{8, 1.0};
  const int n = s.ops.size();
  const ThetaStepper stepper(s.ops, p, grid);

  SUBCASE("zero datum converges at once to zero") {
    const CubicResult r = solve_cubic(stepper, CVector::Zero(n), Trajectory{});
    CHECK(r.converged);
    CHECK(r.log.size() <= 1);
    CHECK(test::max_abs(r.state) == 0.0);
  }
  SUBCASE("small data contract quickly") {
    const CubicResult r = solve_cubic(stepper, smooth_field(s.mesh, 1e-3), Trajectory{});
    CHECK(r.converged);
    CHECK(r.log.size() <= 6);
    for (std::size_t k = 1; k < r.log.size(); ++k) CHECK(r.log[k].contraction < 0.5);
  }
  SUBCASE("complex conjugation flips both dispersion ratios") {
    const CVector u0 = smooth_field(s.mesh, 0.2);
    const CubicResult r = solve_cubic(stepper, u0, Trajectory{});
    Params q = p;
    q.alpha = -p.alpha;
    q.gamma = -p.gamma;
    const CubicResult c = solve_cubic(ThetaStepper(s.ops, q, grid), u0.conjugate(), Trajectory{});
    REQUIRE(r.state.frames.size() == c.state.frames.size());
    for (std::size_t k = 0; k < r.state.frames.size(); ++k) {
      CHECK((r.state.frames[k].conjugate() - c.state.frames[k]).cwiseAbs().maxCoeff() <= 1e-13);
    }
  }
  SUBCASE("the solution satisfies the discrete cubic dynamics") {
    const CubicResult r = solve_cubic(stepper, smooth_field(s.mesh, 0.1), Trajectory{});
    CHECK(cubic_residual(stepper, r.state, Trajectory{}, Trajectory{}) <= 1e-9);
  }
  SUBCASE("data above the smallness gate are rejected") {
    CHECK_THROWS_AS(solve_cubic(stepper, smooth_field(s.mesh, 100.0), Trajectory{}), PreconditionError);
  }
}

TEST_CASE("the operator-level overloads need a trajectory to fix the time grid") {
  const test::Small s;
  const CVector u0 = CVector::Ones(s.ops.size());
  CHECK_THROWS_AS(solve_forward(s.ops, Params{}, u0, Trajectory{}, Trajectory{}), PreconditionError);
  CHECK_THROWS_AS(solve_cubic(s.ops, Params{}, u0, Trajectory{}), PreconditionError);
  CHECK_THROWS_AS(solve_adjoint(s.ops, Params{}, u0, Trajectory{}), PreconditionError);
}
