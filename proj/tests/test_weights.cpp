#include <doctest.h>

#include <cmath>
#include <limits>

#include "cgl/evolution.hpp"
#include "cgl/geometry.hpp"
#include "cgl/weights.hpp"

using namespace cgl;

TEST_CASE("xi on the boundary at mid-time") {
  // η = 0, λ = 1, m = 2, R = 1: ξ = e^2 / (1/4)
  CHECK(carleman_xi(0.0, 0.5, 1.0, 1.0, 2.0, 1.0) == doctest::Approx(4 * std::exp(2.0)).epsilon(1e-15));
}

TEST_CASE("envelope time factor is continuous at mid-time") {
  for (double T : {1.0, 2.5}) {
    const double h = 1e-12 * T;
    CHECK(envelope_mu(T / 2, T) == doctest::Approx(4 / (T * T)).epsilon(1e-15));
    CHECK(envelope_mu(T / 2 + h, T) == doctest::Approx(4 / (T * T)).epsilon(1e-9));
    CHECK(envelope_mu(T / 2 - h, T) == doctest::Approx(4 / (T * T)).epsilon(1e-15));
  }
}

TEST_CASE("phi plus xi is independent of position") {
  const double lam = 1.3, m = 2.0, sup = 1.0, T = 1.0;
  for (double eta : {0.0, 0.2, 0.7, 1.0}) {
    for (double t : {0.1, 0.5, 0.9}) {
      const double sum = carleman_phi(eta, t, T, lam, m, sup) + carleman_xi(eta, t, T, lam, m, sup);
      CHECK(sum == doctest::Approx(std::exp(2 * lam * m * sup) / (t * (T - t))).epsilon(1e-14));
    }
  }
}

TEST_CASE("time derivative of phi matches centered differences") {
  const double lam = 1.05, m = 2.0, sup = 1.0, T = 1.0, d = 1e-5;
  for (double t : {0.2, 0.5, 0.8}) {
    const double fd = (carleman_phi(0.3, t + d, T, lam, m, sup) - carleman_phi(0.3, t - d, T, lam, m, sup)) / (2 * d);
    CHECK(carleman_phi_t(0.3, t, T, lam, m, sup) == doctest::Approx(fd).epsilon(1e-8));
  }
}

TEST_CASE("weight gradients on the mesh") {
  const DiskGeometry geom;
  const Mesh mesh = build_mesh(geom, 0.1, 0);
  const Eta0Field eta0 = build_eta0(mesh, geom);
  Params p;
  p.lambda = 1.7;
  const TimeGrid grid{8, 1.0};
  const WeightSet w = eval_weights(mesh, eta0, p, grid);
  const WeightGradients g = weight_gradients(mesh, eta0, w);
  const double d = 1e-5;
  auto eta = [](const Point& x) { return 1.0 - x.squaredNorm(); };
  for (int k = 0; k < w.interior_count(); ++k) {
    const double t = w.times[k];
    for (int i = 0; i < mesh.vertex_count(); i += 17) {
      const Point x = mesh.vertices[i];
      for (int c = 0; c < 2; ++c) {
        Point e = Point::Zero();
        e[c] = d;
        const double fd = (carleman_xi(eta(x + e), t, 1.0, p.lambda, p.m, 1.0) -
                           carleman_xi(eta(x - e), t, 1.0, p.lambda, p.m, 1.0)) / (2 * d);
        CHECK(g.grad_xi[k][i][c] == doctest::Approx(fd).epsilon(1e-7));
        CHECK(g.grad_phi[k][i][c] == doctest::Approx(-fd).epsilon(1e-7));
      }
    }
  }
}

TEST_CASE("phi is constant on the boundary and positive") {
  const DiskGeometry geom;
  const Mesh mesh = build_mesh(geom, 0.1, 4);
  const Eta0Field eta0 = build_eta0(mesh, geom);
  const WeightSet w = eval_weights(mesh, eta0, Params{}, TimeGrid{10, 1.0});
  for (int k = 0; k < w.interior_count(); ++k) {
    const double ref = w.phi(k, mesh.boundary_loop[0]);
    for (int v : mesh.boundary_loop) CHECK(w.phi(k, v) == doctest::Approx(ref).epsilon(1e-12));
    CHECK(w.phi.row(k).minCoeff() > 0.0);
  }
}

TEST_CASE("envelopes bracket the weights on the second half") {
  const DiskGeometry geom;
  const Mesh mesh = build_mesh(geom, 0.1, 4);
  const Eta0Field eta0 = build_eta0(mesh, geom);
  const WeightSet w = eval_weights(mesh, eta0, Params{}, TimeGrid{10, 1.0});
  for (int k = 0; k < w.interior_count(); ++k) {
    if (w.times[k] < 0.5) continue;
    const double tol = 1e-12;
    CHECK(w.phi.row(k).minCoeff() >= w.phi_check[k] * (1 - tol));
    CHECK(w.phi.row(k).maxCoeff() <= w.phi_hat[k] * (1 + tol));
    CHECK(w.xi.row(k).minCoeff() >= w.xi_check[k] * (1 - tol));
    CHECK(w.xi.row(k).maxCoeff() <= w.xi_hat[k] * (1 + tol));
  }
}

TEST_CASE("the weight e^{-2s phi} decreases with s") {
  const DiskGeometry geom;
  const Mesh mesh = build_mesh(geom, 0.1, 4);
  const Eta0Field eta0 = build_eta0(mesh, geom);
  Params lo, hi;
  lo.s = 1.5;
  hi.s = 3.0;
  const TimeGrid grid{10, 1.0};
  const WeightSet a = eval_weights(mesh, eta0, lo, grid), b = eval_weights(mesh, eta0, hi, grid);
  CHECK(((b.log_em2sphi - a.log_em2sphi).array() < 0.0).all());
}

TEST_CASE("node envelope is normalized and vanishes at the final time") {
  Params p;
  const TimeGrid grid{16, 1.0};
  const NodeEnvelope e = node_envelope(p, grid, 1.0);
  REQUIRE(e.log_rho.size() == grid.steps + 1);
  CHECK(e.log_rho.head(grid.steps).maxCoeff() == 0.0);
  CHECK(e.log_rho[grid.steps] == -std::numeric_limits<double>::infinity());
  CHECK(std::isinf(e.xi_hat[grid.steps]));
  for (int k = 1; k < grid.steps; ++k) {
    CHECK(e.log_rho[k] - e.log_rho_shift ==
          doctest::Approx(-2 * p.s * e.phi_check[k]).epsilon(1e-12));
  }
}

TEST_CASE("log-sum-exp") {
  CHECK(log_sum_exp({0.0, 0.0}) == doctest::Approx(std::log(2.0)));
  CHECK(log_sum_exp({-1e4, 1000.0}) == doctest::Approx(1000.0));
}
