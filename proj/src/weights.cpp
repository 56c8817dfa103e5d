#include "cgl/weights.hpp"

#include <algorithm>
#include <cstdio>
#include <limits>
#include <ostream>
#include <string>

namespace cgl {

namespace {

constexpr double kMaxExponent = 700.0;

std::string fmt(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

}  // namespace

void check_weight_range(const Params& params, double sup) {
  const double lead = (params.strict_weights ? 2.0 * params.s : 2.0) * params.lambda * params.m * sup;
  const double xi_exp = params.lambda * (params.m + 1.0) * sup;
  if (lead > kMaxExponent || xi_exp > kMaxExponent) {
    throw PreconditionError("weights: exponent " + fmt(std::max(lead, xi_exp)) +
                            " overflows double precision; lower lambda (or m)");
  }
}

double WeightSet::em2sphi(int node, int vertex) const {
  return std::max(std::exp(log_em2sphi(node, vertex)), floor);
}

double WeightSet::clamped_fraction() const {
  if (clamped.size() == 0) return 0.0;
  return static_cast<double>(clamped.count()) / static_cast<double>(clamped.size());
}

WeightSet eval_weights(const Mesh& mesh, const Eta0Field& eta0, const Params& params, const TimeGrid& grid) {
  params.validate();
  require(grid.steps >= 2, "eval_weights: need at least one interior time node");
  require(eta0.values.size() == mesh.vertex_count(), "eval_weights: eta0 does not match the mesh");
  const double sup = eta0.sup_norm;
  check_weight_range(params, sup);

  WeightSet w;
  w.grid = grid;
  w.s = params.s;
  w.lambda = params.lambda;
  w.m = params.m;
  w.sup = sup;
  w.strict = params.strict_weights;
  w.floor = params.weight_floor;

  const int nt = grid.steps - 1;
  const int nv = mesh.vertex_count();
  const double log_floor = std::log(params.weight_floor);
  w.times.resize(nt);
  w.phi.resize(nt, nv);
  w.xi.resize(nt, nv);
  w.log_em2sphi.resize(nt, nv);
  w.clamped.resize(nt, nv);
  w.mu.resize(nt);
  w.phi_check.resize(nt);
  w.phi_hat.resize(nt);
  w.xi_check.resize(nt);
  w.xi_hat.resize(nt);

  for (int k = 0; k < nt; ++k) {
    const double t = grid.node(k + 1);
    w.times[k] = t;
    for (int i = 0; i < nv; ++i) {
      const double eta = eta0.values[i];
      w.phi(k, i) = carleman_phi(eta, t, grid.T, params.lambda, params.m, sup);
      w.xi(k, i) = carleman_xi(eta, t, grid.T, params.lambda, params.m, sup);
      w.log_em2sphi(k, i) = -2.0 * params.s * w.phi(k, i);
      w.clamped(k, i) = w.log_em2sphi(k, i) < log_floor;
    }
    const Envelope<double> e =
        envelope_at(t, grid.T, params.s, params.lambda, params.m, sup, params.strict_weights);
    w.mu[k] = e.mu;
    w.phi_check[k] = e.phi_check;
    w.phi_hat[k] = e.phi_hat;
    w.xi_check[k] = e.xi_check;
    w.xi_hat[k] = e.xi_hat;
    w.floor_applied_check |= -2.0 * params.s * e.phi_check < log_floor;
    w.floor_applied_hat |= -2.0 * params.s * e.phi_hat < log_floor;
  }
  w.floor_applied_phi = w.clamped.any();
  return w;
}

WeightGradients weight_gradients(const Mesh& mesh, const Eta0Field& eta0, const WeightSet& wset) {
  const int nt = wset.interior_count();
  const int nv = mesh.vertex_count();
  WeightGradients g;
  g.grad_phi.assign(nt, std::vector<Point>(nv));
  g.grad_xi.assign(nt, std::vector<Point>(nv));
  g.lap_phi.resize(nt, nv);
  const double lam = wset.lambda;
  for (int k = 0; k < nt; ++k) {
    for (int i = 0; i < nv; ++i) {
      const double xi = wset.xi(k, i);
      const Point& ge = eta0.grad[i];
      g.grad_xi[k][i] = lam * xi * ge;
      g.grad_phi[k][i] = -g.grad_xi[k][i];
      g.lap_phi(k, i) = -lam * lam * xi * ge.squaredNorm() - lam * xi * eta0.laplacian;
    }
  }
  return g;
}

NodeEnvelope node_envelope(const Params& params, const TimeGrid& grid, double sup) {
  check_weight_range(params, sup);
  const int N = grid.steps;
  const double inf = std::numeric_limits<double>::infinity();
  NodeEnvelope env;
  env.log_rho.resize(N + 1);
  env.xi_hat.resize(N + 1);
  env.xi_check.resize(N + 1);
  env.phi_check.resize(N + 1);
  env.phi_hat.resize(N + 1);
  for (int n = 0; n < N; ++n) {
    // μ is constant on (0, T/2], so node 0 takes the value just to its right
    const double t = n == 0 ? grid.node(1) * 1e-3 : grid.node(n);
    const Envelope<double> e =
        envelope_at(t, grid.T, params.s, params.lambda, params.m, sup, params.strict_weights);
    env.phi_check[n] = e.phi_check;
    env.phi_hat[n] = e.phi_hat;
    env.xi_check[n] = e.xi_check;
    env.xi_hat[n] = e.xi_hat;
  }
  env.phi_check[N] = inf;
  env.phi_hat[N] = inf;
  env.xi_check[N] = inf;
  env.xi_hat[N] = inf;
  const double min_phi = env.phi_check.head(N).minCoeff();
  env.log_rho_shift = 2.0 * params.s * min_phi;
  for (int n = 0; n < N; ++n) env.log_rho[n] = -2.0 * params.s * (env.phi_check[n] - min_phi);
  env.log_rho[N] = -inf;
  return env;
}

void write_weights_csv(std::ostream& out, const WeightSet& wset) {
  out << "t,vertex,phi,xi\n";
  for (int k = 0; k < wset.interior_count(); ++k) {
    for (int i = 0; i < wset.phi.cols(); ++i) {
      out << fmt(wset.times[k]) << ',' << i << ',' << fmt(wset.phi(k, i)) << ',' << fmt(wset.xi(k, i)) << '\n';
    }
  }
}

void write_envelope_csv(std::ostream& out, const WeightSet& wset) {
  out << "t,mu,phi_check,phi_hat,xi_check,xi_hat\n";
  for (int k = 0; k < wset.interior_count(); ++k) {
    out << fmt(wset.times[k]) << ',' << fmt(wset.mu[k]) << ',' << fmt(wset.phi_check[k]) << ','
        << fmt(wset.phi_hat[k]) << ',' << fmt(wset.xi_check[k]) << ',' << fmt(wset.xi_hat[k]) << '\n';
  }
}

double log_sum_exp(const std::vector<double>& values) {
  double top = -std::numeric_limits<double>::infinity();
  for (double v : values) top = std::max(top, v);
  if (!std::isfinite(top)) return top;
  double sum = 0.0;
  for (double v : values) sum += std::exp(v - top);
  return top + std::log(sum);
}

}  // namespace cgl
