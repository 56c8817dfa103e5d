#pragma once

#include <cmath>
#include <iosfwd>
#include <vector>

#include "cgl/evolution.hpp"
#include "cgl/geometry.hpp"
#include "cgl/params.hpp"
#include "cgl/types.hpp"

namespace cgl {

// Pointwise weight calculus. `sup` is ||eta0||_inf (R^2 on the disk).

/// e^{2λm sup} - e^{λ(m sup + eta)}, evaluated without cancellation.
template <class Real>
Real weight_numerator(Real eta, Real lambda, Real m, Real sup) {
  using std::exp;
  using std::expm1;
  return -exp(2 * lambda * m * sup) * expm1(lambda * (eta - m * sup));
}

template <class Real>
Real carleman_phi(Real eta, Real t, Real T, Real lambda, Real m, Real sup) {
  return weight_numerator(eta, lambda, m, sup) / (t * (T - t));
}

template <class Real>
Real carleman_xi(Real eta, Real t, Real T, Real lambda, Real m, Real sup) {
  using std::exp;
  return exp(lambda * (m * sup + eta)) / (t * (T - t));
}

/// ∂_t φ = -φ (T - 2t) / (t(T - t)).
template <class Real>
Real carleman_phi_t(Real eta, Real t, Real T, Real lambda, Real m, Real sup) {
  return -carleman_phi(eta, t, T, lambda, m, sup) * (T - 2 * t) / (t * (T - t));
}

/// 4/T^2 on (0, T/2], 1/(t(T-t)) on (T/2, T).
template <class Real>
Real envelope_mu(Real t, Real T) {
  return 2 * t <= T ? Real(4) / (T * T) : Real(1) / (t * (T - t));
}

template <class Real>
struct Envelope {
  Real mu{};
  Real phi_check{};
  Real phi_hat{};
  Real xi_check{};
  Real xi_hat{};
};

/// Time-only envelopes. The extrema of eta0 over the disk are 0 (on Γ) and sup (at the origin).
/// With `strict`, the leading exponential carries the extra factor s.
template <class Real>
Envelope<Real> envelope_at(Real t, Real T, Real s, Real lambda, Real m, Real sup, bool strict) {
  using std::exp;
  Envelope<Real> e;
  e.mu = envelope_mu(t, T);
  const Real lead = exp((strict ? 2 * s : Real(2)) * lambda * m * sup);
  e.phi_check = e.mu * (lead - exp(lambda * (m + 1) * sup));
  e.phi_hat = e.mu * (lead - exp(lambda * m * sup));
  e.xi_check = e.mu * exp(lambda * m * sup);
  e.xi_hat = e.mu * exp(lambda * (m + 1) * sup);
  return e;
}

/// Rejects λ (or sλ in strict mode) large enough to overflow e^{2λm sup}.
void check_weight_range(const Params& params, double sup);

/// Space–time samples of the weights on the interior nodes t_1..t_{N-1} of a grid.
struct WeightSet {
  TimeGrid grid;
  double s = 0.0;
  double lambda = 0.0;
  double m = 0.0;
  double sup = 0.0;
  bool strict = false;
  double floor = 0.0;

  std::vector<double> times;  // interior nodes
  Eigen::MatrixXd phi;        // (interior node) x (vertex)
  Eigen::MatrixXd xi;
  Eigen::MatrixXd log_em2sphi;  // log e^{-2sφ}
  RVector mu, phi_check, phi_hat, xi_check, xi_hat;

  // a sample counts as clamped when the exponential it stands for would drop below `floor`
  Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> clamped;
  bool floor_applied_phi = false;
  bool floor_applied_check = false;
  bool floor_applied_hat = false;

  int interior_count() const { return static_cast<int>(times.size()); }
  /// max(e^{-2sφ}, floor) at one sample.
  double em2sphi(int node, int vertex) const;
  double clamped_fraction() const;
};

WeightSet eval_weights(const Mesh& mesh, const Eta0Field& eta0, const Params& params, const TimeGrid& grid);

struct WeightGradients {
  std::vector<std::vector<Point>> grad_phi;  // [interior node][vertex]
  std::vector<std::vector<Point>> grad_xi;
  Eigen::MatrixXd lap_phi;
};

/// ∇φ = -∇ξ = -λξ∇η0 and Δφ = -λ^2 ξ |∇η0|^2 - λξΔη0 on the samples of `wset`.
WeightGradients weight_gradients(const Mesh& mesh, const Eta0Field& eta0, const WeightSet& wset);

/// Envelope data on every node 0..N of a grid, as used by the control problem.
/// Node 0 takes the right limit; at node N the weight e^{-2sφ̌} has limit 0 (log = -inf).
struct NodeEnvelope {
  RVector log_rho;        // -2s(φ̌(t_n) - min_n φ̌), so the largest entry is 0
  double log_rho_shift;   // 2s min φ̌: log e^{-2sφ̌} = log_rho - log_rho_shift
  RVector xi_hat;         // ξ̂(t_n); +inf at node N
  RVector xi_check;
  RVector phi_check;
  RVector phi_hat;
};

NodeEnvelope node_envelope(const Params& params, const TimeGrid& grid, double sup);

/// CSV dumps: `t,vertex,phi,xi` and `t,mu,phi_check,phi_hat,xi_check,xi_hat`.
void write_weights_csv(std::ostream& out, const WeightSet& wset);
void write_envelope_csv(std::ostream& out, const WeightSet& wset);

/// log(Σ_i exp(x_i)); -inf for an empty or all -inf input.
double log_sum_exp(const std::vector<double>& values);

}  // namespace cgl
