#pragma once

#include <cmath>
#include <cstdint>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "cgl/assembly.hpp"
#include "cgl/carleman.hpp"
#include "cgl/evolution.hpp"
#include "cgl/params.hpp"
#include "cgl/weights.hpp"

namespace cgl {

/// Space–time unknowns z^0..z^N stacked into one vector (block n holds z^n).
using SpaceTimeVector = CVector;

/// Weighted least-squares dual of the null-control problem on a fixed time grid.
///
/// Block 0 pairs with the initial condition and block n+1 with the step t_n -> t_{n+1}.
/// The operator is 𝓛 D_y 𝓛^H + 𝓑 D_h 𝓑^H, where 𝓛 is the discrete state operator with the
/// terminal value pinned to zero, 𝓑 injects the control through M_ω, D_y = diag(ρ) M^{-1}
/// and D_h = diag(ρ ξ̂^3), with ρ = e^{-2sφ̌} normalised to a unit maximum.
class VariationalSystem {
 public:
  VariationalSystem(const ThetaStepper& stepper, const NodeEnvelope& env);

  int blocks() const { return steps_ + 1; }
  int dofs() const { return n_; }
  Eigen::Index size() const { return static_cast<Eigen::Index>(blocks()) * n_; }

  SpaceTimeVector apply(const SpaceTimeVector& z) const;
  /// Block-diagonal (in time) preconditioner; each block is Δt^2 C_n^{-H} M C_n^{-1} with C_n a sparse
  /// surrogate for the square root of the diagonal block.
  SpaceTimeVector precondition(const SpaceTimeVector& r) const;
  SpaceTimeVector rhs(const CVector& u0, const Trajectory& f) const;

  /// State extraction Y^n = ρ_n M^{-1} (𝓛^H z)_n, with Y^N = 0.
  Trajectory state(const SpaceTimeVector& z) const;
  /// Control part H^k = ρ_k ξ̂_k^3 z̄^k; the control is -H.
  Trajectory control_part(const SpaceTimeVector& z) const;
  Trajectory as_trajectory(const SpaceTimeVector& z, TrajectoryKind kind) const;

  const RVector& rho() const { return rho_; }
  int underflow_nodes() const { return underflow_; }

 private:
  CVector adjoint_residual(const SpaceTimeVector& z, int n) const;  // (𝓛^H z)_n

  const ThetaStepper* stepper_;
  int steps_;
  int n_;
  double dt_;
  double theta_;
  RVector rho_;        // per node, largest entry 1, exactly 0 at node N
  RVector ctrl_gain_;  // ρ_k ξ̂_k^3
  int underflow_ = 0;  // nodes where ρ fell below the weight floor

  struct BlockFactor {
    double scale = 0.0;  // Δt^2 / a_n^2; zero for a null block
    int factor = -1;     // index into factors_
  };
  std::vector<BlockFactor> blocks_;
  std::vector<std::unique_ptr<Eigen::SparseLU<CSpMat>>> factors_;
};

struct CgReport {
  int iterations = 0;
  double relative_residual = 0.0;
  bool converged = false;
};

/// Conjugate gradient on a Hermitian positive semidefinite operator. `inner` is the real part of the
/// chosen Hermitian inner product.
/// Stops on the unpreconditioned relative residual ||r|| / ||b|| measured with `inner`.
template <class Apply, class Inner, class Precond>
CgReport conjugate_gradient(const Apply& apply, const Inner& inner, const CVector& b, CVector& x, double tol,
                            int maxit, const Precond& precond) {
  CgReport rep;
  const double bb = inner(b, b);
  if (bb == 0.0) {
    x.setZero(b.size());
    rep.converged = true;
    return rep;
  }
  if (x.size() != b.size()) x.setZero(b.size());
  CVector r = b - apply(x);
  CVector z = precond(r);
  CVector p = z;
  double rz = inner(r, z);
  double rr = inner(r, r);
  // in finite precision a nearly singular system can drive the iterates away; keep the best one
  CVector best = x;
  double best_rr = rr;
  for (rep.iterations = 0; rep.iterations < maxit; ++rep.iterations) {
    rep.relative_residual = std::sqrt(rr / bb);
    if (rep.relative_residual <= tol) {
      rep.converged = true;
      return rep;
    }
    if (rr < best_rr) {
      best = x;
      best_rr = rr;
    }
    const CVector ap = apply(p);
    const double pap = inner(p, ap);
    if (!(pap > 0.0) || !(rz > 0.0)) break;
    const double step = rz / pap;
    x += step * p;
    r -= step * ap;
    z = precond(r);
    const double next = inner(r, z);
    p = z + (next / rz) * p;
    rz = next;
    rr = inner(r, r);
  }
  if (best_rr < rr) {
    x = best;
    rr = best_rr;
  }
  rep.relative_residual = std::sqrt(rr / bb);
  rep.converged = rep.relative_residual <= tol;
  return rep;
}

template <class Apply, class Inner>
CgReport conjugate_gradient(const Apply& apply, const Inner& inner, const CVector& b, CVector& x, double tol,
                            int maxit) {
  return conjugate_gradient(apply, inner, b, x, tol, maxit, [](const CVector& r) { return r; });
}

/// Weighted norms of a control triple, as log10 values (-inf for a vanishing norm).
struct VNormLedger {
  double state = 0.0;              // ||e^{sφ̌} y||_{L2(𝕃²)}
  double control_set = 0.0;        // ||e^{sφ̌} ξ̂^{-3/2} h||_{L2(ω)}
  double control_literal = 0.0;    // ||e^{sφ̌} ξ̂^{3} h||_{L2(ω)}
  double source = 0.0;             // ||e^{sφ̂} ξ̌^{-3/2} (f, f_Γ)||_{L2(𝕃²)}
  double capacity_h2 = 0.0;        // ||e^{sφ̂/3} y||_{L2(ℍ²)}, discrete Laplacian surrogate
  double capacity_h1 = 0.0;        // sup_t e^{sφ̂/3} ||y||_{ℍ¹}
};

struct ControlResult {
  Trajectory h;
  Trajectory y;        // re-simulated with solve_forward
  Trajectory y_star;   // state extracted from the dual solution (FI only)
  Trajectory z_star;
  double terminal_ratio = 0.0;  // ||y(T)|| / ||y(0)|| in 𝕃², or ||y(T)|| when y(0) = 0
  double control_norm = 0.0;    // ||h||_{L2(ω×(0,T))}
  double support_violation = 0.0;  // max |h| on vertices with zero mask
  VNormLedger weighted_norms;
  int cg_iters = 0;
  double cg_residual = 0.0;
  bool converged = false;
  int underflow_nodes = 0;
};

/// Weighted source norm log10 ||e^{sφ̂} ξ̌^{-3/2} (f, f_Γ)||; +inf when the source does not vanish at t = T.
double weighted_source_log10(const OperatorSet& ops, const Params& params, const NodeEnvelope& env,
                             const Trajectory& f);

/// Null control from the weighted variational problem, solved matrix-free by conjugate gradients.
ControlResult solve_fi_variational(const ThetaStepper& stepper, const NodeEnvelope& env, const CVector& u0,
                                   const Trajectory& f);
ControlResult solve_fi_variational(const OperatorSet& ops, const Params& params, const TimeGrid& grid,
                                   double sup, const CVector& u0, const Trajectory& f);

/// Penalised HUM: minimises ½⟨Λ z_T, z_T⟩ + ε/2 ||z_T||² + ⟨y_free(T), z_T⟩ over terminal adjoint data.
ControlResult penalized_hum(const ThetaStepper& stepper, const CVector& u0, const Trajectory& f,
                            double eps_penalty);

/// ||h||_{L2(ω×(0,T))} with the theta-scheme quadrature.
double control_norm(const ThetaStepper& stepper, const Trajectory& h);

struct ObservabilityReport {
  double max_ratio = 0.0;      // may be +inf when it overflows; see log10_max_ratio
  double log10_max_ratio = 0.0;
  std::vector<double> log10_ratios;  // per retained sample
  int excluded = 0;                  // degenerate samples
};

/// Random smooth adjoint data (z_T, g) drawn from a seeded generator independent of the mesh.
struct AdjointSample {
  TestFunction terminal;
  TestFunction source;  // time_power 1
  bool has_source = true;
};

std::vector<AdjointSample> adjoint_samples(int count, std::uint64_t seed, const DiskGeometry& geom);

ObservabilityReport observability_constant(const OperatorSet& ops, const Mesh& mesh, const Params& params,
                                           const TimeGrid& grid, double sup,
                                           const std::vector<AdjointSample>& samples, int threads = 1);
ObservabilityReport observability_constant(const OperatorSet& ops, const Mesh& mesh, const Params& params,
                                           const TimeGrid& grid, double sup, int sample_count, std::uint64_t seed,
                                           const DiskGeometry& geom, int threads = 1);

struct NonlinearIterate {
  int iteration = 0;
  double source_norm = 0.0;       // log10 of the weighted source norm
  double capacity_ratio = 0.0;    // log10 ||e^{sφ̂} ξ̌^{-3/2} |u|^3|| - 3 log10 ||e^{sφ̂/3} u||
  double control_increment = 0.0;
  double contraction = 0.0;       // 0 for the first increment
  int cg_iters = 0;
};

struct NonlinearControlLog {
  std::vector<NonlinearIterate> iterations;
  bool converged = false;
  bool diverged = false;
  std::string reason;             // empty when converged
  double max_contraction = 0.0;
  double cubic_residual = 0.0;    // T ||residual|| / ||u0|| of the control and its re-simulated cubic state
  double state_residual = 0.0;    // same for the state extracted from the dual solution
  double final_terminal_ratio = 0.0;  // after re-simulating the cubic dynamics
  double delta_estimate = 0.0;
};

/// Source iteration on the cubic nonlinearity around the linear weighted null control.
ControlResult nonlinear_null_control(const ThetaStepper& stepper, const NodeEnvelope& env, const CVector& u0,
                                     NonlinearControlLog& log);

struct DeltaEstimate {
  double delta = 0.0;  // largest converging scale; 0 when none converged
  std::vector<double> scales;
  std::vector<char> converged;
  std::vector<std::string> reasons;
};

/// Scans `scales` from the largest down and stops at the first one where the source iteration converges.
DeltaEstimate estimate_delta(const ThetaStepper& stepper, const NodeEnvelope& env, const CVector& u0_direction,
                             std::vector<double> scales);

}  // namespace cgl
