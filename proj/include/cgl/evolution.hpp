#pragma once

#include <vector>

#include <Eigen/SparseCholesky>
#include <Eigen/SparseLU>

#include "cgl/assembly.hpp"
#include "cgl/params.hpp"
#include "cgl/types.hpp"

namespace cgl {

/// Uniform nodes t_n = n T / steps, n = 0..steps.
struct TimeGrid {
  int steps = 1;
  double T = 1.0;

  double dt() const { return T / steps; }
  double node(int n) const { return T * n / steps; }
  double midpoint(int n) const { return T * (n + 0.5) / steps; }
  bool operator==(const TimeGrid& other) const { return steps == other.steps && T == other.T; }
};

enum class TrajectoryKind { forward, adjoint, control, source };

/// Complex bulk–surface field at every node of a time grid.
///
/// An empty `frames` vector stands for the zero field. For sources, a non-empty
/// `surface_frames` supplies f_Γ separately; otherwise f_Γ is the boundary trace of f.
///
/// Adjoint trajectories store the readout z(0) at node 0 and the step multipliers z^n
/// (paired with the step t_{n-1} -> t_n) at nodes 1..steps.
struct Trajectory {
  TimeGrid grid;
  TrajectoryKind kind = TrajectoryKind::forward;
  std::vector<CVector> frames;
  std::vector<CVector> surface_frames;

  static Trajectory zeros(const TimeGrid& grid, int dofs, TrajectoryKind kind);
  bool is_zero_placeholder() const { return frames.empty(); }
  int node_count() const { return grid.steps + 1; }
};

/// Quadrature weight of node k induced by the theta scheme: dt (θ[k≥1] + (1-θ)[k≤N-1]).
double theta_weight(const TimeGrid& grid, double theta, int k);

/// Theta-weighted average of the adjoint multipliers attached to node k (zero when its weight vanishes).
CVector multiplier_average(const Trajectory& z, double theta, int k);

/// Factorized theta-step: S y^{n+1} = B y^n + dt (θ G^{n+1} + (1-θ) G^n), with
/// S = M + θ dt A, B = M - (1-θ) dt A, A = (1 + αi)(a K_Ω + b K_Γ), M = M_Ω + M_Γ.
class ThetaStepper {
 public:
  ThetaStepper(const OperatorSet& ops, const Params& params, const TimeGrid& grid);

  const OperatorSet& ops() const { return *ops_; }
  const Params& params() const { return params_; }
  const TimeGrid& grid() const { return grid_; }
  int size() const { return ops_->size(); }

  CVector solve(const CVector& rhs) const;          // S^{-1}
  CVector solve_adjoint(const CVector& rhs) const;  // S^{-H}
  CVector mass_solve(const CVector& rhs) const;     // M^{-1}
  CVector apply_S(const CVector& y) const { return S_ * y; }
  CVector apply_B(const CVector& y) const { return B_ * y; }
  CVector apply_SH(const CVector& z) const;
  CVector apply_BH(const CVector& z) const;
  CVector apply_mass(const CVector& y) const { return M_ * y; }
  CVector apply_A(const CVector& y) const { return A_ * y; }
  CVector apply_control_mass(const CVector& h) const { return Mc_ * h; }
  /// (K_Ω + K_Γ) y, the unweighted stiffness.
  CVector apply_stiffness(const CVector& y) const { return K_ * y; }

  /// Weak-form forcing G = M_Ω f + M_Γ f_Γ + M_ω h for one node; empty vectors count as zero.
  CVector forcing(const CVector& f, const CVector& f_surface, const CVector& h) const;
  CVector forcing_at(const Trajectory& f, const Trajectory& h, int node) const;

 private:
  const OperatorSet* ops_;
  Params params_;
  TimeGrid grid_;
  CSpMat M_, Mb_, Ms_, Mc_, K_, A_, S_, B_;
  Eigen::SparseLU<CSpMat> lu_;
  Eigen::SimplicialLLT<SpMat> mass_llt_;
};

Trajectory solve_forward(const ThetaStepper& stepper, const CVector& u0, const Trajectory& f,
                         const Trajectory& h);
Trajectory solve_forward(const OperatorSet& ops, const Params& params, const CVector& u0,
                         const Trajectory& f, const Trajectory& h);

/// Exact discrete adjoint of solve_forward for L*z = g, z(T) = z_T, integrated backward.
Trajectory solve_adjoint(const ThetaStepper& stepper, const CVector& zT, const Trajectory& g);
Trajectory solve_adjoint(const OperatorSet& ops, const Params& params, const CVector& zT,
                         const Trajectory& g);

struct DualityDefect {
  double absolute = 0.0;
  double relative = 0.0;  // absolute / sum of the magnitudes of the four terms
};

/// |Re⟨y(T), z_T⟩ - Re⟨u0, z(0)⟩ - Σ⟨f + 𝟙_ω h, z⟩ - Σ⟨y, g⟩| with theta-scheme quadrature.
DualityDefect duality_check(const OperatorSet& ops, const Params& params, const CVector& u0,
                            const Trajectory& f, const Trajectory& h, const CVector& zT,
                            const Trajectory& g);

/// Nodal cubic term -c(1 + γi)|u|^2 u.
CVector cubic_source(const Params& params, const CVector& u);

struct CubicIterate {
  double increment = 0.0;    // discrete C0(𝕙¹) distance between successive iterates
  double contraction = 0.0;  // increment ratio, 0 for the first iterate
};

struct CubicResult {
  Trajectory state;
  std::vector<CubicIterate> log;
  bool converged = false;
};

/// Picard iteration for L u + c(1+γi)|u|^2 u = f + 𝟙_ω h. Throws PreconditionError above the
/// smallness gate and NumericalError after three consecutive non-contracting iterates.
CubicResult solve_cubic(const ThetaStepper& stepper, const CVector& u0, const Trajectory& f,
                        const Trajectory& h = {});
CubicResult solve_cubic(const OperatorSet& ops, const Params& params, const CVector& u0,
                        const Trajectory& f, const Trajectory& h = {});

/// Largest 𝕃²-norm over steps of the residual of the discrete cubic dynamics, scaled by dt^{-1}.
double cubic_residual(const ThetaStepper& stepper, const Trajectory& u, const Trajectory& f,
                      const Trajectory& h);

/// max_n ||u^n||_{𝕙¹}
double c0_h1_norm(const OperatorSet& ops, const Trajectory& u);
/// (Σ_k w_k ||u^k||^2_{𝕃²})^{1/2} with theta-scheme weights.
double l2_l2_norm(const OperatorSet& ops, const Trajectory& u, double theta);

struct EnergyReport {
  std::vector<double> L2;
  std::vector<double> H1;
  double bulk_dissipation = 0.0;     // ∫∫ |∇u|^2
  double surface_dissipation = 0.0;  // ∫∫ |∇_Γ u|^2
  double c1_ratio = 0.0;             // LHS / RHS of the L2 energy estimate
};

EnergyReport energy_report(const Trajectory& traj, const OperatorSet& ops, double theta,
                           const Trajectory* source = nullptr);

}  // namespace cgl
