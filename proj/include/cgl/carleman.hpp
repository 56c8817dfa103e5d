#pragma once

#include <algorithm>
#include <complex>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "cgl/assembly.hpp"
#include "cgl/evolution.hpp"
#include "cgl/geometry.hpp"
#include "cgl/params.hpp"
#include "cgl/weights.hpp"

namespace cgl {

/// Value and derivatives of a complex field at one space–time point.
template <class Real>
struct Jet {
  using C = std::complex<Real>;
  C v{}, vt{};
  Eigen::Matrix<C, 2, 1> grad = Eigen::Matrix<C, 2, 1>::Zero();
  Eigen::Matrix<C, 2, 2> hess = Eigen::Matrix<C, 2, 2>::Zero();

  C laplacian() const { return hess(0, 0) + hess(1, 1); }
};

/// exp(-β|x - c|^2 + i k·x) times a complex amplitude; β = 0 and k = 0 give a constant.
struct Mode {
  Complex amplitude{1.0, 0.0};
  Point center = Point::Zero();
  double beta = 0.0;
  Point wave = Point::Zero();
};

/// v(x,t) = (t(T-t))^p Σ modes; vanishes to order p at t = 0 and t = T.
struct TestFunction {
  std::vector<Mode> modes;
  int time_power = 3;

  template <class Real>
  Jet<Real> eval(const Eigen::Matrix<Real, 2, 1>& x, Real t, Real T) const;
};

struct TestFunctionFamily {
  std::uint64_t seed = 0;
  std::vector<TestFunction> members;
};

/// Seeded family of `count` members, each a few Gaussian-windowed plane waves inside the disk.
TestFunctionFamily make_family(std::uint64_t seed, int count, const DiskGeometry& geom);

/// A single Gaussian bump centred inside the control region.
TestFunction control_bump(const DiskGeometry& geom);

struct CollocationPoint {
  Point x;  // interior point; the boundary identity is checked at its radial projection
  double t = 0.0;
};

/// Uniform random points in the open disk with times in [0.2T, 0.8T].
std::vector<CollocationPoint> collocation_points(const DiskGeometry& geom, double T, int count, std::uint64_t seed);

/// Conjugated quantities w = e^{-sφ} v with the common factor e^{-sφ} divided out.
template <class Real>
struct ConjugateBundle {
  using C = std::complex<Real>;
  C p1, p2, r;               // bulk
  C pg1, pg2, rg;            // boundary
};

template <class Real>
ConjugateBundle<Real> conjugate_bundle(const TestFunction& v, const Params& params, const DiskGeometry& geom,
                                       const CollocationPoint& point);

struct IdentityDefect {
  double bulk = 0.0;      // max |P1w + P2w - Rw| / max(|Rw|, 1)
  double boundary = 0.0;  // same on Γ
  int worst_point = -1;
  double worst() const { return std::max(bulk, boundary); }
};

/// Evaluated in long double. Throws NumericalError naming the point on a non-finite value.
IdentityDefect conjugate_identity_defect(const TestFunction& v, const Params& params, const DiskGeometry& geom,
                                         const std::vector<CollocationPoint>& points);

/// Names of the twelve weighted terms: nine on the left, three on the right.
const std::vector<std::string>& carleman_term_names();
constexpr int kCarlemanLhsTerms = 9;

struct CarlemanRow {
  int member_id = 0;
  double s = 0.0;
  double lambda = 0.0;
  double log10_lhs = 0.0;
  double log10_rhs = 0.0;
  double ratio = 0.0;
  double clamped_fraction = 0.0;
  std::vector<double> log10_terms;  // -inf for a vanishing term
  bool nonnegative = true;          // every summand of every term was >= 0
  bool degenerate = false;          // LHS and RHS both vanish
  bool impossible = false;          // RHS vanishes while LHS does not
};

/// Quadrature of both sides of the Carleman inequality (C = 1) with lumped vertex masses,
/// boundary arclengths and interior time nodes, accumulated in log space.
std::vector<CarlemanRow> carleman_ratio(const TestFunctionFamily& family, const Params& params,
                                        const std::vector<double>& s_list, const std::vector<double>& lambda_list,
                                        const Mesh& mesh, const DiskGeometry& geom, const TimeGrid& grid,
                                        int threads = 1);

void write_ratio_csv(std::ostream& out, const std::vector<CarlemanRow>& rows);

}  // namespace cgl
