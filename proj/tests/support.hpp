#pragma once

#include <cstdint>
#include <random>

#include "cgl/assembly.hpp"
#include "cgl/evolution.hpp"
#include "cgl/geometry.hpp"

namespace cgl::test {

inline DiskGeometry coarse_geometry() { return {1.0, 0.65, 0.8}; }

struct Small {
  DiskGeometry geom = coarse_geometry();
  Mesh mesh = build_mesh(geom, 0.3, 1);
  OperatorSet ops = assemble(mesh);
};

inline CVector random_field(std::mt19937_64& rng, int n) {
  std::normal_distribution<double> g;
  CVector v(n);
  for (int i = 0; i < n; ++i) v[i] = Complex(g(rng), g(rng));
  return v;
}

inline Trajectory random_trajectory(std::mt19937_64& rng, const TimeGrid& grid, int n, TrajectoryKind kind) {
  Trajectory t = Trajectory::zeros(grid, n, kind);
  for (auto& f : t.frames) f = random_field(rng, n);
  return t;
}

inline double max_abs(const Trajectory& t) {
  double m = 0.0;
  for (const auto& f : t.frames) m = std::max(m, f.cwiseAbs().maxCoeff());
  return m;
}

}  // namespace cgl::test
