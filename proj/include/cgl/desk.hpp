#pragma once

#include "cgl/assembly.hpp"
#include "cgl/config.hpp"
#include "cgl/evolution.hpp"
#include "cgl/geometry.hpp"

namespace cgl {

/// Mesh, operators and time grid of one run.
struct Desk {
  Mesh mesh;
  Eta0Field eta0;
  OperatorSet ops;
  TimeGrid grid;
};

Desk make_desk(const RunConfig& config, const DiskGeometry& geom, double h_target, int steps);
inline Desk make_desk(const RunConfig& config) { return make_desk(config, config.geom, config.h_target, config.steps); }

/// exp(-u0_beta |x - (u0_x, u0_y)|^2) rescaled to the given 𝕙¹ norm.
CVector bump(const Desk& desk, const RunConfig& config, double h1_norm);

}  // namespace cgl
