#include "cgl/desk.hpp"

#include <cmath>

namespace cgl {

Desk make_desk(const RunConfig& config, const DiskGeometry& geom, double h_target, int steps) {
  Desk d;
  d.mesh = build_mesh(geom, h_target, config.mesh_seed);
  d.eta0 = build_eta0(d.mesh, geom);
  d.ops = assemble(d.mesh);
  d.grid = TimeGrid{steps, config.params.T};
  return d;
}

CVector bump(const Desk& desk, const RunConfig& config, double h1_norm) {
  CVector u(desk.mesh.vertex_count());
  const Point c(config.u0_x, config.u0_y);
  for (int i = 0; i < desk.mesh.vertex_count(); ++i) {
    u[i] = std::exp(-config.u0_beta * (desk.mesh.vertices[i] - c).squaredNorm());
  }
  const double n = hk_norms(desk.ops, u).H1;
  return n > 0.0 ? CVector(u * (h1_norm / n)) : u;
}

}  // namespace cgl
