#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <vector>

#include "cgl/params.hpp"
#include "cgl/types.hpp"

namespace cgl {

/// Triangulated disk. Boundary vertices lie exactly on the circle |x| = R.
struct Mesh {
  std::vector<Point> vertices;
  std::vector<std::array<int, 3>> triangles;  // counter-clockwise
  /// Closed counter-clockwise loop; edge k joins boundary_loop[k] and boundary_loop[k+1 mod K].
  std::vector<int> boundary_loop;
  std::vector<double> edge_arclength;
  std::vector<Point> outward_normals;  // aligned with boundary_loop
  RVector control_mask;                // per vertex, in [0, 1]
  std::vector<char> on_boundary;       // per vertex
  double radius = 0.0;
  double h_max = 0.0;

  int vertex_count() const { return static_cast<int>(vertices.size()); }
  int boundary_count() const { return static_cast<int>(boundary_loop.size()); }
};

struct Eta0Field {
  RVector values;
  std::vector<Point> grad;
  double sup_norm = 0.0;
  double laplacian = -4.0;  // constant on the disk
};

/// Ring-based triangulation of the disk; `seed` rotates each ring by a random offset.
Mesh build_mesh(const DiskGeometry& geom, double h_target, std::uint64_t seed = 0);

/// eta0(x) = R^2 - |x|^2, positive inside, zero on the circle, critical only at the origin.
Eta0Field build_eta0(const Mesh& mesh, const DiskGeometry& geom);

/// d(eta0)/d(nu) at the boundary vertices (ordered as mesh.boundary_loop). Throws if any value is >= 0.
RVector normal_derivative_eta0(const Mesh& mesh, const Eta0Field& eta0);

/// Smoothed indicator of ball(0, r_control): 1 inside r_control - h_max, linear ramp, 0 beyond r_control.
RVector control_mask(const Mesh& mesh, double r_control);

/// Plain-text mesh format: header `vertices N triangles M boundary K`, then coordinates,
/// triangle indices and the ordered boundary loop.
void write_mesh(std::ostream& out, const Mesh& mesh);
Mesh read_mesh(std::istream& in, const DiskGeometry& geom);

}  // namespace cgl
