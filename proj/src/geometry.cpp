#include "cgl/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <istream>
#include <numbers>
#include <ostream>
#include <random>
#include <string>

namespace cgl {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

double wrap_angle(double a) {
  a = std::fmod(a, kTwoPi);
  return a < 0.0 ? a + kTwoPi : a;
}

double signed_area(const Point& p, const Point& q, const Point& r) {
  return 0.5 * ((q.x() - p.x()) * (r.y() - p.y()) - (r.x() - p.x()) * (q.y() - p.y()));
}

void push_ccw(std::vector<std::array<int, 3>>& tris, const std::vector<Point>& v, int i, int j,
              int k) {
  if (signed_area(v[i], v[j], v[k]) < 0.0) std::swap(j, k);
  tris.push_back({i, j, k});
}

// Triangulates the annular strip between two rings given as angularly sorted vertex lists.
void zip_rings(std::vector<std::array<int, 3>>& tris, const std::vector<Point>& v,
               const std::vector<int>& inner, const std::vector<double>& inner_angle,
               const std::vector<int>& outer, const std::vector<double>& outer_angle) {
  const int ni = static_cast<int>(inner.size());
  const int no = static_cast<int>(outer.size());
  const double a0 = inner_angle[0];
  // outer start: the vertex angularly closest to inner[0]
  int j0 = 0;
  double best = kTwoPi;
  for (int j = 0; j < no; ++j) {
    double d = std::abs(wrap_angle(outer_angle[j] - a0 + std::numbers::pi) - std::numbers::pi);
    if (d < best) {
      best = d;
      j0 = j;
    }
  }
  auto unwrapped_inner = [&](int i) {
    return a0 + wrap_angle(inner_angle[i % ni] - a0) + (i >= ni ? kTwoPi : 0.0);
  };
  const double b0 = a0 + (wrap_angle(outer_angle[j0] - a0 + std::numbers::pi) - std::numbers::pi);
  auto unwrapped_outer = [&](int j) {
    return b0 + wrap_angle(outer_angle[(j0 + j) % no] - outer_angle[j0]) + (j >= no ? kTwoPi : 0.0);
  };
  int i = 0, j = 0;
  while (i < ni || j < no) {
    const bool advance_inner =
        j >= no || (i < ni && unwrapped_inner(i + 1) <= unwrapped_outer(j + 1));
    const int vi = inner[i % ni];
    const int vj = outer[(j0 + j) % no];
    if (advance_inner) {
      push_ccw(tris, v, vi, vj, inner[(i + 1) % ni]);
      ++i;
    } else {
      push_ccw(tris, v, vi, vj, outer[(j0 + j + 1) % no]);
      ++j;
    }
  }
}

void finish_mesh(Mesh& mesh, double r_control) {
  const int nv = mesh.vertex_count();
  mesh.on_boundary.assign(nv, 0);
  for (int idx : mesh.boundary_loop) mesh.on_boundary[idx] = 1;

  const int nb = mesh.boundary_count();
  mesh.edge_arclength.resize(nb);
  mesh.outward_normals.resize(nb);
  for (int k = 0; k < nb; ++k) {
    const Point& p = mesh.vertices[mesh.boundary_loop[k]];
    const Point& q = mesh.vertices[mesh.boundary_loop[(k + 1) % nb]];
    const double dtheta = wrap_angle(std::atan2(q.y(), q.x()) - std::atan2(p.y(), p.x()));
    mesh.edge_arclength[k] = mesh.radius * dtheta;
    mesh.outward_normals[k] = p / p.norm();
  }

  double h = 0.0;
  for (const auto& t : mesh.triangles) {
    for (int e = 0; e < 3; ++e) {
      h = std::max(h, (mesh.vertices[t[e]] - mesh.vertices[t[(e + 1) % 3]]).norm());
    }
  }
  mesh.h_max = h;
  mesh.control_mask = control_mask(mesh, r_control);
}

}  // namespace

RVector control_mask(const Mesh& mesh, double r_control) {
  RVector mask(mesh.vertex_count());
  for (int i = 0; i < mesh.vertex_count(); ++i) {
    const double r = mesh.vertices[i].norm();
    mask[i] = std::clamp((r_control - r) / mesh.h_max, 0.0, 1.0);
  }
  return mask;
}

Mesh build_mesh(const DiskGeometry& geom, double h_target, std::uint64_t seed) {
  geom.validate();
  require(h_target > 0.0, "build_mesh: h_target must be positive");
  require(h_target < geom.r_inner / 2.0, "build_mesh: h_target too large for r_inner (need h_target < r_inner/2)");

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  Mesh mesh;
  mesh.radius = geom.R;
  const int rings = static_cast<int>(std::ceil(geom.R / h_target));
  const double dr = geom.R / rings;

  mesh.vertices.push_back(Point::Zero());
  std::vector<int> prev_ring{0};
  std::vector<double> prev_angle{0.0};
  int prev_count = 1;

  for (int k = 1; k <= rings; ++k) {
    const double r = (k == rings) ? geom.R : k * dr;
    const int n = std::max({6, prev_count, static_cast<int>(std::ceil(kTwoPi * r / h_target))});
    const double offset = unit(rng) * kTwoPi / n;
    std::vector<int> ring(n);
    std::vector<double> angle(n);
    for (int j = 0; j < n; ++j) {
      angle[j] = offset + kTwoPi * j / n;
      ring[j] = static_cast<int>(mesh.vertices.size());
      mesh.vertices.emplace_back(r * std::cos(angle[j]), r * std::sin(angle[j]));
    }
    if (k == 1) {
      for (int j = 0; j < n; ++j) push_ccw(mesh.triangles, mesh.vertices, 0, ring[j], ring[(j + 1) % n]);
    } else {
      zip_rings(mesh.triangles, mesh.vertices, prev_ring, prev_angle, ring, angle);
    }
    prev_ring = std::move(ring);
    prev_angle = std::move(angle);
    prev_count = n;
  }
  mesh.boundary_loop = prev_ring;
  finish_mesh(mesh, geom.r_control);
  return mesh;
}

Eta0Field build_eta0(const Mesh& mesh, const DiskGeometry& geom) {
  Eta0Field eta;
  const int nv = mesh.vertex_count();
  eta.values.resize(nv);
  eta.grad.resize(nv);
  const double r2 = geom.R * geom.R;
  for (int i = 0; i < nv; ++i) {
    const Point& x = mesh.vertices[i];
    eta.values[i] = mesh.on_boundary[i] ? 0.0 : r2 - x.squaredNorm();
    eta.grad[i] = -2.0 * x;
    if (x.norm() > geom.r_inner && eta.grad[i].norm() < 1e-14) {
      throw NumericalError("build_eta0: vanishing gradient outside the inner control region at vertex " +
                           std::to_string(i));
    }
  }
  eta.sup_norm = r2;
  return eta;
}

RVector normal_derivative_eta0(const Mesh& mesh, const Eta0Field& eta0) {
  const int nb = mesh.boundary_count();
  RVector dn(nb);
  for (int k = 0; k < nb; ++k) {
    dn[k] = eta0.grad[mesh.boundary_loop[k]].dot(mesh.outward_normals[k]);
    if (!(dn[k] < 0.0)) {
      throw NumericalError("normal_derivative_eta0: non-negative normal derivative at boundary vertex " +
                           std::to_string(mesh.boundary_loop[k]));
    }
  }
  return dn;
}

void write_mesh(std::ostream& out, const Mesh& mesh) {
  out << "vertices " << mesh.vertex_count() << " triangles " << mesh.triangles.size() << " boundary "
      << mesh.boundary_count() << '\n';
  out << std::setprecision(17);
  for (const auto& p : mesh.vertices) out << p.x() << ' ' << p.y() << '\n';
  for (const auto& t : mesh.triangles) out << t[0] << ' ' << t[1] << ' ' << t[2] << '\n';
  for (int idx : mesh.boundary_loop) out << idx << '\n';
}

Mesh read_mesh(std::istream& in, const DiskGeometry& geom) {
  std::string kv, kt, kb;
  std::size_t nv = 0, nt = 0, nb = 0;
  if (!(in >> kv >> nv >> kt >> nt >> kb >> nb) || kv != "vertices" || kt != "triangles" ||
      kb != "boundary") {
    throw PreconditionError("read_mesh: malformed header");
  }
  Mesh mesh;
  mesh.radius = geom.R;
  mesh.vertices.resize(nv);
  for (auto& p : mesh.vertices) {
    if (!(in >> p.x() >> p.y())) throw PreconditionError("read_mesh: truncated vertex block");
  }
  mesh.triangles.resize(nt);
  for (auto& t : mesh.triangles) {
    if (!(in >> t[0] >> t[1] >> t[2])) throw PreconditionError("read_mesh: truncated triangle block");
    for (int idx : t) require(idx >= 0 && static_cast<std::size_t>(idx) < nv, "read_mesh: bad vertex index");
  }
  mesh.boundary_loop.resize(nb);
  for (auto& idx : mesh.boundary_loop) {
    if (!(in >> idx)) throw PreconditionError("read_mesh: truncated boundary block");
    require(idx >= 0 && static_cast<std::size_t>(idx) < nv, "read_mesh: bad boundary index");
  }
  finish_mesh(mesh, geom.r_control);
  return mesh;
}

void Params::validate() const {
  require(a > 0 && b > 0 && c > 0, "Params: a, b, c must be positive");
  require(alpha != 0 && gamma != 0, "Params: alpha and gamma must be nonzero");
  require(T > 0, "Params: T must be positive");
  require(s > 1 && lambda > 1 && m > 1, "Params: s, lambda, m must exceed 1");
  require(theta >= 0.5 && theta <= 1.0, "Params: theta must lie in [1/2, 1]");
  require(weight_floor > 0 && weight_floor < 1e-12, "Params: weight_floor must lie in (0, 1e-12)");
  require(cg_tol > 0 && cg_maxit > 0 && picard_tol > 0 && picard_maxit > 0 && picard_cg_maxit > 0 && cubic_gate > 0,
          "Params: iteration controls must be positive");
}

void DiskGeometry::validate() const {
  require(0.0 < r_inner && r_inner < r_control && r_control < R,
          "DiskGeometry: need 0 < r_inner < r_control < R");
}

}  // namespace cgl
