#include "cgl/assembly.hpp"

#include <cmath>
#include <iomanip>
#include <ostream>
#include <string>
#include <vector>

namespace cgl {

OperatorSet assemble(const Mesh& mesh) {
  const int n = mesh.vertex_count();
  std::vector<Eigen::Triplet<double>> mb, kb, ms, ks, mc;
  mb.reserve(9 * mesh.triangles.size());
  kb.reserve(9 * mesh.triangles.size());
  mc.reserve(9 * mesh.triangles.size());
  const RVector& chi = mesh.control_mask;

  for (std::size_t e = 0; e < mesh.triangles.size(); ++e) {
    const auto& t = mesh.triangles[e];
    const Point& p0 = mesh.vertices[t[0]];
    const Point& p1 = mesh.vertices[t[1]];
    const Point& p2 = mesh.vertices[t[2]];
    const double area2 = (p1.x() - p0.x()) * (p2.y() - p0.y()) - (p2.x() - p0.x()) * (p1.y() - p0.y());
    const double area = 0.5 * area2;
    if (!(area >= 1e-14)) {
      throw NumericalError("assemble: degenerate triangle " + std::to_string(e));
    }
    // gradients of the barycentric coordinates
    Eigen::Matrix<double, 3, 2> g;
    g << p1.y() - p2.y(), p2.x() - p1.x(),
         p2.y() - p0.y(), p0.x() - p2.x(),
         p0.y() - p1.y(), p1.x() - p0.x();
    g /= area2;
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) {
        const double m = area / 12.0 * (i == j ? 2.0 : 1.0);
        mb.emplace_back(t[i], t[j], m);
        mc.emplace_back(t[i], t[j], chi[t[i]] * m * chi[t[j]]);
        kb.emplace_back(t[i], t[j], area * g.row(i).dot(g.row(j)));
      }
    }
  }

  const int nb = mesh.boundary_count();
  for (int k = 0; k < nb; ++k) {
    const int i = mesh.boundary_loop[k];
    const int j = mesh.boundary_loop[(k + 1) % nb];
    const double len = mesh.edge_arclength[k];
    ms.emplace_back(i, i, len / 3.0);
    ms.emplace_back(j, j, len / 3.0);
    ms.emplace_back(i, j, len / 6.0);
    ms.emplace_back(j, i, len / 6.0);
    ks.emplace_back(i, i, 1.0 / len);
    ks.emplace_back(j, j, 1.0 / len);
    ks.emplace_back(i, j, -1.0 / len);
    ks.emplace_back(j, i, -1.0 / len);
  }

  OperatorSet ops;
  auto build = [n](SpMat& out, const std::vector<Eigen::Triplet<double>>& trips) {
    out.resize(n, n);
    out.setFromTriplets(trips.begin(), trips.end());
    out.makeCompressed();
  };
  build(ops.mass_bulk, mb);
  build(ops.stiff_bulk, kb);
  build(ops.mass_surface, ms);
  build(ops.stiff_surface, ks);
  build(ops.mass_control, mc);
  ops.control_mask = chi;
  return ops;
}

Complex energy_product(const OperatorSet& ops, const CVector& u, const CVector& v) {
  require(u.size() == ops.size() && v.size() == ops.size(), "energy_product: size mismatch");
  const CVector mv = ops.mass_bulk.cast<Complex>() * v.conjugate() + ops.mass_surface.cast<Complex>() * v.conjugate();
  return u.transpose() * mv;
}

HkNorms hk_norms(const OperatorSet& ops, const CVector& u) {
  require(u.size() == ops.size(), "hk_norms: size mismatch");
  const double l2sq = energy_product(ops, u, u).real();
  const CVector ku = (ops.stiff_bulk + ops.stiff_surface).cast<Complex>() * u;
  const double grad = u.dot(ku).real();  // u^H K u
  HkNorms out;
  out.L2 = std::sqrt(std::max(0.0, l2sq));
  out.H1 = std::sqrt(std::max(0.0, l2sq + grad));
  return out;
}

void write_coordinate(std::ostream& out, const SpMat& matrix) {
  out << std::setprecision(17);
  for (int k = 0; k < matrix.outerSize(); ++k) {
    for (SpMat::InnerIterator it(matrix, k); it; ++it) {
      out << it.row() << ' ' << it.col() << ' ' << it.value() << '\n';
    }
  }
}

}  // namespace cgl
