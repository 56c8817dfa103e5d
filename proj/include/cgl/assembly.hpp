#pragma once

#include <iosfwd>

#include "cgl/geometry.hpp"
#include "cgl/types.hpp"

namespace cgl {

/// Piecewise-linear bulk–surface operators on a shared (trace-identified) vertex basis.
/// Boundary vertices carry both the bulk trace and the surface unknown.
struct OperatorSet {
  SpMat mass_bulk;       // ∫_Ω φ_i φ_j
  SpMat mass_surface;    // ∫_Γ φ_i φ_j, supported on boundary vertices
  SpMat stiff_bulk;      // ∫_Ω ∇φ_i·∇φ_j
  SpMat stiff_surface;   // ∫_Γ ∂_s φ_i ∂_s φ_j along the boundary loop
  SpMat mass_control;    // diag(χ) M_bulk diag(χ), χ = control mask
  RVector control_mask;  // copy of the mesh mask

  SpMat mass() const { return mass_bulk + mass_surface; }
  SpMat stiffness(double a, double b) const { return a * stiff_bulk + b * stiff_surface; }
  int size() const { return static_cast<int>(mass_bulk.rows()); }
};

OperatorSet assemble(const Mesh& mesh);

/// Full complex pairing ∫_Ω u v̄ + ∫_Γ u v̄; its real part is the 𝕃² scalar product.
Complex energy_product(const OperatorSet& ops, const CVector& u, const CVector& v);

struct HkNorms {
  double L2 = 0.0;
  double H1 = 0.0;
};

HkNorms hk_norms(const OperatorSet& ops, const CVector& u);

/// Coordinate dump, one `row col value` triple per line.
void write_coordinate(std::ostream& out, const SpMat& matrix);

}  // namespace cgl
