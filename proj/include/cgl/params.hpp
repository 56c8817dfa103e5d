#pragma once

#include "cgl/types.hpp"

namespace cgl {

/// Model and method constants shared by every solver.
struct Params {
  // equation
  double a = 1.0;      // bulk diffusion
  double b = 1.0;      // surface diffusion
  double c = 1.0;      // cubic strength
  double alpha = 0.5;  // dispersion ratio of the linear part
  double gamma = 0.5;  // dispersion ratio of the cubic part
  double T = 1.0;

  // Carleman weights
  double s = 1.05;
  double lambda = 1.05;
  double m = 2.0;
  bool strict_weights = false;

  // numerics
  double theta = 1.0;
  double cg_tol = 1e-10;
  int cg_maxit = 2000;
  double picard_tol = 1e-10;
  int picard_maxit = 20;
  int picard_cg_maxit = 500;  // CG cap for the source-increment solves of the nonlinear loop
  double weight_floor = 1e-300;
  double cubic_gate = 1.0;  // smallness gate on ||u0||_H1 + ||f|| for the cubic solver

  void validate() const;
};

/// Disk domain with concentric control regions: ball(0, r_inner) ⋐ ball(0, r_control) ⋐ ball(0, R).
struct DiskGeometry {
  double R = 1.0;
  double r_inner = 0.25;
  double r_control = 0.5;

  void validate() const;
};

}  // namespace cgl
