#pragma once
#include <functional>
#include <utility>
#include <vector>

#include "metastab/grid.hpp"

namespace metastab {

// Drift b with its user-declared structural constants. The library verifies
// the declarations by sampling (see validate); it never infers them.
struct DriftField {
  std::function<Vec(Vec)> b;
  double L_b = 1.0;  // Lipschitz constant
  double b0 = 1.0;   // inward rate: b(x).x <= -b0|x|^2 on B_r0
  double r0 = 0.5;   // radius where the inward rate is claimed
};

// Level-dependent diffusion matrix a(x, c), uniformly elliptic:
// theta0 I <= a <= theta0^{-1} I.
struct DiffusionField {
  std::function<SymMat(Vec, double)> a;
  double theta0 = 1.0;
};

// Boundary/initial data g with its derived levels. The scalar fields start as
// NaN and are filled by compute_boundary_levels; validate cross-checks them.
struct BoundaryData {
  std::function<double(Vec)> g;
  double g_min = 0, g_max = 0;  // range over the closed domain (level interval)
  double g1 = 0, g2 = 0;        // min/max over the boundary
  double c0 = 0;                // g at the origin
};

struct ProblemSpec {
  DomainSpec domain;
  DriftField drift;
  DiffusionField diffusion;
  BoundaryData boundary;
};

// Stock fields, selectable by name from scenario configs.

// b_d(x) = -k_d x_d
DriftField drift_linear(Vec k, double r0);
// b_d(x) = -k_d x_d - q_d x_d |x_d|; xmax bounds |x_d| for the Lipschitz constant
DriftField drift_diag_quadratic(Vec k, Vec q, double r0, double xmax);

DiffusionField diffusion_const(SymMat A, double theta0);
// (base + slope * clamp(c, c_lo, c_hi)) * I
DiffusionField diffusion_affine(double base, double slope, double c_lo, double c_hi,
                                double theta0);
// I / (1 + clamp(c, c_lo, c_hi))
DiffusionField diffusion_recip(double c_lo, double c_hi, double theta0);

BoundaryData boundary_affine(double ax, double ay, double a0);
// piecewise linear in x[0] through (x, value) knots, constant outside
BoundaryData boundary_pwl(std::vector<std::pair<double, double>> knots);

// Fills g_min/g_max (over in-domain nodes and boundary samples), g1/g2 (over
// boundary samples), and c0 = g(0).
void compute_boundary_levels(ProblemSpec& spec, const Grid& grid);

}  // namespace metastab
