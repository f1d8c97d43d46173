#include "metastab/fields.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace metastab {

DriftField drift_linear(Vec k, double r0) {
  DriftField d;
  d.b = [k](Vec x) { return Vec{-k[0] * x[0], -k[1] * x[1]}; };
  d.L_b = std::max(std::abs(k[0]), std::abs(k[1]));
  d.b0 = std::min(k[0], k[1] != 0.0 ? k[1] : k[0]);
  d.r0 = r0;
  return d;
}

DriftField drift_diag_quadratic(Vec k, Vec q, double r0, double xmax) {
  DriftField d;
  d.b = [k, q](Vec x) {
    return Vec{-k[0] * x[0] - q[0] * x[0] * std::abs(x[0]),
               -k[1] * x[1] - q[1] * x[1] * std::abs(x[1])};
  };
  d.L_b = std::max(k[0] + 2 * q[0] * xmax, k[1] + 2 * q[1] * xmax);
  d.b0 = std::min(k[0], k[1] != 0.0 || q[1] != 0.0 ? k[1] : k[0]);
  d.r0 = r0;
  return d;
}

DiffusionField diffusion_const(SymMat A, double theta0) {
  DiffusionField f;
  f.a = [A](Vec, double) { return A; };
  f.theta0 = theta0;
  return f;
}

DiffusionField diffusion_affine(double base, double slope, double c_lo, double c_hi,
                                double theta0) {
  DiffusionField f;
  f.a = [=](Vec, double c) {
    double v = base + slope * clamp(c, c_lo, c_hi);
    return SymMat::diag(v, v);
  };
  f.theta0 = theta0;
  return f;
}

DiffusionField diffusion_recip(double c_lo, double c_hi, double theta0) {
  DiffusionField f;
  f.a = [=](Vec, double c) {
    double v = 1.0 / (1.0 + clamp(c, c_lo, c_hi));
    return SymMat::diag(v, v);
  };
  f.theta0 = theta0;
  return f;
}

BoundaryData boundary_affine(double ax, double ay, double a0) {
  BoundaryData b;
  b.g = [=](Vec x) { return ax * x[0] + ay * x[1] + a0; };
  b.g_min = b.g_max = b.g1 = b.g2 = b.c0 = std::nan("");
  return b;
}

BoundaryData boundary_pwl(std::vector<std::pair<double, double>> knots) {
  std::sort(knots.begin(), knots.end());
  BoundaryData b;
  b.g = [knots](Vec x) {
    double t = x[0];
    if (t <= knots.front().first) return knots.front().second;
    if (t >= knots.back().first) return knots.back().second;
    for (size_t i = 1; i < knots.size(); ++i) {
      if (t <= knots[i].first) {
        double w = (t - knots[i - 1].first) / (knots[i].first - knots[i - 1].first);
        return knots[i - 1].second + w * (knots[i].second - knots[i - 1].second);
      }
    }
    return knots.back().second;
  };
  b.g_min = b.g_max = b.g1 = b.g2 = b.c0 = std::nan("");
  return b;
}

void compute_boundary_levels(ProblemSpec& spec, const Grid& grid) {
  auto& bd = spec.boundary;
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (int f = 0; f < grid.size(); ++f) {
    if (!grid.in_domain(f)) continue;
    double v = bd.g(grid.coord(f));
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  double b1 = std::numeric_limits<double>::infinity(), b2 = -b1;
  for (const auto& s : grid.samples) {
    double v = bd.g(s.x);
    b1 = std::min(b1, v);
    b2 = std::max(b2, v);
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  bd.g_min = lo;
  bd.g_max = hi;
  bd.g1 = b1;
  bd.g2 = b2;
  bd.c0 = bd.g(Vec{});
}

}  // namespace metastab
