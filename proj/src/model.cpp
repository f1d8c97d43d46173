#include "metastab/model.hpp"

#include <cmath>
#include <limits>

namespace metastab {

const AssumptionCheck* AssumptionReport::find(const std::string& name) const {
  for (const auto& c : checks)
    if (c.name == name) return &c;
  return nullptr;
}

namespace {

AssumptionCheck worst_over(std::string name, double margin, Vec worst, std::string note = "") {
  AssumptionCheck c;
  c.name = std::move(name);
  c.margin = margin;
  c.worst = worst;
  c.pass = margin <= 0.0;
  c.note = std::move(note);
  return c;
}

}  // namespace

AssumptionReport validate(const ProblemSpec& spec, const Grid& grid) {
  AssumptionReport rep;
  const auto& b = spec.drift.b;

  {
    Vec b0 = b(Vec{});
    AssumptionCheck c = worst_over("drift_fixed_at_origin", 0.0, Vec{});
    c.pass = b0[0] == 0.0 && b0[1] == 0.0;
    c.margin = norm(b0);
    rep.checks.push_back(c);
  }

  {
    // spot-check the declared Lipschitz constant on neighbor pairs
    double worst = -std::numeric_limits<double>::infinity();
    Vec at;
    for (int j = 0; j < grid.dims[1]; ++j) {
      for (int i = 0; i < grid.dims[0]; ++i) {
        int f = grid.flat(i, j);
        if (!grid.in_domain(f)) continue;
        Vec x = grid.coord(f);
        Vec bx = b(x);
        for (int d = 0; d < grid.n; ++d) {
          int ii = i + (d == 0), jj = j + (d == 1);
          if (ii >= grid.dims[0] || jj >= grid.dims[1]) continue;
          int fn = grid.flat(ii, jj);
          if (!grid.in_domain(fn)) continue;
          double ratio = norm(b(grid.coord(fn)) - bx) / grid.h;
          if (ratio - spec.drift.L_b > worst) {
            worst = ratio - spec.drift.L_b;
            at = x;
          }
        }
      }
    }
    rep.checks.push_back(worst_over("drift_lipschitz", worst, at,
                                    "neighbor-pair difference quotients vs declared constant"));
    rep.checks.back().pass = worst <= 1e-9;
  }

  {
    // b(x).x <= -b0 |x|^2 on the stability ball
    double worst = -std::numeric_limits<double>::infinity();
    Vec at;
    for (int f = 0; f < grid.size(); ++f) {
      if (!grid.in_domain(f)) continue;
      Vec x = grid.coord(f);
      if (norm(x) >= spec.drift.r0) continue;
      double m = dot(b(x), x) + spec.drift.b0 * norm2(x);
      if (m > worst) {
        worst = m;
        at = x;
      }
    }
    rep.checks.push_back(worst_over("drift_stable_near_origin", worst, at));
    rep.checks.back().pass = worst <= 1e-12;
  }

  {
    // b . nu < 0 at boundary samples (strict)
    double worst = -std::numeric_limits<double>::infinity();
    Vec at;
    for (const auto& s : grid.samples) {
      double m = dot(b(s.x), outward_normal(spec.domain, s.x));
      if (m > worst) {
        worst = m;
        at = s.x;
      }
    }
    AssumptionCheck c = worst_over("drift_inward_on_boundary", worst, at);
    c.pass = worst < 0.0;
    rep.checks.push_back(c);
  }

  {
    // stability ball contained in the domain
    double m = signed_distance(spec.domain, Vec{}) + spec.drift.r0;
    rep.checks.push_back(worst_over("stability_ball_inside_domain", m, Vec{}));
  }

  {
    // theta0 I <= a(x,c) <= theta0^{-1} I over nodes x level samples
    double th = spec.diffusion.theta0;
    double worst = -std::numeric_limits<double>::infinity();
    Vec at;
    double at_c = 0;
    double clo = spec.boundary.g_min, chi = spec.boundary.g_max;
    bool have_levels = std::isfinite(clo) && std::isfinite(chi);
    const int nc = 33;
    for (int f = 0; f < grid.size() && have_levels; ++f) {
      if (!grid.in_domain(f)) continue;
      Vec x = grid.coord(f);
      for (int k = 0; k < nc; ++k) {
        double c = clo + (chi - clo) * k / (nc - 1);
        double lo, hi;
        eigenvalues(spec.diffusion.a(x, c), grid.n, lo, hi);
        double m = std::max(th - lo, hi - 1.0 / th);
        if (m > worst) {
          worst = m;
          at = x;
          at_c = c;
        }
      }
    }
    AssumptionCheck c = worst_over("uniform_ellipticity", worst, at,
                                   "symmetry structural; worst level c=" + std::to_string(at_c));
    c.pass = have_levels && worst <= 1e-12;
    if (!have_levels) c.note = "boundary levels not computed";
    rep.checks.push_back(c);
  }

  {
    // declared level scalars vs recomputation at grid resolution
    ProblemSpec copy = spec;
    compute_boundary_levels(copy, grid);
    double lg = 0;  // modulus of g over one cell, from neighbor differences
    for (int f = 0; f < grid.size(); ++f) {
      if (!grid.in_domain(f)) continue;
      int i, j;
      grid.unflat(f, i, j);
      if (i + 1 < grid.dims[0] && grid.in_domain(grid.flat(i + 1, j)))
        lg = std::max(lg, std::abs(spec.boundary.g(grid.coord(grid.flat(i + 1, j))) -
                                   spec.boundary.g(grid.coord(f))));
    }
    double tol = 2 * lg + 1e-12;
    double m = std::max(
        {std::abs(copy.boundary.g_min - spec.boundary.g_min),
         std::abs(copy.boundary.g_max - spec.boundary.g_max),
         std::abs(copy.boundary.g1 - spec.boundary.g1),
         std::abs(copy.boundary.g2 - spec.boundary.g2), std::abs(copy.boundary.c0 - spec.boundary.c0)});
    AssumptionCheck c = worst_over("boundary_levels_consistent", m - tol, Vec{});
    c.pass = std::isfinite(m) && m <= tol;
    if (!std::isfinite(m)) c.note = "declared levels missing (NaN)";
    rep.checks.push_back(c);
  }

  {
    AssumptionCheck c;
    c.name = "globally_stable_equilibrium";
    c.pass = true;
    c.assumed = true;
    c.note = "not decidable from samples; recorded as assumed";
    rep.checks.push_back(c);
  }

  rep.pass = true;
  for (const auto& c : rep.checks) rep.pass = rep.pass && c.pass;
  return rep;
}

double hamiltonian(const ProblemSpec& spec, Vec x, double c, Vec p) {
  return quadform(spec.diffusion.a(x, c), p) + dot(spec.drift.b(x), p);
}

double lagrangian(const ProblemSpec& spec, Vec x, double c, Vec q) {
  Vec w = q - spec.drift.b(x);
  return 0.25 * quadform(inverse(spec.diffusion.a(x, c)), w);
}

}  // namespace metastab
