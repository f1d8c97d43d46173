#include "metastab/grid.hpp"

#include <cmath>
#include <limits>

namespace metastab {

namespace {

// Bisect the signed distance along [a, b] with sd(a) < 0 <= sd(b).
double crossing_fraction(const DomainSpec& dom, Vec a, Vec b) {
  double lo = 0.0, hi = 1.0;
  for (int i = 0; i < 60; ++i) {
    double mid = 0.5 * (lo + hi);
    Vec p = a + mid * (b - a);
    (signed_distance(dom, p) < 0.0 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace

Grid build_grid(const DomainSpec& domain, double h) {
  if (!contains(domain, Vec{}))
    throw error(errc::origin_outside, "the origin is not in the domain");
  if (!(h > 0.0)) throw error(errc::too_coarse, "h must be positive");
  double diam = diameter(domain);
  if (!(h < diam / 8.0))
    throw error(errc::too_coarse, "h=" + std::to_string(h) + " not below diameter/8=" + std::to_string(diam / 8.0));

  Grid g;
  g.domain = domain;
  g.h = h;
  g.n = domain.n;

  // Anchor the lattice on h*Z^n so a node lands on (or next to) the origin,
  // padded by 2h so every in-domain node has a full ring of lattice neighbors.
  Vec lo, hi;
  bounding_box(domain, lo, hi);
  long i0[2] = {0, 0}, i1[2] = {0, 0};
  for (int d = 0; d < g.n; ++d) {
    i0[d] = static_cast<long>(std::floor(lo[d] / h)) - 2;
    i1[d] = static_cast<long>(std::ceil(hi[d] / h)) + 2;
  }
  g.base = {i0[0] * h, g.n > 1 ? i0[1] * h : 0.0};
  g.ibase[0] = i0[0];
  g.ibase[1] = g.n > 1 ? i0[1] : 0;
  g.dims[0] = static_cast<int>(i1[0] - i0[0] + 1);
  g.dims[1] = g.n > 1 ? static_cast<int>(i1[1] - i0[1] + 1) : 1;

  int total = g.size();
  g.cls.assign(total, NodeClass::exterior);
  g.sd.assign(total, 0.0);

  double on_boundary_tol = 1e-12 * diam;
  for (int f = 0; f < total; ++f) {
    g.sd[f] = signed_distance(domain, g.coord(f));
    if (g.sd[f] < -on_boundary_tol) g.cls[f] = NodeClass::interior;
  }

  // boundary-layer = in-domain node with an exterior axis neighbor
  for (int j = 0; j < g.dims[1]; ++j) {
    for (int i = 0; i < g.dims[0]; ++i) {
      int f = g.flat(i, j);
      if (g.cls[f] == NodeClass::exterior) continue;
      bool edge = false;
      for (int d = 0; d < g.n && !edge; ++d) {
        for (int s = -1; s <= 1 && !edge; s += 2) {
          int ii = i + (d == 0 ? s : 0), jj = j + (d == 1 ? s : 0);
          if (ii < 0 || ii >= g.dims[0] || jj < 0 || jj >= g.dims[1] ||
              g.cls[g.flat(ii, jj)] == NodeClass::exterior)
            edge = true;
        }
      }
      if (edge) g.cls[f] = NodeClass::boundary_layer;
    }
  }

  // origin node: nearest lattice node to 0 among in-domain nodes
  {
    double best = std::numeric_limits<double>::infinity();
    for (int f = 0; f < total; ++f) {
      if (g.cls[f] == NodeClass::exterior) continue;
      double d2 = norm2(g.coord(f));
      if (d2 < best) {
        best = d2;
        g.origin = f;
      }
    }
    if (g.origin < 0 || best > 0.25 * h * h * (1.0 + 1e-9) * g.n)
      throw error(errc::origin_outside, "no in-domain node within h/2 of the origin");
  }

  // resolution gate: at least 9 interior nodes along the best grid line of
  // each axis (coarser grids cannot separate interior from boundary effects)
  for (int d = 0; d < g.n; ++d) {
    int best_count = 0;
    int outer = d == 0 ? g.dims[1] : g.dims[0];
    int inner = d == 0 ? g.dims[0] : g.dims[1];
    for (int o = 0; o < outer; ++o) {
      int count = 0;
      for (int i = 0; i < inner; ++i) {
        int f = d == 0 ? g.flat(i, o) : g.flat(o, i);
        if (g.cls[f] == NodeClass::interior) ++count;
      }
      best_count = std::max(best_count, count);
    }
    if (best_count < 9)
      throw error(errc::too_coarse, "fewer than 9 interior nodes along axis " + std::to_string(d));
  }

  // boundary samples and axis crossings
  for (int j = 0; j < g.dims[1]; ++j) {
    for (int i = 0; i < g.dims[0]; ++i) {
      int f = g.flat(i, j);
      if (g.cls[f] != NodeClass::boundary_layer) continue;
      Vec x = g.coord(f);
      Vec p = project_to_boundary(domain, x);
      g.samples.push_back({p, f, norm(p - x)});
      for (int d = 0; d < g.n; ++d) {
        for (int s = -1; s <= 1; s += 2) {
          int ii = i + (d == 0 ? s : 0), jj = j + (d == 1 ? s : 0);
          bool outside = ii < 0 || ii >= g.dims[0] || jj < 0 || jj >= g.dims[1] ||
                         g.cls[g.flat(ii, jj)] == NodeClass::exterior;
          if (!outside) continue;
          Vec step;
          step[d] = s * h;
          double frac = crossing_fraction(domain, x, x + step);
          // a vanishing gap would blow up the one-sided stencil weights;
          // nudging the wall out by <= 0.05h is within the O(h) consistency
          frac = std::max(frac, 0.05);
          g.crossings.push_back({f, d, s, frac, x + frac * step});
        }
      }
    }
  }

  return g;
}

std::vector<int> shrink(const Grid& g, double delta) {
  std::vector<int> out;
  for (int f = 0; f < g.size(); ++f)
    if (g.in_domain(f) && g.sd[f] <= -delta) out.push_back(f);
  return out;
}

double interp_field(const Grid& g, const std::vector<double>& nodal, Vec x, bool* ok) {
  *ok = false;
  double fx = (x[0] - g.base[0]) / g.h;
  double fy = g.n > 1 ? (x[1] - g.base[1]) / g.h : 0.0;
  int i = static_cast<int>(std::floor(fx));
  int j = g.n > 1 ? static_cast<int>(std::floor(fy)) : 0;
  if (i < 0 || i + 1 >= g.dims[0]) return 0.0;
  if (g.n > 1 && (j < 0 || j + 1 >= g.dims[1])) return 0.0;
  double tx = fx - i, ty = fy - j;
  auto value = [&](int ii, int jj, double& v) {
    int f = g.flat(ii, jj);
    if (!g.in_domain(f) || !std::isfinite(nodal[f])) return false;
    v = nodal[f];
    return true;
  };
  double v00, v10, v01 = 0, v11 = 0;
  if (!value(i, j, v00) || !value(i + 1, j, v10)) return 0.0;
  if (g.n == 1) {
    *ok = true;
    return v00 * (1 - tx) + v10 * tx;
  }
  if (!value(i, j + 1, v01) || !value(i + 1, j + 1, v11)) return 0.0;
  *ok = true;
  return (v00 * (1 - tx) + v10 * tx) * (1 - ty) + (v01 * (1 - tx) + v11 * tx) * ty;
}

}  // namespace metastab
