#include "metastab/geometry.hpp"

#include <cmath>

namespace metastab {

DomainSpec DomainSpec::interval(double a, double b) {
  DomainSpec d;
  d.shape = Shape::interval;
  d.n = 1;
  d.lo = Vec(a);
  d.hi = Vec(b);
  return d;
}

DomainSpec DomainSpec::box(Vec lo, Vec hi) {
  DomainSpec d;
  d.shape = Shape::box;
  d.n = 2;
  d.lo = lo;
  d.hi = hi;
  return d;
}

DomainSpec DomainSpec::disk(Vec c, double r) {
  DomainSpec d;
  d.shape = Shape::disk;
  d.n = 2;
  d.center = c;
  d.radius = r;
  d.lo = c - Vec(r, r);
  d.hi = c + Vec(r, r);
  return d;
}

DomainSpec DomainSpec::ellipse(Vec c, Vec semi) {
  DomainSpec d;
  d.shape = Shape::ellipse;
  d.n = 2;
  d.center = c;
  d.semi_axis = semi;
  d.lo = c - semi;
  d.hi = c + semi;
  return d;
}

DomainSpec DomainSpec::implicit(int n, std::function<double(Vec)> sdf, Vec lo, Vec hi) {
  DomainSpec d;
  d.shape = Shape::implicit;
  d.n = n;
  d.sdf = std::move(sdf);
  d.lo = lo;
  d.hi = hi;
  return d;
}

namespace {

// Closest point on the first-quadrant arc of an axis-aligned ellipse centered
// at the origin, for p in the closed first quadrant. Bisection on
// f(t) = -(d/dt)|p - (A cos t, B sin t)|^2 / 2, which starts >= 0 at t = 0,
// ends <= 0 at t = pi/2, and crosses once (f/(ct st) is strictly decreasing).
Vec ellipse_closest_quadrant(double A, double B, Vec p) {
  auto f = [&](double t) {
    double ct = std::cos(t), st = std::sin(t);
    return (A * A - B * B) * ct * st - p[0] * A * st + p[1] * B * ct;
  };
  // on the x-axis at or beyond the evolute cusp the vertex is the minimizer
  if (p[1] == 0.0 && p[0] * A >= A * A - B * B) return {A, 0.0};
  double lo = 0.0, hi = 1.5707963267948966;
  for (int i = 0; i < 80; ++i) {
    double mid = 0.5 * (lo + hi);
    (f(mid) > 0.0 ? lo : hi) = mid;
  }
  double t = 0.5 * (lo + hi);
  return {A * std::cos(t), B * std::sin(t)};
}

Vec ellipse_closest(const DomainSpec& d, Vec x) {
  Vec q = x - d.center;
  Vec a{std::abs(q[0]), std::abs(q[1])};
  Vec c = ellipse_closest_quadrant(d.semi_axis[0], d.semi_axis[1], a);
  if (q[0] < 0) c[0] = -c[0];
  if (q[1] < 0) c[1] = -c[1];
  return d.center + c;
}

double fd_step(const DomainSpec& d) { return 1e-5 * diameter(d); }

}  // namespace

double signed_distance(const DomainSpec& d, Vec x) {
  switch (d.shape) {
    case Shape::interval:
      return std::max(d.lo[0] - x[0], x[0] - d.hi[0]);
    case Shape::box: {
      double qx = std::max(d.lo[0] - x[0], x[0] - d.hi[0]);
      double qy = std::max(d.lo[1] - x[1], x[1] - d.hi[1]);
      if (qx <= 0.0 && qy <= 0.0) return std::max(qx, qy);
      return norm({std::max(qx, 0.0), std::max(qy, 0.0)});
    }
    case Shape::disk:
      return norm(x - d.center) - d.radius;
    case Shape::ellipse: {
      Vec c = ellipse_closest(d, x);
      double dist = norm(x - c);
      Vec q = x - d.center;
      double lvl = q[0] * q[0] / (d.semi_axis[0] * d.semi_axis[0]) +
                   q[1] * q[1] / (d.semi_axis[1] * d.semi_axis[1]);
      return lvl < 1.0 ? -dist : dist;
    }
    case Shape::implicit:
      return d.sdf(x);
  }
  return 0.0;
}

bool contains(const DomainSpec& d, Vec x) { return signed_distance(d, x) < 0.0; }

double diameter(const DomainSpec& d) {
  switch (d.shape) {
    case Shape::interval:
      return d.hi[0] - d.lo[0];
    case Shape::box:
      return norm(d.hi - d.lo);
    case Shape::disk:
      return 2.0 * d.radius;
    case Shape::ellipse:
      return 2.0 * std::max(d.semi_axis[0], d.semi_axis[1]);
    case Shape::implicit:
      return norm(d.hi - d.lo);
  }
  return 0.0;
}

void bounding_box(const DomainSpec& d, Vec& lo, Vec& hi) {
  lo = d.lo;
  hi = d.hi;
}

Vec outward_normal(const DomainSpec& d, Vec x) {
  double sd = signed_distance(d, x);
  if (std::abs(sd) > 1e-6 * diameter(d))
    throw error(errc::not_on_boundary, "point is " + std::to_string(sd) + " away from the boundary");
  switch (d.shape) {
    case Shape::interval:
      return Vec(x[0] - d.lo[0] < d.hi[0] - x[0] ? -1.0 : 1.0);
    case Shape::box: {
      // nearest face wins; corners get the normalized corner offset
      double ml = x[0] - d.lo[0], mr = d.hi[0] - x[0];
      double mb = x[1] - d.lo[1], mt = d.hi[1] - x[1];
      double mx = std::min(ml, mr), my = std::min(mb, mt);
      double tol = 1e-6 * diameter(d);
      if (mx < tol && my < tol) {
        Vec nrm{ml < mr ? -1.0 : 1.0, mb < mt ? -1.0 : 1.0};
        return (1.0 / norm(nrm)) * nrm;
      }
      if (mx <= my) return {ml < mr ? -1.0 : 1.0, 0.0};
      return {0.0, mb < mt ? -1.0 : 1.0};
    }
    case Shape::disk: {
      Vec q = x - d.center;
      return (1.0 / norm(q)) * q;
    }
    case Shape::ellipse: {
      Vec q = x - d.center;
      Vec g{q[0] / (d.semi_axis[0] * d.semi_axis[0]), q[1] / (d.semi_axis[1] * d.semi_axis[1])};
      return (1.0 / norm(g)) * g;
    }
    case Shape::implicit: {
      double s = fd_step(d);
      Vec g;
      for (int k = 0; k < d.n; ++k) {
        Vec e;
        e[k] = s;
        g[k] = (d.sdf(x + e) - d.sdf(x - e)) / (2.0 * s);
      }
      double gn = norm(g);
      if (gn == 0.0) throw error(errc::not_on_boundary, "degenerate sdf gradient");
      return (1.0 / gn) * g;
    }
  }
  return Vec(1.0);
}

Vec project_to_boundary(const DomainSpec& d, Vec x) {
  switch (d.shape) {
    case Shape::interval:
      return Vec(x[0] - d.lo[0] < d.hi[0] - x[0] ? d.lo[0] : d.hi[0]);
    case Shape::box: {
      double ml = x[0] - d.lo[0], mr = d.hi[0] - x[0];
      double mb = x[1] - d.lo[1], mt = d.hi[1] - x[1];
      Vec p = x;
      if (ml <= 0 || mr <= 0 || mb <= 0 || mt <= 0) {
        // outside or on: clamp to the closed box, then fall through if interior
        p = {clamp(x[0], d.lo[0], d.hi[0]), clamp(x[1], d.lo[1], d.hi[1])};
        if (signed_distance(d, p) >= 0.0) return p;
        ml = p[0] - d.lo[0], mr = d.hi[0] - p[0];
        mb = p[1] - d.lo[1], mt = d.hi[1] - p[1];
      }
      double m = std::min(std::min(ml, mr), std::min(mb, mt));
      if (m == ml) return {d.lo[0], p[1]};
      if (m == mr) return {d.hi[0], p[1]};
      if (m == mb) return {p[0], d.lo[1]};
      return {p[0], d.hi[1]};
    }
    case Shape::disk: {
      Vec q = x - d.center;
      double nq = norm(q);
      if (nq == 0.0) return d.center + Vec(d.radius, 0.0);
      return d.center + (d.radius / nq) * q;
    }
    case Shape::ellipse:
      return ellipse_closest(d, x);
    case Shape::implicit: {
      // damped Newton along the sdf gradient; the sdf need not be a true
      // distance, so iterate until the residual is negligible
      Vec p = x;
      double s = fd_step(d);
      for (int it = 0; it < 100; ++it) {
        double sd = d.sdf(p);
        if (std::abs(sd) < 1e-12 * diameter(d)) return p;
        Vec g;
        for (int k = 0; k < d.n; ++k) {
          Vec e;
          e[k] = s;
          g[k] = (d.sdf(p + e) - d.sdf(p - e)) / (2.0 * s);
        }
        double g2 = norm2(g);
        if (g2 < 1e-30) break;
        p = p - (sd / g2) * g;
      }
      return p;
    }
  }
  return x;
}

}  // namespace metastab
