#pragma once
#include <functional>

#include "metastab/errors.hpp"
#include "metastab/linalg.hpp"

namespace metastab {

enum class Shape { interval, box, disk, ellipse, implicit };

// Bounded open domain containing the origin. The signed distance is negative
// inside, zero on the boundary, positive outside; for the analytic shapes it
// is the true Euclidean distance (|grad| = 1 away from the medial axis).
struct DomainSpec {
  Shape shape = Shape::interval;
  int n = 1;
  Vec lo{-1.0, 0.0}, hi{1.0, 0.0};  // interval/box extents; bbox for implicit
  Vec center;                        // disk/ellipse
  double radius = 1.0;               // disk
  Vec semi_axis{1.0, 1.0};           // ellipse
  std::function<double(Vec)> sdf;    // implicit shapes only

  static DomainSpec interval(double a, double b);
  static DomainSpec box(Vec lo, Vec hi);
  static DomainSpec disk(Vec c, double r);
  static DomainSpec ellipse(Vec c, Vec semi);
  static DomainSpec implicit(int n, std::function<double(Vec)> sdf, Vec lo, Vec hi);
};

double signed_distance(const DomainSpec& d, Vec x);
bool contains(const DomainSpec& d, Vec x);  // sd < 0

// Unit outward normal; throws NotOnBoundary unless |sd(x)| <= 1e-6 * diameter.
Vec outward_normal(const DomainSpec& d, Vec x);

// Nearest boundary point (exact for analytic shapes, iterated for implicit).
Vec project_to_boundary(const DomainSpec& d, Vec x);

double diameter(const DomainSpec& d);
void bounding_box(const DomainSpec& d, Vec& lo, Vec& hi);

}  // namespace metastab
