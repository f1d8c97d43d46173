#pragma once
#include <vector>

#include "metastab/geometry.hpp"

namespace metastab {

// interior: node in Omega with all axis neighbors in Omega
// boundary_layer: node in Omega with at least one axis neighbor outside
enum class NodeClass : unsigned char { exterior = 0, interior = 1, boundary_layer = 2 };

// One sample per boundary-layer node: its nearest-point projection onto the
// boundary. These realize min/argmin over the boundary for grid fields.
struct BoundarySample {
  Vec x;
  int owner = -1;  // flat index of the boundary-layer node
  double dist = 0; // |x - node|
};

// Axis crossing from a boundary-layer node to the boundary, used by one-sided
// (Shortley-Weller) stencils: the boundary lies at node + dir*frac*h on axis.
struct BoundaryCrossing {
  int node = -1;
  int axis = 0;
  int dir = 1;
  double frac = 1.0;  // in (0, 1]
  Vec x;
};

struct Grid {
  DomainSpec domain;
  double h = 0;
  int n = 1;
  int dims[2]{1, 1};
  Vec base;  // coordinates of index (0, 0); the lattice is h * (ibase + (i, j))
  long ibase[2]{0, 0};  // lattice offset of index (0, 0) on h*Z^n
  std::vector<NodeClass> cls;
  std::vector<double> sd;
  int origin = -1;  // flat index of the node nearest the coordinate origin
  std::vector<BoundarySample> samples;
  std::vector<BoundaryCrossing> crossings;

  int size() const { return dims[0] * dims[1]; }
  int flat(int i, int j) const { return i + dims[0] * j; }
  void unflat(int f, int& i, int& j) const { i = f % dims[0]; j = f / dims[0]; }
  // Single product per axis: coordinates of mirrored indices are exact
  // negations of each other, so symmetric problems stay symmetric bitwise.
  Vec coord(int f) const {
    int i, j;
    unflat(f, i, j);
    return {h * (ibase[0] + i), n > 1 ? h * (ibase[1] + j) : 0.0};
  }
  bool in_domain(int f) const { return cls[f] != NodeClass::exterior; }
};

// Uniform lattice h*Z^n clipped to a padded bounding box; throws OriginOutside
// if 0 is not in the domain and TooCoarse if the resolution gates fail.
Grid build_grid(const DomainSpec& domain, double h);

// Flat indices of in-domain nodes with dist(x, boundary) >= delta. An empty
// result is the (non-fatal) EmptyShrink condition.
std::vector<int> shrink(const Grid& g, double delta);

// Multilinear interpolation of a nodal field; ok=false (value 0) when a needed
// cell corner carries no value (exterior node or +inf).
double interp_field(const Grid& g, const std::vector<double>& nodal, Vec x, bool* ok);

}  // namespace metastab
