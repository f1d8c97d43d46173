#pragma once
#include <string>
#include <vector>

#include "metastab/quasipotential.hpp"

namespace metastab {

// Boundary restriction of the potential at one level c: the minimum M, the
// set of boundary samples realizing it within tau_arg, and the data values
// there (g_lo = min, g_hi = max over the argmin set).
struct LevelRecord {
  double c = 0;
  double M = 0;
  std::vector<int> argmin;  // indices into grid.samples
  std::vector<Vec> argmin_x;
  std::vector<double> gvals;
  double g_lo = 0, g_hi = 0;
};

struct SingletonReport {
  bool pass = false;
  double gap = 0;  // g_hi - g_lo at the base level
  double tol = 0;  // the rho_G it was compared against
};

struct CrossingReport {
  std::string branch;  // "increasing", "decreasing", "both", or "vacuous"
  bool vacuous = true;
  bool pass = false;
  double delta = 0;  // smallest passing delta
  std::vector<double> deltas;
  std::vector<int> ok;  // per delta: 1 pass, 0 fail, -1 outside the level range
  std::string note;
};

struct MapOptions {
  double tau_arg = 0;  // argmin tolerance; 0 = max(2 * err_est, 10 h Lambda)
  double err_est = 0;  // solver sup-error estimate fed into the default above
  int levels = 33;     // coarse level-grid resolution over [g_min, g_max]
  int stencil = 1;     // shortest-path stencil for the level solves
  int refine = 4;      // extra subdivision around c0 and the provisional c1
  int bisect_iters = 18;
  double rho_jump = 0;  // staircase jump threshold; 0 = 5 * coarse spacing
  int jobs = 1;         // level solves are independent; assembly is ordered
};

struct MetastabilityMap {
  std::vector<double> cgrid;
  std::vector<LevelRecord> records;  // parallel to cgrid
  int ic0 = -1;                      // index of c0 in cgrid
  double c0 = 0, g0 = 0, c1 = 0;
  double g_min = 0, g_max = 0, g1 = 0, g2 = 0;
  double tau_arg = 0, rho_g = 0, rho_jump = 0;
  SingletonReport singleton;
  CrossingReport crossing;
  bool m_nonmonotone = false;  // M has an interior extremum between c0 and c1
};

// Solves the potential at level c (shortest path) and collects the boundary
// argmin set within tau_arg of the minimum.
LevelRecord level_record(const ProblemSpec& spec, const Grid& grid, double c,
                         double tau_arg, int stencil = 1);

// Tabulates LevelRecords over [g_min, g_max], locates c0/g0/c1, and runs the
// singleton and crossing checks; the level grid is refined around c0 and the
// provisional c1 before c1 is finalized.
MetastabilityMap build_map(const ProblemSpec& spec, const Grid& grid, MapOptions opt = {});

// True iff the data values over the base-level argmin set collapse to a
// point within rho_G; on success g0 is their common value.
SingletonReport check_singleton(const MetastabilityMap& map);

// Smallest level >= c0 with g_lo(c) <= c + rho_G when g0 >= c0 (largest
// level <= c0 with g_hi(c) >= c - rho_G when g0 <= c0), sharpened by
// bisection with fresh level solves; empty scans clamp to [g1, g2].
double compute_c1(const ProblemSpec& spec, const Grid& grid, MetastabilityMap& map,
                  const MapOptions& opt = {});

// Diagonal-crossing check at c1: for each delta, g_hi(c1 + delta) must stay
// below the diagonal (when c0 <= c1 < g_max) and g_lo(c1 - delta) above it
// (when c0 >= c1 > g_min); vacuous when neither guard holds. Tabulated
// records are interpolated piecewise-linearly.
CrossingReport check_crossing(const MetastabilityMap& map, const std::vector<double>& deltas);

// The metastable level reached at horizon exp(lambda/eps): c0 below M(c0),
// otherwise the first level between c0 and c1 where the tabulated M crosses
// lambda (from c0 toward c1), or c1 when there is no crossing.
double cbar(const MetastabilityMap& map, double lambda);

// Grid points whose one-sided staircase increments exceed rho_jump.
std::vector<double> jump_set(const MetastabilityMap& map, const std::vector<double>& lambdas);

}  // namespace metastab
