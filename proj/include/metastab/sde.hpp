#pragma once
#include <cstdint>
#include <string>
#include <vector>

#include "metastab/fields.hpp"

namespace metastab {

// One ensemble of Euler-Maruyama paths dX = b(X) dt + sqrt(2 eps) sigma(X) dW
// with sigma sigma^T = a(., c) frozen at the level c. The step obeys the
// drift-stability cap dt <= 0.1 / L_b (the default picks the cap itself);
// everything downstream is deterministic given the seed.
struct EnsembleConfig {
  double eps = 0.1;
  double c = 0;               // level the diffusion matrix is frozen at
  int n_paths = 1000;
  double dt = 0;              // 0 = 0.1 / L_b
  double horizon = 1e7;      // paths still inside at this time are capped
  std::uint64_t seed = 1;
  Vec start;
  double cache_h = 0.02;      // lattice spacing of the diffusion-root cache
};

struct ExitRecord {
  double t = 0;    // exit time, or the capped time for paths still inside
  Vec x;           // crossing point on the boundary, or the last position
  bool exited = false;
};

struct ExitSummary {
  EnsembleConfig cfg;
  std::vector<ExitRecord> records;  // per path, in path order
  int exited = 0;
  double capped_fraction = 0;
  double mean_time = 0;  // over exited paths
  double se_time = 0;    // bootstrap standard error of that mean
};

// Walks every path to its first boundary crossing (sign change of the signed
// distance, one bisection of the last step, then linear interpolation and
// projection) or to the horizon. Throws OutsideDomain when the start is not
// interior and ConfigError for a step above the stability cap.
ExitSummary simulate_exit(const ProblemSpec& spec, const EnsembleConfig& cfg);

struct ScalarEstimate {
  double value = 0;
  double se = 0;
  int n = 0;
};

// eps * log(mean exit time), bootstrap standard error. Throws TooFewExits
// unless at least 90% of the paths exited.
ScalarEstimate log_exit_time(const ExitSummary& s, double eps);

// Monte-Carlo mean of g(X_{t ^ tau}): the data value at the exit point for
// paths that left before t, at the time-t position otherwise. Throws
// TooFewPaths below two paths (no standard error from fewer).
ScalarEstimate feynman_kac(const ProblemSpec& spec, const EnsembleConfig& cfg,
                           double t);

// Fraction of the exited paths landing within distance d of any of the given
// points.
double exit_mass_near(const ExitSummary& s, const std::vector<Vec>& pts,
                      double d);

// path, exit time, exit point, exited flag; one row per path, plus the
// config echo as a comment header.
void write_records_csv(const std::string& path, const ExitSummary& s);

// JSON block with the config echo and the headline statistics.
std::string summary_text(const ExitSummary& s);

}  // namespace metastab
