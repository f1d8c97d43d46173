#pragma once
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "metastab/fields.hpp"

namespace metastab {

// Time axis: n0 uniform steps of dt0, then geometric growth t -> t(1+gamma)
// capped at dt_max, with requested snapshot times spliced in exactly.
struct TimeGrid {
  std::vector<double> t;        // t[0] = 0, strictly increasing, t.back() >= horizon
  std::vector<int> snap_index;  // positions of the requested times within t
  double horizon = 0;
  double dt0 = 0, gamma = 0;

  static TimeGrid make(double dt0, double horizon, std::vector<double> snaps = {},
                       int n0 = 200, double gamma = 0.05,
                       double dt_max = std::numeric_limits<double>::infinity());
};

// Coefficient field a(x, t) for evolving with externally frozen diffusion.
using MatrixField = std::function<SymMat(Vec, double)>;

struct EvolutionTrace {
  double eps = 0;
  std::vector<double> times;    // full time axis
  std::vector<double> origin;   // value at the node nearest 0, for every time
  std::vector<double> snap_times;
  std::vector<std::vector<double>> snapshots;       // nodal fields (NaN outside)
  std::vector<std::vector<double>> snapshots_prev;  // field one step earlier
  std::vector<double> snap_dt;                      // step leading into each snapshot
  double run_min = 0, run_max = 0;  // over all in-domain nodes and times
  bool max_principle = false;       // run range within the data range (1e-9 slack)
};

// One implicit Euler step of u_t = eps tr[a D^2 u] + b . Du. Diffusion uses
// second differences (one-sided at walls, data entering at the crossing
// points), drift is upwinded per node, and the level-dependent coefficient is
// lagged at the given field with at most one Picard re-iteration. frozen_a,
// when supplied, replaces a(x, u) by a(x, t_new).
std::vector<double> step(const ProblemSpec& spec, const Grid& grid,
                         const std::vector<double>& u, double eps, double dt,
                         double t_new = 0, const MatrixField* frozen_a = nullptr,
                         double picard_tol = 1e-8);

// March from u(.,0) = g to the end of tgrid, recording the origin value at
// every step and full fields at the snapshot times.
EvolutionTrace evolve(const ProblemSpec& spec, const Grid& grid, double eps,
                      double lambda_max, const TimeGrid& tgrid,
                      const MatrixField* frozen_a = nullptr);

// Horizons exp(lambda_j / eps) with the default time grid (dt0 = h).
EvolutionTrace evolve(const ProblemSpec& spec, const Grid& grid, double eps,
                      const std::vector<double>& lambdas,
                      const MatrixField* frozen_a = nullptr);

// Extremal diffusion value over matrices A with theta0 I <= A <= theta0^-1 I:
// theta0^-1 (sum of positive eigenvalues) - theta0 (sum of |negative| ones).
double pucci_plus(const SymMat& X, int n, double theta0);

struct SamplePoint {
  Vec x;
  double t = 0;
};

struct ResidualReport {
  std::vector<double> r;  // w_t - eps D(w) - b . Dw per sample
  double min_r = 0;
  double max_abs = 0;
  int argmin = -1;
  int violations = 0;  // samples with r < -tol
  double tol = 0;
  bool pass = true;
};

// Finite-difference steps for probing a callable candidate: first derivatives
// use sqrt(ulp) * len, second derivatives ulp^(1/4) * len, both floored at
// h_min (set it to the grid spacing for fields that are only grid-smooth).
struct FDSteps {
  double len = 1.0;
  double h_min = 0.0;
};

using SpaceTimeField = std::function<double(Vec, double)>;

// Supersolution check with D = tr[a(x,t) D^2 w].
ResidualReport residual(const SpaceTimeField& w, const MatrixField& a,
                        const DriftField& drift, double eps,
                        const std::vector<SamplePoint>& samples, double tol_res,
                        int n, FDSteps fd = {});

// Supersolution check with the extremal operator D = P+(D^2 w; theta0).
ResidualReport residual_pucci(const SpaceTimeField& w, double theta0,
                              const DriftField& drift, double eps,
                              const std::vector<SamplePoint>& samples,
                              double tol_res, int n, FDSteps fd = {});

// Re-checks the recorded snapshots against the scheme's own differences at
// interior nodes; max_abs is the measured truncation level, O(h + dt).
ResidualReport residual_trace(const ProblemSpec& spec, const Grid& grid,
                              const EvolutionTrace& trace, double eps,
                              double tol_res);

struct ConstancyReport {
  std::vector<double> times;  // snapshot times
  std::vector<double> s;      // max over the delta-shrunk nodes of |u - u(0,t)|
  double delta = 0;
  double first_time = std::numeric_limits<double>::infinity();  // first s < delta
};

ConstancyReport constancy_metric(const Grid& grid, const EvolutionTrace& trace,
                                 double delta);

// Plain binary field checkpoint (versioned header) for long-horizon restarts.
void save_checkpoint(const std::string& path, const std::vector<double>& u, double t);
bool load_checkpoint(const std::string& path, std::vector<double>& u, double& t);

}  // namespace metastab
