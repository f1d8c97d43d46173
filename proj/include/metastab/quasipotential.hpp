#pragma once
#include <utility>

#include "metastab/model.hpp"

namespace metastab {

// Hamiltonian with the level frozen out: H(x, p) = alpha(x) p.p + b(x).p.
struct FrozenHamiltonian {
  DomainSpec domain;
  std::function<SymMat(Vec)> alpha;
  std::function<Vec(Vec)> b;
  double theta = 1.0;  // ellipticity bound for alpha
};

FrozenHamiltonian freeze(const ProblemSpec& spec, double c);

struct PotentialField {
  std::vector<double> v;           // nodal values; +inf at unreachable nodes
  std::vector<double> boundary_v;  // extrapolated values at grid.samples
  const char* method = "";
  int iterations = 0;   // settled nodes (shortest path) or sweeps performed
  double residual = 0;  // last-cycle max update (sweeping)
  bool converged = true;
  bool fallback_edges = false;  // some edge hit the zero-drift fallback
  std::vector<int> unreachable;
};

// Action of the straight segment x -> y with coefficients frozen at the
// midpoint, minimized in closed form over the traversal time:
//   (1/2) [ sqrt((v.Av)(b.Ab)) - v.Ab ],  A = alpha(m)^{-1}, v = y - x.
// Zero exactly when v runs with the drift; throws OutsideDomain when the
// midpoint leaves the closed domain.
double edge_cost(const FrozenHamiltonian& ham, Vec x, Vec y, bool* fallback = nullptr);

// Shortest path from the origin node over in-domain nodes; stencil 1 uses axis
// moves, stencil 2 adds diagonal and knight moves (2D).
PotentialField solve_dijkstra(const FrozenHamiltonian& ham, const Grid& grid, int stencil);

struct SweepConfig {
  double tol = 1e-8;   // max nodal update over a full cycle of sweep orders
  int max_sweeps = 20000;
  double sigma = 0;    // artificial-viscosity bound; 0 = per-axis automatic
};

// Gauss-Seidel fast sweeping with the Lax-Friedrichs numerical Hamiltonian,
// origin pinned to 0, one-sided interior upwinding at boundary-layer nodes.
PotentialField solve_sweeping(const FrozenHamiltonian& ham, const Grid& grid,
                              SweepConfig cfg = {});

// max |a(x, c) - a(x, beta0)| (spectral norm) over grid nodes and |c - beta0| <= delta
double theta_of_delta(const ProblemSpec& spec, double beta0, double delta, const Grid& grid);

// Bracketing pair (plus, minus): on the delta-core alpha^+ >= a(.,c) >= alpha^-
// for every |c - beta0| <= delta, blended continuously to the ellipticity
// extremes outside the delta/2-core. Throws DeltaTooLarge when the level
// modulus exceeds theta0/2.
std::pair<FrozenHamiltonian, FrozenHamiltonian> perturbed_family(const ProblemSpec& spec,
                                                                 double beta0, double delta,
                                                                 const Grid& grid);

}  // namespace metastab
