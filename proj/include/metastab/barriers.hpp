#pragma once
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "metastab/parabolic.hpp"
#include "metastab/quasipotential.hpp"

namespace metastab {

// C2 ramp: 0 on [0, 1/2], 1 on [1, inf), nondecreasing. Degrees 5-6 get the
// quintic smoothstep on the middle interval, 7+ the septic. The derivative
// sups are dense-sampled once and drive finite-difference tolerances later.
struct BumpProfile {
  int degree = 5;
  std::function<double(double)> h, dh, d2h;
  double h2_norm = 0;  // sup |h''|
  double h4_norm = 0;  // sup |h''''|
};

BumpProfile make_h(int degree = 5);

enum class BarrierKind { p_eps, q_eps, w_short, z_long, v_smooth, w_m };

// One sampled inequality. Lower lines pass when every value >= bound - tol,
// upper lines when every value <= bound + tol; worst is the signed margin.
struct CheckLine {
  std::string name;
  bool lower = true;
  double bound = 0;
  double tol = 0;
  double worst = 0;
  int samples = 0;
  int violations = 0;
  bool pass = false;
  std::vector<double> values;
};

struct VerifyReport {
  std::vector<CheckLine> lines;
  bool pass = false;
  std::string note;  // search trail or failure detail
};

// Payload shared by the potential-based kinds so downstream constructions can
// reuse the frozen coefficients and nodal fields without re-solving.
struct BarrierContext {
  Grid grid;
  FrozenHamiltonian ham;
  std::vector<double> V;   // nodal potential (+inf where unreachable)
  std::vector<double> vs;  // nodal smoothed potential (v_smooth only)
  double M = 0;            // min of V over the boundary samples
};

struct BarrierParams {
  double eps = 0, k = 0, R = 0, r = 0, m = 0;
  double d_eps = 0, eta = 0, tau = 0, mu = 0, rho = 0;
  double rho_minus = 0, rho_plus = 0, gamma = 0, C1 = 0;
};

// Immutable once built. verified == every report line passed; consumers must
// not use unverified candidates for conclusions, only for diagnostics.
struct BarrierCandidate {
  BarrierKind kind = BarrierKind::p_eps;
  BarrierParams params;
  std::function<double(Vec, double)> value;      // (x, t); static kinds ignore t
  std::function<double(Vec, double)> companion;  // p for q_eps, drifted variant for z_long
  VerifyReport report;
  bool verified = false;
  std::shared_ptr<const BarrierContext> ctx;
};

// Expanding-bump supersolution pair p/q for the extremal operator near the
// origin. Throws SideConditionViolated unless sqrt(eps)*R < r <= r0 and
// R >= 2 sqrt(2n)/sqrt(b0 theta0). value = q, companion = p, params.tau is
// the blocking horizon log(r/(R sqrt(eps)))/k with k = b0/2.
BarrierCandidate barrier_q(const BumpProfile& prof, const ProblemSpec& spec,
                           double eps, double R, double r);

// Smoothed potential: Shepard average of (1-mu)V at kernel width rho, with
// (mu, rho) grid-searched until sampled H(x, Dv) <= -eta < 0 off B_r, <= 1 on
// B_r, and sup|v - V| < r. A failed search returns the best candidate with
// verified = false instead of throwing.
BarrierCandidate smooth_potential(const PotentialField& V, double r,
                                  const ProblemSpec& spec,
                                  const FrozenHamiltonian& ham, const Grid& grid);

// Exit-blocking field w with H(x, -Dw) >= eta > 0 inside the domain and
// 0 < w < m: a boundary-seeded shortest-path potential for the reversed drift
// with running cost eta, searched over eta. Throws MarginViolated when
// m <= min boundary potential. params.rho_minus/rho_plus are min/max of w.
BarrierCandidate make_w_m(const PotentialField& V, double m, const ProblemSpec& spec,
                          const FrozenHamiltonian& ham, const Grid& grid);

// Short-horizon supersolution z(x,t) = exp((v(x)-m+2r)/eps) + d_eps t built on
// a v_smooth candidate, with d_eps = (2/eps) exp((-m+4r)/eps). The profile may
// be flattened above the level m (slope reduction in value space) when the
// plain exponential fails the sampled residual; the report notes the choice.
// Throws MarginViolated when m >= M - 3r.
BarrierCandidate barrier_w_short(const BarrierCandidate& v_smooth, double m,
                                 double r, double eps, double C1 = 1.0);

// Long-horizon subsolution z(x) = -exp((v-m+2r)/eps) + exp(-w_m/eps)
// - exp(-rho_minus/eps). Verified as a static subsolution against diffusion
// fields >= the frozen one, plus sign checks. companion(x,t) adds the drifted
// term (gamma t/4) exp(-rho_plus/eps) with gamma from the measured slack (the
// additive comparison constant is left to the caller). Throws MarginViolated
// when m <= M; the 5r headroom above the w_m range is a report line.
BarrierCandidate barrier_z_long(const BarrierCandidate& v_smooth,
                                const BarrierCandidate& w_m, double m, double r,
                                double eps);

// Per-sample CSV (line, sample, value, bound, pass) + one verdict row.
void write_report_csv(const std::string& path, const BarrierCandidate& cand);

}  // namespace metastab
