#include "metastab/parabolic.hpp"

#include <Eigen/Sparse>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "metastab/errors.hpp"

namespace metastab {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Implicit Euler stepper over the in-domain nodes. The matrix pattern is
// fixed at construction; values are re-assembled (and the LU refreshed) only
// when the step size or the lagged coefficients actually change.
class Stepper {
 public:
  Stepper(const ProblemSpec& spec, const Grid& g, double eps)
      : spec_(spec), g_(g), eps_(eps), n_(g.n) {
    row_of_.assign(g.size(), -1);
    for (int f = 0; f < g.size(); ++f)
      if (g.in_domain(f)) {
        row_of_[f] = static_cast<int>(node_of_.size());
        node_of_.push_back(f);
      }
    const int rows = static_cast<int>(node_of_.size());

    // crossing lookup: (node, axis, dir) -> index
    std::vector<int> cross(static_cast<size_t>(g.size()) * 4, -1);
    for (size_t k = 0; k < g.crossings.size(); ++k) {
      const BoundaryCrossing& c = g.crossings[k];
      cross[c.node * 4 + c.axis * 2 + (c.dir > 0)] = static_cast<int>(k);
    }

    xs_.resize(rows);
    bvec_.resize(rows);
    sides_.resize(static_cast<size_t>(rows) * 4);
    corner_.assign(static_cast<size_t>(rows) * 4, -1);
    for (int r = 0; r < rows; ++r) {
      int f = node_of_[r];
      int i, j;
      g.unflat(f, i, j);
      xs_[r] = g.coord(f);
      bvec_[r] = spec.drift.b(xs_[r]);
      for (int d = 0; d < n_; ++d) {
        for (int s = -1; s <= 1; s += 2) {
          Side& sd = sides_[r * 4 + d * 2 + (s > 0)];
          int ii = i + (d == 0 ? s : 0), jj = j + (d == 1 ? s : 0);
          bool inside = ii >= 0 && ii < g.dims[0] && jj >= 0 && jj < g.dims[1] &&
                        g.in_domain(g.flat(ii, jj));
          if (inside) {
            sd.nbr = row_of_[g.flat(ii, jj)];
            sd.dist = g.h;
          } else {
            int ci = cross[f * 4 + d * 2 + (s > 0)];
            if (ci < 0)
              throw error(errc::config_error, "missing wall crossing at a node edge");
            sd.dist = g.crossings[ci].frac * g.h;
            sd.wall = spec.boundary.g(g.crossings[ci].x);
          }
        }
      }
      if (n_ == 2) {
        int q = 0;
        for (int s2 = -1; s2 <= 1; s2 += 2)
          for (int s1 = -1; s1 <= 1; s1 += 2, ++q) {
            int ii = i + s1, jj = j + s2;
            if (ii >= 0 && ii < g.dims[0] && jj >= 0 && jj < g.dims[1] &&
                g.in_domain(g.flat(ii, jj)))
              corner_[r * 4 + q] = row_of_[g.flat(ii, jj)];
          }
      }
    }

    // fixed sparsity: diagonal, axis neighbors, and (2D) both diagonals
    std::vector<Eigen::Triplet<double>> pat;
    for (int r = 0; r < rows; ++r) {
      pat.emplace_back(r, r, 1.0);
      for (int q = 0; q < 2 * n_; ++q)
        if (sides_[r * 4 + q].nbr >= 0) pat.emplace_back(r, sides_[r * 4 + q].nbr, 1.0);
      if (n_ == 2)
        for (int q = 0; q < 4; ++q)
          if (corner_[r * 4 + q] >= 0) pat.emplace_back(r, corner_[r * 4 + q], 1.0);
    }
    M_.resize(rows, rows);
    M_.setFromTriplets(pat.begin(), pat.end());
    M_.makeCompressed();
    lu_.analyzePattern(M_);
    arow_.resize(rows);
    rhs_const_.resize(rows);
  }

  int rows() const { return static_cast<int>(node_of_.size()); }
  int node(int r) const { return node_of_[r]; }
  Vec x(int r) const { return xs_[r]; }

  // lag the coefficient at the given field (or at time t for frozen runs)
  void set_coefficients(const std::vector<double>& u, double t,
                        const MatrixField* frozen) {
    bool changed = !have_coeffs_;
    for (int r = 0; r < rows(); ++r) {
      SymMat a = frozen ? (*frozen)(xs_[r], t)
                        : spec_.diffusion.a(xs_[r], u[node_of_[r]]);
      if (!changed &&
          (a.a11 != arow_[r].a11 || a.a12 != arow_[r].a12 || a.a22 != arow_[r].a22))
        changed = true;
      arow_[r] = a;
    }
    have_coeffs_ = true;
    dirty_ = dirty_ || changed;
  }

  double coefficient_gap(const std::vector<double>& u) const {
    double m = 0;
    for (int r = 0; r < rows(); ++r) {
      SymMat a = spec_.diffusion.a(xs_[r], u[node_of_[r]]);
      m = std::max(m, spectral_norm(a - arow_[r], n_));
    }
    return m;
  }

  std::vector<double> solve(const std::vector<double>& u_old, double dt) {
    if (dt != dt_) {
      dt_ = dt;
      dirty_ = true;
    }
    if (dirty_) assemble();

    Eigen::VectorXd rhs(rows());
    for (int r = 0; r < rows(); ++r)
      rhs[r] = u_old[node_of_[r]] / dt_ + rhs_const_[r];
    Eigen::VectorXd sol = lu_.solve(rhs);
    if (lu_.info() != Eigen::Success)
      throw error(errc::linear_solve_failed, "sparse LU solve failed");
    // refinement with an extended-precision residual: at large steps the
    // amplification ||M^-1|| ~ dt turns plain double roundoff into a visible
    // (fake) maximum-principle overshoot near far horizons
    {
      std::vector<long double> acc(rows(), 0.0L);
      for (int c = 0; c < M_.outerSize(); ++c)
        for (Eigen::SparseMatrix<double>::InnerIterator it(M_, c); it; ++it)
          acc[it.row()] += static_cast<long double>(it.value()) * sol[c];
      Eigen::VectorXd res(rows());
      for (int r = 0; r < rows(); ++r)
        res[r] = static_cast<double>(static_cast<long double>(rhs[r]) - acc[r]);
      sol += lu_.solve(res);
    }
    double rel = (M_ * sol - rhs).lpNorm<Eigen::Infinity>() /
                 (rhs.lpNorm<Eigen::Infinity>() + 1e-300);
    if (!(rel <= 1e-10))
      throw error(errc::linear_solve_failed,
                  "linear system residual " + std::to_string(rel));

    std::vector<double> out(g_.size(), kNaN);
    for (int r = 0; r < rows(); ++r) out[node_of_[r]] = sol[r];
    return out;
  }

 private:
  struct Side {
    int nbr = -1;      // row of the in-domain neighbor, or -1 for a wall
    double dist = 0;   // h, or frac*h to the wall
    double wall = 0;   // Dirichlet value at the crossing point
  };

  void assemble() {
    const double h = g_.h, tolz = 1e-14;
    for (Eigen::Index k = 0; k < M_.nonZeros(); ++k) M_.valuePtr()[k] = 0;
    auto add = [&](int r, int c, double v) { M_.coeffRef(r, c) += v; };

    for (int r = 0; r < rows(); ++r) {
      const SymMat& A = arow_[r];
      double off = n_ == 2 ? A.a12 : 0.0;
      if (std::abs(off) <= tolz * (std::abs(A.a11) + std::abs(A.a22))) off = 0.0;
      if (off != 0.0 && std::abs(off) > std::min(A.a11, A.a22))
        throw error(errc::non_monotone_stencil,
                    "cross coefficient exceeds the diagonal ones");
      // wall-adjacent rows drop the cross pair and keep the diagonal part:
      // the truncation loss sits in an O(h) collar where the data pins u
      bool use_cross = off != 0.0;
      int ra = -1, rb = -1;
      if (use_cross) {
        ra = corner_[r * 4 + (off > 0 ? 0 : 1)];
        rb = corner_[r * 4 + (off > 0 ? 3 : 2)];
        if (ra < 0 || rb < 0) use_cross = false;
      }
      double rc = 0;
      add(r, r, 1.0 / dt_);

      for (int d = 0; d < n_; ++d) {
        const Side& lo = sides_[r * 4 + d * 2 + 0];
        const Side& hi = sides_[r * 4 + d * 2 + 1];
        double add_dd = (d == 0 ? A.a11 : A.a22) - (use_cross ? std::abs(off) : 0.0);
        double hl = lo.dist, hr = hi.dist;
        // one-sided second difference; reduces to the uniform one for hl = hr
        double cl = eps_ * add_dd * 2.0 / (hl * (hl + hr));
        double ch = eps_ * add_dd * 2.0 / (hr * (hl + hr));
        add(r, r, cl + ch);
        if (lo.nbr >= 0) add(r, lo.nbr, -cl); else rc += cl * lo.wall;
        if (hi.nbr >= 0) add(r, hi.nbr, -ch); else rc += ch * hi.wall;

        // upwind drift onto the inflow side
        double bd = bvec_[r][d];
        if (bd > 0) {
          double c = bd / hr;
          add(r, r, c);
          if (hi.nbr >= 0) add(r, hi.nbr, -c); else rc += c * hi.wall;
        } else if (bd < 0) {
          double c = -bd / hl;
          add(r, r, c);
          if (lo.nbr >= 0) add(r, lo.nbr, -c); else rc += c * lo.wall;
        }
      }

      if (use_cross) {
        // corner order: (-,-) (+,-) (-,+) (+,+)
        double c = eps_ * std::abs(off) / (h * h);
        add(r, r, 2 * c);
        add(r, ra, -c);
        add(r, rb, -c);
      }
      rhs_const_[r] = rc;
    }

    lu_.factorize(M_);
    if (lu_.info() != Eigen::Success)
      throw error(errc::linear_solve_failed, "sparse LU factorization failed");
    dirty_ = false;
  }

  const ProblemSpec& spec_;
  const Grid& g_;
  double eps_;
  int n_;
  std::vector<int> row_of_, node_of_;
  std::vector<Vec> xs_, bvec_;
  std::vector<Side> sides_;
  std::vector<int> corner_;
  std::vector<SymMat> arow_;
  std::vector<double> rhs_const_;
  Eigen::SparseMatrix<double> M_;
  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu_;
  double dt_ = -1;
  bool dirty_ = true, have_coeffs_ = false;
};

std::vector<double> advance(Stepper& st, const std::vector<double>& u, double dt,
                            double t_new, const MatrixField* frozen,
                            double picard_tol) {
  st.set_coefficients(u, t_new, frozen);
  std::vector<double> u1 = st.solve(u, dt);
  if (!frozen && picard_tol >= 0 && st.coefficient_gap(u1) > picard_tol) {
    st.set_coefficients(u1, t_new, nullptr);
    u1 = st.solve(u, dt);
  }
  return u1;
}

void boundary_range(const ProblemSpec& spec, const Grid& grid, double& lo,
                    double& hi) {
  lo = spec.boundary.g_min;
  hi = spec.boundary.g_max;
  if (std::isnan(lo) || std::isnan(hi)) {
    ProblemSpec tmp = spec;
    compute_boundary_levels(tmp, grid);
    lo = tmp.boundary.g_min;
    hi = tmp.boundary.g_max;
  }
}

// Largest geometric step that keeps the implicit solve's roundoff
// amplification below the range-certificate slack.  The assembled rows carry
// O(kappa * eps_mach) perturbation with kappa ~ eps*tr(a)/h^2 + |b|/h, and the
// inverse amplifies it by up to dt, so we hold kappa*dt under a fixed budget
// (1e7 keeps the observed overshoot near 2e-10 against the 1e-9 slack).
double geometric_step_cap(const ProblemSpec& spec, const Grid& grid,
                          double eps) {
  double glo, ghi;
  boundary_range(spec, grid, glo, ghi);
  const double cs[3] = {glo, 0.5 * (glo + ghi), ghi};
  double kappa = 0;
  for (int f = 0; f < grid.size(); ++f) {
    if (!grid.in_domain(f)) continue;
    Vec x = grid.coord(f);
    Vec b = spec.drift.b(x);
    double bn = 0;
    for (int d = 0; d < grid.n; ++d) bn += std::abs(b[d]);
    for (double c : cs) {
      SymMat a = spec.diffusion.a(x, c);
      double tr = grid.n == 1 ? a.a11 : a.a11 + a.a22;
      kappa = std::max(kappa, 2.0 * eps * tr / (grid.h * grid.h) + bn / grid.h);
    }
  }
  return kappa > 0 ? std::max(grid.h, 1e7 / kappa) : 1e30;
}

}  // namespace

TimeGrid TimeGrid::make(double dt0, double horizon, std::vector<double> snaps,
                        int n0, double gamma, double dt_max) {
  if (!(dt0 > 0) || n0 < 1) throw error(errc::config_error, "bad uniform phase");
  if (!(gamma > 0) || gamma > 0.2)
    throw error(errc::config_error, "geometric growth rate outside (0, 0.2]");
  if (!std::isfinite(horizon) || horizon <= 0)
    throw error(errc::config_error, "horizon must be positive and finite");

  std::sort(snaps.begin(), snaps.end());
  double t_end = horizon;
  if (!snaps.empty()) t_end = std::max(t_end, snaps.back());

  TimeGrid tg;
  tg.horizon = t_end;
  tg.dt0 = dt0;
  tg.gamma = gamma;
  tg.t.push_back(0.0);
  int k = 0;
  double t = 0;
  while (t < t_end) {
    t = k < n0 ? (++k) * dt0 : t + std::min(gamma * t, dt_max);
    tg.t.push_back(std::min(t, t_end));
    if (tg.t.back() == t_end) break;
  }

  // splice the requested times in exactly, dropping near-coincident points
  for (double s : snaps) {
    if (!(s > 0)) throw error(errc::config_error, "snapshot time must be positive");
    auto it = std::lower_bound(tg.t.begin(), tg.t.end(), s);
    double tol = 1e-12 * std::max(1.0, s);
    if (it != tg.t.end() && std::abs(*it - s) <= tol)
      *it = s;
    else if (it != tg.t.begin() && std::abs(*(it - 1) - s) <= tol)
      *(it - 1) = s;
    else
      tg.t.insert(it, s);
  }
  for (double s : snaps) {
    size_t idx = std::lower_bound(tg.t.begin(), tg.t.end(), s) - tg.t.begin();
    double tol = 1e-12 * std::max(1.0, s);
    if (idx < tg.t.size() && std::abs(tg.t[idx] - s) <= tol) {
    } else if (idx > 0 && std::abs(tg.t[idx - 1] - s) <= tol) {
      --idx;
    } else {
      throw error(errc::config_error, "snapshot time lost while building the grid");
    }
    tg.snap_index.push_back(static_cast<int>(idx));
  }
  for (size_t i = 1; i < tg.t.size(); ++i)
    if (!(tg.t[i] > tg.t[i - 1]))
      throw error(errc::config_error, "time grid is not strictly increasing");
  return tg;
}

std::vector<double> step(const ProblemSpec& spec, const Grid& grid,
                         const std::vector<double>& u, double eps, double dt,
                         double t_new, const MatrixField* frozen_a,
                         double picard_tol) {
  if (!(dt > 0)) throw error(errc::config_error, "step size must be positive");
  Stepper st(spec, grid, eps);
  return advance(st, u, dt, t_new, frozen_a, picard_tol);
}

EvolutionTrace evolve(const ProblemSpec& spec, const Grid& grid, double eps,
                      double lambda_max, const TimeGrid& tgrid,
                      const MatrixField* frozen_a) {
  if (!std::isfinite(std::exp(lambda_max / eps)))
    throw error(errc::horizon_overflow, "exp(lambda/eps) overflows");

  EvolutionTrace tr;
  tr.eps = eps;
  tr.times = tgrid.t;
  for (int k : tgrid.snap_index) tr.snap_times.push_back(tgrid.t[k]);

  std::vector<double> u(grid.size(), kNaN);
  for (int f = 0; f < grid.size(); ++f)
    if (grid.in_domain(f)) u[f] = spec.boundary.g(grid.coord(f));

  Stepper st(spec, grid, eps);
  double lo = kNaN, hi = kNaN;
  auto scan = [&](const std::vector<double>& v) {
    for (int f = 0; f < grid.size(); ++f)
      if (grid.in_domain(f)) {
        if (!(v[f] >= lo)) lo = std::isnan(lo) ? v[f] : std::min(lo, v[f]);
        if (!(v[f] <= hi)) hi = std::isnan(hi) ? v[f] : std::max(hi, v[f]);
      }
  };
  scan(u);
  tr.origin.push_back(u[grid.origin]);

  size_t next_snap = 0;
  std::vector<int> snaps = tgrid.snap_index;
  std::sort(snaps.begin(), snaps.end());
  for (size_t k = 1; k < tgrid.t.size(); ++k) {
    double dt = tgrid.t[k] - tgrid.t[k - 1];
    std::vector<double> u_new = advance(st, u, dt, tgrid.t[k], frozen_a, 1e-8);
    scan(u_new);
    tr.origin.push_back(u_new[grid.origin]);
    while (next_snap < snaps.size() && snaps[next_snap] == static_cast<int>(k)) {
      tr.snapshots.push_back(u_new);
      tr.snapshots_prev.push_back(u);
      tr.snap_dt.push_back(dt);
      ++next_snap;
    }
    u = std::move(u_new);
  }
  tr.run_min = lo;
  tr.run_max = hi;

  double gmin, gmax;
  boundary_range(spec, grid, gmin, gmax);
  tr.max_principle = lo >= gmin - 1e-9 && hi <= gmax + 1e-9;
  return tr;
}

EvolutionTrace evolve(const ProblemSpec& spec, const Grid& grid, double eps,
                      const std::vector<double>& lambdas,
                      const MatrixField* frozen_a) {
  if (lambdas.empty()) throw error(errc::config_error, "no horizons requested");
  double lmax = *std::max_element(lambdas.begin(), lambdas.end());
  if (lmax / eps > 709.0)
    throw error(errc::horizon_overflow, "exp(lambda/eps) overflows");
  std::vector<double> snaps;
  for (double l : lambdas) snaps.push_back(std::exp(l / eps));
  TimeGrid tg = TimeGrid::make(grid.h, std::exp(lmax / eps), snaps, 200, 0.05,
                               geometric_step_cap(spec, grid, eps));
  return evolve(spec, grid, eps, lmax, tg, frozen_a);
}

double pucci_plus(const SymMat& X, int n, double theta0) {
  double lo, hi;
  eigenvalues(X, n, lo, hi);
  double out = 0;
  for (double l : {lo, hi}) {
    out += l > 0 ? l / theta0 : theta0 * l;
    if (n == 1) break;
  }
  return out;
}

namespace {

ResidualReport run_residual(const SpaceTimeField& w,
                            const std::function<double(Vec, double, const SymMat&)>& D,
                            const DriftField& drift, double eps,
                            const std::vector<SamplePoint>& samples, double tol_res,
                            int n, FDSteps fd) {
  const double ulp = std::numeric_limits<double>::epsilon();
  double d1 = std::max(fd.h_min, std::sqrt(ulp) * fd.len);
  double d2 = std::max(fd.h_min, std::pow(ulp, 0.25) * fd.len);

  ResidualReport rep;
  rep.tol = tol_res;
  rep.r.reserve(samples.size());
  for (const SamplePoint& s : samples) {
    double wt = (w(s.x, s.t + d1) - w(s.x, s.t - d1)) / (2 * d1);
    Vec grad;
    SymMat H = SymMat::diag(0, 0);
    double w0 = w(s.x, s.t);
    for (int d = 0; d < n; ++d) {
      Vec e;
      e[d] = 1.0;
      grad[d] = (w(s.x + d1 * e, s.t) - w(s.x - d1 * e, s.t)) / (2 * d1);
      double sec = (w(s.x + d2 * e, s.t) - 2 * w0 + w(s.x - d2 * e, s.t)) / (d2 * d2);
      if (d == 0) H.a11 = sec; else H.a22 = sec;
    }
    if (n == 2) {
      Vec ex{d2, 0}, ey{0, d2};
      H.a12 = (w(s.x + ex + ey, s.t) - w(s.x + ex - ey, s.t) -
               w(s.x - ex + ey, s.t) + w(s.x - ex - ey, s.t)) /
              (4 * d2 * d2);
    } else {
      H.a22 = 0;
    }
    double r = wt - eps * D(s.x, s.t, H) - dot(drift.b(s.x), grad);
    rep.r.push_back(r);
  }
  rep.min_r = std::numeric_limits<double>::infinity();
  for (size_t i = 0; i < rep.r.size(); ++i) {
    rep.max_abs = std::max(rep.max_abs, std::abs(rep.r[i]));
    if (rep.r[i] < rep.min_r) {
      rep.min_r = rep.r[i];
      rep.argmin = static_cast<int>(i);
    }
    if (rep.r[i] < -tol_res) ++rep.violations;
  }
  if (rep.r.empty()) rep.min_r = 0;
  rep.pass = rep.violations == 0;
  return rep;
}

}  // namespace

ResidualReport residual(const SpaceTimeField& w, const MatrixField& a,
                        const DriftField& drift, double eps,
                        const std::vector<SamplePoint>& samples, double tol_res,
                        int n, FDSteps fd) {
  auto D = [&a, n](Vec x, double t, const SymMat& H) {
    SymMat A = a(x, t);
    return n == 1 ? A.a11 * H.a11
                  : A.a11 * H.a11 + 2 * A.a12 * H.a12 + A.a22 * H.a22;
  };
  return run_residual(w, D, drift, eps, samples, tol_res, n, fd);
}

ResidualReport residual_pucci(const SpaceTimeField& w, double theta0,
                              const DriftField& drift, double eps,
                              const std::vector<SamplePoint>& samples,
                              double tol_res, int n, FDSteps fd) {
  auto D = [theta0, n](Vec, double, const SymMat& H) {
    return pucci_plus(H, n, theta0);
  };
  return run_residual(w, D, drift, eps, samples, tol_res, n, fd);
}

ResidualReport residual_trace(const ProblemSpec& spec, const Grid& grid,
                              const EvolutionTrace& trace, double eps,
                              double tol_res) {
  ResidualReport rep;
  rep.tol = tol_res;
  const double h = grid.h, h2 = h * h;
  for (size_t k = 0; k < trace.snapshots.size(); ++k) {
    const std::vector<double>& u = trace.snapshots[k];
    const std::vector<double>& up = trace.snapshots_prev[k];
    double dt = trace.snap_dt[k];
    for (int f = 0; f < grid.size(); ++f) {
      if (grid.cls[f] != NodeClass::interior) continue;
      int i, j;
      grid.unflat(f, i, j);
      Vec x = grid.coord(f);
      SymMat A = spec.diffusion.a(x, u[f]);
      double uE = u[grid.flat(i + 1, j)], uW = u[grid.flat(i - 1, j)];
      double diff = A.a11 * (uE - 2 * u[f] + uW) / h2;
      Vec b = spec.drift.b(x);
      double adv = b[0] * (b[0] > 0 ? uE - u[f] : u[f] - uW) / h;
      if (grid.n == 2) {
        double uN = u[grid.flat(i, j + 1)], uS = u[grid.flat(i, j - 1)];
        diff += A.a22 * (uN - 2 * u[f] + uS) / h2;
        adv += b[1] * (b[1] > 0 ? uN - u[f] : u[f] - uS) / h;
        if (std::abs(A.a12) > 1e-14 * (A.a11 + A.a22)) {
          int s = A.a12 > 0 ? 1 : -1;
          int fa = grid.flat(i + 1, j + s), fb = grid.flat(i - 1, j - s);
          if (!grid.in_domain(fa) || !grid.in_domain(fb)) continue;
          diff += std::abs(A.a12) *
                  (u[fa] + u[fb] - 2 * u[f] - (uE - 2 * u[f] + uW) -
                   (uN - 2 * u[f] + uS)) /
                  h2;
        }
      }
      rep.r.push_back((u[f] - up[f]) / dt - eps * diff - adv);
    }
  }
  rep.min_r = std::numeric_limits<double>::infinity();
  for (size_t i = 0; i < rep.r.size(); ++i) {
    rep.max_abs = std::max(rep.max_abs, std::abs(rep.r[i]));
    if (rep.r[i] < rep.min_r) {
      rep.min_r = rep.r[i];
      rep.argmin = static_cast<int>(i);
    }
    if (rep.r[i] < -tol_res) ++rep.violations;
  }
  if (rep.r.empty()) rep.min_r = 0;
  rep.pass = rep.violations == 0;
  return rep;
}

ConstancyReport constancy_metric(const Grid& grid, const EvolutionTrace& trace,
                                 double delta) {
  std::vector<int> nodes = shrink(grid, delta);
  if (nodes.empty())
    throw error(errc::delta_too_large, "the shrunk region contains no nodes");
  ConstancyReport rep;
  rep.delta = delta;
  rep.times = trace.snap_times;
  for (const auto& u : trace.snapshots) {
    double u0 = u[grid.origin], s = 0;
    for (int f : nodes) s = std::max(s, std::abs(u[f] - u0));
    rep.s.push_back(s);
  }
  for (size_t k = 0; k < rep.s.size(); ++k)
    if (rep.s[k] < delta) {
      rep.first_time = rep.times[k];
      break;
    }
  return rep;
}

void save_checkpoint(const std::string& path, const std::vector<double>& u,
                     double t) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw error(errc::config_error, "cannot open checkpoint for writing");
  const char magic[8] = {'M', 'S', 'T', 'B', 'C', 'K', '0', '1'};
  std::uint64_t count = u.size();
  out.write(magic, 8);
  out.write(reinterpret_cast<const char*>(&count), 8);
  out.write(reinterpret_cast<const char*>(&t), 8);
  out.write(reinterpret_cast<const char*>(u.data()),
            static_cast<std::streamsize>(count * 8));
  if (!out) throw error(errc::config_error, "checkpoint write failed");
}

bool load_checkpoint(const std::string& path, std::vector<double>& u, double& t) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return false;
  char magic[8];
  std::uint64_t count = 0;
  in.read(magic, 8);
  if (!in || std::memcmp(magic, "MSTBCK01", 8) != 0) return false;
  in.read(reinterpret_cast<char*>(&count), 8);
  in.read(reinterpret_cast<char*>(&t), 8);
  if (!in || count > (1u << 28)) return false;
  u.assign(count, 0.0);
  in.read(reinterpret_cast<char*>(u.data()), static_cast<std::streamsize>(count * 8));
  return static_cast<bool>(in);
}

}  // namespace metastab
