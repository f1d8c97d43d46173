#include "metastab/quasipotential.hpp"

#include <array>
#include <cmath>
#include <limits>
#include <numeric>
#include <queue>

namespace metastab {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double cost_at_midpoint(const FrozenHamiltonian& ham, Vec m, Vec v, Vec x, Vec y,
                        bool* fallback) {
  SymMat A = inverse(ham.alpha(m));
  Vec bm = ham.b(m);
  if (norm2(bm) == 0.0) {
    // no drift to fight at the midpoint: charge the anisotropic length against
    // the strongest drift nearby so no spurious zero-cost channel opens
    if (fallback) *fallback = true;
    double kappa = std::max(norm(ham.b(x)), norm(ham.b(y)));
    return 0.25 * std::sqrt(quadform(A, v)) * kappa;
  }
  double vav = quadform(A, v);
  double bab = quadform(A, bm);
  double vab = dot(v, matvec(A, bm));
  return std::max(0.5 * (std::sqrt(vav * bab) - vab), 0.0);
}

// In-domain values at the two nearest nodes along the inward normal,
// extrapolated linearly to each boundary sample.
std::vector<double> extrapolate_boundary(const Grid& g, const DomainSpec& dom,
                                         const std::vector<double>& v) {
  std::vector<double> out(g.samples.size(), kInf);
  for (size_t s = 0; s < g.samples.size(); ++s) {
    int f = g.samples[s].owner;
    double vf = v[f];
    if (!std::isfinite(vf)) continue;
    Vec nu = outward_normal(dom, g.samples[s].x);
    int i, j;
    g.unflat(f, i, j);
    int d = (g.n > 1 && std::abs(nu[1]) > std::abs(nu[0])) ? 1 : 0;
    int step = nu[d] > 0 ? -1 : 1;
    int ii = i + (d == 0 ? step : 0), jj = j + (d == 1 ? step : 0);
    double value = vf;  // zeroth-order fallback if no inner node exists
    if (ii >= 0 && ii < g.dims[0] && jj >= 0 && jj < g.dims[1]) {
      int fi = g.flat(ii, jj);
      if (g.in_domain(fi) && std::isfinite(v[fi])) {
        Vec xo = g.coord(f);
        double t_in = dot(g.coord(fi) - xo, nu);  // < 0: inner node lies inward
        double slope = (vf - v[fi]) / (-t_in);
        value = vf + slope * dot(g.samples[s].x - xo, nu);
      }
    }
    out[s] = std::max(value, 0.0);
  }
  return out;
}

std::vector<std::array<int, 2>> stencil_moves(int n, int k) {
  std::vector<std::array<int, 2>> moves;
  if (n == 1) {
    moves = {{{1, 0}}, {{-1, 0}}};
    return moves;
  }
  for (int di = -k; di <= k; ++di) {
    for (int dj = -k; dj <= k; ++dj) {
      if (di == 0 && dj == 0) continue;
      if (k == 1 && std::abs(di) + std::abs(dj) > 1) continue;
      if (std::gcd(std::abs(di), std::abs(dj)) != 1) continue;
      moves.push_back({di, dj});
    }
  }
  return moves;
}

}  // namespace

FrozenHamiltonian freeze(const ProblemSpec& spec, double c) {
  FrozenHamiltonian h;
  h.domain = spec.domain;
  auto a = spec.diffusion.a;
  h.alpha = [a, c](Vec x) { return a(x, c); };
  h.b = spec.drift.b;
  h.theta = spec.diffusion.theta0;
  return h;
}

double edge_cost(const FrozenHamiltonian& ham, Vec x, Vec y, bool* fallback) {
  Vec m = 0.5 * (x + y);
  if (signed_distance(ham.domain, m) > 1e-9 * diameter(ham.domain))
    throw error(errc::outside_domain, "segment midpoint outside the closed domain");
  return cost_at_midpoint(ham, m, y - x, x, y, fallback);
}

PotentialField solve_dijkstra(const FrozenHamiltonian& ham, const Grid& g, int stencil) {
  PotentialField out;
  out.method = "dijkstra";
  out.v.assign(g.size(), kInf);
  out.v[g.origin] = 0.0;

  auto moves = stencil_moves(g.n, stencil);
  // analytic shapes are convex: segment midpoints cannot leave the closure
  bool check_mid = g.domain.shape == Shape::implicit;

  using Item = std::pair<double, int>;
  std::priority_queue<Item, std::vector<Item>, std::greater<Item>> pq;
  pq.push({0.0, g.origin});
  while (!pq.empty()) {
    auto [d, u] = pq.top();
    pq.pop();
    if (d > out.v[u]) continue;
    ++out.iterations;
    int i, j;
    g.unflat(u, i, j);
    Vec xu = g.coord(u);
    for (const auto& mv : moves) {
      int ii = i + mv[0], jj = j + mv[1];
      if (ii < 0 || ii >= g.dims[0] || jj < 0 || jj >= g.dims[1]) continue;
      int w = g.flat(ii, jj);
      if (!g.in_domain(w)) continue;
      Vec xw = g.coord(w);
      Vec mid = 0.5 * (xu + xw);
      if (check_mid && signed_distance(g.domain, mid) > 0) continue;
      bool fb = false;
      double c = cost_at_midpoint(ham, mid, xw - xu, xu, xw, &fb);
      if (fb) out.fallback_edges = true;
      double nd = d + c;
      if (nd < out.v[w]) {
        out.v[w] = nd;
        pq.push({nd, w});
      }
    }
  }

  for (int f = 0; f < g.size(); ++f)
    if (g.in_domain(f) && !std::isfinite(out.v[f])) out.unreachable.push_back(f);
  out.boundary_v = extrapolate_boundary(g, ham.domain, out.v);
  return out;
}

PotentialField solve_sweeping(const FrozenHamiltonian& ham, const Grid& g, SweepConfig cfg) {
  PotentialField out;
  out.method = "sweeping";

  int total = g.size();
  std::vector<SymMat> A(total);
  std::vector<Vec> bb(total);
  double bmax = 0, amax = 0, thmin = kInf;
  for (int f = 0; f < total; ++f) {
    if (!g.in_domain(f)) continue;
    Vec x = g.coord(f);
    A[f] = ham.alpha(x);
    bb[f] = ham.b(x);
    bmax = std::max(bmax, norm(bb[f]));
    double lo, hi;
    eigenvalues(A[f], g.n, lo, hi);
    amax = std::max(amax, hi);
    thmin = std::min(thmin, lo);
  }
  double lambda = bmax / std::max(thmin, 1e-12);
  double sigma_glob = std::max(1.1 * (2 * amax * lambda + bmax), 1e-9 * (amax + 1));
  double h = g.h;

  out.v.assign(total, kInf);
  double init = 4.0 * lambda * diameter(ham.domain);
  for (int f = 0; f < total; ++f)
    if (g.in_domain(f)) out.v[f] = init;
  out.v[g.origin] = 0.0;

  auto& u = out.v;
  int orders = g.n == 1 ? 2 : 4;
  std::vector<double> cycle_updates;

  auto update_node = [&](int i, int j) -> double {
    int f = g.flat(i, j);
    if (!g.in_domain(f) || f == g.origin) return 0.0;
    Vec pbar;
    double mean[2] = {0, 0};
    bool present[2] = {false, false};
    for (int d = 0; d < g.n; ++d) {
      int ipm[2][2] = {{i + (d == 0), j + (d == 1)}, {i - (d == 0), j - (d == 1)}};
      double up = kInf, um = kInf;
      if (ipm[0][0] < g.dims[0] && ipm[0][1] < g.dims[1]) {
        int fp = g.flat(ipm[0][0], ipm[0][1]);
        if (g.in_domain(fp)) up = u[fp];
      }
      if (ipm[1][0] >= 0 && ipm[1][1] >= 0) {
        int fm = g.flat(ipm[1][0], ipm[1][1]);
        if (g.in_domain(fm)) um = u[fm];
      }
      bool have_p = std::isfinite(up), have_m = std::isfinite(um);
      if (have_p && have_m) {
        pbar[d] = (up - um) / (2 * h);
        mean[d] = 0.5 * (up + um);
        present[d] = true;
      } else if (have_m) {
        // ghost value 2u - um: one-sided interior difference, mean collapses to u
        pbar[d] = (u[f] - um) / h;
        mean[d] = u[f];
        present[d] = true;
      } else if (have_p) {
        pbar[d] = (up - u[f]) / h;
        mean[d] = u[f];
        present[d] = true;
      }
    }
    if (!present[0] && !present[1]) return 0.0;
    double H = quadform(A[f], pbar) + dot(bb[f], pbar);
    // per-axis viscosity: dominate |dH/dp_d| = |2 (A pbar)_d + b_d| at the
    // current iterate, with a small global floor so the weights never vanish
    Vec q = matvec(A[f], pbar);
    double num = 0, den = 0;
    for (int d = 0; d < g.n; ++d) {
      if (!present[d]) continue;
      double sd = cfg.sigma > 0 ? cfg.sigma
                                : 1.2 * std::abs(2 * q[d] + bb[f][d]) + 0.01 * sigma_glob;
      num += sd * mean[d];
      den += sd;
    }
    double unew = std::max((-H * h + num) / den, 0.0);
    double change = std::abs(unew - u[f]);
    u[f] = unew;
    return change;
  };

  for (int sweep = 0; sweep < cfg.max_sweeps; ++sweep) {
    int sx = (sweep % 2 == 0) ? 1 : -1;
    int sy = ((sweep / 2) % 2 == 0) ? 1 : -1;
    double maxchange = 0;
    for (int jj = 0; jj < g.dims[1]; ++jj) {
      int j = sy > 0 ? jj : g.dims[1] - 1 - jj;
      for (int ii = 0; ii < g.dims[0]; ++ii) {
        int i = sx > 0 ? ii : g.dims[0] - 1 - ii;
        maxchange = std::max(maxchange, update_node(i, j));
      }
    }
    out.iterations = sweep + 1;
    cycle_updates.push_back(maxchange);
    if (static_cast<int>(cycle_updates.size()) >= orders) {
      double cyc = 0;
      for (int q = 0; q < orders; ++q) cyc = std::max(cyc, cycle_updates[cycle_updates.size() - 1 - q]);
      out.residual = cyc;
      if (cyc < cfg.tol) {
        out.converged = true;
        out.boundary_v = extrapolate_boundary(g, ham.domain, u);
        return out;
      }
    }
  }
  out.converged = false;
  if (!cycle_updates.empty()) out.residual = cycle_updates.back();
  out.boundary_v = extrapolate_boundary(g, ham.domain, u);
  return out;
}

double theta_of_delta(const ProblemSpec& spec, double beta0, double delta, const Grid& grid) {
  const int nc = 33;
  double worst = 0;
  for (int f = 0; f < grid.size(); ++f) {
    if (!grid.in_domain(f)) continue;
    Vec x = grid.coord(f);
    SymMat a0 = spec.diffusion.a(x, beta0);
    for (int k = 0; k < nc; ++k) {
      double c = beta0 - delta + 2 * delta * k / (nc - 1);
      worst = std::max(worst, spectral_norm(spec.diffusion.a(x, c) - a0, grid.n));
    }
  }
  return worst;
}

std::pair<FrozenHamiltonian, FrozenHamiltonian> perturbed_family(const ProblemSpec& spec,
                                                                 double beta0, double delta,
                                                                 const Grid& grid) {
  double th = theta_of_delta(spec, beta0, delta, grid);
  double theta0 = spec.diffusion.theta0;
  if (th > theta0 / 2)
    throw error(errc::delta_too_large, "level modulus " + std::to_string(th) +
                                           " exceeds theta0/2 = " + std::to_string(theta0 / 2));

  DomainSpec dom = spec.domain;
  auto a = spec.diffusion.a;
  int n = grid.n;
  auto iso = [n](double v) { return n == 1 ? SymMat::scalar(v) : SymMat::diag(v, v); };
  auto chi = [dom, delta](Vec x) {
    return clamp((-signed_distance(dom, x) - delta / 2) / (delta / 2), 0.0, 1.0);
  };

  FrozenHamiltonian plus, minus;
  plus.domain = minus.domain = dom;
  plus.b = minus.b = spec.drift.b;
  plus.alpha = [a, beta0, th, n, iso, chi, theta0](Vec x) {
    return lerp(iso(1.0 / theta0), shift_diag(a(x, beta0), th, n), chi(x));
  };
  minus.alpha = [a, beta0, th, n, iso, chi, theta0](Vec x) {
    return lerp(iso(theta0), shift_diag(a(x, beta0), -th, n), chi(x));
  };

  // measured ellipticity bounds of the blended fields
  for (FrozenHamiltonian* fh : {&plus, &minus}) {
    double lo_all = kInf, hi_all = 0;
    for (int f = 0; f < grid.size(); ++f) {
      if (!grid.in_domain(f)) continue;
      double lo, hi;
      eigenvalues(fh->alpha(grid.coord(f)), n, lo, hi);
      lo_all = std::min(lo_all, lo);
      hi_all = std::max(hi_all, hi);
    }
    fh->theta = std::min(lo_all, 1.0 / hi_all);
  }
  return {plus, minus};
}

}  // namespace metastab
