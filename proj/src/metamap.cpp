#include "metastab/metamap.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <thread>

namespace metastab {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Lipschitz rate of every level potential: max |b| / theta0
double field_max_rate(const ProblemSpec& spec, const Grid& g) {
  double bmax = 0;
  for (int f = 0; f < g.size(); ++f)
    if (g.in_domain(f)) bmax = std::max(bmax, norm(spec.drift.b(g.coord(f))));
  return bmax / std::max(spec.diffusion.theta0, 1e-12);
}

// modulus of the boundary data over sample pairs closer than dist
double g_modulus(const ProblemSpec& spec, const Grid& g, double dist) {
  double worst = 0;
  size_t n = g.samples.size();
  for (size_t i = 0; i < n; ++i) {
    double gi = spec.boundary.g(g.samples[i].x);
    for (size_t j = i + 1; j < n; ++j) {
      if (norm(g.samples[i].x - g.samples[j].x) > dist) continue;
      worst = std::max(worst, std::abs(gi - spec.boundary.g(g.samples[j].x)));
    }
  }
  return worst;
}

template <class Get>
double pl_interp(const MetastabilityMap& map, double c, Get&& get) {
  const auto& cs = map.cgrid;
  if (c <= cs.front()) return get(map.records.front());
  if (c >= cs.back()) return get(map.records.back());
  size_t k = static_cast<size_t>(std::upper_bound(cs.begin(), cs.end(), c) - cs.begin());
  double t = (c - cs[k - 1]) / (cs[k] - cs[k - 1]);
  return (1 - t) * get(map.records[k - 1]) + t * get(map.records[k]);
}

int index_of(const std::vector<double>& cs, double c) {
  int best = 0;
  for (size_t k = 1; k < cs.size(); ++k)
    if (std::abs(cs[k] - c) < std::abs(cs[best] - c)) best = static_cast<int>(k);
  return best;
}

struct LevelContext {
  const ProblemSpec& spec;
  const Grid& grid;
  double tau = 0;
  int stencil = 1;
};

std::vector<LevelRecord> solve_levels(const LevelContext& ctx, const std::vector<double>& cs,
                                      int jobs) {
  std::vector<LevelRecord> out(cs.size());
  auto work = [&](size_t i) {
    out[i] = level_record(ctx.spec, ctx.grid, cs[i], ctx.tau, ctx.stencil);
  };
  if (jobs <= 1 || cs.size() < 2) {
    for (size_t i = 0; i < cs.size(); ++i) work(i);
    return out;
  }
  // records are independent; index-ordered assembly keeps the result
  // identical to the sequential one
  std::atomic<size_t> next{0};
  auto run = [&] {
    for (size_t i; (i = next.fetch_add(1)) < cs.size();) work(i);
  };
  std::vector<std::thread> pool;
  int nt = std::min(jobs, static_cast<int>(cs.size()));
  for (int t = 0; t < nt; ++t) pool.emplace_back(run);
  for (auto& th : pool) th.join();
  return out;
}

}  // namespace

LevelRecord level_record(const ProblemSpec& spec, const Grid& grid, double c,
                         double tau_arg, int stencil) {
  FrozenHamiltonian ham = freeze(spec, c);
  PotentialField p = solve_dijkstra(ham, grid, stencil);

  LevelRecord rec;
  rec.c = c;
  rec.M = kInf;
  for (double bv : p.boundary_v)
    if (std::isfinite(bv)) rec.M = std::min(rec.M, bv);
  if (!std::isfinite(rec.M))
    throw error(errc::config_error, "no boundary sample is reachable from the origin");

  for (size_t k = 0; k < grid.samples.size(); ++k) {
    if (!(p.boundary_v[k] <= rec.M + tau_arg)) continue;
    rec.argmin.push_back(static_cast<int>(k));
    rec.argmin_x.push_back(grid.samples[k].x);
    rec.gvals.push_back(spec.boundary.g(grid.samples[k].x));
  }
  rec.g_lo = *std::min_element(rec.gvals.begin(), rec.gvals.end());
  rec.g_hi = *std::max_element(rec.gvals.begin(), rec.gvals.end());
  return rec;
}

SingletonReport check_singleton(const MetastabilityMap& map) {
  SingletonReport rep;
  const LevelRecord& r = map.records[map.ic0];
  rep.gap = r.g_hi - r.g_lo;
  rep.tol = map.rho_g;
  rep.pass = rep.gap <= map.rho_g;
  return rep;
}

double compute_c1(const ProblemSpec& spec, const Grid& grid, MetastabilityMap& map,
                  const MapOptions& opt) {
  double c1;
  if (map.g0 >= map.c0 - map.rho_g) {
    // smallest level >= c0 where the lowest argmin data value meets the diagonal
    int hit = -1;
    for (size_t k = static_cast<size_t>(map.ic0); k < map.cgrid.size(); ++k)
      if (map.records[k].g_lo <= map.cgrid[k] + map.rho_g) {
        hit = static_cast<int>(k);
        break;
      }
    if (hit < 0) {
      c1 = map.g2;
    } else if (hit == map.ic0) {
      c1 = map.c0;
    } else {
      double lo = map.cgrid[hit - 1], hi = map.cgrid[hit];  // lo fails, hi passes
      for (int it = 0; it < opt.bisect_iters; ++it) {
        double mid = 0.5 * (lo + hi);
        LevelRecord r = level_record(spec, grid, mid, map.tau_arg, opt.stencil);
        (r.g_lo <= mid + map.rho_g ? hi : lo) = mid;
      }
      c1 = hi;
    }
  } else {
    // largest level <= c0 where the highest argmin data value meets the diagonal
    int hit = -1;
    for (int k = map.ic0; k >= 0; --k)
      if (map.records[k].g_hi >= map.cgrid[k] - map.rho_g) {
        hit = k;
        break;
      }
    if (hit < 0) {
      c1 = map.g1;
    } else if (hit == map.ic0) {
      c1 = map.c0;
    } else {
      double lo = map.cgrid[hit], hi = map.cgrid[hit + 1];  // lo passes, hi fails
      for (int it = 0; it < opt.bisect_iters; ++it) {
        double mid = 0.5 * (lo + hi);
        LevelRecord r = level_record(spec, grid, mid, map.tau_arg, opt.stencil);
        (r.g_hi >= mid - map.rho_g ? lo : hi) = mid;
      }
      c1 = lo;
    }
  }
  map.c1 = c1;
  return c1;
}

CrossingReport check_crossing(const MetastabilityMap& map, const std::vector<double>& deltas) {
  CrossingReport rep;
  rep.deltas = deltas;
  double eps = 1e-12 * std::max({1.0, std::abs(map.g_min), std::abs(map.g_max)});
  bool inc = map.c0 <= map.c1 + eps && map.c1 < map.g_max - eps;
  bool dec = map.c0 >= map.c1 - eps && map.c1 > map.g_min + eps;
  rep.vacuous = !inc && !dec;
  if (rep.vacuous) {
    rep.branch = "vacuous";
    rep.note = "crossing guards fail: c1 sits at the applicable end of the level range";
    return rep;
  }
  rep.branch = inc && dec ? "both" : inc ? "increasing" : "decreasing";

  double best = kInf;
  for (double d : deltas) {
    bool applicable = false, ok = true;
    if (inc && map.c1 + d <= map.g_max + eps) {
      applicable = true;
      double gh = pl_interp(map, map.c1 + d, [](const LevelRecord& r) { return r.g_hi; });
      ok = ok && gh < map.c1 + d;
    }
    if (dec && map.c1 - d >= map.g_min - eps) {
      applicable = true;
      double gl = pl_interp(map, map.c1 - d, [](const LevelRecord& r) { return r.g_lo; });
      ok = ok && gl > map.c1 - d;
    }
    rep.ok.push_back(!applicable ? -1 : ok ? 1 : 0);
    if (applicable && ok) best = std::min(best, d);
  }
  rep.pass = std::isfinite(best);
  rep.delta = rep.pass ? best : 0.0;
  if (!rep.pass)
    rep.note = "argmin data values stay on the wrong side of the diagonal near c1 (" +
               rep.branch + " branch)";
  return rep;
}

double cbar(const MetastabilityMap& map, double lambda) {
  double Mc0 = map.records[map.ic0].M;
  double eps = 1e-12 * std::max(1.0, std::abs(map.c0));
  if (lambda < Mc0 || std::abs(map.c1 - map.c0) <= eps) return map.c0;

  auto getM = [](const LevelRecord& r) { return r.M; };
  if (map.c1 > map.c0) {
    // leftmost crossing of the tabulated M with lambda on [c0, c1]
    for (size_t k = static_cast<size_t>(map.ic0);
         k + 1 < map.cgrid.size() && map.cgrid[k] < map.c1; ++k) {
      double cl = map.cgrid[k];
      double cr = std::min(map.cgrid[k + 1], map.c1);
      double Ml = map.records[k].M;
      double Mr = cr < map.cgrid[k + 1] ? pl_interp(map, cr, getM) : map.records[k + 1].M;
      if ((Ml - lambda) * (Mr - lambda) > 0) continue;
      double root = Ml == Mr ? cl : cl + (lambda - Ml) / (Mr - Ml) * (cr - cl);
      return std::min(map.c1, clamp(root, cl, cr));
    }
    return map.c1;
  }
  // rightmost crossing on [c1, c0], scanning down from c0
  for (size_t k = static_cast<size_t>(map.ic0); k > 0 && map.cgrid[k] > map.c1; --k) {
    double cr = map.cgrid[k];
    double cl = std::max(map.cgrid[k - 1], map.c1);
    double Mr = map.records[k].M;
    double Ml = cl > map.cgrid[k - 1] ? pl_interp(map, cl, getM) : map.records[k - 1].M;
    if ((Ml - lambda) * (Mr - lambda) > 0) continue;
    double root = Ml == Mr ? cr : cl + (lambda - Ml) / (Mr - Ml) * (cr - cl);
    return std::max(map.c1, clamp(root, cl, cr));
  }
  return map.c1;
}

std::vector<double> jump_set(const MetastabilityMap& map, const std::vector<double>& lambdas) {
  std::vector<double> cb(lambdas.size());
  for (size_t i = 0; i < lambdas.size(); ++i) cb[i] = cbar(map, lambdas[i]);
  std::vector<double> out;
  for (size_t i = 0; i < lambdas.size(); ++i) {
    bool left = i > 0 && std::abs(cb[i] - cb[i - 1]) > map.rho_jump;
    bool right = i + 1 < lambdas.size() && std::abs(cb[i + 1] - cb[i]) > map.rho_jump;
    if (left || right) out.push_back(lambdas[i]);
  }
  return out;
}

MetastabilityMap build_map(const ProblemSpec& spec, const Grid& grid, MapOptions opt) {
  ProblemSpec local = spec;
  compute_boundary_levels(local, grid);

  MetastabilityMap map;
  map.g_min = local.boundary.g_min;
  map.g_max = local.boundary.g_max;
  map.g1 = local.boundary.g1;
  map.g2 = local.boundary.g2;
  map.c0 = local.boundary.c0;

  double rate = field_max_rate(local, grid);
  map.tau_arg = opt.tau_arg > 0 ? opt.tau_arg
                                : std::max(2 * opt.err_est, 10 * grid.h * rate);
  map.tau_arg = std::max(map.tau_arg, 1e-15);
  map.rho_g = std::max(g_modulus(local, grid, map.tau_arg / std::max(rate, 1e-12)),
                       1e-12 * (1 + std::abs(map.g1) + std::abs(map.g2)));

  double w = map.g_max - map.g_min;
  double scale = std::max({1.0, std::abs(map.g_min), std::abs(map.g_max)});
  double spacing = w > 1e-14 * scale ? w / (opt.levels - 1) : 1.0;

  std::vector<double> cs;
  if (w <= 1e-14 * scale) {
    cs = {map.c0};
  } else {
    for (int k = 0; k < opt.levels; ++k) cs.push_back(map.g_min + w * k / (opt.levels - 1));
    bool dup = false;
    for (double c : cs) dup = dup || std::abs(c - map.c0) <= 1e-12 * scale;
    if (!dup) cs.insert(std::upper_bound(cs.begin(), cs.end(), map.c0), map.c0);
  }

  LevelContext ctx{local, grid, map.tau_arg, opt.stencil};
  map.cgrid = cs;
  map.records = solve_levels(ctx, cs, opt.jobs);
  map.ic0 = index_of(map.cgrid, map.c0);

  map.singleton = check_singleton(map);
  map.g0 = map.records[map.ic0].g_hi;

  double provisional = compute_c1(local, grid, map, opt);

  if (w > 1e-14 * scale && opt.refine > 1) {
    std::vector<double> extra;
    for (double center : {map.c0, provisional}) {
      for (int m = -opt.refine; m <= opt.refine; ++m) {
        double c = clamp(center + spacing * m / opt.refine, map.g_min, map.g_max);
        bool dup = false;
        for (double x : map.cgrid) dup = dup || std::abs(x - c) <= 1e-12 * scale;
        for (double x : extra) dup = dup || std::abs(x - c) <= 1e-12 * scale;
        if (!dup) extra.push_back(c);
      }
    }
    if (!extra.empty()) {
      std::sort(extra.begin(), extra.end());
      auto recs = solve_levels(ctx, extra, opt.jobs);
      std::vector<double> cg;
      std::vector<LevelRecord> rs;
      size_t a = 0, b = 0;
      while (a < map.cgrid.size() || b < extra.size()) {
        if (b == extra.size() || (a < map.cgrid.size() && map.cgrid[a] <= extra[b])) {
          cg.push_back(map.cgrid[a]);
          rs.push_back(std::move(map.records[a]));
          ++a;
        } else {
          cg.push_back(extra[b]);
          rs.push_back(std::move(recs[b]));
          ++b;
        }
      }
      map.cgrid = std::move(cg);
      map.records = std::move(rs);
      map.ic0 = index_of(map.cgrid, map.c0);
    }
  }

  compute_c1(local, grid, map, opt);

  std::vector<double> deltas;
  for (int j = 0; j <= 8; ++j) deltas.push_back(spacing / (1 << j));
  map.crossing = check_crossing(map, deltas);

  map.rho_jump = opt.rho_jump > 0 ? opt.rho_jump : 5 * spacing;

  // the sup/inf crossing rules pick a deliberate side when M wiggles; flag it
  double lo = std::min(map.c0, map.c1), hi = std::max(map.c0, map.c1);
  double tolM = 1e-12 * (1 + std::abs(map.records[map.ic0].M));
  int dir = 0;
  for (size_t k = 0; k + 1 < map.cgrid.size(); ++k) {
    if (map.cgrid[k] < lo - 1e-12 * scale || map.cgrid[k + 1] > hi + 1e-12 * scale) continue;
    double d = map.records[k + 1].M - map.records[k].M;
    if (std::abs(d) <= tolM) continue;
    int s = d > 0 ? 1 : -1;
    if (dir != 0 && s != dir) map.m_nonmonotone = true;
    dir = s;
  }
  return map;
}

}  // namespace metastab
