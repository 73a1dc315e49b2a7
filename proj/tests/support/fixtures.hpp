#pragma once

#include <algorithm>
#include <cmath>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ecogrid/ecogrid.hpp"

namespace ecogrid::fixtures {

inline std::string data_path(const std::string& name) { return std::string(ECOGRID_DATA_DIR) + "/" + name; }

inline Bus bus(BusId id, double p_load_mw = 0.0, double q_load_mvar = 0.0, double base = 100.0) {
  Bus b;
  b.id = id;
  b.p_load = p_load_mw / base;
  b.q_load = q_load_mvar / base;
  return b;
}

inline Generator gen(int id, BusId at, double p_min_mw, double p_max_mw, double p_set_mw = 0.0,
                     double base = 100.0) {
  Generator g;
  g.id = id;
  g.bus = at;
  g.p_min = p_min_mw / base;
  g.p_max = p_max_mw / base;
  g.p_set = p_set_mw / base;
  return g;
}

/// One generator at bus 1 serving `load_mw` at bus 2 over a single branch.
inline Network two_bus(double r = 0.0, double x = 0.1, double load_mw = 100.0, double q_load_mvar = 0.0,
                       double s_max_mva = kUnlimited) {
  return Network("two_bus", 100.0, {bus(1), bus(2, load_mw, q_load_mvar)},
                 {make_branch(1, 2, r, x, s_max_mva / 100.0)}, {gen(1, 1, 0.0, 1000.0, load_mw)}, 1);
}

/// Triangle 1-2-3 with equal reactances, a single unit at bus 1 and `load_mw` at bus 3.
inline Network three_bus_ring(double load_mw = 90.0, double x = 0.1) {
  return Network("ring3", 100.0, {bus(1), bus(2), bus(3, load_mw)},
                 {make_branch(1, 2, 0.0, x, kUnlimited), make_branch(2, 3, 0.0, x, kUnlimited),
                  make_branch(1, 3, 0.0, x, kUnlimited)},
                 {gen(1, 1, 0.0, 1000.0, load_mw)}, 1);
}

struct RandomNetworkOptions {
  int min_buses = 3;
  int max_buses = 20;
  int generators = 0;  // 0 = random 1..min(4, n)
  double extra_edge_fraction = 0.5;
  double r_over_x = 0.1;
  bool limits = false;  // random finite branch ratings
  int candidates = 0;
};

/// Connected random network: a random spanning tree plus extra edges. Loads and
/// capacities are sized so that proportional dispatch is always within bounds.
inline Network random_network(std::mt19937_64& rng, const RandomNetworkOptions& o = {}) {
  std::uniform_int_distribution<int> nbus(o.min_buses, o.max_buses);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const int n = nbus(rng);
  std::vector<Bus> buses;
  for (int i = 1; i <= n; ++i) buses.push_back(bus(i, u(rng) < 0.7 ? 10.0 + 90.0 * u(rng) : 0.0));
  double load = 0.0;
  for (const auto& b : buses) load += b.p_load * 100.0;
  if (load == 0.0) {
    buses.back().p_load = 0.5;
    load = 50.0;
  }

  std::vector<Branch> branches;
  auto edge = [&](int a, int b, BranchStatus st) {
    const double x = 0.05 + 0.45 * u(rng);
    const double rating = o.limits ? (0.3 + 1.2 * u(rng)) * load / 100.0 : kUnlimited;
    branches.push_back(make_branch(a, b, o.r_over_x * x, x, rating, st));
  };
  for (int i = 2; i <= n; ++i) edge(std::uniform_int_distribution<int>(1, i - 1)(rng), i, BranchStatus::existing);
  const int extra = static_cast<int>(o.extra_edge_fraction * n);
  std::uniform_int_distribution<int> pick(1, n);
  for (int e = 0; e < extra; ++e) {
    int a = pick(rng), b = pick(rng);
    if (a != b) edge(a, b, BranchStatus::existing);
  }
  for (int c = 0; c < o.candidates; ++c) {
    int a = pick(rng), b = pick(rng);
    while (a == b) b = pick(rng);
    edge(a, b, BranchStatus::candidate);
  }

  const int ng = o.generators > 0 ? std::min(o.generators, n)
                                  : std::uniform_int_distribution<int>(1, std::min(4, n))(rng);
  std::vector<int> sites(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) sites[static_cast<std::size_t>(i)] = i + 1;
  std::shuffle(sites.begin(), sites.end(), rng);
  std::vector<Generator> gens;
  double cap = 0.0;
  for (int g = 0; g < ng; ++g) {
    const double p_max = (0.6 + u(rng)) * load;
    gens.push_back(gen(g + 1, sites[static_cast<std::size_t>(g)], 0.0, p_max));
    cap += p_max;
  }
  for (auto& g : gens) g.p_set = g.p_max * load / cap;
  return Network("random", 100.0, std::move(buses), std::move(branches), std::move(gens));
}

inline std::vector<double> setpoints_mw(const Network& net) {
  std::vector<double> p;
  for (const auto& g : net.generators()) p.push_back(g.p_set * net.base_mva());
  return p;
}

/// Random nonnegative matrix with roughly `density` nonzero entries.
inline Eigen::MatrixXd random_matrix(std::mt19937_64& rng, int n, double density = 0.4) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::lognormal_distribution<double> mag(0.0, 2.0);
  Eigen::MatrixXd t = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (u(rng) < density) t(i, j) = mag(rng);
  if (t.sum() == 0.0) t(0, n > 1 ? 1 : 0) = 1.0;
  return t;
}

/// Random flow matrix shaped like a network EFM: input feeds actors, actors
/// exchange flow and feed export/dissipation.
inline Eigen::MatrixXd random_efm(std::mt19937_64& rng, int actors) {
  const int n = actors + 3;
  Eigen::MatrixXd t = random_matrix(rng, n, 0.35);
  t.row(0).setZero();
  t.col(0).setZero();
  t.bottomRows(2).setZero();
  std::uniform_int_distribution<int> a(1, actors);
  t(0, a(rng)) += 1.0 + t.sum();
  t(a(rng), n - 2) += 1.0;
  return t;
}

// Net injection minus the sum of branch flows leaving each energized bus (per-unit).
inline double dc_balance_residual(const Network& net, const DcSolution& sol) {
  std::vector<double> r(net.buses().size(), 0.0);
  for (std::size_t g = 0; g < net.generators().size(); ++g)
    r[net.bus_index(net.generators()[g].bus)] += sol.p_gen[g];
  for (std::size_t b = 0; b < net.buses().size(); ++b) r[b] -= sol.p_load[b];
  for (std::size_t k = 0; k < net.branches().size(); ++k) {
    const auto& br = net.branches()[k];
    r[net.bus_index(br.from_bus)] -= sol.p_flow[k];
    r[net.bus_index(br.to_bus)] += sol.p_flow[k];
  }
  double worst = 0.0;
  for (double v : r) worst = std::max(worst, std::abs(v));
  return worst / net.base_mva();
}

// Injections implied by the polar branch equations at the solved voltages.
inline double ac_equation_residual(const Network& net, const AcSolution& sol) {
  const auto nb = net.buses().size();
  std::vector<double> p(nb, 0.0), q(nb, 0.0);
  for (std::size_t g = 0; g < net.generators().size(); ++g) {
    p[net.bus_index(net.generators()[g].bus)] += sol.p_gen[g];
    q[net.bus_index(net.generators()[g].bus)] += sol.q_gen[g];
  }
  for (std::size_t b = 0; b < nb; ++b) {
    p[b] -= net.buses()[b].p_load;
    q[b] -= net.buses()[b].q_load;
  }
  double worst = 0.0;
  for (std::size_t k = 0; k < net.branches().size(); ++k) {
    const auto& br = net.branches()[k];
    if (br.is_candidate()) continue;
    const auto i = net.bus_index(br.from_bus), j = net.bus_index(br.to_bus);
    const auto fwd = branch_flow(br.conductance_g, br.susceptance_b, sol.v_mag[i], sol.v_mag[j],
                                 sol.v_ang[i] - sol.v_ang[j]);
    const auto rev = branch_flow(br.conductance_g, br.susceptance_b, sol.v_mag[j], sol.v_mag[i],
                                 sol.v_ang[j] - sol.v_ang[i]);
    worst = std::max({worst, std::abs(fwd.p - sol.p_flow[k]), std::abs(fwd.q - sol.q_flow[k]),
                      std::abs(rev.p - sol.p_flow_to[k]), std::abs(rev.q - sol.q_flow_to[k])});
    p[i] -= fwd.p;
    q[i] -= fwd.q;
    p[j] -= rev.p;
    q[j] -= rev.q;
  }
  for (std::size_t b = 0; b < nb; ++b) worst = std::max({worst, std::abs(p[b]), std::abs(q[b])});
  return worst;
}


struct GridOptimum {
  double r = -1.0;  // -1 when no grid point is feasible
  std::vector<double> p_gen;
  int feasible_points = 0;
};

/// Brute-force R maximization over a uniform dispatch grid with at most two
/// free units (the remaining unit closes the balance). Each point is checked
/// with the plain DC solve and limit check, independent of the optimizer's
/// flow model.
inline GridOptimum grid_search(const Network& net, int points = 10000) {
  const auto gens = net.generators();
  const double base = net.base_mva();
  const double load = net.total_load() * base;
  std::vector<double> lo, hi;
  for (const auto& g : gens) {
    lo.push_back(std::max(0.0, g.p_min) * base);
    hi.push_back(g.p_max * base);
  }
  GridOptimum best;
  auto consider = [&](std::vector<double> p) {
    const std::size_t last = p.size() - 1;
    double rest = load;
    for (std::size_t k = 0; k < last; ++k) rest -= p[k];
    if (rest < lo[last] - 1e-9 || rest > hi[last] + 1e-9) return;
    p[last] = std::clamp(rest, lo[last], hi[last]);
    try {
      const auto sol = solve_dc(net, p);
      if (sol.any_islanded() || !check_limits(net, sol).empty()) return;
      const double r = robustness(build_ecoflow_matrix(net, to_operating_point(net, sol))).r;
      ++best.feasible_points;
      if (r > best.r) {
        best.r = r;
        best.p_gen = p;
      }
    } catch (const Error&) {
    }
  };
  if (gens.size() == 1) {
    consider({load});
  } else if (gens.size() == 2) {
    const double a = std::max(lo[0], load - hi[1]), b = std::min(hi[0], load - lo[1]);
    for (int i = 0; i < points; ++i) consider({a + (b - a) * i / (points - 1), 0.0});
  } else if (gens.size() == 3) {
    // Rows over unit 0, each spanning the balance-feasible range of unit 1.
    const int side = static_cast<int>(std::lround(std::sqrt(points)));
    const double a = std::max(lo[0], load - hi[1] - hi[2]), b = std::min(hi[0], load - lo[1] - lo[2]);
    for (int i = 0; i < side; ++i) {
      const double p0 = a + (b - a) * i / (side - 1);
      const double c = std::max(lo[1], load - p0 - hi[2]), d = std::min(hi[1], load - p0 - lo[2]);
      for (int j = 0; j < side; ++j) consider({p0, c + (d - c) * j / (side - 1), 0.0});
    }
  }
  return best;
}

}  // namespace ecogrid::fixtures
