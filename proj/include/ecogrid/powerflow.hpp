#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ecogrid/eco_metrics.hpp"
#include "ecogrid/error.hpp"
#include "ecogrid/grid_model.hpp"

namespace ecogrid {

// ---- DC model ---------------------------------------------------------------

struct DcOptions {
  /// Let the slack bus pick up any generation/load mismatch instead of
  /// rejecting an unbalanced dispatch.
  bool slack_absorbs_imbalance = false;
  double balance_tol_pu = 1e-6;
  std::optional<BusId> slack;                // overrides the network's slack bus
  std::vector<std::size_t> outaged;          // branch indices treated as open
};

struct DcSolution {
  std::vector<double> theta;   // rad, per bus (0 on islanded buses)
  std::vector<double> p_flow;  // MW, per branch (0 on candidate / outaged / de-energized)
  std::vector<double> p_gen;   // MW, per generator after slack pickup; islanded units are 0
  std::vector<double> p_load;  // MW served per bus; islanded buses are 0
  BusId slack_bus = 0;
  std::vector<bool> islanded;  // per bus
  double slack_pickup_mw = 0.0;

  bool any_islanded() const { return std::find(islanded.begin(), islanded.end(), true) != islanded.end(); }
};

namespace detail {

struct ReducedSystem {
  std::vector<int> comp;
  int slack_comp = 0;
  std::size_t slack_index = 0;
  std::vector<Eigen::Index> position;  // bus -> row in reduced B', -1 if slack or islanded
  Eigen::MatrixXd b_reduced;
};

inline bool branch_in_service(const Network& net, std::size_t k, std::span<const std::size_t> outaged) {
  return !net.branches()[k].is_candidate() &&
         std::find(outaged.begin(), outaged.end(), k) == outaged.end();
}

inline ReducedSystem reduce(const Network& net, BusId slack, std::span<const std::size_t> outaged) {
  ReducedSystem sys;
  sys.comp = net.components_excluding(outaged);
  sys.slack_index = net.bus_index(slack);
  sys.slack_comp = sys.comp[sys.slack_index];
  const auto nb = net.buses().size();
  sys.position.assign(nb, -1);
  Eigen::Index m = 0;
  for (std::size_t i = 0; i < nb; ++i)
    if (i != sys.slack_index && sys.comp[i] == sys.slack_comp) sys.position[i] = m++;
  sys.b_reduced = Eigen::MatrixXd::Zero(m, m);
  for (std::size_t k = 0; k < net.branches().size(); ++k) {
    if (!branch_in_service(net, k, outaged)) continue;
    const auto& br = net.branches()[k];
    const auto f = net.bus_index(br.from_bus), t = net.bus_index(br.to_bus);
    if (sys.comp[f] != sys.slack_comp) continue;
    const double b = 1.0 / br.reactance;
    const auto pf = sys.position[f], pt = sys.position[t];
    if (pf >= 0) sys.b_reduced(pf, pf) += b;
    if (pt >= 0) sys.b_reduced(pt, pt) += b;
    if (pf >= 0 && pt >= 0) {
      sys.b_reduced(pf, pt) -= b;
      sys.b_reduced(pt, pf) -= b;
    }
  }
  return sys;
}

}  // namespace detail

/// Solves B' theta = P with the slack angle fixed at 0. Buses outside the
/// slack bus's component are flagged islanded and excluded.
inline DcSolution solve_dc(const Network& net, std::span<const double> p_gen_mw, const DcOptions& opt = {}) {
  const auto nb = net.buses().size();
  const auto gens = net.generators();
  if (p_gen_mw.size() != gens.size())
    throw Error(ErrorCode::validation, "dispatch has " + std::to_string(p_gen_mw.size()) +
                                           " entries, network has " + std::to_string(gens.size()) +
                                           " generators");
  const double base = net.base_mva();
  const BusId slack = opt.slack.value_or(net.slack_bus());

  auto sys = detail::reduce(net, slack, opt.outaged);
  DcSolution sol;
  sol.slack_bus = slack;
  sol.theta.assign(nb, 0.0);
  sol.p_flow.assign(net.branches().size(), 0.0);
  sol.islanded.assign(nb, false);
  sol.p_load.assign(nb, 0.0);
  sol.p_gen.assign(p_gen_mw.begin(), p_gen_mw.end());

  Eigen::VectorXd inj = Eigen::VectorXd::Zero(sys.b_reduced.rows());
  for (std::size_t i = 0; i < nb; ++i) {
    sol.islanded[i] = sys.comp[i] != sys.slack_comp;
    if (!sol.islanded[i]) sol.p_load[i] = net.buses()[i].p_load * base;
    if (sys.position[i] >= 0) inj(sys.position[i]) -= net.buses()[i].p_load;
  }
  for (std::size_t g = 0; g < gens.size(); ++g) {
    const auto bi = net.bus_index(gens[g].bus);
    if (sol.islanded[bi]) {
      sol.p_gen[g] = 0.0;
      continue;
    }
    if (sys.position[bi] >= 0) inj(sys.position[bi]) += p_gen_mw[g] / base;
  }

  // Balance is checked on the slack component only; islands are dropped.
  if (!opt.slack_absorbs_imbalance) {
    double gen = 0.0, load = 0.0;
    for (std::size_t g = 0; g < gens.size(); ++g) gen += sol.p_gen[g] / base;
    for (double l : sol.p_load) load += l / base;
    if (std::abs(gen - load) > opt.balance_tol_pu)
      throw Error(ErrorCode::validation, "dispatch is not balanced: generation " + std::to_string(gen * base) +
                                             " MW vs load " + std::to_string(load * base) + " MW");
  }

  if (sys.b_reduced.rows() > 0) {
    Eigen::FullPivLU<Eigen::MatrixXd> lu(sys.b_reduced);
    if (!lu.isInvertible())
      throw Error(ErrorCode::singular_matrix,
                  "susceptance matrix is singular on the component containing slack bus " +
                      std::to_string(slack));
    const Eigen::VectorXd theta = lu.solve(inj);
    for (std::size_t i = 0; i < nb; ++i)
      if (sys.position[i] >= 0) sol.theta[i] = theta(sys.position[i]);
  }

  double slack_out = 0.0;
  for (std::size_t k = 0; k < net.branches().size(); ++k) {
    if (!detail::branch_in_service(net, k, opt.outaged)) continue;
    const auto& br = net.branches()[k];
    const auto f = net.bus_index(br.from_bus), t = net.bus_index(br.to_bus);
    if (sol.islanded[f]) continue;
    const double flow = (sol.theta[f] - sol.theta[t]) / br.reactance * base;
    sol.p_flow[k] = flow;
    if (f == sys.slack_index) slack_out += flow;
    if (t == sys.slack_index) slack_out -= flow;
  }

  // Whatever the slack bus must inject beyond its scheduled units.
  double scheduled = -net.buses()[sys.slack_index].p_load * base;
  for (std::size_t g = 0; g < gens.size(); ++g)
    if (net.bus_index(gens[g].bus) == sys.slack_index) scheduled += p_gen_mw[g];
  sol.slack_pickup_mw = slack_out - scheduled;
  for (std::size_t g = 0; g < gens.size(); ++g)
    if (net.bus_index(gens[g].bus) == sys.slack_index) {
      sol.p_gen[g] += sol.slack_pickup_mw;
      break;
    }
  return sol;
}

/// Power transfer distribution factors (MW per MW), one row per branch and one
/// column per bus. Built from an explicit inverse of the reduced B', so it is an
/// independent route to the flows that solve_dc computes.
inline Eigen::MatrixXd ptdf(const Network& net, std::optional<BusId> slack = std::nullopt,
                            std::span<const std::size_t> outaged = {}) {
  const BusId s = slack.value_or(net.slack_bus());
  auto sys = detail::reduce(net, s, outaged);
  const auto nb = static_cast<Eigen::Index>(net.buses().size());
  const auto nl = static_cast<Eigen::Index>(net.branches().size());
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(nl, nb);
  if (sys.b_reduced.rows() == 0) return out;
  Eigen::PartialPivLU<Eigen::MatrixXd> lu(sys.b_reduced);
  const Eigen::MatrixXd x = lu.inverse();
  if (!x.allFinite())
    throw Error(ErrorCode::singular_matrix, "susceptance matrix is singular");
  for (Eigen::Index k = 0; k < nl; ++k) {
    if (!detail::branch_in_service(net, static_cast<std::size_t>(k), outaged)) continue;
    const auto& br = net.branches()[static_cast<std::size_t>(k)];
    const auto pf = sys.position[net.bus_index(br.from_bus)];
    const auto pt = sys.position[net.bus_index(br.to_bus)];
    for (Eigen::Index i = 0; i < nb; ++i) {
      const auto pi = sys.position[static_cast<std::size_t>(i)];
      if (pi < 0) continue;
      double v = 0.0;
      if (pf >= 0) v += x(pf, pi);
      if (pt >= 0) v -= x(pt, pi);
      out(k, i) = v / br.reactance;
    }
  }
  return out;
}

// ---- AC model ---------------------------------------------------------------

struct AcOptions {
  int max_iterations = 50;
  double tolerance = 1e-8;  // per-unit, infinity norm of the power mismatch
};

/// Polar AC solution in per-unit. Branch flows carry both ends.
struct AcSolution {
  std::vector<double> v_mag, v_ang;
  std::vector<double> p_flow, q_flow;        // from-end, per branch
  std::vector<double> p_flow_to, q_flow_to;  // to-end, per branch
  std::vector<double> p_inj, q_inj;          // per bus
  std::vector<double> p_gen, q_gen;          // per generator
  std::vector<double> p_loss;                // per bus, loss formula of compute_losses
  bool converged = false;
  int iterations = 0;
  double mismatch = 0.0;
};

struct BranchPQ {
  double p = 0.0;
  double q = 0.0;
};

/// Sending-end flow with G, B in the admittance off-diagonal convention:
///   P = Vi^2 (-G) + Vi Vj (G cos t + B sin t)
///   Q = Vi^2 B + Vi Vj (G sin t - B cos t)
inline BranchPQ branch_flow(double g, double b, double vi, double vj, double theta_ij) {
  const double c = std::cos(theta_ij), s = std::sin(theta_ij);
  return {vi * vi * (-g) + vi * vj * (g * c + b * s), vi * vi * b + vi * vj * (g * s - b * c)};
}

/// Per-bus loss estimate 1/2 sum_j (P_ij^2 + Q_ij^2) / (B_ij Vi^2), in per-unit.
inline std::vector<double> loss_formula(const Network& net, const AcSolution& sol) {
  std::vector<double> loss(net.buses().size(), 0.0);
  for (std::size_t k = 0; k < net.branches().size(); ++k) {
    const auto& br = net.branches()[k];
    if (br.is_candidate()) continue;
    if (br.susceptance_b == 0.0)
      throw Error(ErrorCode::validation, "branch " + branch_label(br) + " has zero susceptance");
    const auto f = net.bus_index(br.from_bus), t = net.bus_index(br.to_bus);
    const double vf = sol.v_mag[f], vt = sol.v_mag[t];
    loss[f] += 0.5 * (sol.p_flow[k] * sol.p_flow[k] + sol.q_flow[k] * sol.q_flow[k]) /
               (br.susceptance_b * vf * vf);
    loss[t] += 0.5 * (sol.p_flow_to[k] * sol.p_flow_to[k] + sol.q_flow_to[k] * sol.q_flow_to[k]) /
               (br.susceptance_b * vt * vt);
  }
  return loss;
}

/// Newton-Raphson on the polar power-flow equations from a flat start.
/// Generator buses hold `v_setpoints` (falling back to each unit's v_set, then 1.0).
inline AcSolution solve_ac(const Network& net, std::span<const double> p_gen_mw,
                           const std::optional<std::map<BusId, double>>& v_setpoints = std::nullopt,
                           const AcOptions& opt = {}) {
  const auto nb = net.buses().size();
  const auto gens = net.generators();
  if (p_gen_mw.size() != gens.size())
    throw Error(ErrorCode::validation, "dispatch size does not match generator count");
  {
    auto comp = net.components();
    if (*std::max_element(comp.begin(), comp.end()) > 0)
      throw Error(ErrorCode::topology, "AC power flow requires a connected network");
  }
  const double base = net.base_mva();
  const auto slack = net.bus_index(net.slack_bus());

  using Complex = std::complex<double>;
  Eigen::MatrixXcd y = Eigen::MatrixXcd::Zero(static_cast<Eigen::Index>(nb), static_cast<Eigen::Index>(nb));
  for (const auto& br : net.branches()) {
    if (br.is_candidate()) continue;
    const auto f = static_cast<Eigen::Index>(net.bus_index(br.from_bus));
    const auto t = static_cast<Eigen::Index>(net.bus_index(br.to_bus));
    const Complex ys = 1.0 / Complex(br.resistance, br.reactance);
    y(f, f) += ys;
    y(t, t) += ys;
    y(f, t) -= ys;
    y(t, f) -= ys;
  }
  const Eigen::MatrixXd G = y.real(), B = y.imag();

  enum class Kind { pq, pv, ref };
  std::vector<Kind> kind(nb, Kind::pq);
  std::vector<double> p_spec(nb, 0.0), q_spec(nb, 0.0), v(nb, 1.0), th(nb, 0.0);
  for (std::size_t i = 0; i < nb; ++i) {
    p_spec[i] = -net.buses()[i].p_load;
    q_spec[i] = -net.buses()[i].q_load;
  }
  for (std::size_t g = 0; g < gens.size(); ++g) {
    const auto bi = net.bus_index(gens[g].bus);
    p_spec[bi] += p_gen_mw[g] / base;
    kind[bi] = Kind::pv;
    double vs = gens[g].v_set.value_or(1.0);
    if (v_setpoints) {
      auto it = v_setpoints->find(gens[g].bus);
      if (it != v_setpoints->end()) vs = it->second;
    }
    v[bi] = vs;
  }
  kind[slack] = Kind::ref;

  std::vector<std::size_t> ang_idx, mag_idx;  // unknowns
  for (std::size_t i = 0; i < nb; ++i) {
    if (kind[i] != Kind::ref) ang_idx.push_back(i);
    if (kind[i] == Kind::pq) mag_idx.push_back(i);
  }
  const auto na = ang_idx.size(), nm = mag_idx.size();

  std::vector<double> p_calc(nb), q_calc(nb);
  auto injections = [&] {
    for (std::size_t i = 0; i < nb; ++i) {
      double p = 0.0, q = 0.0;
      for (std::size_t j = 0; j < nb; ++j) {
        const auto ii = static_cast<Eigen::Index>(i), jj = static_cast<Eigen::Index>(j);
        if (G(ii, jj) == 0.0 && B(ii, jj) == 0.0) continue;
        const double t = th[i] - th[j];
        p += v[j] * (G(ii, jj) * std::cos(t) + B(ii, jj) * std::sin(t));
        q += v[j] * (G(ii, jj) * std::sin(t) - B(ii, jj) * std::cos(t));
      }
      p_calc[i] = v[i] * p;
      q_calc[i] = v[i] * q;
    }
  };

  AcSolution sol;
  Eigen::VectorXd mis(static_cast<Eigen::Index>(na + nm));
  for (int iter = 0;; ++iter) {
    injections();
    for (std::size_t a = 0; a < na; ++a) mis(static_cast<Eigen::Index>(a)) = p_spec[ang_idx[a]] - p_calc[ang_idx[a]];
    for (std::size_t m = 0; m < nm; ++m)
      mis(static_cast<Eigen::Index>(na + m)) = q_spec[mag_idx[m]] - q_calc[mag_idx[m]];
    sol.mismatch = mis.size() ? mis.lpNorm<Eigen::Infinity>() : 0.0;
    sol.iterations = iter;
    if (!std::isfinite(sol.mismatch)) break;
    if (sol.mismatch <= opt.tolerance) {
      sol.converged = true;
      break;
    }
    if (iter >= opt.max_iterations) break;

    Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(mis.size(), mis.size());
    auto dP_dth = [&](std::size_t i, std::size_t j) {
      const auto ii = static_cast<Eigen::Index>(i), jj = static_cast<Eigen::Index>(j);
      if (i == j) return -q_calc[i] - B(ii, ii) * v[i] * v[i];
      const double t = th[i] - th[j];
      return v[i] * v[j] * (G(ii, jj) * std::sin(t) - B(ii, jj) * std::cos(t));
    };
    auto dP_dv = [&](std::size_t i, std::size_t j) {
      const auto ii = static_cast<Eigen::Index>(i), jj = static_cast<Eigen::Index>(j);
      if (i == j) return p_calc[i] / v[i] + G(ii, ii) * v[i];
      const double t = th[i] - th[j];
      return v[i] * (G(ii, jj) * std::cos(t) + B(ii, jj) * std::sin(t));
    };
    auto dQ_dth = [&](std::size_t i, std::size_t j) {
      const auto ii = static_cast<Eigen::Index>(i), jj = static_cast<Eigen::Index>(j);
      if (i == j) return p_calc[i] - G(ii, ii) * v[i] * v[i];
      const double t = th[i] - th[j];
      return -v[i] * v[j] * (G(ii, jj) * std::cos(t) + B(ii, jj) * std::sin(t));
    };
    auto dQ_dv = [&](std::size_t i, std::size_t j) {
      const auto ii = static_cast<Eigen::Index>(i), jj = static_cast<Eigen::Index>(j);
      if (i == j) return q_calc[i] / v[i] - B(ii, ii) * v[i];
      const double t = th[i] - th[j];
      return v[i] * (G(ii, jj) * std::sin(t) - B(ii, jj) * std::cos(t));
    };
    for (std::size_t r = 0; r < na; ++r) {
      const auto ri = static_cast<Eigen::Index>(r);
      for (std::size_t c = 0; c < na; ++c) jac(ri, static_cast<Eigen::Index>(c)) = dP_dth(ang_idx[r], ang_idx[c]);
      for (std::size_t c = 0; c < nm; ++c)
        jac(ri, static_cast<Eigen::Index>(na + c)) = dP_dv(ang_idx[r], mag_idx[c]);
    }
    for (std::size_t r = 0; r < nm; ++r) {
      const auto ri = static_cast<Eigen::Index>(na + r);
      for (std::size_t c = 0; c < na; ++c) jac(ri, static_cast<Eigen::Index>(c)) = dQ_dth(mag_idx[r], ang_idx[c]);
      for (std::size_t c = 0; c < nm; ++c)
        jac(ri, static_cast<Eigen::Index>(na + c)) = dQ_dv(mag_idx[r], mag_idx[c]);
    }
    const Eigen::VectorXd dx = jac.partialPivLu().solve(mis);
    if (!dx.allFinite()) break;
    for (std::size_t a = 0; a < na; ++a) th[ang_idx[a]] += dx(static_cast<Eigen::Index>(a));
    for (std::size_t m = 0; m < nm; ++m) v[mag_idx[m]] += dx(static_cast<Eigen::Index>(na + m));
  }

  sol.v_mag = v;
  sol.v_ang = th;
  sol.p_inj = p_calc;
  sol.q_inj = q_calc;
  const auto nl = net.branches().size();
  sol.p_flow.assign(nl, 0.0);
  sol.q_flow.assign(nl, 0.0);
  sol.p_flow_to.assign(nl, 0.0);
  sol.q_flow_to.assign(nl, 0.0);
  for (std::size_t k = 0; k < nl; ++k) {
    const auto& br = net.branches()[k];
    if (br.is_candidate()) continue;
    const auto f = net.bus_index(br.from_bus), t = net.bus_index(br.to_bus);
    const auto from = branch_flow(br.conductance_g, br.susceptance_b, v[f], v[t], th[f] - th[t]);
    const auto to = branch_flow(br.conductance_g, br.susceptance_b, v[t], v[f], th[t] - th[f]);
    sol.p_flow[k] = from.p;
    sol.q_flow[k] = from.q;
    sol.p_flow_to[k] = to.p;
    sol.q_flow_to[k] = to.q;
  }

  // Unit outputs: the first unit at the slack bus takes the real-power
  // remainder; reactive output is shared evenly at each generator bus.
  sol.p_gen.resize(gens.size());
  sol.q_gen.assign(gens.size(), 0.0);
  std::vector<int> units_at(nb, 0);
  for (const auto& g : gens) ++units_at[net.bus_index(g.bus)];
  bool slack_taken = false;
  double slack_others = 0.0;
  for (std::size_t g = 0; g < gens.size(); ++g) {
    const auto bi = net.bus_index(gens[g].bus);
    sol.p_gen[g] = p_gen_mw[g] / base;
    sol.q_gen[g] = (q_calc[bi] + net.buses()[bi].q_load) / units_at[bi];
    if (bi == slack && slack_taken) slack_others += sol.p_gen[g];
    if (bi == slack) slack_taken = true;
  }
  for (std::size_t g = 0; g < gens.size(); ++g)
    if (net.bus_index(gens[g].bus) == slack) {
      sol.p_gen[g] = p_calc[slack] + net.buses()[slack].p_load - slack_others;
      break;
    }

  if (sol.converged) {
    sol.p_loss = loss_formula(net, sol);
  } else {
    sol.p_loss.assign(nb, std::numeric_limits<double>::quiet_NaN());
  }
  return sol;
}

struct LossReport {
  std::vector<double> per_bus_formula_mw;  // 1/2 sum (P^2+Q^2)/(B V^2), as used in the design model
  std::vector<double> per_branch_i2r_mw;   // r |I|^2
  double total_formula_mw = 0.0;
  double total_i2r_mw = 0.0;
  double balance_mw = 0.0;  // sum P_gen - sum P_load
};

inline LossReport compute_losses(const AcSolution& sol, const Network& net) {
  if (!sol.converged) throw Error(ErrorCode::infeasible, "loss evaluation needs a converged AC solution");
  const double base = net.base_mva();
  LossReport rep;
  const auto formula = loss_formula(net, sol);
  for (double l : formula) {
    rep.per_bus_formula_mw.push_back(l * base);
    rep.total_formula_mw += l * base;
  }
  rep.per_branch_i2r_mw.assign(net.branches().size(), 0.0);
  for (std::size_t k = 0; k < net.branches().size(); ++k) {
    const auto& br = net.branches()[k];
    if (br.is_candidate()) continue;
    const double vf = sol.v_mag[net.bus_index(br.from_bus)];
    const double i2 = (sol.p_flow[k] * sol.p_flow[k] + sol.q_flow[k] * sol.q_flow[k]) / (vf * vf);
    rep.per_branch_i2r_mw[k] = br.resistance * i2 * base;
    rep.total_i2r_mw += rep.per_branch_i2r_mw[k];
  }
  for (double p : sol.p_gen) rep.balance_mw += p * base;
  for (const auto& b : net.buses()) rep.balance_mw -= b.p_load * base;
  return rep;
}

// ---- Operating points ---------------------------------------------------------

// Case setpoints rescaled so that total generation meets total load.
inline std::vector<double> base_dispatch(const Network& net) {
  std::vector<double> p;
  double total = 0.0;
  for (const auto& g : net.generators()) {
    p.push_back(g.p_set * net.base_mva());
    total += p.back();
  }
  const double load = net.total_load() * net.base_mva();
  if (!(total > 0.0)) throw Error(ErrorCode::infeasible, "case has no generator setpoints to scale to the load");
  for (auto& v : p) v *= load / total;
  return p;
}

inline OperatingPoint to_operating_point(const Network& net, const DcSolution& sol) {
  OperatingPoint op;
  op.p_gen = sol.p_gen;
  op.p_flow = sol.p_flow;
  op.p_load = sol.p_load;
  op.p_loss.assign(net.buses().size(), 0.0);
  op.v_ang = sol.theta;
  return op;
}

/// AC operating point in MW. Each branch enters with the mean of its sending and
/// receiving real power and its I^2 r loss is split evenly between its two end
/// buses, so every actor row of the flow matrix balances exactly.
inline OperatingPoint to_operating_point(const Network& net, const AcSolution& sol) {
  const double base = net.base_mva();
  const auto losses = compute_losses(sol, net);
  OperatingPoint op;
  for (double p : sol.p_gen) op.p_gen.push_back(p * base);
  op.p_flow.assign(net.branches().size(), 0.0);
  op.p_loss.assign(net.buses().size(), 0.0);
  std::vector<double> q(net.branches().size(), 0.0);
  for (std::size_t k = 0; k < net.branches().size(); ++k) {
    const auto& br = net.branches()[k];
    if (br.is_candidate()) continue;
    op.p_flow[k] = 0.5 * (sol.p_flow[k] - sol.p_flow_to[k]) * base;
    q[k] = sol.q_flow[k] * base;
    op.p_loss[net.bus_index(br.from_bus)] += 0.5 * losses.per_branch_i2r_mw[k];
    op.p_loss[net.bus_index(br.to_bus)] += 0.5 * losses.per_branch_i2r_mw[k];
  }
  for (const auto& b : net.buses()) op.p_load.push_back(b.p_load * base);
  op.q_flow = std::move(q);
  op.v_mag = sol.v_mag;
  op.v_ang = sol.v_ang;
  return op;
}

// ---- Limits -----------------------------------------------------------------

struct BranchOverload {
  std::size_t branch = 0;
  double flow = 0.0;   // |P| (DC, MW) or max end |S| (AC, MVA)
  double limit = 0.0;
};

struct VoltageViolation {
  BusId bus = 0;
  double v = 0.0;
  double bound = 0.0;
};

struct GenViolation {
  int gen = 0;
  std::string quantity;  // "p", "q" or "s"
  double value = 0.0;
  double bound = 0.0;
};

struct ViolationSet {
  std::vector<BranchOverload> branch_overloads;
  std::vector<VoltageViolation> voltage_violations;
  std::vector<GenViolation> gen_violations;

  bool empty() const {
    return branch_overloads.empty() && voltage_violations.empty() && gen_violations.empty();
  }
  std::size_t size() const {
    return branch_overloads.size() + voltage_violations.size() + gen_violations.size();
  }
};

namespace detail {
inline bool exceeds(double value, double bound, double tol) {
  return value > bound + tol * std::max(1.0, std::abs(bound));
}
inline bool below(double value, double bound, double tol) {
  return value < bound - tol * std::max(1.0, std::abs(bound));
}
inline void check_gen_p(const Generator& g, double p_mw, double base, double tol, ViolationSet& vs) {
  if (exceeds(p_mw, g.p_max * base, tol)) vs.gen_violations.push_back({g.id, "p", p_mw, g.p_max * base});
  if (below(p_mw, g.p_min * base, tol)) vs.gen_violations.push_back({g.id, "p", p_mw, g.p_min * base});
}
}  // namespace detail

/// DC check: |P_flow| against s_max and real output against [p_min, p_max].
inline ViolationSet check_limits(const Network& net, const DcSolution& sol, double tol = 1e-9) {
  const double base = net.base_mva();
  ViolationSet vs;
  for (std::size_t k = 0; k < net.branches().size(); ++k) {
    const double lim = net.branches()[k].s_max * base;
    if (detail::exceeds(std::abs(sol.p_flow[k]), lim, tol))
      vs.branch_overloads.push_back({k, std::abs(sol.p_flow[k]), lim});
  }
  for (std::size_t g = 0; g < net.generators().size(); ++g) {
    const auto& gen = net.generators()[g];
    if (sol.islanded[net.bus_index(gen.bus)]) continue;
    detail::check_gen_p(gen, sol.p_gen[g], base, tol, vs);
  }
  return vs;
}

/// AC check: branch apparent power at both ends, bus voltage band, and generator
/// P, Q and |S| limits.
inline ViolationSet check_limits(const Network& net, const AcSolution& sol, double tol = 1e-9) {
  const double base = net.base_mva();
  ViolationSet vs;
  for (std::size_t k = 0; k < net.branches().size(); ++k) {
    const auto& br = net.branches()[k];
    if (br.is_candidate()) continue;
    const double s = std::max(std::hypot(sol.p_flow[k], sol.q_flow[k]),
                              std::hypot(sol.p_flow_to[k], sol.q_flow_to[k])) * base;
    if (detail::exceeds(s, br.s_max * base, tol)) vs.branch_overloads.push_back({k, s, br.s_max * base});
  }
  for (std::size_t i = 0; i < net.buses().size(); ++i) {
    const auto& b = net.buses()[i];
    if (detail::exceeds(sol.v_mag[i], b.v_max, tol)) vs.voltage_violations.push_back({b.id, sol.v_mag[i], b.v_max});
    if (detail::below(sol.v_mag[i], b.v_min, tol)) vs.voltage_violations.push_back({b.id, sol.v_mag[i], b.v_min});
  }
  for (std::size_t g = 0; g < net.generators().size(); ++g) {
    const auto& gen = net.generators()[g];
    const double p = sol.p_gen[g] * base, q = sol.q_gen[g] * base;
    detail::check_gen_p(gen, p, base, tol, vs);
    if (detail::exceeds(q, gen.q_max * base, tol)) vs.gen_violations.push_back({gen.id, "q", q, gen.q_max * base});
    if (detail::below(q, gen.q_min * base, tol)) vs.gen_violations.push_back({gen.id, "q", q, gen.q_min * base});
    const double s = std::hypot(p, q);
    if (detail::exceeds(s, gen.s_max * base, tol)) vs.gen_violations.push_back({gen.id, "s", s, gen.s_max * base});
  }
  return vs;
}

}  // namespace ecogrid
