#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include <Eigen/Dense>

#include "ecogrid/eco_metrics.hpp"
#include "ecogrid/error.hpp"
#include "ecogrid/grid_model.hpp"
#include "ecogrid/powerflow.hpp"

namespace ecogrid {

struct NlpSettings {
  double tolerance = 1e-4;    // outer-loop change in R and constraint residual
  double time_limit = 1500.0; // seconds
  int multistart = 8;
  double fd_step = 1e-6;      // relative step for finite-difference fallbacks
};

enum class DesignModel { dc, ac_check };
enum class DesignStatus { solved, infeasible, timeout };

inline const char* to_string(DesignStatus s) {
  switch (s) {
    case DesignStatus::solved: return "solved";
    case DesignStatus::infeasible: return "infeasible";
    case DesignStatus::timeout: return "timeout";
  }
  return "unknown";
}

struct DesignProblem {
  Network net;
  DesignModel model = DesignModel::dc;
  std::optional<int> candidate_budget;
  NlpSettings nlp;
  std::uint64_t seed = 0;
  unsigned jobs = 0;  // 0 = hardware concurrency
};

using Clock = std::chrono::steady_clock;

/// Dispatch-only view of a fixed topology under the DC model: branch flows are
/// the affine map f = H p + f0 (MW), with H built from the PTDF matrix.
class DispatchModel {
 public:
  explicit DispatchModel(const Network& net) : net_(net) {
    const auto nb = net.buses().size();
    const auto ng = net.generators().size();
    const double base = net.base_mva();
    const auto slack = net.slack_bus();
    const auto comp = net.components();
    const int main = comp[net.bus_index(slack)];

    for (std::size_t i = 0; i < nb; ++i) {
      load_mw_.push_back(net.buses()[i].p_load * base);
      if (comp[i] != main && net.buses()[i].p_load > 0.0) islands_load_ = true;
    }
    lower_.resize(static_cast<Eigen::Index>(ng));
    upper_.resize(static_cast<Eigen::Index>(ng));
    for (std::size_t g = 0; g < ng; ++g) {
      const auto& gen = net.generators()[g];
      const auto gi = static_cast<Eigen::Index>(g);
      // Flow-matrix entries must stay nonnegative, so output is floored at 0.
      lower_(gi) = std::max(gen.p_min, 0.0) * base;
      upper_(gi) = gen.p_max * base;
      if (comp[net.bus_index(gen.bus)] != main) {
        if (lower_(gi) > 0.0) islands_load_ = true;
        lower_(gi) = upper_(gi) = 0.0;
      }
    }
    total_load_ = std::accumulate(load_mw_.begin(), load_mw_.end(), 0.0);

    const Eigen::MatrixXd phi = ptdf(net, slack);
    const auto nl = phi.rows();
    h_ = Eigen::MatrixXd::Zero(nl, static_cast<Eigen::Index>(ng));
    for (std::size_t g = 0; g < ng; ++g)
      h_.col(static_cast<Eigen::Index>(g)) = phi.col(static_cast<Eigen::Index>(net.bus_index(net.generators()[g].bus)));
    f0_ = Eigen::VectorXd::Zero(nl);
    for (std::size_t i = 0; i < nb; ++i) f0_ -= phi.col(static_cast<Eigen::Index>(i)) * load_mw_[i];
    limit_.resize(nl);
    for (Eigen::Index k = 0; k < nl; ++k) limit_(k) = net.branches()[static_cast<std::size_t>(k)].s_max * base;
  }

  const Network& network() const { return net_; }
  bool islands_load() const { return islands_load_; }
  std::size_t size() const { return static_cast<std::size_t>(lower_.size()); }
  const Eigen::VectorXd& lower() const { return lower_; }
  const Eigen::VectorXd& upper() const { return upper_; }
  double total_load() const { return total_load_; }
  const Eigen::MatrixXd& flow_sensitivity() const { return h_; }
  const Eigen::VectorXd& flow_offset() const { return f0_; }
  const Eigen::VectorXd& flow_limit() const { return limit_; }

  Eigen::VectorXd flows(const Eigen::VectorXd& p) const { return h_ * p + f0_; }

  OperatingPoint operating_point(const Eigen::VectorXd& p) const {
    OperatingPoint op;
    op.p_gen.assign(p.data(), p.data() + p.size());
    const Eigen::VectorXd f = flows(p);
    op.p_flow.assign(f.data(), f.data() + f.size());
    op.p_load = load_mw_;
    op.p_loss.assign(load_mw_.size(), 0.0);
    return op;
  }

  /// Flow matrix at any nonnegative dispatch; balance is not enforced so that
  /// derivatives can be taken off the balance hyperplane.
  EcoFlowMatrix flow_matrix(const Eigen::VectorXd& p) const {
    return build_ecoflow_matrix(net_, operating_point(p), std::numeric_limits<double>::infinity());
  }

  double robustness_at(const Eigen::VectorXd& p) const { return robustness(flow_matrix(p)).r; }

  /// dR/dp (per MW). Chain rule through the flow matrix; coordinates that touch
  /// a zero entry fall back to finite differences.
  Eigen::VectorXd gradient(const Eigen::VectorXd& p, double fd_step = 1e-6) const {
    const auto efm = flow_matrix(p);
    const Eigen::MatrixXd dr = robustness_entry_gradient(efm.t());
    const Eigen::VectorXd f = flows(p);
    const auto ng = size();
    Eigen::VectorXd g(static_cast<Eigen::Index>(ng));
    for (std::size_t k = 0; k < ng; ++k) {
      const auto kk = static_cast<Eigen::Index>(k);
      const auto gi = static_cast<Eigen::Index>(efm.generator_index(k));
      const auto bi = static_cast<Eigen::Index>(efm.bus_index(net_.bus_index(net_.generators()[k].bus)));
      double acc = dr(0, gi) + dr(gi, bi);
      for (Eigen::Index l = 0; l < f.size() && std::isfinite(acc); ++l) {
        if (h_(l, kk) == 0.0) continue;
        const auto& br = net_.branches()[static_cast<std::size_t>(l)];
        auto from = static_cast<Eigen::Index>(efm.bus_index(net_.bus_index(br.from_bus)));
        auto to = static_cast<Eigen::Index>(efm.bus_index(net_.bus_index(br.to_bus)));
        if (f(l) > 0.0) acc += dr(from, to) * h_(l, kk);
        else if (f(l) < 0.0) acc -= dr(to, from) * h_(l, kk);
        else acc = std::numeric_limits<double>::quiet_NaN();
      }
      g(kk) = std::isfinite(acc) ? acc : fd_component(p, k, fd_step);
    }
    return g;
  }

  /// Central difference (forward at a zero lower bound).
  double fd_component(const Eigen::VectorXd& p, std::size_t k, double rel_step) const {
    const auto kk = static_cast<Eigen::Index>(k);
    const double h = rel_step * std::max(1.0, total_load_);
    Eigen::VectorXd a = p, b = p;
    b(kk) += h;
    if (p(kk) - h >= 0.0) {
      a(kk) -= h;
      return (robustness_at(b) - robustness_at(a)) / (2.0 * h);
    }
    return (robustness_at(b) - robustness_at(p)) / h;
  }

  /// Euclidean projection onto {lower <= p <= upper, sum p = total_load}.
  /// Returns nullopt when the box cannot meet the load.
  std::optional<Eigen::VectorXd> project(const Eigen::VectorXd& y) const {
    if (lower_.sum() > total_load_ + 1e-9 * std::max(1.0, total_load_) ||
        upper_.sum() < total_load_ - 1e-9 * std::max(1.0, total_load_))
      return std::nullopt;
    auto at = [&](double lambda) {
      return (y.array() - lambda).max(lower_.array()).min(upper_.array()).matrix().eval();
    };
    double lo = (y - upper_).minCoeff() - 1.0, hi = (y - lower_).maxCoeff() + 1.0;
    for (int it = 0; it < 200 && hi - lo > 0.0; ++it) {
      const double mid = 0.5 * (lo + hi);
      if (mid == lo || mid == hi) break;
      if (at(mid).sum() > total_load_) lo = mid;
      else hi = mid;
    }
    Eigen::VectorXd p = at(0.5 * (lo + hi));
    // Put the bisection residual on units with slack room.
    double residual = total_load_ - p.sum();
    for (Eigen::Index k = 0; k < p.size() && residual != 0.0; ++k) {
      const double room = residual > 0.0 ? upper_(k) - p(k) : lower_(k) - p(k);
      const double take = residual > 0.0 ? std::min(residual, room) : std::max(residual, room);
      p(k) += take;
      residual -= take;
    }
    return p;
  }

  /// Largest limit excess max(|f| - limit), MW (negative when strictly inside).
  double max_limit_excess(const Eigen::VectorXd& p) const {
    const Eigen::VectorXd f = flows(p);
    double worst = -std::numeric_limits<double>::infinity();
    for (Eigen::Index l = 0; l < f.size(); ++l)
      if (std::isfinite(limit_(l))) worst = std::max(worst, std::abs(f(l)) - limit_(l));
    return worst;
  }

 private:
  const Network& net_;
  std::vector<double> load_mw_;
  Eigen::VectorXd lower_, upper_;
  double total_load_ = 0.0;
  Eigen::MatrixXd h_;
  Eigen::VectorXd f0_, limit_;
  bool islands_load_ = false;
};

struct InnerSolution {
  bool feasible = false;
  bool timed_out = false;
  std::vector<double> p_gen;  // MW
  OperatingPoint op;
  RobustnessReport report;
  int feasible_starts = 0;
  std::string reason;
};

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Linear inequality rows a.p <= b (MW) for the finite flow limits, tightened by
// a small relative margin so the polished point clears the limit check.
struct LimitRows {
  Eigen::MatrixXd a;
  Eigen::VectorXd b;
};

inline LimitRows limit_rows(const DispatchModel& m, double margin = 1e-8) {
  const auto& h = m.flow_sensitivity();
  const auto& f0 = m.flow_offset();
  const auto& lim = m.flow_limit();
  std::vector<Eigen::Index> rows;
  for (Eigen::Index l = 0; l < lim.size(); ++l)
    if (std::isfinite(lim(l)) && h.row(l).squaredNorm() > 0.0) rows.push_back(l);
  LimitRows out;
  out.a.resize(static_cast<Eigen::Index>(2 * rows.size()), h.cols());
  out.b.resize(static_cast<Eigen::Index>(2 * rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto l = rows[i];
    const auto r = static_cast<Eigen::Index>(2 * i);
    const double tight = lim(l) * (1.0 - margin);
    out.a.row(r) = h.row(l);
    out.b(r) = tight - f0(l);
    out.a.row(r + 1) = -h.row(l);
    out.b(r + 1) = tight + f0(l);
  }
  return out;
}

// Constant rows (h == 0) cannot be fixed by redispatch.
inline bool constant_rows_ok(const DispatchModel& m) {
  const auto& h = m.flow_sensitivity();
  const auto& lim = m.flow_limit();
  for (Eigen::Index l = 0; l < lim.size(); ++l)
    if (std::isfinite(lim(l)) && h.row(l).squaredNorm() == 0.0 && std::abs(m.flow_offset()(l)) > lim(l))
      return false;
  return true;
}

/// Dykstra's alternating projections onto (box and balance) and each half-space.
inline Eigen::VectorXd polish(const DispatchModel& m, const LimitRows& rows, Eigen::VectorXd p,
                              int max_cycles = 5000) {
  const auto nr = rows.a.rows();
  if (nr == 0) return *m.project(p);
  std::vector<Eigen::VectorXd> inc(static_cast<std::size_t>(nr + 1), Eigen::VectorXd::Zero(p.size()));
  for (int cycle = 0; cycle < max_cycles; ++cycle) {
    {
      Eigen::VectorXd y = p + inc[0];
      Eigen::VectorXd q = *m.project(y);
      inc[0] = y - q;
      p = q;
    }
    for (Eigen::Index r = 0; r < nr; ++r) {
      auto& c = inc[static_cast<std::size_t>(r + 1)];
      Eigen::VectorXd y = p + c;
      const double viol = rows.a.row(r).dot(y) - rows.b(r);
      Eigen::VectorXd q = y;
      if (viol > 0.0) q -= viol / rows.a.row(r).squaredNorm() * rows.a.row(r).transpose();
      c = y - q;
      p = q;
    }
    const double worst = (rows.a * p - rows.b).maxCoeff();
    if (worst <= 0.0) {
      // p is on the last half-space; re-project onto the balance set and stop
      // once that keeps every row satisfied.
      Eigen::VectorXd q = *m.project(p);
      if ((rows.a * q - rows.b).maxCoeff() <= 1e-9 * std::max(1.0, m.total_load())) return q;
    }
  }
  return *m.project(p);
}

}  // namespace detail

/// Maximizes R over generator dispatch on a fixed topology: box bounds on each
/// unit, total generation equal to total load, |flow| <= s_max. Augmented
/// Lagrangian on the flow limits with projected-gradient ascent inside, over
/// several starts (the first is capacity-proportional dispatch).
inline InnerSolution solve_inner_nlp(const Network& net, const NlpSettings& settings,
                                     std::uint64_t seed = 0,
                                     std::optional<Clock::time_point> deadline = std::nullopt) {
  if (!(settings.tolerance > 0.0) || settings.multistart < 1)
    throw Error(ErrorCode::usage, "NLP settings need tolerance > 0 and multistart >= 1");
  const auto until = deadline.value_or(
      Clock::now() + std::chrono::duration_cast<Clock::duration>(std::chrono::duration<double>(settings.time_limit)));
  InnerSolution out;
  DispatchModel model(net);
  if (model.islands_load()) {
    out.reason = "topology islands load";
    return out;
  }
  if (!model.project(model.upper())) {
    out.reason = "generation bounds cannot meet load";
    return out;
  }
  if (!detail::constant_rows_ok(model)) {
    out.reason = "a branch limit is violated for every dispatch";
    return out;
  }
  const auto rows = detail::limit_rows(model);
  const double scale = std::max(1.0, model.total_load());
  const auto n = static_cast<Eigen::Index>(model.size());
  const double feas_tol = 1e-9 * scale;

  auto safe_r = [&](const Eigen::VectorXd& p) {
    try {
      return model.robustness_at(p);
    } catch (const Error&) {
      return -std::numeric_limits<double>::infinity();
    }
  };

  // Starting points in MW.
  std::vector<Eigen::VectorXd> starts;
  {
    Eigen::VectorXd prop = model.upper();
    const double cap = prop.sum();
    if (cap > 0.0) prop *= model.total_load() / cap;
    starts.push_back(*model.project(prop));
    std::mt19937_64 rng(seed);
    for (int s = 1; s < settings.multistart; ++s) {
      Eigen::VectorXd y(n);
      for (Eigen::Index k = 0; k < n; ++k) {
        std::uniform_real_distribution<double> u(model.lower()(k), std::max(model.lower()(k), model.upper()(k)));
        y(k) = u(rng);
      }
      starts.push_back(*model.project(y));
    }
  }

  int free_units = 0;
  for (Eigen::Index k = 0; k < n; ++k) free_units += model.upper()(k) > model.lower()(k);

  Eigen::VectorXd best;
  double best_r = -std::numeric_limits<double>::infinity();

  for (const auto& start : starts) {
    if (Clock::now() > until) {
      out.timed_out = true;
      break;
    }
    Eigen::VectorXd p = start;
    if (free_units > 1) {
      // Work in units of total load so the penalty weights are scale free.
      Eigen::VectorXd mu = Eigen::VectorXd::Zero(rows.a.rows());
      double rho = 10.0;
      double prev_viol = std::numeric_limits<double>::infinity();
      double prev_r = safe_r(p);
      auto merit = [&](const Eigen::VectorXd& x, double& r_out) {
        r_out = safe_r(x);
        if (!std::isfinite(r_out)) return r_out;
        double pen = 0.0;
        if (rows.a.rows() > 0) {
          const Eigen::VectorXd c = (rows.a * x - rows.b) / scale;
          for (Eigen::Index i = 0; i < c.size(); ++i) {
            const double s = std::max(0.0, mu(i) + rho * c(i));
            pen += s * s - mu(i) * mu(i);
          }
        }
        return r_out - pen / (2.0 * rho);
      };
      auto merit_grad = [&](const Eigen::VectorXd& x) {
        Eigen::VectorXd g = model.gradient(x, settings.fd_step);
        if (rows.a.rows() > 0) {
          const Eigen::VectorXd c = (rows.a * x - rows.b) / scale;
          for (Eigen::Index i = 0; i < c.size(); ++i) {
            const double s = std::max(0.0, mu(i) + rho * c(i));
            if (s > 0.0) g -= s * rows.a.row(i).transpose() / scale;
          }
        }
        return g;
      };

      for (int outer = 0; outer < 40; ++outer) {
        double step = 1e-2 * scale * scale;
        double r_cur = 0.0;
        double phi = merit(p, r_cur);
        for (int inner = 0; inner < 400; ++inner) {
          if (!std::isfinite(phi)) break;
          const Eigen::VectorXd g = merit_grad(p);
          if (!g.allFinite()) break;
          bool accepted = false;
          Eigen::VectorXd cand;
          double phi_new = 0.0, r_new = 0.0;
          for (int bt = 0; bt < 60; ++bt) {
            cand = *model.project(p + step * g);
            const Eigen::VectorXd d = cand - p;
            if (d.lpNorm<Eigen::Infinity>() <= 1e-13 * scale) break;
            phi_new = merit(cand, r_new);
            if (std::isfinite(phi_new) && phi_new >= phi + 1e-4 * g.dot(d)) {
              accepted = true;
              break;
            }
            step *= 0.5;
          }
          if (!accepted) break;
          const double change = (cand - p).lpNorm<Eigen::Infinity>();
          const double gain = phi_new - phi;
          p = cand;
          phi = phi_new;
          r_cur = r_new;
          step *= 2.0;
          if (change <= 1e-11 * scale || gain <= 1e-15) break;
        }
        const Eigen::VectorXd c = rows.a.rows() > 0 ? Eigen::VectorXd((rows.a * p - rows.b) / scale)
                                                    : Eigen::VectorXd();
        const double viol = c.size() ? std::max(0.0, c.maxCoeff()) : 0.0;
        for (Eigen::Index i = 0; i < c.size(); ++i) mu(i) = std::max(0.0, mu(i) + rho * c(i));
        const double r_now = safe_r(p);
        const bool settled = std::abs(r_now - prev_r) <= settings.tolerance * 1e-2;
        prev_r = r_now;
        if (viol <= 1e-10 && settled && outer > 0) break;
        if (viol > 0.25 * prev_viol) rho = std::min(rho * 10.0, 1e12);
        prev_viol = viol;
        if (Clock::now() > until) {
          out.timed_out = true;
          break;
        }
      }
    }
    p = detail::polish(model, rows, p);
    if (model.max_limit_excess(p) > feas_tol && rows.a.rows() > 0) continue;
    if (std::abs(p.sum() - model.total_load()) > feas_tol) continue;
    const double r = safe_r(p);
    if (!std::isfinite(r)) continue;
    ++out.feasible_starts;
    if (r > best_r) {
      best_r = r;
      best = p;
    }
  }

  if (best.size() == 0) {
    if (out.reason.empty()) out.reason = out.timed_out ? "time limit reached" : "no feasible dispatch found";
    return out;
  }
  out.feasible = true;
  out.p_gen.assign(best.data(), best.data() + best.size());
  const auto dc = solve_dc(net, out.p_gen);
  out.op = to_operating_point(net, dc);
  out.report = robustness(build_ecoflow_matrix(net, out.op));
  return out;
}

struct TopologyResult {
  std::vector<bool> alpha;
  std::string status;  // solved | islanded | infeasible | over-budget | not-evaluated
  double r = std::numeric_limits<double>::quiet_NaN();
  std::vector<double> p_gen;
};

struct DesignSolution {
  std::vector<bool> alpha;
  std::vector<std::string> candidates;    // labels, candidate order
  std::vector<std::string> new_branches;  // labels of alpha = 1
  std::vector<double> p_gen;              // MW
  OperatingPoint op;  // indexed on apply_topology(net, alpha)
  RobustnessReport report;
  DesignStatus status = DesignStatus::infeasible;
  double wall_time = 0.0;
  std::vector<TopologyResult> topologies;  // one per alpha assignment, mask order
};

namespace detail {
inline std::size_t popcount(const std::vector<bool>& a) {
  return static_cast<std::size_t>(std::count(a.begin(), a.end(), true));
}
// Better design: higher R, then fewer new branches, then lexicographically smaller alpha.
inline bool preferred(const TopologyResult& a, const TopologyResult& b) {
  if (a.r != b.r) return a.r > b.r;
  if (popcount(a.alpha) != popcount(b.alpha)) return popcount(a.alpha) < popcount(b.alpha);
  return a.alpha < b.alpha;
}
}  // namespace detail

/// Exhaustive search over candidate subsets with an inner dispatch NLP per subset.
inline DesignSolution optimize_design(const DesignProblem& prob) {
  const auto t0 = Clock::now();
  const auto deadline =
      t0 + std::chrono::duration_cast<Clock::duration>(std::chrono::duration<double>(prob.nlp.time_limit));
  const auto& net = prob.net;
  const auto cands = net.candidate_indices();
  if (cands.size() > 20)
    throw Error(ErrorCode::usage, "too many candidates for enumeration (" + std::to_string(cands.size()) + " > 20)");
  if (prob.candidate_budget && *prob.candidate_budget < 0) throw Error(ErrorCode::usage, "budget must be >= 0");

  DesignSolution sol;
  for (auto c : cands) sol.candidates.push_back(branch_label(net.branches()[c]));
  const std::size_t count = std::size_t{1} << cands.size();
  sol.topologies.resize(count);
  for (std::size_t mask = 0; mask < count; ++mask) {
    auto& t = sol.topologies[mask];
    t.alpha.resize(cands.size());
    for (std::size_t i = 0; i < cands.size(); ++i) t.alpha[i] = (mask >> i) & 1U;
    t.status = "not-evaluated";
  }

  std::atomic<std::size_t> next{0};
  std::atomic<bool> timed_out{false};
  auto worker = [&] {
    for (std::size_t mask; (mask = next.fetch_add(1)) < count;) {
      auto& t = sol.topologies[mask];
      if (prob.candidate_budget && detail::popcount(t.alpha) > static_cast<std::size_t>(*prob.candidate_budget)) {
        t.status = "over-budget";
        continue;
      }
      if (Clock::now() > deadline) {
        timed_out = true;
        continue;
      }
      // Seeded by the built set, so adding candidates never changes the
      // search on topologies that leave them out.
      std::uint64_t s = detail::splitmix64(prob.seed);
      for (std::size_t i = 0; i < t.alpha.size(); ++i)
        if (t.alpha[i]) s = detail::splitmix64(s ^ (i + 1));
      const Network topo = apply_topology(net, t.alpha);
      const auto inner = solve_inner_nlp(topo, prob.nlp, s, deadline);
      if (inner.timed_out) timed_out = true;
      if (inner.feasible) {
        t.status = "solved";
        t.r = inner.report.r;
        t.p_gen = inner.p_gen;
      } else {
        t.status = inner.reason == "topology islands load" ? "islanded" : "infeasible";
      }
    }
  };
  unsigned jobs = prob.jobs ? prob.jobs : std::max(1U, std::thread::hardware_concurrency());
  jobs = static_cast<unsigned>(std::min<std::size_t>(jobs, count));
  if (jobs <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned j = 0; j < jobs; ++j) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  const TopologyResult* best = nullptr;
  for (const auto& t : sol.topologies)
    if (t.status == "solved" && (!best || detail::preferred(t, *best))) best = &t;

  sol.status = timed_out ? DesignStatus::timeout : DesignStatus::infeasible;
  if (best) {
    if (!timed_out) sol.status = DesignStatus::solved;
    sol.alpha = best->alpha;
    sol.p_gen = best->p_gen;
    for (std::size_t i = 0; i < cands.size(); ++i)
      if (sol.alpha[i]) sol.new_branches.push_back(sol.candidates[i]);
    const Network topo = apply_topology(net, sol.alpha);
    sol.op = to_operating_point(topo, solve_dc(topo, sol.p_gen));
    sol.report = robustness(build_ecoflow_matrix(topo, sol.op));
  }
  sol.wall_time = std::chrono::duration<double>(Clock::now() - t0).count();
  return sol;
}

struct AcFeasibility {
  bool converged = false;
  AcSolution ac;
  ViolationSet violations;
};

/// Runs the AC power flow on the designed topology at the design dispatch (the
/// slack unit absorbs losses) and reports every AC-model limit that binds.
inline AcFeasibility check_ac_feasibility(const Network& net, const DesignSolution& sol) {
  if (sol.status != DesignStatus::solved)
    throw Error(ErrorCode::usage, "AC feasibility check needs a solved design");
  const Network topo = apply_topology(net, sol.alpha);
  AcFeasibility out;
  out.ac = solve_ac(topo, sol.p_gen);
  out.converged = out.ac.converged;
  if (out.converged) out.violations = check_limits(topo, out.ac);
  return out;
}

}  // namespace ecogrid
