#pragma once

#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <numbers>
#include <optional>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "ecogrid/error.hpp"
#include "ecogrid/grid_model.hpp"

namespace ecogrid {

/// Real-power snapshot in MW. `p_flow` is indexed like net.branches() and is
/// signed in the branch's from->to orientation; candidate entries must be 0.
struct OperatingPoint {
  std::vector<double> p_gen;
  std::vector<double> p_flow;
  std::vector<double> p_load;
  std::vector<double> p_loss;
  std::optional<std::vector<double>> q_flow;
  std::optional<std::vector<double>> v_mag;
  std::optional<std::vector<double>> v_ang;
};

/// Compartment layout: [input | generators | buses | export | dissipation].
class EcoFlowMatrix {
 public:
  EcoFlowMatrix(Eigen::MatrixXd t, std::vector<std::string> labels, std::size_t generator_count,
                std::size_t bus_count)
      : t_(std::move(t)), labels_(std::move(labels)), gens_(generator_count), buses_(bus_count) {}

  const Eigen::MatrixXd& t() const { return t_; }
  const std::vector<std::string>& labels() const { return labels_; }
  std::size_t dimension() const { return static_cast<std::size_t>(t_.rows()); }
  std::size_t actor_count() const { return gens_ + buses_; }

  static constexpr std::size_t input_index() { return 0; }
  std::size_t generator_index(std::size_t g) const { return 1 + g; }
  std::size_t bus_index(std::size_t b) const { return 1 + gens_ + b; }
  std::size_t export_index() const { return 1 + gens_ + buses_; }
  std::size_t dissipation_index() const { return 2 + gens_ + buses_; }

  EcoFlowMatrix scaled(double c) const { return EcoFlowMatrix(t_ * c, labels_, gens_, buses_); }

 private:
  Eigen::MatrixXd t_;
  std::vector<std::string> labels_;
  std::size_t gens_;
  std::size_t buses_;
};

struct RobustnessReport {
  double tstp = 0.0;
  double dc = 0.0;
  double asc = 0.0;
  double ratio = 0.0;
  double r = 0.0;
};

inline EcoFlowMatrix build_ecoflow_matrix(const Network& net, const OperatingPoint& op,
                                          double balance_tol_mw = 1e-6) {
  const auto nb = net.buses().size();
  const auto ng = net.generators().size();
  const auto branches = net.branches();
  if (op.p_gen.size() != ng || op.p_flow.size() != branches.size() || op.p_load.size() != nb ||
      op.p_loss.size() != nb)
    throw Error(ErrorCode::validation, "operating point dimensions do not match the network");

  double gen_total = 0.0, sink_total = 0.0;
  for (std::size_t g = 0; g < ng; ++g) {
    if (op.p_gen[g] < 0.0)
      throw Error(ErrorCode::validation,
                  "negative generation at generator " + std::to_string(net.generators()[g].id));
    gen_total += op.p_gen[g];
  }
  for (std::size_t b = 0; b < nb; ++b) {
    if (op.p_load[b] < 0.0)
      throw Error(ErrorCode::validation, "negative load at bus " + std::to_string(net.buses()[b].id));
    if (op.p_loss[b] < 0.0)
      throw Error(ErrorCode::validation, "negative loss at bus " + std::to_string(net.buses()[b].id));
    sink_total += op.p_load[b] + op.p_loss[b];
  }
  if (std::abs(gen_total - sink_total) > balance_tol_mw * std::max(1.0, gen_total))
    throw Error(ErrorCode::validation, "operating point is not balanced: generation " +
                                           std::to_string(gen_total) + " MW vs load+loss " +
                                           std::to_string(sink_total) + " MW");

  const auto n = ng + nb + 3;
  Eigen::MatrixXd t = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  std::vector<std::string> labels;
  labels.reserve(n);
  labels.emplace_back("input");
  for (const auto& g : net.generators()) labels.push_back("gen:" + std::to_string(g.id));
  for (const auto& b : net.buses()) labels.push_back("bus:" + std::to_string(b.id));
  labels.emplace_back("export");
  labels.emplace_back("dissipation");
  EcoFlowMatrix layout(Eigen::MatrixXd(), labels, ng, nb);

  for (std::size_t g = 0; g < ng; ++g) {
    const auto gi = static_cast<Eigen::Index>(layout.generator_index(g));
    t(0, gi) += op.p_gen[g];
    t(gi, static_cast<Eigen::Index>(layout.bus_index(net.bus_index(net.generators()[g].bus)))) +=
        op.p_gen[g];
  }
  // Parallel branches land on the same (bus, bus) cell and are summed.
  for (std::size_t k = 0; k < branches.size(); ++k) {
    const double f = op.p_flow[k];
    if (branches[k].is_candidate()) {
      if (f != 0.0)
        throw Error(ErrorCode::topology, "flow on branch " + branch_label(branches[k]) +
                                             " which is not in the active topology");
      continue;
    }
    auto from = static_cast<Eigen::Index>(layout.bus_index(net.bus_index(branches[k].from_bus)));
    auto to = static_cast<Eigen::Index>(layout.bus_index(net.bus_index(branches[k].to_bus)));
    if (f >= 0.0) t(from, to) += f;
    else t(to, from) += -f;
  }
  const auto ex = static_cast<Eigen::Index>(layout.export_index());
  const auto dis = static_cast<Eigen::Index>(layout.dissipation_index());
  for (std::size_t b = 0; b < nb; ++b) {
    const auto bi = static_cast<Eigen::Index>(layout.bus_index(b));
    t(bi, ex) = op.p_load[b];
    t(bi, dis) = op.p_loss[b];
  }
  return EcoFlowMatrix(std::move(t), std::move(labels), ng, nb);
}

inline double tstp(const Eigen::MatrixXd& t) { return t.sum(); }
inline double tstp(const EcoFlowMatrix& efm) { return tstp(efm.t()); }

namespace detail {
inline void require_flow(double total) {
  if (!(total > 0.0)) throw Error(ErrorCode::degenerate_network, "total system throughput is zero");
}
}  // namespace detail

/// DC = -TSTp * sum p_ij ln p_ij with p_ij = T_ij / TSTp; 0 ln 0 := 0.
inline double development_capacity(const Eigen::MatrixXd& t) {
  const double s = tstp(t);
  detail::require_flow(s);
  double acc = 0.0;
  for (Eigen::Index j = 0; j < t.cols(); ++j)
    for (Eigen::Index i = 0; i < t.rows(); ++i)
      if (t(i, j) > 0.0) acc += t(i, j) * std::log(t(i, j) / s);
  return -acc;
}
inline double development_capacity(const EcoFlowMatrix& efm) { return development_capacity(efm.t()); }

/// ASC = sum T_ij ln(T_ij TSTp / (T_i. T_.j)); nonnegative by the information inequality.
inline double ascendency(const Eigen::MatrixXd& t) {
  const double s = tstp(t);
  detail::require_flow(s);
  const Eigen::VectorXd out = t.rowwise().sum();
  const Eigen::RowVectorXd in = t.colwise().sum();
  double acc = 0.0;
  for (Eigen::Index j = 0; j < t.cols(); ++j)
    for (Eigen::Index i = 0; i < t.rows(); ++i)
      if (t(i, j) > 0.0) acc += t(i, j) * std::log(t(i, j) * s / (out(i) * in(j)));
  return acc;
}
inline double ascendency(const EcoFlowMatrix& efm) { return ascendency(efm.t()); }

/// r(x) = -x ln x.
inline double robustness_of_ratio(double x) { return x > 0.0 ? 0.0 - x * std::log(x) : 0.0; }

inline RobustnessReport robustness(const Eigen::MatrixXd& t) {
  RobustnessReport rep;
  rep.tstp = tstp(t);
  detail::require_flow(rep.tstp);
  rep.dc = development_capacity(t);
  if (!(rep.dc > 0.0))
    throw Error(ErrorCode::degenerate_network,
                "development capacity is zero (a single flow carries all throughput)");
  rep.asc = ascendency(t);
  rep.ratio = rep.asc / rep.dc;
  rep.r = robustness_of_ratio(rep.ratio);
  return rep;
}
inline RobustnessReport robustness(const EcoFlowMatrix& efm) { return robustness(efm.t()); }

/// (x, r(x)) at x = k / samples, k = 1..samples.
inline std::vector<std::pair<double, double>> robustness_curve(int samples) {
  if (samples < 2) throw Error(ErrorCode::usage, "robustness curve needs at least 2 samples");
  std::vector<std::pair<double, double>> out;
  out.reserve(static_cast<std::size_t>(samples));
  for (int k = 1; k <= samples; ++k) {
    const double x = static_cast<double>(k) / samples;
    out.emplace_back(x, robustness_of_ratio(x));
  }
  return out;
}

/// Gradient of R with respect to every matrix entry. Entries that are zero get
/// NaN: the one-sided derivative there is unbounded.
inline Eigen::MatrixXd robustness_entry_gradient(const Eigen::MatrixXd& t) {
  const auto rep = robustness(t);
  const double s = rep.tstp;
  const Eigen::VectorXd out = t.rowwise().sum();
  const Eigen::RowVectorXd in = t.colwise().sum();
  const double drdx = -(std::log(rep.ratio) + 1.0);
  Eigen::MatrixXd g(t.rows(), t.cols());
  for (Eigen::Index j = 0; j < t.cols(); ++j)
    for (Eigen::Index i = 0; i < t.rows(); ++i) {
      if (!(t(i, j) > 0.0)) {
        g(i, j) = std::numeric_limits<double>::quiet_NaN();
        continue;
      }
      const double d_asc = std::log(t(i, j) * s / (out(i) * in(j)));
      const double d_dc = -std::log(t(i, j) / s);
      g(i, j) = drdx * (d_asc * rep.dc - rep.asc * d_dc) / (rep.dc * rep.dc);
    }
  return g;
}

inline void write_efm_csv(std::ostream& os, const EcoFlowMatrix& efm) {
  const auto& labels = efm.labels();
  os << "from\\to";
  for (const auto& l : labels) os << ',' << l;
  os << '\n';
  char buf[64];
  for (Eigen::Index i = 0; i < efm.t().rows(); ++i) {
    os << labels[static_cast<std::size_t>(i)];
    for (Eigen::Index j = 0; j < efm.t().cols(); ++j) {
      std::snprintf(buf, sizeof buf, "%.17g", efm.t()(i, j));
      os << ',' << buf;
    }
    os << '\n';
  }
}

}  // namespace ecogrid
