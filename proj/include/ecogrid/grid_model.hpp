#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "ecogrid/error.hpp"

namespace ecogrid {

using BusId = int;

inline constexpr double kUnlimited = std::numeric_limits<double>::infinity();

// All electrical quantities below are per-unit on the network's MVA base.

struct Bus {
  BusId id = 0;
  double v_min = 0.9;
  double v_max = 1.1;
  double p_load = 0.0;
  double q_load = 0.0;
};

enum class BranchStatus { existing, candidate };

/// Series branch. `conductance_g` and `susceptance_b` follow the bus-admittance
/// off-diagonal convention (G_ij = -r/|z|^2, B_ij = x/|z|^2), which is the form
/// the polar branch-flow equations in powerflow.hpp consume.
struct Branch {
  BusId from_bus = 0;
  BusId to_bus = 0;
  double resistance = 0.0;
  double reactance = 0.0;
  double conductance_g = 0.0;
  double susceptance_b = 0.0;
  double s_max = kUnlimited;
  BranchStatus status = BranchStatus::existing;
  int ordinal = 0;  // position among parallels with the same (from, to); assigned by Network
  std::optional<std::size_t> built_from_candidate;  // set by apply_topology

  bool is_candidate() const { return status == BranchStatus::candidate; }
};

inline Branch make_branch(BusId from, BusId to, double r, double x, double s_max,
                          BranchStatus status = BranchStatus::existing) {
  Branch br;
  br.from_bus = from;
  br.to_bus = to;
  br.resistance = r;
  br.reactance = x;
  const double z2 = r * r + x * x;
  if (z2 > 0.0) {
    br.conductance_g = -r / z2;
    br.susceptance_b = x / z2;
  }
  br.s_max = s_max;
  br.status = status;
  return br;
}

inline std::string branch_label(const Branch& br) {
  std::string s = std::to_string(br.from_bus) + "-" + std::to_string(br.to_bus);
  if (br.ordinal > 0) s += "#" + std::to_string(br.ordinal);
  return s;
}

struct Generator {
  int id = 0;
  BusId bus = 0;
  double p_min = 0.0;
  double p_max = 0.0;
  double q_min = -kUnlimited;
  double q_max = kUnlimited;
  double s_max = kUnlimited;
  double p_set = 0.0;  // scheduled ("base") output
  std::optional<double> v_set;
};

/// Immutable network model. Construction validates every invariant and throws
/// Error{validation} listing all of them; connectivity problems only warn.
class Network {
 public:
  Network(std::string name, double base_mva, std::vector<Bus> buses, std::vector<Branch> branches,
          std::vector<Generator> generators, std::optional<BusId> slack_bus = std::nullopt)
      : name_(std::move(name)),
        base_mva_(base_mva),
        buses_(std::move(buses)),
        branches_(std::move(branches)),
        generators_(std::move(generators)),
        slack_bus_(slack_bus) {
    for (std::size_t i = 0; i < buses_.size(); ++i) index_.emplace(buses_[i].id, i);
    assign_ordinals();
    validate();
  }

  const std::string& name() const { return name_; }
  double base_mva() const { return base_mva_; }
  std::span<const Bus> buses() const { return buses_; }
  std::span<const Branch> branches() const { return branches_; }
  std::span<const Generator> generators() const { return generators_; }
  std::optional<BusId> designated_slack() const { return slack_bus_; }
  const std::vector<std::string>& warnings() const { return warnings_; }

  bool has_bus(BusId id) const { return index_.count(id) != 0; }

  std::size_t bus_index(BusId id) const {
    auto it = index_.find(id);
    if (it == index_.end())
      throw Error(ErrorCode::validation, "unknown bus id " + std::to_string(id));
    return it->second;
  }

  std::vector<std::size_t> candidate_indices() const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < branches_.size(); ++i)
      if (branches_[i].is_candidate()) out.push_back(i);
    return out;
  }

  std::vector<std::size_t> existing_indices() const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < branches_.size(); ++i)
      if (!branches_[i].is_candidate()) out.push_back(i);
    return out;
  }

  /// Slack bus: the designated one, otherwise the first generator's bus.
  BusId slack_bus() const {
    if (slack_bus_) return *slack_bus_;
    if (generators_.empty())
      throw Error(ErrorCode::validation, "network has no generator to act as slack");
    return generators_.front().bus;
  }

  double total_load() const {
    double s = 0.0;
    for (const auto& b : buses_) s += b.p_load;
    return s;
  }

  /// Connected components over existing branches; returns a component id per bus.
  std::vector<int> components() const { return components_excluding({}); }

  /// Same, with the listed branch indices treated as out of service.
  std::vector<int> components_excluding(std::span<const std::size_t> outaged) const {
    std::vector<std::size_t> parent(buses_.size());
    std::iota(parent.begin(), parent.end(), std::size_t{0});
    auto find = [&](std::size_t a) {
      while (parent[a] != a) a = parent[a] = parent[parent[a]];
      return a;
    };
    for (std::size_t k = 0; k < branches_.size(); ++k) {
      if (branches_[k].is_candidate()) continue;
      if (std::find(outaged.begin(), outaged.end(), k) != outaged.end()) continue;
      auto a = find(index_.at(branches_[k].from_bus));
      auto b = find(index_.at(branches_[k].to_bus));
      if (a != b) parent[a] = b;
    }
    std::vector<int> comp(buses_.size(), -1);
    std::map<std::size_t, int> ids;
    for (std::size_t i = 0; i < buses_.size(); ++i) {
      auto root = find(i);
      auto [it, inserted] = ids.emplace(root, static_cast<int>(ids.size()));
      comp[i] = it->second;
    }
    return comp;
  }

  // Structural equality; `rel_tol` applies to every floating-point field.
  bool equivalent(const Network& o, double rel_tol = 0.0) const {
    auto near = [rel_tol](double a, double b) {
      if (a == b) return true;
      if (std::isinf(a) || std::isinf(b)) return false;
      return std::abs(a - b) <= rel_tol * std::max(std::abs(a), std::abs(b));
    };
    if (name_ != o.name_ || !near(base_mva_, o.base_mva_) || slack_bus_ != o.slack_bus_) return false;
    if (buses_.size() != o.buses_.size() || branches_.size() != o.branches_.size() ||
        generators_.size() != o.generators_.size())
      return false;
    for (std::size_t i = 0; i < buses_.size(); ++i) {
      const auto &a = buses_[i], &b = o.buses_[i];
      if (a.id != b.id || !near(a.v_min, b.v_min) || !near(a.v_max, b.v_max) ||
          !near(a.p_load, b.p_load) || !near(a.q_load, b.q_load))
        return false;
    }
    for (std::size_t i = 0; i < branches_.size(); ++i) {
      const auto &a = branches_[i], &b = o.branches_[i];
      if (a.from_bus != b.from_bus || a.to_bus != b.to_bus || a.status != b.status ||
          a.ordinal != b.ordinal || !near(a.resistance, b.resistance) ||
          !near(a.reactance, b.reactance) || !near(a.s_max, b.s_max))
        return false;
    }
    for (std::size_t i = 0; i < generators_.size(); ++i) {
      const auto &a = generators_[i], &b = o.generators_[i];
      if (a.id != b.id || a.bus != b.bus || !near(a.p_min, b.p_min) || !near(a.p_max, b.p_max) ||
          !near(a.q_min, b.q_min) || !near(a.q_max, b.q_max) || !near(a.s_max, b.s_max) ||
          !near(a.p_set, b.p_set) || a.v_set.has_value() != b.v_set.has_value() ||
          (a.v_set && !near(*a.v_set, *b.v_set)))
        return false;
    }
    return true;
  }

 private:
  void assign_ordinals() {
    std::map<std::pair<BusId, BusId>, int> seen;
    for (auto& br : branches_) br.ordinal = seen[{br.from_bus, br.to_bus}]++;
  }

  void validate() {
    std::vector<std::string> errors;
    if (!(base_mva_ > 0.0)) errors.push_back("base_mva must be positive");
    if (buses_.empty()) errors.push_back("network has no buses");
    if (index_.size() != buses_.size()) errors.push_back("duplicate bus ids");

    for (const auto& b : buses_) {
      const std::string who = "bus " + std::to_string(b.id);
      if (!(b.v_min > 0.0 && b.v_min <= b.v_max))
        errors.push_back(who + ": require 0 < v_min <= v_max");
      if (b.p_load < 0.0) errors.push_back(who + ": negative p_load");
    }
    for (std::size_t k = 0; k < branches_.size(); ++k) {
      const auto& br = branches_[k];
      const std::string who = "branch " + std::to_string(k) + " (" + branch_label(br) + ")";
      if (!has_bus(br.from_bus))
        errors.push_back(who + ": from_bus " + std::to_string(br.from_bus) + " does not exist");
      if (!has_bus(br.to_bus))
        errors.push_back(who + ": to_bus " + std::to_string(br.to_bus) + " does not exist");
      if (br.from_bus == br.to_bus) errors.push_back(who + ": from_bus equals to_bus");
      if (!(br.reactance != 0.0) || !std::isfinite(br.reactance))
        errors.push_back(who + ": reactance must be nonzero");
      if (!(br.s_max > 0.0)) errors.push_back(who + ": s_max must be positive");
    }
    std::map<int, int> gen_ids;
    for (const auto& g : generators_) {
      const std::string who = "generator " + std::to_string(g.id);
      if (gen_ids[g.id]++ == 1) errors.push_back(who + ": duplicate id");
      if (!has_bus(g.bus))
        errors.push_back(who + ": bus " + std::to_string(g.bus) + " does not exist");
      if (!(g.p_min <= g.p_max)) errors.push_back(who + ": p_min > p_max");
      if (!(g.q_min <= g.q_max)) errors.push_back(who + ": q_min > q_max");
    }
    if (slack_bus_ && !has_bus(*slack_bus_))
      errors.push_back("slack bus " + std::to_string(*slack_bus_) + " does not exist");

    if (!errors.empty())
      throw Error(ErrorCode::validation, "network '" + name_ + "' failed validation", errors);

    auto comp = components();
    if (!comp.empty() && *std::max_element(comp.begin(), comp.end()) > 0)
      warnings_.push_back("existing branches do not connect all buses");
  }

  std::string name_;
  double base_mva_;
  std::vector<Bus> buses_;
  std::vector<Branch> branches_;
  std::vector<Generator> generators_;
  std::optional<BusId> slack_bus_;
  std::unordered_map<BusId, std::size_t> index_;
  std::vector<std::string> warnings_;
};

/// Returns a network whose branches are the existing ones plus every candidate
/// with alpha = 1 (keys are candidate positions 0..|NB|-1). Built candidates
/// become existing branches tagged with their origin.
inline Network apply_topology(const Network& net, const std::map<std::size_t, bool>& alpha) {
  const auto cands = net.candidate_indices();
  std::vector<std::string> problems;
  for (std::size_t c = 0; c < cands.size(); ++c)
    if (!alpha.count(c)) problems.push_back("missing alpha for candidate " + std::to_string(c));
  for (const auto& [key, _] : alpha)
    if (key >= cands.size()) problems.push_back("alpha key " + std::to_string(key) + " is not a candidate");
  if (!problems.empty())
    throw Error(ErrorCode::usage, "alpha does not cover the candidate set", problems);

  std::vector<Branch> branches;
  std::size_t c = 0;
  for (const auto& br : net.branches()) {
    if (!br.is_candidate()) {
      branches.push_back(br);
      continue;
    }
    if (alpha.at(c)) {
      Branch built = br;
      built.status = BranchStatus::existing;
      built.built_from_candidate = c;
      branches.push_back(built);
    }
    ++c;
  }
  return Network(net.name(), net.base_mva(),
                 std::vector<Bus>(net.buses().begin(), net.buses().end()), std::move(branches),
                 std::vector<Generator>(net.generators().begin(), net.generators().end()),
                 net.designated_slack());
}

inline Network apply_topology(const Network& net, const std::vector<bool>& alpha) {
  std::map<std::size_t, bool> m;
  for (std::size_t i = 0; i < alpha.size(); ++i) m[i] = alpha[i];
  return apply_topology(net, m);
}

}  // namespace ecogrid
