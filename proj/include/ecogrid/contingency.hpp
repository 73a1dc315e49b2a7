#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <ostream>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "ecogrid/error.hpp"
#include "ecogrid/grid_model.hpp"
#include "ecogrid/powerflow.hpp"

namespace ecogrid {

enum class DispatchPolicy {
  fixed_dispatch,    // base generation held, slack balances; islanding skips the scenario
  redispatch_slack,  // islands are dropped, slack picks up the lost injection, remainder is screened
};

struct ScenarioResult {
  bool islanded = false;
  bool unsolved = false;
  std::vector<BranchOverload> overloads;

  double worst_excess() const {
    double w = 0.0;
    for (const auto& o : overloads) w = std::max(w, o.flow - o.limit);
    return w;
  }
};

struct WorstScenario {
  std::vector<std::size_t> outaged;  // branch indices
  std::vector<std::string> labels;
  double overload_mw = 0.0;          // largest |flow| - limit in the scenario
};

struct ContingencyReport {
  int x = 0;
  std::uint64_t scenarios = 0;
  std::uint64_t islanded_scenarios = 0;
  std::uint64_t unsolved_scenarios = 0;
  std::uint64_t violation_count = 0;  // overloaded-branch instances summed over scenarios
  std::vector<WorstScenario> worst;
};

struct ContingencyOptions {
  unsigned jobs = 0;  // 0 = hardware concurrency
  std::size_t top_k = 10;
};

inline std::uint64_t binomial(std::uint64_t n, std::uint64_t k) {
  if (k > n) return 0;
  k = std::min(k, n - k);
  std::uint64_t r = 1;
  for (std::uint64_t i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

/// One outage scenario under the DC model with the dispatch held fixed.
inline ScenarioResult evaluate_scenario(const Network& net, std::span<const double> p_gen_mw,
                                        const std::vector<std::size_t>& outaged, DispatchPolicy policy) {
  ScenarioResult res;
  const auto comp = net.components_excluding(outaged);
  const int main = comp[net.bus_index(net.slack_bus())];
  for (std::size_t i = 0; i < net.buses().size() && !res.islanded; ++i)
    if (comp[i] != main && net.buses()[i].p_load > 0.0) res.islanded = true;
  for (std::size_t g = 0; g < net.generators().size() && !res.islanded; ++g)
    if (comp[net.bus_index(net.generators()[g].bus)] != main && p_gen_mw[g] > 0.0) res.islanded = true;
  if (res.islanded && policy == DispatchPolicy::fixed_dispatch) return res;

  DcOptions opt;
  opt.slack_absorbs_imbalance = true;
  opt.outaged = outaged;
  try {
    const auto sol = solve_dc(net, p_gen_mw, opt);
    auto vs = check_limits(net, sol);
    res.overloads = std::move(vs.branch_overloads);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::singular_matrix) throw;
    res.unsolved = true;
  }
  return res;
}

/// Every x-subset of in-service branches, in lexicographic order.
inline std::vector<std::vector<std::size_t>> outage_sets(const std::vector<std::size_t>& active, int x) {
  std::vector<std::vector<std::size_t>> out;
  const auto n = active.size();
  if (x <= 0 || static_cast<std::size_t>(x) > n) return out;
  std::vector<std::size_t> idx(static_cast<std::size_t>(x));
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  while (true) {
    std::vector<std::size_t> set;
    for (auto i : idx) set.push_back(active[i]);
    out.push_back(std::move(set));
    std::size_t i = idx.size();
    while (i > 0 && idx[i - 1] == n - idx.size() + i - 1) --i;
    if (i == 0) break;
    ++idx[i - 1];
    for (std::size_t j = i; j < idx.size(); ++j) idx[j] = idx[j - 1] + 1;
  }
  return out;
}

inline ContingencyReport run_contingencies(const Network& net, std::span<const double> p_gen_mw, int x,
                                           DispatchPolicy policy = DispatchPolicy::fixed_dispatch,
                                           const ContingencyOptions& opt = {}) {
  const auto active = net.existing_indices();
  if (x < 1 || static_cast<std::size_t>(x) >= active.size())
    throw Error(ErrorCode::usage, "outage depth must satisfy 1 <= x < " + std::to_string(active.size()));
  {
    const auto base = evaluate_scenario(net, p_gen_mw, {}, DispatchPolicy::fixed_dispatch);
    if (base.islanded || base.unsolved)
      throw Error(ErrorCode::infeasible, "base case does not solve (islanded or singular)");
  }

  const auto sets = outage_sets(active, x);
  std::vector<ScenarioResult> results(sets.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < sets.size();)
      results[i] = evaluate_scenario(net, p_gen_mw, sets[i], policy);
  };
  unsigned jobs = opt.jobs ? opt.jobs : std::max(1U, std::thread::hardware_concurrency());
  jobs = static_cast<unsigned>(std::min<std::size_t>(jobs, std::max<std::size_t>(1, sets.size())));
  if (jobs <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned j = 0; j < jobs; ++j) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  ContingencyReport rep;
  rep.x = x;
  rep.scenarios = sets.size();
  std::vector<std::size_t> ranked;
  for (std::size_t i = 0; i < sets.size(); ++i) {
    const auto& r = results[i];
    if (r.islanded) ++rep.islanded_scenarios;
    if (r.unsolved) ++rep.unsolved_scenarios;
    if (r.islanded && policy == DispatchPolicy::fixed_dispatch) continue;
    rep.violation_count += r.overloads.size();
    if (!r.overloads.empty()) ranked.push_back(i);
  }
  std::stable_sort(ranked.begin(), ranked.end(), [&](std::size_t a, std::size_t b) {
    return results[a].worst_excess() > results[b].worst_excess();
  });
  if (ranked.size() > opt.top_k) ranked.resize(opt.top_k);
  for (auto i : ranked) {
    WorstScenario w;
    w.outaged = sets[i];
    for (auto k : sets[i]) w.labels.push_back(branch_label(net.branches()[k]));
    w.overload_mw = results[i].worst_excess();
    rep.worst.push_back(std::move(w));
  }
  return rep;
}

struct DesignContingencies {
  std::string label;
  std::size_t new_branches = 0;
  std::vector<ContingencyReport> reports;  // one per outage depth
};

struct ComparisonRow {
  std::string label;
  std::size_t new_branches = 0;
  std::vector<std::uint64_t> violations;  // aligned with ComparisonTable::depths
};

struct ComparisonTable {
  std::vector<int> depths;
  std::vector<ComparisonRow> rows;
};

inline ComparisonTable compare_designs(const std::vector<DesignContingencies>& designs) {
  ComparisonTable table;
  if (designs.empty()) return table;
  for (const auto& r : designs.front().reports) table.depths.push_back(r.x);
  for (const auto& d : designs) {
    std::vector<int> depths;
    for (const auto& r : d.reports) depths.push_back(r.x);
    if (depths != table.depths)
      throw Error(ErrorCode::usage, "design '" + d.label + "' was evaluated on a different range of outage depths");
    ComparisonRow row{d.label, d.new_branches, {}};
    for (const auto& r : d.reports) row.violations.push_back(r.violation_count);
    table.rows.push_back(std::move(row));
  }
  return table;
}

inline void write_comparison_csv(std::ostream& os, const ComparisonTable& t) {
  os << "design,new_branches";
  for (int x : t.depths) os << ",n-" << x << "_violations";
  os << '\n';
  for (const auto& r : t.rows) {
    std::string label = r.label;
    if (label.find_first_of(",\"\n") != std::string::npos) {
      std::string q = "\"";
      for (char c : label) q += c == '"' ? std::string("\"\"") : std::string(1, c);
      label = q + "\"";
    }
    os << label << ',' << r.new_branches;
    for (auto v : r.violations) os << ',' << v;
    os << '\n';
  }
}

}  // namespace ecogrid
