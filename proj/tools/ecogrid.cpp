#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ecogrid/ecogrid.hpp"
#include "ecogrid/log.hpp"

namespace {

using namespace ecogrid;

constexpr int kExitDomain = 1;
constexpr int kExitUsage = 2;

int exit_code_for(ErrorCode c) {
  switch (c) {
    case ErrorCode::infeasible:
    case ErrorCode::degenerate_network:
    case ErrorCode::singular_matrix:
    case ErrorCode::topology:
      return kExitDomain;
    default:
      return kExitUsage;
  }
}

void emit(const std::string& text, const std::string& path) {
  if (path.empty() || path == "-") {
    std::cout << text;
    std::cout.flush();
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::io, "cannot write '" + path + "'");
  out << text;
  if (!out) throw Error(ErrorCode::io, "write failed for '" + path + "'");
}

std::string dump(const Json& j) { return j.dump(2) + "\n"; }

struct LoadedDesign {
  StoredDesign stored;
  std::string label;
};

LoadedDesign read_design(const std::string& path, const Network& net) {
  const std::string text = detail::read_file(path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::parse, path + ":" + std::to_string(detail::line_of_offset(text, e.byte)) +
                                      ": invalid JSON in design report");
  }
  LoadedDesign d{design_from_json(j), std::filesystem::path(path).stem().string()};
  if (d.stored.alpha.size() != net.candidate_indices().size())
    throw Error(ErrorCode::usage, path + ": design has " + std::to_string(d.stored.alpha.size()) +
                                      " candidate decisions but the case has " +
                                      std::to_string(net.candidate_indices().size()));
  if (d.stored.status == "infeasible" || d.stored.p_gen.size() != net.generators().size())
    throw Error(ErrorCode::usage, path + ": design report carries no usable dispatch for this case");
  return d;
}

std::vector<bool> no_build(const Network& net) { return std::vector<bool>(net.candidate_indices().size(), false); }

std::vector<double> setpoints(const Network& net) {
  std::vector<double> p;
  for (const auto& g : net.generators()) p.push_back(g.p_set * net.base_mva());
  return p;
}

Network load(const std::string& path, const std::string& format) {
  Network net = format == "auto"       ? load_case(path)
                : format == "matpower" ? load_case(path, CaseFormat::matpower)
                                       : load_case(path, CaseFormat::native_json);
  for (const auto& w : net.warnings()) log::warn(path + ": " + w);
  return net;
}

struct Common {
  std::string case_path;
  std::string format = "auto";
  std::string out;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("case", c.case_path, "Case file (.json native, .m MATPOWER subset)")->required();
  cmd->add_option("--format", c.format, "Case format")
      ->check(CLI::IsMember({"auto", "json", "matpower"}))
      ->capture_default_str();
}

int run_pf(const Common& c, const std::string& model, const std::string& design_path) {
  const Network net = load(c.case_path, c.format);
  std::vector<bool> alpha = no_build(net);
  std::vector<double> p = setpoints(net);
  if (!design_path.empty()) {
    auto d = read_design(design_path, net);
    alpha = d.stored.alpha;
    p = d.stored.p_gen;
  }
  const Network topo = apply_topology(net, alpha);
  Json out;
  ViolationSet vs;
  bool ok = true;
  if (model == "dc") {
    DcOptions opt;
    opt.slack_absorbs_imbalance = true;
    const auto sol = solve_dc(topo, p, opt);
    vs = check_limits(topo, sol);
    out["solution"] = to_json(topo, sol);
  } else {
    const auto sol = solve_ac(topo, p);
    ok = sol.converged;
    out["solution"] = to_json(topo, sol);
    if (sol.converged) {
      vs = check_limits(topo, sol);
      const auto losses = compute_losses(sol, topo);
      out["losses"] = {{"total_formula_mw", losses.total_formula_mw},
                       {"total_i2r_mw", losses.total_i2r_mw},
                       {"balance_mw", losses.balance_mw}};
    }
  }
  out["violations"] = to_json(topo, vs);
  emit(dump(out), c.out);
  if (!ok) log::error("AC power flow did not converge");
  return ok && vs.empty() ? 0 : kExitDomain;
}

int run_robustness(const Common& c, const std::string& dispatch, const std::string& design_path,
                   const std::string& model, const std::string& efm_csv) {
  const Network net = load(c.case_path, c.format);
  std::vector<bool> alpha = no_build(net);
  std::vector<double> p;
  if (dispatch == "design") {
    if (design_path.empty()) throw Error(ErrorCode::usage, "--dispatch design needs --design <report.json>");
    auto d = read_design(design_path, net);
    alpha = d.stored.alpha;
    p = d.stored.p_gen;
  } else {
    if (!design_path.empty()) alpha = read_design(design_path, net).stored.alpha;
    p = base_dispatch(net);
  }
  const Network topo = apply_topology(net, alpha);
  OperatingPoint op;
  if (model == "dc") {
    DcOptions opt;
    opt.slack_absorbs_imbalance = true;
    const auto sol = solve_dc(topo, p, opt);
    if (sol.any_islanded()) throw Error(ErrorCode::topology, "network is split; some buses are islanded");
    op = to_operating_point(topo, sol);
  } else {
    const auto sol = solve_ac(topo, p);
    if (!sol.converged) throw Error(ErrorCode::infeasible, "AC power flow did not converge");
    op = to_operating_point(topo, sol);
  }
  const auto efm = build_ecoflow_matrix(topo, op);
  if (!efm_csv.empty()) {
    std::ostringstream os;
    write_efm_csv(os, efm);
    emit(os.str(), efm_csv);
  }
  emit(dump(to_json(robustness(efm))), c.out);
  return 0;
}

struct OptimizeArgs {
  std::string model = "dc";
  std::optional<int> budget;
  NlpSettings nlp;
  std::uint64_t seed = 0;
  unsigned jobs = 0;
  bool timing = false;
};

int run_optimize(const Common& c, const OptimizeArgs& a) {
  DesignProblem prob{load(c.case_path, c.format), DesignModel::dc, std::nullopt, NlpSettings{}, 0, 0};
  prob.model = a.model == "dc" ? DesignModel::dc : DesignModel::ac_check;
  prob.candidate_budget = a.budget;
  prob.nlp = a.nlp;
  prob.seed = a.seed;
  prob.jobs = a.jobs;
  if (prob.nlp.tolerance <= 0.0) throw Error(ErrorCode::usage, "--tol must be positive");
  if (prob.nlp.multistart < 1) throw Error(ErrorCode::usage, "--multistart must be at least 1");
  if (prob.nlp.time_limit <= 0.0) throw Error(ErrorCode::usage, "--time-limit must be positive");

  log::info("enumerating " + std::to_string(std::size_t{1} << prob.net.candidate_indices().size()) + " topologies");
  const auto sol = optimize_design(prob);
  Json report = to_json(prob.net, sol, prob.nlp, prob.seed, a.timing);
  if (prob.model == DesignModel::ac_check && sol.status == DesignStatus::solved) {
    const auto topo = apply_topology(prob.net, sol.alpha);
    const auto ac = check_ac_feasibility(prob.net, sol);
    report["ac_check"] = {{"converged", ac.converged},
                          {"iterations", ac.ac.iterations},
                          {"mismatch_pu", detail::num(ac.ac.mismatch)},
                          {"feasible", ac.converged && ac.violations.empty()},
                          {"violations", to_json(topo, ac.violations)}};
  }
  emit(dump(report), c.out);
  if (sol.status == DesignStatus::infeasible) {
    log::error("no candidate topology admits a feasible dispatch");
    return kExitDomain;
  }
  if (sol.status == DesignStatus::timeout) log::warn("time limit reached; reporting the incumbent");
  return 0;
}

struct ContingencyArgs {
  std::vector<int> depths{1};
  std::string policy = "fixed";
  std::vector<std::string> designs;
  std::string out_format = "json";
  std::string output;
  unsigned jobs = 0;
  std::size_t top_k = 10;
};

DispatchPolicy policy_of(const std::string& s) {
  return s == "fixed" ? DispatchPolicy::fixed_dispatch : DispatchPolicy::redispatch_slack;
}

DesignContingencies sweep(const Network& net, const std::vector<bool>& alpha, const std::vector<double>& p,
                          const std::string& label, const ContingencyArgs& a) {
  const Network topo = apply_topology(net, alpha);
  DesignContingencies d{label, static_cast<std::size_t>(std::count(alpha.begin(), alpha.end(), true)), {}};
  for (int x : a.depths) {
    log::info(label + ": N-" + std::to_string(x));
    d.reports.push_back(run_contingencies(topo, p, x, policy_of(a.policy), {a.jobs, a.top_k}));
  }
  return d;
}

int run_contingency(const Common& c, const ContingencyArgs& a) {
  const Network net = load(c.case_path, c.format);
  if (a.designs.size() > 1) throw Error(ErrorCode::usage, "contingency takes at most one --design; use compare");
  std::vector<bool> alpha = no_build(net);
  std::vector<double> p = base_dispatch(net);
  std::string label = "original";
  if (!a.designs.empty()) {
    auto d = read_design(a.designs.front(), net);
    alpha = d.stored.alpha;
    p = d.stored.p_gen;
    label = d.label;
  }
  const auto res = sweep(net, alpha, p, label, a);
  if (a.out_format == "csv") {
    std::ostringstream os;
    os << "x,scenarios,islanded_scenarios,unsolved_scenarios,violations\n";
    for (const auto& r : res.reports)
      os << r.x << ',' << r.scenarios << ',' << r.islanded_scenarios << ',' << r.unsolved_scenarios << ','
         << r.violation_count << '\n';
    emit(os.str(), a.output);
  } else {
    Json j;
    j["design"] = res.label;
    j["new_branches"] = res.new_branches;
    j["policy"] = a.policy;
    j["reports"] = Json::array();
    for (const auto& r : res.reports) j["reports"].push_back(to_json(r));
    emit(dump(j), a.output);
  }
  return 0;
}

int run_compare(const Common& c, const ContingencyArgs& a) {
  const Network net = load(c.case_path, c.format);
  std::vector<DesignContingencies> all;
  all.push_back(sweep(net, no_build(net), base_dispatch(net), "original", a));
  for (const auto& path : a.designs) {
    auto d = read_design(path, net);
    all.push_back(sweep(net, d.stored.alpha, d.stored.p_gen, d.label, a));
  }
  const auto table = compare_designs(all);
  if (a.out_format == "csv") {
    std::ostringstream os;
    write_comparison_csv(os, table);
    emit(os.str(), a.output);
  } else {
    emit(dump(to_json(table)), a.output);
  }
  return 0;
}

int run_curve(int samples, const std::string& out) {
  std::ostringstream os;
  os << "ratio,r\n";
  char buf[96];
  for (const auto& [x, r] : robustness_curve(samples)) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g\n", x, r);
    os << buf;
  }
  emit(os.str(), out);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Robust transmission topology design from ecological flow metrics"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "ecogrid 0.1.0");

  Common common;

  auto* pf = app.add_subcommand("pf", "Solve a power flow at the case setpoints and check limits");
  add_common(pf, common);
  std::string pf_model = "dc", pf_design;
  pf->add_option("--model", pf_model, "Power-flow model")->check(CLI::IsMember({"dc", "ac"}))->capture_default_str();
  pf->add_option("--design", pf_design, "Design report whose topology and dispatch are used");
  pf->add_option("-o,--output", common.out, "Write JSON here instead of stdout");

  auto* rob = app.add_subcommand("robustness", "Build the ecological flow matrix and report R");
  add_common(rob, common);
  std::string dispatch = "base", rob_design, rob_model = "dc", efm_csv;
  rob->add_option("--dispatch", dispatch, "base: case setpoints scaled to the load; design: dispatch from --design")
      ->check(CLI::IsMember({"base", "design"}))
      ->capture_default_str();
  rob->add_option("--design", rob_design, "Design report (topology, and dispatch with --dispatch design)");
  rob->add_option("--model", rob_model, "Power-flow model for the operating point")
      ->check(CLI::IsMember({"dc", "ac"}))
      ->capture_default_str();
  rob->add_option("--efm-csv", efm_csv, "Also write the labeled flow matrix as CSV to this path ('-' for stdout)");
  rob->add_option("-o,--output", common.out, "Write the JSON report here instead of stdout");

  auto* opt = app.add_subcommand("optimize", "Choose the candidate branches that maximize R");
  add_common(opt, common);
  OptimizeArgs oa;
  opt->add_option("--model", oa.model, "dc, or ac-check to also run the AC feasibility check")
      ->check(CLI::IsMember({"dc", "ac-check"}))
      ->capture_default_str();
  opt->add_option("--budget", oa.budget, "Maximum number of new branches");
  opt->add_option("--tol", oa.nlp.tolerance, "Inner solver tolerance")->capture_default_str();
  opt->add_option("--time-limit", oa.nlp.time_limit, "Global time budget in seconds")->capture_default_str();
  opt->add_option("--multistart", oa.nlp.multistart, "Starts per topology")->capture_default_str();
  opt->add_option("--seed", oa.seed, "Seed for the multistart generator")->capture_default_str();
  opt->add_option("--jobs", oa.jobs, "Worker threads (0 = all cores)")->capture_default_str();
  opt->add_flag("--timing", oa.timing, "Include wall time in the report (breaks byte-identical output)");
  opt->add_option("--out,-o", common.out, "Write the design report here instead of stdout");

  ContingencyArgs ca;
  auto* con = app.add_subcommand("contingency", "Count branch overloads over all N-x outages");
  add_common(con, common);
  con->add_option("--x", ca.depths, "Outage depths, e.g. 1 or 1,2,3")
      ->delimiter(',')
      ->check(CLI::Range(1, 3))
      ->capture_default_str();
  con->add_option("--policy", ca.policy, "fixed: hold the dispatch; redispatch: slack picks up islanded units")
      ->check(CLI::IsMember({"fixed", "redispatch"}))
      ->capture_default_str();
  con->add_option("--design", ca.designs, "Design report to evaluate instead of the unbuilt network");
  con->add_option("--out", ca.out_format, "Output format")->check(CLI::IsMember({"csv", "json"}))->capture_default_str();
  con->add_option("-o,--output", ca.output, "Write here instead of stdout");
  con->add_option("--top-k", ca.top_k, "Worst scenarios listed per depth")->capture_default_str();
  con->add_option("--jobs", ca.jobs, "Worker threads (0 = all cores)")->capture_default_str();

  auto* cmp = app.add_subcommand("compare", "Tabulate N-x violations for the original network and designs");
  add_common(cmp, common);
  cmp->add_option("--design", ca.designs, "Design report (repeatable)");
  cmp->add_option("--x", ca.depths, "Outage depths, e.g. 1,2,3")
      ->delimiter(',')
      ->check(CLI::Range(1, 3))
      ->capture_default_str();
  cmp->add_option("--policy", ca.policy, "Dispatch policy")
      ->check(CLI::IsMember({"fixed", "redispatch"}))
      ->capture_default_str();
  cmp->add_option("--out", ca.out_format, "Output format")->check(CLI::IsMember({"csv", "json"}))->capture_default_str();
  cmp->add_option("-o,--output", ca.output, "Write here instead of stdout");
  cmp->add_option("--jobs", ca.jobs, "Worker threads (0 = all cores)")->capture_default_str();

  auto* curve = app.add_subcommand("curve", "Tabulate r(x) = -x ln x as CSV");
  int samples = 100;
  curve->add_option("--samples", samples, "Number of points on (0, 1]")->capture_default_str();
  curve->add_option("-o,--output", common.out, "Write here instead of stdout");

  auto* conv = app.add_subcommand("convert", "Rewrite a case in the native JSON format");
  add_common(conv, common);
  conv->add_option("-o,--output", common.out, "Write here instead of stdout");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitUsage;
  }

  try {
    if (*pf) return run_pf(common, pf_model, pf_design);
    if (*rob) return run_robustness(common, dispatch, rob_design, rob_model, efm_csv);
    if (*opt) return run_optimize(common, oa);
    if (*con) return run_contingency(common, ca);
    if (*cmp) return run_compare(common, ca);
    if (*curve) return run_curve(samples, common.out);
    if (*conv) {
      emit(case_to_json(load(common.case_path, common.format)).dump(2) + "\n", common.out);
      return 0;
    }
  } catch (const Error& e) {
    std::cerr << "ecogrid: " << e.what() << '\n';
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    std::cerr << "ecogrid: internal error: " << e.what() << '\n';
    return kExitUsage;
  }
  return kExitUsage;
}
