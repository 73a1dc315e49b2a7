#pragma once

#include <cmath>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ecogrid/contingency.hpp"
#include "ecogrid/design_opt.hpp"
#include "ecogrid/eco_metrics.hpp"
#include "ecogrid/error.hpp"
#include "ecogrid/powerflow.hpp"

namespace ecogrid {

using Json = nlohmann::ordered_json;

inline constexpr const char* kDesignFormat = "ecogrid-design/1";

namespace detail {
// JSON has no NaN/Inf; emit null.
inline Json num(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }
inline Json nums(const std::vector<double>& v) {
  Json a = Json::array();
  for (double x : v) a.push_back(num(x));
  return a;
}
inline Json scaled(const std::vector<double>& v, double k) {
  Json a = Json::array();
  for (double x : v) a.push_back(num(x * k));
  return a;
}
}  // namespace detail

inline Json to_json(const RobustnessReport& r) {
  return Json{{"tstp", detail::num(r.tstp)},
              {"dc", detail::num(r.dc)},
              {"asc", detail::num(r.asc)},
              {"ratio", detail::num(r.ratio)},
              {"r", detail::num(r.r)}};
}

inline Json to_json(const Network& net, const ViolationSet& vs) {
  Json j;
  j["branch_overloads"] = Json::array();
  for (const auto& o : vs.branch_overloads)
    j["branch_overloads"].push_back(
        {{"branch", branch_label(net.branches()[o.branch])}, {"index", o.branch}, {"flow", o.flow}, {"limit", o.limit}});
  j["voltage_violations"] = Json::array();
  for (const auto& v : vs.voltage_violations)
    j["voltage_violations"].push_back({{"bus", v.bus}, {"v", v.v}, {"bound", v.bound}});
  j["gen_violations"] = Json::array();
  for (const auto& g : vs.gen_violations)
    j["gen_violations"].push_back({{"gen", g.gen}, {"quantity", g.quantity}, {"value", g.value}, {"bound", g.bound}});
  return j;
}

inline Json to_json(const Network& net, const DcSolution& s) {
  Json j;
  j["model"] = "dc";
  j["slack_bus"] = s.slack_bus;
  j["slack_pickup_mw"] = s.slack_pickup_mw;
  Json buses = Json::array();
  for (std::size_t i = 0; i < net.buses().size(); ++i)
    buses.push_back({{"id", net.buses()[i].id}, {"theta_rad", s.theta[i]}, {"islanded", static_cast<bool>(s.islanded[i])}});
  j["buses"] = buses;
  Json br = Json::array();
  for (std::size_t k = 0; k < net.branches().size(); ++k)
    br.push_back({{"branch", branch_label(net.branches()[k])},
                  {"status", net.branches()[k].is_candidate() ? "candidate" : "existing"},
                  {"p_flow_mw", s.p_flow[k]}});
  j["branches"] = br;
  j["p_gen_mw"] = detail::nums(s.p_gen);
  return j;
}

inline Json to_json(const Network& net, const AcSolution& s) {
  const double base = net.base_mva();
  Json j;
  j["model"] = "ac";
  j["converged"] = s.converged;
  j["iterations"] = s.iterations;
  j["mismatch_pu"] = detail::num(s.mismatch);
  Json buses = Json::array();
  for (std::size_t i = 0; i < net.buses().size(); ++i)
    buses.push_back({{"id", net.buses()[i].id},
                     {"v_pu", detail::num(s.v_mag[i])},
                     {"theta_rad", detail::num(s.v_ang[i])},
                     {"p_loss_mw", detail::num(s.p_loss[i] * base)}});
  j["buses"] = buses;
  Json br = Json::array();
  for (std::size_t k = 0; k < net.branches().size(); ++k)
    br.push_back({{"branch", branch_label(net.branches()[k])},
                  {"p_from_mw", detail::num(s.p_flow[k] * base)},
                  {"q_from_mvar", detail::num(s.q_flow[k] * base)},
                  {"p_to_mw", detail::num(s.p_flow_to[k] * base)},
                  {"q_to_mvar", detail::num(s.q_flow_to[k] * base)}});
  j["branches"] = br;
  j["p_gen_mw"] = detail::scaled(s.p_gen, base);
  j["q_gen_mvar"] = detail::scaled(s.q_gen, base);
  return j;
}

inline Json to_json(const ContingencyReport& r) {
  Json worst = Json::array();
  for (const auto& w : r.worst) worst.push_back({{"outaged", w.labels}, {"overload_mw", w.overload_mw}});
  return Json{{"x", r.x},
              {"scenarios", r.scenarios},
              {"islanded_scenarios", r.islanded_scenarios},
              {"unsolved_scenarios", r.unsolved_scenarios},
              {"violation_count", r.violation_count},
              {"worst", worst}};
}

inline Json to_json(const ComparisonTable& t) {
  Json rows = Json::array();
  for (const auto& r : t.rows) {
    Json v;
    for (std::size_t i = 0; i < t.depths.size(); ++i) v["n-" + std::to_string(t.depths[i])] = r.violations[i];
    rows.push_back({{"design", r.label}, {"new_branches", r.new_branches}, {"violations", v}});
  }
  return Json{{"depths", t.depths}, {"rows", rows}};
}

inline Json alpha_json(const std::vector<bool>& a) {
  Json j = Json::array();
  for (bool b : a) j.push_back(b ? 1 : 0);
  return j;
}

/// Design report; `wall_time` is only written when asked for, so that reports
/// from identical runs compare byte for byte.
inline Json to_json(const Network& net, const DesignSolution& s, const NlpSettings& settings,
                    std::uint64_t seed, bool include_timing = false) {
  Json j;
  j["format"] = kDesignFormat;
  j["case"] = net.name();
  j["model"] = "dc";
  j["status"] = to_string(s.status);
  j["optimal_r"] = s.status == DesignStatus::infeasible ? Json(nullptr) : detail::num(s.report.r);
  j["new_branches"] = s.new_branches;
  j["candidates"] = s.candidates;
  j["alpha"] = alpha_json(s.alpha);
  j["p_gen_mw"] = detail::nums(s.p_gen);
  if (!s.p_gen.empty()) j["report"] = to_json(s.report);
  Json tops = Json::array();
  for (const auto& t : s.topologies) {
    std::vector<std::string> built;
    for (std::size_t i = 0; i < t.alpha.size(); ++i)
      if (t.alpha[i]) built.push_back(s.candidates[i]);
    tops.push_back({{"alpha", alpha_json(t.alpha)}, {"new_branches", built}, {"status", t.status}, {"r", detail::num(t.r)}});
  }
  j["topologies"] = tops;
  j["settings"] = {{"tolerance", settings.tolerance},
                   {"time_limit", settings.time_limit},
                   {"multistart", settings.multistart},
                   {"seed", seed}};
  if (include_timing) j["time_sec"] = s.wall_time;
  return j;
}

/// Reads back the parts of a design report needed to re-apply it.
struct StoredDesign {
  std::vector<bool> alpha;
  std::vector<std::string> new_branches;
  std::vector<double> p_gen;
  std::string status;
};

inline StoredDesign design_from_json(const nlohmann::json& j) {
  if (!j.is_object() || j.value("format", std::string{}) != kDesignFormat)
    throw Error(ErrorCode::parse, std::string("design report must have format \"") + kDesignFormat + "\"");
  StoredDesign d;
  try {
    for (const auto& a : j.at("alpha")) d.alpha.push_back(a.get<int>() != 0);
    d.new_branches = j.at("new_branches").get<std::vector<std::string>>();
    for (const auto& p : j.at("p_gen_mw")) d.p_gen.push_back(p.is_null() ? 0.0 : p.get<double>());
    d.status = j.at("status").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::parse, std::string("malformed design report: ") + e.what());
  }
  return d;
}

}  // namespace ecogrid
