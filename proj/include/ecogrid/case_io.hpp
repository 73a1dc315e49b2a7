#pragma once

#include <cmath>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ecogrid/error.hpp"
#include "ecogrid/grid_model.hpp"

namespace ecogrid {

inline constexpr const char* kCaseFormat = "ecogrid-case/1";

enum class CaseFormat { native_json, matpower };

namespace detail {

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::io, "cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline std::size_t line_of_offset(const std::string& text, std::size_t offset) {
  std::size_t line = 1;
  for (std::size_t i = 0; i < offset && i < text.size(); ++i)
    if (text[i] == '\n') ++line;
  return line;
}

// Field readers for the native format. `where` is a JSON-pointer-like context.
inline double number_field(const nlohmann::json& obj, const char* key, const std::string& where,
                           std::optional<double> fallback = std::nullopt) {
  auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) {
    if (fallback) return *fallback;
    throw Error(ErrorCode::parse, where + "." + key + ": required number is missing");
  }
  if (!it->is_number()) throw Error(ErrorCode::parse, where + "." + key + ": expected a number");
  return it->get<double>();
}

inline int int_field(const nlohmann::json& obj, const char* key, const std::string& where) {
  auto it = obj.find(key);
  if (it == obj.end() || !it->is_number_integer())
    throw Error(ErrorCode::parse, where + "." + key + ": required integer is missing");
  return it->get<int>();
}

// Limits use null for "unlimited".
inline double limit_field(const nlohmann::json& obj, const char* key, const std::string& where,
                          double unlimited) {
  auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) return unlimited;
  if (!it->is_number()) throw Error(ErrorCode::parse, where + "." + key + ": expected a number or null");
  return it->get<double>();
}

inline nlohmann::json limit_json(double v) {
  return std::isinf(v) ? nlohmann::json(nullptr) : nlohmann::json(v);
}

inline Network parse_native(const std::string& text, const std::string& origin) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::parse, origin + ":" + std::to_string(line_of_offset(text, e.byte)) +
                                      ": " + e.what());
  }
  if (!doc.is_object()) throw Error(ErrorCode::parse, origin + ": top level must be an object");
  if (doc.value("format", std::string{}) != kCaseFormat)
    throw Error(ErrorCode::parse,
                origin + ": missing or unsupported \"format\" (expected \"" + kCaseFormat + "\")");

  const double base = number_field(doc, "base_mva", "$");
  if (!(base > 0.0)) throw Error(ErrorCode::validation, "base_mva must be positive");
  const std::string name = doc.value("name", std::string{"case"});
  std::optional<BusId> slack;
  if (doc.contains("slack_bus") && !doc["slack_bus"].is_null()) slack = int_field(doc, "slack_bus", "$");

  for (const char* key : {"buses", "generators", "branches"})
    if (!doc.contains(key) || !doc[key].is_array())
      throw Error(ErrorCode::parse, std::string("$.") + key + ": required array is missing");

  std::vector<Bus> buses;
  for (std::size_t i = 0; i < doc["buses"].size(); ++i) {
    const auto& j = doc["buses"][i];
    const std::string where = "$.buses[" + std::to_string(i) + "]";
    Bus b;
    b.id = int_field(j, "id", where);
    b.v_min = number_field(j, "v_min", where, 0.9);
    b.v_max = number_field(j, "v_max", where, 1.1);
    b.p_load = number_field(j, "p_load_mw", where, 0.0) / base;
    b.q_load = number_field(j, "q_load_mvar", where, 0.0) / base;
    buses.push_back(b);
  }

  std::vector<Generator> gens;
  for (std::size_t i = 0; i < doc["generators"].size(); ++i) {
    const auto& j = doc["generators"][i];
    const std::string where = "$.generators[" + std::to_string(i) + "]";
    Generator g;
    g.id = j.contains("id") ? int_field(j, "id", where) : static_cast<int>(i + 1);
    g.bus = int_field(j, "bus", where);
    g.p_min = number_field(j, "p_min_mw", where, 0.0) / base;
    g.p_max = number_field(j, "p_max_mw", where) / base;
    g.q_min = limit_field(j, "q_min_mvar", where, -kUnlimited) / base;
    g.q_max = limit_field(j, "q_max_mvar", where, kUnlimited) / base;
    g.s_max = limit_field(j, "s_max_mva", where, kUnlimited) / base;
    g.p_set = number_field(j, "p_set_mw", where, 0.0) / base;
    if (j.contains("v_set_pu") && !j["v_set_pu"].is_null()) g.v_set = number_field(j, "v_set_pu", where);
    gens.push_back(g);
  }

  // First pass: literal electrical data. Second pass resolves copy_from.
  struct Raw {
    BusId from, to;
    std::optional<double> r, x, s;
    BranchStatus status;
    std::optional<std::tuple<BusId, BusId, int>> copy;
  };
  std::vector<Raw> raw;
  for (std::size_t i = 0; i < doc["branches"].size(); ++i) {
    const auto& j = doc["branches"][i];
    const std::string where = "$.branches[" + std::to_string(i) + "]";
    Raw r{};
    r.from = int_field(j, "from", where);
    r.to = int_field(j, "to", where);
    const std::string status = j.value("status", std::string{"existing"});
    if (status == "existing") r.status = BranchStatus::existing;
    else if (status == "candidate") r.status = BranchStatus::candidate;
    else throw Error(ErrorCode::parse, where + ".status: expected \"existing\" or \"candidate\"");
    if (j.contains("r")) r.r = number_field(j, "r", where);
    if (j.contains("x")) r.x = number_field(j, "x", where);
    if (j.contains("s_max_mva")) r.s = limit_field(j, "s_max_mva", where, kUnlimited);
    if (j.contains("copy_from")) {
      const auto& c = j["copy_from"];
      if (!c.is_object()) throw Error(ErrorCode::parse, where + ".copy_from: expected an object");
      int ord = c.contains("ordinal") ? int_field(c, "ordinal", where + ".copy_from") : 0;
      r.copy = std::make_tuple(int_field(c, "from", where + ".copy_from"),
                               int_field(c, "to", where + ".copy_from"), ord);
    }
    raw.push_back(r);
  }

  std::vector<Branch> branches;
  std::map<std::pair<BusId, BusId>, int> ordinals;
  std::map<std::tuple<BusId, BusId, int>, std::size_t> by_key;
  for (std::size_t i = 0; i < raw.size(); ++i)
    by_key[{raw[i].from, raw[i].to, ordinals[{raw[i].from, raw[i].to}]++}] = i;

  for (std::size_t i = 0; i < raw.size(); ++i) {
    Raw r = raw[i];
    const std::string where = "$.branches[" + std::to_string(i) + "]";
    if (r.copy) {
      auto it = by_key.find(*r.copy);
      if (it == by_key.end() || it->second == i)
        throw Error(ErrorCode::validation, where + ".copy_from: referenced branch " +
                                               std::to_string(std::get<0>(*r.copy)) + "-" +
                                               std::to_string(std::get<1>(*r.copy)) + " not found");
      const Raw& src = raw[it->second];
      if (src.copy) throw Error(ErrorCode::validation, where + ".copy_from: chained copy_from is not supported");
      if (!r.r) r.r = src.r;
      if (!r.x) r.x = src.x;
      if (!r.s) r.s = src.s;
    }
    if (!r.x) throw Error(ErrorCode::parse, where + ".x: required number is missing");
    branches.push_back(make_branch(r.from, r.to, r.r.value_or(0.0), *r.x,
                                   r.s.value_or(kUnlimited) / base, r.status));
  }
  return Network(name, base, std::move(buses), std::move(branches), std::move(gens), slack);
}

// ---- MATPOWER subset -------------------------------------------------------

struct MatrixBlock {
  std::size_t line = 0;
  std::vector<std::pair<std::size_t, std::vector<double>>> rows;  // (line, values)
};

inline Network parse_matpower(const std::string& text, const std::string& origin) {
  std::map<std::string, MatrixBlock> blocks;
  std::map<std::string, double> scalars;
  std::string fname;

  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  MatrixBlock* open = nullptr;
  std::string open_name;
  auto fail = [&](const std::string& msg) {
    throw Error(ErrorCode::parse, origin + ":" + std::to_string(lineno) + ": " + msg);
  };
  auto parse_row = [&](const std::string& body) {
    std::vector<double> vals;
    std::string tok;
    std::istringstream ts(body);
    while (ts >> tok) {
      if (tok.back() == ',') tok.pop_back();
      if (tok.empty()) continue;
      try {
        std::size_t used = 0;
        double v = std::stod(tok, &used);
        if (used != tok.size()) fail("invalid number '" + tok + "' in mpc." + open_name);
        vals.push_back(v);
      } catch (const std::logic_error&) {
        if (tok == "Inf" || tok == "inf") vals.push_back(kUnlimited);
        else fail("invalid number '" + tok + "' in mpc." + open_name);
      }
    }
    if (!vals.empty()) open->rows.emplace_back(lineno, std::move(vals));
  };

  while (std::getline(in, line)) {
    ++lineno;
    if (auto pct = line.find('%'); pct != std::string::npos) line.erase(pct);
    if (open) {
      auto close = line.find(']');
      std::string body = close == std::string::npos ? line : line.substr(0, close);
      std::size_t start = 0;
      for (std::size_t semi; (semi = body.find(';', start)) != std::string::npos; start = semi + 1)
        parse_row(body.substr(start, semi - start));
      parse_row(body.substr(start));
      if (close != std::string::npos) open = nullptr;
      continue;
    }
    auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos) continue;
    std::string s = line.substr(first);
    if (s.rfind("function", 0) == 0) {
      fname = s.substr(s.find('=') == std::string::npos ? 8 : s.find('=') + 1);
      fname.erase(0, fname.find_first_not_of(" \t"));
      fname.erase(fname.find_last_not_of(" \t\r;") + 1);
      continue;
    }
    if (s.rfind("mpc.", 0) != 0) continue;
    auto eq = s.find('=');
    if (eq == std::string::npos) fail("expected '=' after " + s);
    std::string key = s.substr(4, eq - 4);
    key.erase(key.find_last_not_of(" \t") + 1);
    std::string rhs = s.substr(eq + 1);
    rhs.erase(0, rhs.find_first_not_of(" \t"));
    if (!rhs.empty() && rhs.front() == '[') {
      open_name = key;
      open = &blocks[key];
      open->line = lineno;
      std::string rest = rhs.substr(1);
      auto close = rest.find(']');
      std::string body = close == std::string::npos ? rest : rest.substr(0, close);
      std::size_t start = 0;
      for (std::size_t semi; (semi = body.find(';', start)) != std::string::npos; start = semi + 1)
        parse_row(body.substr(start, semi - start));
      parse_row(body.substr(start));
      if (close != std::string::npos) open = nullptr;
    } else if (!rhs.empty() && rhs.front() != '\'') {
      rhs.erase(rhs.find_last_not_of(" \t\r;") + 1);
      try {
        scalars[key] = std::stod(rhs);
      } catch (const std::logic_error&) {
        fail("invalid scalar for mpc." + key);
      }
    }
  }
  if (open) throw Error(ErrorCode::parse, origin + ": unterminated matrix mpc." + open_name);

  if (!scalars.count("baseMVA")) throw Error(ErrorCode::parse, origin + ": mpc.baseMVA is missing");
  const double base = scalars["baseMVA"];
  for (const char* req : {"bus", "gen", "branch"})
    if (!blocks.count(req)) throw Error(ErrorCode::parse, origin + ": mpc." + std::string(req) + " is missing");

  auto need = [&](const std::string& table, const std::pair<std::size_t, std::vector<double>>& row,
                  std::size_t cols) {
    if (row.second.size() < cols)
      throw Error(ErrorCode::parse, origin + ":" + std::to_string(row.first) + ": mpc." + table +
                                        " row needs at least " + std::to_string(cols) +
                                        " columns, got " + std::to_string(row.second.size()));
  };

  std::vector<Bus> buses;
  std::optional<BusId> slack;
  for (const auto& row : blocks["bus"].rows) {
    need("bus", row, 13);
    const auto& v = row.second;
    Bus b;
    b.id = static_cast<BusId>(v[0]);
    b.p_load = v[2] / base;
    b.q_load = v[3] / base;
    b.v_max = v[11];
    b.v_min = v[12];
    if (static_cast<int>(v[1]) == 3) slack = b.id;
    buses.push_back(b);
  }

  std::vector<Generator> gens;
  for (const auto& row : blocks["gen"].rows) {
    need("gen", row, 10);
    const auto& v = row.second;
    if (v[7] <= 0.0) continue;  // out of service
    Generator g;
    g.id = static_cast<int>(gens.size() + 1);
    g.bus = static_cast<BusId>(v[0]);
    g.p_set = v[1] / base;
    g.q_max = v[3] / base;
    g.q_min = v[4] / base;
    g.v_set = v[5];
    g.p_max = v[8] / base;
    g.p_min = v[9] / base;
    gens.push_back(g);
  }

  std::vector<Branch> branches;
  auto add_branches = [&](const std::string& table, BranchStatus status) {
    if (!blocks.count(table)) return;
    for (const auto& row : blocks[table].rows) {
      need(table, row, 11);
      const auto& v = row.second;
      if (v[10] <= 0.0) continue;
      const double rate = v[5] > 0.0 ? v[5] / base : kUnlimited;  // rateA = 0 means unlimited
      branches.push_back(make_branch(static_cast<BusId>(v[0]), static_cast<BusId>(v[1]), v[2],
                                     v[3], rate, status));
    }
  };
  add_branches("branch", BranchStatus::existing);
  add_branches("ne_branch", BranchStatus::candidate);
  add_branches("branch_ne", BranchStatus::candidate);

  return Network(fname.empty() ? "case" : fname, base, std::move(buses), std::move(branches),
                 std::move(gens), slack);
}

}  // namespace detail

inline CaseFormat detect_format(const std::string& path) {
  auto dot = path.rfind('.');
  if (dot != std::string::npos && path.substr(dot) == ".m") return CaseFormat::matpower;
  return CaseFormat::native_json;
}

inline Network parse_case(const std::string& text, CaseFormat format, const std::string& origin = "<memory>") {
  return format == CaseFormat::matpower ? detail::parse_matpower(text, origin)
                                        : detail::parse_native(text, origin);
}

inline Network load_case(const std::string& path, CaseFormat format) {
  return parse_case(detail::read_file(path), format, path);
}

inline Network load_case(const std::string& path) { return load_case(path, detect_format(path)); }

/// Native document; values are written back in MW / MVAr / MVA.
inline nlohmann::ordered_json case_to_json(const Network& net) {
  using detail::limit_json;
  const double base = net.base_mva();
  nlohmann::ordered_json doc;
  doc["format"] = kCaseFormat;
  doc["name"] = net.name();
  doc["base_mva"] = base;
  if (net.designated_slack()) doc["slack_bus"] = *net.designated_slack();
  doc["buses"] = nlohmann::ordered_json::array();
  for (const auto& b : net.buses())
    doc["buses"].push_back({{"id", b.id},
                            {"v_min", b.v_min},
                            {"v_max", b.v_max},
                            {"p_load_mw", b.p_load * base},
                            {"q_load_mvar", b.q_load * base}});
  doc["generators"] = nlohmann::ordered_json::array();
  for (const auto& g : net.generators()) {
    nlohmann::ordered_json j{{"id", g.id},
                             {"bus", g.bus},
                             {"p_min_mw", g.p_min * base},
                             {"p_max_mw", g.p_max * base},
                             {"q_min_mvar", limit_json(g.q_min * base)},
                             {"q_max_mvar", limit_json(g.q_max * base)},
                             {"s_max_mva", limit_json(g.s_max * base)},
                             {"p_set_mw", g.p_set * base}};
    j["v_set_pu"] = g.v_set ? nlohmann::ordered_json(*g.v_set) : nlohmann::ordered_json(nullptr);
    doc["generators"].push_back(j);
  }
  doc["branches"] = nlohmann::ordered_json::array();
  for (const auto& br : net.branches())
    doc["branches"].push_back({{"from", br.from_bus},
                               {"to", br.to_bus},
                               {"r", br.resistance},
                               {"x", br.reactance},
                               {"s_max_mva", limit_json(br.s_max * base)},
                               {"status", br.is_candidate() ? "candidate" : "existing"}});
  return doc;
}

inline void save_case(const Network& net, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::io, "cannot write '" + path + "'");
  out << case_to_json(net).dump(2) << '\n';
}

}  // namespace ecogrid
