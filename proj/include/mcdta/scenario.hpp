#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "mcdta/core.hpp"
#include "mcdta/fundamental.hpp"
#include "mcdta/network.hpp"
#include "mcdta/sim.hpp"

namespace mcdta {

using Json = nlohmann::json;

class ScenarioError : public Error {
 public:
  enum class Kind { Parse, Semantic, Cfl };
  ScenarioError(Kind kind, const std::string& what)
      : Error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

// Fully validated problem instance with the label maps used by file I/O.
struct Scenario {
  Network net;
  FundamentalDiagram fd;
  CellCommodityMatrix x0;
  InflowSequence inflow;
  CostSpec cost;
  SimConfig cfg;
  double horizon = 0.0;
  RoutingMatrix default_routing;

  std::vector<std::string> cell_names;
  std::vector<std::string> commodity_names;
  std::vector<std::string> node_names;  // indexed by NodeId
  std::map<std::string, CellId> cell_ids;
  std::map<std::string, CommodityId> commodity_ids;

  CellId cell_id(const std::string& name) const {
    auto it = cell_ids.find(name);
    if (it == cell_ids.end())
      throw ScenarioError(ScenarioError::Kind::Semantic,
                          "unknown cell '" + name + "'");
    return it->second;
  }
  CommodityId commodity_id(const std::string& name) const {
    auto it = commodity_ids.find(name);
    if (it == commodity_ids.end())
      throw ScenarioError(ScenarioError::Kind::Semantic,
                          "unknown commodity '" + name + "'");
    return it->second;
  }
};

namespace detail {

inline double num(const Json& j, const char* where) {
  if (!j.is_number())
    throw ScenarioError(ScenarioError::Kind::Parse,
                        std::string(where) + ": expected a number");
  return j.get<double>();
}

inline const Json& field(const Json& j, const char* key, const char* where) {
  auto it = j.find(key);
  if (it == j.end())
    throw ScenarioError(ScenarioError::Kind::Parse,
                        std::string(where) + ": missing '" + key + "'");
  return *it;
}

inline PiecewiseConcave parse_pieces(const Json& j, const char* where) {
  PiecewiseConcave f;
  if (!j.is_array() || j.empty())
    throw ScenarioError(ScenarioError::Kind::Parse,
                        std::string(where) +
                            ".pieces: expected a non-empty array");
  for (const auto& p : j) {
    if (!p.is_array() || p.size() != 2)
      throw ScenarioError(
          ScenarioError::Kind::Parse,
          std::string(where) + ".pieces: each piece is [slope, intercept]");
    f.pieces.push_back({num(p[0], where), num(p[1], where)});
  }
  return f;
}

// Expands "*" patterns against a name list; plain names must resolve.
inline std::vector<int> match_names(const Json& j,
                                    const std::map<std::string, int>& ids,
                                    const char* where) {
  if (!j.is_string())
    throw ScenarioError(ScenarioError::Kind::Parse,
                        std::string(where) + ": expected a name string");
  std::string s = j.get<std::string>();
  std::vector<int> out;
  if (s == "*") {
    for (const auto& [name, id] : ids) out.push_back(id);
    return out;
  }
  auto it = ids.find(s);
  if (it == ids.end())
    throw ScenarioError(ScenarioError::Kind::Semantic,
                        std::string(where) + ": unknown name '" + s + "'");
  out.push_back(it->second);
  return out;
}

}  // namespace detail

inline Scenario load_scenario_json(const Json& doc) {
  using detail::field;
  using detail::num;
  using Kind = ScenarioError::Kind;

  if (!doc.is_object())
    throw ScenarioError(Kind::Parse, "scenario must be a JSON object");

  Scenario sc;

  // network
  const Json& net_j = field(doc, "network", "scenario");
  const Json& cells_j = field(net_j, "cells", "network");
  if (!cells_j.is_array() || cells_j.empty())
    throw ScenarioError(Kind::Parse, "network.cells: expected non-empty array");
  NetworkSpec spec;
  std::map<std::string, NodeId> node_ids;
  auto node_of = [&](const Json& j, const char* where) -> NodeId {
    if (!j.is_string())
      throw ScenarioError(Kind::Parse,
                          std::string(where) + ": expected a node name");
    std::string s = j.get<std::string>();
    if (s == "world") return kWorldNode;
    auto [it, fresh] = node_ids.try_emplace(
        s, static_cast<NodeId>(sc.node_names.size()));
    if (fresh) sc.node_names.push_back(s);
    return it->second;
  };
  for (std::size_t i = 0; i < cells_j.size(); ++i) {
    const Json& c = cells_j[i];
    std::string where = "network.cells[" + std::to_string(i) + "]";
    std::string name =
        field(c, "name", where.c_str()).is_string()
            ? field(c, "name", where.c_str()).get<std::string>()
            : throw ScenarioError(Kind::Parse, where + ".name must be a string");
    if (sc.cell_ids.count(name))
      throw ScenarioError(Kind::Semantic,
                          where + ": duplicate cell name '" + name + "'");
    sc.cell_ids[name] = static_cast<CellId>(i);
    sc.cell_names.push_back(name);
    spec.cells.push_back({node_of(field(c, "tail", where.c_str()), where.c_str()),
                          node_of(field(c, "head", where.c_str()), where.c_str())});
  }
  const int n = static_cast<int>(spec.cells.size());

  // commodities
  const Json& comm_j = field(doc, "commodities", "scenario");
  if (!comm_j.is_array() || comm_j.empty())
    throw ScenarioError(Kind::Parse, "commodities: expected non-empty array");
  for (std::size_t k = 0; k < comm_j.size(); ++k) {
    const Json& c = comm_j[k];
    std::string where = "commodities[" + std::to_string(k) + "]";
    const Json& name_j = field(c, "name", where.c_str());
    if (!name_j.is_string())
      throw ScenarioError(Kind::Parse, where + ".name must be a string");
    std::string name = name_j.get<std::string>();
    if (sc.commodity_ids.count(name))
      throw ScenarioError(Kind::Semantic,
                          where + ": duplicate commodity name '" + name + "'");
    sc.commodity_ids[name] = static_cast<CommodityId>(k);
    sc.commodity_names.push_back(name);

    const Json& cells = field(c, "cells", where.c_str());
    std::vector<CellId> util;
    if (cells.is_string() && cells.get<std::string>() == "all") {
      for (CellId i = 0; i < n; ++i) util.push_back(i);
    } else if (cells.is_array()) {
      for (const auto& e : cells) {
        if (!e.is_string())
          throw ScenarioError(Kind::Parse, where + ".cells: expected names");
        auto it = sc.cell_ids.find(e.get<std::string>());
        if (it == sc.cell_ids.end())
          throw ScenarioError(Kind::Semantic,
                              where + ".cells: unknown cell '" +
                                  e.get<std::string>() + "'");
        util.push_back(it->second);
      }
    } else {
      throw ScenarioError(Kind::Parse,
                          where + ".cells: expected \"all\" or an array");
    }
    spec.utilizable.push_back(std::move(util));
  }
  spec.num_commodities = static_cast<int>(comm_j.size());
  const int K = spec.num_commodities;

  try {
    sc.net = build_network(spec);
  } catch (const BuildError& e) {
    throw ScenarioError(Kind::Semantic, e.what());
  } catch (const Error& e) {
    throw ScenarioError(Kind::Semantic, e.what());
  }

  std::map<std::string, int> cell_idx(sc.cell_ids.begin(), sc.cell_ids.end());
  std::map<std::string, int> comm_idx(sc.commodity_ids.begin(),
                                      sc.commodity_ids.end());

  // fundamentals
  sc.fd = FundamentalDiagram(n, K);
  std::vector<char> have_demand(static_cast<std::size_t>(n) * K, 0);
  std::vector<char> have_supply(n, 0);
  const Json& fund_j = field(doc, "fundamentals", "scenario");
  const Json& dem_j = field(fund_j, "demand", "fundamentals");
  for (std::size_t e = 0; e < dem_j.size(); ++e) {
    const Json& d = dem_j[e];
    std::string where = "fundamentals.demand[" + std::to_string(e) + "]";
    PiecewiseConcave fn;
    if (d.contains("pieces")) {
      fn = detail::parse_pieces(d["pieces"], where.c_str());
    } else {
      double rate = num(field(d, "rate", where.c_str()), where.c_str());
      double cap = d.contains("cap")
                       ? num(d["cap"], where.c_str())
                       : kInf;
      fn = trapezoid_demand(rate, cap);
    }
    auto cells = detail::match_names(field(d, "cell", where.c_str()), cell_idx,
                                     where.c_str());
    auto comms = d.contains("commodity")
                     ? detail::match_names(d["commodity"], comm_idx,
                                           where.c_str())
                     : detail::match_names(Json("*"), comm_idx, where.c_str());
    for (int k : comms) {
      for (int i : cells) {
        if (!sc.net.utilizable(k, i)) continue;
        sc.fd.demand_fn(i, k) = fn;
        have_demand[static_cast<std::size_t>(i) * K + k] = 1;
      }
    }
  }
  const Json& sup_j = field(fund_j, "supply", "fundamentals");
  for (std::size_t e = 0; e < sup_j.size(); ++e) {
    const Json& s = sup_j[e];
    std::string where = "fundamentals.supply[" + std::to_string(e) + "]";
    PiecewiseConcave fn;
    if (s.contains("pieces")) {
      fn = detail::parse_pieces(s["pieces"], where.c_str());
    } else {
      double cap = num(field(s, "capacity", where.c_str()), where.c_str());
      fn = s.contains("backwave")
               ? affine_supply(cap, num(s["backwave"], where.c_str()))
               : constant_supply(cap);
    }
    auto cells = detail::match_names(field(s, "cell", where.c_str()), cell_idx,
                                     where.c_str());
    for (int i : cells) {
      sc.fd.supply_fn(i) = fn;
      have_supply[i] = 1;
      if (s.contains("weights")) {
        const Json& w = s["weights"];
        if (!w.is_object())
          throw ScenarioError(Kind::Parse, where + ".weights: expected object");
        for (auto it = w.begin(); it != w.end(); ++it) {
          auto c = comm_idx.find(it.key());
          if (c == comm_idx.end())
            throw ScenarioError(Kind::Semantic,
                                where + ".weights: unknown commodity '" +
                                    it.key() + "'");
          sc.fd.weight(i, c->second) = num(it.value(), where.c_str());
        }
      }
    }
  }
  for (CommodityId k = 0; k < K; ++k)
    for (CellId i : sc.net.cells_of(k))
      if (!have_demand[static_cast<std::size_t>(i) * K + k])
        throw ScenarioError(Kind::Semantic,
                            "no demand function for cell '" +
                                sc.cell_names[i] + "' commodity '" +
                                sc.commodity_names[k] + "'");
  for (CellId i = 0; i < n; ++i)
    if (!have_supply[i])
      throw ScenarioError(Kind::Semantic, "no supply function for cell '" +
                                              sc.cell_names[i] + "'");
  // Demand of a commodity off its cells never enters the model; keep the
  // zero function there.
  for (CommodityId k = 0; k < K; ++k)
    for (CellId i = 0; i < n; ++i)
      if (!sc.net.utilizable(k, i)) sc.fd.demand_fn(i, k) = trapezoid_demand(0);

  auto bad_fd = check_assumption1(sc.fd);
  if (!bad_fd.empty()) {
    std::string msg = "fundamentals violate the shape rules:";
    for (const auto& v : bad_fd) msg += "\n  " + v.format();
    throw ScenarioError(Kind::Semantic, msg);
  }
  for (CommodityId k = 0; k < K; ++k)
    for (CellId i : sc.net.cells_of(k))
      if (!(sc.fd.weight(i, k) > 0))
        throw ScenarioError(Kind::Semantic,
                            "volume weight must be positive on cell '" +
                                sc.cell_names[i] + "' for commodity '" +
                                sc.commodity_names[k] + "'");

  // horizon
  const Json& hor_j = field(doc, "horizon", "scenario");
  sc.horizon = num(field(hor_j, "T", "horizon"), "horizon.T");
  sc.cfg.h = num(field(hor_j, "h", "horizon"), "horizon.h");
  if (!(sc.horizon > 0) || !(sc.cfg.h > 0))
    throw ScenarioError(Kind::Semantic, "horizon.T and horizon.h must be > 0");
  sc.cfg.steps = static_cast<int>(std::llround(sc.horizon / sc.cfg.h));
  if (sc.cfg.steps < 1 ||
      std::abs(sc.cfg.steps * sc.cfg.h - sc.horizon) >
          1e-9 * std::max(1.0, sc.horizon))
    throw ScenarioError(Kind::Semantic,
                        "horizon.T must be a positive multiple of horizon.h");

  // initial state
  sc.x0 = CellCommodityMatrix(n, K, 0.0);
  if (doc.contains("initial_state")) {
    const Json& init_j = doc["initial_state"];
    if (!init_j.is_array())
      throw ScenarioError(Kind::Parse, "initial_state: expected array");
    for (std::size_t e = 0; e < init_j.size(); ++e) {
      const Json& s = init_j[e];
      std::string where = "initial_state[" + std::to_string(e) + "]";
      double v = num(field(s, "volume", where.c_str()), where.c_str());
      if (v < 0)
        throw ScenarioError(Kind::Semantic, where + ": negative volume");
      auto cells = detail::match_names(field(s, "cell", where.c_str()),
                                       cell_idx, where.c_str());
      auto comms = s.contains("commodity")
                       ? detail::match_names(s["commodity"], comm_idx,
                                             where.c_str())
                       : detail::match_names(Json("*"), comm_idx,
                                             where.c_str());
      bool wildcard = field(s, "cell", where.c_str()) == Json("*") ||
                      !s.contains("commodity") || s["commodity"] == Json("*");
      for (int k : comms) {
        for (int i : cells) {
          if (!sc.net.utilizable(k, i)) {
            if (wildcard) continue;
            throw ScenarioError(Kind::Semantic,
                                where + ": cell '" + sc.cell_names[i] +
                                    "' is not utilizable by commodity '" +
                                    sc.commodity_names[k] + "'");
          }
          sc.x0(i, k) = v;
        }
      }
    }
  }

  // inflows
  std::vector<CellCommodityMatrix> lam(sc.cfg.steps,
                                       CellCommodityMatrix(n, K, 0.0));
  if (doc.contains("inflows")) {
    const Json& in_j = doc["inflows"];
    if (!in_j.is_array())
      throw ScenarioError(Kind::Parse, "inflows: expected array");
    for (std::size_t e = 0; e < in_j.size(); ++e) {
      const Json& s = in_j[e];
      std::string where = "inflows[" + std::to_string(e) + "]";
      CellId i = sc.cell_id(
          field(s, "cell", where.c_str()).get<std::string>());
      CommodityId k = sc.commodity_id(
          field(s, "commodity", where.c_str()).get<std::string>());
      bool is_onramp_of_k = false;
      for (CellId o : sc.net.onramps_of(k)) is_onramp_of_k |= (o == i);
      if (!is_onramp_of_k)
        throw ScenarioError(Kind::Semantic,
                            where + ": cell '" + sc.cell_names[i] +
                                "' is not an on-ramp for commodity '" +
                                sc.commodity_names[k] + "'");
      auto apply = [&](double start, double end, double rate) {
        if (rate < 0)
          throw ScenarioError(Kind::Semantic, where + ": negative rate");
        for (int t = 0; t < sc.cfg.steps; ++t) {
          double tm = t * sc.cfg.h;
          if (tm >= start - 1e-12 && tm < end - 1e-12) lam[t](i, k) = rate;
        }
      };
      if (s.contains("segments")) {
        const Json& segs = s["segments"];
        if (!segs.is_array())
          throw ScenarioError(Kind::Parse, where + ".segments: expected array");
        for (const auto& g : segs) {
          double start = g.contains("start")
                             ? num(g["start"], where.c_str())
                             : 0.0;
          double end = g.contains("end") ? num(g["end"], where.c_str())
                                         : sc.horizon;
          apply(start, end, num(field(g, "rate", where.c_str()),
                                where.c_str()));
        }
      } else {
        apply(0.0, sc.horizon,
              num(field(s, "rate", where.c_str()), where.c_str()));
      }
    }
  }
  sc.inflow.lambda = std::move(lam);

  // cost
  if (!doc.contains("cost") ||
      (doc["cost"].is_string() &&
       doc["cost"].get<std::string>() == "total_volume")) {
    sc.cost = CostSpec::total_volume(n, K);
  } else if (doc["cost"].is_object()) {
    sc.cost.volume_price = CellCommodityMatrix(n, K, 0.0);
    sc.cost.outflow_price = CellCommodityMatrix(n, K, 0.0);
    auto load_prices = [&](const char* key, CellCommodityMatrix& m) {
      if (!doc["cost"].contains(key)) return;
      const Json& arr = doc["cost"][key];
      if (!arr.is_array())
        throw ScenarioError(Kind::Parse,
                            std::string("cost.") + key + ": expected array");
      for (const auto& s : arr) {
        std::string where = std::string("cost.") + key;
        double v = num(field(s, "value", where.c_str()), where.c_str());
        auto cells = detail::match_names(field(s, "cell", where.c_str()),
                                         cell_idx, where.c_str());
        auto comms = s.contains("commodity")
                         ? detail::match_names(s["commodity"], comm_idx,
                                               where.c_str())
                         : detail::match_names(Json("*"), comm_idx,
                                               where.c_str());
        for (int k : comms)
          for (int i : cells) m(i, k) = v;
      }
    };
    load_prices("volume", sc.cost.volume_price);
    load_prices("outflow", sc.cost.outflow_price);
    if (!sc.cost.valid())
      throw ScenarioError(Kind::Semantic,
                          "cost: volume prices must be >= 0 and outflow "
                          "prices <= 0");
  } else {
    throw ScenarioError(Kind::Parse,
                        "cost: expected \"total_volume\" or an object");
  }

  // default routing
  sc.default_routing = RoutingMatrix(n, K);
  bool uniform = !doc.contains("default_routing") ||
                 (doc["default_routing"].is_string() &&
                  doc["default_routing"].get<std::string>() == "uniform");
  if (uniform) {
    for (CommodityId k = 0; k < K; ++k) {
      for (CellId i : sc.net.cells_of(k)) {
        const auto& out = sc.net.arcs_out(k, i);
        if (out.empty()) continue;
        double share = 1.0 / static_cast<double>(out.size());
        for (int a : out) {
          const Arc& e = sc.net.arcs(k)[a];
          sc.default_routing.at(k, e.from, e.to) = share;
        }
      }
    }
  } else if (doc["default_routing"].is_array()) {
    for (const auto& r : doc["default_routing"]) {
      const char* where = "default_routing";
      CommodityId k =
          sc.commodity_id(field(r, "commodity", where).get<std::string>());
      CellId i = sc.cell_id(field(r, "from", where).get<std::string>());
      CellId j = sc.cell_id(field(r, "to", where).get<std::string>());
      sc.default_routing.at(k, i, j) = num(field(r, "value", where), where);
    }
  } else {
    throw ScenarioError(Kind::Parse,
                        "default_routing: expected \"uniform\" or an array");
  }
  auto bad_r = validate_routing(sc.net, sc.default_routing);
  if (!bad_r.empty()) {
    std::string msg = "default_routing is not admissible:";
    for (const auto& v : bad_r) msg += "\n  " + v.format();
    throw ScenarioError(Kind::Semantic, msg);
  }

  if (!cfl_ok(sc.fd, sc.cfg.h))
    throw ScenarioError(
        Kind::Cfl, "step size " + std::to_string(sc.cfg.h) +
                       " violates the stability bound: h * max demand slope = " +
                       std::to_string(sc.cfg.h * max_demand_slope(sc.fd)) +
                       " > 1");
  return sc;
}

inline Scenario load_scenario_text(const std::string& text) {
  Json doc;
  try {
    doc = Json::parse(text);
  } catch (const Json::exception& e) {
    throw ScenarioError(ScenarioError::Kind::Parse, e.what());
  }
  return load_scenario_json(doc);
}

inline Scenario load_scenario_file(const std::string& path) {
  std::ifstream in(path);
  if (!in)
    throw ScenarioError(ScenarioError::Kind::Parse,
                        "cannot open scenario file '" + path + "'");
  std::string text((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  return load_scenario_text(text);
}

// Rebuildable description of the network section, used to round-trip
// generated instances through the on-disk format.
inline Json network_to_json(const Scenario& sc) {
  Json cells = Json::array();
  auto node_name = [&](NodeId v) {
    return v == kWorldNode ? std::string("world") : sc.node_names[v];
  };
  for (CellId i = 0; i < sc.net.num_cells(); ++i) {
    cells.push_back({{"name", sc.cell_names[i]},
                     {"tail", node_name(sc.net.tail(i))},
                     {"head", node_name(sc.net.head(i))}});
  }
  return Json{{"cells", std::move(cells)}};
}

inline Json scenario_to_json(const Scenario& sc) {
  Json doc;
  doc["network"] = network_to_json(sc);

  Json comms = Json::array();
  for (CommodityId k = 0; k < sc.net.num_commodities(); ++k) {
    Json cells = Json::array();
    for (CellId i : sc.net.cells_of(k)) cells.push_back(sc.cell_names[i]);
    comms.push_back({{"name", sc.commodity_names[k]}, {"cells", cells}});
  }
  doc["commodities"] = std::move(comms);

  Json demand = Json::array();
  Json supply = Json::array();
  auto pieces_json = [](const PiecewiseConcave& f) {
    Json out = Json::array();
    for (const auto& p : f.pieces) out.push_back({p.slope, p.intercept});
    return out;
  };
  for (CellId i = 0; i < sc.net.num_cells(); ++i) {
    for (CommodityId k = 0; k < sc.net.num_commodities(); ++k) {
      if (!sc.net.utilizable(k, i)) continue;
      demand.push_back({{"cell", sc.cell_names[i]},
                        {"commodity", sc.commodity_names[k]},
                        {"pieces", pieces_json(sc.fd.demand_fn(i, k))}});
    }
    Json weights = Json::object();
    for (CommodityId k = 0; k < sc.net.num_commodities(); ++k)
      weights[sc.commodity_names[k]] = sc.fd.weight(i, k);
    supply.push_back({{"cell", sc.cell_names[i]},
                      {"pieces", pieces_json(sc.fd.supply_fn(i))},
                      {"weights", std::move(weights)}});
  }
  doc["fundamentals"] = Json{{"demand", std::move(demand)},
                             {"supply", std::move(supply)}};

  Json init = Json::array();
  for (CommodityId k = 0; k < sc.net.num_commodities(); ++k)
    for (CellId i : sc.net.cells_of(k))
      if (sc.x0(i, k) != 0.0)
        init.push_back({{"cell", sc.cell_names[i]},
                        {"commodity", sc.commodity_names[k]},
                        {"volume", sc.x0(i, k)}});
  doc["initial_state"] = std::move(init);

  Json inflows = Json::array();
  for (CommodityId k = 0; k < sc.net.num_commodities(); ++k) {
    for (CellId i : sc.net.onramps_of(k)) {
      Json segs = Json::array();
      for (int t = 0; t < sc.cfg.steps;) {
        double rate = sc.inflow.at(t)(i, k);
        int t0 = t;
        while (t < sc.cfg.steps && sc.inflow.at(t)(i, k) == rate) ++t;
        if (rate != 0.0)
          segs.push_back({{"start", t0 * sc.cfg.h},
                          {"end", t * sc.cfg.h},
                          {"rate", rate}});
      }
      if (!segs.empty())
        inflows.push_back({{"cell", sc.cell_names[i]},
                           {"commodity", sc.commodity_names[k]},
                           {"segments", std::move(segs)}});
    }
  }
  doc["inflows"] = std::move(inflows);

  Json vol = Json::array(), outf = Json::array();
  for (CellId i = 0; i < sc.net.num_cells(); ++i) {
    for (CommodityId k = 0; k < sc.net.num_commodities(); ++k) {
      if (sc.cost.volume_price(i, k) != 0.0)
        vol.push_back({{"cell", sc.cell_names[i]},
                       {"commodity", sc.commodity_names[k]},
                       {"value", sc.cost.volume_price(i, k)}});
      if (sc.cost.outflow_price(i, k) != 0.0)
        outf.push_back({{"cell", sc.cell_names[i]},
                        {"commodity", sc.commodity_names[k]},
                        {"value", sc.cost.outflow_price(i, k)}});
    }
  }
  doc["cost"] = Json{{"volume", std::move(vol)}, {"outflow", std::move(outf)}};

  doc["horizon"] = Json{{"T", sc.horizon}, {"h", sc.cfg.h}};

  Json routing = Json::array();
  for (CommodityId k = 0; k < sc.net.num_commodities(); ++k)
    for (const Arc& a : sc.net.arcs(k))
      if (double v = sc.default_routing.at(k, a.from, a.to); v != 0.0)
        routing.push_back({{"commodity", sc.commodity_names[k]},
                           {"from", sc.cell_names[a.from]},
                           {"to", sc.cell_names[a.to]},
                           {"value", v}});
  doc["default_routing"] = std::move(routing);
  return doc;
}

}  // namespace mcdta
