#pragma once

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "mcdta/core.hpp"
#include "mcdta/network.hpp"
#include "mcdta/relax.hpp"
#include "mcdta/scenario.hpp"
#include "mcdta/sim.hpp"

namespace mcdta {

inline std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

class IoError : public Error {
 public:
  explicit IoError(const std::string& what) : Error(what) {}
};

namespace detail {

inline std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write '" + path + "'");
  return out;
}

inline std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur.push_back(ch);
    }
  }
  out.push_back(cur);
  return out;
}

}  // namespace detail

inline std::vector<CellCommodityMatrix> total_outflows(const Network& net,
                                                       const Trajectory& traj) {
  std::vector<CellCommodityMatrix> out;
  out.reserve(traj.flows.size());
  for (const FlowState& fs : traj.flows) out.push_back(fs.total_out);
  return out;
}

inline std::vector<CellCommodityMatrix> total_outflows(
    const Network& net, const RelaxedSolution& rs) {
  std::vector<CellCommodityMatrix> out;
  for (std::size_t t = 0; t < rs.arc.size(); ++t) {
    CellCommodityMatrix m(net.num_cells(), net.num_commodities(), 0.0);
    for (CommodityId k = 0; k < net.num_commodities(); ++k) {
      for (std::size_t a = 0; a < net.arcs(k).size(); ++a)
        m(net.arcs(k)[a].from, k) += rs.arc[t][k][a];
      for (CellId i : net.offramps_of(k)) m(i, k) += rs.exit[t](i, k);
    }
    out.push_back(std::move(m));
  }
  return out;
}

// Long-format series of per-commodity volumes, one row per
// (step, cell, commodity). The outflow column carries the total volume per
// hour leaving the cell during the step; the terminal state has none.
inline void write_states_csv(const std::string& path, const Scenario& sc,
                             const std::vector<CellCommodityMatrix>& x,
                             const std::vector<CellCommodityMatrix>& outflow) {
  auto out = detail::open_out(path);
  out << "step,time,cell,commodity,volume,outflow\n";
  for (std::size_t t = 0; t < x.size(); ++t)
    for (CommodityId k = 0; k < sc.net.num_commodities(); ++k)
      for (CellId i : sc.net.cells_of(k))
        out << t << ',' << fmt_double(t * sc.cfg.h) << ',' << sc.cell_names[i]
            << ',' << sc.commodity_names[k] << ',' << fmt_double(x[t](i, k))
            << ',' << fmt_double(t < outflow.size() ? outflow[t](i, k) : 0.0)
            << '\n';
}

inline void write_states_csv(const std::string& path, const Scenario& sc,
                             const std::vector<CellCommodityMatrix>& x) {
  write_states_csv(path, sc, x, {});
}

// Arc flows plus network exits (rows with to = world).
inline void write_flows_csv(
    const std::string& path, const Scenario& sc,
    const std::vector<std::vector<std::vector<double>>>& arc,
    const std::vector<CellCommodityMatrix>& exit) {
  auto out = detail::open_out(path);
  out << "step,time,commodity,from,to,flow\n";
  for (std::size_t t = 0; t < arc.size(); ++t) {
    for (CommodityId k = 0; k < sc.net.num_commodities(); ++k) {
      for (std::size_t a = 0; a < sc.net.arcs(k).size(); ++a) {
        const Arc& e = sc.net.arcs(k)[a];
        out << t << ',' << fmt_double(t * sc.cfg.h) << ','
            << sc.commodity_names[k] << ',' << sc.cell_names[e.from] << ','
            << sc.cell_names[e.to] << ',' << fmt_double(arc[t][k][a]) << '\n';
      }
      for (CellId i : sc.net.offramps_of(k))
        out << t << ',' << fmt_double(t * sc.cfg.h) << ','
            << sc.commodity_names[k] << ',' << sc.cell_names[i] << ",world,"
            << fmt_double(exit[t](i, k)) << '\n';
    }
  }
}

inline void write_flows_csv(const std::string& path, const Scenario& sc,
                            const Trajectory& traj) {
  std::vector<std::vector<std::vector<double>>> arc;
  std::vector<CellCommodityMatrix> exit;
  for (const FlowState& fs : traj.flows) {
    arc.push_back(fs.arc);
    exit.push_back(fs.exit);
  }
  write_flows_csv(path, sc, arc, exit);
}

inline std::vector<CellCommodityMatrix> read_states_csv(
    const std::string& path, const Scenario& sc) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read '" + path + "'");
  std::string line;
  std::getline(in, line);  // header
  std::vector<CellCommodityMatrix> x;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto f = detail::split_csv(line);
    if (f.size() != 5 && f.size() != 6)
      throw IoError(path + ": bad row '" + line + "'");
    std::size_t t = std::stoul(f[0]);
    while (x.size() <= t)
      x.emplace_back(sc.net.num_cells(), sc.net.num_commodities(), 0.0);
    x[t](sc.cell_id(f[2]), sc.commodity_id(f[3])) = std::stod(f[4]);
  }
  return x;
}

struct FlowTable {
  std::vector<std::vector<std::vector<double>>> arc;  // [t][k][a]
  std::vector<CellCommodityMatrix> exit;
};

inline FlowTable read_flows_csv(const std::string& path, const Scenario& sc) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read '" + path + "'");
  std::string line;
  std::getline(in, line);
  FlowTable tab;
  auto grow = [&](std::size_t t) {
    while (tab.arc.size() <= t) {
      std::vector<std::vector<double>> per_k;
      for (CommodityId k = 0; k < sc.net.num_commodities(); ++k)
        per_k.emplace_back(sc.net.arcs(k).size(), 0.0);
      tab.arc.push_back(std::move(per_k));
      tab.exit.emplace_back(sc.net.num_cells(), sc.net.num_commodities(), 0.0);
    }
  };
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto f = detail::split_csv(line);
    if (f.size() != 6) throw IoError(path + ": bad row '" + line + "'");
    std::size_t t = std::stoul(f[0]);
    grow(t);
    CommodityId k = sc.commodity_id(f[2]);
    CellId from = sc.cell_id(f[3]);
    double v = std::stod(f[5]);
    if (f[4] == "world") {
      tab.exit[t](from, k) = v;
      continue;
    }
    CellId to = sc.cell_id(f[4]);
    bool found = false;
    for (int a : sc.net.arcs_out(k, from)) {
      if (sc.net.arcs(k)[a].to == to) {
        tab.arc[t][k][a] = v;
        found = true;
        break;
      }
    }
    if (!found)
      throw IoError(path + ": flow " + f[3] + "->" + f[4] +
                    " is not an arc of commodity " + f[2]);
  }
  return tab;
}

inline Json controls_to_json(const Scenario& sc, const ControlSequence& cs,
                             int steps) {
  Json doc;
  doc["h"] = sc.cfg.h;
  doc["steps"] = steps;
  doc["cells"] = sc.cell_names;
  doc["commodities"] = sc.commodity_names;
  Json alpha = Json::array();
  Json routing = Json::array();
  for (int t = 0; t < steps; ++t) {
    const CellCommodityMatrix& a = cs.alpha_at(t);
    Json at = Json::array();
    for (CellId i = 0; i < sc.net.num_cells(); ++i) {
      Json row = Json::array();
      for (CommodityId k = 0; k < sc.net.num_commodities(); ++k)
        row.push_back(a(i, k));
      at.push_back(std::move(row));
    }
    alpha.push_back(std::move(at));

    const RoutingMatrix& r = cs.routing_at(t);
    Json rt = Json::array();
    for (CommodityId k = 0; k < sc.net.num_commodities(); ++k)
      for (const Arc& e : sc.net.arcs(k))
        if (double v = r.at(k, e.from, e.to); v != 0.0)
          rt.push_back({{"commodity", sc.commodity_names[k]},
                        {"from", sc.cell_names[e.from]},
                        {"to", sc.cell_names[e.to]},
                        {"value", v}});
    routing.push_back(std::move(rt));
  }
  doc["alpha"] = std::move(alpha);
  doc["routing"] = std::move(routing);
  return doc;
}

inline ControlSequence controls_from_json(const Scenario& sc,
                                          const Json& doc) {
  using Kind = ScenarioError::Kind;
  if (!doc.is_object() || !doc.contains("alpha") || !doc.contains("routing"))
    throw ScenarioError(Kind::Parse,
                        "controls file needs 'alpha' and 'routing'");
  const Json& alpha = doc["alpha"];
  const Json& routing = doc["routing"];
  if (!alpha.is_array() || !routing.is_array() ||
      alpha.size() != routing.size() || alpha.empty())
    throw ScenarioError(Kind::Parse,
                        "controls alpha/routing must be equal-length arrays");
  const int n = sc.net.num_cells();
  const int K = sc.net.num_commodities();
  ControlSequence cs;
  for (std::size_t t = 0; t < alpha.size(); ++t) {
    const Json& at = alpha[t];
    if (!at.is_array() || static_cast<int>(at.size()) != n)
      throw ScenarioError(Kind::Parse, "controls alpha[" + std::to_string(t) +
                                           "] has wrong cell count");
    CellCommodityMatrix a(n, K, 1.0);
    for (CellId i = 0; i < n; ++i) {
      const Json& row = at[i];
      if (!row.is_array() || static_cast<int>(row.size()) != K)
        throw ScenarioError(Kind::Parse,
                            "controls alpha[" + std::to_string(t) +
                                "] has wrong commodity count");
      for (CommodityId k = 0; k < K; ++k) {
        double v = detail::num(row[k], "controls.alpha");
        if (v < -1e-9 || v > 1.0 + 1e-9)
          throw ScenarioError(Kind::Semantic,
                              "controls alpha out of [0,1] at step " +
                                  std::to_string(t));
        a(i, k) = std::min(1.0, std::max(0.0, v));
      }
    }
    RoutingMatrix r(n, K);
    for (const auto& e : routing[t]) {
      CommodityId k = sc.commodity_id(
          detail::field(e, "commodity", "controls.routing").get<std::string>());
      CellId from =
          sc.cell_id(detail::field(e, "from", "controls.routing")
                         .get<std::string>());
      CellId to =
          sc.cell_id(detail::field(e, "to", "controls.routing")
                         .get<std::string>());
      r.at(k, from, to) =
          detail::num(detail::field(e, "value", "controls.routing"),
                      "controls.routing");
    }
    auto bad = validate_routing(sc.net, r);
    if (!bad.empty()) {
      std::string msg = "controls routing invalid at step " +
                        std::to_string(t) + ":";
      for (const auto& v : bad) msg += "\n  " + v.format();
      throw ScenarioError(Kind::Semantic, msg);
    }
    cs.alpha.push_back(std::move(a));
    cs.routing.push_back(std::move(r));
  }
  return cs;
}

// Minimal static line chart.
struct SvgSeries {
  std::string label;
  std::string color;
  std::vector<double> t;
  std::vector<double> v;
};

inline void write_svg_chart(const std::string& path, const std::string& title,
                            const std::vector<SvgSeries>& series) {
  const double W = 720, H = 420;
  const double ml = 64, mr = 20, mt = 40, mb = 44;
  double tmin = kInf, tmax = -kInf, vmin = 0.0, vmax = -kInf;
  for (const auto& s : series) {
    for (double t : s.t) {
      tmin = std::min(tmin, t);
      tmax = std::max(tmax, t);
    }
    for (double v : s.v) {
      vmin = std::min(vmin, v);
      vmax = std::max(vmax, v);
    }
  }
  if (!(tmax > tmin)) tmax = tmin + 1;
  if (!(vmax > vmin)) vmax = vmin + 1;
  vmax += 0.05 * (vmax - vmin);
  auto px = [&](double t) {
    return ml + (t - tmin) / (tmax - tmin) * (W - ml - mr);
  };
  auto py = [&](double v) {
    return H - mb - (v - vmin) / (vmax - vmin) * (H - mt - mb);
  };

  auto out = detail::open_out(path);
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W
      << "\" height=\"" << H << "\" viewBox=\"0 0 " << W << " " << H
      << "\">\n"
      << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
      << "<text x=\"" << W / 2 << "\" y=\"24\" font-family=\"sans-serif\" "
         "font-size=\"16\" text-anchor=\"middle\">"
      << title << "</text>\n";
  for (int g = 0; g <= 4; ++g) {
    double v = vmin + g * (vmax - vmin) / 4;
    double t = tmin + g * (tmax - tmin) / 4;
    out << "<line x1=\"" << ml << "\" y1=\"" << py(v) << "\" x2=\"" << W - mr
        << "\" y2=\"" << py(v) << "\" stroke=\"#ddd\"/>\n"
        << "<text x=\"" << ml - 6 << "\" y=\"" << py(v) + 4
        << "\" font-family=\"sans-serif\" font-size=\"11\" "
           "text-anchor=\"end\">";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3g", v);
    out << buf << "</text>\n<text x=\"" << px(t) << "\" y=\"" << H - mb + 16
        << "\" font-family=\"sans-serif\" font-size=\"11\" "
           "text-anchor=\"middle\">";
    std::snprintf(buf, sizeof buf, "%.3g", t);
    out << buf << "</text>\n";
  }
  out << "<line x1=\"" << ml << "\" y1=\"" << mt << "\" x2=\"" << ml
      << "\" y2=\"" << H - mb << "\" stroke=\"black\"/>\n"
      << "<line x1=\"" << ml << "\" y1=\"" << H - mb << "\" x2=\"" << W - mr
      << "\" y2=\"" << H - mb << "\" stroke=\"black\"/>\n";
  double ly = mt + 6;
  for (const auto& s : series) {
    out << "<polyline fill=\"none\" stroke=\"" << s.color
        << "\" stroke-width=\"1.6\" points=\"";
    for (std::size_t i = 0; i < s.t.size(); ++i)
      out << px(s.t[i]) << ',' << py(s.v[i]) << ' ';
    out << "\"/>\n"
        << "<line x1=\"" << W - mr - 150 << "\" y1=\"" << ly << "\" x2=\""
        << W - mr - 126 << "\" y2=\"" << ly << "\" stroke=\"" << s.color
        << "\" stroke-width=\"2\"/>\n"
        << "<text x=\"" << W - mr - 120 << "\" y=\"" << ly + 4
        << "\" font-family=\"sans-serif\" font-size=\"12\">" << s.label
        << "</text>\n";
    ly += 18;
  }
  out << "</svg>\n";
}

inline void write_text_file(const std::string& path,
                            const std::string& content) {
  auto out = detail::open_out(path);
  out << content;
}

// Readable statement of the optimization program, one line per row.
inline std::string dump_program(const ProgramIR& ir) {
  std::ostringstream os;
  os << "minimize\n ";
  for (int j = 0; j < ir.lp.num_vars; ++j)
    if (ir.lp.objective[j] != 0.0)
      os << " + " << fmt_double(ir.lp.objective[j]) << ' '
         << ir.var_info[j].name();
  os << "\nsubject to\n";
  auto term = [&](double a, int c) {
    os << (a < 0 ? " - " : " + ");
    os << fmt_double(std::abs(a)) << ' ' << ir.var_info[c].name();
  };
  for (std::size_t r = 0; r < ir.lp.eq_rows.size(); ++r) {
    os << " e" << r << ':';
    for (const auto& [c, a] : ir.lp.eq_rows[r]) term(a, c);
    os << " = " << fmt_double(ir.lp.eq_rhs[r]) << '\n';
  }
  for (std::size_t r = 0; r < ir.lp.le_rows.size(); ++r) {
    os << " i" << r << ':';
    for (const auto& [c, a] : ir.lp.le_rows[r]) term(a, c);
    os << " <= " << fmt_double(ir.lp.le_rhs[r]) << '\n';
  }
  os << "bounds\n  all variables >= 0\n";
  return os.str();
}

}  // namespace mcdta
