#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "mcdta/core.hpp"
#include "mcdta/fundamental.hpp"
#include "mcdta/network.hpp"
#include "mcdta/sim.hpp"
#include "mcdta/solve.hpp"

namespace mcdta {

struct VarInfo {
  enum class Kind { Volume, Flow, Exit };
  Kind kind;
  int t = 0;
  CommodityId k = -1;
  CellId cell = -1;
  CellId to = -1;  // flow variables only

  std::string name() const {
    switch (kind) {
      case Kind::Volume:
        return "x_" + std::to_string(t) + "_" + std::to_string(k) + "_" +
               std::to_string(cell);
      case Kind::Flow:
        return "f_" + std::to_string(t) + "_" + std::to_string(k) + "_" +
               std::to_string(cell) + "_" + std::to_string(to);
      case Kind::Exit:
        return "mu_" + std::to_string(t) + "_" + std::to_string(k) + "_" +
               std::to_string(cell);
    }
    return "?";
  }
};

struct RowInfo {
  enum class Kind { Initial, Dynamics, DemandCap, SupplyCap, Pin };
  Kind kind;
  int t = 0;
  CommodityId k = -1;  // unused for SupplyCap
  CellId cell = -1;
  int piece = -1;  // cap rows only
};

// The discretized relaxed program together with the variable and row
// layout needed to move between LP vectors and trajectories.
//
// Variables: volumes x(t,k,i) for t = 0..steps, then per step the arc flows
// f(t,k,i->j) and off-ramp exits mu(t,k,i). Equalities pin x(0) and encode
// the explicit Euler update; inequalities put every demand piece on each
// (cell, commodity) and every supply piece on each cell that can receive
// flow. All variables are non-negative.
struct ProgramIR {
  LinearProgram lp;
  int steps = 0;
  double h = 0.0;
  int num_cells = 0;
  int num_commodities = 0;

  std::vector<std::vector<int>> x_col;                 // [t][k*n+i]
  std::vector<std::vector<int>> exit_col;              // [t][k*n+i]
  std::vector<std::vector<std::vector<int>>> flow_col; // [t][k][arc]
  std::vector<VarInfo> var_info;
  std::vector<RowInfo> eq_info, le_info;

  int volume_col(int t, CommodityId k, CellId i) const {
    return x_col[t][static_cast<std::size_t>(k) * num_cells + i];
  }
  int exit_col_of(int t, CommodityId k, CellId i) const {
    return exit_col[t][static_cast<std::size_t>(k) * num_cells + i];
  }
  int flow_col_of(int t, CommodityId k, int arc) const {
    return flow_col[t][k][arc];
  }

  // Pins an existing variable with an extra equality row.
  void fix_variable(int col, double value) {
    lp.add_eq({{col, 1.0}}, value);
    eq_info.push_back({RowInfo::Kind::Pin, var_info[col].t, var_info[col].k,
                       var_info[col].cell, -1});
  }
};

inline ProgramIR discretize(const Network& net, const FundamentalDiagram& fd,
                            const CostSpec& cost,
                            const CellCommodityMatrix& x0,
                            const InflowSequence& inflow,
                            const SimConfig& cfg) {
  if (!(cfg.h > 0)) throw Error("step size must be positive");
  if (cfg.steps < 0) throw Error("step count must be non-negative");
  const int n = net.num_cells();
  const int K = net.num_commodities();
  const int N = cfg.steps;

  ProgramIR ir;
  ir.steps = N;
  ir.h = cfg.h;
  ir.num_cells = n;
  ir.num_commodities = K;
  ir.x_col.assign(N + 1, std::vector<int>(static_cast<std::size_t>(K) * n, -1));
  ir.exit_col.assign(N, std::vector<int>(static_cast<std::size_t>(K) * n, -1));
  ir.flow_col.resize(N);

  for (int t = 0; t <= N; ++t) {
    for (CommodityId k = 0; k < K; ++k) {
      for (CellId i : net.cells_of(k)) {
        double price = t < N ? cfg.h * cost.volume_price(i, k) : 0.0;
        ir.x_col[t][static_cast<std::size_t>(k) * n + i] = ir.lp.add_var(price);
        ir.var_info.push_back({VarInfo::Kind::Volume, t, k, i, -1});
      }
    }
  }
  for (int t = 0; t < N; ++t) {
    ir.flow_col[t].resize(K);
    for (CommodityId k = 0; k < K; ++k) {
      ir.flow_col[t][k].assign(net.arcs(k).size(), -1);
      for (std::size_t a = 0; a < net.arcs(k).size(); ++a) {
        const Arc& arc = net.arcs(k)[a];
        ir.flow_col[t][k][a] =
            ir.lp.add_var(cfg.h * cost.outflow_price(arc.from, k));
        ir.var_info.push_back({VarInfo::Kind::Flow, t, k, arc.from, arc.to});
      }
    }
    for (CommodityId k = 0; k < K; ++k) {
      for (CellId i : net.offramps_of(k)) {
        ir.exit_col[t][static_cast<std::size_t>(k) * n + i] =
            ir.lp.add_var(cfg.h * cost.outflow_price(i, k));
        ir.var_info.push_back({VarInfo::Kind::Exit, t, k, i, -1});
      }
    }
  }

  for (CommodityId k = 0; k < K; ++k) {
    for (CellId i : net.cells_of(k)) {
      ir.lp.add_eq({{ir.volume_col(0, k, i), 1.0}}, x0(i, k));
      ir.eq_info.push_back({RowInfo::Kind::Initial, 0, k, i, -1});
    }
  }
  for (int t = 0; t < N; ++t) {
    const CellCommodityMatrix& lam = inflow.at(t);
    for (CommodityId k = 0; k < K; ++k) {
      for (CellId i : net.cells_of(k)) {
        std::vector<std::pair<int, double>> row;
        row.emplace_back(ir.volume_col(t + 1, k, i), 1.0);
        row.emplace_back(ir.volume_col(t, k, i), -1.0);
        for (int a : net.arcs_in(k, i))
          row.emplace_back(ir.flow_col_of(t, k, a), -cfg.h);
        for (int a : net.arcs_out(k, i))
          row.emplace_back(ir.flow_col_of(t, k, a), cfg.h);
        if (int ec = ir.exit_col_of(t, k, i); ec >= 0)
          row.emplace_back(ec, cfg.h);
        ir.lp.add_eq(std::move(row), cfg.h * lam(i, k));
        ir.eq_info.push_back({RowInfo::Kind::Dynamics, t, k, i, -1});
      }
    }
  }

  for (int t = 0; t < N; ++t) {
    for (CommodityId k = 0; k < K; ++k) {
      for (CellId i : net.cells_of(k)) {
        const auto& pieces = fd.demand_fn(i, k).pieces;
        for (int p = 0; p < static_cast<int>(pieces.size()); ++p) {
          std::vector<std::pair<int, double>> row;
          for (int a : net.arcs_out(k, i))
            row.emplace_back(ir.flow_col_of(t, k, a), 1.0);
          if (int ec = ir.exit_col_of(t, k, i); ec >= 0)
            row.emplace_back(ec, 1.0);
          if (pieces[p].slope != 0.0)
            row.emplace_back(ir.volume_col(t, k, i), -pieces[p].slope);
          ir.lp.add_le(std::move(row), pieces[p].intercept);
          ir.le_info.push_back({RowInfo::Kind::DemandCap, t, k, i, p});
        }
      }
    }
    for (CellId j = 0; j < n; ++j) {
      if (!net.has_incoming(j)) continue;
      const auto& pieces = fd.supply_fn(j).pieces;
      for (int p = 0; p < static_cast<int>(pieces.size()); ++p) {
        std::vector<std::pair<int, double>> row;
        for (CommodityId k = 0; k < K; ++k)
          for (int a : net.arcs_in(k, j))
            row.emplace_back(ir.flow_col_of(t, k, a), 1.0);
        for (CommodityId k = 0; k < K; ++k) {
          if (!net.utilizable(k, j)) continue;
          double coef = -pieces[p].slope * fd.weight(j, k);
          if (coef != 0.0)
            row.emplace_back(ir.volume_col(t, k, j), coef);
        }
        ir.lp.add_le(std::move(row), pieces[p].intercept);
        ir.le_info.push_back({RowInfo::Kind::SupplyCap, t, -1, j, p});
      }
    }
  }
  return ir;
}

// Lays a simulated trajectory onto the LP variable grid.
inline std::vector<double> embed_simulation(const ProgramIR& ir,
                                            const Network& net,
                                            const Trajectory& traj) {
  if (traj.steps() != ir.steps)
    throw Error("trajectory length does not match program");
  std::vector<double> v(ir.lp.num_vars, 0.0);
  for (int t = 0; t <= ir.steps; ++t)
    for (CommodityId k = 0; k < net.num_commodities(); ++k)
      for (CellId i : net.cells_of(k))
        v[ir.volume_col(t, k, i)] = traj.x[t](i, k);
  for (int t = 0; t < ir.steps; ++t) {
    for (CommodityId k = 0; k < net.num_commodities(); ++k) {
      for (std::size_t a = 0; a < net.arcs(k).size(); ++a)
        v[ir.flow_col_of(t, k, static_cast<int>(a))] = traj.flows[t].arc[k][a];
      for (CellId i : net.offramps_of(k))
        v[ir.exit_col_of(t, k, i)] = traj.flows[t].exit(i, k);
    }
  }
  return v;
}

struct ResidualReport {
  double eq = 0.0;     // max |equality row residual|
  double ineq = 0.0;   // max inequality overshoot
  double lower = 0.0;  // max negative-variable overshoot
  double max_abs() const { return std::max({eq, ineq, lower}); }
};

inline ResidualReport residuals(const ProgramIR& ir,
                                const std::vector<double>& v) {
  ResidualReport rep;
  for (std::size_t r = 0; r < ir.lp.eq_rows.size(); ++r) {
    double s = -ir.lp.eq_rhs[r];
    for (const auto& [c, a] : ir.lp.eq_rows[r]) s += a * v[c];
    rep.eq = std::max(rep.eq, std::abs(s));
  }
  for (std::size_t r = 0; r < ir.lp.le_rows.size(); ++r) {
    double s = -ir.lp.le_rhs[r];
    for (const auto& [c, a] : ir.lp.le_rows[r]) s += a * v[c];
    rep.ineq = std::max(rep.ineq, s);
  }
  for (double x : v) rep.lower = std::max(rep.lower, -x);
  return rep;
}

inline double relaxed_cost(const ProgramIR& ir, const std::vector<double>& v) {
  double J = 0.0;
  for (int j = 0; j < ir.lp.num_vars; ++j) J += ir.lp.objective[j] * v[j];
  return J;
}

// Relaxed optimizer output in trajectory form.
struct RelaxedSolution {
  std::vector<CellCommodityMatrix> x;              // steps+1 entries
  std::vector<std::vector<std::vector<double>>> arc;  // [t][k][a]
  std::vector<CellCommodityMatrix> exit;           // steps entries
  double objective = 0.0;
};

inline RelaxedSolution from_vector(const ProgramIR& ir, const Network& net,
                                   const std::vector<double>& v) {
  RelaxedSolution rs;
  rs.objective = relaxed_cost(ir, v);
  rs.x.assign(ir.steps + 1,
              CellCommodityMatrix(ir.num_cells, ir.num_commodities, 0.0));
  rs.exit.assign(ir.steps,
                 CellCommodityMatrix(ir.num_cells, ir.num_commodities, 0.0));
  rs.arc.resize(ir.steps);
  for (int t = 0; t <= ir.steps; ++t)
    for (CommodityId k = 0; k < net.num_commodities(); ++k)
      for (CellId i : net.cells_of(k))
        rs.x[t](i, k) = v[ir.volume_col(t, k, i)];
  for (int t = 0; t < ir.steps; ++t) {
    rs.arc[t].resize(net.num_commodities());
    for (CommodityId k = 0; k < net.num_commodities(); ++k) {
      rs.arc[t][k].resize(net.arcs(k).size());
      for (std::size_t a = 0; a < net.arcs(k).size(); ++a)
        rs.arc[t][k][a] = v[ir.flow_col_of(t, k, static_cast<int>(a))];
      for (CellId i : net.offramps_of(k))
        rs.exit[t](i, k) = v[ir.exit_col_of(t, k, i)];
    }
  }
  return rs;
}

// Every cap row must touch at least one flow or exit column with positive
// coefficient, otherwise the row could force volumes instead of flows.
inline bool rows_touch_flows(const ProgramIR& ir) {
  for (std::size_t r = 0; r < ir.lp.le_rows.size(); ++r) {
    bool ok = false;
    for (const auto& [c, a] : ir.lp.le_rows[r]) {
      auto kind = ir.var_info[c].kind;
      if (a > 0 &&
          (kind == VarInfo::Kind::Flow || kind == VarInfo::Kind::Exit)) {
        ok = true;
        break;
      }
    }
    if (!ok) return false;
  }
  return true;
}

}  // namespace mcdta
