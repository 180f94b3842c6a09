#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "mcdta/core.hpp"
#include "mcdta/fundamental.hpp"
#include "mcdta/network.hpp"
#include "mcdta/relax.hpp"
#include "mcdta/sim.hpp"
#include "mcdta/solve.hpp"

namespace mcdta {

struct KktReport {
  double stationarity = 0.0;    // |c + Aeq'chi + Ain'eta - nu|_inf
  double complementarity = 0.0; // max |eta * slack|, |v * nu|
  double primal_feas = 0.0;     // eq residual, ineq overshoot, v >= 0
  double dual_feas = 0.0;       // eta >= 0, nu >= 0
  double duality_gap = 0.0;     // |c.v + (beq.chi + bin.eta)|
  double terminal_costate = 0.0;

  double max_abs() const {
    return std::max({stationarity, complementarity, primal_feas, dual_feas});
  }
};

inline KktReport kkt_residuals(const LinearProgram& lp, const Solution& sol) {
  KktReport rep;
  std::vector<double> grad(lp.objective);
  for (int r = 0; r < lp.num_eq(); ++r)
    for (const auto& [c, a] : lp.eq_rows[r]) grad[c] += a * sol.eq_dual[r];
  for (int r = 0; r < lp.num_le(); ++r)
    for (const auto& [c, a] : lp.le_rows[r]) grad[c] += a * sol.le_dual[r];
  for (int j = 0; j < lp.num_vars; ++j) {
    rep.stationarity =
        std::max(rep.stationarity, std::abs(grad[j] - sol.reduced_cost[j]));
    rep.complementarity =
        std::max(rep.complementarity, std::abs(sol.v[j] * sol.reduced_cost[j]));
    rep.primal_feas = std::max(rep.primal_feas, -sol.v[j]);
    rep.dual_feas = std::max(rep.dual_feas, -sol.reduced_cost[j]);
  }
  double dual_obj = 0.0;
  for (int r = 0; r < lp.num_eq(); ++r) {
    double s = -lp.eq_rhs[r];
    for (const auto& [c, a] : lp.eq_rows[r]) s += a * sol.v[c];
    rep.primal_feas = std::max(rep.primal_feas, std::abs(s));
    dual_obj += lp.eq_rhs[r] * sol.eq_dual[r];
  }
  for (int r = 0; r < lp.num_le(); ++r) {
    double s = -lp.le_rhs[r];
    for (const auto& [c, a] : lp.le_rows[r]) s += a * sol.v[c];
    rep.primal_feas = std::max(rep.primal_feas, s);
    rep.complementarity =
        std::max(rep.complementarity, std::abs(sol.le_dual[r] * s));
    rep.dual_feas = std::max(rep.dual_feas, -sol.le_dual[r]);
    dual_obj += lp.le_rhs[r] * sol.le_dual[r];
  }
  double primal_obj = 0.0;
  for (int j = 0; j < lp.num_vars; ++j)
    primal_obj += lp.objective[j] * sol.v[j];
  rep.duality_gap = std::abs(primal_obj + dual_obj);
  return rep;
}

// Multipliers of the state equations arranged on the time grid: entry t is
// the price of an extra unit of volume appearing at time t. Entry 0 comes
// from the initial-condition rows, entry t+1 from the step t dynamics rows.
// The terminal entry must vanish at an optimum whenever terminal volumes
// stay positive, since nothing prices them.
inline std::vector<CellCommodityMatrix> extract_costate(const ProgramIR& ir,
                                                        const Solution& sol) {
  std::vector<CellCommodityMatrix> chi(
      ir.steps + 1,
      CellCommodityMatrix(ir.num_cells, ir.num_commodities, 0.0));
  for (std::size_t r = 0; r < ir.eq_info.size(); ++r) {
    const RowInfo& info = ir.eq_info[r];
    if (info.kind == RowInfo::Kind::Initial)
      chi[0](info.cell, info.k) = sol.eq_dual[r];
    else if (info.kind == RowInfo::Kind::Dynamics)
      chi[info.t + 1](info.cell, info.k) = sol.eq_dual[r];
  }
  return chi;
}

inline KktReport kkt_residuals(const ProgramIR& ir, const Solution& sol) {
  KktReport rep = kkt_residuals(ir.lp, sol);
  auto chi = extract_costate(ir, sol);
  rep.terminal_costate = 0.0;
  for (double v : chi.back().data())
    rep.terminal_costate = std::max(rep.terminal_costate, std::abs(v));
  return rep;
}

// Cross-check of the costate against the flow functions: between steps the
// multiplier of each volume drops by the running cost plus the capacity
// multipliers weighted by the local demand/supply slopes. Where the relaxed
// volume sits on a breakpoint (or at zero) the slope is set-valued and the
// entry is counted as a kink instead of checked.
struct AdjointReport {
  double max_residual = 0.0;
  int kinks = 0;
  int checked = 0;
};

inline AdjointReport adjoint_check(const ProgramIR& ir,
                                   const FundamentalDiagram& fd,
                                   const Solution& sol) {
  const int n = ir.num_cells;
  const int K = ir.num_commodities;
  const int N = ir.steps;
  auto chi = extract_costate(ir, sol);

  std::vector<double> eta_demand(static_cast<std::size_t>(N) * n * K, 0.0);
  std::vector<double> eta_supply(static_cast<std::size_t>(N) * n, 0.0);
  for (std::size_t r = 0; r < ir.le_info.size(); ++r) {
    const RowInfo& info = ir.le_info[r];
    if (info.kind == RowInfo::Kind::DemandCap)
      eta_demand[(static_cast<std::size_t>(info.t) * n + info.cell) * K +
                 info.k] += sol.le_dual[r];
    else if (info.kind == RowInfo::Kind::SupplyCap)
      eta_supply[static_cast<std::size_t>(info.t) * n + info.cell] +=
          sol.le_dual[r];
  }

  auto active_slopes = [](const PiecewiseConcave& f, double at, double& lo,
                          double& hi, bool& kink) {
    double val = f.eval(at);
    double tol = 1e-9 * std::max(1.0, std::abs(val));
    lo = kInf;
    hi = -kInf;
    int active = 0;
    for (const auto& p : f.pieces) {
      if (p.eval(at) <= val + tol) {
        ++active;
        lo = std::min(lo, p.slope);
        hi = std::max(hi, p.slope);
      }
    }
    if (active > 1) kink = true;
  };

  AdjointReport rep;
  for (int t = 0; t < N; ++t) {
    for (CommodityId k = 0; k < K; ++k) {
      for (CellId i = 0; i < n; ++i) {
        int col = ir.volume_col(t, k, i);
        if (col < 0) continue;
        double xbar = std::max(0.0, sol.v[col]);
        bool kink = xbar <= 1e-9;

        double dlo, dhi;
        active_slopes(fd.demand_fn(i, k), xbar, dlo, dhi, kink);
        double ed =
            eta_demand[(static_cast<std::size_t>(t) * n + i) * K + k];

        double es = eta_supply[static_cast<std::size_t>(t) * n + i];
        double slo = 0.0, shi = 0.0;
        if (es != 0.0) {
          double xi = 0.0;
          for (CommodityId k2 = 0; k2 < K; ++k2) {
            int c2 = ir.volume_col(t, k2, i);
            if (c2 >= 0) xi += fd.weight(i, k2) * std::max(0.0, sol.v[c2]);
          }
          active_slopes(fd.supply_fn(i), xi, slo, shi, kink);
        }

        if (kink) {
          ++rep.kinks;
          continue;
        }
        double base = -ir.lp.objective[col] + sol.reduced_cost[col];
        double w = fd.weight(i, k);
        double lo = base + ed * dlo + es * w * slo;
        double hi = base + ed * dhi + es * w * shi;
        if (lo > hi) std::swap(lo, hi);
        double lhs = chi[t](i, k) - chi[t + 1](i, k);
        rep.max_residual =
            std::max({rep.max_residual, lo - lhs, lhs - hi});
        ++rep.checked;
      }
    }
  }
  return rep;
}

class OracleTooLarge : public Error {
 public:
  explicit OracleTooLarge(const std::string& what) : Error(what) {}
};

struct OracleOptions {
  int alpha_points = 11;
  int routing_points = 11;
  long long max_evaluations = 10'000'000;
};

struct OracleResult {
  double best_cost = kInf;
  // Largest cost change between grid points adjacent in one coordinate;
  // bounds how far the grid optimum can sit above the continuous one along
  // the scanned axes.
  double grid_slack = 0.0;
  long long evaluations = 0;
  int dimensions = 0;
};

// Exhaustive scan over piecewise-constant controls on a uniform grid:
// one release fraction per step for every (cell, commodity) whose demand is
// not identically zero, and one turn fraction per step for every cell with
// exactly two outgoing arcs in a commodity. When outflow carries no price
// the final step's controls cannot affect the cost and are left at 1.
inline OracleResult brute_force_oracle(const Network& net,
                                       const FundamentalDiagram& fd,
                                       const CostSpec& cost,
                                       const CellCommodityMatrix& x0,
                                       const InflowSequence& inflow,
                                       const SimConfig& cfg,
                                       const OracleOptions& opts = {}) {
  const int n = net.num_cells();
  const int K = net.num_commodities();

  bool outflow_priced = false;
  for (double v : cost.outflow_price.data())
    if (v != 0.0) outflow_priced = true;
  const int active_steps = outflow_priced ? cfg.steps : cfg.steps - 1;

  struct Dim {
    bool is_alpha;
    int t;
    CommodityId k;
    CellId cell;
    int arc_a = -1, arc_b = -1;
    int points;
  };
  std::vector<Dim> dims;
  for (int t = 0; t < active_steps; ++t) {
    for (CommodityId k = 0; k < K; ++k) {
      for (CellId i : net.cells_of(k)) {
        if (eval_demand(fd, i, k, 1e12) > 0.0)
          dims.push_back({true, t, k, i, -1, -1, opts.alpha_points});
        const auto& out = net.arcs_out(k, i);
        if (out.size() == 2)
          dims.push_back({false, t, k, i, out[0], out[1],
                          opts.routing_points});
        else if (out.size() > 2)
          throw OracleTooLarge(
              "scan supports at most two outgoing arcs per cell");
      }
    }
  }

  long long total = 1;
  for (const Dim& d : dims) {
    if (total > opts.max_evaluations / d.points + 1)
      throw OracleTooLarge("grid would need more than " +
                           std::to_string(opts.max_evaluations) +
                           " simulations");
    total *= d.points;
  }
  if (total > opts.max_evaluations)
    throw OracleTooLarge("grid would need more than " +
                         std::to_string(opts.max_evaluations) +
                         " simulations");

  // Default controls: everything released, even splits at scanned diverges.
  ControlSequence controls;
  for (int t = 0; t < cfg.steps; ++t) {
    controls.alpha.emplace_back(n, K, 1.0);
    RoutingMatrix r(n, K);
    for (CommodityId k = 0; k < K; ++k) {
      for (CellId i : net.cells_of(k)) {
        const auto& out = net.arcs_out(k, i);
        if (out.empty()) continue;
        double share = 1.0 / static_cast<double>(out.size());
        for (int a : out) {
          const Arc& e = net.arcs(k)[a];
          r.at(k, e.from, e.to) = share;
        }
      }
    }
    controls.routing.push_back(std::move(r));
  }

  auto apply = [&](const Dim& d, int idx) {
    double g = d.points == 1
                   ? 1.0
                   : static_cast<double>(idx) / (d.points - 1);
    if (d.is_alpha) {
      controls.alpha[d.t](d.cell, d.k) = g;
    } else {
      const Arc& ea = net.arcs(d.k)[d.arc_a];
      const Arc& eb = net.arcs(d.k)[d.arc_b];
      controls.routing[d.t].at(d.k, ea.from, ea.to) = g;
      controls.routing[d.t].at(d.k, eb.from, eb.to) = 1.0 - g;
    }
  };

  auto evaluate = [&]() {
    CellCommodityMatrix x = x0;
    double J = 0.0;
    FlowState fs;
    for (int t = 0; t < cfg.steps; ++t) {
      CellCommodityMatrix next =
          step(net, fd, x, controls.alpha_at(t), controls.routing_at(t),
               inflow.at(t), cfg.h, &fs);
      double stage = 0.0;
      for (CommodityId k = 0; k < K; ++k) {
        for (CellId i : net.cells_of(k)) {
          stage += cost.volume_price(i, k) * x(i, k);
          stage += cost.outflow_price(i, k) * fs.total_out(i, k);
        }
      }
      J += stage;
      x = std::move(next);
    }
    return cfg.h * J;
  };

  OracleResult res;
  res.dimensions = static_cast<int>(dims.size());
  std::vector<double> costs(static_cast<std::size_t>(total));
  std::vector<int> idx(dims.size(), 0);
  for (const Dim& d : dims) apply(d, 0);
  for (long long s = 0;; ++s) {
    costs[s] = evaluate();
    res.best_cost = std::min(res.best_cost, costs[s]);

    std::size_t d = 0;
    for (; d < dims.size(); ++d) {
      if (++idx[d] < dims[d].points) {
        apply(dims[d], idx[d]);
        break;
      }
      idx[d] = 0;
      apply(dims[d], 0);
    }
    if (d == dims.size()) break;
  }
  res.evaluations = total;

  long long stride = 1;
  for (const Dim& d : dims) {
    for (long long s = 0; s < total; ++s) {
      long long pos = (s / stride) % d.points;
      if (pos + 1 < d.points)
        res.grid_slack = std::max(res.grid_slack,
                                  std::abs(costs[s] - costs[s + stride]));
    }
    stride *= d.points;
  }
  return res;
}

// Flow-maximizing split at a two-way diverge where one branch is shared by
// both commodities. Demands are the volumes themselves, supplies are
// cap - occupancy. The three regimes: the exclusive branch absorbs all of
// commodity a; both branches absorb all demand; or the shared branch is
// short and any split filling it is optimal, returned as the two
// single-commodity extremes.
struct DivergeFlows {
  int regime = 0;  // 1, 2 or 3
  double f13 = 0.0;
  // Regime 1 and 2: the unique optimal shared-branch flows. Regime 3: the
  // commodity-a-first extreme.
  double f12_a = 0.0, f12_b = 0.0;
  // Regime 3 only: the commodity-b-first extreme.
  double alt_f12_a = 0.0, alt_f12_b = 0.0;
};

class NotDivergeFixture : public Error {
 public:
  explicit NotDivergeFixture(const std::string& what) : Error(what) {}
};

// Cell and commodity roles in the two-way diverge: one entry cell feeding
// two off-ramps, commodity `both` allowed on either branch, commodity
// `shared_only` restricted to the branch it shares with `both`.
struct DivergeRoles {
  CellId entry = -1;
  CellId shared = -1;
  CellId exclusive = -1;
  CommodityId both = -1;
  CommodityId shared_only = -1;
};

inline DivergeRoles require_diverge_fixture(const Network& net) {
  if (net.num_cells() != 3 || net.num_commodities() != 2)
    throw NotDivergeFixture("expected 3 cells and 2 commodities");
  DivergeRoles roles;
  std::vector<CellId> offramps;
  for (CellId i = 0; i < 3; ++i) {
    if (net.is_onramp(i) && !net.is_offramp(i))
      roles.entry = roles.entry < 0 ? i : -2;
    else if (net.is_offramp(i) && !net.is_onramp(i))
      offramps.push_back(i);
  }
  if (roles.entry < 0 || offramps.size() != 2)
    throw NotDivergeFixture("expected one entry cell and two off-ramps");
  if (net.tail(offramps[0]) != net.head(roles.entry) ||
      net.tail(offramps[1]) != net.head(roles.entry))
    throw NotDivergeFixture("off-ramps must hang off the entry cell's head");
  for (CommodityId k = 0; k < 2; ++k) {
    std::size_t used = net.cells_of(k).size();
    if (used == 3 && roles.both < 0)
      roles.both = k;
    else if (used == 2 && roles.shared_only < 0)
      roles.shared_only = k;
  }
  if (roles.both < 0 || roles.shared_only < 0)
    throw NotDivergeFixture(
        "expected one commodity on all cells and one on two");
  for (CellId i : offramps) {
    if (net.utilizable(roles.shared_only, i))
      roles.shared = i;
    else
      roles.exclusive = i;
  }
  if (roles.shared < 0 || roles.exclusive < 0 ||
      !net.utilizable(roles.shared_only, roles.entry))
    throw NotDivergeFixture(
        "restricted commodity must run from the entry to one off-ramp");
  if (net.arcs(roles.both).size() != 2 ||
      net.arcs(roles.shared_only).size() != 1)
    throw NotDivergeFixture("junction arcs do not match the two-way diverge");
  return roles;
}

inline DivergeFlows diverge_case_flows(double x1_a, double x1_b, double x2_a,
                                       double x2_b, double x3_a, double cap) {
  const double s2 = std::max(0.0, cap - x2_a - x2_b);
  const double s3 = std::max(0.0, cap - x3_a);
  DivergeFlows out;
  out.f13 = std::min(x1_a, s3);
  if (out.f13 >= x1_a) {
    out.regime = 1;
    out.f12_a = 0.0;
    out.f12_b = std::min(x1_b, s2);
    return out;
  }
  if (s2 + s3 >= x1_a + x1_b) {
    out.regime = 2;
    out.f12_a = x1_a - out.f13;
    out.f12_b = x1_b;
    return out;
  }
  out.regime = 3;
  out.f12_a = std::min(s2, x1_a - out.f13);
  out.f12_b = std::min(s2 - out.f12_a, x1_b);
  out.alt_f12_b = std::min(s2, x1_b);
  out.alt_f12_a = std::min(s2 - out.alt_f12_b, x1_a - out.f13);
  return out;
}

inline DivergeFlows diverge_case_flows(const Network& net,
                                       const CellCommodityMatrix& x,
                                       double cap) {
  DivergeRoles roles = require_diverge_fixture(net);
  return diverge_case_flows(
      x(roles.entry, roles.both), x(roles.entry, roles.shared_only),
      x(roles.shared, roles.both), x(roles.shared, roles.shared_only),
      x(roles.exclusive, roles.both), cap);
}

}  // namespace mcdta
