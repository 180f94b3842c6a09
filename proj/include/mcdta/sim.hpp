#pragma once

#include <cmath>
#include <vector>

#include "mcdta/core.hpp"
#include "mcdta/fundamental.hpp"
#include "mcdta/network.hpp"

namespace mcdta {

// Speed limit / metering factors in [0,1] per (cell, commodity) plus turn
// fractions. One entry per time step, or a single entry reused for all steps.
struct ControlSequence {
  std::vector<CellCommodityMatrix> alpha;
  std::vector<RoutingMatrix> routing;

  const CellCommodityMatrix& alpha_at(int t) const {
    return alpha.size() == 1 ? alpha.front() : alpha[t];
  }
  const RoutingMatrix& routing_at(int t) const {
    return routing.size() == 1 ? routing.front() : routing[t];
  }
  static ControlSequence constant(CellCommodityMatrix a, RoutingMatrix r) {
    ControlSequence c;
    c.alpha.push_back(std::move(a));
    c.routing.push_back(std::move(r));
    return c;
  }
};

// Exogenous inflow per (cell, commodity); same one-or-per-step convention.
struct InflowSequence {
  std::vector<CellCommodityMatrix> lambda;

  const CellCommodityMatrix& at(int t) const {
    return lambda.size() == 1 ? lambda.front() : lambda[t];
  }
  static InflowSequence constant(CellCommodityMatrix l) {
    InflowSequence s;
    s.lambda.push_back(std::move(l));
    return s;
  }
  static InflowSequence zero(int cells, int commodities) {
    return constant(CellCommodityMatrix(cells, commodities, 0.0));
  }
};

struct SimConfig {
  double h = 0.1;
  int steps = 0;
};

class CflViolation : public Error {
 public:
  explicit CflViolation(const std::string& what) : Error(what) {}
};

// The step size must not let a cell send out more volume than it holds.
inline bool cfl_ok(const FundamentalDiagram& fd, double h) {
  return h > 0 && h * max_demand_slope(fd) <= 1.0 + 1e-12;
}

// Controlled demand actually offered by each cell: alpha * d(x), zero off
// the commodity's cells.
inline CellCommodityMatrix offered_demand(const Network& net,
                                          const FundamentalDiagram& fd,
                                          const CellCommodityMatrix& x,
                                          const CellCommodityMatrix& alpha) {
  CellCommodityMatrix out(net.num_cells(), net.num_commodities(), 0.0);
  for (CommodityId k = 0; k < net.num_commodities(); ++k)
    for (CellId i : net.cells_of(k))
      out(i, k) = alpha(i, k) * eval_demand(fd, i, k, x(i, k));
  return out;
}

// Largest fraction of its offered demand each cell may release under the
// FIFO rule: every downstream cell that receives a positive turn fraction
// caps the sender by its supply margin. Cells with no congested receiver,
// including all off-ramps, get 1.
inline std::vector<double> compute_gamma(const Network& net,
                                         const FundamentalDiagram& fd,
                                         const CellCommodityMatrix& x,
                                         const CellCommodityMatrix& alpha,
                                         const RoutingMatrix& routing) {
  const int n = net.num_cells();
  CellCommodityMatrix offer = offered_demand(net, fd, x, alpha);

  std::vector<double> inflow_demand(n, 0.0);
  for (CommodityId k = 0; k < net.num_commodities(); ++k)
    for (const Arc& a : net.arcs(k))
      inflow_demand[a.to] += routing.at(k, a.from, a.to) * offer(a.from, k);

  std::vector<double> ratio(n, 1.0);
  for (CellId j = 0; j < n; ++j) {
    if (inflow_demand[j] <= 0.0) continue;
    double s = eval_supply(fd, j, weighted_volume(fd, x, j));
    ratio[j] = std::min(1.0, s / inflow_demand[j]);
  }

  std::vector<double> gamma(n, 1.0);
  for (CommodityId k = 0; k < net.num_commodities(); ++k)
    for (const Arc& a : net.arcs(k))
      if (routing.at(k, a.from, a.to) > 0.0)
        gamma[a.from] = std::min(gamma[a.from], ratio[a.to]);
  return gamma;
}

struct FlowState {
  // arc[k][a] is the flow on net.arcs(k)[a].
  std::vector<std::vector<double>> arc;
  // Flow leaving the network, non-zero only on off-ramp cells.
  CellCommodityMatrix exit;
  // Total outflow per (cell, commodity): arc flows plus exit.
  CellCommodityMatrix total_out;
  std::vector<double> gamma;
};

inline FlowState compute_flows(const Network& net,
                               const FundamentalDiagram& fd,
                               const CellCommodityMatrix& x,
                               const CellCommodityMatrix& alpha,
                               const RoutingMatrix& routing) {
  const int n = net.num_cells();
  const int K = net.num_commodities();
  FlowState fs;
  fs.gamma = compute_gamma(net, fd, x, alpha, routing);
  fs.exit = CellCommodityMatrix(n, K, 0.0);
  fs.total_out = CellCommodityMatrix(n, K, 0.0);
  fs.arc.resize(K);

  CellCommodityMatrix offer = offered_demand(net, fd, x, alpha);
  for (CommodityId k = 0; k < K; ++k) {
    fs.arc[k].assign(net.arcs(k).size(), 0.0);
    for (std::size_t a = 0; a < net.arcs(k).size(); ++a) {
      const Arc& arc = net.arcs(k)[a];
      fs.arc[k][a] = fs.gamma[arc.from] * routing.at(k, arc.from, arc.to) *
                     offer(arc.from, k);
      fs.total_out(arc.from, k) += fs.arc[k][a];
    }
    for (CellId i : net.offramps_of(k)) {
      fs.exit(i, k) = offer(i, k);
      fs.total_out(i, k) += fs.exit(i, k);
    }
  }
  return fs;
}

// One explicit Euler step. Tiny negative volumes from roundoff are snapped
// to zero; anything beyond roundoff scale means the step size violates the
// stability bound.
inline CellCommodityMatrix step(const Network& net,
                                const FundamentalDiagram& fd,
                                const CellCommodityMatrix& x,
                                const CellCommodityMatrix& alpha,
                                const RoutingMatrix& routing,
                                const CellCommodityMatrix& lambda, double h,
                                FlowState* flows_out = nullptr) {
  FlowState fs = compute_flows(net, fd, x, alpha, routing);
  CellCommodityMatrix next = x;
  for (CommodityId k = 0; k < net.num_commodities(); ++k) {
    for (CellId i : net.cells_of(k)) {
      double in = lambda(i, k);
      for (int a : net.arcs_in(k, i)) in += fs.arc[k][a];
      double v = x(i, k) + h * (in - fs.total_out(i, k));
      if (v < 0.0) {
        if (v < -1e-12)
          throw CflViolation("volume went negative at cell " +
                             std::to_string(i) + " commodity " +
                             std::to_string(k) + ": " + std::to_string(v));
        v = 0.0;
      }
      next(i, k) = v;
    }
  }
  if (flows_out) *flows_out = std::move(fs);
  return next;
}

struct Trajectory {
  // x has steps+1 entries, flows has steps.
  std::vector<CellCommodityMatrix> x;
  std::vector<FlowState> flows;
  double h = 0.0;

  int steps() const { return static_cast<int>(flows.size()); }
};

inline Trajectory simulate(const Network& net, const FundamentalDiagram& fd,
                           const CellCommodityMatrix& x0,
                           const ControlSequence& controls,
                           const InflowSequence& inflow,
                           const SimConfig& cfg) {
  if (!(cfg.h > 0)) throw Error("step size must be positive");
  if (cfg.steps < 0) throw Error("step count must be non-negative");
  Trajectory traj;
  traj.h = cfg.h;
  traj.x.reserve(cfg.steps + 1);
  traj.flows.resize(cfg.steps);
  traj.x.push_back(x0);
  for (int t = 0; t < cfg.steps; ++t) {
    traj.x.push_back(step(net, fd, traj.x.back(), controls.alpha_at(t),
                          controls.routing_at(t), inflow.at(t), cfg.h,
                          &traj.flows[t]));
  }
  return traj;
}

// Linear running cost: non-negative volume prices, non-positive outflow
// prices (rewarding discharge).
struct CostSpec {
  CellCommodityMatrix volume_price;   // c_x >= 0
  CellCommodityMatrix outflow_price;  // c_z <= 0

  static CostSpec total_volume(int cells, int commodities) {
    CostSpec c;
    c.volume_price = CellCommodityMatrix(cells, commodities, 1.0);
    c.outflow_price = CellCommodityMatrix(cells, commodities, 0.0);
    return c;
  }

  bool valid() const {
    for (double v : volume_price.data())
      if (!(v >= 0) || !std::isfinite(v)) return false;
    for (double v : outflow_price.data())
      if (!(v <= 0) || !std::isfinite(v)) return false;
    return true;
  }
};

// Left endpoint rule over the step grid; the terminal state carries no cost.
inline double cost_of_trajectory(const Network& net, const CostSpec& cost,
                                 const Trajectory& traj) {
  double J = 0.0;
  for (int t = 0; t < traj.steps(); ++t) {
    double stage = 0.0;
    for (CommodityId k = 0; k < net.num_commodities(); ++k) {
      for (CellId i : net.cells_of(k)) {
        stage += cost.volume_price(i, k) * traj.x[t](i, k);
        stage += cost.outflow_price(i, k) * traj.flows[t].total_out(i, k);
      }
    }
    J += stage;
  }
  return traj.h * J;
}

}  // namespace mcdta
