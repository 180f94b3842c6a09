#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "mcdta/core.hpp"
#include "mcdta/fundamental.hpp"
#include "mcdta/network.hpp"
#include "mcdta/relax.hpp"
#include "mcdta/sim.hpp"

namespace mcdta {

class RecoverError : public Error {
 public:
  explicit RecoverError(const std::string& what) : Error(what) {}
};

struct RecoveredControls {
  ControlSequence controls;
  // Largest amount any release fraction was clamped back into [0, 1].
  double max_alpha_clip = 0.0;
};

inline constexpr double kDemandSlack = 1e-6;

// Release fractions are outflow over demand with alpha = 1 where both
// vanish; turn fractions split each cell's flow proportionally, falling
// back to a uniform split when the cell sends nothing.
inline RecoveredControls recover_controls(const Network& net,
                                          const FundamentalDiagram& fd,
                                          const ProgramIR& ir,
                                          const RelaxedSolution& rs) {
  const int n = net.num_cells();
  const int K = net.num_commodities();
  RecoveredControls rec;
  for (int t = 0; t < ir.steps; ++t) {
    CellCommodityMatrix alpha(n, K, 1.0);
    RoutingMatrix routing(n, K);
    for (CommodityId k = 0; k < K; ++k) {
      for (CellId i : net.cells_of(k)) {
        double out = rs.exit[t](i, k);
        for (int a : net.arcs_out(k, i)) out += rs.arc[t][k][a];
        double dem = eval_demand(fd, i, k, rs.x[t](i, k));
        if (out > dem + kDemandSlack)
          throw RecoverError(
              "outflow " + std::to_string(out) + " exceeds demand " +
              std::to_string(dem) + " at step " + std::to_string(t) +
              " cell " + std::to_string(i) + " commodity " +
              std::to_string(k));
        double a;
        if (dem <= 0.0) {
          a = 1.0;
        } else {
          a = out / dem;
          if (a > 1.0) {
            rec.max_alpha_clip = std::max(rec.max_alpha_clip, a - 1.0);
            a = 1.0;
          } else if (a < 0.0) {
            rec.max_alpha_clip = std::max(rec.max_alpha_clip, -a);
            a = 0.0;
          }
        }
        alpha(i, k) = a;

        const auto& out_arcs = net.arcs_out(k, i);
        if (out_arcs.empty()) continue;
        double total = 0.0;
        for (int arc : out_arcs) total += rs.arc[t][k][arc];
        if (total > 0.0) {
          for (int arc : out_arcs) {
            const Arc& e = net.arcs(k)[arc];
            routing.at(k, e.from, e.to) = rs.arc[t][k][arc] / total;
          }
        } else {
          double share = 1.0 / static_cast<double>(out_arcs.size());
          for (int arc : out_arcs) {
            const Arc& e = net.arcs(k)[arc];
            routing.at(k, e.from, e.to) = share;
          }
        }
      }
    }
    rec.controls.alpha.push_back(std::move(alpha));
    rec.controls.routing.push_back(std::move(routing));
  }
  return rec;
}

struct TightnessReport {
  double max_state_dev = 0.0;
  double max_gamma_dev = 0.0;
  double cost_simulated = 0.0;
  double cost_relaxed = 0.0;
  Trajectory trajectory;

  double cost_gap() const { return std::abs(cost_simulated - cost_relaxed); }
  bool tight(double state_tol, double gamma_tol, double cost_tol) const {
    return max_state_dev <= state_tol && max_gamma_dev <= gamma_tol &&
           cost_gap() <= cost_tol;
  }
};

// Replays the recovered controls through the simulator and compares against
// the relaxed solution: states must coincide, no cell may be throttled by
// downstream congestion, and the cost must match.
inline TightnessReport verify_tightness(const Network& net,
                                        const FundamentalDiagram& fd,
                                        const CostSpec& cost,
                                        const InflowSequence& inflow,
                                        const SimConfig& cfg,
                                        const RelaxedSolution& rs,
                                        const ControlSequence& controls) {
  TightnessReport rep;
  rep.trajectory = simulate(net, fd, rs.x.front(), controls, inflow, cfg);
  for (int t = 0; t <= cfg.steps; ++t)
    rep.max_state_dev =
        std::max(rep.max_state_dev, max_abs_diff(rep.trajectory.x[t], rs.x[t]));
  for (int t = 0; t < cfg.steps; ++t)
    for (double g : rep.trajectory.flows[t].gamma)
      rep.max_gamma_dev = std::max(rep.max_gamma_dev, std::abs(1.0 - g));
  rep.cost_simulated = cost_of_trajectory(net, cost, rep.trajectory);
  rep.cost_relaxed = rs.objective;
  return rep;
}

}  // namespace mcdta
