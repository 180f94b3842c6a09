#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>
#include <vector>

#include "mcdta/relax.hpp"
#include "mcdta/sim.hpp"
#include "support/oracles.hpp"

using namespace mcdta;

namespace {

struct OneCell {
  Network net;
  FundamentalDiagram fd;
  CostSpec cost;
  CellCommodityMatrix x0;
  InflowSequence inflow;
  SimConfig cfg;
};

OneCell one_cell(double h, int steps) {
  OneCell f;
  NetworkSpec spec;
  spec.cells = {{kWorldNode, kWorldNode}};
  spec.num_commodities = 1;
  spec.utilizable = {{0}};
  f.net = build_network(spec);
  f.fd = FundamentalDiagram(1, 1);
  f.fd.demand_fn(0, 0) = PiecewiseConcave{{{1.0, 0.0}}};
  f.fd.supply_fn(0) = affine_supply(10.0, 1.0);
  f.cost = CostSpec::total_volume(1, 1);
  f.x0 = CellCommodityMatrix(1, 1, 1.0);
  f.inflow = InflowSequence::constant(CellCommodityMatrix(1, 1, 0.0));
  f.cfg = {h, steps};
  return f;
}

int count_kind(const std::vector<RowInfo>& info, RowInfo::Kind kind) {
  int c = 0;
  for (const RowInfo& r : info)
    if (r.kind == kind) ++c;
  return c;
}

}  // namespace

TEST_CASE("ramp cell program has no supply rows without inbound arcs") {
  OneCell f = one_cell(0.5, 1);
  ProgramIR ir = discretize(f.net, f.fd, f.cost, f.x0, f.inflow, f.cfg);

  CHECK(ir.lp.num_vars == 3);  // two volumes and one exit flow
  CHECK(ir.lp.num_eq() == 2);  // initial pin plus one update
  CHECK(ir.lp.num_le() == 1);  // single demand piece
  REQUIRE(ir.le_info.size() == 1);
  CHECK(ir.le_info[0].kind == RowInfo::Kind::DemandCap);
  CHECK(count_kind(ir.le_info, RowInfo::Kind::SupplyCap) == 0);

  CHECK(ir.lp.objective[ir.volume_col(0, 0, 0)] == Catch::Approx(0.5));
  CHECK(ir.lp.objective[ir.volume_col(1, 0, 0)] == 0.0);
  CHECK(ir.lp.objective[ir.exit_col_of(0, 0, 0)] == 0.0);

  Solution sol = solve(ir.lp);
  REQUIRE(sol.outcome == SolveOutcome::Optimal);
  CHECK(sol.objective == Catch::Approx(0.5).margin(1e-8));
}

TEST_CASE("zero-step program pins the state and costs nothing") {
  OneCell f = one_cell(0.5, 0);
  ProgramIR ir = discretize(f.net, f.fd, f.cost, f.x0, f.inflow, f.cfg);
  CHECK(ir.lp.num_vars == 1);
  CHECK(ir.lp.num_eq() == 1);
  CHECK(ir.lp.num_le() == 0);
  Solution sol = solve(ir.lp);
  REQUIRE(sol.outcome == SolveOutcome::Optimal);
  CHECK(sol.v[0] == Catch::Approx(1.0).margin(1e-9));
  CHECK(sol.objective == Catch::Approx(0.0).margin(1e-9));
}

TEST_CASE("ten-cell program dimensions") {
  testsupport::TenCell f = testsupport::ten_cell_fixture();
  REQUIRE(f.cfg.steps == 60);
  ProgramIR ir = discretize(f.net, f.fd, f.cost, f.x0, f.inflow, f.cfg);

  // 17 allowed (cell, commodity) pairs, 16 junction arcs, 3 exit ramps.
  CHECK(ir.lp.num_vars == 17 * 61 + 60 * (16 + 3));
  CHECK(ir.lp.num_eq() == 17 * 61);
  CHECK(ir.lp.num_le() == 60 * (17 + 8));
  CHECK(count_kind(ir.le_info, RowInfo::Kind::DemandCap) == 60 * 17);
  CHECK(count_kind(ir.le_info, RowInfo::Kind::SupplyCap) == 60 * 8);
  CHECK(rows_touch_flows(ir));
}

TEST_CASE("program sizes follow the layout formulas") {
  std::mt19937 rng(88122);
  for (int trial = 0; trial < 20; ++trial) {
    CAPTURE(trial);
    testsupport::RandomScenario s = testsupport::random_scenario(rng);
    ProgramIR ir = discretize(s.net, s.fd, s.cost, s.x0, s.inflow, s.cfg);

    const int N = s.cfg.steps;
    int pairs = 0, arcs = 0, ramps = 0, d_pieces = 0, s_pieces = 0;
    for (CommodityId k = 0; k < s.net.num_commodities(); ++k) {
      pairs += static_cast<int>(s.net.cells_of(k).size());
      arcs += static_cast<int>(s.net.arcs(k).size());
      ramps += static_cast<int>(s.net.offramps_of(k).size());
      for (CellId i : s.net.cells_of(k))
        d_pieces += static_cast<int>(s.fd.demand_fn(i, k).pieces.size());
    }
    for (CellId j = 0; j < s.net.num_cells(); ++j)
      if (s.net.has_incoming(j))
        s_pieces += static_cast<int>(s.fd.supply_fn(j).pieces.size());

    CHECK(ir.lp.num_vars == pairs * (N + 1) + N * (arcs + ramps));
    CHECK(ir.lp.num_eq() == pairs * (N + 1));
    CHECK(ir.lp.num_le() == N * (d_pieces + s_pieces));
    CHECK(rows_touch_flows(ir));
  }
}

TEST_CASE("simulated trajectories embed as feasible points with equal cost") {
  std::mt19937 rng(40917);
  for (int trial = 0; trial < 25; ++trial) {
    CAPTURE(trial);
    testsupport::RandomScenario s = testsupport::random_scenario(rng);
    ControlSequence controls =
        testsupport::random_controls(s.net, s.cfg.steps, rng);
    Trajectory traj =
        simulate(s.net, s.fd, s.x0, controls, s.inflow, s.cfg);

    ProgramIR ir = discretize(s.net, s.fd, s.cost, s.x0, s.inflow, s.cfg);
    std::vector<double> v = embed_simulation(ir, s.net, traj);
    CHECK(residuals(ir, v).max_abs() <= 1e-9);

    double J = cost_of_trajectory(s.net, s.cost, traj);
    CHECK(std::abs(relaxed_cost(ir, v) - J) <= 1e-12 * (1.0 + std::abs(J)));
  }
}

TEST_CASE("mixtures of embedded trajectories stay feasible") {
  std::mt19937 rng(6021);
  testsupport::RandomScenario s = testsupport::random_scenario(rng);
  ProgramIR ir = discretize(s.net, s.fd, s.cost, s.x0, s.inflow, s.cfg);

  ControlSequence ca = testsupport::random_controls(s.net, s.cfg.steps, rng);
  ControlSequence cb = testsupport::random_controls(s.net, s.cfg.steps, rng);
  std::vector<double> va = embed_simulation(
      ir, s.net, simulate(s.net, s.fd, s.x0, ca, s.inflow, s.cfg));
  std::vector<double> vb = embed_simulation(
      ir, s.net, simulate(s.net, s.fd, s.x0, cb, s.inflow, s.cfg));

  for (double lam : {0.0, 0.25, 0.5, 0.75, 1.0}) {
    std::vector<double> mix(va.size());
    for (std::size_t j = 0; j < va.size(); ++j)
      mix[j] = lam * va[j] + (1.0 - lam) * vb[j];
    CHECK(residuals(ir, mix).max_abs() <= 1e-9);
  }
}

TEST_CASE("pinning a variable adds an equality that the solver honors") {
  testsupport::Diverge f = testsupport::diverge_fixture(0.6, 0.3, 0.2, 0.1, 0.4);
  ProgramIR ir = discretize(f.net, f.fd, f.cost, f.x0, f.inflow, f.cfg);
  const int before = ir.lp.num_eq();

  int col = ir.flow_col_of(0, 0, 0);
  ir.fix_variable(col, 0.05);
  REQUIRE(ir.lp.num_eq() == before + 1);
  REQUIRE(ir.eq_info.back().kind == RowInfo::Kind::Pin);

  Solution sol = solve(ir.lp);
  REQUIRE(sol.outcome == SolveOutcome::Optimal);
  CHECK(sol.v[col] == Catch::Approx(0.05).margin(1e-8));
}

TEST_CASE("merge supply row is tight exactly when the junction rations") {
  // Two ramps feed one receiving cell and nothing else, so the receiver's
  // ration is the senders' gamma and its supply row must be tight exactly
  // when that ration is below one.
  NetworkSpec spec;
  spec.cells = {{kWorldNode, 0}, {kWorldNode, 0}, {0, kWorldNode}};
  spec.num_commodities = 1;
  spec.utilizable = {{0, 1, 2}};
  Network net = build_network(spec);

  FundamentalDiagram fd(3, 1);
  for (CellId i = 0; i < 3; ++i) {
    fd.demand_fn(i, 0) = PiecewiseConcave{{{1.0, 0.0}}};
    fd.supply_fn(i) = affine_supply(1.0, 1.0);
  }
  CostSpec cost = CostSpec::total_volume(3, 1);
  InflowSequence inflow =
      InflowSequence::constant(CellCommodityMatrix(3, 1, 0.0));
  SimConfig cfg{0.25, 1};
  ControlSequence controls;
  controls.alpha = {CellCommodityMatrix(3, 1, 1.0)};
  controls.routing = {testsupport::uniform_routing(net)};

  auto slack_and_ration = [&](double x0a, double x0b, double x2) {
    CellCommodityMatrix x0(3, 1, 0.0);
    x0(0, 0) = x0a;
    x0(1, 0) = x0b;
    x0(2, 0) = x2;
    Trajectory traj = simulate(net, fd, x0, controls, inflow, cfg);
    ProgramIR ir = discretize(net, fd, cost, x0, inflow, cfg);
    std::vector<double> v = embed_simulation(ir, net, traj);
    REQUIRE(residuals(ir, v).max_abs() <= 1e-9);
    double slack = 0.0;
    for (std::size_t r = 0; r < ir.le_info.size(); ++r) {
      if (ir.le_info[r].kind != RowInfo::Kind::SupplyCap) continue;
      REQUIRE(ir.le_info[r].cell == 2);
      slack = ir.lp.le_rhs[r];
      for (const auto& [c, a] : ir.lp.le_rows[r]) slack -= a * v[c];
    }
    return std::make_pair(slack, traj.flows[0].gamma[0]);
  };

  auto [slack_jam, g_jam] = slack_and_ration(0.8, 0.7, 0.6);
  CHECK(g_jam < 1.0 - 1e-6);
  CHECK(std::abs(slack_jam) <= 1e-12);

  auto [slack_free, g_free] = slack_and_ration(0.1, 0.1, 0.2);
  CHECK(g_free == 1.0);
  CHECK(slack_free > 1e-3);
}

TEST_CASE("a tight supply row pins every sender to the same ration") {
  testsupport::TenCell f = testsupport::ten_cell_fixture();
  ControlSequence controls;
  controls.alpha = {CellCommodityMatrix(10, 2, 1.0)};
  controls.routing = {testsupport::uniform_routing(f.net)};
  Trajectory traj = simulate(f.net, f.fd, f.x0, controls, f.inflow, f.cfg);

  ProgramIR ir = discretize(f.net, f.fd, f.cost, f.x0, f.inflow, f.cfg);
  std::vector<double> v = embed_simulation(ir, f.net, traj);
  REQUIRE(residuals(ir, v).max_abs() <= 1e-9);

  auto ration = [&](int t, CellId j) {
    double routed = 0.0;
    for (CommodityId k = 0; k < 2; ++k) {
      for (int a : f.net.arcs_in(k, j)) {
        const Arc& arc = f.net.arcs(k)[a];
        routed += controls.routing[0].at(k, arc.from, arc.to) *
                  eval_demand(f.fd, arc.from, k, traj.x[t](arc.from, k));
      }
    }
    double room = eval_supply(f.fd, j, weighted_volume(f.fd, traj.x[t], j));
    return routed > 0.0 ? std::min(1.0, room / routed) : 1.0;
  };

  int tight_seen = 0;
  for (std::size_t r = 0; r < ir.le_info.size(); ++r) {
    const RowInfo& info = ir.le_info[r];
    if (info.kind != RowInfo::Kind::SupplyCap) continue;
    double slack = ir.lp.le_rhs[r];
    for (const auto& [c, a] : ir.lp.le_rows[r]) slack -= a * v[c];
    if (slack > 1e-9) continue;
    ++tight_seen;

    // Tightness splits the ration evenly: every sender with routed offer
    // into this cell is held at exactly the receiver's ratio.
    double rr = ration(info.t, info.cell);
    for (CommodityId k = 0; k < 2; ++k) {
      for (int a : f.net.arcs_in(k, info.cell)) {
        const Arc& arc = f.net.arcs(k)[a];
        double offer =
            eval_demand(f.fd, arc.from, k, traj.x[info.t](arc.from, k));
        if (controls.routing[0].at(k, arc.from, arc.to) * offer <= 1e-12)
          continue;
        CHECK(traj.flows[info.t].gamma[arc.from] ==
              Catch::Approx(rr).margin(1e-9));
      }
    }
  }
  CHECK(tight_seen > 0);
}
