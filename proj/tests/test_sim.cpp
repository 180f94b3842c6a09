#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "mcdta/mcdta.hpp"
#include "support/oracles.hpp"

using namespace mcdta;
using Catch::Matchers::WithinAbs;
using testsupport::diverge_fixture;
using testsupport::gamma_by_scan;
using testsupport::random_controls;
using testsupport::random_scenario;

namespace {

struct OneCell {
  Network net;
  FundamentalDiagram fd;

  OneCell() {
    NetworkSpec spec;
    spec.num_commodities = 1;
    spec.cells = {{kWorldNode, kWorldNode}};
    spec.utilizable = {{0}};
    net = build_network(spec);
    fd = FundamentalDiagram(1, 1);
    fd.demand_fn(0, 0) = trapezoid_demand(1.0);
    fd.supply_fn(0) = constant_supply(10.0);
  }
};

}  // namespace

TEST_CASE("explicit step on a single ramp cell") {
  OneCell c;
  CellCommodityMatrix x(1, 1, 0.5);
  CellCommodityMatrix alpha(1, 1, 1.0);
  CellCommodityMatrix lambda(1, 1, 1.0);
  RoutingMatrix r(1, 1);

  FlowState fs;
  auto next = step(c.net, c.fd, x, alpha, r, lambda, 0.1, &fs);
  CHECK(next(0, 0) == 0.55);
  CHECK(fs.exit(0, 0) == 0.5);
  CHECK(fs.gamma[0] == 1.0);

  // Metering halves the discharge.
  alpha(0, 0) = 0.5;
  next = step(c.net, c.fd, x, alpha, r, lambda, 0.1);
  CHECK_THAT(next(0, 0), WithinAbs(0.575, 1e-15));
}

TEST_CASE("congested diverge throttles the sender as one block") {
  auto f = diverge_fixture(1.5, 1.0, 0.25, 0.25, 0.5);
  CellCommodityMatrix alpha(3, 2, 1.0);
  RoutingMatrix r(3, 2);
  r.at(0, 0, 1) = 0.5;
  r.at(0, 0, 2) = 0.5;
  r.at(1, 0, 1) = 1.0;

  // Supplies 0.5 on both receivers; routed demand 0.5*1.5 + 1.0 = 1.75 into
  // the shared ramp and 0.75 into the exclusive one.
  auto gamma = compute_gamma(f.net, f.fd, f.x0, alpha, r);
  CHECK_THAT(gamma[0], WithinAbs(2.0 / 7.0, 1e-15));
  CHECK(gamma[1] == 1.0);
  CHECK(gamma[2] == 1.0);

  FlowState fs = compute_flows(f.net, f.fd, f.x0, alpha, r);
  // Arc order for the first commodity: (0,1) then (0,2).
  CHECK_THAT(fs.arc[0][0], WithinAbs(2.0 / 7.0 * 0.75, 1e-15));
  CHECK_THAT(fs.arc[0][1], WithinAbs(2.0 / 7.0 * 0.75, 1e-15));
  CHECK_THAT(fs.arc[1][0], WithinAbs(2.0 / 7.0 * 1.0, 1e-15));
  // Off-ramps discharge their own demand untouched.
  CHECK(fs.exit(1, 0) == 0.25);
  CHECK(fs.exit(2, 0) == 0.5);

  // The shared receiver takes exactly its supply.
  double into_shared = fs.arc[0][0] + fs.arc[1][0];
  CHECK_THAT(into_shared, WithinAbs(0.5, 1e-15));
}

TEST_CASE("uncongested junctions release the full offer") {
  auto f = diverge_fixture(0.2, 0.1, 0.1, 0.1, 0.0, 4.0);
  CellCommodityMatrix alpha(3, 2, 1.0);
  RoutingMatrix r(3, 2);
  r.at(0, 0, 1) = 0.25;
  r.at(0, 0, 2) = 0.75;
  r.at(1, 0, 1) = 1.0;
  auto gamma = compute_gamma(f.net, f.fd, f.x0, alpha, r);
  CHECK(gamma == std::vector<double>{1.0, 1.0, 1.0});
  FlowState fs = compute_flows(f.net, f.fd, f.x0, alpha, r);
  CHECK_THAT(fs.total_out(0, 0), WithinAbs(0.2, 1e-15));
  CHECK_THAT(fs.total_out(0, 1), WithinAbs(0.1, 1e-15));
}

TEST_CASE("closed-form release factors match a grid scan") {
  std::mt19937 rng(23);
  int junction_states = 0;
  while (junction_states < 200) {
    auto rs = random_scenario(rng, 5);
    auto cs = random_controls(rs.net, 1, rng);
    CellCommodityMatrix x(rs.net.num_cells(), rs.net.num_commodities(), 0.0);
    std::uniform_real_distribution<double> u(0.0, 2.5);
    for (CommodityId k = 0; k < rs.net.num_commodities(); ++k)
      for (CellId i : rs.net.cells_of(k)) x(i, k) = u(rng);

    auto closed = compute_gamma(rs.net, rs.fd, x, cs.alpha[0], cs.routing[0]);
    auto scanned = gamma_by_scan(rs.net, rs.fd, x, cs.alpha[0], cs.routing[0]);
    REQUIRE(closed.size() == scanned.size());
    for (std::size_t i = 0; i < closed.size(); ++i) {
      CHECK(std::abs(closed[i] - scanned[i]) <= 1e-3 + 1e-12);
      CHECK(closed[i] >= scanned[i] - 1e-12);
    }
    junction_states += rs.net.num_cells();
  }
}

TEST_CASE("empty cells send nothing") {
  auto f = diverge_fixture(0, 0, 0, 0, 0);
  CellCommodityMatrix alpha(3, 2, 1.0);
  RoutingMatrix r(3, 2);
  r.at(0, 0, 1) = 1.0;
  r.at(1, 0, 1) = 1.0;
  FlowState fs = compute_flows(f.net, f.fd, f.x0, alpha, r);
  for (CommodityId k = 0; k < 2; ++k)
    for (double v : fs.arc[k]) CHECK(v == 0.0);
  CHECK(fs.exit == CellCommodityMatrix(3, 2, 0.0));
}

TEST_CASE("mass balance holds to roundoff on random runs") {
  std::mt19937 rng(41);
  for (int trial = 0; trial < 25; ++trial) {
    auto rs = random_scenario(rng);
    auto cs = random_controls(rs.net, rs.cfg.steps, rng);
    Trajectory traj = simulate(rs.net, rs.fd, rs.x0, cs, rs.inflow, rs.cfg);

    for (int t = 0; t < rs.cfg.steps; ++t) {
      double before = 0.0, after = 0.0, injected = 0.0, left = 0.0;
      double scale = 1.0;
      for (CommodityId k = 0; k < rs.net.num_commodities(); ++k) {
        for (CellId i : rs.net.cells_of(k)) {
          before += traj.x[t](i, k);
          after += traj.x[t + 1](i, k);
          injected += rs.inflow.at(t)(i, k);
          left += traj.flows[t].exit(i, k);
          scale = std::max(scale, traj.x[t](i, k));
        }
      }
      double drift =
          after - before - rs.cfg.h * injected + rs.cfg.h * left;
      CHECK(std::abs(drift) <= 1e-12 * scale * rs.net.num_cells());
    }
  }
}

TEST_CASE("per-step flows respect demand and supply caps") {
  std::mt19937 rng(43);
  for (int trial = 0; trial < 25; ++trial) {
    auto rs = random_scenario(rng);
    auto cs = random_controls(rs.net, rs.cfg.steps, rng);
    Trajectory traj = simulate(rs.net, rs.fd, rs.x0, cs, rs.inflow, rs.cfg);

    for (int t = 0; t < rs.cfg.steps; ++t) {
      const auto& alpha = cs.alpha_at(t);
      for (CommodityId k = 0; k < rs.net.num_commodities(); ++k)
        for (CellId i : rs.net.cells_of(k))
          CHECK(traj.flows[t].total_out(i, k) <=
                alpha(i, k) * eval_demand(rs.fd, i, k, traj.x[t](i, k)) +
                    1e-9);
      for (CellId j = 0; j < rs.net.num_cells(); ++j) {
        double in = 0.0;
        for (CommodityId k = 0; k < rs.net.num_commodities(); ++k)
          for (int a : rs.net.arcs_in(k, j)) in += traj.flows[t].arc[k][a];
        if (in > 0.0)
          CHECK(in <= eval_supply(rs.fd, j,
                                  weighted_volume(rs.fd, traj.x[t], j)) +
                          1e-9);
      }
    }
  }
}

TEST_CASE("volumes stay zero off a commodity's cells") {
  std::mt19937 rng(47);
  auto rs = random_scenario(rng);
  auto cs = random_controls(rs.net, rs.cfg.steps, rng);
  Trajectory traj = simulate(rs.net, rs.fd, rs.x0, cs, rs.inflow, rs.cfg);
  for (const auto& x : traj.x)
    for (CommodityId k = 0; k < rs.net.num_commodities(); ++k)
      for (CellId i = 0; i < rs.net.num_cells(); ++i)
        if (!rs.net.utilizable(k, i)) CHECK(x(i, k) == 0.0);
}

TEST_CASE("simulation is deterministic") {
  std::mt19937 rng(53);
  auto rs = random_scenario(rng);
  auto cs = random_controls(rs.net, rs.cfg.steps, rng);
  Trajectory a = simulate(rs.net, rs.fd, rs.x0, cs, rs.inflow, rs.cfg);
  Trajectory b = simulate(rs.net, rs.fd, rs.x0, cs, rs.inflow, rs.cfg);
  REQUIRE(a.x.size() == b.x.size());
  for (std::size_t t = 0; t < a.x.size(); ++t) CHECK(a.x[t] == b.x[t]);
}

TEST_CASE("relabeling commodities permutes the trajectory") {
  auto f = diverge_fixture(1.5, 1.0, 0.25, 0.25, 0.5);
  ControlSequence cs;
  CellCommodityMatrix alpha(3, 2, 1.0);
  alpha(0, 0) = 0.7;
  RoutingMatrix r(3, 2);
  r.at(0, 0, 1) = 0.3;
  r.at(0, 0, 2) = 0.7;
  r.at(1, 0, 1) = 1.0;
  cs = ControlSequence::constant(alpha, r);
  Trajectory orig = simulate(f.net, f.fd, f.x0, cs, f.inflow, f.cfg);

  // Swap the two classes everywhere.
  testsupport::Diverge g = f;
  g.spec.utilizable = {{0, 1}, {0, 1, 2}};
  g.net = build_network(g.spec);
  g.fd = FundamentalDiagram(3, 2);
  for (CellId i = 0; i < 3; ++i) {
    g.fd.supply_fn(i) = f.fd.supply_fn(i);
    for (CommodityId k = 0; k < 2; ++k) {
      g.fd.demand_fn(i, k) = f.fd.demand_fn(i, 1 - k);
      g.fd.weight(i, k) = f.fd.weight(i, 1 - k);
    }
  }
  CellCommodityMatrix x0s(3, 2, 0.0), alphas(3, 2, 1.0);
  for (CellId i = 0; i < 3; ++i)
    for (CommodityId k = 0; k < 2; ++k) {
      x0s(i, k) = f.x0(i, 1 - k);
      alphas(i, k) = alpha(i, 1 - k);
    }
  RoutingMatrix rs(3, 2);
  rs.at(1, 0, 1) = 0.3;
  rs.at(1, 0, 2) = 0.7;
  rs.at(0, 0, 1) = 1.0;
  Trajectory swapped = simulate(g.net, g.fd, x0s,
                                ControlSequence::constant(alphas, rs),
                                InflowSequence::zero(3, 2), f.cfg);

  for (std::size_t t = 0; t < orig.x.size(); ++t)
    for (CellId i = 0; i < 3; ++i)
      for (CommodityId k = 0; k < 2; ++k)
        CHECK(orig.x[t](i, k) == swapped.x[t](i, 1 - k));
}

TEST_CASE("left-endpoint cost of a held state") {
  // Inflow balances discharge, so the volume sits at 1 and the integral of
  // the total volume over T = 2 is 2 regardless of the step size.
  OneCell c;
  CellCommodityMatrix x0(1, 1, 1.0);
  ControlSequence cs = ControlSequence::constant(CellCommodityMatrix(1, 1, 1.0),
                                                 RoutingMatrix(1, 1));
  InflowSequence inflow = InflowSequence::constant(
      CellCommodityMatrix(1, 1, 1.0));
  for (double h : {0.1, 0.25, 0.5}) {
    SimConfig cfg{h, static_cast<int>(std::llround(2.0 / h))};
    Trajectory traj = simulate(c.net, c.fd, x0, cs, inflow, cfg);
    CHECK_THAT(cost_of_trajectory(c.net, CostSpec::total_volume(1, 1), traj),
               WithinAbs(2.0, 1e-12));
  }
}

TEST_CASE("oversized steps are caught") {
  OneCell c;
  c.fd.demand_fn(0, 0) = trapezoid_demand(2.0);
  CHECK_FALSE(cfl_ok(c.fd, 1.0));
  CHECK(cfl_ok(c.fd, 0.5));

  CellCommodityMatrix x0(1, 1, 1.0);
  ControlSequence cs = ControlSequence::constant(CellCommodityMatrix(1, 1, 1.0),
                                                 RoutingMatrix(1, 1));
  SimConfig cfg{1.0, 3};
  CHECK_THROWS_AS(
      simulate(c.net, c.fd, x0, cs, InflowSequence::zero(1, 1), cfg),
      CflViolation);
}

TEST_CASE("zero-step simulation returns just the initial state") {
  OneCell c;
  CellCommodityMatrix x0(1, 1, 0.3);
  SimConfig cfg{0.1, 0};
  Trajectory traj = simulate(c.net, c.fd, x0,
                             ControlSequence::constant(
                                 CellCommodityMatrix(1, 1, 1.0),
                                 RoutingMatrix(1, 1)),
                             InflowSequence::zero(1, 1), cfg);
  CHECK(traj.x.size() == 1);
  CHECK(traj.flows.empty());
  CHECK(traj.x[0](0, 0) == 0.3);
}
