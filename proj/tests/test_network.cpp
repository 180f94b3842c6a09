#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <random>
#include <set>

#include "mcdta/mcdta.hpp"
#include "support/oracles.hpp"

using namespace mcdta;
using testsupport::random_scenario;
using testsupport::ten_cell_fixture;
using testsupport::unreachable_by_dfs;

TEST_CASE("ten cell network derives ramps and adjacency") {
  auto f = ten_cell_fixture();
  const Network& net = f.net;

  CHECK(net.num_cells() == 10);
  CHECK(net.num_commodities() == 2);
  CHECK(net.onramps() == std::vector<CellId>{0, 3});
  CHECK(net.offramps() == std::vector<CellId>{8, 9});

  std::vector<Arc> full = {{0, 1}, {0, 2}, {1, 5}, {2, 4}, {3, 4},
                           {4, 6}, {4, 7}, {5, 9}, {6, 9}, {7, 8}};
  CHECK(net.arcs(0) == full);
  std::vector<Arc> restricted = {{0, 1}, {1, 5}, {3, 4},
                                 {4, 6}, {5, 9}, {6, 9}};
  CHECK(net.arcs(1) == restricted);
  CHECK(net.total_arcs() == 16);

  CHECK(net.onramps_of(1) == std::vector<CellId>{0, 3});
  CHECK(net.offramps_of(1) == std::vector<CellId>{9});
  CHECK_FALSE(net.utilizable(1, 2));
  CHECK(net.utilizable(0, 2));

  for (CellId i = 0; i < 10; ++i)
    CHECK(net.has_incoming(i) == (i != 0 && i != 3));

  CHECK(net.arcs_out(0, 4).size() == 2);
  CHECK(net.arcs_in(0, 9).size() == 2);
  CHECK(net.arcs_out(1, 4).size() == 1);
}

TEST_CASE("single ramp-to-ramp cell is a valid network") {
  NetworkSpec spec;
  spec.num_commodities = 1;
  spec.cells = {{kWorldNode, kWorldNode}};
  spec.utilizable = {{0}};
  Network net = build_network(spec);
  CHECK(net.is_onramp(0));
  CHECK(net.is_offramp(0));
  CHECK(net.arcs(0).empty());
  CHECK_FALSE(net.has_incoming(0));
}

TEST_CASE("self loops are rejected") {
  NetworkSpec spec;
  spec.num_commodities = 1;
  spec.cells = {{kWorldNode, 0}, {0, 0}};
  spec.utilizable = {{0, 1}};
  try {
    build_network(spec);
    FAIL("expected BuildError");
  } catch (const BuildError& e) {
    bool found = false;
    for (const auto& v : e.violations())
      if (v.kind == BuildViolation::Kind::SelfLoop && v.cell == 1)
        found = true;
    CHECK(found);
  }
}

TEST_CASE("missing ramps reported without reachability noise") {
  // Second commodity sits on interior cells only: both ramp sets empty, and
  // the per-cell reachability check is skipped for it.
  NetworkSpec spec;
  spec.num_commodities = 2;
  spec.cells = {{kWorldNode, 0}, {0, 1}, {1, kWorldNode}};
  spec.utilizable = {{0, 1, 2}, {1}};
  try {
    build_network(spec);
    FAIL("expected BuildError");
  } catch (const BuildError& e) {
    REQUIRE(e.violations().size() == 2);
    for (const auto& v : e.violations()) {
      CHECK(v.kind == BuildViolation::Kind::EmptyRampSet);
      CHECK(v.commodity == 1);
    }
  }
}

TEST_CASE("cells cut off from their exits are flagged") {
  auto f = ten_cell_fixture();
  // Give the restricted commodity cell 7 but not cell 8: its only way out
  // runs through 8, so 7 cannot reach the commodity's exits.
  f.spec.utilizable[1] = {0, 1, 3, 4, 5, 6, 7, 9};
  try {
    build_network(f.spec);
    FAIL("expected BuildError");
  } catch (const BuildError& e) {
    REQUIRE(e.violations().size() == 1);
    const auto& v = e.violations().front();
    CHECK(v.kind == BuildViolation::Kind::UnreachableCell);
    CHECK(v.commodity == 1);
    CHECK(v.cell == 7);
  }
  CHECK(unreachable_by_dfs(f.spec, 1) == std::vector<CellId>{7});
}

TEST_CASE("reachability matches an independent search on random subsets") {
  std::mt19937 rng(91);
  for (int trial = 0; trial < 40; ++trial) {
    auto rs = random_scenario(rng);
    NetworkSpec spec = rs.spec;
    std::uniform_real_distribution<double> u(0, 1);
    for (auto& cells : spec.utilizable) {
      std::vector<CellId> kept;
      for (CellId i : cells)
        if (u(rng) > 0.25) kept.push_back(i);
      if (!kept.empty()) cells = kept;
    }

    std::vector<std::set<CellId>> reported(spec.num_commodities);
    std::vector<bool> ramp_gap(spec.num_commodities, false);
    try {
      build_network(spec);
    } catch (const BuildError& e) {
      for (const auto& v : e.violations()) {
        if (v.kind == BuildViolation::Kind::UnreachableCell)
          reported[v.commodity].insert(v.cell);
        else if (v.kind == BuildViolation::Kind::EmptyRampSet)
          ramp_gap[v.commodity] = true;
      }
    }
    for (int k = 0; k < spec.num_commodities; ++k) {
      if (ramp_gap[k]) continue;
      auto oracle = unreachable_by_dfs(spec, k);
      CHECK(reported[k] == std::set<CellId>(oracle.begin(), oracle.end()));
    }
  }
}

TEST_CASE("commodity arc sets nest inside the full adjacency") {
  std::mt19937 rng(17);
  for (int trial = 0; trial < 20; ++trial) {
    auto rs = random_scenario(rng);
    const auto& full = rs.net.arcs(0);
    for (CommodityId k = 1; k < rs.net.num_commodities(); ++k) {
      for (const Arc& a : rs.net.arcs(k))
        CHECK(std::find(full.begin(), full.end(), a) != full.end());
      CHECK(std::is_sorted(rs.net.arcs(k).begin(), rs.net.arcs(k).end()));
    }
    Network again = build_network(rs.spec);
    for (CommodityId k = 0; k < rs.net.num_commodities(); ++k)
      CHECK(again.arcs(k) == rs.net.arcs(k));
  }
}

TEST_CASE("bad identifiers are rejected outright") {
  NetworkSpec spec;
  spec.num_commodities = 1;
  spec.cells = {{kWorldNode, kWorldNode}};
  spec.utilizable = {{0, 0}};
  CHECK_THROWS_AS(build_network(spec), Error);
  spec.utilizable = {{3}};
  CHECK_THROWS_AS(build_network(spec), Error);
  spec.utilizable = {{0}};
  spec.num_commodities = 0;
  CHECK_THROWS_AS(build_network(spec), Error);
}

TEST_CASE("routing validation separates the failure modes") {
  auto f = ten_cell_fixture();
  RoutingMatrix r = testsupport::uniform_routing(f.net);
  CHECK(validate_routing(f.net, r).empty());

  SECTION("negative entry") {
    r.at(0, 4, 6) = -0.25;
    r.at(0, 4, 7) = 1.25;
    auto bad = validate_routing(f.net, r);
    REQUIRE(bad.size() == 1);
    CHECK(bad[0].kind == RoutingViolation::Kind::NegativeEntry);
    CHECK(bad[0].from == 4);
    CHECK(bad[0].to == 6);
  }

  SECTION("support off the commodity's arcs") {
    // (4,7) is an arc of the first commodity only. Mass parked there does
    // not enter the second commodity's row sum, which ranges over its own
    // arcs, so the single complaint is the stray support.
    r.at(1, 4, 7) = 0.5;
    auto bad = validate_routing(f.net, r);
    REQUIRE(bad.size() == 1);
    CHECK(bad[0].kind == RoutingViolation::Kind::OutsideAdjacency);
    CHECK(bad[0].commodity == 1);
    CHECK(bad[0].from == 4);
    CHECK(bad[0].to == 7);
  }

  SECTION("row must sum to one when the cell has somewhere to send") {
    r.at(0, 0, 1) = 0.0;
    r.at(0, 0, 2) = 0.0;
    auto bad = validate_routing(f.net, r);
    REQUIRE(bad.size() == 1);
    CHECK(bad[0].kind == RoutingViolation::Kind::RowSum);
    CHECK(bad[0].from == 0);
    CHECK(bad[0].value == 0.0);
  }

  SECTION("shape mismatch") {
    RoutingMatrix small(3, 2);
    auto bad = validate_routing(f.net, small);
    REQUIRE(bad.size() == 1);
    CHECK(bad[0].kind == RoutingViolation::Kind::BadShape);
  }

  SECTION("off-ramp rows are exempt from the sum rule") {
    // Cell 8 has no outgoing arcs; leaving its row at zero is fine.
    CHECK(validate_routing(f.net, r).empty());
  }
}
