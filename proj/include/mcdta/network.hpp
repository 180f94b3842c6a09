#pragma once

#include <algorithm>
#include <deque>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "mcdta/core.hpp"

namespace mcdta {

// A cell is a directed road segment between two junction nodes. Ramps touch
// the world node on one side.
struct CellSpec {
  NodeId tail = kWorldNode;
  NodeId head = kWorldNode;
};

struct NetworkSpec {
  int num_commodities = 0;
  std::vector<CellSpec> cells;
  // utilizable[k] lists the cells commodity k may occupy. Order is free,
  // duplicates are rejected.
  std::vector<std::vector<CellId>> utilizable;
};

struct Arc {
  CellId from = 0;
  CellId to = 0;
  friend bool operator==(const Arc& a, const Arc& b) {
    return a.from == b.from && a.to == b.to;
  }
  friend bool operator<(const Arc& a, const Arc& b) {
    return a.from != b.from ? a.from < b.from : a.to < b.to;
  }
};

struct BuildViolation {
  enum class Kind { SelfLoop, EmptyRampSet, UnreachableCell };
  Kind kind;
  CommodityId commodity = -1;  // unused for SelfLoop
  CellId cell = -1;            // unused for EmptyRampSet
  std::string detail;

  std::string format() const {
    std::ostringstream os;
    switch (kind) {
      case Kind::SelfLoop:
        os << "cell " << cell << " is a self loop";
        break;
      case Kind::EmptyRampSet:
        os << "commodity " << commodity << " has " << detail;
        break;
      case Kind::UnreachableCell:
        os << "commodity " << commodity << ": cell " << cell << " " << detail;
        break;
    }
    return os.str();
  }
};

class BuildError : public Error {
 public:
  explicit BuildError(std::vector<BuildViolation> violations)
      : Error(join(violations)), violations_(std::move(violations)) {}
  const std::vector<BuildViolation>& violations() const { return violations_; }

 private:
  static std::string join(const std::vector<BuildViolation>& vs) {
    std::ostringstream os;
    os << "invalid network:";
    for (const auto& v : vs) os << "\n  " << v.format();
    return os.str();
  }
  std::vector<BuildViolation> violations_;
};

// Validated network with per-commodity adjacency precomputed.
class Network {
 public:
  int num_cells() const { return static_cast<int>(tails_.size()); }
  int num_commodities() const { return num_commodities_; }

  NodeId tail(CellId i) const { return tails_[i]; }
  NodeId head(CellId i) const { return heads_[i]; }

  bool is_onramp(CellId i) const { return tails_[i] == kWorldNode; }
  bool is_offramp(CellId i) const { return heads_[i] == kWorldNode; }

  const std::vector<CellId>& onramps() const { return onramps_; }
  const std::vector<CellId>& offramps() const { return offramps_; }

  bool utilizable(CommodityId k, CellId i) const {
    return util_[static_cast<std::size_t>(k) * num_cells() + i] != 0;
  }
  const std::vector<CellId>& cells_of(CommodityId k) const {
    return cells_of_[k];
  }
  const std::vector<CellId>& onramps_of(CommodityId k) const {
    return onramps_of_[k];
  }
  const std::vector<CellId>& offramps_of(CommodityId k) const {
    return offramps_of_[k];
  }

  // Arcs of commodity k, sorted by (from, to).
  const std::vector<Arc>& arcs(CommodityId k) const { return arcs_[k]; }
  // Indices into arcs(k) leaving cell i / entering cell j.
  const std::vector<int>& arcs_out(CommodityId k, CellId i) const {
    return arcs_out_[k][i];
  }
  const std::vector<int>& arcs_in(CommodityId k, CellId j) const {
    return arcs_in_[k][j];
  }

  // True when some commodity routes flow into j, i.e. j has at least one
  // incoming arc. On-ramps never do.
  bool has_incoming(CellId j) const { return has_incoming_[j] != 0; }

  int total_arcs() const {
    int n = 0;
    for (const auto& a : arcs_) n += static_cast<int>(a.size());
    return n;
  }

  friend Network build_network(const NetworkSpec& spec);

 private:
  int num_commodities_ = 0;
  std::vector<NodeId> tails_, heads_;
  std::vector<CellId> onramps_, offramps_;
  std::vector<char> util_;
  std::vector<std::vector<CellId>> cells_of_, onramps_of_, offramps_of_;
  std::vector<std::vector<Arc>> arcs_;
  std::vector<std::vector<std::vector<int>>> arcs_out_, arcs_in_;
  std::vector<char> has_incoming_;
};

// Builds the derived structure and checks the structural rules: no self
// loops, each commodity has an on-ramp and an off-ramp among its cells, and
// each of its cells lies on a ramp-to-ramp path. Throws BuildError listing
// every violation found.
inline Network build_network(const NetworkSpec& spec) {
  const int n = static_cast<int>(spec.cells.size());
  const int K = spec.num_commodities;
  if (K <= 0) throw Error("network needs at least one commodity");
  if (n <= 0) throw Error("network needs at least one cell");
  if (static_cast<int>(spec.utilizable.size()) != K)
    throw Error("utilizable sets must match commodity count");

  Network net;
  net.num_commodities_ = K;
  net.tails_.reserve(n);
  net.heads_.reserve(n);
  for (const auto& c : spec.cells) {
    net.tails_.push_back(c.tail);
    net.heads_.push_back(c.head);
  }

  std::vector<BuildViolation> bad;
  for (CellId i = 0; i < n; ++i) {
    if (net.tails_[i] == net.heads_[i] && net.tails_[i] != kWorldNode)
      bad.push_back({BuildViolation::Kind::SelfLoop, -1, i, ""});
    if (net.is_onramp(i)) net.onramps_.push_back(i);
    if (net.is_offramp(i)) net.offramps_.push_back(i);
  }

  net.util_.assign(static_cast<std::size_t>(K) * n, 0);
  net.cells_of_.resize(K);
  net.onramps_of_.resize(K);
  net.offramps_of_.resize(K);
  net.arcs_.resize(K);
  net.arcs_out_.assign(K, std::vector<std::vector<int>>(n));
  net.arcs_in_.assign(K, std::vector<std::vector<int>>(n));
  net.has_incoming_.assign(n, 0);

  for (CommodityId k = 0; k < K; ++k) {
    auto cells = spec.utilizable[k];
    std::sort(cells.begin(), cells.end());
    for (std::size_t t = 0; t < cells.size(); ++t) {
      CellId i = cells[t];
      if (i < 0 || i >= n) throw Error("utilizable cell id out of range");
      if (t > 0 && cells[t - 1] == i)
        throw Error("duplicate cell in utilizable set");
      net.util_[static_cast<std::size_t>(k) * n + i] = 1;
    }
    net.cells_of_[k] = std::move(cells);

    for (CellId i : net.cells_of_[k]) {
      if (net.is_onramp(i)) net.onramps_of_[k].push_back(i);
      if (net.is_offramp(i)) net.offramps_of_[k].push_back(i);
    }

    for (CellId i : net.cells_of_[k]) {
      if (net.heads_[i] == kWorldNode) continue;
      for (CellId j : net.cells_of_[k]) {
        if (i == j) continue;
        if (net.tails_[j] == net.heads_[i]) net.arcs_[k].push_back({i, j});
      }
    }
    std::sort(net.arcs_[k].begin(), net.arcs_[k].end());
    for (int a = 0; a < static_cast<int>(net.arcs_[k].size()); ++a) {
      net.arcs_out_[k][net.arcs_[k][a].from].push_back(a);
      net.arcs_in_[k][net.arcs_[k][a].to].push_back(a);
      net.has_incoming_[net.arcs_[k][a].to] = 1;
    }

    const bool have_on = !net.onramps_of_[k].empty();
    const bool have_off = !net.offramps_of_[k].empty();
    if (!have_on)
      bad.push_back(
          {BuildViolation::Kind::EmptyRampSet, k, -1, "no on-ramp"});
    if (!have_off)
      bad.push_back(
          {BuildViolation::Kind::EmptyRampSet, k, -1, "no off-ramp"});
    if (!have_on || !have_off) continue;

    auto sweep = [&](const std::vector<CellId>& seeds, bool forward) {
      std::vector<char> seen(n, 0);
      std::deque<CellId> q(seeds.begin(), seeds.end());
      for (CellId s : q) seen[s] = 1;
      while (!q.empty()) {
        CellId i = q.front();
        q.pop_front();
        const auto& idx = forward ? net.arcs_out_[k][i] : net.arcs_in_[k][i];
        for (int a : idx) {
          CellId j = forward ? net.arcs_[k][a].to : net.arcs_[k][a].from;
          if (!seen[j]) {
            seen[j] = 1;
            q.push_back(j);
          }
        }
      }
      return seen;
    };
    auto from_on = sweep(net.onramps_of_[k], true);
    auto to_off = sweep(net.offramps_of_[k], false);
    for (CellId i : net.cells_of_[k]) {
      if (!from_on[i])
        bad.push_back({BuildViolation::Kind::UnreachableCell, k, i,
                       "is not reachable from any on-ramp"});
      else if (!to_off[i])
        bad.push_back({BuildViolation::Kind::UnreachableCell, k, i,
                       "cannot reach any off-ramp"});
    }
  }

  if (!bad.empty()) throw BuildError(std::move(bad));
  return net;
}

// Turn fractions per commodity, dense over (cell, cell). Only entries on the
// commodity's arcs may be non-zero.
class RoutingMatrix {
 public:
  RoutingMatrix() = default;
  RoutingMatrix(int num_cells, int num_commodities)
      : cells_(num_cells),
        commodities_(num_commodities),
        data_(static_cast<std::size_t>(num_cells) * num_cells *
                  num_commodities,
              0.0) {}

  double& at(CommodityId k, CellId i, CellId j) {
    return data_[(static_cast<std::size_t>(k) * cells_ + i) * cells_ + j];
  }
  double at(CommodityId k, CellId i, CellId j) const {
    return data_[(static_cast<std::size_t>(k) * cells_ + i) * cells_ + j];
  }

  int cells() const { return cells_; }
  int commodities() const { return commodities_; }

 private:
  int cells_ = 0;
  int commodities_ = 0;
  std::vector<double> data_;
};

struct RoutingViolation {
  enum class Kind { NegativeEntry, OutsideAdjacency, RowSum, BadShape };
  Kind kind;
  CommodityId commodity = -1;
  CellId from = -1;
  CellId to = -1;
  double value = 0.0;

  std::string format() const {
    std::ostringstream os;
    switch (kind) {
      case Kind::NegativeEntry:
        os << "R[" << commodity << "](" << from << "," << to
           << ") = " << value << " is negative";
        break;
      case Kind::OutsideAdjacency:
        os << "R[" << commodity << "](" << from << "," << to
           << ") = " << value << " is off the commodity's arcs";
        break;
      case Kind::RowSum:
        os << "R[" << commodity << "] row " << from << " sums to " << value
           << ", expected 1";
        break;
      case Kind::BadShape:
        os << "routing matrix shape does not match network";
        break;
    }
    return os.str();
  }
};

inline constexpr double kRoutingRowSumTol = 1e-9;

// Checks non-negativity, support inside each commodity's arc set, and unit
// row sums on every utilizable cell that has outgoing arcs. Returns all
// violations; empty means valid.
inline std::vector<RoutingViolation> validate_routing(
    const Network& net, const RoutingMatrix& routing) {
  std::vector<RoutingViolation> bad;
  if (routing.cells() != net.num_cells() ||
      routing.commodities() != net.num_commodities()) {
    bad.push_back({RoutingViolation::Kind::BadShape, -1, -1, -1, 0.0});
    return bad;
  }
  const int n = net.num_cells();
  for (CommodityId k = 0; k < net.num_commodities(); ++k) {
    std::vector<char> on_arc(static_cast<std::size_t>(n) * n, 0);
    for (const Arc& a : net.arcs(k))
      on_arc[static_cast<std::size_t>(a.from) * n + a.to] = 1;

    for (CellId i = 0; i < n; ++i) {
      for (CellId j = 0; j < n; ++j) {
        double v = routing.at(k, i, j);
        if (v < 0)
          bad.push_back({RoutingViolation::Kind::NegativeEntry, k, i, j, v});
        if (v != 0 && !on_arc[static_cast<std::size_t>(i) * n + j])
          bad.push_back(
              {RoutingViolation::Kind::OutsideAdjacency, k, i, j, v});
      }
    }
    for (CellId i : net.cells_of(k)) {
      if (net.arcs_out(k, i).empty()) continue;
      double sum = 0.0;
      for (int a : net.arcs_out(k, i)) {
        const Arc& arc = net.arcs(k)[a];
        sum += routing.at(k, arc.from, arc.to);
      }
      if (std::abs(sum - 1.0) > kRoutingRowSumTol)
        bad.push_back({RoutingViolation::Kind::RowSum, k, i, -1, sum});
    }
  }
  return bad;
}

}  // namespace mcdta
