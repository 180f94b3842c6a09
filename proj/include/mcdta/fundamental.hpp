#pragma once

#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include "mcdta/core.hpp"
#include "mcdta/network.hpp"

namespace mcdta {

struct AffinePiece {
  double slope = 0.0;
  double intercept = 0.0;
  double eval(double x) const { return slope * x + intercept; }
};

// Concave piecewise-linear function represented as the pointwise minimum of
// affine pieces.
struct PiecewiseConcave {
  std::vector<AffinePiece> pieces;

  double eval(double x) const {
    double m = kInf;
    for (const auto& p : pieces) m = std::min(m, p.eval(x));
    return m;
  }
  double max_slope() const {
    double m = -kInf;
    for (const auto& p : pieces) m = std::max(m, p.slope);
    return m;
  }
  double min_slope() const {
    double m = kInf;
    for (const auto& p : pieces) m = std::min(m, p.slope);
    return m;
  }
};

// Free-flow rate capped by a maximum throughput. free_flow_rate = 0 gives
// the zero function used for cells a commodity cannot send flow from.
inline PiecewiseConcave trapezoid_demand(double free_flow_rate,
                                         double capacity = kInf) {
  PiecewiseConcave d;
  d.pieces.push_back({free_flow_rate, 0.0});
  if (std::isfinite(capacity)) d.pieces.push_back({0.0, capacity});
  return d;
}

inline PiecewiseConcave affine_supply(double capacity, double backwave_rate) {
  PiecewiseConcave s;
  s.pieces.push_back({-backwave_rate, capacity});
  return s;
}

inline PiecewiseConcave constant_supply(double capacity) {
  PiecewiseConcave s;
  s.pieces.push_back({0.0, capacity});
  return s;
}

// Per-commodity demand on each cell plus one supply per cell evaluated at
// the weighted total volume.
struct FundamentalDiagram {
  int num_cells = 0;
  int num_commodities = 0;
  std::vector<PiecewiseConcave> demand;  // [cell * K + commodity]
  std::vector<PiecewiseConcave> supply;  // [cell]
  CellCommodityMatrix weight;

  FundamentalDiagram() = default;
  FundamentalDiagram(int cells, int commodities)
      : num_cells(cells),
        num_commodities(commodities),
        demand(static_cast<std::size_t>(cells) * commodities),
        supply(cells),
        weight(cells, commodities, 1.0) {}

  PiecewiseConcave& demand_fn(CellId i, CommodityId k) {
    return demand[static_cast<std::size_t>(i) * num_commodities + k];
  }
  const PiecewiseConcave& demand_fn(CellId i, CommodityId k) const {
    return demand[static_cast<std::size_t>(i) * num_commodities + k];
  }
  PiecewiseConcave& supply_fn(CellId i) { return supply[i]; }
  const PiecewiseConcave& supply_fn(CellId i) const { return supply[i]; }
};

class NegativeVolume : public Error {
 public:
  using Error::Error;
};

namespace fd_detail {
inline double checked_volume(double v, const char* what) {
  if (v < -1e-9) {
    std::ostringstream os;
    os << what << " evaluated at negative volume " << v;
    throw NegativeVolume(os.str());
  }
  return std::max(0.0, v);
}
}  // namespace fd_detail

inline double eval_demand(const FundamentalDiagram& fd, CellId i,
                          CommodityId k, double volume) {
  return fd.demand_fn(i, k).eval(fd_detail::checked_volume(volume, "demand"));
}

inline double weighted_volume(const FundamentalDiagram& fd,
                              const CellCommodityMatrix& x, CellId i) {
  double xi = 0.0;
  for (CommodityId k = 0; k < fd.num_commodities; ++k)
    xi += fd.weight(i, k) * x(i, k);
  return xi;
}

// Supply saturates at zero once the cell jams; the affine pieces themselves
// may go negative beyond the jam volume.
inline double eval_supply(const FundamentalDiagram& fd, CellId i,
                          double weighted_vol) {
  double xi = fd_detail::checked_volume(weighted_vol, "supply");
  return std::max(0.0, fd.supply_fn(i).eval(xi));
}

struct FdViolation {
  enum class Kind {
    NoPieces,
    DemandDecreasing,
    DemandNegativeIntercept,
    DemandNonzeroAtOrigin,
    SupplyIncreasing,
    NegativeWeight,
    NonFinite,
    PieceOrder,
  };
  Kind kind;
  CellId cell = -1;
  CommodityId commodity = -1;
  double value = 0.0;

  std::string format() const {
    std::ostringstream os;
    os << "cell " << cell;
    if (commodity >= 0) os << " commodity " << commodity;
    switch (kind) {
      case Kind::NoPieces:
        os << ": function has no pieces";
        break;
      case Kind::DemandDecreasing:
        os << ": demand piece has negative slope " << value;
        break;
      case Kind::DemandNegativeIntercept:
        os << ": demand piece has negative intercept " << value;
        break;
      case Kind::DemandNonzeroAtOrigin:
        os << ": demand at zero volume is " << value << ", expected 0";
        break;
      case Kind::SupplyIncreasing:
        os << ": supply piece has positive slope " << value;
        break;
      case Kind::NegativeWeight:
        os << ": volume weight is " << value;
        break;
      case Kind::NonFinite:
        os << ": non-finite coefficient";
        break;
      case Kind::PieceOrder:
        os << ": piece slopes increase along the list (slope " << value
           << " follows a flatter piece)";
        break;
    }
    return os.str();
  }
};

// Shape rules for the flow functions: demand is non-decreasing, vanishes at
// the empty cell and stays non-negative; supply is non-increasing; weights
// are non-negative. The min of affines is concave for any list, but pieces
// must be listed steepest first so the active piece index is monotone in the
// volume; an increasing slope sequence is rejected.
inline std::vector<FdViolation> check_assumption1(
    const FundamentalDiagram& fd) {
  std::vector<FdViolation> bad;
  auto finite = [](const PiecewiseConcave& f) {
    for (const auto& p : f.pieces)
      if (!std::isfinite(p.slope) || !std::isfinite(p.intercept)) return false;
    return true;
  };
  auto ordered = [&bad](const PiecewiseConcave& f, CellId i, CommodityId k) {
    for (std::size_t p = 1; p < f.pieces.size(); ++p)
      if (f.pieces[p].slope > f.pieces[p - 1].slope + 1e-12)
        bad.push_back({FdViolation::Kind::PieceOrder, i, k, f.pieces[p].slope});
  };
  for (CellId i = 0; i < fd.num_cells; ++i) {
    for (CommodityId k = 0; k < fd.num_commodities; ++k) {
      const auto& d = fd.demand_fn(i, k);
      if (d.pieces.empty()) {
        bad.push_back({FdViolation::Kind::NoPieces, i, k, 0.0});
        continue;
      }
      if (!finite(d)) {
        bad.push_back({FdViolation::Kind::NonFinite, i, k, 0.0});
        continue;
      }
      double at0 = kInf;
      for (const auto& p : d.pieces) {
        if (p.slope < 0)
          bad.push_back({FdViolation::Kind::DemandDecreasing, i, k, p.slope});
        if (p.intercept < 0)
          bad.push_back(
              {FdViolation::Kind::DemandNegativeIntercept, i, k, p.intercept});
        at0 = std::min(at0, p.intercept);
      }
      if (std::abs(at0) > 1e-12)
        bad.push_back({FdViolation::Kind::DemandNonzeroAtOrigin, i, k, at0});
      ordered(d, i, k);
      double w = fd.weight(i, k);
      if (!(w >= 0) || !std::isfinite(w))
        bad.push_back({FdViolation::Kind::NegativeWeight, i, k, w});
    }
    const auto& s = fd.supply_fn(i);
    if (s.pieces.empty()) {
      bad.push_back({FdViolation::Kind::NoPieces, i, -1, 0.0});
      continue;
    }
    if (!finite(s)) {
      bad.push_back({FdViolation::Kind::NonFinite, i, -1, 0.0});
      continue;
    }
    for (const auto& p : s.pieces)
      if (p.slope > 0)
        bad.push_back({FdViolation::Kind::SupplyIncreasing, i, -1, p.slope});
    ordered(s, i, -1);
  }
  return bad;
}

// Steepest demand response; the time step must satisfy h * slope <= 1 so an
// uncongested cell cannot send out more volume than it holds.
inline double max_demand_slope(const FundamentalDiagram& fd) {
  double m = 0.0;
  for (const auto& d : fd.demand) m = std::max(m, d.max_slope());
  return m;
}

// Steepest decrease of any supply piece scaled by the largest weight on that
// cell. h times this bounds how fast inflow headroom can close per unit of
// added volume.
inline double max_weighted_supply_drop(const FundamentalDiagram& fd) {
  double m = 0.0;
  for (CellId i = 0; i < fd.num_cells; ++i) {
    double wmax = 0.0;
    for (CommodityId k = 0; k < fd.num_commodities; ++k)
      wmax = std::max(wmax, fd.weight(i, k));
    m = std::max(m, wmax * -fd.supply_fn(i).min_slope());
  }
  return m;
}

}  // namespace mcdta
