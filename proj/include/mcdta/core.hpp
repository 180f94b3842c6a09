#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace mcdta {

// Dense small-integer identifiers, usable directly as array offsets.
using CellId = int;
using CommodityId = int;
using NodeId = int;

// Distinguished node representing the external world; on-ramps have it as
// tail, off-ramps as head.
inline constexpr NodeId kWorldNode = -1;

inline constexpr double kInf = std::numeric_limits<double>::infinity();

// Dense matrix indexed by (cell, commodity). Volumes, controls and cost
// coefficients all live on this grid.
class CellCommodityMatrix {
 public:
  CellCommodityMatrix() = default;
  CellCommodityMatrix(int num_cells, int num_commodities, double fill = 0.0)
      : cells_(num_cells),
        commodities_(num_commodities),
        data_(static_cast<std::size_t>(num_cells) * num_commodities, fill) {}

  double& at(CellId i, CommodityId k) {
    return data_[static_cast<std::size_t>(i) * commodities_ + k];
  }
  double at(CellId i, CommodityId k) const {
    return data_[static_cast<std::size_t>(i) * commodities_ + k];
  }
  double& operator()(CellId i, CommodityId k) { return at(i, k); }
  double operator()(CellId i, CommodityId k) const { return at(i, k); }

  int cells() const { return cells_; }
  int commodities() const { return commodities_; }
  const std::vector<double>& data() const { return data_; }
  std::vector<double>& data() { return data_; }

  void fill(double v) { data_.assign(data_.size(), v); }

  bool same_shape(const CellCommodityMatrix& o) const {
    return cells_ == o.cells_ && commodities_ == o.commodities_;
  }

  friend bool operator==(const CellCommodityMatrix& a,
                         const CellCommodityMatrix& b) {
    return a.cells_ == b.cells_ && a.commodities_ == b.commodities_ &&
           a.data_ == b.data_;
  }

 private:
  int cells_ = 0;
  int commodities_ = 0;
  std::vector<double> data_;
};

inline double max_abs_diff(const CellCommodityMatrix& a,
                           const CellCommodityMatrix& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.data().size(); ++i) {
    double d = a.data()[i] - b.data()[i];
    if (d < 0) d = -d;
    if (d > m) m = d;
  }
  return m;
}

// Base class for faults raised by the library. Validation findings that are
// data rather than faults are returned as plain structs instead.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace mcdta
