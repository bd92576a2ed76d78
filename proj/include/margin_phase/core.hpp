#pragma once

#include <cmath>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace margin_phase {

// floor() that forgives the usual 1-ulp shortfall of pow()/products whose
// mathematical value is an integer (e.g. 4^0.5 evaluating to 1.9999999999).
inline std::int64_t floor_index(double x) {
  if (!(x >= 0)) throw std::invalid_argument("floor_index: negative or NaN");
  return static_cast<std::int64_t>(std::floor(x + 1e-9));
}

// Prescribed row/column sums of a contingency table.  Immutable after
// construction; the constructor enforces equal totals and non-negativity.
class Margins {
 public:
  Margins(std::vector<std::int64_t> rows, std::vector<std::int64_t> cols)
      : rows_(std::move(rows)), cols_(std::move(cols)) {
    if (rows_.empty() || cols_.empty())
      throw std::invalid_argument("Margins: need at least one row and one column");
    for (auto v : rows_)
      if (v < 0) throw std::invalid_argument("Margins: negative row sum");
    for (auto v : cols_)
      if (v < 0) throw std::invalid_argument("Margins: negative column sum");
    std::int64_t nr = std::accumulate(rows_.begin(), rows_.end(), std::int64_t{0});
    std::int64_t nc = std::accumulate(cols_.begin(), cols_.end(), std::int64_t{0});
    if (nr != nc) throw std::invalid_argument("Margins: row total != column total");
    total_ = nr;
  }

  const std::vector<std::int64_t>& rows() const { return rows_; }
  const std::vector<std::int64_t>& cols() const { return cols_; }
  std::size_t m() const { return rows_.size(); }
  std::size_t n() const { return cols_.size(); }
  std::int64_t total() const { return total_; }

  bool all_positive() const {
    for (auto v : rows_)
      if (v <= 0) return false;
    for (auto v : cols_)
      if (v <= 0) return false;
    return true;
  }

  nlohmann::json to_json() const {
    return nlohmann::json{{"rows", rows_}, {"cols", cols_}};
  }
  static Margins from_json(const nlohmann::json& j) {
    return Margins(j.at("rows").get<std::vector<std::int64_t>>(),
                   j.at("cols").get<std::vector<std::int64_t>>());
  }

  friend bool operator==(const Margins& a, const Margins& b) {
    return a.rows_ == b.rows_ && a.cols_ == b.cols_;
  }

 private:
  std::vector<std::int64_t> rows_, cols_;
  std::int64_t total_ = 0;
};

// Critical value B_c = 1 + sqrt(1 + 1/C).  Strictly decreasing in C, with
// range (2, inf) for finite C > 0.
inline double critical_B(double C) {
  if (!(C > 0)) throw std::invalid_argument("critical_B: C must be positive");
  return 1.0 + std::sqrt(1.0 + 1.0 / C);
}

enum class BlockLabel { TopLeft, TopRight, BottomLeft, BottomRight };

inline const char* to_string(BlockLabel b) {
  switch (b) {
    case BlockLabel::TopLeft: return "top_left";
    case BlockLabel::TopRight: return "top_right";
    case BlockLabel::BottomLeft: return "bottom_left";
    case BlockLabel::BottomRight: return "bottom_right";
  }
  return "?";
}

// Parameters (n, delta, B, C) of the square block-margin family: the first
// floor(n^delta) rows and columns get sum floor(B*C*n), the remaining n rows
// and columns get sum floor(C*n).  delta = 1 (all-heavy, k = n) is accepted
// as the uniform endpoint even though the asymptotic statements assume
// delta < 1.
struct BlockSpec {
  std::int64_t n;
  double delta;
  double B;
  double C;

  BlockSpec(std::int64_t n_, double delta_, double B_, double C_)
      : n(n_), delta(delta_), B(B_), C(C_) {
    if (n <= 0) throw std::invalid_argument("BlockSpec: n must be >= 1");
    if (!(delta >= 0.0 && delta <= 1.0))
      throw std::invalid_argument("BlockSpec: delta must lie in [0, 1]");
    if (!(B > 0)) throw std::invalid_argument("BlockSpec: B must be positive");
    if (!(C > 0)) throw std::invalid_argument("BlockSpec: C must be positive");
  }

  // Number of heavy rows/columns, k = floor(n^delta) >= 1.
  std::int64_t k() const { return floor_index(std::pow(static_cast<double>(n), delta)); }
  std::int64_t heavy_sum() const { return floor_index(B * C * static_cast<double>(n)); }
  std::int64_t light_sum() const { return floor_index(C * static_cast<double>(n)); }
  std::int64_t size() const { return k() + n; }
  double critical() const { return critical_B(C); }

  nlohmann::json to_json() const {
    return nlohmann::json{{"n", n}, {"delta", delta}, {"B", B}, {"C", C}};
  }
};

// Margins of BlockSpec: heavy sum repeated k times, then light sum repeated
// n times, identically for rows and columns.
inline Margins block_margins(const BlockSpec& spec) {
  std::vector<std::int64_t> v;
  v.reserve(static_cast<std::size_t>(spec.size()));
  v.insert(v.end(), static_cast<std::size_t>(spec.k()), spec.heavy_sum());
  v.insert(v.end(), static_cast<std::size_t>(spec.n), spec.light_sum());
  return Margins(v, v);
}

// Block containing 0-based entry (i, j).  Rows/columns below k are heavy.
inline BlockLabel block_of(const BlockSpec& spec, std::int64_t i, std::int64_t j) {
  if (i < 0 || j < 0 || i >= spec.size() || j >= spec.size())
    throw std::out_of_range("block_of: index outside the table");
  const std::int64_t k = spec.k();
  if (i < k) return j < k ? BlockLabel::TopLeft : BlockLabel::TopRight;
  return j < k ? BlockLabel::BottomLeft : BlockLabel::BottomRight;
}

}  // namespace margin_phase
