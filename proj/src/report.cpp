#include "bitemp/report.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace bitemp::report {

double quantile_type7(std::span<const double> sorted, double q) {
  if (sorted.empty()) {
    throw Error(ErrorCode::EmptySample, "quantile of empty sample");
  }
  if (q < 0 || q > 1) {
    throw Error(ErrorCode::OutOfRange, "quantile level must be in [0,1]");
  }
  const double h = (static_cast<double>(sorted.size()) - 1.0) * q;
  const std::size_t lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = h - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

std::vector<BoxplotSummary> boxplot_summary(const FeatureTable& table) {
  if (table.rows.empty()) {
    throw Error(ErrorCode::EmptySample, "boxplot_summary: empty table");
  }
  table.validate();

  // (class, feature index) -> values
  std::map<std::pair<int, int>, std::vector<double>> groups;
  for (const auto& row : table.rows) {
    for (int f = 0; f < table.dim(); ++f) {
      groups[{static_cast<int>(row.roi_class), f}].push_back(row.values[f]);
    }
  }

  std::vector<BoxplotSummary> out;
  for (auto& [key, values] : groups) {
    std::sort(values.begin(), values.end());
    BoxplotSummary s;
    s.family = table.family;
    s.roi_class = static_cast<RoiClass>(key.first);
    s.feature = table.feature_names[key.second];
    s.n = static_cast<int>(values.size());
    s.min = values.front();
    s.max = values.back();
    s.q1 = quantile_type7(values, 0.25);
    s.median = quantile_type7(values, 0.50);
    s.q3 = quantile_type7(values, 0.75);
    const double iqr = s.q3 - s.q1;
    const double lo_fence = s.q1 - 1.5 * iqr;
    const double hi_fence = s.q3 + 1.5 * iqr;
    for (double v : values) {
      if (v < lo_fence || v > hi_fence) ++s.n_outliers;
    }
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace bitemp::report
