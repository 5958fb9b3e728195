#pragma once

#include <span>
#include <string>
#include <vector>

#include "bitemp/types.hpp"

namespace bitemp::report {

// Type-7 quantile: linear interpolation between order statistics at
// h = (n - 1) * q. Input must be sorted ascending.
double quantile_type7(std::span<const double> sorted, double q);

struct BoxplotSummary {
  std::string family;
  RoiClass roi_class = RoiClass::Background;
  std::string feature;
  double min = 0, q1 = 0, median = 0, q3 = 0, max = 0;
  int n_outliers = 0;  // outside [q1 - 1.5*IQR, q3 + 1.5*IQR]
  int n = 0;
};

// One summary per (roi_class, feature) over the table's slice-level values.
std::vector<BoxplotSummary> boxplot_summary(const FeatureTable& table);

}  // namespace bitemp::report
