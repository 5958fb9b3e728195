#pragma once

#include <string>
#include <vector>

#include <Eigen/Core>

#include "bitemp/types.hpp"

namespace bitemp::baseline {

// Six first-order statistics of a local window, population (1/N) formulas.
// Kurtosis is excess (normal distribution maps to 0). A constant window has
// skewness and kurtosis defined as 0.
struct BaselineVector {
  double mean = 0;
  double std = 0;
  double skewness = 0;
  double kurtosis = 0;  // excess
  double min = 0;
  double max = 0;

  Eigen::Matrix<double, 6, 1> as_vector() const {
    Eigen::Matrix<double, 6, 1> v;
    v << mean, std, skewness, kurtosis, min, max;
    return v;
  }
};

BaselineVector window_stats(Eigen::Ref<const Eigen::ArrayXd> samples);

// Dense 3x3xT sliding-window extraction on one slice, element-wise
// max-pooled per ROI class. A location contributes to the class of its
// center voxel; windows whose 3x3 in-plane footprint leaves the image are
// skipped. Classes absent from the slice emit nothing.
std::vector<FeatureRecord> extract_baseline_slice(const Volume4D& volume,
                                                  int z, const LabelMask& roi,
                                                  const std::string& patient);

}  // namespace bitemp::baseline
