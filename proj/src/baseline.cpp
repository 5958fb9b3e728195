#include "bitemp/baseline.hpp"

#include <array>
#include <optional>

namespace bitemp::baseline {

BaselineVector window_stats(Eigen::Ref<const Eigen::ArrayXd> samples) {
  const Eigen::Index n = samples.size();
  if (n < 1) {
    throw Error(ErrorCode::EmptySample, "window_stats needs >= 1 value");
  }

  BaselineVector out;
  out.mean = samples.mean();
  out.min = samples.minCoeff();
  out.max = samples.maxCoeff();

  const Eigen::ArrayXd centered = samples - out.mean;
  const double variance = centered.square().mean();
  out.std = std::sqrt(variance);
  if (out.std > 0) {
    const Eigen::ArrayXd standardized = centered / out.std;
    out.skewness = standardized.cube().mean();
    out.kurtosis = standardized.square().square().mean() - 3.0;
  }
  return out;
}

std::vector<FeatureRecord> extract_baseline_slice(const Volume4D& volume,
                                                  int z, const LabelMask& roi,
                                                  const std::string& patient) {
  if (!volume.spatial_dims_match(roi.nx, roi.ny, roi.nz)) {
    throw Error(ErrorCode::InvalidData, "ROI dims do not match volume dims");
  }
  if (z < 0 || z >= volume.nz) {
    throw Error(ErrorCode::OutOfRange, "slice index out of range");
  }

  const int nt = volume.nt;
  Eigen::ArrayXd window(9 * nt);

  std::array<std::optional<Eigen::Matrix<double, 6, 1>>, kNumRoiClasses + 1>
      pooled;

  for (int y = 1; y < volume.ny - 1; ++y) {
    for (int x = 1; x < volume.nx - 1; ++x) {
      const std::uint8_t label = roi.at(x, y, z);
      if (label == 0 || label > kNumRoiClasses) continue;

      Eigen::Index k = 0;
      for (int dy = -1; dy <= 1; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          const auto tac = volume.tac(x + dx, y + dy, z);
          for (int t = 0; t < nt; ++t) window[k++] = tac[t];
        }
      }
      const Eigen::Matrix<double, 6, 1> v = window_stats(window).as_vector();
      auto& slot = pooled[label];
      if (slot) {
        *slot = slot->cwiseMax(v);
      } else {
        slot = v;
      }
    }
  }

  std::vector<FeatureRecord> records;
  for (int code = 1; code <= kNumRoiClasses; ++code) {
    if (!pooled[code]) continue;
    FeatureRecord rec;
    rec.patient = patient;
    rec.slice = z;
    rec.roi_class = static_cast<RoiClass>(code);
    rec.values = *pooled[code];
    records.push_back(std::move(rec));
  }
  return records;
}

}  // namespace bitemp::baseline
