#pragma once

#include <array>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "bitemp/types.hpp"

namespace bitemp::glcm {

// One ROI-restricted (x, y, t) block of a slice. x fastest, then y, then t.
struct Region3 {
  int nx = 0, ny = 0, nt = 0;
  std::vector<float> values;
  std::vector<std::uint8_t> mask;  // nonzero = in ROI

  Region3() = default;
  Region3(int x, int y, int t)
      : nx(x), ny(y), nt(t),
        values(static_cast<std::size_t>(x) * y * t, 0.0f),
        mask(static_cast<std::size_t>(x) * y * t, 0) {}

  std::size_t index(int x, int y, int t) const {
    return (static_cast<std::size_t>(t) * ny + y) * nx + x;
  }
};

// Half of the 26-neighborhood for delta = 1: the 13 offsets (dx, dy, dt)
// whose first nonzero component is positive.
const std::array<std::array<int, 3>, 13>& directions13();

struct LevelGrid {
  int nx = 0, ny = 0, nt = 0;
  std::vector<int> levels;  // 0 outside mask, else 1..n_levels
  int n_levels = 0;

  std::size_t index(int x, int y, int t) const {
    return (static_cast<std::size_t>(t) * ny + y) * nx + x;
  }
};

// Fixed-bin-width quantization anchored at the in-mask minimum:
// level(v) = floor((v - min) / bin_width) + 1.
LevelGrid quantize(const Region3& region, double bin_width);

struct GlcmAccumulator {
  int n_levels = 0;
  // Symmetrized pair counts (P + P^T) per direction; entries are integers
  // stored as doubles.
  std::array<Eigen::MatrixXd, 13> counts;

  double direction_total(int d) const { return counts[d].sum(); }
};

GlcmAccumulator accumulate_glcm(const LevelGrid& levels);

enum class DirectionMode {
  Average,  // features per direction, arithmetic mean over directions
  Merged,   // counts summed over directions, one feature evaluation
};

DirectionMode direction_mode_from_name(const std::string& name);

struct GlcmFeatures {
  double imc1 = 0;
  double imc2 = 0;
  double mcc = 1;
  double correlation = 1;
  bool single_level = false;  // degenerate: one gray level in the region

  Eigen::Vector4d as_vector() const {
    return Eigen::Vector4d(imc1, imc2, mcc, correlation);
  }
};

// Imc1, Imc2, MCC and Correlation from the normalized co-occurrence
// distribution, with eps = 2^-52 guarding the logs. A single-level region
// yields the documented degenerate values (0, 0, 1, 1) flagged via
// single_level; an accumulator with no pairs at all throws DegenerateGlcm.
GlcmFeatures glcm_features(const GlcmAccumulator& acc,
                           DirectionMode mode = DirectionMode::Average);

// Features of one normalized matrix; shared by both direction modes.
GlcmFeatures features_from_distribution(const Eigen::MatrixXd& p);

struct SliceGlcmResult {
  std::vector<FeatureRecord> records;
  std::vector<AuditEntry> skips;
};

// Per ROI class on slice z: build the (X, Y, T) block whose 3D mask is the
// 2D class mask repeated over t, then quantize -> accumulate -> features.
// Degenerate classes (single gray level, no co-occurring pairs) are skipped
// and recorded as audit entries.
SliceGlcmResult extract_glcm_slice(const Volume4D& volume, int z,
                                   const LabelMask& roi,
                                   const std::string& patient,
                                   double bin_width = 8.0,
                                   DirectionMode mode = DirectionMode::Average);

}  // namespace bitemp::glcm
