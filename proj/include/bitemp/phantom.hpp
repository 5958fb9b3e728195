#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "bitemp/types.hpp"

namespace bitemp::phantom {

enum class RegionClass { Clb, Nhb, Penumbra, Core, FiOverlay };

RegionClass region_class_from_name(const std::string& name);
const char* region_class_name(RegionClass c);

// Time-attenuation curve: baseline + (peak - baseline) * gaussian bump, so
// the curve rests at `baseline` and tops out at `peak` HU at t = time_to_peak.
struct TacParams {
  double baseline = 0.0;
  double peak = 0.0;
  double time_to_peak = 0.0;  // time index
  double width = 1.0;         // gaussian width in time indices
  double noise_sd = 0.0;

  bool operator==(const TacParams&) const = default;
};

struct Region {
  RegionClass cls = RegionClass::Nhb;
  double cx = 0, cy = 0, cz = 0;  // center, voxel coordinates
  double radius = 1.0;            // voxels
  TacParams tac;
};

struct PhantomConfig {
  int nx = 0, ny = 0, nz = 0, nt = 0;
  double sx = 1.0, sy = 1.0, sz = 1.0;
  std::uint64_t seed = 0;
  std::vector<Region> regions;

  void validate() const;  // throws ConfigError
};

PhantomConfig parse_phantom_config(const std::string& json_text);
PhantomConfig load_phantom_config(const std::string& path);

struct PhantomOutput {
  Volume4D volume;
  LabelMask t1_mask;  // codes per t1_mask_legend(): CLB/NHB/p/c
  LabelMask t2_mask;  // codes per t2_mask_legend(): b/fi
};

// Deterministic: identical config (including seed) gives bit-identical
// output. Noise streams are keyed on (seed, voxel index, t), so any
// evaluation order produces the same volume.
PhantomOutput generate_phantom(const PhantomConfig& config);

double tac_value(const TacParams& tac, double t);

}  // namespace bitemp::phantom
