#pragma once

#include <cstdint>

#include "bitemp/types.hpp"

namespace bitemp::roi {

// Chebyshev (box) dilation: output = all voxels within Chebyshev distance
// <= radius of an input voxel, in-plane and through-plane. Radius 0 is the
// identity. Any nonzero label counts as "in".
LabelMask dilate_mask(const LabelMask& mask, int radius);

// T1 label construction with precedence c > p > CLB > NHB:
//   c   = dilate(core_raw, radius)
//   p   = penumbra_raw minus c
//   CLB = clb minus (c union p)
//   NHB = brain minus the rest
// Raw CLB overlapping raw core/penumbra annotations is an AnnotationConflict.
LabelMask build_t1_labels(const LabelMask& clb, const LabelMask& penumbra_raw,
                          const LabelMask& core_raw, const LabelMask& brain,
                          int core_dilation_radius);

struct BiTemporalRoi {
  LabelMask labels;  // codes per roi_map_legend()
  // Outcome combinations outside the six-class table, mapped to background.
  std::uint64_t clb_fi_dropped = 0;
  std::uint64_t nhb_b_dropped = 0;
  std::uint64_t unlabeled_in_brain = 0;
};

// Intersects T1 classes with the follow-up infarct mask. Every brain voxel
// gets (T1 class, T2 class); T2 is fi inside the infarct mask, b otherwise.
BiTemporalRoi build_bitemporal(const LabelMask& t1, const LabelMask& infarct,
                               const LabelMask& brain);

}  // namespace bitemp::roi
