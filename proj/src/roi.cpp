#include "bitemp/roi.hpp"

#include <algorithm>

namespace bitemp::roi {

namespace {

void require_dims_match(const LabelMask& a, const LabelMask& b,
                        const char* what) {
  if (!a.dims_match(b)) {
    throw Error(ErrorCode::InvalidData,
                std::string("mask dims mismatch: ") + what);
  }
}

// 1D sliding-OR along one axis; box dilation is separable.
void dilate_axis(std::vector<std::uint8_t>& data, int nx, int ny, int nz,
                 int radius, int axis) {
  std::vector<std::uint8_t> src = data;
  auto idx = [&](int x, int y, int z) {
    return (static_cast<std::size_t>(z) * ny + y) * nx + x;
  };
  const int extent[3] = {nx, ny, nz};
  const int n = extent[axis];
  for (int z = 0; z < nz; ++z) {
    for (int y = 0; y < ny; ++y) {
      for (int x = 0; x < nx; ++x) {
        if (src[idx(x, y, z)]) continue;
        int c[3] = {x, y, z};
        const int lo = std::max(0, c[axis] - radius);
        const int hi = std::min(n - 1, c[axis] + radius);
        bool hit = false;
        for (int k = lo; k <= hi && !hit; ++k) {
          c[axis] = k;
          hit = src[idx(c[0], c[1], c[2])] != 0;
        }
        if (hit) data[idx(x, y, z)] = 1;
      }
    }
  }
}

}  // namespace

LabelMask dilate_mask(const LabelMask& mask, int radius) {
  if (radius < 0) {
    throw Error(ErrorCode::OutOfRange, "dilation radius must be >= 0");
  }
  LabelMask out = mask;
  for (auto& v : out.labels) v = v ? 1 : 0;
  out.legend = {{0, "background"}, {1, "mask"}};
  if (radius == 0) return out;
  dilate_axis(out.labels, out.nx, out.ny, out.nz, radius, 0);
  dilate_axis(out.labels, out.nx, out.ny, out.nz, radius, 1);
  dilate_axis(out.labels, out.nx, out.ny, out.nz, radius, 2);
  return out;
}

LabelMask build_t1_labels(const LabelMask& clb, const LabelMask& penumbra_raw,
                          const LabelMask& core_raw, const LabelMask& brain,
                          int core_dilation_radius) {
  require_dims_match(clb, penumbra_raw, "clb vs penumbra");
  require_dims_match(clb, core_raw, "clb vs core");
  require_dims_match(clb, brain, "clb vs brain");

  for (std::size_t i = 0; i < clb.labels.size(); ++i) {
    if (clb.labels[i] && (penumbra_raw.labels[i] || core_raw.labels[i])) {
      throw Error(ErrorCode::AnnotationConflict,
                  "CLB annotation overlaps core/penumbra annotation");
    }
  }

  const LabelMask core = dilate_mask(core_raw, core_dilation_radius);

  LabelMask out(clb.nx, clb.ny, clb.nz);
  out.legend = t1_mask_legend();
  for (std::size_t i = 0; i < out.labels.size(); ++i) {
    if (core.labels[i]) {
      out.labels[i] = kT1Core;
    } else if (penumbra_raw.labels[i]) {
      out.labels[i] = kT1Penumbra;
    } else if (clb.labels[i]) {
      out.labels[i] = kT1Clb;
    } else if (brain.labels[i]) {
      out.labels[i] = kT1Nhb;
    }
  }
  return out;
}

BiTemporalRoi build_bitemporal(const LabelMask& t1, const LabelMask& infarct,
                               const LabelMask& brain) {
  require_dims_match(t1, infarct, "t1 vs infarct");
  require_dims_match(t1, brain, "t1 vs brain");

  for (std::size_t i = 0; i < infarct.labels.size(); ++i) {
    if (infarct.labels[i] && !brain.labels[i]) {
      throw Error(ErrorCode::InvalidData,
                  "infarct mask extends outside the brain mask");
    }
  }

  BiTemporalRoi out;
  out.labels = LabelMask(t1.nx, t1.ny, t1.nz);
  out.labels.legend = roi_map_legend();

  for (std::size_t i = 0; i < t1.labels.size(); ++i) {
    if (!brain.labels[i]) continue;
    const bool fi = infarct.labels[i] != 0;
    std::uint8_t code = 0;
    switch (t1.labels[i]) {
      case kT1Clb:
        if (fi) {
          ++out.clb_fi_dropped;  // not among the six classes
        } else {
          code = static_cast<std::uint8_t>(RoiClass::ClbToB);
        }
        break;
      case kT1Nhb:
        if (fi) {
          code = static_cast<std::uint8_t>(RoiClass::NhbToFi);
        } else {
          ++out.nhb_b_dropped;  // not among the six classes
        }
        break;
      case kT1Penumbra:
        code = static_cast<std::uint8_t>(fi ? RoiClass::PToFi : RoiClass::PToB);
        break;
      case kT1Core:
        code = static_cast<std::uint8_t>(fi ? RoiClass::CToFi : RoiClass::CToB);
        break;
      default:
        ++out.unlabeled_in_brain;
        break;
    }
    out.labels.labels[i] = code;
  }
  return out;
}

}  // namespace bitemp::roi
