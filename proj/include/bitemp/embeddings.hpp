#pragma once

#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "bitemp/types.hpp"

namespace bitemp::emb {

// Global average pooling of an encoder activation block. Rows are the
// flattened spatial/depth positions (16 for a 4x4x1 block), columns are
// channels; output is the per-channel mean.
Eigen::VectorXd gap_patch(Eigen::Ref<const Eigen::MatrixXd> activation);

struct RoiEmbedding {
  std::string patient;
  int slice = 0;
  RoiClass roi_class = RoiClass::Background;
  Eigen::VectorXd vector;
  std::string source;  // "dense-patch" or "grid"
};

// Dense-map aggregation: grid cell (i, j) labels full-resolution pixel
// (offset_y + i*stride, offset_x + j*stride); per class, element-wise max
// over the vectors of cells whose mapped pixel carries that class.
std::vector<RoiEmbedding> aggregate_dense(const EmbeddingMap& map,
                                          const LabelMask& roi, int z,
                                          const std::string& patient);

struct GridLabels {
  int height = 0, width = 0;
  std::vector<std::uint8_t> labels;  // row-major, (i, j) = (row, col)

  std::uint8_t at(int i, int j) const {
    return labels[static_cast<std::size_t>(i) * width + j];
  }
};

// Nearest-neighbor label downsampling with the top-left (floor) convention:
// grid cell (i, j) takes the label of source pixel (x = j*factor,
// y = i*factor). The factor must divide both slice dimensions.
GridLabels downsample_mask(const LabelMask& roi, int z, int factor);

std::vector<RoiEmbedding> aggregate_grid(const EmbeddingMap& map,
                                         const GridLabels& labels,
                                         const std::string& patient, int z);

struct PatientEmbedding {
  std::string patient;
  RoiClass roi_class = RoiClass::Background;
  Eigen::VectorXd vector;
};

// Element-wise max over one patient/class's slice vectors.
PatientEmbedding pool_patient(std::span<const RoiEmbedding> records);

}  // namespace bitemp::emb
