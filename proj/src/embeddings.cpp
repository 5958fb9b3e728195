#include "bitemp/embeddings.hpp"

#include <array>
#include <functional>
#include <optional>

namespace bitemp::emb {

Eigen::VectorXd gap_patch(Eigen::Ref<const Eigen::MatrixXd> activation) {
  if (activation.rows() < 1 || activation.cols() < 1) {
    throw Error(ErrorCode::EmptyGroup, "gap_patch: empty activation block");
  }
  if (!activation.allFinite()) {
    throw Error(ErrorCode::InvalidData, "gap_patch: non-finite activation");
  }
  return activation.colwise().mean();
}

namespace {

std::vector<RoiEmbedding> collect_class_maxima(
    const EmbeddingMap& map,
    const std::function<std::uint8_t(int, int)>& label_of,
    const std::string& patient, int z, const std::string& source) {
  std::array<std::optional<Eigen::VectorXd>, kNumRoiClasses + 1> pooled;

  for (int i = 0; i < map.height; ++i) {
    for (int j = 0; j < map.width; ++j) {
      const std::uint8_t label = label_of(i, j);
      if (label == 0 || label > kNumRoiClasses) continue;
      const auto vec = map.vector_at(i, j);
      auto& slot = pooled[label];
      if (!slot) {
        slot = Eigen::VectorXd(map.dim);
        for (int c = 0; c < map.dim; ++c) (*slot)[c] = vec[c];
      } else {
        for (int c = 0; c < map.dim; ++c) {
          (*slot)[c] = std::max((*slot)[c], static_cast<double>(vec[c]));
        }
      }
    }
  }

  std::vector<RoiEmbedding> out;
  for (int code = 1; code <= kNumRoiClasses; ++code) {
    if (!pooled[code]) continue;
    RoiEmbedding e;
    e.patient = patient;
    e.slice = z;
    e.roi_class = static_cast<RoiClass>(code);
    e.vector = std::move(*pooled[code]);
    e.source = source;
    out.push_back(std::move(e));
  }
  return out;
}

}  // namespace

std::vector<RoiEmbedding> aggregate_dense(const EmbeddingMap& map,
                                          const LabelMask& roi, int z,
                                          const std::string& patient) {
  if (z < 0 || z >= roi.nz) {
    throw Error(ErrorCode::OutOfRange, "slice index out of range");
  }
  // Validate the grid-to-pixel mapping against the slice extent up front.
  const int y_last = map.offset_y + (map.height - 1) * map.stride;
  const int x_last = map.offset_x + (map.width - 1) * map.stride;
  if (map.offset_y < 0 || map.offset_x < 0 || y_last >= roi.ny ||
      x_last >= roi.nx) {
    throw Error(ErrorCode::GeometryError,
                "embedding grid maps outside the image");
  }

  return collect_class_maxima(
      map,
      [&](int i, int j) {
        return roi.at(map.offset_x + j * map.stride,
                      map.offset_y + i * map.stride, z);
      },
      patient, z, "dense-patch");
}

GridLabels downsample_mask(const LabelMask& roi, int z, int factor) {
  if (z < 0 || z >= roi.nz) {
    throw Error(ErrorCode::OutOfRange, "slice index out of range");
  }
  if (factor < 1 || roi.nx % factor != 0 || roi.ny % factor != 0) {
    throw Error(ErrorCode::GeometryError,
                "downsample factor must divide slice dims");
  }
  GridLabels grid;
  grid.height = roi.ny / factor;
  grid.width = roi.nx / factor;
  grid.labels.resize(static_cast<std::size_t>(grid.height) * grid.width);
  for (int i = 0; i < grid.height; ++i) {
    for (int j = 0; j < grid.width; ++j) {
      grid.labels[static_cast<std::size_t>(i) * grid.width + j] =
          roi.at(j * factor, i * factor, z);
    }
  }
  return grid;
}

std::vector<RoiEmbedding> aggregate_grid(const EmbeddingMap& map,
                                         const GridLabels& labels,
                                         const std::string& patient, int z) {
  if (map.height != labels.height || map.width != labels.width) {
    throw Error(ErrorCode::GeometryError,
                "embedding grid dims do not match label grid");
  }
  return collect_class_maxima(
      map, [&](int i, int j) { return labels.at(i, j); }, patient, z, "grid");
}

PatientEmbedding pool_patient(std::span<const RoiEmbedding> records) {
  if (records.empty()) {
    throw Error(ErrorCode::EmptyGroup, "pool_patient: no slice embeddings");
  }
  PatientEmbedding out;
  out.patient = records[0].patient;
  out.roi_class = records[0].roi_class;
  out.vector = records[0].vector;
  for (std::size_t k = 1; k < records.size(); ++k) {
    if (records[k].vector.size() != out.vector.size()) {
      throw Error(ErrorCode::InvalidData,
                  "pool_patient: inconsistent embedding dims");
    }
    out.vector = out.vector.cwiseMax(records[k].vector);
  }
  return out;
}

}  // namespace bitemp::emb
