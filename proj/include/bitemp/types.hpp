#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace bitemp {

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

enum class ErrorCode {
  UnsupportedFormat,
  CorruptFile,
  InvalidData,
  IoError,
  ConfigError,
  ConfigConflict,
  AnnotationConflict,
  EmptyRoi,
  DegenerateGlcm,
  SingleLevel,
  TooSmall,
  OutOfRange,
  DegenerateSample,
  EmptySample,
  InvalidFamily,
  EmptyGroup,
  ZeroVector,
  GeometryError,
  NumericalFailure,
};

const char* error_code_name(ErrorCode code);

class Error : public std::runtime_error {
public:
  Error(ErrorCode code, const std::string& msg)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + msg),
        code_(code) {}

  ErrorCode code() const { return code_; }

private:
  ErrorCode code_;
};

// ---------------------------------------------------------------------------
// ROI classes of the bi-temporal tissue evolution map
// ---------------------------------------------------------------------------

// Codes 1..6 follow the admission/outcome intersection table; 0 is background
// (covers both "outside brain" and the outcome combinations the table omits).
enum class RoiClass : std::uint8_t {
  Background = 0,
  ClbToB = 1,   // contralateral healthy, stayed healthy
  NhbToFi = 2,  // not hypoperfused at admission, infarcted at follow-up
  PToB = 3,     // penumbra, recovered
  PToFi = 4,    // penumbra, infarcted
  CToB = 5,     // core, recovered
  CToFi = 6,    // core, infarcted
};

inline constexpr int kNumRoiClasses = 6;

const std::string& roi_class_name(RoiClass c);
RoiClass roi_class_from_name(const std::string& name);

inline std::span<const RoiClass> all_roi_classes() {
  static const RoiClass classes[] = {RoiClass::ClbToB, RoiClass::NhbToFi,
                                     RoiClass::PToB,   RoiClass::PToFi,
                                     RoiClass::CToB,   RoiClass::CToFi};
  return classes;
}

// ---------------------------------------------------------------------------
// Volume4D: preprocessed CTP slab V(x, y, z, t)
// ---------------------------------------------------------------------------

// In-memory layout: t fastest, then x, then y, then z. The NIfTI reader and
// writer permute between this layout and the on-disk x-fastest order.
struct Volume4D {
  int nx = 0, ny = 0, nz = 0, nt = 0;
  double sx = 1.0, sy = 1.0, sz = 1.0;  // voxel spacing, mm
  std::vector<float> values;

  Volume4D() = default;
  Volume4D(int x, int y, int z, int t, double spx = 1.0, double spy = 1.0,
           double spz = 1.0)
      : nx(x), ny(y), nz(z), nt(t), sx(spx), sy(spy), sz(spz),
        values(static_cast<std::size_t>(x) * y * z * t, 0.0f) {}

  std::size_t size() const { return values.size(); }

  std::size_t index(int x, int y, int z, int t) const {
    return ((static_cast<std::size_t>(z) * ny + y) * nx + x) * nt + t;
  }
  float at(int x, int y, int z, int t) const { return values[index(x, y, z, t)]; }
  float& at(int x, int y, int z, int t) { return values[index(x, y, z, t)]; }

  // Contiguous time-attenuation curve at one voxel.
  std::span<const float> tac(int x, int y, int z) const {
    return {values.data() + index(x, y, z, 0), static_cast<std::size_t>(nt)};
  }

  bool spatial_dims_match(int x, int y, int z) const {
    return nx == x && ny == y && nz == z;
  }
};

// ---------------------------------------------------------------------------
// LabelMask: per-voxel categorical map on a volume grid
// ---------------------------------------------------------------------------

struct LabelMask {
  int nx = 0, ny = 0, nz = 0;
  std::vector<std::uint8_t> labels;  // x fastest, then y, then z
  std::map<std::uint8_t, std::string> legend;

  LabelMask() = default;
  LabelMask(int x, int y, int z)
      : nx(x), ny(y), nz(z),
        labels(static_cast<std::size_t>(x) * y * z, 0) {}

  std::size_t size() const { return labels.size(); }

  std::size_t index(int x, int y, int z) const {
    return (static_cast<std::size_t>(z) * ny + y) * nx + x;
  }
  std::uint8_t at(int x, int y, int z) const { return labels[index(x, y, z)]; }
  std::uint8_t& at(int x, int y, int z) { return labels[index(x, y, z)]; }

  bool dims_match(const LabelMask& o) const {
    return nx == o.nx && ny == o.ny && nz == o.nz;
  }
};

// Legends used by the pipeline's own mask files.
const std::map<std::uint8_t, std::string>& t1_mask_legend();   // CLB/NHB/p/c
const std::map<std::uint8_t, std::string>& t2_mask_legend();   // b/fi
const std::map<std::uint8_t, std::string>& roi_map_legend();   // six classes

inline constexpr std::uint8_t kT1Clb = 1, kT1Nhb = 2, kT1Penumbra = 3, kT1Core = 4;
inline constexpr std::uint8_t kT2Brain = 1, kT2Infarct = 2;

// ---------------------------------------------------------------------------
// EmbeddingMap: dense grid of D-dimensional CNN activation vectors
// ---------------------------------------------------------------------------

// Grid location (i, j) corresponds to full-resolution pixel
// (offset_y + i * stride, offset_x + j * stride).
struct EmbeddingMap {
  int height = 0, width = 0, dim = 0;
  int stride = 1;
  int offset_y = 0, offset_x = 0;
  std::vector<float> vectors;  // channel contiguous per cell, j fastest, then i

  EmbeddingMap() = default;
  EmbeddingMap(int h, int w, int d, int s = 1, int oy = 0, int ox = 0)
      : height(h), width(w), dim(d), stride(s), offset_y(oy), offset_x(ox),
        vectors(static_cast<std::size_t>(h) * w * d, 0.0f) {}

  std::size_t cell_index(int i, int j) const {
    return (static_cast<std::size_t>(i) * width + j) * dim;
  }
  std::span<const float> vector_at(int i, int j) const {
    return {vectors.data() + cell_index(i, j), static_cast<std::size_t>(dim)};
  }
  std::span<float> vector_at(int i, int j) {
    return {vectors.data() + cell_index(i, j), static_cast<std::size_t>(dim)};
  }
};

// ---------------------------------------------------------------------------
// Feature tables
// ---------------------------------------------------------------------------

struct FeatureRecord {
  std::string patient;
  int slice = 0;
  RoiClass roi_class = RoiClass::Background;
  Eigen::VectorXd values;
};

// One table per feature family; all rows share the family and vector length.
struct FeatureTable {
  std::string family;                       // "BL", "GLCM", "MJNET", "NNUNET"
  std::vector<std::string> feature_names;   // display names, size = dim
  std::vector<FeatureRecord> rows;

  int dim() const { return static_cast<int>(feature_names.size()); }

  void validate() const;
  void sort_rows();  // by (patient, slice, roi_class)
};

// Display names per family; generic f0..f{D-1} for unknown families.
std::vector<std::string> feature_names_for_family(const std::string& family, int dim);

// ---------------------------------------------------------------------------
// Audit entries for skipped work (degenerate ROIs, excluded slices, ...)
// ---------------------------------------------------------------------------

struct AuditEntry {
  std::string stage;    // "glcm", "embeddings", "similarity", ...
  std::string patient;
  int slice = -1;       // -1 when not slice-scoped
  std::string item;     // usually the ROI class name
  std::string reason;

  // Line format: SKIP <stage> <patient> <slice> <item> <reason>
  std::string format_line() const;
};

}  // namespace bitemp
