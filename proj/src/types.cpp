#include "bitemp/types.hpp"

#include <algorithm>
#include <array>
#include <set>
#include <tuple>

namespace bitemp {

const char* error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::UnsupportedFormat: return "UnsupportedFormat";
    case ErrorCode::CorruptFile: return "CorruptFile";
    case ErrorCode::InvalidData: return "InvalidData";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::ConfigConflict: return "ConfigConflict";
    case ErrorCode::AnnotationConflict: return "AnnotationConflict";
    case ErrorCode::EmptyRoi: return "EmptyRoi";
    case ErrorCode::DegenerateGlcm: return "DegenerateGlcm";
    case ErrorCode::SingleLevel: return "SingleLevel";
    case ErrorCode::TooSmall: return "TooSmall";
    case ErrorCode::OutOfRange: return "OutOfRange";
    case ErrorCode::DegenerateSample: return "DegenerateSample";
    case ErrorCode::EmptySample: return "EmptySample";
    case ErrorCode::InvalidFamily: return "InvalidFamily";
    case ErrorCode::EmptyGroup: return "EmptyGroup";
    case ErrorCode::ZeroVector: return "ZeroVector";
    case ErrorCode::GeometryError: return "GeometryError";
    case ErrorCode::NumericalFailure: return "NumericalFailure";
  }
  return "Unknown";
}

namespace {
const std::array<std::string, 7> kRoiClassNames = {
    "background", "CLB_to_b", "NHB_to_fi", "p_to_b",
    "p_to_fi",    "c_to_b",   "c_to_fi"};
}  // namespace

const std::string& roi_class_name(RoiClass c) {
  return kRoiClassNames[static_cast<std::size_t>(c)];
}

RoiClass roi_class_from_name(const std::string& name) {
  for (std::size_t i = 0; i < kRoiClassNames.size(); ++i) {
    if (kRoiClassNames[i] == name) return static_cast<RoiClass>(i);
  }
  throw Error(ErrorCode::InvalidData, "unknown ROI class name '" + name + "'");
}

const std::map<std::uint8_t, std::string>& t1_mask_legend() {
  static const std::map<std::uint8_t, std::string> legend = {
      {0, "background"}, {kT1Clb, "CLB"}, {kT1Nhb, "NHB"},
      {kT1Penumbra, "p"}, {kT1Core, "c"}};
  return legend;
}

const std::map<std::uint8_t, std::string>& t2_mask_legend() {
  static const std::map<std::uint8_t, std::string> legend = {
      {0, "background"}, {kT2Brain, "b"}, {kT2Infarct, "fi"}};
  return legend;
}

const std::map<std::uint8_t, std::string>& roi_map_legend() {
  static const std::map<std::uint8_t, std::string> legend = {
      {0, "background"}, {1, "CLB_to_b"}, {2, "NHB_to_fi"}, {3, "p_to_b"},
      {4, "p_to_fi"},    {5, "c_to_b"},   {6, "c_to_fi"}};
  return legend;
}

void FeatureTable::validate() const {
  const int d = dim();
  std::set<std::tuple<std::string, int, RoiClass>> keys;
  for (const auto& row : rows) {
    if (row.values.size() != d) {
      throw Error(ErrorCode::InvalidData,
                  "feature table '" + family + "' row has " +
                      std::to_string(row.values.size()) + " values, expected " +
                      std::to_string(d));
    }
    if (!row.values.allFinite()) {
      throw Error(ErrorCode::InvalidData,
                  "non-finite feature value for patient " + row.patient);
    }
    auto key = std::make_tuple(row.patient, row.slice, row.roi_class);
    if (!keys.insert(key).second) {
      throw Error(ErrorCode::InvalidData,
                  "duplicate (patient, slice, roi_class) key in family " +
                      family);
    }
  }
}

void FeatureTable::sort_rows() {
  std::sort(rows.begin(), rows.end(),
            [](const FeatureRecord& a, const FeatureRecord& b) {
              return std::tie(a.patient, a.slice, a.roi_class) <
                     std::tie(b.patient, b.slice, b.roi_class);
            });
}

std::string AuditEntry::format_line() const {
  return "SKIP " + stage + " " + patient + " " + std::to_string(slice) + " " +
         item + " " + reason;
}

std::vector<std::string> feature_names_for_family(const std::string& family,
                                                  int dim) {
  if (family == "BL") {
    return {"mean", "std", "skewness", "kurtosis", "min", "max"};
  }
  if (family == "GLCM") {
    return {"imc1", "imc2", "mcc", "correlation"};
  }
  std::vector<std::string> names;
  names.reserve(dim);
  for (int i = 0; i < dim; ++i) names.push_back("f" + std::to_string(i));
  return names;
}

}  // namespace bitemp
