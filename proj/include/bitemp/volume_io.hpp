#pragma once

#include <string>
#include <variant>

#include "bitemp/types.hpp"

namespace bitemp::io {

// NIfTI-1 subset: single-file .nii (optionally gzip-compressed), datatypes
// uint8 / int16 / float32, dim[0] of 3 or 4. Orientation matrices are not
// applied; inputs are assumed pre-aligned on a common grid.
using NiftiData = std::variant<Volume4D, LabelMask>;

NiftiData read_nifti(const std::string& path);

// Type-checked conveniences. Throw UnsupportedFormat when the file holds the
// other kind.
Volume4D read_volume(const std::string& path);
LabelMask read_mask(const std::string& path);

// Writers produce little-endian single-file NIfTI-1; ".gz" suffix selects
// gzip compression. Mask writes also emit a "<path>.legend.json" sidecar
// naming the categorical codes.
void write_nifti(const Volume4D& volume, const std::string& path);
void write_nifti(const LabelMask& mask, const std::string& path,
                 bool write_legend_sidecar = true);

// ".emb" blob: one UTF-8 JSON header line, then raw little-endian float32,
// H*W*D values, channel contiguous per grid cell, cells row-major.
EmbeddingMap read_embedding_blob(const std::string& path);
void write_embedding_blob(const EmbeddingMap& map, const std::string& path);

// Feature table CSV, UTF-8 with LF endings. Header
// patient,slice,roi_class,family,f0,...,f{D-1}; reals carry 9 significant
// digits; rows sorted by (patient, slice, roi_class).
void write_feature_table(const FeatureTable& table, const std::string& path);
FeatureTable read_feature_table(const std::string& path);

}  // namespace bitemp::io
