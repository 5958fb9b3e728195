#include "bitemp/volume_io.hpp"

#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <zlib.h>
#include <json.hpp>

namespace bitemp::io {

namespace {

// ---------------------------------------------------------------------------
// NIfTI-1 header (348 bytes, standard field layout)
// ---------------------------------------------------------------------------

struct NiftiHeader {
  std::int32_t sizeof_hdr;
  char data_type[10];
  char db_name[18];
  std::int32_t extents;
  std::int16_t session_error;
  char regular;
  char dim_info;
  std::int16_t dim[8];
  float intent_p1, intent_p2, intent_p3;
  std::int16_t intent_code;
  std::int16_t datatype;
  std::int16_t bitpix;
  std::int16_t slice_start;
  float pixdim[8];
  float vox_offset;
  float scl_slope;
  float scl_inter;
  std::int16_t slice_end;
  char slice_code;
  char xyzt_units;
  float cal_max, cal_min;
  float slice_duration;
  float toffset;
  std::int32_t glmax, glmin;
  char descrip[80];
  char aux_file[24];
  std::int16_t qform_code, sform_code;
  float quatern_b, quatern_c, quatern_d;
  float qoffset_x, qoffset_y, qoffset_z;
  float srow_x[4], srow_y[4], srow_z[4];
  char intent_name[16];
  char magic[4];
};
static_assert(sizeof(NiftiHeader) == 348, "NIfTI-1 header must be 348 bytes");

constexpr std::int16_t kDtUint8 = 2;
constexpr std::int16_t kDtInt16 = 4;
constexpr std::int16_t kDtFloat32 = 16;

template <typename T>
T bswap(T v) {
  auto bytes = std::bit_cast<std::array<unsigned char, sizeof(T)>>(v);
  std::reverse(bytes.begin(), bytes.end());
  return std::bit_cast<T>(bytes);
}

void swap_header(NiftiHeader& h) {
  h.sizeof_hdr = bswap(h.sizeof_hdr);
  for (auto& d : h.dim) d = bswap(d);
  h.intent_code = bswap(h.intent_code);
  h.datatype = bswap(h.datatype);
  h.bitpix = bswap(h.bitpix);
  h.slice_start = bswap(h.slice_start);
  for (auto& p : h.pixdim) p = bswap(p);
  h.vox_offset = bswap(h.vox_offset);
  h.scl_slope = bswap(h.scl_slope);
  h.scl_inter = bswap(h.scl_inter);
  h.slice_end = bswap(h.slice_end);
  h.cal_max = bswap(h.cal_max);
  h.cal_min = bswap(h.cal_min);
  h.qform_code = bswap(h.qform_code);
  h.sform_code = bswap(h.sform_code);
}

// RAII wrapper around zlib's gz stream; transparently reads uncompressed
// files as well.
class GzReader {
public:
  explicit GzReader(const std::string& path) : path_(path) {
    if (!std::filesystem::exists(path)) {
      throw Error(ErrorCode::IoError, "file not found: " + path);
    }
    file_ = gzopen(path.c_str(), "rb");
    if (!file_) throw Error(ErrorCode::IoError, "cannot open " + path);
  }
  ~GzReader() {
    if (file_) gzclose(file_);
  }
  GzReader(const GzReader&) = delete;
  GzReader& operator=(const GzReader&) = delete;

  void read_exact(void* dst, std::size_t n) {
    if (!read_up_to(dst, n)) {
      throw Error(ErrorCode::CorruptFile, path_ + ": truncated data");
    }
  }

  bool read_up_to(void* dst, std::size_t n) {
    auto* p = static_cast<unsigned char*>(dst);
    std::size_t got = 0;
    while (got < n) {
      unsigned chunk = static_cast<unsigned>(
          std::min<std::size_t>(n - got, 1u << 28));
      int r = gzread(file_, p + got, chunk);
      if (r < 0) throw Error(ErrorCode::IoError, path_ + ": read error");
      if (r == 0) return false;  // EOF
      got += static_cast<std::size_t>(r);
    }
    return true;
  }

  bool at_eof() {
    unsigned char probe;
    return !read_up_to(&probe, 1);
  }

private:
  std::string path_;
  gzFile file_ = nullptr;
};

bool has_gz_suffix(const std::string& path) {
  return path.size() > 3 && path.compare(path.size() - 3, 3, ".gz") == 0;
}

void write_bytes(const std::string& path, const void* data, std::size_t n) {
  if (has_gz_suffix(path)) {
    gzFile f = gzopen(path.c_str(), "wb");
    if (!f) throw Error(ErrorCode::IoError, "cannot open " + path);
    std::size_t written = 0;
    const auto* p = static_cast<const unsigned char*>(data);
    while (written < n) {
      unsigned chunk = static_cast<unsigned>(
          std::min<std::size_t>(n - written, 1u << 28));
      int r = gzwrite(f, p + written, chunk);
      if (r <= 0) {
        gzclose(f);
        throw Error(ErrorCode::IoError, "write failed: " + path);
      }
      written += static_cast<std::size_t>(r);
    }
    gzclose(f);
  } else {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::IoError, "cannot open " + path);
    out.write(static_cast<const char*>(data), static_cast<std::streamsize>(n));
    if (!out) throw Error(ErrorCode::IoError, "write failed: " + path);
  }
}

NiftiHeader make_base_header() {
  NiftiHeader h;
  std::memset(&h, 0, sizeof(h));
  h.sizeof_hdr = 348;
  h.regular = 'r';
  for (auto& p : h.pixdim) p = 1.0f;
  h.pixdim[0] = 0.0f;
  h.scl_slope = 1.0f;
  h.scl_inter = 0.0f;
  h.vox_offset = 352.0f;
  std::memcpy(h.magic, "n+1", 4);
  std::snprintf(h.descrip, sizeof(h.descrip), "bitemp");
  return h;
}

void write_nifti_file(const NiftiHeader& header, const void* payload,
                      std::size_t payload_bytes, const std::string& path) {
  std::vector<unsigned char> buf(352 + payload_bytes);
  std::memcpy(buf.data(), &header, sizeof(header));
  // 4-byte extender: no extensions.
  std::memset(buf.data() + 348, 0, 4);
  std::memcpy(buf.data() + 352, payload, payload_bytes);
  write_bytes(path, buf.data(), buf.size());
}

std::map<std::uint8_t, std::string> read_legend_sidecar(
    const std::string& path) {
  std::map<std::uint8_t, std::string> legend;
  const std::string sidecar = path + ".legend.json";
  if (!std::filesystem::exists(sidecar)) return legend;
  std::ifstream in(sidecar);
  nlohmann::json j;
  try {
    in >> j;
    for (auto it = j.begin(); it != j.end(); ++it) {
      legend[static_cast<std::uint8_t>(std::stoi(it.key()))] =
          it.value().get<std::string>();
    }
  } catch (const std::exception& e) {
    throw Error(ErrorCode::CorruptFile,
                sidecar + ": bad legend sidecar (" + e.what() + ")");
  }
  return legend;
}

}  // namespace

NiftiData read_nifti(const std::string& path) {
  GzReader in(path);

  NiftiHeader h;
  in.read_exact(&h, sizeof(h));
  bool swapped = false;
  if (h.sizeof_hdr != 348) {
    swap_header(h);
    swapped = true;
    if (h.sizeof_hdr != 348) {
      throw Error(ErrorCode::CorruptFile, path + ": bad sizeof_hdr");
    }
  }
  if (std::memcmp(h.magic, "n+1", 3) != 0) {
    if (std::memcmp(h.magic, "ni1", 3) == 0) {
      throw Error(ErrorCode::UnsupportedFormat,
                  path + ": two-file NIfTI (.hdr/.img) not supported");
    }
    throw Error(ErrorCode::CorruptFile, path + ": bad magic");
  }

  // Orientation fields are read and sanity-checked but never applied;
  // inputs are assumed pre-aligned on a common grid.
  if (h.sform_code > 0) {
    for (float v : h.srow_x) {
      if (!std::isfinite(v)) {
        throw Error(ErrorCode::CorruptFile, path + ": non-finite sform row");
      }
    }
    for (float v : h.srow_y) {
      if (!std::isfinite(v)) {
        throw Error(ErrorCode::CorruptFile, path + ": non-finite sform row");
      }
    }
    for (float v : h.srow_z) {
      if (!std::isfinite(v)) {
        throw Error(ErrorCode::CorruptFile, path + ": non-finite sform row");
      }
    }
  }
  if (h.qform_code > 0 &&
      (!std::isfinite(h.quatern_b) || !std::isfinite(h.quatern_c) ||
       !std::isfinite(h.quatern_d))) {
    throw Error(ErrorCode::CorruptFile, path + ": non-finite quaternion");
  }

  const int ndim = h.dim[0];
  if (ndim != 3 && ndim != 4) {
    throw Error(ErrorCode::UnsupportedFormat,
                path + ": dim[0]=" + std::to_string(ndim) +
                    ", only 3D and 4D supported");
  }
  for (int i = 1; i <= ndim; ++i) {
    if (h.dim[i] < 1) {
      throw Error(ErrorCode::CorruptFile,
                  path + ": nonpositive dim[" + std::to_string(i) + "]");
    }
  }

  std::size_t bytes_per_value;
  switch (h.datatype) {
    case kDtUint8: bytes_per_value = 1; break;
    case kDtInt16: bytes_per_value = 2; break;
    case kDtFloat32: bytes_per_value = 4; break;
    default:
      throw Error(ErrorCode::UnsupportedFormat,
                  path + ": datatype " + std::to_string(h.datatype) +
                      " not in {uint8, int16, float32}");
  }

  const int nx = h.dim[1], ny = h.dim[2], nz = h.dim[3];
  const int nt = (ndim == 4) ? h.dim[4] : 1;
  const std::size_t nvox =
      static_cast<std::size_t>(nx) * ny * nz * static_cast<std::size_t>(nt);

  // Skip any header extensions up to the data offset.
  const long offset = static_cast<long>(h.vox_offset);
  if (offset < 348) {
    throw Error(ErrorCode::CorruptFile, path + ": vox_offset below 348");
  }
  std::vector<unsigned char> skip(static_cast<std::size_t>(offset) - 348);
  if (!skip.empty()) in.read_exact(skip.data(), skip.size());

  std::vector<unsigned char> raw(nvox * bytes_per_value);
  if (!in.read_up_to(raw.data(), raw.size())) {
    throw Error(ErrorCode::CorruptFile,
                path + ": header/data size mismatch (file too short)");
  }
  if (!in.at_eof()) {
    throw Error(ErrorCode::CorruptFile,
                path + ": header/data size mismatch (trailing bytes)");
  }

  if (ndim == 3) {
    if (h.datatype != kDtUint8) {
      throw Error(ErrorCode::UnsupportedFormat,
                  path + ": 3D volumes supported only as uint8 label masks");
    }
    LabelMask mask(nx, ny, nz);
    std::memcpy(mask.labels.data(), raw.data(), raw.size());
    mask.legend = read_legend_sidecar(path);
    for (std::uint8_t code : mask.labels) {
      if (!mask.legend.count(code)) {
        mask.legend[code] = "label_" + std::to_string(code);
      }
    }
    return mask;
  }

  for (int i = 1; i <= 3; ++i) {
    if (!(h.pixdim[i] > 0.0f) || !std::isfinite(h.pixdim[i])) {
      throw Error(ErrorCode::InvalidData,
                  path + ": nonpositive spatial pixdim");
    }
  }

  // NIfTI convention: slope of 0 means "no scaling stored".
  const float slope = (h.scl_slope == 0.0f) ? 1.0f : h.scl_slope;
  const float inter = (h.scl_slope == 0.0f) ? 0.0f : h.scl_inter;

  Volume4D vol(nx, ny, nz, nt, h.pixdim[1], h.pixdim[2], h.pixdim[3]);

  // On disk x varies fastest; in memory t does. Decode + permute.
  auto store = [&](std::size_t disk_index, float v) {
    const int x = static_cast<int>(disk_index % nx);
    std::size_t rest = disk_index / nx;
    const int y = static_cast<int>(rest % ny);
    rest /= ny;
    const int z = static_cast<int>(rest % nz);
    const int t = static_cast<int>(rest / nz);
    vol.at(x, y, z, t) = v;
  };

  for (std::size_t i = 0; i < nvox; ++i) {
    float v;
    switch (h.datatype) {
      case kDtUint8:
        v = static_cast<float>(raw[i]);
        break;
      case kDtInt16: {
        std::int16_t s;
        std::memcpy(&s, raw.data() + 2 * i, 2);
        if (swapped) s = bswap(s);
        v = static_cast<float>(s);
        break;
      }
      default: {
        std::uint32_t u;
        std::memcpy(&u, raw.data() + 4 * i, 4);
        if (swapped) u = bswap(u);
        v = std::bit_cast<float>(u);
        break;
      }
    }
    v = slope * v + inter;
    if (!std::isfinite(v)) {
      throw Error(ErrorCode::InvalidData, path + ": non-finite voxel value");
    }
    store(i, v);
  }
  return vol;
}

Volume4D read_volume(const std::string& path) {
  auto data = read_nifti(path);
  if (auto* vol = std::get_if<Volume4D>(&data)) return std::move(*vol);
  throw Error(ErrorCode::UnsupportedFormat, path + ": expected a 4D volume");
}

LabelMask read_mask(const std::string& path) {
  auto data = read_nifti(path);
  if (auto* mask = std::get_if<LabelMask>(&data)) return std::move(*mask);
  throw Error(ErrorCode::UnsupportedFormat, path + ": expected a 3D mask");
}

void write_nifti(const Volume4D& volume, const std::string& path) {
  if (volume.nx < 1 || volume.ny < 1 || volume.nz < 1 || volume.nt < 1) {
    throw Error(ErrorCode::InvalidData, "empty volume");
  }
  NiftiHeader h = make_base_header();
  h.dim[0] = 4;
  h.dim[1] = static_cast<std::int16_t>(volume.nx);
  h.dim[2] = static_cast<std::int16_t>(volume.ny);
  h.dim[3] = static_cast<std::int16_t>(volume.nz);
  h.dim[4] = static_cast<std::int16_t>(volume.nt);
  for (int i = 5; i < 8; ++i) h.dim[i] = 1;
  h.datatype = kDtFloat32;
  h.bitpix = 32;
  h.pixdim[1] = static_cast<float>(volume.sx);
  h.pixdim[2] = static_cast<float>(volume.sy);
  h.pixdim[3] = static_cast<float>(volume.sz);

  // Permute back to disk order (x fastest).
  std::vector<float> disk(volume.size());
  std::size_t i = 0;
  for (int t = 0; t < volume.nt; ++t)
    for (int z = 0; z < volume.nz; ++z)
      for (int y = 0; y < volume.ny; ++y)
        for (int x = 0; x < volume.nx; ++x) disk[i++] = volume.at(x, y, z, t);

  write_nifti_file(h, disk.data(), disk.size() * 4, path);
}

void write_nifti(const LabelMask& mask, const std::string& path,
                 bool write_legend_sidecar) {
  if (mask.nx < 1 || mask.ny < 1 || mask.nz < 1) {
    throw Error(ErrorCode::InvalidData, "empty mask");
  }
  NiftiHeader h = make_base_header();
  h.dim[0] = 3;
  h.dim[1] = static_cast<std::int16_t>(mask.nx);
  h.dim[2] = static_cast<std::int16_t>(mask.ny);
  h.dim[3] = static_cast<std::int16_t>(mask.nz);
  for (int i = 4; i < 8; ++i) h.dim[i] = 1;
  h.datatype = kDtUint8;
  h.bitpix = 8;

  write_nifti_file(h, mask.labels.data(), mask.labels.size(), path);

  if (write_legend_sidecar && !mask.legend.empty()) {
    nlohmann::json j;
    for (const auto& [code, name] : mask.legend) {
      j[std::to_string(code)] = name;
    }
    std::ofstream out(path + ".legend.json", std::ios::trunc);
    if (!out) throw Error(ErrorCode::IoError, "cannot write legend sidecar");
    out << j.dump(2) << "\n";
  }
}

// ---------------------------------------------------------------------------
// Embedding blobs
// ---------------------------------------------------------------------------

EmbeddingMap read_embedding_blob(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path);

  std::string header_line;
  if (!std::getline(in, header_line)) {
    throw Error(ErrorCode::CorruptFile, path + ": missing header line");
  }

  EmbeddingMap map;
  try {
    auto j = nlohmann::json::parse(header_line);
    map.height = j.at("grid_dims").at(0).get<int>();
    map.width = j.at("grid_dims").at(1).get<int>();
    map.dim = j.at("dim").get<int>();
    map.stride = j.at("stride").get<int>();
    map.offset_y = j.at("offset").at(0).get<int>();
    map.offset_x = j.at("offset").at(1).get<int>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::CorruptFile,
                path + ": bad header (" + std::string(e.what()) + ")");
  }
  if (map.height < 1 || map.width < 1 || map.dim < 1 || map.stride < 1) {
    throw Error(ErrorCode::CorruptFile, path + ": invalid header fields");
  }

  const std::size_t n =
      static_cast<std::size_t>(map.height) * map.width * map.dim;
  std::vector<unsigned char> raw(n * 4);
  in.read(reinterpret_cast<char*>(raw.data()),
          static_cast<std::streamsize>(raw.size()));
  if (static_cast<std::size_t>(in.gcount()) != raw.size()) {
    throw Error(ErrorCode::CorruptFile,
                path + ": payload shorter than H*W*D*4 bytes");
  }
  char probe;
  if (in.read(&probe, 1); in.gcount() != 0) {
    throw Error(ErrorCode::CorruptFile,
                path + ": payload longer than H*W*D*4 bytes");
  }

  map.vectors.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::uint32_t u = static_cast<std::uint32_t>(raw[4 * i]) |
                            (static_cast<std::uint32_t>(raw[4 * i + 1]) << 8) |
                            (static_cast<std::uint32_t>(raw[4 * i + 2]) << 16) |
                            (static_cast<std::uint32_t>(raw[4 * i + 3]) << 24);
    const float v = std::bit_cast<float>(u);
    if (!std::isfinite(v)) {
      throw Error(ErrorCode::InvalidData, path + ": non-finite payload value");
    }
    map.vectors[i] = v;
  }
  return map;
}

void write_embedding_blob(const EmbeddingMap& map, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoError, "cannot open " + path);

  nlohmann::json j;
  j["grid_dims"] = {map.height, map.width};
  j["dim"] = map.dim;
  j["stride"] = map.stride;
  j["offset"] = {map.offset_y, map.offset_x};
  out << j.dump() << "\n";

  std::vector<unsigned char> raw(map.vectors.size() * 4);
  for (std::size_t i = 0; i < map.vectors.size(); ++i) {
    const auto u = std::bit_cast<std::uint32_t>(map.vectors[i]);
    raw[4 * i] = static_cast<unsigned char>(u & 0xff);
    raw[4 * i + 1] = static_cast<unsigned char>((u >> 8) & 0xff);
    raw[4 * i + 2] = static_cast<unsigned char>((u >> 16) & 0xff);
    raw[4 * i + 3] = static_cast<unsigned char>((u >> 24) & 0xff);
  }
  out.write(reinterpret_cast<const char*>(raw.data()),
            static_cast<std::streamsize>(raw.size()));
  if (!out) throw Error(ErrorCode::IoError, "write failed: " + path);
}

// ---------------------------------------------------------------------------
// Feature table CSV
// ---------------------------------------------------------------------------

namespace {

std::string format_real(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

void check_csv_token(const std::string& s, const char* what) {
  if (s.find_first_of(",\"\n\r") != std::string::npos) {
    throw Error(ErrorCode::InvalidData,
                std::string(what) + " contains CSV delimiter characters: " + s);
  }
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      fields.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  fields.push_back(cur);
  return fields;
}

}  // namespace

void write_feature_table(const FeatureTable& table, const std::string& path) {
  table.validate();
  FeatureTable sorted = table;
  sorted.sort_rows();

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoError, "cannot open " + path);

  out << "patient,slice,roi_class,family";
  for (int i = 0; i < sorted.dim(); ++i) out << ",f" << i;
  out << "\n";

  check_csv_token(sorted.family, "family");
  for (const auto& row : sorted.rows) {
    check_csv_token(row.patient, "patient id");
    out << row.patient << ',' << row.slice << ','
        << roi_class_name(row.roi_class) << ',' << sorted.family;
    for (Eigen::Index i = 0; i < row.values.size(); ++i) {
      out << ',' << format_real(row.values[i]);
    }
    out << "\n";
  }
  if (!out) throw Error(ErrorCode::IoError, "write failed: " + path);
}

FeatureTable read_feature_table(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path);

  std::string line;
  if (!std::getline(in, line)) {
    throw Error(ErrorCode::CorruptFile, path + ": empty file");
  }
  auto header = split_csv_line(line);
  if (header.size() < 4 || header[0] != "patient" || header[1] != "slice" ||
      header[2] != "roi_class" || header[3] != "family") {
    throw Error(ErrorCode::CorruptFile, path + ": bad feature table header");
  }
  const int dim = static_cast<int>(header.size()) - 4;

  FeatureTable table;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto fields = split_csv_line(line);
    if (static_cast<int>(fields.size()) != dim + 4) {
      throw Error(ErrorCode::CorruptFile, path + ": row width mismatch");
    }
    FeatureRecord rec;
    rec.patient = fields[0];
    rec.slice = std::stoi(fields[1]);
    rec.roi_class = roi_class_from_name(fields[2]);
    if (table.rows.empty()) {
      table.family = fields[3];
    } else if (table.family != fields[3]) {
      throw Error(ErrorCode::CorruptFile, path + ": mixed families in table");
    }
    rec.values.resize(dim);
    for (int i = 0; i < dim; ++i) {
      rec.values[i] = std::stod(fields[4 + i]);
    }
    table.rows.push_back(std::move(rec));
  }
  table.feature_names = feature_names_for_family(table.family, dim);
  table.validate();
  return table;
}

}  // namespace bitemp::io
