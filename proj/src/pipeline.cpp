#include "bitemp/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <set>
#include <span>
#include <sstream>

#include <json.hpp>

#include "bitemp/baseline.hpp"
#include "bitemp/embeddings.hpp"
#include "bitemp/glcm.hpp"
#include "bitemp/phantom.hpp"
#include "bitemp/report.hpp"
#include "bitemp/rng.hpp"
#include "bitemp/roi.hpp"
#include "bitemp/similarity.hpp"
#include "bitemp/stats.hpp"
#include "bitemp/version.hpp"
#include "bitemp/volume_io.hpp"

namespace fs = std::filesystem;

namespace bitemp::pipeline {

std::uint64_t fnv1a64(const std::string& data) {
  std::uint64_t hash = 0xcbf29ce484222325ULL;
  for (unsigned char c : data) {
    hash ^= c;
    hash *= 0x100000001b3ULL;
  }
  return hash;
}

std::vector<TestPair> default_test_pairs() {
  return {{"test1", RoiClass::PToB, RoiClass::PToFi},
          {"test2", RoiClass::CToB, RoiClass::CToFi},
          {"test3", RoiClass::NhbToFi, RoiClass::PToFi}};
}

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

std::string hex64(std::uint64_t v) {
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

void require(bool ok, const std::string& field, const std::string& why) {
  if (!ok) {
    throw Error(ErrorCode::ConfigError, "config field '" + field + "': " + why);
  }
}

void require_file(const std::string& path, const std::string& field) {
  require(!path.empty(), field, "missing");
  require(fs::exists(path), field, "file not found: " + path);
}

std::string resolve(const fs::path& base, const std::string& p) {
  if (p.empty()) return p;
  fs::path path(p);
  return path.is_absolute() ? path.string() : (base / path).string();
}

std::string slice_path(const std::string& pattern, int z) {
  const std::string token = "{z}";
  std::string out = pattern;
  const auto pos = out.find(token);
  if (pos != std::string::npos) {
    out.replace(pos, token.size(), std::to_string(z));
  }
  return out;
}

}  // namespace

void RunConfig::validate() const {
  require(!patients.empty(), "patients", "at least one patient required");
  std::set<std::string> ids;
  for (std::size_t i = 0; i < patients.size(); ++i) {
    const auto& p = patients[i];
    const std::string tag = "patients[" + std::to_string(i) + "]";
    require(!p.id.empty(), tag + ".id", "missing");
    require(p.id.find_first_of(",\"\n\r ") == std::string::npos, tag + ".id",
            "must not contain spaces or CSV delimiters");
    require(ids.insert(p.id).second, tag + ".id", "duplicate patient id");
    require_file(p.volume, tag + ".volume");
    if (p.has_combined_t1()) {
      require_file(p.t1_labels, tag + ".t1_labels");
    } else {
      require_file(p.t1_clb, tag + ".t1.clb");
      require_file(p.t1_penumbra, tag + ".t1.penumbra");
      require_file(p.t1_core, tag + ".t1.core");
      require_file(p.t1_brain, tag + ".t1.brain");
    }
    require_file(p.t2_mask, tag + ".t2_mask");
    for (const auto& [family, pattern] : p.embeddings) {
      require(!family.empty() &&
                  family.find_first_of(",\"\n\r ") == std::string::npos,
              tag + ".embeddings", "bad family name");
      require(pattern.find("{z}") != std::string::npos,
              tag + ".embeddings." + family, "pattern must contain {z}");
    }
  }
  require(core_dilation_radius >= 0, "core_dilation_radius", "must be >= 0");
  require(glcm.bin_width > 0, "glcm.bin_width", "must be > 0");
  require(glcm.delta == 1, "glcm.delta", "only delta = 1 is supported");
  glcm::direction_mode_from_name(glcm.direction_mode);
  require(stats.family_size_bl >= 1, "stats.family_size_bl", "must be >= 1");
  require(stats.family_size_glcm >= 1, "stats.family_size_glcm",
          "must be >= 1");
  require(stats.exact_max_mw >= 0, "stats.exact_max_mw", "must be >= 0");
  require(stats.exact_max_wilcoxon >= 0, "stats.exact_max_wilcoxon",
          "must be >= 0");
  require(stats.pooling == "slices" || stats.pooling == "patient_median",
          "stats.pooling", "must be 'slices' or 'patient_median'");
  for (const auto& t : stats.tests) {
    require(!t.id.empty() && t.roi_a != RoiClass::Background &&
                t.roi_b != RoiClass::Background,
            "stats.tests", "each test needs id, roi_a, roi_b");
  }
  require(tsne.perplexity >= 2, "tsne.perplexity", "must be >= 2");
  require(tsne.iterations >= 1, "tsne.iterations", "must be >= 1");
  require(tsne.learning_rate > 0, "tsne.learning_rate", "must be > 0");
  require(!out_dir.empty(), "out", "missing output directory");
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw Error(ErrorCode::ConfigError, "cannot open config " + path);
  }
  std::ostringstream buf;
  buf << in.rdbuf();

  nlohmann::json j;
  try {
    j = nlohmann::json::parse(buf.str());
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ConfigError,
                std::string("malformed config JSON: ") + e.what());
  }

  const fs::path base = fs::path(path).parent_path();
  RunConfig cfg;
  cfg.config_hash = hex64(fnv1a64(j.dump()));
  try {
    for (const auto& pj : j.value("patients", nlohmann::json::array())) {
      PatientInput p;
      p.id = pj.value("id", "");
      p.volume = resolve(base, pj.value("volume", ""));
      p.t1_labels = resolve(base, pj.value("t1_labels", ""));
      if (pj.contains("t1")) {
        const auto& t1 = pj["t1"];
        p.t1_clb = resolve(base, t1.value("clb", ""));
        p.t1_penumbra = resolve(base, t1.value("penumbra", ""));
        p.t1_core = resolve(base, t1.value("core", ""));
        p.t1_brain = resolve(base, t1.value("brain", ""));
      }
      p.t2_mask = resolve(base, pj.value("t2_mask", ""));
      if (pj.contains("embeddings")) {
        for (auto it = pj["embeddings"].begin(); it != pj["embeddings"].end();
             ++it) {
          p.embeddings[it.key()] = resolve(base, it.value().get<std::string>());
        }
      }
      cfg.patients.push_back(std::move(p));
    }
    cfg.core_dilation_radius = j.value("core_dilation_radius", 1);
    if (j.contains("glcm")) {
      const auto& g = j["glcm"];
      cfg.glcm.bin_width = g.value("bin_width", 8.0);
      cfg.glcm.delta = g.value("delta", 1);
      cfg.glcm.direction_mode = g.value("direction_mode", "average");
    }
    if (j.contains("stats")) {
      const auto& s = j["stats"];
      cfg.stats.family_size_bl = s.value("family_size_bl", 6);
      cfg.stats.family_size_glcm = s.value("family_size_glcm", 4);
      cfg.stats.exact_max_mw = s.value("exact_max_mw", 10);
      cfg.stats.exact_max_wilcoxon = s.value("exact_max_wilcoxon", 20);
      cfg.stats.pooling = s.value("pooling", "slices");
      if (s.contains("tests")) {
        cfg.stats.tests.clear();
        for (const auto& tj : s["tests"]) {
          TestPair t;
          t.id = tj.value("id", "");
          t.roi_a = roi_class_from_name(tj.at("roi_a").get<std::string>());
          t.roi_b = roi_class_from_name(tj.at("roi_b").get<std::string>());
          cfg.stats.tests.push_back(std::move(t));
        }
      }
    }
    if (j.contains("tsne")) {
      const auto& t = j["tsne"];
      cfg.tsne.perplexity = t.value("perplexity", 30.0);
      cfg.tsne.iterations = t.value("iterations", 1000);
      cfg.tsne.early_exaggeration = t.value("early_exaggeration", 4.0);
      cfg.tsne.exaggeration_iters = t.value("exaggeration_iters", 100);
      cfg.tsne.learning_rate = t.value("learning_rate", 200.0);
      cfg.tsne.initial_momentum = t.value("initial_momentum", 0.5);
      cfg.tsne.final_momentum = t.value("final_momentum", 0.8);
      cfg.tsne.momentum_switch_iter = t.value("momentum_switch_iter", 250);
      cfg.tsne.seed = t.value("seed", std::uint64_t{0});
      cfg.tsne.standardize = t.value("standardize", true);
    }
    cfg.out_dir = resolve(base, j.value("out", ""));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ConfigError,
                std::string("config field error: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

void apply_overrides(RunConfig& config, const std::optional<std::string>& out,
                     std::optional<std::uint64_t> seed) {
  if (out) config.out_dir = *out;
  if (seed) config.tsne.seed = *seed;
  config.validate();
}

// ---------------------------------------------------------------------------
// Stage plumbing
// ---------------------------------------------------------------------------

namespace {

struct StageResult {
  std::vector<std::string> outputs;  // file names relative to out_dir
  std::vector<AuditEntry> audits;
  std::map<std::string, std::uint64_t> counts;

  void merge(const StageResult& other) {
    outputs.insert(outputs.end(), other.outputs.begin(), other.outputs.end());
    audits.insert(audits.end(), other.audits.begin(), other.audits.end());
    for (const auto& [k, v] : other.counts) counts[k] += v;
  }
};

struct PatientData {
  Volume4D volume;
  roi::BiTemporalRoi roi_map;
};

LabelMask binary_from(const LabelMask& src,
                      const std::function<bool(std::uint8_t)>& pred) {
  LabelMask out(src.nx, src.ny, src.nz);
  out.legend = {{0, "background"}, {1, "mask"}};
  for (std::size_t i = 0; i < src.labels.size(); ++i) {
    out.labels[i] = pred(src.labels[i]) ? 1 : 0;
  }
  return out;
}

// Combined b/fi masks carry a legend naming "fi"; plain binary infarct masks
// treat any nonzero voxel as infarcted.
LabelMask infarct_from_t2(const LabelMask& t2) {
  std::set<std::uint8_t> fi_codes;
  for (const auto& [code, name] : t2.legend) {
    if (name == "fi") fi_codes.insert(code);
  }
  if (fi_codes.empty()) {
    return binary_from(t2, [](std::uint8_t v) { return v != 0; });
  }
  return binary_from(
      t2, [&](std::uint8_t v) { return fi_codes.count(v) > 0; });
}

PatientData load_patient(const PatientInput& input, int core_dilation_radius) {
  PatientData data;
  data.volume = io::read_volume(input.volume);

  LabelMask clb, penumbra, core, brain;
  if (input.has_combined_t1()) {
    const LabelMask t1 = io::read_mask(input.t1_labels);
    clb = binary_from(t1, [](std::uint8_t v) { return v == kT1Clb; });
    penumbra = binary_from(t1, [](std::uint8_t v) { return v == kT1Penumbra; });
    core = binary_from(t1, [](std::uint8_t v) { return v == kT1Core; });
    brain = binary_from(t1, [](std::uint8_t v) { return v != 0; });
  } else {
    clb = io::read_mask(input.t1_clb);
    penumbra = io::read_mask(input.t1_penumbra);
    core = io::read_mask(input.t1_core);
    brain = io::read_mask(input.t1_brain);
  }
  if (!data.volume.spatial_dims_match(brain.nx, brain.ny, brain.nz)) {
    throw Error(ErrorCode::InvalidData,
                "patient " + input.id + ": mask dims do not match volume");
  }

  const LabelMask t1 =
      roi::build_t1_labels(clb, penumbra, core, brain, core_dilation_radius);
  const LabelMask infarct = infarct_from_t2(io::read_mask(input.t2_mask));
  data.roi_map = roi::build_bitemporal(t1, infarct, brain);
  return data;
}

void write_csv_line(std::ofstream& out, std::span<const std::string> fields) {
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) out << ',';
    out << fields[i];
  }
  out << "\n";
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw Error(ErrorCode::IoError, "cannot open " + path.string());
  }
  return out;
}

// ---------------------------------------------------------------------------
// features stage
// ---------------------------------------------------------------------------

StageResult run_features(const RunConfig& config) {
  StageResult result;
  const fs::path out_dir(config.out_dir);
  fs::create_directories(out_dir);

  FeatureTable bl{"BL", feature_names_for_family("BL", 6), {}};
  FeatureTable glcm_table{"GLCM", feature_names_for_family("GLCM", 4), {}};
  std::map<std::string, FeatureTable> embedding_tables;

  const glcm::DirectionMode mode =
      glcm::direction_mode_from_name(config.glcm.direction_mode);

  for (const auto& patient : config.patients) {
    const PatientData data = load_patient(patient, config.core_dilation_radius);
    const LabelMask& roi_map = data.roi_map.labels;

    const std::string roi_file = "roi_" + patient.id + ".nii";
    io::write_nifti(roi_map, (out_dir / roi_file).string());
    result.outputs.push_back(roi_file);
    result.counts["roi_clb_fi_dropped"] += data.roi_map.clb_fi_dropped;
    result.counts["roi_nhb_b_dropped"] += data.roi_map.nhb_b_dropped;
    result.counts["roi_unlabeled_in_brain"] += data.roi_map.unlabeled_in_brain;

    for (int z = 0; z < data.volume.nz; ++z) {
      // Classes present on this slice, for audit reconciliation.
      std::set<std::uint8_t> present;
      for (int y = 0; y < roi_map.ny; ++y) {
        for (int x = 0; x < roi_map.nx; ++x) {
          const std::uint8_t c = roi_map.at(x, y, z);
          if (c >= 1 && c <= kNumRoiClasses) present.insert(c);
        }
      }
      result.counts["glcm_classes_present"] += present.size();

      auto bl_records =
          baseline::extract_baseline_slice(data.volume, z, roi_map, patient.id);
      result.counts["bl_records"] += bl_records.size();
      for (auto& rec : bl_records) bl.rows.push_back(std::move(rec));

      auto glcm_result = glcm::extract_glcm_slice(
          data.volume, z, roi_map, patient.id, config.glcm.bin_width, mode);
      result.counts["glcm_records"] += glcm_result.records.size();
      result.counts["glcm_skips"] += glcm_result.skips.size();
      for (auto& rec : glcm_result.records) {
        glcm_table.rows.push_back(std::move(rec));
      }
      for (auto& entry : glcm_result.skips) {
        result.audits.push_back(std::move(entry));
      }

      for (const auto& [family, pattern] : patient.embeddings) {
        const std::string path = slice_path(pattern, z);
        if (!fs::exists(path)) {
          result.audits.push_back({"embeddings", patient.id, z, family,
                                   "no_embedding_file"});
          continue;
        }
        const EmbeddingMap map = io::read_embedding_blob(path);
        std::vector<emb::RoiEmbedding> records;
        if (family == "NNUNET") {
          if (roi_map.nx % map.width != 0 || roi_map.ny % map.height != 0 ||
              roi_map.nx / map.width != roi_map.ny / map.height) {
            throw Error(ErrorCode::GeometryError,
                        path + ": grid does not evenly divide the slice");
          }
          const int factor = roi_map.nx / map.width;
          const auto labels = emb::downsample_mask(roi_map, z, factor);
          records = emb::aggregate_grid(map, labels, patient.id, z);
        } else {
          records = emb::aggregate_dense(map, roi_map, z, patient.id);
        }
        auto& table = embedding_tables[family];
        if (table.family.empty()) {
          table.family = family;
          table.feature_names = feature_names_for_family(family, map.dim);
        }
        for (auto& rec : records) {
          result.counts["embedding_records_" + family] += 1;
          table.rows.push_back(
              {rec.patient, rec.slice, rec.roi_class, std::move(rec.vector)});
        }
      }
    }
  }

  io::write_feature_table(bl, (out_dir / "features_BL.csv").string());
  result.outputs.push_back("features_BL.csv");
  io::write_feature_table(glcm_table, (out_dir / "features_GLCM.csv").string());
  result.outputs.push_back("features_GLCM.csv");
  for (const auto& [family, table] : embedding_tables) {
    const std::string name = "features_" + family + ".csv";
    io::write_feature_table(table, (out_dir / name).string());
    result.outputs.push_back(name);
  }
  return result;
}

// ---------------------------------------------------------------------------
// stats stage
// ---------------------------------------------------------------------------

FeatureTable load_table(const fs::path& out_dir, const std::string& family,
                        bool required) {
  const fs::path path = out_dir / ("features_" + family + ".csv");
  if (!fs::exists(path)) {
    if (required) {
      throw Error(ErrorCode::ConfigError,
                  path.string() + " not found; run the features stage first");
    }
    return {};
  }
  return io::read_feature_table(path.string());
}

// Values of one feature column for one class, pooled per the configured
// granularity.
Eigen::VectorXd pooled_values(const FeatureTable& table, RoiClass cls,
                              int feature, const std::string& pooling) {
  if (pooling == "patient_median") {
    std::map<std::string, std::vector<double>> per_patient;
    for (const auto& row : table.rows) {
      if (row.roi_class == cls) {
        per_patient[row.patient].push_back(row.values[feature]);
      }
    }
    Eigen::VectorXd out(static_cast<Eigen::Index>(per_patient.size()));
    Eigen::Index i = 0;
    for (auto& [patient, values] : per_patient) {
      std::sort(values.begin(), values.end());
      const std::size_t n = values.size();
      out[i++] = (n % 2 == 1) ? values[n / 2]
                              : 0.5 * (values[n / 2 - 1] + values[n / 2]);
    }
    return out;
  }
  std::vector<double> values;
  for (const auto& row : table.rows) {
    if (row.roi_class == cls) values.push_back(row.values[feature]);
  }
  return Eigen::Map<const Eigen::VectorXd>(values.data(),
                                           static_cast<Eigen::Index>(values.size()));
}

StageResult run_stats(const RunConfig& config) {
  StageResult result;
  const fs::path out_dir(config.out_dir);
  fs::create_directories(out_dir);

  struct FamilySpec {
    const FeatureTable table;
    int family_size;
  };
  std::vector<FamilySpec> families;
  families.push_back({load_table(out_dir, "BL", true),
                      config.stats.family_size_bl});
  families.push_back({load_table(out_dir, "GLCM", true),
                      config.stats.family_size_glcm});

  auto tests_out = open_out(out_dir / "stats_tests.csv");
  tests_out << "test_id,roi_a,roi_b,feature,family_size,stat,p_raw,p_corr,"
               "delta,band,n1,n2\n";
  auto shapiro_out = open_out(out_dir / "shapiro.csv");
  shapiro_out << "family,feature,roi_class,n,w,p,status\n";

  for (const auto& [table, family_size] : families) {
    // Normality gate, reported per (feature, class); the pipeline stays
    // nonparametric regardless.
    for (int f = 0; f < table.dim(); ++f) {
      for (RoiClass cls : all_roi_classes()) {
        const Eigen::VectorXd values =
            pooled_values(table, cls, f, config.stats.pooling);
        if (values.size() == 0) continue;
        std::string w = "", p = "", status = "ok";
        try {
          const auto sw = stats::shapiro_wilk(values);
          w = fmt(sw.w);
          p = fmt(sw.p);
        } catch (const Error& e) {
          status = e.code() == ErrorCode::TooSmall ? "too_small"
                                                   : "degenerate";
        }
        const std::vector<std::string> fields = {
            table.family, table.feature_names[f], roi_class_name(cls),
            std::to_string(values.size()), w, p, status};
        write_csv_line(shapiro_out, fields);
      }
    }

    for (const auto& test : config.stats.tests) {
      for (int f = 0; f < table.dim(); ++f) {
        const Eigen::VectorXd x =
            pooled_values(table, test.roi_a, f, config.stats.pooling);
        const Eigen::VectorXd y =
            pooled_values(table, test.roi_b, f, config.stats.pooling);
        if (x.size() == 0 || y.size() == 0) {
          result.audits.push_back({"stats", test.id, -1,
                                   table.family + ":" + table.feature_names[f],
                                   "empty_group"});
          continue;
        }
        const auto cmp = stats::compare_groups(table.feature_names[f], x, y,
                                               family_size,
                                               config.stats.exact_max_mw);
        const std::vector<std::string> fields = {
            test.id,
            roi_class_name(test.roi_a),
            roi_class_name(test.roi_b),
            cmp.feature,
            std::to_string(family_size),
            fmt(cmp.statistic),
            fmt(cmp.p_raw),
            fmt(cmp.p_corrected),
            fmt(cmp.cliffs_delta),
            stats::effect_band_name(cmp.band),
            std::to_string(cmp.n1),
            std::to_string(cmp.n2)};
        write_csv_line(tests_out, fields);
        result.counts["stats_rows"] += 1;
      }
    }
  }
  result.outputs.push_back("stats_tests.csv");
  result.outputs.push_back("shapiro.csv");
  return result;
}

// ---------------------------------------------------------------------------
// similarity stage
// ---------------------------------------------------------------------------

StageResult run_similarity(const RunConfig& config) {
  StageResult result;
  const fs::path out_dir(config.out_dir);
  fs::create_directories(out_dir);

  std::set<std::string> families;
  for (const auto& p : config.patients) {
    for (const auto& [family, pattern] : p.embeddings) families.insert(family);
  }

  for (const std::string& family : families) {
    const FeatureTable table = load_table(out_dir, family, false);
    if (table.rows.empty()) continue;

    // Slice-level vectors per (patient, class); all-zero vectors are
    // excluded with an audit entry rather than failing the run.
    std::map<std::string, std::map<RoiClass, std::vector<Eigen::VectorXd>>>
        groups;
    for (const auto& row : table.rows) {
      if (row.values.squaredNorm() == 0) {
        result.audits.push_back({"similarity", row.patient, row.slice,
                                 roi_class_name(row.roi_class), "zero_vector"});
        result.counts["zero_vector_slices"] += 1;
        continue;
      }
      groups[row.patient][row.roi_class].push_back(row.values);
    }

    auto sep_out = open_out(out_dir / ("separation_" + family + ".csv"));
    sep_out << "patient,test_id,delta_cos,n1,n2\n";
    std::map<std::string, std::vector<sim::SeparationResult>> per_test;

    for (const auto& patient : config.patients) {
      const auto git = groups.find(patient.id);
      if (git == groups.end()) continue;
      for (const auto& test : config.stats.tests) {
        const auto a = git->second.find(test.roi_a);
        const auto b = git->second.find(test.roi_b);
        if (a == git->second.end() || b == git->second.end()) {
          result.audits.push_back({"similarity", patient.id, -1, test.id,
                                   "empty_group"});
          continue;
        }
        sim::SeparationResult sep;
        sep.patient = patient.id;
        sep.test_id = test.id;
        sep.delta_cos = sim::delta_cos(a->second, b->second);
        sep.n_slices_group1 = static_cast<int>(a->second.size());
        sep.n_slices_group2 = static_cast<int>(b->second.size());
        const std::vector<std::string> fields = {
            sep.patient, sep.test_id, fmt(sep.delta_cos),
            std::to_string(sep.n_slices_group1),
            std::to_string(sep.n_slices_group2)};
        write_csv_line(sep_out, fields);
        per_test[test.id].push_back(std::move(sep));
      }
    }
    result.outputs.push_back("separation_" + family + ".csv");

    auto summary_out =
        open_out(out_dir / ("separation_summary_" + family + ".csv"));
    summary_out << "family,test_id,n,median_delta,wilcoxon_p,status\n";
    for (const auto& test : config.stats.tests) {
      const auto it = per_test.find(test.id);
      std::vector<std::string> fields = {family, test.id, "0", "", "",
                                         "empty"};
      if (it != per_test.end()) {
        fields[2] = std::to_string(it->second.size());
        try {
          const auto s = sim::separation_test(it->second,
                                              config.stats.exact_max_wilcoxon);
          fields[3] = fmt(s.median_delta);
          fields[4] = fmt(s.wilcoxon_p);
          fields[5] = "ok";
        } catch (const Error& e) {
          if (e.code() != ErrorCode::DegenerateSample) throw;
          fields[5] = "degenerate";
        }
      }
      write_csv_line(summary_out, fields);
    }
    result.outputs.push_back("separation_summary_" + family + ".csv");

    // Patient-level psi vectors and the group similarity matrix.
    std::map<std::string, std::map<RoiClass, Eigen::VectorXd>> psi;
    for (const auto& [patient, classes] : groups) {
      for (const auto& [cls, vectors] : classes) {
        Eigen::VectorXd pooled = vectors[0];
        for (std::size_t k = 1; k < vectors.size(); ++k) {
          pooled = pooled.cwiseMax(vectors[k]);
        }
        psi[patient][cls] = std::move(pooled);
      }
    }
    const auto matrix = sim::group_similarity_matrix(psi);

    auto write_matrix = [&](const std::string& name, auto value_of) {
      auto out = open_out(out_dir / name);
      out << "roi_class";
      for (RoiClass cls : all_roi_classes()) out << ',' << roi_class_name(cls);
      out << "\n";
      for (int i = 0; i < 6; ++i) {
        out << roi_class_name(static_cast<RoiClass>(i + 1));
        for (int j = 0; j < 6; ++j) out << ',' << value_of(i, j);
        out << "\n";
      }
      result.outputs.push_back(name);
    };
    write_matrix("similarity_matrix_" + family + ".csv",
                 [&](int i, int j) -> std::string {
                   return std::isnan(matrix.values(i, j))
                              ? ""
                              : fmt(matrix.values(i, j));
                 });
    write_matrix("similarity_counts_" + family + ".csv",
                 [&](int i, int j) { return std::to_string(matrix.counts(i, j)); });
  }
  return result;
}

// ---------------------------------------------------------------------------
// t-SNE stage
// ---------------------------------------------------------------------------

StageResult run_tsne_stage(const RunConfig& config) {
  StageResult result;
  const fs::path out_dir(config.out_dir);
  fs::create_directories(out_dir);

  std::vector<std::string> families = {"BL", "GLCM"};
  std::set<std::string> emb_families;
  for (const auto& p : config.patients) {
    for (const auto& [family, pattern] : p.embeddings) {
      emb_families.insert(family);
    }
  }
  families.insert(families.end(), emb_families.begin(), emb_families.end());

  for (const std::string& family : families) {
    const FeatureTable table = load_table(out_dir, family, false);
    const Eigen::Index n = static_cast<Eigen::Index>(table.rows.size());
    if (n < 10 || 3.0 * config.tsne.perplexity >= static_cast<double>(n)) {
      result.audits.push_back({"tsne", family, -1, "all",
                               "insufficient_points"});
      continue;
    }
    Eigen::MatrixXd x(n, table.dim());
    for (Eigen::Index i = 0; i < n; ++i) {
      x.row(i) = table.rows[i].values.transpose();
    }
    const Eigen::MatrixXd y = tsne::run_tsne(x, config.tsne);

    const std::string name = "tsne_" + family + ".csv";
    auto out = open_out(out_dir / name);
    out << "patient,slice,roi_class,family,x,y\n";
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto& row = table.rows[i];
      const std::vector<std::string> fields = {
          row.patient, std::to_string(row.slice), roi_class_name(row.roi_class),
          family, fmt(y(i, 0)), fmt(y(i, 1))};
      write_csv_line(out, fields);
    }
    result.outputs.push_back(name);
    result.counts["tsne_" + family + "_points"] += static_cast<std::uint64_t>(n);
  }
  return result;
}

// ---------------------------------------------------------------------------
// report stage
// ---------------------------------------------------------------------------

StageResult run_report(const RunConfig& config) {
  StageResult result;
  const fs::path out_dir(config.out_dir);
  fs::create_directories(out_dir);

  for (const std::string family : {"BL", "GLCM"}) {
    const FeatureTable table = load_table(out_dir, family, false);
    if (table.rows.empty()) continue;
    const auto summaries = report::boxplot_summary(table);
    const std::string name = "boxplot_" + family + ".csv";
    auto out = open_out(out_dir / name);
    out << "family,roi_class,feature,min,q1,median,q3,max,n_outliers,n\n";
    for (const auto& s : summaries) {
      const std::vector<std::string> fields = {
          s.family,      roi_class_name(s.roi_class),
          s.feature,     fmt(s.min),
          fmt(s.q1),     fmt(s.median),
          fmt(s.q3),     fmt(s.max),
          std::to_string(s.n_outliers), std::to_string(s.n)};
      write_csv_line(out, fields);
    }
    result.outputs.push_back(name);
  }
  return result;
}

}  // namespace

// ---------------------------------------------------------------------------
// Public commands
// ---------------------------------------------------------------------------

void cmd_features(const RunConfig& config) { run_features(config); }
void cmd_stats(const RunConfig& config) { run_stats(config); }
void cmd_similarity(const RunConfig& config) { run_similarity(config); }
void cmd_tsne(const RunConfig& config) { run_tsne_stage(config); }
void cmd_report(const RunConfig& config) { run_report(config); }

void cmd_run(const RunConfig& config) {
  StageResult all;
  all.merge(run_features(config));
  all.merge(run_stats(config));
  all.merge(run_similarity(config));
  all.merge(run_tsne_stage(config));
  all.merge(run_report(config));

  const fs::path out_dir(config.out_dir);

  auto audit_out = open_out(out_dir / "audit.log");
  for (const auto& entry : all.audits) {
    audit_out << entry.format_line() << "\n";
  }
  all.outputs.push_back("audit.log");

  nlohmann::json manifest;
  manifest["tool"] = "bitemp";
  manifest["version"] = kVersion;
  manifest["config_hash"] = config.config_hash;
  manifest["rng_algorithm"] = rng::kAlgorithmName;
  manifest["seed"] = config.tsne.seed;
  std::vector<std::string> ids;
  for (const auto& p : config.patients) ids.push_back(p.id);
  manifest["patients"] = ids;
  std::sort(all.outputs.begin(), all.outputs.end());
  manifest["outputs"] = all.outputs;
  nlohmann::json counts;
  for (const auto& [k, v] : all.counts) counts[k] = v;
  manifest["audit"]["counts"] = counts;
  manifest["audit"]["n_skips"] = all.audits.size();
  manifest["families"] = {{"BL", config.stats.family_size_bl},
                          {"GLCM", config.stats.family_size_glcm}};
  manifest["glcm"] = {{"bin_width", config.glcm.bin_width},
                      {"delta", config.glcm.delta},
                      {"direction_mode", config.glcm.direction_mode}};
  manifest["status"] = "ok";

  auto manifest_out = open_out(out_dir / "manifest.json");
  manifest_out << manifest.dump(2) << "\n";
}

void cmd_phantom(const std::string& config_path, const std::string& out_dir,
                 std::optional<std::uint64_t> seed_override) {
  phantom::PhantomConfig cfg = phantom::load_phantom_config(config_path);
  if (seed_override) cfg.seed = *seed_override;

  const auto output = phantom::generate_phantom(cfg);

  fs::create_directories(out_dir);
  const fs::path dir(out_dir);
  io::write_nifti(output.volume, (dir / "volume.nii").string());
  io::write_nifti(output.t1_mask, (dir / "t1_mask.nii").string());
  io::write_nifti(output.t2_mask, (dir / "t2_mask.nii").string());

  std::ifstream cfg_in(config_path);
  std::ostringstream cfg_buf;
  cfg_buf << cfg_in.rdbuf();

  nlohmann::json manifest;
  manifest["tool"] = "bitemp";
  manifest["version"] = kVersion;
  manifest["rng_algorithm"] = rng::kAlgorithmName;
  manifest["seed"] = cfg.seed;
  manifest["config_hash"] = hex64(fnv1a64(cfg_buf.str()));
  manifest["outputs"] = {"volume.nii", "t1_mask.nii", "t2_mask.nii"};
  auto out = open_out(dir / "phantom_manifest.json");
  out << manifest.dump(2) << "\n";
}

}  // namespace bitemp::pipeline
