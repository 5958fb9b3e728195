#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "bitemp/tsne.hpp"
#include "bitemp/types.hpp"

namespace bitemp::pipeline {

struct PatientInput {
  std::string id;
  std::string volume;
  // Either one combined T1 annotation mask (codes per t1_mask_legend)...
  std::string t1_labels;
  // ...or the four separate binary masks.
  std::string t1_clb, t1_penumbra, t1_core, t1_brain;
  // Follow-up mask: a combined b/fi mask (resolved via its legend sidecar)
  // or a plain binary infarct mask.
  std::string t2_mask;
  // family -> per-slice .emb path pattern containing "{z}".
  std::map<std::string, std::string> embeddings;

  bool has_combined_t1() const { return !t1_labels.empty(); }
};

struct TestPair {
  std::string id;
  RoiClass roi_a = RoiClass::Background;
  RoiClass roi_b = RoiClass::Background;
};

// Table 3 wiring: p recovered vs infarcted; core recovered vs infarcted;
// initially-normal infarcted vs penumbral infarcted.
std::vector<TestPair> default_test_pairs();

struct GlcmSettings {
  double bin_width = 8.0;
  int delta = 1;  // offset distance; only 1 is supported
  std::string direction_mode = "average";
};

struct StatsSettings {
  int family_size_bl = 6;
  int family_size_glcm = 4;
  int exact_max_mw = 10;
  int exact_max_wilcoxon = 20;
  std::string pooling = "slices";  // or "patient_median"
  std::vector<TestPair> tests = default_test_pairs();
};

struct RunConfig {
  std::vector<PatientInput> patients;
  int core_dilation_radius = 1;
  GlcmSettings glcm;
  StatsSettings stats;
  tsne::TsneConfig tsne;
  std::string out_dir;
  std::string config_hash;  // FNV-1a of the canonical config JSON

  void validate() const;  // throws ConfigError naming the offending field
};

// Parses and validates; relative paths resolve against the config file's
// directory. --out/--seed style overrides are applied afterwards.
RunConfig load_run_config(const std::string& path);

void apply_overrides(RunConfig& config, const std::optional<std::string>& out,
                     std::optional<std::uint64_t> seed);

// Stage entry points; each writes its outputs under config.out_dir.
// `cmd_run` executes every stage and writes manifest.json.
void cmd_features(const RunConfig& config);
void cmd_stats(const RunConfig& config);
void cmd_similarity(const RunConfig& config);
void cmd_tsne(const RunConfig& config);
void cmd_report(const RunConfig& config);
void cmd_run(const RunConfig& config);

// Phantom generation: reads a PhantomConfig JSON and writes volume.nii,
// t1_mask.nii and t2_mask.nii (with legend sidecars) into out_dir.
void cmd_phantom(const std::string& config_path, const std::string& out_dir,
                 std::optional<std::uint64_t> seed_override);

std::uint64_t fnv1a64(const std::string& data);

}  // namespace bitemp::pipeline
