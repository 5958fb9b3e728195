// Acceptance suite: one pass/fail line per criterion, nonzero exit if any
// criterion fails. The CLI binary path is taken from argv[1] (used by the
// reproducibility criterion).

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <vector>

#include <json.hpp>

#include "bitemp/baseline.hpp"
#include "bitemp/glcm.hpp"
#include "bitemp/phantom.hpp"
#include "bitemp/pipeline.hpp"
#include "bitemp/rng.hpp"
#include "bitemp/roi.hpp"
#include "bitemp/similarity.hpp"
#include "bitemp/stats.hpp"
#include "bitemp/tsne.hpp"
#include "bitemp/volume_io.hpp"
#include "oracles.hpp"

namespace fs = std::filesystem;
using namespace bitemp;

namespace {

struct Timer {
  std::chrono::steady_clock::time_point start =
      std::chrono::steady_clock::now();
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                         start)
        .count();
  }
};

int g_failures = 0;

void report(int id, const std::string& name, bool pass,
            const std::string& detail) {
  std::printf("[%s] criterion %d: %s (%s)\n", pass ? "PASS" : "FAIL", id,
              name.c_str(), detail.c_str());
  std::fflush(stdout);
  if (!pass) ++g_failures;
}

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "bitemp_acceptance" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  out << text;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

// ---------------------------------------------------------------------------
// Criterion 1: GLCM oracle equivalence on 200 seeded regions, < 30 s.
// ---------------------------------------------------------------------------

void criterion1() {
  Timer timer;
  int compared = 0;
  double max_rel = 0;
  std::uint64_t seed = 1000;
  bool mismatch = false;

  auto rel_err = [](double a, double b) {
    const double diff = std::abs(a - b);
    if (diff <= 1e-12) return 0.0;
    return diff / std::max(std::abs(a), std::abs(b));
  };

  while (compared < 200) {
    rng::Stream rng(seed++);
    glcm::Region3 region(2 + static_cast<int>(rng.below(7)),
                         2 + static_cast<int>(rng.below(7)),
                         2 + static_cast<int>(rng.below(4)));
    const double scale = 20.0 * (1 + rng.below(6));
    const double density = 0.65 + 0.35 * rng.uniform();
    for (std::size_t i = 0; i < region.values.size(); ++i) {
      region.values[i] = static_cast<float>(rng.uniform(0, scale));
      region.mask[i] = rng.uniform() < density ? 1 : 0;
    }
    region.mask[0] = 1;
    const double bin_width = 4.0 * (1 + rng.below(4));

    glcm::GlcmFeatures got;
    try {
      const auto acc = glcm::accumulate_glcm(glcm::quantize(region, bin_width));
      got = glcm::glcm_features(acc);
      if (got.single_level) continue;
    } catch (const Error&) {
      continue;  // degenerate draw; resample
    }

    const auto want = oracle::glcm_region_oracle(region, bin_width, false);
    for (auto [a, b] : {std::pair{got.imc1, want.imc1},
                        std::pair{got.imc2, want.imc2},
                        std::pair{got.mcc, want.mcc},
                        std::pair{got.correlation, want.correlation}}) {
      const double err = rel_err(a, b);
      max_rel = std::max(max_rel, err);
      if (err > 1e-9) mismatch = true;
    }

    // Cross-check the oracle itself through the characteristic-polynomial
    // eigenvalue route where it applies.
    int n_levels = 0;
    oracle::quantize_direct(region, bin_width, n_levels);
    if (n_levels <= 3) {
      const auto poly =
          oracle::glcm_region_oracle(region, bin_width, false, true);
      if (rel_err(poly.mcc, want.mcc) > 1e-6) mismatch = true;
    }
    ++compared;
  }

  const double elapsed = timer.seconds();
  char detail[160];
  std::snprintf(detail, sizeof(detail),
                "200 regions, max rel err %.3g, %.1f s", max_rel, elapsed);
  report(1, "GLCM oracle equivalence", !mismatch && elapsed < 30.0, detail);
}

// ---------------------------------------------------------------------------
// Criterion 2: statistics exactness against enumeration.
// ---------------------------------------------------------------------------

void criterion2() {
  bool ok = true;
  std::string failure;

  // Worked examples.
  {
    Eigen::VectorXd x(2), y(2);
    x << 1, 2;
    y << 3, 4;
    const auto mw = stats::mann_whitney_u(x, y);
    if (!(mw.u == 0.0 && mw.p == 1.0 / 3.0)) {
      ok = false;
      failure = "worked MW example";
    }
    Eigen::VectorXd w3(3);
    w3 << 1, 2, 3;
    const auto wsr = stats::wilcoxon_signed_rank(w3);
    if (!(wsr.w == 6.0 && wsr.p == 0.25)) {
      ok = false;
      failure = "worked Wilcoxon example";
    }
  }

  // Mann-Whitney vs full enumeration for every n, m <= 8 (tie-free).
  std::uint64_t seed = 2000;
  for (int n = 1; n <= 8 && ok; ++n) {
    for (int m = 1; m <= 8 && ok; ++m) {
      rng::Stream rng(seed++);
      std::vector<double> xs(n), ys(m);
      for (auto& v : xs) v = rng.uniform();
      for (auto& v : ys) v = rng.uniform();
      const Eigen::VectorXd x = Eigen::Map<Eigen::VectorXd>(xs.data(), n);
      const Eigen::VectorXd y = Eigen::Map<Eigen::VectorXd>(ys.data(), m);
      const auto r = stats::mann_whitney_u(x, y);
      if (!r.exact || r.p != oracle::mann_whitney_enumerated_p(xs, ys)) {
        ok = false;
        failure = "MW n=" + std::to_string(n) + " m=" + std::to_string(m);
      }
    }
  }

  // Wilcoxon vs 2^n sign enumeration for every n <= 12.
  for (int n = 1; n <= 12 && ok; ++n) {
    rng::Stream rng(seed++);
    std::vector<double> xs(n);
    for (auto& v : xs) v = rng.gauss() + 0.3;
    const Eigen::VectorXd x = Eigen::Map<Eigen::VectorXd>(xs.data(), n);
    const auto r = stats::wilcoxon_signed_rank(x);
    if (!r.exact || r.p != oracle::wilcoxon_enumerated_p(xs, 0.0)) {
      ok = false;
      failure = "Wilcoxon n=" + std::to_string(n);
    }
  }

  // Cliff's delta vs brute force, with ties.
  for (int trial = 0; trial < 30 && ok; ++trial) {
    rng::Stream rng(seed++);
    const int n = 1 + static_cast<int>(rng.below(25));
    const int m = 1 + static_cast<int>(rng.below(25));
    std::vector<double> xs(n), ys(m);
    for (auto& v : xs) v = static_cast<double>(rng.below(10));
    for (auto& v : ys) v = static_cast<double>(rng.below(10));
    const Eigen::VectorXd x = Eigen::Map<Eigen::VectorXd>(xs.data(), n);
    const Eigen::VectorXd y = Eigen::Map<Eigen::VectorXd>(ys.data(), m);
    if (stats::cliffs_delta(x, y).delta != oracle::cliffs_delta_brute(xs, ys)) {
      ok = false;
      failure = "Cliff trial " + std::to_string(trial);
    }
  }

  report(2, "statistics exactness vs enumeration", ok,
         ok ? "MW all n,m<=8; Wilcoxon n<=12; Cliff 30 trials; worked examples"
            : failure);
}

// ---------------------------------------------------------------------------
// Criterion 3: separation index fidelity.
// ---------------------------------------------------------------------------

void criterion3() {
  bool ok = true;
  std::string failure;
  double max_err = 0;

  std::uint64_t seed = 3000;
  for (int trial = 0; trial < 100 && ok; ++trial) {
    rng::Stream rng(seed++);
    const int dim = 2 + static_cast<int>(rng.below(15));
    auto group = [&](int count) {
      std::vector<Eigen::VectorXd> g;
      for (int i = 0; i < count; ++i) {
        Eigen::VectorXd v(dim);
        for (int k = 0; k < dim; ++k) v[k] = rng.gauss();
        g.push_back(std::move(v));
      }
      return g;
    };
    const auto g1 = group(1 + static_cast<int>(rng.below(6)));
    const auto g2 = group(1 + static_cast<int>(rng.below(6)));
    const double got = sim::delta_cos(g1, g2);
    const double want = oracle::delta_cos_direct(g1, g2);
    max_err = std::max(max_err, std::abs(got - want));
    if (std::abs(got - want) > 1e-12) {
      ok = false;
      failure = "trial " + std::to_string(trial);
    }
  }

  // Identical groups: exactly 0. Orthogonal groups: exactly 1.
  if (ok) {
    Eigen::VectorXd v(4);
    v << 0.3, -1.2, 0.5, 2.0;
    const std::vector<Eigen::VectorXd> a = {v, v};
    const std::vector<Eigen::VectorXd> b = {v, v, v};
    if (sim::delta_cos(a, b) != 0.0) {
      ok = false;
      failure = "identical groups not exactly 0";
    }
    Eigen::VectorXd e1 = Eigen::VectorXd::Zero(4);
    Eigen::VectorXd e2 = Eigen::VectorXd::Zero(4);
    e1[0] = 2.0;
    e2[1] = 0.7;
    const std::vector<Eigen::VectorXd> g1 = {e1, 2.0 * e1};
    const std::vector<Eigen::VectorXd> g2 = {e2, 3.0 * e2, 0.5 * e2};
    if (sim::delta_cos(g1, g2) != 1.0) {
      ok = false;
      failure = "orthogonal groups not exactly 1";
    }
  }

  char detail[120];
  std::snprintf(detail, sizeof(detail),
                "100 seeded pairs, max |diff| %.3g; special cases exact",
                max_err);
  report(3, "separation index fidelity", ok, ok ? detail : failure);
}

// ---------------------------------------------------------------------------
// Criterion 4: ROI partition and infarct monotonicity.
// ---------------------------------------------------------------------------

LabelMask sphere_mask(int n, double cx, double cy, double cz, double r) {
  LabelMask mask(n, n, n);
  for (int z = 0; z < n; ++z)
    for (int y = 0; y < n; ++y)
      for (int x = 0; x < n; ++x) {
        const double dx = x - cx, dy = y - cy, dz = z - cz;
        if (dx * dx + dy * dy + dz * dz <= r * r) mask.at(x, y, z) = 1;
      }
  return mask;
}

void merge_into(LabelMask& dst, const LabelMask& src) {
  for (std::size_t i = 0; i < dst.labels.size(); ++i) {
    dst.labels[i] = dst.labels[i] || src.labels[i];
  }
}

// Independent radius-1 Chebyshev dilation (27-neighborhood scan).
LabelMask dilate1_direct(const LabelMask& mask) {
  LabelMask out(mask.nx, mask.ny, mask.nz);
  for (int z = 0; z < mask.nz; ++z)
    for (int y = 0; y < mask.ny; ++y)
      for (int x = 0; x < mask.nx; ++x) {
        bool hit = false;
        for (int dz = -1; dz <= 1 && !hit; ++dz)
          for (int dy = -1; dy <= 1 && !hit; ++dy)
            for (int dx = -1; dx <= 1 && !hit; ++dx) {
              const int xx = x + dx, yy = y + dy, zz = z + dz;
              if (xx < 0 || xx >= mask.nx || yy < 0 || yy >= mask.ny ||
                  zz < 0 || zz >= mask.nz) {
                continue;
              }
              hit = mask.at(xx, yy, zz) != 0;
            }
        if (hit) out.at(x, y, z) = 1;
      }
  return out;
}

void criterion4() {
  bool ok = true;
  std::string failure;
  const int n = 22;

  for (std::uint64_t seed = 4000; seed < 4050 && ok; ++seed) {
    rng::Stream rng(seed);
    const LabelMask brain = sphere_mask(n, 11, 11, 11, 9.5);
    // CLB on the left, penumbra/core blobs on the right: disjoint raw masks.
    const LabelMask clb =
        sphere_mask(n, 5 + rng.uniform(), 11 + rng.uniform(-2, 2),
                    11 + rng.uniform(-2, 2), 2.5);
    LabelMask penumbra = sphere_mask(n, 15 + rng.uniform(-1, 1),
                                     11 + rng.uniform(-3, 3), 11, 3.5);
    merge_into(penumbra, sphere_mask(n, 14 + rng.uniform(-1, 1), 13, 12, 2.5));
    const LabelMask core =
        sphere_mask(n, 15 + rng.uniform(-1, 1), 11.5, 11.5, 1.8);

    LabelMask infarct(n, n, n);
    {
      const LabelMask blob = sphere_mask(n, 14 + rng.uniform(-2, 2),
                                         11 + rng.uniform(-2, 2), 11, 2.8);
      for (std::size_t i = 0; i < infarct.labels.size(); ++i) {
        infarct.labels[i] = blob.labels[i] && brain.labels[i];
      }
    }

    const LabelMask t1 = roi::build_t1_labels(clb, penumbra, core, brain, 1);
    const auto result = roi::build_bitemporal(t1, infarct, brain);

    // Oracle: per-voxel set algebra over the raw masks.
    const LabelMask core_dilated = dilate1_direct(core);
    std::uint64_t dropped = 0;
    for (int z = 0; z < n && ok; ++z)
      for (int y = 0; y < n && ok; ++y)
        for (int x = 0; x < n && ok; ++x) {
          const std::uint8_t code = result.labels.at(x, y, z);
          if (!brain.at(x, y, z)) {
            if (code != 0) {
              ok = false;
              failure = "non-brain voxel labeled";
            }
            continue;
          }
          const bool in_c = core_dilated.at(x, y, z);
          const bool in_p = !in_c && penumbra.at(x, y, z);
          const bool in_clb = !in_c && !in_p && clb.at(x, y, z);
          const bool fi = infarct.at(x, y, z) != 0;
          std::uint8_t expected = 0;
          if (in_c) {
            expected = fi ? 6 : 5;
          } else if (in_p) {
            expected = fi ? 4 : 3;
          } else if (in_clb) {
            expected = fi ? 0 : 1;  // CLB-with-infarct drops to background
          } else {
            expected = fi ? 2 : 0;  // NHB that stayed brain drops
          }
          if (expected == 0) ++dropped;
          if (code != expected) {
            ok = false;
            failure = "partition mismatch at seed " + std::to_string(seed);
          }
        }
    if (ok && result.clb_fi_dropped + result.nhb_b_dropped +
                      result.unlabeled_in_brain !=
                  dropped) {
      ok = false;
      failure = "audit counts do not reconcile";
    }
  }

  // Monotonicity on 20 nested-infarct sequences.
  for (std::uint64_t seed = 4100; seed < 4120 && ok; ++seed) {
    rng::Stream rng(seed);
    const LabelMask brain = sphere_mask(n, 11, 11, 11, 9.5);
    const LabelMask clb = sphere_mask(n, 5, 11, 11, 2.5);
    const LabelMask penumbra = sphere_mask(n, 15, 11, 11, 3.5);
    const LabelMask core = sphere_mask(n, 15, 11.5, 11.5, 1.5);
    const LabelMask t1 = roi::build_t1_labels(clb, penumbra, core, brain, 1);

    auto clip = [&](LabelMask m) {
      for (std::size_t i = 0; i < m.labels.size(); ++i) {
        m.labels[i] = m.labels[i] && brain.labels[i];
      }
      return m;
    };
    auto is_fi = [](std::uint8_t c) { return c == 2 || c == 4 || c == 6; };

    LabelMask previous = clip(sphere_mask(n, 14 + rng.uniform(-2, 2),
                                          11 + rng.uniform(-2, 2), 11, 1.5));
    auto before = roi::build_bitemporal(t1, previous, brain);
    for (int step = 0; step < 2 && ok; ++step) {
      const LabelMask grown = clip(roi::dilate_mask(previous, 1));
      const auto after = roi::build_bitemporal(t1, grown, brain);
      for (std::size_t i = 0; i < before.labels.labels.size(); ++i) {
        if (is_fi(before.labels.labels[i]) && !is_fi(after.labels.labels[i])) {
          ok = false;
          failure = "monotonicity violated at seed " + std::to_string(seed);
          break;
        }
      }
      previous = grown;
      before = after;
    }
  }

  report(4, "ROI partition and monotonicity", ok,
         ok ? "50 seeded triplets voxel-exact; 20 nested sequences monotone"
            : failure);
}

// ---------------------------------------------------------------------------
// Criterion 5: end-to-end phantom discrimination, p_to_b vs p_to_fi.
// ---------------------------------------------------------------------------

std::string discrimination_phantom_json() {
  nlohmann::json j;
  j["dims"] = {48, 48, 56, 10};
  j["seed"] = 20240;
  j["regions"] = nlohmann::json::array();
  auto sphere = [&](const char* cls, double cx, double cy, double cz, double r,
                    double noise) {
    nlohmann::json rj;
    rj["class"] = cls;
    rj["center"] = {cx, cy, cz};
    rj["radius"] = r;
    if (std::string(cls) != "fi-overlay") {
      rj["tac"] = {{"baseline", 40.0},
                   {"peak", 75.0},
                   {"time_to_peak", 5.0},
                   {"width", 2.0},
                   {"noise_sd", noise}};
    }
    j["regions"].push_back(rj);
  };
  sphere("NHB", 24, 24, 28, 23, 1.0);
  sphere("CLB", 10, 38, 28, 4, 1.0);
  // Two penumbra columns with distinct temporal-noise texture; the follow-up
  // infarct overlay coincides with the textured column.
  for (int zc = 6; zc <= 46; zc += 4) {
    sphere("p", 14, 24, zc, 6, 1.5);  // smooth column -> recovers
    sphere("p", 34, 24, zc, 6, 9.0);  // textured column -> infarcts
    sphere("fi-overlay", 34, 24, zc, 6, 0.0);
  }
  return j.dump(2);
}

void criterion5() {
  Timer timer;
  const fs::path dir = fresh_dir("discrimination");
  const fs::path phantom_cfg = dir / "phantom.json";
  write_text(phantom_cfg, discrimination_phantom_json());
  pipeline::cmd_phantom(phantom_cfg.string(), (dir / "phantom").string(), {});

  nlohmann::json run;
  run["patients"] = {{{"id", "pt01"},
                      {"volume", (dir / "phantom" / "volume.nii").string()},
                      {"t1_labels", (dir / "phantom" / "t1_mask.nii").string()},
                      {"t2_mask", (dir / "phantom" / "t2_mask.nii").string()}}};
  run["glcm"] = {{"bin_width", 8.0}, {"delta", 1},
                 {"direction_mode", "average"}};
  run["out"] = (dir / "out").string();
  const fs::path run_cfg = dir / "run.json";
  write_text(run_cfg, run.dump(2));

  auto config = pipeline::load_run_config(run_cfg.string());
  pipeline::cmd_features(config);
  pipeline::cmd_stats(config);

  // Count slice records per class in the GLCM table.
  const auto table =
      io::read_feature_table((dir / "out" / "features_GLCM.csv").string());
  int n_pb = 0, n_pfi = 0;
  for (const auto& row : table.rows) {
    n_pb += row.roi_class == RoiClass::PToB;
    n_pfi += row.roi_class == RoiClass::PToFi;
  }

  // Read the test1 GLCM rows from the stats output.
  std::ifstream in(dir / "out" / "stats_tests.csv");
  std::string line;
  std::getline(in, line);  // header
  int large_significant = 0, glcm_rows = 0;
  while (std::getline(in, line)) {
    std::stringstream ss(line);
    std::vector<std::string> fields;
    std::string field;
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (fields.size() != 12 || fields[0] != "test1") continue;
    const std::string& feature = fields[3];
    if (feature != "imc1" && feature != "imc2" && feature != "mcc" &&
        feature != "correlation") {
      continue;
    }
    ++glcm_rows;
    const double p_corr = std::stod(fields[7]);
    const double delta = std::stod(fields[8]);
    if (p_corr < 0.05 && std::abs(delta) >= 0.474) ++large_significant;
  }

  const bool ok =
      n_pb >= 40 && n_pfi >= 40 && glcm_rows == 4 && large_significant >= 3;
  char detail[200];
  std::snprintf(detail, sizeof(detail),
                "records p_to_b=%d p_to_fi=%d; %d/4 GLCM features significant "
                "with large effect, %.1f s",
                n_pb, n_pfi, large_significant, timer.seconds());
  report(5, "end-to-end phantom discrimination", ok, detail);
}

// ---------------------------------------------------------------------------
// Criterion 6: FE1 slice extraction vs exhaustive window oracle.
// ---------------------------------------------------------------------------

void criterion6() {
  bool ok = true;
  std::string failure;

  for (std::uint64_t seed = 6000; seed < 6020 && ok; ++seed) {
    rng::Stream rng(seed);
    Volume4D vol(16, 16, 1, 10);
    for (auto& v : vol.values) v = static_cast<float>(rng.uniform(0, 90));
    LabelMask roi(16, 16, 1);
    for (auto& v : roi.labels) {
      v = static_cast<std::uint8_t>(rng.below(8));  // 0..7; 7 is background
      if (v == 7) v = 0;
    }

    const auto records = baseline::extract_baseline_slice(vol, 0, roi, "pt");

    std::map<RoiClass, Eigen::Matrix<double, 6, 1>> expected;
    for (int y = 1; y < 15; ++y) {
      for (int x = 1; x < 15; ++x) {
        const std::uint8_t label = roi.at(x, y, 0);
        if (label == 0 || label > 6) continue;
        std::vector<double> vals;
        for (int dy = -1; dy <= 1; ++dy)
          for (int dx = -1; dx <= 1; ++dx)
            for (int t = 0; t < 10; ++t)
              vals.push_back(vol.at(x + dx, y + dy, 0, t));
        const auto o = oracle::window_stats_direct(vals);
        Eigen::Matrix<double, 6, 1> v;
        v << o.mean, o.sd, o.skew, o.kurt, o.min, o.max;
        const auto cls = static_cast<RoiClass>(label);
        auto it = expected.find(cls);
        if (it == expected.end()) {
          expected[cls] = v;
        } else {
          it->second = it->second.cwiseMax(v);
        }
      }
    }

    if (records.size() != expected.size()) {
      ok = false;
      failure = "record count mismatch, seed " + std::to_string(seed);
      break;
    }
    for (const auto& rec : records) {
      const auto& want = expected.at(rec.roi_class);
      for (int i = 0; i < 6; ++i) {
        if (!oracle::close_rel(rec.values[i], want[i], 1e-9)) {
          ok = false;
          failure = "value mismatch, seed " + std::to_string(seed);
        }
      }
    }
  }

  // Sigma-zero convention on a constant region.
  if (ok) {
    Volume4D vol(8, 8, 1, 6);
    for (auto& v : vol.values) v = 40.0f;
    LabelMask roi(8, 8, 1);
    for (int y = 2; y <= 5; ++y)
      for (int x = 2; x <= 5; ++x) roi.at(x, y, 0) = 1;
    const auto records = baseline::extract_baseline_slice(vol, 0, roi, "pt");
    if (records.size() != 1 || records[0].values[0] != 40.0 ||
        records[0].values[1] != 0.0 || records[0].values[2] != 0.0 ||
        records[0].values[3] != 0.0) {
      ok = false;
      failure = "sigma-zero convention violated";
    }
  }

  report(6, "FE1 exhaustive window oracle", ok,
         ok ? "20 seeded 16x16x1x10 slabs exact; sigma-zero convention holds"
            : failure);
}

// ---------------------------------------------------------------------------
// Criterion 7: t-SNE determinism, KL decrease, blob separability, big run.
// ---------------------------------------------------------------------------

Eigen::MatrixXd blob_data(std::uint64_t seed, int per_blob, int dim,
                          std::vector<int>* labels = nullptr) {
  rng::Stream rng(seed);
  Eigen::MatrixXd x(2 * per_blob, dim);
  if (labels) labels->assign(2 * per_blob, 0);
  for (int i = 0; i < 2 * per_blob; ++i) {
    const int blob = i < per_blob ? 0 : 1;
    if (labels) (*labels)[i] = blob;
    for (int c = 0; c < dim; ++c) {
      x(i, c) = rng.gauss() + (blob == 0 ? 0.0 : 12.0);
    }
  }
  return x;
}

void criterion7() {
  bool ok = true;
  std::string failure;
  Timer timer;

  tsne::TsneConfig small_cfg;
  small_cfg.perplexity = 10;
  small_cfg.iterations = 400;
  small_cfg.learning_rate = 50;  // sized for the small benchmark sets
  small_cfg.seed = 17;

  // Determinism: bit-identical repeat runs.
  {
    const Eigen::MatrixXd x = blob_data(70, 25, 8);
    const Eigen::MatrixXd a = tsne::run_tsne(x, small_cfg);
    const Eigen::MatrixXd b = tsne::run_tsne(x, small_cfg);
    if (a != b) {
      ok = false;
      failure = "fixed seed not bit-identical";
    }
  }

  // KL decreases on 10 seeded datasets.
  for (std::uint64_t seed = 7000; seed < 7010 && ok; ++seed) {
    const Eigen::MatrixXd x = blob_data(seed, 20, 5);
    tsne::TsneDiagnostics diag;
    tsne::TsneConfig cfg = small_cfg;
    cfg.seed = seed;
    tsne::run_tsne(x, cfg, &diag);
    if (!(diag.kl_final < diag.kl_initial)) {
      ok = false;
      failure = "KL did not decrease, seed " + std::to_string(seed);
    }
  }

  // Two-blob 1-NN accuracy >= 0.9 (N = 60).
  if (ok) {
    std::vector<int> labels;
    const Eigen::MatrixXd x = blob_data(7, 30, 10, &labels);
    const Eigen::MatrixXd y = tsne::run_tsne(x, small_cfg);
    int correct = 0;
    const int n = static_cast<int>(y.rows());
    for (int i = 0; i < n; ++i) {
      double best = 1e300;
      int nearest = -1;
      for (int j = 0; j < n; ++j) {
        if (j == i) continue;
        const double d = (y.row(i) - y.row(j)).squaredNorm();
        if (d < best) {
          best = d;
          nearest = j;
        }
      }
      correct += labels[nearest] == labels[i];
    }
    if (static_cast<double>(correct) / n < 0.9) {
      ok = false;
      failure = "1-NN accuracy " + std::to_string(correct) + "/60";
    }
  }

  // Full-size run: N=2000, D=256, default configuration, < 5 minutes.
  double big_seconds = 0;
  if (ok) {
    Timer big;
    rng::Stream rng(71);
    Eigen::MatrixXd x(2000, 256);
    for (int i = 0; i < 2000; ++i) {
      const int blob = i % 4;
      for (int c = 0; c < 256; ++c) {
        x(i, c) = rng.gauss() + 3.0 * blob * ((c % 4) == blob ? 1.0 : 0.0);
      }
    }
    tsne::TsneConfig cfg;  // defaults: perplexity 30, 1000 iterations
    cfg.seed = 9;
    tsne::TsneDiagnostics diag;
    tsne::run_tsne(x, cfg, &diag);
    big_seconds = big.seconds();
    if (big_seconds >= 300.0) {
      ok = false;
      failure = "big run took " + std::to_string(big_seconds) + " s";
    } else if (!(diag.kl_final < diag.kl_initial)) {
      ok = false;
      failure = "big run KL did not decrease";
    }
  }

  char detail[160];
  std::snprintf(detail, sizeof(detail),
                "deterministic; KL decreased 10/10; 1-NN >= 0.9; "
                "2000x256 run %.1f s (total %.1f s)",
                big_seconds, timer.seconds());
  report(7, "t-SNE properties", ok, ok ? detail : failure);
}

// ---------------------------------------------------------------------------
// Criterion 8: byte-identical reruns through the CLI.
// ---------------------------------------------------------------------------

int run_cli(const std::string& cli, const std::string& args) {
  const std::string cmd = cli + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  if (status == -1) return -1;
  return WEXITSTATUS(status);
}

std::string repro_phantom_json() {
  nlohmann::json j;
  j["dims"] = {28, 28, 10, 8};
  j["seed"] = 99;
  j["regions"] = nlohmann::json::array();
  auto add = [&](const nlohmann::json& rj) { j["regions"].push_back(rj); };
  add({{"class", "NHB"},
       {"center", {9, 9, 4.5}},
       {"radius", 4.5},
       {"tac",
        {{"baseline", 40}, {"peak", 55}, {"time_to_peak", 4}, {"width", 1.5},
         {"noise_sd", 1.0}}}});
  add({{"class", "CLB"},
       {"center", {20, 20, 4.5}},
       {"radius", 3},
       {"tac",
        {{"baseline", 40}, {"peak", 55}, {"time_to_peak", 4}, {"width", 1.5},
         {"noise_sd", 1.0}}}});
  add({{"class", "p"},
       {"center", {9, 18, 4.5}},
       {"radius", 4},
       {"tac",
        {{"baseline", 38}, {"peak", 65}, {"time_to_peak", 5}, {"width", 2.0},
         {"noise_sd", 2.0}}}});
  add({{"class", "c"},
       {"center", {9, 18, 4.5}},
       {"radius", 2},
       {"tac",
        {{"baseline", 35}, {"peak", 42}, {"time_to_peak", 6}, {"width", 2.5},
         {"noise_sd", 4.0}}}});
  add({{"class", "fi-overlay"}, {"center", {9, 19, 4.5}}, {"radius", 3}});
  return j.dump(2);
}

void criterion8(const std::string& cli) {
  const fs::path dir = fresh_dir("repro");
  write_text(dir / "phantom.json", repro_phantom_json());
  bool ok = run_cli(cli, "phantom --config " + (dir / "phantom.json").string() +
                             " --out " + (dir / "phantom").string()) == 0;
  std::string failure = ok ? "" : "phantom generation failed";

  if (ok) {
    // Simulated encoder outputs for both embedding families.
    for (const char* family : {"MJNET", "NNUNET"}) {
      for (int z = 0; z < 10; ++z) {
        EmbeddingMap map(7, 7, 6, 4, 0, 0);
        rng::Stream rng(pipeline::fnv1a64(family) + 31 * z);
        for (auto& v : map.vectors) {
          v = static_cast<float>(std::abs(rng.gauss()) + 0.05);
        }
        io::write_embedding_blob(
            map, (dir / "phantom" /
                  (std::string(family) + "_z" + std::to_string(z) + ".emb"))
                     .string());
      }
    }

    nlohmann::json run;
    run["patients"] = {
        {{"id", "pt01"},
         {"volume", (dir / "phantom" / "volume.nii").string()},
         {"t1_labels", (dir / "phantom" / "t1_mask.nii").string()},
         {"t2_mask", (dir / "phantom" / "t2_mask.nii").string()},
         {"embeddings",
          {{"MJNET", (dir / "phantom" / "MJNET_z{z}.emb").string()},
           {"NNUNET", (dir / "phantom" / "NNUNET_z{z}.emb").string()}}}}};
    run["tsne"] = {{"perplexity", 4.0},
                   {"iterations", 200},
                   {"learning_rate", 50.0},
                   {"seed", 3}};
    run["out"] = (dir / "out_a").string();
    write_text(dir / "run.json", run.dump(2));

    const std::string base = "run --config " + (dir / "run.json").string();
    ok = run_cli(cli, base) == 0;
    if (ok) {
      ok = run_cli(cli, base + " --out " + (dir / "out_b").string()) == 0;
    }
    if (!ok) failure = "pipeline run failed";
  }

  int compared = 0;
  if (ok) {
    for (const auto& entry : fs::directory_iterator(dir / "out_a")) {
      const auto name = entry.path().filename();
      if (slurp(entry.path()) != slurp(dir / "out_b" / name)) {
        ok = false;
        failure = "differs: " + name.string();
        break;
      }
      ++compared;
    }
    if (ok && compared < 15) {
      ok = false;
      failure = "too few outputs compared";
    }
  }

  char detail[120];
  std::snprintf(detail, sizeof(detail), "%d output files byte-identical",
                compared);
  report(8, "byte-identical reruns via the CLI", ok, ok ? detail : failure);
}

}  // namespace

int main(int argc, char** argv) {
  if (argc < 2) {
    std::fprintf(stderr, "usage: acceptance_suite <path-to-bitemp-cli>\n");
    return 2;
  }
  const std::string cli = argv[1];

  std::printf("bitemp acceptance suite\n");
  criterion1();
  criterion2();
  criterion3();
  criterion4();
  criterion5();
  criterion6();
  criterion7();
  criterion8(cli);

  std::printf("%s: %d criterion(s) failed\n",
              g_failures == 0 ? "SUCCESS" : "FAILURE", g_failures);
  return g_failures == 0 ? 0 : 1;
}
