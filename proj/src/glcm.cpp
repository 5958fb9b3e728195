#include "bitemp/glcm.hpp"

#include <cmath>
#include <limits>

#include <Eigen/Eigenvalues>

namespace bitemp::glcm {

namespace {
constexpr double kLogEps = 0x1.0p-52;

double log2_guard(double v) { return std::log2(v + kLogEps); }
}  // namespace

const std::array<std::array<int, 3>, 13>& directions13() {
  static const std::array<std::array<int, 3>, 13> dirs = [] {
    std::array<std::array<int, 3>, 13> d{};
    int k = 0;
    for (int dx = -1; dx <= 1; ++dx) {
      for (int dy = -1; dy <= 1; ++dy) {
        for (int dt = -1; dt <= 1; ++dt) {
          if (dx == 0 && dy == 0 && dt == 0) continue;
          const bool canonical =
              dx > 0 || (dx == 0 && dy > 0) || (dx == 0 && dy == 0 && dt > 0);
          if (canonical) d[k++] = {dx, dy, dt};
        }
      }
    }
    return d;
  }();
  return dirs;
}

LevelGrid quantize(const Region3& region, double bin_width) {
  if (!(bin_width > 0)) {
    throw Error(ErrorCode::OutOfRange, "bin_width must be > 0");
  }

  double min_v = std::numeric_limits<double>::infinity();
  bool any = false;
  for (std::size_t i = 0; i < region.mask.size(); ++i) {
    if (region.mask[i]) {
      any = true;
      min_v = std::min(min_v, static_cast<double>(region.values[i]));
    }
  }
  if (!any) throw Error(ErrorCode::EmptyRoi, "quantize: empty mask");

  LevelGrid grid;
  grid.nx = region.nx;
  grid.ny = region.ny;
  grid.nt = region.nt;
  grid.levels.assign(region.mask.size(), 0);
  for (std::size_t i = 0; i < region.mask.size(); ++i) {
    if (!region.mask[i]) continue;
    const int level =
        static_cast<int>(std::floor((region.values[i] - min_v) / bin_width)) +
        1;
    grid.levels[i] = level;
    grid.n_levels = std::max(grid.n_levels, level);
  }
  return grid;
}

GlcmAccumulator accumulate_glcm(const LevelGrid& levels) {
  GlcmAccumulator acc;
  acc.n_levels = levels.n_levels;
  const int ng = std::max(levels.n_levels, 1);
  for (auto& m : acc.counts) m = Eigen::MatrixXd::Zero(ng, ng);

  const auto& dirs = directions13();
  for (int t = 0; t < levels.nt; ++t) {
    for (int y = 0; y < levels.ny; ++y) {
      for (int x = 0; x < levels.nx; ++x) {
        const int a = levels.levels[levels.index(x, y, t)];
        if (a == 0) continue;
        for (std::size_t d = 0; d < dirs.size(); ++d) {
          const int xx = x + dirs[d][0];
          const int yy = y + dirs[d][1];
          const int tt = t + dirs[d][2];
          if (xx < 0 || xx >= levels.nx || yy < 0 || yy >= levels.ny ||
              tt < 0 || tt >= levels.nt) {
            continue;
          }
          const int b = levels.levels[levels.index(xx, yy, tt)];
          if (b == 0) continue;
          // Record both orderings: directed counts plus their transpose is
          // the symmetrized matrix.
          acc.counts[d](a - 1, b - 1) += 1.0;
          acc.counts[d](b - 1, a - 1) += 1.0;
        }
      }
    }
  }
  return acc;
}

DirectionMode direction_mode_from_name(const std::string& name) {
  if (name == "average") return DirectionMode::Average;
  if (name == "merged") return DirectionMode::Merged;
  throw Error(ErrorCode::ConfigError,
              "direction_mode must be 'average' or 'merged', got '" + name +
                  "'");
}

GlcmFeatures features_from_distribution(const Eigen::MatrixXd& p) {
  const Eigen::Index ng = p.rows();
  const Eigen::VectorXd px = p.rowwise().sum();
  const Eigen::VectorXd py = p.colwise().sum();

  Eigen::VectorXd levels(ng);
  for (Eigen::Index i = 0; i < ng; ++i) levels[i] = static_cast<double>(i + 1);

  const double mu_x = levels.dot(px);
  const double mu_y = levels.dot(py);
  const double var_x = (levels.array() - mu_x).square().matrix().dot(px);
  const double var_y = (levels.array() - mu_y).square().matrix().dot(py);
  const double sigma_x = std::sqrt(var_x);
  const double sigma_y = std::sqrt(var_y);

  double hx = 0, hy = 0, hxy = 0, hxy1 = 0, hxy2 = 0;
  for (Eigen::Index i = 0; i < ng; ++i) {
    if (px[i] != 0) hx -= px[i] * log2_guard(px[i]);
    if (py[i] != 0) hy -= py[i] * log2_guard(py[i]);
  }
  double cross = 0;  // sum of i*j*p(i,j), 1-based levels
  for (Eigen::Index i = 0; i < ng; ++i) {
    for (Eigen::Index j = 0; j < ng; ++j) {
      const double pij = p(i, j);
      const double pxpy = px[i] * py[j];
      if (pij != 0) {
        hxy -= pij * log2_guard(pij);
        hxy1 -= pij * log2_guard(pxpy);
        cross += levels[i] * levels[j] * pij;
      }
      if (pxpy != 0) hxy2 -= pxpy * log2_guard(pxpy);
    }
  }

  GlcmFeatures f;

  // Imc1, guarding an effectively single-level direction whose marginal
  // entropy is only eps-sized.
  const double denom = std::max(hx, hy);
  f.imc1 = (std::abs(denom) < 1e-12) ? 0.0 : (hxy - hxy1) / denom;

  f.imc2 = std::sqrt(std::max(0.0, 1.0 - std::exp(-2.0 * (hxy2 - hxy))));

  const double sxsy = sigma_x * sigma_y;
  if (sxsy == 0) {
    // Single occupied level: numerator is identically 0.
    f.correlation = 1.0;
  } else {
    f.correlation = (cross - mu_x * mu_y) / sxsy;
  }

  // MCC via the symmetric similarity transform of Q: with
  // A(i,j) = p(i,j) / sqrt(px(i) * py(j)) over occupied levels, Q is similar
  // to A * A^T, so lambda(Q) are the squared eigenvalues of symmetric A.
  std::vector<Eigen::Index> occupied;
  for (Eigen::Index i = 0; i < ng; ++i) {
    if (px[i] > 0) occupied.push_back(i);
  }
  if (occupied.size() <= 1) {
    f.mcc = 1.0;
  } else {
    const Eigen::Index m = static_cast<Eigen::Index>(occupied.size());
    Eigen::MatrixXd a(m, m);
    for (Eigen::Index i = 0; i < m; ++i) {
      for (Eigen::Index j = 0; j < m; ++j) {
        a(i, j) = p(occupied[i], occupied[j]) /
                  std::sqrt(px[occupied[i]] * py[occupied[j]]);
      }
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(a);
    if (solver.info() != Eigen::Success) {
      throw Error(ErrorCode::NumericalFailure, "MCC eigensolver failed");
    }
    Eigen::VectorXd squared = solver.eigenvalues().array().square();
    std::sort(squared.data(), squared.data() + squared.size(),
              std::greater<double>());
    f.mcc = std::sqrt(std::max(0.0, squared[1]));
  }
  return f;
}

GlcmFeatures glcm_features(const GlcmAccumulator& acc, DirectionMode mode) {
  if (acc.n_levels == 1) {
    GlcmFeatures f;
    f.imc1 = 0;
    f.imc2 = 0;
    f.mcc = 1;
    f.correlation = 1;
    f.single_level = true;
    return f;
  }

  std::vector<int> contributing;
  for (int d = 0; d < 13; ++d) {
    if (acc.direction_total(d) > 0) contributing.push_back(d);
  }
  if (contributing.empty()) {
    throw Error(ErrorCode::DegenerateGlcm,
                "no co-occurring pairs in any direction");
  }

  if (mode == DirectionMode::Merged) {
    Eigen::MatrixXd total = acc.counts[contributing[0]];
    for (std::size_t k = 1; k < contributing.size(); ++k) {
      total += acc.counts[contributing[k]];
    }
    return features_from_distribution(total / total.sum());
  }

  GlcmFeatures mean;
  mean.imc1 = mean.imc2 = mean.mcc = mean.correlation = 0;
  for (int d : contributing) {
    const Eigen::MatrixXd p = acc.counts[d] / acc.direction_total(d);
    const GlcmFeatures f = features_from_distribution(p);
    mean.imc1 += f.imc1;
    mean.imc2 += f.imc2;
    mean.mcc += f.mcc;
    mean.correlation += f.correlation;
  }
  const double n = static_cast<double>(contributing.size());
  mean.imc1 /= n;
  mean.imc2 /= n;
  mean.mcc /= n;
  mean.correlation /= n;
  return mean;
}

SliceGlcmResult extract_glcm_slice(const Volume4D& volume, int z,
                                   const LabelMask& roi,
                                   const std::string& patient,
                                   double bin_width, DirectionMode mode) {
  if (!volume.spatial_dims_match(roi.nx, roi.ny, roi.nz)) {
    throw Error(ErrorCode::InvalidData, "ROI dims do not match volume dims");
  }
  if (z < 0 || z >= volume.nz) {
    throw Error(ErrorCode::OutOfRange, "slice index out of range");
  }

  SliceGlcmResult result;

  std::array<bool, kNumRoiClasses + 1> present{};
  for (int y = 0; y < roi.ny; ++y) {
    for (int x = 0; x < roi.nx; ++x) {
      const std::uint8_t label = roi.at(x, y, z);
      if (label >= 1 && label <= kNumRoiClasses) present[label] = true;
    }
  }

  for (int code = 1; code <= kNumRoiClasses; ++code) {
    if (!present[code]) continue;
    const RoiClass cls = static_cast<RoiClass>(code);

    // (x, y, t) block; the 2D class mask repeats over every time index.
    Region3 region(volume.nx, volume.ny, volume.nt);
    for (int t = 0; t < volume.nt; ++t) {
      for (int y = 0; y < volume.ny; ++y) {
        for (int x = 0; x < volume.nx; ++x) {
          const std::size_t i = region.index(x, y, t);
          region.values[i] = volume.at(x, y, z, t);
          region.mask[i] = roi.at(x, y, z) == code ? 1 : 0;
        }
      }
    }

    auto skip = [&](const std::string& reason) {
      result.skips.push_back(
          {"glcm", patient, z, roi_class_name(cls), reason});
    };

    try {
      const LevelGrid levels = quantize(region, bin_width);
      const GlcmAccumulator acc = accumulate_glcm(levels);
      const GlcmFeatures features = glcm_features(acc, mode);
      if (features.single_level) {
        skip("single_level");
        continue;
      }
      FeatureRecord rec;
      rec.patient = patient;
      rec.slice = z;
      rec.roi_class = cls;
      rec.values = features.as_vector();
      result.records.push_back(std::move(rec));
    } catch (const Error& e) {
      if (e.code() == ErrorCode::DegenerateGlcm) {
        skip("degenerate_glcm");
      } else if (e.code() == ErrorCode::EmptyRoi) {
        skip("empty_roi");
      } else {
        throw;
      }
    }
  }
  return result;
}

}  // namespace bitemp::glcm
