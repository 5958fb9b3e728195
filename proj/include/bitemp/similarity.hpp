#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "bitemp/types.hpp"

namespace bitemp::sim {

// Absolute cosine similarity |a.b| / (|a||b|) in [0, 1]. Computed as
// |a.b| / sqrt((a.a)(b.b)) so that identical inputs give exactly 1.
double cos_sim(Eigen::Ref<const Eigen::VectorXd> a,
               Eigen::Ref<const Eigen::VectorXd> b);

// Mean similarity over the full cross product. When the two spans are the
// same set this averages all |R|^2 ordered pairs including self-pairs.
double mean_group_sim(std::span<const Eigen::VectorXd> r1,
                      std::span<const Eigen::VectorXd> r2);

// Within-group mean similarity. Self-pairs are averaged in by default,
// following the double sum over R x R; the flag drops the diagonal for
// sensitivity analysis (requires |R| >= 2 then).
double mean_within_sim(std::span<const Eigen::VectorXd> group,
                       bool include_self_pairs = true);

// Separation index: mean within-group similarity minus between-group
// similarity, 0.5*(sim(R1,R1) + sim(R2,R2)) - sim(R1,R2).
double delta_cos(std::span<const Eigen::VectorXd> group1,
                 std::span<const Eigen::VectorXd> group2,
                 bool include_self_pairs = true);

struct SeparationResult {
  std::string patient;
  std::string test_id;
  double delta_cos = 0;
  int n_slices_group1 = 0;
  int n_slices_group2 = 0;
};

// Per-class patient-level vectors live at index RoiClass-1 in the 6x6 grid.
struct SimilarityMatrixResult {
  Eigen::Matrix<double, 6, 6> values;  // NaN where no patient has the pair
  Eigen::Matrix<int, 6, 6> counts;     // patients contributing per cell
};

SimilarityMatrixResult group_similarity_matrix(
    const std::map<std::string, std::map<RoiClass, Eigen::VectorXd>>&
        patients);

struct SeparationTestResult {
  double median_delta = 0;
  double wilcoxon_p = 1;
  int n = 0;
};

// Median separation index plus one-sample Wilcoxon signed-rank p against 0.
SeparationTestResult separation_test(std::span<const SeparationResult> results,
                                     int wilcoxon_exact_max = 20);

}  // namespace bitemp::sim
