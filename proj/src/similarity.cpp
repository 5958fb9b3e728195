#include "bitemp/similarity.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "bitemp/stats.hpp"

namespace bitemp::sim {

namespace {

// Kahan-compensated accumulator: deterministic means independent of any
// future parallel splitting of the pair loops.
class CompensatedSum {
public:
  void add(double v) {
    const double y = v - compensation_;
    const double t = sum_ + y;
    compensation_ = (t - sum_) - y;
    sum_ = t;
  }
  double value() const { return sum_; }

private:
  double sum_ = 0;
  double compensation_ = 0;
};

}  // namespace

double cos_sim(Eigen::Ref<const Eigen::VectorXd> a,
               Eigen::Ref<const Eigen::VectorXd> b) {
  if (a.size() != b.size()) {
    throw Error(ErrorCode::InvalidData, "cos_sim: dimension mismatch");
  }
  const double qa = a.squaredNorm();
  const double qb = b.squaredNorm();
  if (qa == 0 || qb == 0) {
    throw Error(ErrorCode::ZeroVector, "cos_sim: zero vector");
  }
  return std::abs(a.dot(b)) / std::sqrt(qa * qb);
}

double mean_group_sim(std::span<const Eigen::VectorXd> r1,
                      std::span<const Eigen::VectorXd> r2) {
  if (r1.empty() || r2.empty()) {
    throw Error(ErrorCode::EmptyGroup, "mean_group_sim: empty set");
  }
  CompensatedSum sum;
  for (const auto& a : r1) {
    for (const auto& b : r2) {
      sum.add(cos_sim(a, b));
    }
  }
  return sum.value() /
         (static_cast<double>(r1.size()) * static_cast<double>(r2.size()));
}

double mean_within_sim(std::span<const Eigen::VectorXd> group,
                       bool include_self_pairs) {
  if (include_self_pairs) return mean_group_sim(group, group);
  if (group.size() < 2) {
    throw Error(ErrorCode::EmptyGroup,
                "within-group similarity without self-pairs needs >= 2 vectors");
  }
  CompensatedSum sum;
  for (std::size_t i = 0; i < group.size(); ++i) {
    for (std::size_t j = 0; j < group.size(); ++j) {
      if (i == j) continue;
      sum.add(cos_sim(group[i], group[j]));
    }
  }
  const double n = static_cast<double>(group.size());
  return sum.value() / (n * (n - 1.0));
}

double delta_cos(std::span<const Eigen::VectorXd> group1,
                 std::span<const Eigen::VectorXd> group2,
                 bool include_self_pairs) {
  const double within1 = mean_within_sim(group1, include_self_pairs);
  const double within2 = mean_within_sim(group2, include_self_pairs);
  const double between = mean_group_sim(group1, group2);
  return 0.5 * (within1 + within2) - between;
}

SimilarityMatrixResult group_similarity_matrix(
    const std::map<std::string, std::map<RoiClass, Eigen::VectorXd>>&
        patients) {
  SimilarityMatrixResult out;
  out.counts.setZero();

  Eigen::Matrix<double, 6, 6> sums = Eigen::Matrix<double, 6, 6>::Zero();
  for (const auto& [patient, classes] : patients) {
    for (const auto& [cls_a, psi_a] : classes) {
      for (const auto& [cls_b, psi_b] : classes) {
        const int ia = static_cast<int>(cls_a) - 1;
        const int ib = static_cast<int>(cls_b) - 1;
        sums(ia, ib) += cos_sim(psi_a, psi_b);
        out.counts(ia, ib) += 1;
      }
    }
  }

  for (int i = 0; i < 6; ++i) {
    for (int j = 0; j < 6; ++j) {
      out.values(i, j) = out.counts(i, j) > 0
                             ? sums(i, j) / out.counts(i, j)
                             : std::numeric_limits<double>::quiet_NaN();
    }
  }
  return out;
}

SeparationTestResult separation_test(std::span<const SeparationResult> results,
                                     int wilcoxon_exact_max) {
  if (results.empty()) {
    throw Error(ErrorCode::EmptySample, "separation_test: no results");
  }
  Eigen::VectorXd deltas(static_cast<Eigen::Index>(results.size()));
  for (std::size_t i = 0; i < results.size(); ++i) {
    deltas[static_cast<Eigen::Index>(i)] = results[i].delta_cos;
  }

  std::vector<double> sorted(deltas.data(), deltas.data() + deltas.size());
  std::sort(sorted.begin(), sorted.end());
  const std::size_t n = sorted.size();
  const double median = (n % 2 == 1)
                            ? sorted[n / 2]
                            : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);

  const auto wilcoxon =
      stats::wilcoxon_signed_rank(deltas, 0.0, wilcoxon_exact_max);
  return {median, wilcoxon.p, static_cast<int>(n)};
}

}  // namespace bitemp::sim
