#pragma once

#include <cstdint>

#include <Eigen/Core>

#include "bitemp/types.hpp"

namespace bitemp::tsne {

struct TsneConfig {
  double perplexity = 30.0;
  int iterations = 1000;
  double early_exaggeration = 4.0;
  int exaggeration_iters = 100;
  double learning_rate = 200.0;
  double initial_momentum = 0.5;
  double final_momentum = 0.8;
  int momentum_switch_iter = 250;
  std::uint64_t seed = 0;
  bool standardize = true;  // per-dimension zero mean, unit variance
};

// Exact pairwise squared Euclidean distances, with a deterministic
// 1e-10-scale jitter on exactly-duplicate pairs so the sigma search cannot
// diverge.
Eigen::MatrixXd pairwise_sq_dists(const Eigen::MatrixXd& x);

// Per-point sigma such that the conditional distribution's perplexity
// matches the target within 1e-5 (binary search on precision, at most 50
// iterations per point).
Eigen::VectorXd calibrate_sigmas(const Eigen::MatrixXd& sq_dists,
                                 double perplexity);

struct TsneDiagnostics {
  double kl_initial = 0;
  double kl_final = 0;
};

// Exact t-SNE: early exaggeration, momentum-switched gradient descent,
// centered each iteration. Deterministic for a fixed seed. Throws
// NumericalFailure (naming the iteration) on a non-finite gradient,
// ConfigError when N < 10 or 3*perplexity >= N.
Eigen::MatrixXd run_tsne(const Eigen::MatrixXd& x, const TsneConfig& config,
                         TsneDiagnostics* diagnostics = nullptr);

}  // namespace bitemp::tsne
