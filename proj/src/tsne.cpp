#include "bitemp/tsne.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "bitemp/rng.hpp"

namespace bitemp::tsne {

Eigen::MatrixXd pairwise_sq_dists(const Eigen::MatrixXd& x) {
  const Eigen::Index n = x.rows();
  const Eigen::VectorXd sq = x.rowwise().squaredNorm();
  Eigen::MatrixXd d2 = sq.replicate(1, n) + sq.transpose().replicate(n, 1) -
                       2.0 * (x * x.transpose());
  d2 = d2.cwiseMax(0.0);
  for (Eigen::Index i = 0; i < n; ++i) d2(i, i) = 0.0;
  // Deterministic jitter for duplicated rows.
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      if (d2(i, j) == 0.0) {
        const double jitter = 1e-10 * static_cast<double>(1 + i);
        d2(i, j) = jitter;
        d2(j, i) = jitter;
      }
    }
  }
  return d2;
}

namespace {

// Conditional distribution row for precision beta = 1/(2 sigma^2); returns
// achieved perplexity and fills the row (diagonal stays 0).
double row_perplexity(const Eigen::MatrixXd& d2, Eigen::Index i, double beta,
                      Eigen::VectorXd& p_row) {
  const Eigen::Index n = d2.rows();
  double sum = 0;
  for (Eigen::Index j = 0; j < n; ++j) {
    const double v = (j == i) ? 0.0 : std::exp(-beta * d2(i, j));
    p_row[j] = v;
    sum += v;
  }
  if (sum <= 0 || !std::isfinite(sum)) return 0.0;
  double entropy_nats = 0;  // H = -sum p log p with p = p_row / sum
  for (Eigen::Index j = 0; j < n; ++j) {
    if (p_row[j] > 0) {
      const double p = p_row[j] / sum;
      entropy_nats -= p * std::log(p);
    }
  }
  p_row /= sum;
  return std::exp(entropy_nats);
}

}  // namespace

Eigen::VectorXd calibrate_sigmas(const Eigen::MatrixXd& sq_dists,
                                 double perplexity) {
  const Eigen::Index n = sq_dists.rows();
  if (3.0 * perplexity >= static_cast<double>(n)) {
    throw Error(ErrorCode::ConfigError,
                "perplexity too large: need 3*perplexity < N");
  }

  Eigen::VectorXd sigmas(n);
  Eigen::VectorXd row(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    double beta = 1.0;
    double beta_lo = 0.0;
    double beta_hi = std::numeric_limits<double>::infinity();
    double best_beta = beta;
    double best_err = std::numeric_limits<double>::infinity();
    for (int it = 0; it < 50; ++it) {
      const double perp = row_perplexity(sq_dists, i, beta, row);
      const double err = std::abs(perp - perplexity);
      if (err < best_err) {
        best_err = err;
        best_beta = beta;
      }
      if (err < 1e-5) break;
      if (perp > perplexity) {
        // Distribution too spread: sharpen by raising beta.
        beta_lo = beta;
        beta = std::isfinite(beta_hi) ? 0.5 * (beta_lo + beta_hi) : beta * 2.0;
      } else {
        beta_hi = beta;
        beta = 0.5 * (beta_lo + beta_hi);
      }
    }
    sigmas[i] = std::sqrt(1.0 / (2.0 * best_beta));
  }
  return sigmas;
}

namespace {

Eigen::MatrixXd joint_probabilities(const Eigen::MatrixXd& d2,
                                    const Eigen::VectorXd& sigmas) {
  const Eigen::Index n = d2.rows();
  Eigen::MatrixXd conditional(n, n);
  Eigen::VectorXd row(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double beta = 1.0 / (2.0 * sigmas[i] * sigmas[i]);
    row_perplexity(d2, i, beta, row);
    conditional.row(i) = row.transpose();
    conditional(i, i) = 0.0;
  }
  Eigen::MatrixXd p = (conditional + conditional.transpose()) /
                      (2.0 * static_cast<double>(n));
  return p;
}

double kl_divergence(const Eigen::MatrixXd& p, const Eigen::MatrixXd& w,
                     double w_sum) {
  // Q = W / w_sum, floored to keep the log finite.
  constexpr double kFloor = 1e-12;
  double kl = 0;
  for (Eigen::Index i = 0; i < p.rows(); ++i) {
    for (Eigen::Index j = 0; j < p.cols(); ++j) {
      if (i == j) continue;
      const double pij = p(i, j);
      if (pij > 0) {
        const double qij = std::max(w(i, j) / w_sum, kFloor);
        kl += pij * std::log(pij / qij);
      }
    }
  }
  return kl;
}

}  // namespace

Eigen::MatrixXd run_tsne(const Eigen::MatrixXd& x, const TsneConfig& config,
                         TsneDiagnostics* diagnostics) {
  const Eigen::Index n = x.rows();
  if (n < 10) {
    throw Error(ErrorCode::ConfigError, "t-SNE needs at least 10 points");
  }
  if (!x.allFinite()) {
    throw Error(ErrorCode::InvalidData, "t-SNE input must be finite");
  }
  if (config.perplexity < 2.0) {
    throw Error(ErrorCode::ConfigError, "perplexity must be >= 2");
  }
  if (config.iterations < 1) {
    throw Error(ErrorCode::ConfigError, "iterations must be >= 1");
  }

  Eigen::MatrixXd features = x;
  if (config.standardize) {
    const Eigen::RowVectorXd mean = features.colwise().mean();
    features.rowwise() -= mean;
    for (Eigen::Index c = 0; c < features.cols(); ++c) {
      const double sd =
          std::sqrt(features.col(c).squaredNorm() / static_cast<double>(n));
      if (sd > 0) features.col(c) /= sd;
    }
  }

  const Eigen::MatrixXd d2 = pairwise_sq_dists(features);
  const Eigen::VectorXd sigmas = calibrate_sigmas(d2, config.perplexity);
  const Eigen::MatrixXd p = joint_probabilities(d2, sigmas);

  // Seeded small gaussian start.
  Eigen::MatrixXd y(n, 2);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (int c = 0; c < 2; ++c) {
      y(i, c) = 1e-4 * rng::counter_gauss(config.seed,
                                          static_cast<std::uint64_t>(i) * 2 + c);
    }
  }

  Eigen::MatrixXd velocity = Eigen::MatrixXd::Zero(n, 2);

  Eigen::MatrixXd w(n, n), m(n, n);
  auto fill_kernel = [&](const Eigen::MatrixXd& coords) {
    // w_ij = 1 / (1 + |yi - yj|^2)
    const Eigen::VectorXd sq = coords.rowwise().squaredNorm();
    w = sq.replicate(1, n) + sq.transpose().replicate(n, 1) -
        2.0 * (coords * coords.transpose());
    w = (1.0 + w.cwiseMax(0.0).array()).inverse().matrix();
    for (Eigen::Index i = 0; i < n; ++i) w(i, i) = 0.0;
    return w.sum();
  };

  double initial_kl = 0;
  for (int iter = 0; iter < config.iterations; ++iter) {
    const double w_sum = fill_kernel(y);
    if (iter == 0) initial_kl = kl_divergence(p, w, w_sum);

    const double exaggeration =
        (iter < config.exaggeration_iters) ? config.early_exaggeration : 1.0;

    // gradient_i = 4 * sum_j (exag*P - Q)_ij * w_ij * (y_i - y_j)
    m = (exaggeration * p - w / w_sum).cwiseProduct(w);
    const Eigen::VectorXd row_sums = m.rowwise().sum();
    Eigen::MatrixXd grad =
        4.0 * (row_sums.asDiagonal() * y - m * y);
    if (!grad.allFinite()) {
      throw Error(ErrorCode::NumericalFailure,
                  "non-finite t-SNE gradient at iteration " +
                      std::to_string(iter));
    }

    const double momentum = (iter < config.momentum_switch_iter)
                                ? config.initial_momentum
                                : config.final_momentum;
    velocity = momentum * velocity - config.learning_rate * grad;
    y += velocity;
    y.rowwise() -= y.colwise().mean();
  }

  if (diagnostics) {
    const double w_sum = fill_kernel(y);
    diagnostics->kl_initial = initial_kl;
    diagnostics->kl_final = kl_divergence(p, w, w_sum);
  }
  return y;
}

}  // namespace bitemp::tsne
