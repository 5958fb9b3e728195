#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "bitemp/rng.hpp"
#include "bitemp/tsne.hpp"

using namespace bitemp;
using namespace bitemp::tsne;

namespace {

// Two well-separated gaussian blobs; returns features and labels.
Eigen::MatrixXd two_blobs(std::uint64_t seed, int per_blob, int dim,
                          std::vector<int>& labels) {
  rng::Stream rng(seed);
  Eigen::MatrixXd x(2 * per_blob, dim);
  labels.assign(2 * per_blob, 0);
  for (int i = 0; i < 2 * per_blob; ++i) {
    const int blob = i < per_blob ? 0 : 1;
    labels[i] = blob;
    for (int c = 0; c < dim; ++c) {
      x(i, c) = rng.gauss() + (blob == 0 ? 0.0 : 12.0);
    }
  }
  return x;
}

TsneConfig fast_config(std::uint64_t seed = 1) {
  TsneConfig cfg;
  cfg.perplexity = 10;
  cfg.iterations = 350;
  cfg.learning_rate = 50;  // sized for the small-N test sets
  cfg.seed = seed;
  return cfg;
}

double entropy_bits(const Eigen::VectorXd& p) {
  double h = 0;
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    if (p[i] > 0) h -= p[i] * std::log2(p[i]);
  }
  return h;
}

}  // namespace

TEST_CASE("perplexity precondition: 3*perplexity must stay below N") {
  Eigen::MatrixXd d2 = Eigen::MatrixXd::Ones(3, 3);
  d2.diagonal().setZero();
  try {
    calibrate_sigmas(d2, 2.0);
    FAIL("expected ConfigError");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::ConfigError);
  }
}

TEST_CASE("equal pairwise distances give equal sigmas") {
  const int n = 16;
  Eigen::MatrixXd d2 = Eigen::MatrixXd::Ones(n, n) * 4.0;
  d2.diagonal().setZero();
  const Eigen::VectorXd sigmas = calibrate_sigmas(d2, 5.0);
  for (int i = 1; i < n; ++i) {
    CHECK(sigmas[i] == doctest::Approx(sigmas[0]).epsilon(1e-12));
  }
}

TEST_CASE("calibration reaches the target perplexity within 1e-4 per point") {
  rng::Stream rng(33);
  Eigen::MatrixXd x(50, 10);
  for (int i = 0; i < 50; ++i)
    for (int c = 0; c < 10; ++c) x(i, c) = rng.gauss();
  const Eigen::MatrixXd d2 = pairwise_sq_dists(x);
  const double target = 12.0;
  const Eigen::VectorXd sigmas = calibrate_sigmas(d2, target);

  // Recompute the conditional entropy from the returned sigmas.
  for (int i = 0; i < 50; ++i) {
    const double beta = 1.0 / (2.0 * sigmas[i] * sigmas[i]);
    Eigen::VectorXd p(50);
    for (int j = 0; j < 50; ++j) {
      p[j] = (i == j) ? 0.0 : std::exp(-beta * d2(i, j));
    }
    p /= p.sum();
    const double achieved = std::pow(2.0, entropy_bits(p));
    CHECK(std::abs(achieved - target) < 1e-4);
  }
}

TEST_CASE("fixed seed is bit-identical across runs") {
  std::vector<int> labels;
  const Eigen::MatrixXd x = two_blobs(5, 20, 8, labels);
  const Eigen::MatrixXd a = run_tsne(x, fast_config(77));
  const Eigen::MatrixXd b = run_tsne(x, fast_config(77));
  CHECK(a == b);

  const Eigen::MatrixXd c = run_tsne(x, fast_config(78));
  CHECK(a != c);
}

TEST_CASE("KL divergence decreases from initialization to the final layout") {
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    std::vector<int> labels;
    const Eigen::MatrixXd x = two_blobs(100 + seed, 20, 6, labels);
    TsneDiagnostics diag;
    run_tsne(x, fast_config(seed), &diag);
    CHECK(diag.kl_final < diag.kl_initial);
  }
}

TEST_CASE("two separated blobs stay 1-NN separable in 2D (>= 0.9)") {
  std::vector<int> labels;
  const Eigen::MatrixXd x = two_blobs(7, 30, 10, labels);
  const Eigen::MatrixXd y = run_tsne(x, fast_config(3));

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
  CHECK(static_cast<double>(correct) / n >= 0.9);
}

TEST_CASE("duplicated rows embed into the closest 5% of pairwise distances") {
  std::vector<int> labels;
  Eigen::MatrixXd x = two_blobs(11, 20, 6, labels);
  x.row(7) = x.row(3);   // duplicate pair (3, 7)
  x.row(25) = x.row(31);  // duplicate pair (25, 31)
  const Eigen::MatrixXd y = run_tsne(x, fast_config(9));

  const int n = static_cast<int>(y.rows());
  std::vector<double> dists;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      dists.push_back((y.row(i) - y.row(j)).norm());
  std::sort(dists.begin(), dists.end());
  const double cutoff =
      dists[static_cast<std::size_t>(0.05 * (dists.size() - 1))];

  CHECK((y.row(3) - y.row(7)).norm() <= cutoff);
  CHECK((y.row(25) - y.row(31)).norm() <= cutoff);
}

TEST_CASE("output centroid sits at the origin within 1e-6") {
  std::vector<int> labels;
  const Eigen::MatrixXd x = two_blobs(13, 20, 5, labels);
  const Eigen::MatrixXd y = run_tsne(x, fast_config(2));
  const Eigen::RowVector2d centroid = y.colwise().mean();
  CHECK(std::abs(centroid[0]) < 1e-6);
  CHECK(std::abs(centroid[1]) < 1e-6);
}

TEST_CASE("joint P is symmetric, sums to 1, zero diagonal") {
  // Reconstructed through the public pieces: calibrate then symmetrize the
  // conditionals the same way run_tsne does.
  rng::Stream rng(21);
  const int n = 30;
  Eigen::MatrixXd x(n, 4);
  for (int i = 0; i < n; ++i)
    for (int c = 0; c < 4; ++c) x(i, c) = rng.gauss();
  const Eigen::MatrixXd d2 = pairwise_sq_dists(x);
  const Eigen::VectorXd sigmas = calibrate_sigmas(d2, 8.0);

  Eigen::MatrixXd cond(n, n);
  for (int i = 0; i < n; ++i) {
    const double beta = 1.0 / (2.0 * sigmas[i] * sigmas[i]);
    double sum = 0;
    for (int j = 0; j < n; ++j) {
      cond(i, j) = (i == j) ? 0.0 : std::exp(-beta * d2(i, j));
      sum += cond(i, j);
    }
    cond.row(i) /= sum;
  }
  const Eigen::MatrixXd p = (cond + cond.transpose()) / (2.0 * n);
  CHECK(std::abs(p.sum() - 1.0) < 1e-9);
  CHECK((p - p.transpose()).cwiseAbs().maxCoeff() < 1e-15);
  for (int i = 0; i < n; ++i) CHECK(p(i, i) == 0.0);
}

TEST_CASE("preconditions: tiny N and non-finite input are rejected") {
  Eigen::MatrixXd x = Eigen::MatrixXd::Random(5, 3);
  CHECK_THROWS_AS(run_tsne(x, fast_config()), Error);

  Eigen::MatrixXd bad = Eigen::MatrixXd::Random(40, 3);
  bad(2, 1) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(run_tsne(bad, fast_config()), Error);
}
