#pragma once

#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "bitemp/types.hpp"

namespace bitemp::stats {

// Standard normal CDF and quantile (Wichura's PPND16 rational approximation).
double normal_cdf(double z);
double normal_quantile(double p);

// ---------------------------------------------------------------------------
// Shapiro-Wilk normality test, Royston's AS R94 approximation. Valid for
// 3 <= n <= 5000; p uses the asin form for n = 3, a gamma-type transform for
// 4 <= n <= 11 and the log-normal transform for n >= 12.
// ---------------------------------------------------------------------------

struct ShapiroResult {
  double w = 0;
  double p = 0;
};

ShapiroResult shapiro_wilk(Eigen::Ref<const Eigen::VectorXd> sample);

// ---------------------------------------------------------------------------
// Mann-Whitney U, two-sided. U counts pairs with x above y plus half ties.
// Exact p by enumeration of the rank distribution when max(n, m) <=
// exact_max and there are no ties, otherwise normal approximation with
// tie-corrected variance and 0.5 continuity correction.
// ---------------------------------------------------------------------------

struct MannWhitneyResult {
  double u = 0;
  double p = 1;
  bool exact = false;
};

MannWhitneyResult mann_whitney_u(Eigen::Ref<const Eigen::VectorXd> x,
                                 Eigen::Ref<const Eigen::VectorXd> y,
                                 int exact_max = 10);

// Internals exposed for the exact-vs-approximate consistency checks.
double mann_whitney_exact_p(double u, int n, int m);
double mann_whitney_normal_p(double u, Eigen::Ref<const Eigen::VectorXd> x,
                             Eigen::Ref<const Eigen::VectorXd> y);

std::vector<double> bonferroni(std::span<const double> p_values,
                               int family_size);

// ---------------------------------------------------------------------------
// Cliff's delta with the standard interpretation bands.
// ---------------------------------------------------------------------------

enum class EffectBand { Negligible, Small, Medium, Large };

const char* effect_band_name(EffectBand band);
EffectBand classify_effect(double delta);

struct CliffsDeltaResult {
  double delta = 0;
  EffectBand band = EffectBand::Negligible;
};

CliffsDeltaResult cliffs_delta(Eigen::Ref<const Eigen::VectorXd> x,
                               Eigen::Ref<const Eigen::VectorXd> y);

// ---------------------------------------------------------------------------
// One-sample Wilcoxon signed-rank against mu0. Values equal to mu0 are
// dropped (classic handling); Pratt zero handling is available behind the
// flag and always uses the normal approximation. Exact p enumerates the
// 2^n sign patterns when n' <= exact_max and the absolute differences are
// tie-free.
// ---------------------------------------------------------------------------

enum class ZeroHandling { Drop, Pratt };

struct WilcoxonResult {
  double w = 0;  // sum of positive ranks
  double p = 1;
  bool exact = false;
  int n_used = 0;  // differences remaining after zero handling
};

WilcoxonResult wilcoxon_signed_rank(Eigen::Ref<const Eigen::VectorXd> x,
                                    double mu0 = 0.0, int exact_max = 20,
                                    ZeroHandling zeros = ZeroHandling::Drop);

double wilcoxon_exact_p(double w, int n);

// ---------------------------------------------------------------------------
// One ROI-pair/feature comparison row.
// ---------------------------------------------------------------------------

struct ComparisonResult {
  std::string feature;
  double statistic = 0;
  double p_raw = 1;
  double p_corrected = 1;
  double cliffs_delta = 0;
  EffectBand band = EffectBand::Negligible;
  int n1 = 0, n2 = 0;
};

ComparisonResult compare_groups(const std::string& feature,
                                Eigen::Ref<const Eigen::VectorXd> x,
                                Eigen::Ref<const Eigen::VectorXd> y,
                                int family_size, int exact_max = 10);

}  // namespace bitemp::stats
