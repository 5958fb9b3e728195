#include "bitemp/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

namespace bitemp::stats {

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

// Wichura (1988), algorithm AS 241, PPND16.
double normal_quantile(double p) {
  if (!(p > 0.0) || !(p < 1.0)) {
    throw Error(ErrorCode::OutOfRange, "normal_quantile needs p in (0,1)");
  }
  const double q = p - 0.5;
  double r;
  if (std::abs(q) <= 0.425) {
    r = 0.180625 - q * q;
    const double num =
        q * (((((((2.5090809287301226727e3 * r + 3.3430575583588128105e4) * r +
                  6.7265770927008700853e4) * r + 4.5921953931549871457e4) * r +
                1.3731693765509461125e4) * r + 1.9715909503065514427e3) * r +
              1.3314166789178437745e2) * r + 3.3871328727963666080e0);
    const double den =
        (((((((5.2264952788528545610e3 * r + 2.8729085735721942674e4) * r +
              3.9307895800092710610e4) * r + 2.1213794301586595867e4) * r +
            5.3941960214247511077e3) * r + 6.8718700749205790830e2) * r +
          4.2313330701600911252e1) * r + 1.0);
    return num / den;
  }
  r = (q < 0) ? p : 1.0 - p;
  r = std::sqrt(-std::log(r));
  double value;
  if (r <= 5.0) {
    r -= 1.6;
    const double num =
        (((((((7.74545014278341407640e-4 * r + 2.27238449892691845833e-2) * r +
              2.41780725177450611770e-1) * r + 1.27045825245236838258e0) * r +
            3.64784832476320460504e0) * r + 5.76949722146069140550e0) * r +
          4.63033784615654529590e0) * r + 1.42343711074968357734e0);
    const double den =
        (((((((1.05075007164441684324e-9 * r + 5.47593808499534494600e-4) * r +
              1.51986665636164571966e-2) * r + 1.48103976427480074590e-1) * r +
            6.89767334985100004550e-1) * r + 1.67638483018380384940e0) * r +
          2.05319162663775882187e0) * r + 1.0);
    value = num / den;
  } else {
    r -= 5.0;
    const double num =
        (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r +
              1.24266094738807843860e-3) * r + 2.65321895265761230930e-2) * r +
            2.96560571828504891230e-1) * r + 1.78482653991729133580e0) * r +
          5.46378491116411436990e0) * r + 6.65790464350110377720e0);
    const double den =
        (((((((2.04426310338993978564e-15 * r + 1.42151175831644588870e-7) * r +
              1.84631831751005468180e-6) * r + 7.86869131145613259100e-4) * r +
            1.48753612908506148525e-2) * r + 1.36929880922735805310e-1) * r +
          5.99832206555887937690e-1) * r + 1.0);
    value = num / den;
  }
  return (q < 0) ? -value : value;
}

// ---------------------------------------------------------------------------
// Shapiro-Wilk (AS R94)
// ---------------------------------------------------------------------------

namespace {

double poly(std::span<const double> c, double x) {
  double v = 0;
  for (std::size_t i = c.size(); i-- > 0;) v = v * x + c[i];
  return v;
}

}  // namespace

ShapiroResult shapiro_wilk(Eigen::Ref<const Eigen::VectorXd> sample) {
  const int n = static_cast<int>(sample.size());
  if (n < 3) throw Error(ErrorCode::TooSmall, "Shapiro-Wilk needs n >= 3");
  if (n > 5000) {
    throw Error(ErrorCode::OutOfRange, "Shapiro-Wilk valid up to n = 5000");
  }

  std::vector<double> x(sample.data(), sample.data() + n);
  std::sort(x.begin(), x.end());
  if (x.front() == x.back()) {
    throw Error(ErrorCode::DegenerateSample, "constant sample");
  }

  // Expected normal order statistics (Blom approximation) and the Royston
  // polynomial-corrected weights.
  std::vector<double> m(n);
  double ssq_m = 0;
  for (int i = 0; i < n; ++i) {
    m[i] = normal_quantile((i + 1 - 0.375) / (n + 0.25));
    ssq_m += m[i] * m[i];
  }

  std::vector<double> a(n);
  if (n == 3) {
    a[0] = -std::numbers::sqrt2 / 2.0;
    a[1] = 0.0;
    a[2] = -a[0];
  } else {
    static constexpr double c1[6] = {0.0,       0.221157, -0.147981,
                                     -2.071190, 4.434685, -2.706056};
    static constexpr double c2[6] = {0.0,       0.042981, -0.293762,
                                     -1.752461, 5.682633, -3.582633};
    const double rsn = 1.0 / std::sqrt(static_cast<double>(n));
    const double norm = 1.0 / std::sqrt(ssq_m);
    a[n - 1] = m[n - 1] * norm + poly(c1, rsn);
    double phi;
    int fixed;
    if (n > 5) {
      a[n - 2] = m[n - 2] * norm + poly(c2, rsn);
      fixed = 2;
      phi = (ssq_m - 2 * m[n - 1] * m[n - 1] - 2 * m[n - 2] * m[n - 2]) /
            (1 - 2 * a[n - 1] * a[n - 1] - 2 * a[n - 2] * a[n - 2]);
    } else {
      fixed = 1;
      phi = (ssq_m - 2 * m[n - 1] * m[n - 1]) /
            (1 - 2 * a[n - 1] * a[n - 1]);
    }
    const double inv_sqrt_phi = 1.0 / std::sqrt(phi);
    for (int i = fixed; i < n - fixed; ++i) a[i] = m[i] * inv_sqrt_phi;
    a[0] = -a[n - 1];
    if (fixed == 2) a[1] = -a[n - 2];
  }

  const double mean = std::accumulate(x.begin(), x.end(), 0.0) / n;
  double numerator = 0, sse = 0;
  for (int i = 0; i < n; ++i) {
    numerator += a[i] * x[i];
    sse += (x[i] - mean) * (x[i] - mean);
  }
  double w = numerator * numerator / sse;
  w = std::min(1.0, w);

  double p;
  if (n == 3) {
    constexpr double pi6 = 1.90985931710274;   // 6/pi
    constexpr double stqr = 1.04719755119660;  // asin(sqrt(3/4))
    p = pi6 * (std::asin(std::sqrt(w)) - stqr);
    p = std::clamp(p, 0.0, 1.0);
  } else if (n <= 11) {
    const double gamma = 0.459 * n - 2.273;
    const double y = std::log(1.0 - w);
    if (y >= gamma) {
      p = 1e-99;
    } else {
      static constexpr double c3[4] = {0.5440, -0.39978, 0.025054, -6.714e-4};
      static constexpr double c4[4] = {1.3822, -0.77857, 0.062767, -2.0322e-3};
      const double z =
          (-std::log(gamma - y) - poly(c3, n)) / std::exp(poly(c4, n));
      p = 1.0 - normal_cdf(z);
    }
  } else {
    static constexpr double c5[4] = {-1.5861, -0.31082, -0.083751, 3.8915e-3};
    static constexpr double c6[3] = {-0.4803, -0.082676, 3.0302e-3};
    const double ln_n = std::log(static_cast<double>(n));
    const double z = (std::log(1.0 - w) - poly(c5, ln_n)) /
                     std::exp(poly(c6, ln_n));
    p = 1.0 - normal_cdf(z);
  }
  return {w, p};
}

// ---------------------------------------------------------------------------
// Mann-Whitney U
// ---------------------------------------------------------------------------

namespace {

// Mid-ranks of the pooled sample; also reports tie group sizes.
std::vector<double> midranks(std::vector<double>& pooled,
                             std::vector<std::size_t>& order,
                             std::vector<double>& tie_sizes) {
  const std::size_t n = pooled.size();
  order.resize(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return pooled[a] < pooled[b]; });
  std::vector<double> ranks(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j < n && pooled[order[j]] == pooled[order[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j - 1) + 1.0;
    for (std::size_t k = i; k < j; ++k) ranks[order[k]] = r;
    if (j - i > 1) tie_sizes.push_back(static_cast<double>(j - i));
    i = j;
  }
  return ranks;
}

double two_sided_from_counts(double count_le, double count_ge, double total) {
  const double tail = std::min(count_le, count_ge) / total;
  return std::min(1.0, 2.0 * tail);
}

}  // namespace

double mann_whitney_exact_p(double u, int n, int m) {
  // Tie-free null distribution over u = 0..n*m. N(u; i, j) counts the
  // arrangements of i x's and j y's attaining U = u; conditioning on whether
  // the largest pooled value is an x or a y gives
  //   N(u; i, j) = N(u - j; i - 1, j) + N(u; i, j - 1).
  const int umax = n * m;
  std::vector<std::vector<double>> g(
      n + 1, std::vector<double>(umax + 1, 0.0));
  for (int i = 0; i <= n; ++i) g[i][0] = 1.0;  // j = 0: only U = 0
  for (int j = 1; j <= m; ++j) {
    std::vector<std::vector<double>> next(
        n + 1, std::vector<double>(umax + 1, 0.0));
    next[0][0] = 1.0;
    for (int i = 1; i <= n; ++i) {
      for (int v = 0; v <= umax; ++v) {
        double ways = g[i][v];
        if (v >= j) ways += next[i - 1][v - j];
        next[i][v] = ways;
      }
    }
    g = std::move(next);
  }

  const int ui = static_cast<int>(std::llround(u));
  double le = 0, ge = 0, total = 0;
  for (int v = 0; v <= umax; ++v) {
    const double c = g[n][v];
    total += c;
    if (v <= ui) le += c;
    if (v >= ui) ge += c;
  }
  return two_sided_from_counts(le, ge, total);
}

double mann_whitney_normal_p(double u, Eigen::Ref<const Eigen::VectorXd> x,
                             Eigen::Ref<const Eigen::VectorXd> y) {
  const int n = static_cast<int>(x.size());
  const int m = static_cast<int>(y.size());
  const double nn = n, mm = m, total = nn + mm;

  std::vector<double> pooled(x.data(), x.data() + n);
  pooled.insert(pooled.end(), y.data(), y.data() + m);
  std::vector<std::size_t> order;
  std::vector<double> ties;
  midranks(pooled, order, ties);

  double tie_term = 0;
  for (double t : ties) tie_term += t * t * t - t;
  const double variance =
      nn * mm / 12.0 *
      ((total + 1.0) - tie_term / (total * (total - 1.0)));
  if (variance <= 0) return 1.0;

  const double centered = u - nn * mm / 2.0;
  const double sign = (centered > 0) - (centered < 0);
  const double z = (centered - 0.5 * sign) / std::sqrt(variance);
  return std::clamp(2.0 * (1.0 - normal_cdf(std::abs(z))), 0.0, 1.0);
}

MannWhitneyResult mann_whitney_u(Eigen::Ref<const Eigen::VectorXd> x,
                                 Eigen::Ref<const Eigen::VectorXd> y,
                                 int exact_max) {
  const int n = static_cast<int>(x.size());
  const int m = static_cast<int>(y.size());
  if (n < 1 || m < 1) {
    throw Error(ErrorCode::EmptySample, "Mann-Whitney needs nonempty samples");
  }

  std::vector<double> pooled(x.data(), x.data() + n);
  pooled.insert(pooled.end(), y.data(), y.data() + m);
  std::vector<std::size_t> order;
  std::vector<double> ties;
  const std::vector<double> ranks = midranks(pooled, order, ties);

  double rank_sum_x = 0;
  for (int i = 0; i < n; ++i) rank_sum_x += ranks[i];
  const double u = rank_sum_x - static_cast<double>(n) * (n + 1) / 2.0;

  MannWhitneyResult result;
  result.u = u;
  if (ties.empty() && std::max(n, m) <= exact_max) {
    result.exact = true;
    result.p = mann_whitney_exact_p(u, n, m);
  } else {
    result.exact = false;
    result.p = mann_whitney_normal_p(u, x, y);
  }
  return result;
}

std::vector<double> bonferroni(std::span<const double> p_values,
                               int family_size) {
  if (family_size < 1) {
    throw Error(ErrorCode::InvalidFamily, "family size must be >= 1");
  }
  if (static_cast<std::size_t>(family_size) < p_values.size()) {
    throw Error(ErrorCode::InvalidFamily,
                "family size smaller than the number of tests");
  }
  std::vector<double> out;
  out.reserve(p_values.size());
  for (double p : p_values) {
    out.push_back(std::min(1.0, family_size * p));
  }
  return out;
}

const char* effect_band_name(EffectBand band) {
  switch (band) {
    case EffectBand::Negligible: return "negligible";
    case EffectBand::Small: return "small";
    case EffectBand::Medium: return "medium";
    case EffectBand::Large: return "large";
  }
  return "?";
}

EffectBand classify_effect(double delta) {
  const double a = std::abs(delta);
  if (a < 0.147) return EffectBand::Negligible;
  if (a < 0.33) return EffectBand::Small;
  if (a < 0.474) return EffectBand::Medium;
  return EffectBand::Large;
}

CliffsDeltaResult cliffs_delta(Eigen::Ref<const Eigen::VectorXd> x,
                               Eigen::Ref<const Eigen::VectorXd> y) {
  const int n = static_cast<int>(x.size());
  const int m = static_cast<int>(y.size());
  if (n < 1 || m < 1) {
    throw Error(ErrorCode::EmptySample, "Cliff's delta needs nonempty samples");
  }
  std::vector<double> ys(y.data(), y.data() + m);
  std::sort(ys.begin(), ys.end());

  long long greater = 0, less = 0;
  for (int i = 0; i < n; ++i) {
    const auto lo = std::lower_bound(ys.begin(), ys.end(), x[i]);
    const auto hi = std::upper_bound(ys.begin(), ys.end(), x[i]);
    greater += lo - ys.begin();          // y values strictly below x[i]
    less += ys.end() - hi;               // y values strictly above x[i]
  }
  CliffsDeltaResult result;
  result.delta = static_cast<double>(greater - less) /
                 (static_cast<double>(n) * static_cast<double>(m));
  result.band = classify_effect(result.delta);
  return result;
}

// ---------------------------------------------------------------------------
// Wilcoxon signed-rank
// ---------------------------------------------------------------------------

double wilcoxon_exact_p(double w, int n) {
  // Distribution of the positive-rank sum over all 2^n sign patterns of the
  // tie-free ranks 1..n.
  const int wmax = n * (n + 1) / 2;
  std::vector<unsigned long long> ways(wmax + 1, 0);
  ways[0] = 1;
  for (int r = 1; r <= n; ++r) {
    for (int s = wmax; s >= r; --s) ways[s] += ways[s - r];
  }
  const int wi = static_cast<int>(std::llround(w));
  double le = 0, ge = 0, total = 0;
  for (int s = 0; s <= wmax; ++s) {
    const double c = static_cast<double>(ways[s]);
    total += c;
    if (s <= wi) le += c;
    if (s >= wi) ge += c;
  }
  return two_sided_from_counts(le, ge, total);
}

WilcoxonResult wilcoxon_signed_rank(Eigen::Ref<const Eigen::VectorXd> x,
                                    double mu0, int exact_max,
                                    ZeroHandling zeros) {
  std::vector<double> diffs;
  int n_zero = 0;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double d = x[i] - mu0;
    if (d == 0) {
      ++n_zero;
      if (zeros == ZeroHandling::Pratt) diffs.push_back(0.0);
    } else {
      diffs.push_back(d);
    }
  }
  const int n_nonzero = static_cast<int>(diffs.size()) -
                        (zeros == ZeroHandling::Pratt ? n_zero : 0);
  if (n_nonzero < 1) {
    throw Error(ErrorCode::DegenerateSample,
                "all values equal mu0 in Wilcoxon signed-rank");
  }

  const int n = static_cast<int>(diffs.size());
  std::vector<double> abs_d(n);
  for (int i = 0; i < n; ++i) abs_d[i] = std::abs(diffs[i]);
  std::vector<std::size_t> order;
  std::vector<double> ties;
  const std::vector<double> ranks = midranks(abs_d, order, ties);

  double w = 0;
  for (int i = 0; i < n; ++i) {
    if (diffs[i] > 0) w += ranks[i];
  }

  WilcoxonResult result;
  result.w = w;
  result.n_used = n_nonzero;

  const bool tie_free = ties.empty();
  if (zeros == ZeroHandling::Drop && tie_free && n_nonzero <= exact_max) {
    result.exact = true;
    result.p = wilcoxon_exact_p(w, n_nonzero);
    return result;
  }

  double expected, variance;
  if (zeros == ZeroHandling::Pratt) {
    const double nn = n, zz = n_zero;
    expected = (nn * (nn + 1) - zz * (zz + 1)) / 4.0;
    variance = (nn * (nn + 1) * (2 * nn + 1) - zz * (zz + 1) * (2 * zz + 1)) /
               24.0;
  } else {
    const double nn = n_nonzero;
    expected = nn * (nn + 1) / 4.0;
    variance = nn * (nn + 1) * (2 * nn + 1) / 24.0;
  }
  double tie_term = 0;
  for (double t : ties) tie_term += t * t * t - t;
  variance -= tie_term / 48.0;
  if (variance <= 0) {
    result.p = 1.0;
    return result;
  }
  const double centered = w - expected;
  const double sign = (centered > 0) - (centered < 0);
  const double z = (centered - 0.5 * sign) / std::sqrt(variance);
  result.p = std::clamp(2.0 * (1.0 - normal_cdf(std::abs(z))), 0.0, 1.0);
  return result;
}

ComparisonResult compare_groups(const std::string& feature,
                                Eigen::Ref<const Eigen::VectorXd> x,
                                Eigen::Ref<const Eigen::VectorXd> y,
                                int family_size, int exact_max) {
  const MannWhitneyResult mw = mann_whitney_u(x, y, exact_max);
  const CliffsDeltaResult cd = cliffs_delta(x, y);
  ComparisonResult r;
  r.feature = feature;
  r.statistic = mw.u;
  r.p_raw = mw.p;
  r.p_corrected = bonferroni(std::span<const double>(&mw.p, 1), family_size)[0];
  r.cliffs_delta = cd.delta;
  r.band = cd.band;
  r.n1 = static_cast<int>(x.size());
  r.n2 = static_cast<int>(y.size());
  return r;
}

}  // namespace bitemp::stats
