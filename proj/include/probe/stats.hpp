#ifndef PROBE_STATS_HPP
#define PROBE_STATS_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "probe/error.hpp"
#include "probe/rng.hpp"
#include "probe/tree.hpp"

namespace probe {
namespace stats {

// ---------------------------------------------------------------------------
// Random spans

inline std::uint64_t span_count(int n, bool include_full = true) {
  const auto total = static_cast<std::uint64_t>(n) * static_cast<std::uint64_t>(n + 1) / 2;
  return include_full || n == 1 ? total : total - 1;
}

/// Uniform over contiguous spans of an n-token sentence. With
/// include_full = false the whole-sentence span is excluded (unless n = 1,
/// where it is the only span).
inline Span random_span(int n, Rng& rng, bool include_full = true) {
  auto k = uniform_index(rng, span_count(n, include_full));
  // Enumerate by length, then by start: length L has n - L + 1 spans.
  for (int len = 1; len <= n; ++len) {
    const auto count = static_cast<std::uint64_t>(n - len + 1);
    if (k < count) return {static_cast<int>(k), static_cast<int>(k) + len};
    k -= count;
  }
  return {0, n};
}

/// Fraction of the sampled span universe that are node spans.
inline double node_span_fraction(const ConstituencyTree& tree, bool include_full = true) {
  const int n = tree.size();
  auto spans = node_spans(tree);
  if (!include_full && n > 1) spans.erase(tree.root.span);
  return static_cast<double>(spans.size()) / static_cast<double>(span_count(n, include_full));
}

// ---------------------------------------------------------------------------
// Normal distribution helpers

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

// Acklam's rational approximation refined by one Halley step.
inline double normal_quantile(double p) {
  if (p <= 0) return -std::numeric_limits<double>::infinity();
  if (p >= 1) return std::numeric_limits<double>::infinity();
  static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                                 -2.759285104469687e+02, 1.383577518672690e+02,
                                 -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                                 -1.556989798598866e+02, 6.680131188771972e+01,
                                 -1.328068155288572e+01};
  static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                                 -2.400758277161838e+00, -2.549732539343734e+00,
                                 4.374664141464968e+00,  2.938163982698783e+00};
  static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                                 2.445134137142996e+00, 3.754408661907416e+00};
  const double lo = 0.02425, hi = 1 - lo;
  double x;
  if (p < lo) {
    const double q = std::sqrt(-2 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1);
  } else if (p <= hi) {
    const double q = p - 0.5, r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1);
  } else {
    const double q = std::sqrt(-2 * std::log(1 - p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1);
  }
  const double e = normal_cdf(x) - p;
  const double u = e * std::sqrt(2 * 3.14159265358979323846) * std::exp(x * x / 2);
  return x - u / (1 + x * u / 2);
}

// ---------------------------------------------------------------------------
// Reports

enum class Direction { greater, less };

struct StatReport {
  std::string metric;
  std::string group;
  double observed = 0;
  std::optional<double> chance_mean, chance_sd;
  double p_raw = 1;
  double p_fdr = 1;
  std::optional<double> ci_low, ci_high;
  std::size_t n_sims = 0;
  std::size_t n_resamples = 0;
  std::uint64_t seed = 0;
  std::string test;  // which procedure produced p_raw
};

// Runs fn(i) for i in [0, n) split into `chunks` contiguous blocks on
// separate threads. Callers derive every random stream from i, so results
// do not depend on the chunk count.
inline void parallel_for(std::size_t n, std::size_t chunks,
                         const std::function<void(std::size_t)>& fn) {
  chunks = std::max<std::size_t>(1, std::min(chunks, n));
  if (chunks == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> workers;
  const std::size_t per = (n + chunks - 1) / chunks;
  for (std::size_t c = 0; c < chunks; ++c) {
    const std::size_t b = c * per, e = std::min(n, b + per);
    workers.emplace_back([&fn, b, e] {
      for (std::size_t i = b; i < e; ++i) fn(i);
    });
  }
  for (auto& w : workers) w.join();
}

inline double mean(const std::vector<double>& v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

inline double sample_sd(const std::vector<double>& v) {
  if (v.size() < 2) return 0;
  const double m = mean(v);
  double ss = 0;
  for (double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

// ---------------------------------------------------------------------------
// Monte Carlo test

struct MonteCarloOptions {
  std::size_t n_sims = 1000;
  std::uint64_t seed = 0;
  Direction direction = Direction::greater;
  std::size_t chunks = 1;
};

/// One simulated value of the metric under chance. Receives a stream
/// dedicated to simulation `index`.
using Simulation = std::function<double(Rng&)>;

inline std::vector<double> simulate(const Simulation& sim, std::size_t n_sims,
                                    std::uint64_t seed, std::size_t chunks = 1) {
  std::vector<double> values(n_sims);
  parallel_for(n_sims, chunks, [&](std::size_t i) {
    Rng rng = make_rng(seed, hash_tag("monte-carlo"), i);
    values[i] = sim(rng);
  });
  return values;
}

/// One-sided Monte Carlo p: (A + 1) / (n_sims + 1), where A counts
/// simulated values at least as extreme as the observed one.
inline StatReport monte_carlo_p(double observed, const std::vector<double>& simulated,
                                Direction direction = Direction::greater) {
  StatReport r;
  r.observed = observed;
  r.n_sims = simulated.size();
  const auto extreme = std::count_if(simulated.begin(), simulated.end(), [&](double v) {
    return direction == Direction::greater ? v >= observed : v <= observed;
  });
  r.p_raw = static_cast<double>(extreme + 1) / static_cast<double>(simulated.size() + 1);
  r.p_fdr = r.p_raw;
  if (!simulated.empty()) {
    r.chance_mean = mean(simulated);
    r.chance_sd = sample_sd(simulated);
  }
  r.test = "monte_carlo_one_sided";
  return r;
}

inline StatReport monte_carlo_p(double observed, const Simulation& sim,
                                const MonteCarloOptions& opt = {}) {
  auto r = monte_carlo_p(observed, simulate(sim, opt.n_sims, opt.seed, opt.chunks),
                         opt.direction);
  r.seed = opt.seed;
  return r;
}

// ---------------------------------------------------------------------------
// Chance models

// A test sentence reduced to what chance simulations need.
struct ChanceSentence {
  int n = 0;
  SpanSet node_spans;  // spans of the unbinarized tree
};

inline ChanceSentence chance_sentence(const ConstituencyTree& tree) {
  return {tree.size(), node_spans(tree)};
}

/// Chance constituent rate: one random span per test, scored as the real
/// responses would be (a whole-sentence deletion is never a constituent).
inline Simulation random_span_rate(std::vector<ChanceSentence> tests, bool include_full = false) {
  return [tests = std::move(tests), include_full](Rng& rng) {
    std::size_t hits = 0;
    for (const auto& t : tests) {
      const auto s = random_span(t.n, rng, include_full);
      hits += s.length() < t.n && t.node_spans.count(s);
    }
    return static_cast<double>(hits) / static_cast<double>(tests.size());
  };
}

/// Mean over tests of the per-sentence chance probability that
/// random_span_rate simulates.
inline double analytic_chance_rate(const std::vector<ChanceSentence>& tests,
                                   bool include_full = false) {
  double sum = 0;
  for (const auto& t : tests) {
    auto spans = t.node_spans;
    spans.erase(Span{0, t.n});
    sum += static_cast<double>(spans.size()) / static_cast<double>(span_count(t.n, include_full));
  }
  return sum / static_cast<double>(tests.size());
}

// ---------------------------------------------------------------------------
// Bootstrap

struct BootstrapResult {
  double p = 1;
  double observed_difference = 0;
  std::size_t minority = 0;  // A, with ties counted half
};

/// Two-sided bootstrap test of mean(a) - mean(b). Paired resamples
/// participants; unpaired resamples each group separately. Zero
/// differences count half toward the minority side. The result does not
/// depend on argument order.
inline BootstrapResult bootstrap_compare(const std::vector<double>& a, const std::vector<double>& b,
                                         bool paired, std::size_t n_resamples = 10000,
                                         std::uint64_t seed = 0) {
  if (paired && a.size() != b.size())
    throw SizeMismatch("paired samples of size " + std::to_string(a.size()) + " and " +
                       std::to_string(b.size()));
  if (a.size() < 2 || b.size() < 2) throw TooFewSamples("bootstrap needs at least 2 samples");
  if (n_resamples == 0) throw TooFewSamples("n_resamples must be positive");

  // Canonical group order: swapping the arguments negates every resampled
  // difference and leaves the two-sided p unchanged.
  const bool swap = !paired && (b.size() < a.size() || (b.size() == a.size() && b < a));
  const auto& x = swap ? b : a;
  const auto& y = swap ? a : b;

  std::size_t above = 0, below = 0, zero = 0;
  Rng rng = make_rng(seed, hash_tag("bootstrap-compare"));
  for (std::size_t r = 0; r < n_resamples; ++r) {
    double diff;
    if (paired) {
      double s = 0;
      for (std::size_t i = 0; i < x.size(); ++i) {
        const auto k = static_cast<std::size_t>(uniform_index(rng, x.size()));
        s += x[k] - y[k];
      }
      diff = s / static_cast<double>(x.size());
    } else {
      double sx = 0, sy = 0;
      for (std::size_t i = 0; i < x.size(); ++i)
        sx += x[static_cast<std::size_t>(uniform_index(rng, x.size()))];
      for (std::size_t i = 0; i < y.size(); ++i)
        sy += y[static_cast<std::size_t>(uniform_index(rng, y.size()))];
      diff = sx / static_cast<double>(x.size()) - sy / static_cast<double>(y.size());
    }
    if (diff > 0) ++above;
    else if (diff < 0) ++below;
    else ++zero;
  }
  BootstrapResult res;
  const double a_count = static_cast<double>(std::min(above, below)) + 0.5 * static_cast<double>(zero);
  res.minority = static_cast<std::size_t>(a_count);
  res.p = std::min(1.0, 2.0 * (a_count + 1.0) / static_cast<double>(n_resamples + 1));
  res.observed_difference = mean(a) - mean(b);
  return res;
}

struct Interval {
  double low = 0;
  double high = 0;
};

namespace detail {

// Linear interpolation on a sorted sample.
inline double quantile_sorted(const std::vector<double>& sorted, double q) {
  q = std::clamp(q, 0.0, 1.0);
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

inline std::vector<double> resampled_means(const std::vector<double>& samples,
                                           std::size_t n_resamples, std::uint64_t seed) {
  Rng rng = make_rng(seed, hash_tag("bootstrap-ci"));
  std::vector<double> means(n_resamples);
  for (auto& m : means) {
    double s = 0;
    for (std::size_t i = 0; i < samples.size(); ++i)
      s += samples[static_cast<std::size_t>(uniform_index(rng, samples.size()))];
    m = s / static_cast<double>(samples.size());
  }
  std::sort(means.begin(), means.end());
  return means;
}

inline void check_ci_args(const std::vector<double>& samples, double level) {
  if (samples.size() < 2) throw TooFewSamples("confidence interval needs at least 2 samples");
  if (!(level > 0 && level < 1)) throw ShapeError("level must lie in (0, 1)");
}

}  // namespace detail

/// Percentile bootstrap interval of the mean.
inline Interval percentile_ci(const std::vector<double>& samples, double level = 0.95,
                              std::size_t n_resamples = 1000, std::uint64_t seed = 0) {
  detail::check_ci_args(samples, level);
  const auto means = detail::resampled_means(samples, n_resamples, seed);
  const double alpha = (1 - level) / 2;
  return {detail::quantile_sorted(means, alpha), detail::quantile_sorted(means, 1 - alpha)};
}

/// Bias-corrected and accelerated bootstrap interval of the mean.
inline Interval bootstrap_ci(const std::vector<double>& samples, double level = 0.95,
                             std::size_t n_resamples = 1000, std::uint64_t seed = 0) {
  detail::check_ci_args(samples, level);
  const double theta = mean(samples);
  if (std::all_of(samples.begin(), samples.end(), [&](double v) { return v == samples[0]; }))
    return {samples[0], samples[0]};

  const auto means = detail::resampled_means(samples, n_resamples, seed);
  const double B = static_cast<double>(n_resamples);
  const auto below = std::lower_bound(means.begin(), means.end(), theta) - means.begin();
  const auto ties = std::upper_bound(means.begin(), means.end(), theta) - means.begin() - below;
  double frac = (static_cast<double>(below) + 0.5 * static_cast<double>(ties)) / B;
  frac = std::clamp(frac, 0.5 / B, 1 - 0.5 / B);
  const double z0 = normal_quantile(frac);

  // Acceleration from the jackknife of leave-one-out means.
  const double n = static_cast<double>(samples.size());
  const double total = std::accumulate(samples.begin(), samples.end(), 0.0);
  std::vector<double> jack(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) jack[i] = (total - samples[i]) / (n - 1);
  const double jmean = mean(jack);
  double num = 0, den = 0;
  for (double j : jack) {
    const double d = jmean - j;
    num += d * d * d;
    den += d * d;
  }
  const double accel = den > 0 ? num / (6 * std::pow(den, 1.5)) : 0;

  auto adjusted = [&](double alpha) {
    const double z = z0 + normal_quantile(alpha);
    return normal_cdf(z0 + z / (1 - accel * z));
  };
  const double alpha = (1 - level) / 2;
  return {detail::quantile_sorted(means, adjusted(alpha)),
          detail::quantile_sorted(means, adjusted(1 - alpha))};
}

// ---------------------------------------------------------------------------
// Multiple comparisons

/// Benjamini-Hochberg adjusted p-values, in input order.
inline std::vector<double> fdr_adjust(const std::vector<double>& p) {
  for (double v : p)
    if (!(v > 0 && v <= 1)) throw InvalidP("p-value " + std::to_string(v) + " outside (0, 1]");
  const std::size_t m = p.size();
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](auto i, auto j) { return p[i] < p[j]; });
  std::vector<double> q(m);
  double running = 1.0;
  for (std::size_t r = m; r-- > 0;) {
    const auto i = order[r];
    running = std::min(running, p[i] * static_cast<double>(m) / static_cast<double>(r + 1));
    q[i] = running;
  }
  return q;
}

// ---------------------------------------------------------------------------
// Repeated-measures ANOVA

namespace detail {

inline double log_beta(double a, double b) {
  return std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b);
}

// Continued fraction for the incomplete beta (modified Lentz).
inline double beta_cf(double a, double b, double x) {
  constexpr double tiny = 1e-300, eps = 1e-12;
  double c = 1, d = 1 - (a + b) * x / (a + 1);
  if (std::abs(d) < tiny) d = tiny;
  d = 1 / d;
  double h = d;
  for (int m = 1; m <= 10000; ++m) {
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((a + m2 - 1) * (a + m2));
    d = 1 + aa * d;
    if (std::abs(d) < tiny) d = tiny;
    c = 1 + aa / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1 / d;
    h *= d * c;
    aa = -(a + m) * (a + b + m) * x / ((a + m2) * (a + m2 + 1));
    d = 1 + aa * d;
    if (std::abs(d) < tiny) d = tiny;
    c = 1 + aa / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1) < eps) break;
  }
  return h;
}

}  // namespace detail

/// Regularized incomplete beta I_x(a, b).
inline double incomplete_beta(double a, double b, double x) {
  if (x <= 0) return 0;
  if (x >= 1) return 1;
  const double front =
      std::exp(a * std::log(x) + b * std::log1p(-x) - detail::log_beta(a, b));
  if (x < (a + 1) / (a + b + 2)) return front * detail::beta_cf(a, b, x) / a;
  return 1 - front * detail::beta_cf(b, a, 1 - x) / b;
}

/// Upper tail P(F > f) of the F distribution.
inline double f_upper_tail(double f, double df1, double df2) {
  if (f <= 0) return 1;
  return incomplete_beta(df2 / 2, df1 / 2, df2 / (df2 + df1 * f));
}

struct AnovaResult {
  double F = 0;
  double df1 = 0;
  double df2 = 0;
  double p = 1;
};

/// One-way repeated-measures ANOVA on a participants x conditions matrix.
inline AnovaResult rm_anova(const std::vector<std::vector<double>>& data) {
  const std::size_t n = data.size();
  if (n < 2) throw ShapeError("need at least 2 participants");
  const std::size_t k = data.front().size();
  if (k < 2) throw ShapeError("need at least 2 conditions");
  for (const auto& row : data)
    if (row.size() != k) throw ShapeError("ragged matrix: missing cells");

  double grand = 0;
  std::vector<double> cond(k, 0), subj(n, 0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < k; ++j) {
      grand += data[i][j];
      cond[j] += data[i][j];
      subj[i] += data[i][j];
    }
  const double N = static_cast<double>(n * k);
  grand /= N;
  for (auto& c : cond) c /= static_cast<double>(n);
  for (auto& s : subj) s /= static_cast<double>(k);

  double ss_cond = 0, ss_err = 0;
  for (double c : cond) ss_cond += static_cast<double>(n) * (c - grand) * (c - grand);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < k; ++j) {
      const double r = data[i][j] - subj[i] - cond[j] + grand;
      ss_err += r * r;
    }
  AnovaResult res;
  res.df1 = static_cast<double>(k - 1);
  res.df2 = static_cast<double>((n - 1) * (k - 1));
  const double ms_err = ss_err / res.df2;
  // Residuals at rounding level mean the error term is empty.
  double scale = 0;
  for (const auto& row : data)
    for (double v : row) scale = std::max(scale, std::abs(v));
  if (ms_err <= 1e-24 * std::max(1.0, scale * scale))
    throw DegenerateError("error mean square is zero");
  res.F = (ss_cond / res.df1) / ms_err;
  res.p = f_upper_tail(res.F, res.df1, res.df2);
  return res;
}

}  // namespace stats
}  // namespace probe

#endif  // PROBE_STATS_HPP
