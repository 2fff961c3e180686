#pragma once

// Covering numbers on finite-depth realizations and the empirical
// estimators built on them.
//
// E is represented by its level-`level` skeleton (the union of the
// level-`level` intervals); covering_number refuses skeletons whose
// intervals are longer than r. Balls are closed, so a ball touching an
// interval at one endpoint meets it. Sample points are left endpoints of
// deepest-level intervals, which belong to E for both placements.
//
// Empirical Assouad-type estimates follow the structure of the formulas:
// for each outer index (l for the dimensions, k for the spectra) take the
// sup (or inf) over sample points and the remaining index, then reduce the
// trailing window of that trace. The witness is the (x, R, r) that attains
// the reported value; re-evaluating it reproduces the exponent.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "moran/construct.hpp"
#include "moran/error.hpp"
#include "moran/formulas.hpp"
#include "moran/parallel.hpp"
#include "moran/sequences.hpp"

namespace moran {

struct ScalePair {
  double R = 0.0;
  double r = 0.0;
  std::optional<std::pair<std::size_t, std::size_t>> levels;  // (k, l) with R = delta_k, r = delta_{k+l}
};

/// R = delta_k, r = delta_{k+l}.
inline ScalePair level_scale_pair(const PrefixTables& t, std::size_t k, std::size_t l) {
  if (l < 1) throw ValidationError("scale pair needs l >= 1");
  if (k + l > t.depth()) throw DepthError("scale pair beyond table depth", k + l);
  return {std::exp(t.log_delta(k)), std::exp(t.log_delta(k + l)), std::pair{k, l}};
}

/// Fewest closed segments of length 2r covering the union of `ivs` clipped to
/// [lo, hi], by the left-to-right greedy rule. `ivs` must be sorted with
/// disjoint interiors.
inline long long greedy_cover_count(std::span<const Interval> ivs, double lo, double hi, double r) {
  const double diam = 2.0 * r * (1.0 + 1e-12);
  long long count = 0;
  double covered = -std::numeric_limits<double>::infinity();
  auto first = std::partition_point(ivs.begin(), ivs.end(), [&](const Interval& iv) { return iv.right() < lo; });
  for (auto it = first; it != ivs.end() && it->left <= hi; ++it) {
    const double a = std::max(it->left, lo);
    const double b = std::min(it->right(), hi);
    if (b <= covered) continue;
    const double start = a > covered ? a : covered;
    const auto m = std::max(1.0, std::ceil((b - start) / diam));
    count += static_cast<long long>(m);
    covered = start + m * diam;
  }
  return count;
}

/// Unclipped convenience overload.
inline long long greedy_cover_count(std::span<const Interval> ivs, double r) {
  return greedy_cover_count(ivs, -std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity(),
                            r);
}

/// N_r(B(x, R) ∩ E) on the level-`level` skeleton.
inline long long covering_number(const LevelStructure& ls, double x, double R, double r, std::size_t level) {
  if (!(r > 0.0) || !(r < R)) throw ValidationError("covering number needs 0 < r < R");
  if (level < 1 || level > ls.depth()) throw ValidationError("skeleton level outside the realization");
  if (ls.max_length(level) > r) {
    throw DepthError("skeleton too coarse: level " + std::to_string(level) + " intervals are longer than r", 0);
  }
  if (!locate(ls, x, level)) throw ValidationError("x is not a point of the level skeleton");
  return greedy_cover_count(ls.level(level), x - R, x + R, r);
}

/// log N / log(R / r); 0 when N = 1.
inline double two_scale_exponent(const LevelStructure& ls, double x, double R, double r, std::size_t level) {
  const long long n = covering_number(ls, x, R, r, level);
  return std::log(static_cast<double>(n)) / std::log(R / r);
}

/// Left endpoints of level intervals at indices floor(i N / count); the
/// deepest level unless another level is given.
inline std::vector<double> sample_points(const LevelStructure& ls, std::size_t count, std::size_t level = 0) {
  if (count < 1) throw ValidationError("need at least one sample point");
  if (level > ls.depth()) throw ValidationError("sample level beyond realization depth");
  auto deep = ls.level(level == 0 ? ls.depth() : level);
  std::vector<double> xs;
  xs.reserve(count);
  std::size_t last = SIZE_MAX;
  for (std::size_t i = 0; i < count; ++i) {
    const auto idx = static_cast<std::size_t>(static_cast<double>(i) * static_cast<double>(deep.size()) /
                                              static_cast<double>(count));
    if (idx == last) continue;
    xs.push_back(deep[idx].left);
    last = idx;
  }
  return xs;
}

struct Witness {
  double x = 0.0;
  double R = 0.0;
  double r = 0.0;
  std::size_t k = 0;
  std::size_t l = 0;  // 0 for spectrum points
  long long count = 0;
  double exponent = 0.0;
};

struct EmpiricalReport {
  std::string kind;  // assouad | lower | assouad_spectrum | lower_spectrum
  double value = 0.0;
  double theta = 0.0;  // spectrum points only
  Witness witness;
  std::vector<std::size_t> index;  // l (dimensions) or k (spectra)
  std::vector<double> trace;
  std::vector<Witness> trace_witness;
  std::size_t tail_begin = 0;
  double spread = 0.0;
  std::size_t evaluations = 0;
  std::size_t samples = 0;
  std::size_t depth = 0;
  std::string note;
};

namespace detail {

// Deterministic preference: better exponent, then smaller (x, R, r).
inline bool better(const Witness& a, const Witness& b, Extremum ext) {
  if (a.exponent != b.exponent) return ext == Extremum::sup ? a.exponent > b.exponent : a.exponent < b.exponent;
  return std::tie(a.x, a.R, a.r) < std::tie(b.x, b.R, b.r);
}

struct ScaleJob {
  std::size_t outer;  // trace key
  std::size_t k;
  std::size_t l;
  double R;
  double r;
};

inline Witness extremal_over_samples(const LevelStructure& ls, const ScaleJob& job, std::span<const double> xs,
                                     Extremum ext) {
  const std::size_t level = ls.depth();
  if (ls.max_length(level) > job.r) {
    throw DepthError("realization depth " + std::to_string(level) + " too shallow for r at k = " +
                         std::to_string(job.k) + ", l = " + std::to_string(job.l),
                     0);
  }
  Witness best;
  bool have = false;
  for (double x : xs) {
    Witness w{x, job.R, job.r, job.k, job.l, greedy_cover_count(ls.level(level), x - job.R, x + job.R, job.r), 0.0};
    w.exponent = std::log(static_cast<double>(w.count)) / std::log(job.R / job.r);
    if (!have || better(w, best, ext)) {
      best = w;
      have = true;
    }
  }
  return best;
}

inline EmpiricalReport reduce_jobs(const LevelStructure& ls, const std::vector<ScaleJob>& jobs_list,
                                   std::span<const double> xs, Extremum ext, double tail_fraction, std::size_t jobs) {
  if (jobs_list.empty()) throw ValidationError("empty scale grid");
  if (xs.empty()) throw ValidationError("empty sample");
  std::vector<Witness> per_job(jobs_list.size());
  parallel_for(jobs_list.size(), jobs,
               [&](std::size_t i) { per_job[i] = extremal_over_samples(ls, jobs_list[i], xs, ext); });

  EmpiricalReport rep;
  // Group by outer index, in increasing order.
  std::vector<std::size_t> order(jobs_list.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return jobs_list[a].outer < jobs_list[b].outer; });
  for (std::size_t i : order) {
    if (rep.index.empty() || rep.index.back() != jobs_list[i].outer) {
      rep.index.push_back(jobs_list[i].outer);
      rep.trace_witness.push_back(per_job[i]);
    } else if (better(per_job[i], rep.trace_witness.back(), ext)) {
      rep.trace_witness.back() = per_job[i];
    }
  }
  for (const auto& w : rep.trace_witness) rep.trace.push_back(w.exponent);

  rep.tail_begin = tail_start(rep.trace.size(), tail_fraction);
  std::size_t pos = rep.tail_begin;
  double lo = rep.trace[pos];
  double hi = rep.trace[pos];
  for (std::size_t i = rep.tail_begin; i < rep.trace.size(); ++i) {
    lo = std::min(lo, rep.trace[i]);
    hi = std::max(hi, rep.trace[i]);
    if (better(rep.trace_witness[i], rep.trace_witness[pos], ext)) pos = i;
  }
  rep.witness = rep.trace_witness[pos];
  rep.value = rep.witness.exponent;
  rep.spread = hi - lo;
  rep.evaluations = jobs_list.size() * xs.size();
  rep.samples = xs.size();
  rep.depth = ls.depth();
  return rep;
}

inline EmpiricalReport empirical_dimension(const LevelStructure& ls,
                                           std::span<const std::pair<std::size_t, std::size_t>> level_pairs,
                                           std::size_t samples_per_pair, Extremum ext, double tail_fraction,
                                           std::size_t jobs) {
  std::vector<ScaleJob> grid;
  for (auto [k, l] : level_pairs) {
    const ScalePair sp = level_scale_pair(ls.tables(), k, l);
    grid.push_back({l, k, l, sp.R, sp.r});
  }
  const auto xs = sample_points(ls, samples_per_pair);
  return reduce_jobs(ls, grid, xs, ext, tail_fraction, jobs);
}

}  // namespace detail

/// All (k, l) with 1 <= k <= k_max, 1 <= l <= l_max.
inline std::vector<std::pair<std::size_t, std::size_t>> pair_grid(std::size_t k_max, std::size_t l_max) {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (std::size_t k = 1; k <= k_max; ++k)
    for (std::size_t l = 1; l <= l_max; ++l) out.emplace_back(k, l);
  return out;
}

/// Sup of the two-scale exponent over samples and pairs (R = delta_k,
/// r = delta_{k+l}); trace over l, limsup over the tail of l.
inline EmpiricalReport empirical_assouad(const LevelStructure& ls,
                                         std::span<const std::pair<std::size_t, std::size_t>> level_pairs,
                                         std::size_t samples_per_pair, double tail_fraction = 0.5,
                                         std::size_t jobs = 1) {
  auto rep = detail::empirical_dimension(ls, level_pairs, samples_per_pair, Extremum::sup, tail_fraction, jobs);
  rep.kind = "assouad";
  return rep;
}

/// Inf counterpart. A sample inf can only overestimate the true inf, so the
/// value estimates the lower dimension from above.
inline EmpiricalReport empirical_lower(const LevelStructure& ls,
                                       std::span<const std::pair<std::size_t, std::size_t>> level_pairs,
                                       std::size_t samples_per_pair, double tail_fraction = 0.5,
                                       std::size_t jobs = 1) {
  auto rep = detail::empirical_dimension(ls, level_pairs, samples_per_pair, Extremum::inf, tail_fraction, jobs);
  rep.kind = "lower";
  rep.note = "sample infimum; estimates the lower dimension from above";
  return rep;
}

/// Default lower bound on log(R/r) for spectrum levels; pairs closer than
/// this give covering counts of a handful of balls.
inline constexpr double kDefaultMinLogSeparation = 3.0;

/// Levels k whose pair (R, r) = (delta_k, delta_k^(1/theta)) can be resolved
/// by the realization: r not below the deepest interval length, and
/// log(R/r) at least min_log_separation.
inline std::vector<std::size_t> usable_spectrum_levels(const LevelStructure& ls, double theta,
                                                       double min_log_separation = kDefaultMinLogSeparation) {
  detail::check_theta(theta);
  if (!(min_log_separation >= 0.0)) throw ValidationError("min_log_separation must be >= 0");
  std::vector<std::size_t> ks;
  const double finest = ls.max_length(ls.depth());
  for (std::size_t k = 1; k <= ls.depth(); ++k) {
    const double log_big = ls.tables().log_delta(k);
    const double r = std::exp(log_big / theta);
    if (r >= finest && log_big - log_big / theta >= min_log_separation) ks.push_back(k);
  }
  return ks;
}

/// Sup (Assouad) or inf (lower) over samples of
/// log N_{R^(1/theta)}(B(x, R) ∩ E) / ((1 - 1/theta) log R), R = delta_k;
/// trace over k, reduced over the tail of k.
inline EmpiricalReport empirical_spectrum_point(const LevelStructure& ls, double theta,
                                                std::span<const std::size_t> k_list, std::size_t samples,
                                                SpectrumKind kind = SpectrumKind::assouad,
                                                double tail_fraction = 0.5, std::size_t jobs = 1) {
  detail::check_theta(theta);
  std::vector<detail::ScaleJob> grid;
  for (std::size_t k : k_list) {
    if (k < 1 || k > ls.depth()) throw ValidationError("spectrum level outside the realization");
    const double log_r_big = ls.tables().log_delta(k);
    grid.push_back({k, k, 0, std::exp(log_r_big), std::exp(log_r_big / theta)});
  }
  const auto xs = sample_points(ls, samples);
  auto rep = detail::reduce_jobs(ls, grid, xs, kind == SpectrumKind::assouad ? Extremum::sup : Extremum::inf,
                                 tail_fraction, jobs);
  rep.kind = kind == SpectrumKind::assouad ? "assouad_spectrum" : "lower_spectrum";
  rep.theta = theta;
  return rep;
}

// ---------------------------------------------------------------------------
// Counting lemmas

struct CountingLemmaReport {
  std::size_t k = 0;
  std::size_t l = 0;
  std::size_t samples = 0;
  long long min_contained_big = 0;    // (k+1)-level intervals inside B(x, R)
  long long max_met_small = 0;        // (k+l)-level intervals meeting B(x, r)
  long long max_met_parent = 0;       // (k-1)-level intervals meeting B(x, R)
  long long min_contained_small = 0;  // (k+l+1)-level intervals inside B(x, r)
  std::vector<std::string> violations;

  bool ok() const { return violations.empty(); }
};

namespace detail {

inline long long count_meeting(std::span<const Interval> lv, double lo, double hi) {
  auto first = std::partition_point(lv.begin(), lv.end(), [&](const Interval& iv) { return iv.right() < lo; });
  auto last = std::partition_point(first, lv.end(), [&](const Interval& iv) { return iv.left <= hi; });
  return last - first;
}

inline long long count_contained(std::span<const Interval> lv, double lo, double hi) {
  auto first = std::partition_point(lv.begin(), lv.end(), [&](const Interval& iv) { return iv.left < lo; });
  auto last = std::partition_point(first, lv.end(), [&](const Interval& iv) { return iv.right() <= hi; });
  return last - first;
}

}  // namespace detail

/// For sampled x with R = delta_k, r = delta_{k+l}:
///   (a) B(x, R) contains at least one (k+1)-level interval
///   (b) B(x, r) meets at most four (k+l)-level intervals
///   (c) B(x, R) meets at most four (k-1)-level intervals
///   (d) B(x, r) contains at least one (k+l+1)-level interval
/// Counterexamples are reported, not thrown.
inline CountingLemmaReport check_counting_lemmas(const LevelStructure& ls, std::size_t k, std::size_t l,
                                                 std::size_t samples) {
  if (k < 1 || l < 1) throw ValidationError("counting lemmas need k >= 1 and l >= 1");
  if (k + l + 1 > ls.depth()) throw DepthError("counting lemmas need depth >= k + l + 1", k + l + 1);
  const auto sp = level_scale_pair(ls.tables(), k, l);
  CountingLemmaReport rep;
  rep.k = k;
  rep.l = l;
  rep.min_contained_big = std::numeric_limits<long long>::max();
  rep.min_contained_small = std::numeric_limits<long long>::max();
  const auto xs = sample_points(ls, samples);
  rep.samples = xs.size();
  auto describe = [&](const char* what, double x, long long got) {
    char buf[192];
    std::snprintf(buf, sizeof buf, "%s: x=%.17g k=%zu l=%zu count=%lld", what, x, k, l, got);
    return std::string(buf);
  };
  for (double x : xs) {
    const long long a = detail::count_contained(ls.level(k + 1), x - sp.R, x + sp.R);
    const long long b = detail::count_meeting(ls.level(k + l), x - sp.r, x + sp.r);
    const long long c = detail::count_meeting(ls.level(k - 1), x - sp.R, x + sp.R);
    const long long d = detail::count_contained(ls.level(k + l + 1), x - sp.r, x + sp.r);
    rep.min_contained_big = std::min(rep.min_contained_big, a);
    rep.max_met_small = std::max(rep.max_met_small, b);
    rep.max_met_parent = std::max(rep.max_met_parent, c);
    rep.min_contained_small = std::min(rep.min_contained_small, d);
    if (a < 1) rep.violations.push_back(describe("B(x,R) contains no (k+1)-level interval", x, a));
    if (b > 4) rep.violations.push_back(describe("B(x,r) meets more than four (k+l)-level intervals", x, b));
    if (c > 4) rep.violations.push_back(describe("B(x,R) meets more than four (k-1)-level intervals", x, c));
    if (d < 1) rep.violations.push_back(describe("B(x,r) contains no (k+l+1)-level interval", x, d));
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Measure properties

struct MeasureReport {
  std::size_t depth = 0;
  double a = 0.0;
  double lambda = 1.0;  // max over r of max_x mu / min_x mu
  double alpha = std::numeric_limits<double>::infinity();  // min mu(B(x,r)) / mu(B(x,ar))
  double beta = 0.0;                                       // max of the same ratio
  double c = 0.0;       // max |h(r) log r - log mu(B(x,r))|
  std::vector<double> radii_used;
  std::size_t radii_skipped = 0;
  std::size_t samples = 0;
  std::vector<std::string> findings;
};

/// Natural measure discretized at the deepest level. Radii with a*r below the
/// deepest interval length, or r above 1, are skipped as unresolved.
inline MeasureReport check_measure_properties(const LevelStructure& ls, std::span<const double> radii,
                                              std::size_t samples, double a, std::size_t sample_level = 0) {
  if (!(a > 0.0 && a < 1.0)) throw ValidationError("measure check needs 0 < a < 1");
  MeasureReport rep;
  rep.depth = ls.depth();
  rep.a = a;
  const std::size_t level = ls.depth();
  const double finest = ls.max_length(level);
  const auto xs = sample_points(ls, samples, sample_level);
  rep.samples = xs.size();
  for (double r : radii) {
    if (!(r > 0.0) || r > 1.0 || a * r < finest) {
      ++rep.radii_skipped;
      continue;
    }
    rep.radii_used.push_back(r);
    const double h = scale_function(ls.tables(), r);
    double mu_min = std::numeric_limits<double>::infinity();
    double mu_max = 0.0;
    for (double x : xs) {
      const double mu = natural_measure_ball(ls, x, r, level);
      const double mu_small = natural_measure_ball(ls, x, a * r, level);
      mu_min = std::min(mu_min, mu);
      mu_max = std::max(mu_max, mu);
      rep.alpha = std::min(rep.alpha, mu / mu_small);
      rep.beta = std::max(rep.beta, mu / mu_small);
      rep.c = std::max(rep.c, std::abs(h * std::log(r) - std::log(mu)));
    }
    rep.lambda = std::max(rep.lambda, mu_max / mu_min);
  }
  if (rep.radii_used.empty()) {
    rep.findings.push_back("no resolvable radius");
    rep.alpha = 0.0;
    return rep;
  }
  if (!std::isfinite(rep.lambda)) rep.findings.push_back("homogeneity constant lambda is not finite");
  if (!(rep.alpha > 1.0)) rep.findings.push_back("doubling lower constant alpha is not above 1");
  if (!std::isfinite(rep.beta)) rep.findings.push_back("doubling upper constant beta is not finite");
  return rep;
}

struct MeasureTrend {
  std::vector<MeasureReport> reports;  // one per depth, increasing
  double lambda_change = 0.0;          // max relative change of lambda versus the first depth
  bool c_non_increasing = true;        // within 1e-9 slack
};

/// check_measure_properties at several realization depths of the same spec,
/// all sampling the same points (left endpoints at the shallowest depth).
inline MeasureTrend check_measure_trend(const SequenceSpec& spec, std::span<const std::size_t> depths,
                                        const BuildOptions& opt, std::span<const double> radii, std::size_t samples,
                                        double a) {
  MeasureTrend trend;
  if (depths.empty()) throw ValidationError("measure trend needs at least one depth");
  const std::size_t shallow = *std::min_element(depths.begin(), depths.end());
  for (std::size_t d : depths) {
    const auto ls = build_levels(spec, d, opt);
    trend.reports.push_back(check_measure_properties(ls, radii, samples, a, shallow));
  }
  for (std::size_t i = 1; i < trend.reports.size(); ++i) {
    const double base = trend.reports.front().lambda;
    trend.lambda_change = std::max(trend.lambda_change, std::abs(trend.reports[i].lambda - base) / base);
    if (trend.reports[i].c > trend.reports[i - 1].c + 1e-9) trend.c_non_increasing = false;
  }
  return trend;
}

}  // namespace moran
