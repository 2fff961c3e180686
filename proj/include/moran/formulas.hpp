#pragma once

// Closed-form dimension and spectrum formulas evaluated on prefix tables.
//
// Every limsup / liminf over an infinite index set is estimated as a max /
// min over a trailing window of the computed trace; `spread` reports how
// much the trace still moves inside that window. Nothing here proves
// convergence.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "moran/error.hpp"
#include "moran/parallel.hpp"
#include "moran/sequences.hpp"

namespace moran {

struct DimensionEstimate {
  std::string quantity;
  double value = 0.0;
  std::vector<std::size_t> index;  // outer-limit index of each trace entry (l, k or grid position)
  std::vector<double> trace;
  std::size_t tail_begin = 0;      // position in trace where the tail window starts
  std::size_t value_position = 0;  // position in trace attaining `value`
  double spread = 0.0;
  bool upper_bound_only = false;   // value bounds the quantity from above

  // Inner-extremum diagnostics (Assouad/lower-dimension sweeps only).
  std::vector<std::size_t> extremal_k;
  bool boundary_warning = false;

  std::size_t tail_first() const { return index.at(tail_begin); }
  std::size_t tail_last() const { return index.back(); }
};

enum class Extremum { sup, inf };

namespace detail {

inline constexpr double kTieTolerance = 1e-12;

inline std::size_t tail_start(std::size_t size, double fraction) {
  if (!(fraction > 0.0 && fraction <= 1.0)) throw ValidationError("tail fraction must lie in (0, 1]");
  const auto len = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(size))));
  return size - std::min(len, size);
}

// Sets value, value_position and spread from trace and tail_begin.
inline void reduce_tail(DimensionEstimate& est, Extremum ext) {
  if (est.trace.empty()) throw ValidationError("cannot reduce an empty trace");
  const auto first = est.trace.begin() + static_cast<std::ptrdiff_t>(est.tail_begin);
  auto [lo, hi] = std::minmax_element(first, est.trace.end());
  // minmax_element returns the last maximum; prefer the first one.
  auto best = ext == Extremum::sup ? std::max_element(first, est.trace.end()) : lo;
  est.value = *best;
  est.value_position = static_cast<std::size_t>(best - est.trace.begin());
  est.spread = *hi - *lo;
}

inline void check_theta(double theta) {
  if (!(theta > 0.0 && theta < 1.0)) throw ValidationError("theta must lie strictly between 0 and 1");
}

inline std::size_t depth_estimate(const PrefixTables& t, double log_target) {
  const double step = -std::log(t.sup_c());
  return static_cast<std::size_t>(std::ceil(-log_target / step)) + 2;
}

}  // namespace detail

/// Sweep over l = 1..l_max of the sup (or inf) over k of
/// log(n_{k+1}...n_{k+l}) / -log(c_{k+1}...c_{k+l}), with k truncated at K - l.
inline DimensionEstimate dimension_sweep(const PrefixTables& t, std::size_t l_max, std::size_t tail, Extremum ext) {
  const std::size_t depth = t.depth();
  if (l_max < 1 || tail < 1 || tail > l_max) throw ValidationError("need 1 <= tail <= l_max");
  if (depth < l_max + tail) {
    throw DepthError("table depth " + std::to_string(depth) + " too small: need at least l_max + tail = " +
                         std::to_string(l_max + tail),
                     l_max + tail);
  }
  const auto ln = t.log_counts();
  const auto ld = t.log_deltas();

  DimensionEstimate est;
  est.index.resize(l_max);
  est.trace.resize(l_max);
  est.extremal_k.resize(l_max);
  for (std::size_t l = 1; l <= l_max; ++l) {
    double best = ext == Extremum::sup ? -1.0 : std::numeric_limits<double>::infinity();
    std::size_t arg = 1;
    for (std::size_t k = 1; k + l <= depth; ++k) {
      const double ratio = (ln[k + l] - ln[k]) / (ld[k] - ld[k + l]);
      // Near-ties keep the earliest k, so rounding noise cannot move the argmax.
      const double slack = detail::kTieTolerance * std::abs(ratio);
      if (ext == Extremum::sup ? ratio > best + slack : ratio < best - slack) {
        best = ratio;
        arg = k;
      }
    }
    est.index[l - 1] = l;
    est.trace[l - 1] = best;
    est.extremal_k[l - 1] = arg;
  }
  est.tail_begin = l_max - tail;
  detail::reduce_tail(est, ext);

  const std::size_t l_star = est.index[est.value_position];
  const double range = static_cast<double>(depth - l_star);
  est.boundary_warning = static_cast<double>(est.extremal_k[est.value_position]) > 0.9 * range;
  return est;
}

/// limsup_l sup_k of the block ratio: the Assouad dimension of a homogeneous
/// Moran set with bounded n_k.
inline DimensionEstimate assouad_dim_formula(const PrefixTables& t, std::size_t l_max, std::size_t tail) {
  auto est = dimension_sweep(t, l_max, tail, Extremum::sup);
  est.quantity = "assouad_dimension";
  return est;
}

/// liminf_l inf_k of the block ratio. This is an UPPER BOUND on the lower
/// dimension, never the lower dimension itself.
inline DimensionEstimate lower_dim_bound_formula(const PrefixTables& t, std::size_t l_max, std::size_t tail) {
  auto est = dimension_sweep(t, l_max, tail, Extremum::inf);
  est.quantity = "upper bound on lower dimension";
  est.upper_bound_only = true;
  return est;
}

/// l(theta, k): the largest l with delta_l >= delta_k^(1/theta). Ties within
/// 1e-12 relative count as equality. Requires l + 1 <= depth so that the
/// bracket delta_{l+1} < delta_k^(1/theta) <= delta_l is certified.
inline std::size_t level_index(const PrefixTables& t, double theta, std::size_t k) {
  detail::check_theta(theta);
  if (k < 1 || k > t.depth()) throw ValidationError("level index needs 1 <= k <= depth");
  const auto ld = t.log_deltas();
  const double target = ld[k] / theta;
  const double threshold = target - detail::kTieTolerance * std::abs(target);
  // First l with ld[l] < threshold; ld is strictly decreasing.
  auto it = std::partition_point(ld.begin() + static_cast<std::ptrdiff_t>(k), ld.end(),
                                 [&](double v) { return v >= threshold; });
  if (it == ld.end()) {
    const auto need = detail::depth_estimate(t, target);
    throw DepthError("l(theta, " + std::to_string(k) + ") needs table depth of about " + std::to_string(need) +
                         " (have " + std::to_string(t.depth()) + ")",
                     need);
  }
  return static_cast<std::size_t>(it - ld.begin()) - 1;
}

/// Largest k whose l(theta, k) is certified by the tables; 0 if none.
inline std::size_t spectrum_max_k(const PrefixTables& t, double theta) {
  detail::check_theta(theta);
  const auto ld = t.log_deltas();
  const double deepest = ld[t.depth()];
  std::size_t lo = 0;
  std::size_t hi = t.depth();
  while (lo < hi) {  // last k with deepest < threshold(k)
    const std::size_t mid = (lo + hi + 1) / 2;
    const double target = ld[mid] / theta;
    if (deepest < target - detail::kTieTolerance * std::abs(target))
      lo = mid;
    else
      hi = mid - 1;
  }
  return lo;
}

struct KWindow {
  std::size_t first = 1;
  std::size_t last = 1;
};

/// k = 1 .. spectrum_max_k.
inline KWindow auto_window(const PrefixTables& t, double theta) {
  const std::size_t last = spectrum_max_k(t, theta);
  if (last < 1) {
    const auto need = detail::depth_estimate(t, t.log_delta(1) / theta);
    throw DepthError("tables too shallow for any spectrum term at theta = " + std::to_string(theta), need);
  }
  return {1, last};
}

enum class SpectrumKind { assouad, lower };

inline const char* to_string(SpectrumKind s) { return s == SpectrumKind::assouad ? "assouad" : "lower"; }

/// Trace t_k = log(n_{k+1}...n_{l(theta,k)}) / ((1 - 1/theta) log delta_k)
/// over the window; value = max (Assouad) or min (lower) over the tail.
inline DimensionEstimate spectrum_formula(const PrefixTables& t, double theta, KWindow window, SpectrumKind kind,
                                          double tail_fraction = 0.5) {
  detail::check_theta(theta);
  if (window.first < 1 || window.last < window.first) throw ValidationError("empty k window");
  const auto ln = t.log_counts();
  const auto ld = t.log_deltas();
  DimensionEstimate est;
  est.quantity = kind == SpectrumKind::assouad ? "assouad_spectrum" : "lower_spectrum";
  for (std::size_t k = window.first; k <= window.last; ++k) {
    const std::size_t l = level_index(t, theta, k);
    const double denom = (1.0 - 1.0 / theta) * ld[k];
    if (!(denom > 0.0)) throw std::logic_error("non-positive spectrum denominator at k = " + std::to_string(k));
    est.index.push_back(k);
    est.trace.push_back((ln[l] - ln[k]) / denom);
  }
  est.tail_begin = detail::tail_start(est.trace.size(), tail_fraction);
  detail::reduce_tail(est, kind == SpectrumKind::assouad ? Extremum::sup : Extremum::inf);
  return est;
}

inline DimensionEstimate assouad_spectrum_formula(const PrefixTables& t, double theta, KWindow window,
                                                  double tail_fraction = 0.5) {
  return spectrum_formula(t, theta, window, SpectrumKind::assouad, tail_fraction);
}

inline DimensionEstimate lower_spectrum_formula(const PrefixTables& t, double theta, KWindow window,
                                                double tail_fraction = 0.5) {
  return spectrum_formula(t, theta, window, SpectrumKind::lower, tail_fraction);
}

// ---------------------------------------------------------------------------
// Scale function path

/// k with delta_k |J| < r <= delta_{k-1} |J|, given log r and log |J|.
inline std::size_t scale_bracket_log(const PrefixTables& t, double log_r, double log_j = 0.0) {
  const double u = log_r - log_j;
  if (!(u <= 0.0)) throw ValidationError("scale function needs r <= |J|");
  const double threshold = u - detail::kTieTolerance * std::max(1.0, std::abs(u));
  const auto ld = t.log_deltas();
  auto it = std::partition_point(ld.begin() + 1, ld.end(), [&](double v) { return v >= threshold; });
  if (it == ld.end()) {
    const auto need = detail::depth_estimate(t, u);
    throw DepthError("r below delta_K |J|: need table depth of about " + std::to_string(need), need);
  }
  return static_cast<std::size_t>(it - ld.begin());
}

inline std::size_t scale_bracket(const PrefixTables& t, double r, double j_diam = 1.0) {
  if (!(r > 0.0) || !(j_diam > 0.0)) throw ValidationError("scale function needs r > 0 and |J| > 0");
  return scale_bracket_log(t, std::log(r), std::log(j_diam));
}

/// h(r) = log N_k / -log delta_k on the bracket delta_k |J| < r <= delta_{k-1} |J|.
inline double scale_function_log(const PrefixTables& t, double log_r, double log_j = 0.0) {
  const std::size_t k = scale_bracket_log(t, log_r, log_j);
  return t.log_count(k) / -t.log_delta(k);
}

inline double scale_function(const PrefixTables& t, double r, double j_diam = 1.0) {
  const std::size_t k = scale_bracket(t, r, j_diam);
  return t.log_count(k) / -t.log_delta(k);
}

/// |(h(r) log r - h(r^(1/theta)) log r^(1/theta)) / ((1 - 1/theta) log r)|
/// over a decreasing grid of log r values; limsup (Assouad) or liminf
/// (lower) over the smallest-r tail.
inline DimensionEstimate spectrum_via_scale_function(const PrefixTables& t, double theta,
                                                     std::span<const double> log_r_grid, SpectrumKind kind,
                                                     double log_j = 0.0, double tail_fraction = 0.5) {
  detail::check_theta(theta);
  if (log_r_grid.empty()) throw ValidationError("empty r grid");
  DimensionEstimate est;
  est.quantity = kind == SpectrumKind::assouad ? "assouad_spectrum_scalefn" : "lower_spectrum_scalefn";
  for (std::size_t i = 0; i < log_r_grid.size(); ++i) {
    const double lr = log_r_grid[i];
    if (i > 0 && !(lr < log_r_grid[i - 1])) throw ValidationError("r grid must be strictly decreasing");
    if (!(lr < 0.0)) throw ValidationError("r grid values must be below 1");
    const double lr_theta = lr / theta;
    const double num = scale_function_log(t, lr, log_j) * lr - scale_function_log(t, lr_theta, log_j) * lr_theta;
    est.index.push_back(i);
    est.trace.push_back(std::abs(num / ((1.0 - 1.0 / theta) * lr)));
  }
  est.tail_begin = detail::tail_start(est.trace.size(), tail_fraction);
  detail::reduce_tail(est, kind == SpectrumKind::assouad ? Extremum::sup : Extremum::inf);
  return est;
}

/// The grid r = delta_k |J| for k in the window, as log values.
inline std::vector<double> level_log_r_grid(const PrefixTables& t, KWindow window, double log_j = 0.0) {
  std::vector<double> grid;
  for (std::size_t k = window.first; k <= window.last; ++k) grid.push_back(t.log_delta(k) + log_j);
  return grid;
}

// ---------------------------------------------------------------------------
// Curves

enum class Monotonicity { constant, nondecreasing, nonincreasing, neither };

inline const char* to_string(Monotonicity m) {
  switch (m) {
    case Monotonicity::constant: return "constant";
    case Monotonicity::nondecreasing: return "nondecreasing";
    case Monotonicity::nonincreasing: return "nonincreasing";
    case Monotonicity::neither: return "neither";
  }
  return "neither";
}

struct SpectrumPoint {
  double theta = 0.0;
  DimensionEstimate estimate;
};

struct SpectrumCurve {
  SpectrumKind kind = SpectrumKind::assouad;
  std::vector<SpectrumPoint> points;
  Monotonicity monotonicity = Monotonicity::constant;
};

inline Monotonicity classify_monotonicity(const std::vector<SpectrumPoint>& pts, double tol = 1e-12) {
  bool up = false;
  bool down = false;
  for (std::size_t i = 1; i < pts.size(); ++i) {
    const double d = pts[i].estimate.value - pts[i - 1].estimate.value;
    if (d > tol) up = true;
    if (d < -tol) down = true;
  }
  if (up && down) return Monotonicity::neither;
  if (up) return Monotonicity::nondecreasing;
  if (down) return Monotonicity::nonincreasing;
  return Monotonicity::constant;
}

inline void check_theta_grid(std::span<const double> grid) {
  for (std::size_t i = 0; i < grid.size(); ++i) {
    detail::check_theta(grid[i]);
    if (i > 0 && !(grid[i] > grid[i - 1])) throw ValidationError("theta grid must be strictly increasing");
  }
}

/// Pointwise spectrum formula; each theta uses auto_window.
inline SpectrumCurve spectrum_curve(const PrefixTables& t, std::span<const double> theta_grid, SpectrumKind kind,
                                    double tail_fraction = 0.5, std::size_t jobs = 1) {
  check_theta_grid(theta_grid);
  SpectrumCurve curve;
  curve.kind = kind;
  curve.points.resize(theta_grid.size());
  detail::parallel_for(theta_grid.size(), jobs, [&](std::size_t i) {
    const double theta = theta_grid[i];
    curve.points[i] = {theta, spectrum_formula(t, theta, auto_window(t, theta), kind, tail_fraction)};
  });
  curve.monotonicity = classify_monotonicity(curve.points);
  return curve;
}

/// Same curve through the scale function on r = delta_k, k in auto_window.
inline SpectrumCurve spectrum_curve_scalefn(const PrefixTables& t, std::span<const double> theta_grid,
                                            SpectrumKind kind, double tail_fraction = 0.5, std::size_t jobs = 1) {
  check_theta_grid(theta_grid);
  SpectrumCurve curve;
  curve.kind = kind;
  curve.points.resize(theta_grid.size());
  detail::parallel_for(theta_grid.size(), jobs, [&](std::size_t i) {
    const double theta = theta_grid[i];
    const auto grid = level_log_r_grid(t, auto_window(t, theta));
    curve.points[i] = {theta, spectrum_via_scale_function(t, theta, grid, kind, 0.0, tail_fraction)};
  });
  curve.monotonicity = classify_monotonicity(curve.points);
  return curve;
}

}  // namespace moran
