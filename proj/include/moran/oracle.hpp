#pragma once

// Reference implementations that recompute everything from raw sequence
// values: products are multiplied out term by term in extended precision
// (no prefix tables, no log sums), and covering numbers are found by
// exhaustive search instead of the greedy sweep. Slow by construction;
// used to cross-check the fast paths.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <span>
#include <vector>

#include "moran/construct.hpp"
#include "moran/error.hpp"
#include "moran/sequences.hpp"

namespace moran::oracle {

/// Product of many factors as mantissa * 2^exponent (no overflow/underflow).
class Product {
 public:
  void multiply(long double x) {
    mantissa_ *= x;
    int e = 0;
    mantissa_ = std::frexp(mantissa_, &e);
    exponent_ += e;
  }
  long double log() const { return std::log(mantissa_) + static_cast<long double>(exponent_) * std::log(2.0L); }

 private:
  long double mantissa_ = 1.0L;
  long long exponent_ = 0;
};

inline long double log_product_n(const SequenceSpec& spec, std::size_t from, std::size_t to) {
  Product p;
  for (std::size_t i = from; i <= to; ++i) p.multiply(spec.at(i).n);
  return p.log();
}

inline long double log_product_c(const SequenceSpec& spec, std::size_t from, std::size_t to) {
  Product p;
  for (std::size_t i = from; i <= to; ++i) p.multiply(spec.at(i).c);
  return p.log();
}

struct SweepTrace {
  std::vector<double> sup;  // per l = 1..l_max
  std::vector<double> inf;
};

/// For each l, sup and inf over 1 <= k <= depth - l of
/// log(n_{k+1}...n_{k+l}) / -log(c_{k+1}...c_{k+l}); products grown per k.
inline SweepTrace dimension_sweep(const SequenceSpec& spec, std::size_t depth, std::size_t l_max) {
  std::vector<Term> raw(depth + 1);
  for (std::size_t i = 1; i <= depth; ++i) raw[i] = spec.at(i);
  SweepTrace out;
  out.sup.assign(l_max, -1.0);
  out.inf.assign(l_max, std::numeric_limits<double>::infinity());
  for (std::size_t k = 1; k < depth; ++k) {
    Product pn;
    Product pc;
    for (std::size_t l = 1; l <= l_max && k + l <= depth; ++l) {
      pn.multiply(raw[k + l].n);
      pc.multiply(raw[k + l].c);
      const auto ratio = static_cast<double>(pn.log() / -pc.log());
      out.sup[l - 1] = std::max(out.sup[l - 1], ratio);
      out.inf[l - 1] = std::min(out.inf[l - 1], ratio);
    }
  }
  return out;
}

/// l(theta, k) by a linear scan over l; 0 if not certified within depth.
inline std::size_t level_index(const SequenceSpec& spec, double theta, std::size_t k, std::size_t depth) {
  const long double target = log_product_c(spec, 1, k) / static_cast<long double>(theta);
  Product pc;
  std::size_t l = 0;
  for (std::size_t i = 1; i <= depth; ++i) {
    pc.multiply(spec.at(i).c);
    const long double v = pc.log();
    if (v >= target - 1e-12L * std::abs(target))
      l = i;
    else
      return l;
  }
  return 0;
}

/// Spectrum trace t_k for k in [k_first, k_last] from raw products.
inline std::vector<double> spectrum_trace(const SequenceSpec& spec, double theta, std::size_t k_first,
                                          std::size_t k_last, std::size_t depth) {
  std::vector<double> out;
  for (std::size_t k = k_first; k <= k_last; ++k) {
    const std::size_t l = level_index(spec, theta, k, depth);
    if (l == 0) throw DepthError("oracle: l(theta, k) beyond depth", 0);
    const long double num = l > k ? log_product_n(spec, k + 1, l) : 0.0L;
    const long double den = (1.0L - 1.0L / theta) * log_product_c(spec, 1, k);
    out.push_back(static_cast<double>(num / den));
  }
  return out;
}

/// h(r) with |J| = 1 by scanning brackets delta_k < r <= delta_{k-1}.
inline double scale_function(const SequenceSpec& spec, long double log_r, std::size_t depth) {
  Product pn;
  Product pc;
  long double prev = 0.0L;
  for (std::size_t k = 1; k <= depth; ++k) {
    const Term t = spec.at(k);
    pn.multiply(t.n);
    pc.multiply(t.c);
    const long double cur = pc.log();
    const long double slack = 1e-12L * std::max(1.0L, std::abs(log_r));
    if (cur < log_r - slack && log_r - slack <= prev) return static_cast<double>(pn.log() / -cur);
    prev = cur;
  }
  throw DepthError("oracle: r below delta_K", 0);
}

/// Spectrum through h on r = delta_k, k in [k_first, k_last].
inline std::vector<double> scalefn_trace(const SequenceSpec& spec, double theta, std::size_t k_first,
                                         std::size_t k_last, std::size_t depth) {
  std::vector<double> out;
  for (std::size_t k = k_first; k <= k_last; ++k) {
    const long double lr = log_product_c(spec, 1, k);
    const long double lrt = lr / theta;
    const long double num = scale_function(spec, lr, depth) * lr - scale_function(spec, lrt, depth) * lrt;
    out.push_back(static_cast<double>(std::abs(num / ((1.0L - 1.0L / theta) * lr))));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Covering

/// Minimum number of closed segments of length 2r (with relative slack
/// 1e-12) covering the union of the given intervals, by exhaustive search
/// over canonical placements. Any cover can be shifted so each segment starts
/// at an interval's left endpoint plus a multiple of 2r, or ends at a right
/// endpoint minus a multiple of 2r; all such placements are enumerated and
/// the minimum is taken by memoized search over the covered frontier.
inline long long min_cover_exhaustive(std::span<const Interval> intervals, double r) {
  if (intervals.empty()) return 0;
  const double diam = 2.0 * r * (1.0 + 1e-12);
  std::vector<Interval> ivs(intervals.begin(), intervals.end());
  std::sort(ivs.begin(), ivs.end(), [](const Interval& a, const Interval& b) { return a.left < b.left; });
  const double lo = ivs.front().left;
  double hi = lo;
  for (const auto& iv : ivs) hi = std::max(hi, iv.right());
  const auto steps = static_cast<long long>(std::ceil((hi - lo) / diam)) + 1;

  std::vector<double> starts;
  for (const auto& iv : ivs) {
    for (long long j = 0; j <= steps; ++j) {
      starts.push_back(iv.left + static_cast<double>(j) * diam);
      starts.push_back(iv.right() - static_cast<double>(j + 1) * diam);
    }
  }
  std::sort(starts.begin(), starts.end());
  starts.erase(std::unique(starts.begin(), starts.end()), starts.end());

  // Everything <= frontier is covered. Returns the fewest extra segments.
  std::map<double, long long> memo;
  auto solve = [&](auto&& self, double frontier) -> long long {
    // Leftmost uncovered point: either the frontier itself (open) or a left endpoint.
    bool open = false;
    double p = std::numeric_limits<double>::infinity();
    for (const auto& iv : ivs) {
      if (iv.right() <= frontier) continue;
      if (iv.left <= frontier) {
        open = true;
        p = frontier;
        break;
      }
      p = std::min(p, iv.left);
    }
    if (!std::isfinite(p)) return 0;
    if (auto it = memo.find(frontier); it != memo.end()) return it->second;
    long long best = 1 + self(self, p + diam);
    for (double s : starts) {
      const bool covers = open ? (s <= p && s + diam > p) : (s <= p && s + diam >= p);
      if (!covers || s == p) continue;
      best = std::min(best, 1 + self(self, s + diam));
    }
    memo[frontier] = best;
    return best;
  };
  return solve(solve, -std::numeric_limits<double>::infinity());
}

}  // namespace moran::oracle
