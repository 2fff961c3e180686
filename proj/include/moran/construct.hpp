#pragma once

// Finite-depth geometric realization on [0, 1].
//
// Child lengths are fixed by the sequences (exactly c_k |parent| in Moran
// mode, sampled from [c_k(1-a_k), c_k(1+a_k)] |parent| in Cantor-like
// mode); positions are a policy:
//
//   uniform-gaps  first child flush left, last child flush right, equal gaps
//   left-packed   children contiguous from the parent's left end
//
// Ratio sampling draws u = (x >> 11) * 2^-53 from std::mt19937_64 seeded
// with the given seed (0 when absent), level by level, parent by parent,
// child by child; the ratio is lo + (hi - lo) * u.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <optional>
#include <ostream>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "moran/error.hpp"
#include "moran/sequences.hpp"

namespace moran {

enum class Placement { uniform_gaps, left_packed };
enum class Mode { moran, cantor_like };

inline const char* to_string(Placement p) {
  return p == Placement::uniform_gaps ? "uniform-gaps" : "left-packed";
}
inline const char* to_string(Mode m) { return m == Mode::moran ? "moran" : "cantor-like"; }

struct Interval {
  double left = 0.0;
  double length = 0.0;

  double right() const { return left + length; }
};

inline constexpr std::size_t kDefaultIntervalBudget = std::size_t{1} << 24;

struct BuildOptions {
  Placement placement = Placement::uniform_gaps;
  Mode mode = Mode::moran;
  std::optional<std::uint64_t> seed;
  std::size_t interval_budget = kDefaultIntervalBudget;
};

class LevelStructure {
 public:
  std::size_t depth() const { return levels_.size() - 1; }
  Placement placement() const { return placement_; }
  Mode mode() const { return mode_; }
  const std::optional<std::uint64_t>& seed() const { return seed_; }
  const PrefixTables& tables() const { return tables_; }

  /// Level k in 0..depth(); level 0 is [0, 1].
  std::span<const Interval> level(std::size_t k) const {
    if (k > depth()) throw ValidationError("level " + std::to_string(k) + " beyond depth " + std::to_string(depth()));
    return levels_[k];
  }

  /// Natural-measure mass 1/N_k of one k-level interval.
  double measure_weight(std::size_t k) const { return 1.0 / static_cast<double>(level(k).size()); }

  double max_length(std::size_t k) const { return max_length_.at(k); }
  double min_length(std::size_t k) const { return min_length_.at(k); }

  /// Nominal delta_k = c_1 ... c_k.
  double nominal_length(std::size_t k) const { return std::exp(tables_.log_delta(k)); }

  /// Wraps raw levels without any checking; meant for negative controls.
  static LevelStructure from_levels(std::vector<std::vector<Interval>> levels, PrefixTables tables,
                                    Placement placement, Mode mode) {
    LevelStructure ls;
    ls.levels_ = std::move(levels);
    ls.tables_ = std::move(tables);
    ls.placement_ = placement;
    ls.mode_ = mode;
    ls.finalize();
    return ls;
  }

 private:
  friend LevelStructure build_levels(const SequenceSpec&, std::size_t, const BuildOptions&);

  void finalize() {
    min_length_.clear();
    max_length_.clear();
    for (const auto& lv : levels_) {
      double lo = lv.empty() ? 0.0 : lv.front().length;
      double hi = lo;
      for (const Interval& iv : lv) {
        lo = std::min(lo, iv.length);
        hi = std::max(hi, iv.length);
      }
      min_length_.push_back(lo);
      max_length_.push_back(hi);
    }
  }

  std::vector<std::vector<Interval>> levels_;
  PrefixTables tables_;
  Placement placement_ = Placement::uniform_gaps;
  Mode mode_ = Mode::moran;
  std::optional<std::uint64_t> seed_;
  std::vector<double> min_length_;
  std::vector<double> max_length_;
};

namespace detail {

inline double unit_draw(std::mt19937_64& gen) {
  return static_cast<double>(gen() >> 11) * 0x1.0p-53;
}

// Places children with the given lengths inside `parent`.
inline void place_children(const Interval& parent, std::span<const double> lengths, Placement placement,
                           std::vector<Interval>& out) {
  const std::size_t n = lengths.size();
  double used = 0.0;
  for (double l : lengths) used += l;
  const double gap = placement == Placement::uniform_gaps && n > 1
                         ? std::max(0.0, (parent.length - used) / static_cast<double>(n - 1))
                         : 0.0;
  double offset = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double left = parent.left + offset;
    if (placement == Placement::uniform_gaps && i + 1 == n && n > 1) {
      left = parent.right() - lengths[i];
    }
    out.push_back({left, lengths[i]});
    offset += lengths[i] + gap;
  }
}

}  // namespace detail

/// Builds levels 0..depth. Deterministic in (spec, depth, options).
inline LevelStructure build_levels(const SequenceSpec& spec, std::size_t depth, const BuildOptions& opt = {}) {
  if (depth < 1) throw ValidationError("realization depth must be >= 1");
  PrefixTables tables = build_prefix_tables(spec, depth);

  // Total interval count, guarded against overflow.
  double total = 1.0;
  for (std::size_t k = 1; k <= depth; ++k) {
    total += std::exp(tables.log_count(k));
    if (total > static_cast<double>(opt.interval_budget)) {
      throw ResourceError("realization to depth " + std::to_string(depth) + " exceeds the interval budget of " +
                          std::to_string(opt.interval_budget) + " intervals");
    }
  }

  for (std::size_t k = 1; k <= depth; ++k) {
    const Term& t = tables.term(k);
    if (opt.mode == Mode::moran) {
      if (t.n * t.c > 1.0)
        throw ConstructionError("n_k c_k > 1 at k = " + std::to_string(k) + ": children do not fit");
    } else {
      if (t.a >= 1.0)
        throw ConstructionError("a_k >= 1 at k = " + std::to_string(k) + ": ratio band reaches zero");
      if (t.n * t.c * (1.0 + t.a) > 1.0)
        throw ConstructionError("n_k c_k (1 + a_k) > 1 at k = " + std::to_string(k) +
                                ": sampled children may overflow the parent");
    }
  }

  LevelStructure ls;
  ls.placement_ = opt.placement;
  ls.mode_ = opt.mode;
  ls.seed_ = opt.seed;
  ls.levels_.resize(depth + 1);
  ls.levels_[0] = {{0.0, 1.0}};

  std::mt19937_64 gen(opt.seed.value_or(0));
  std::vector<double> lengths;
  for (std::size_t k = 1; k <= depth; ++k) {
    const Term& t = tables.term(k);
    const auto& parents = ls.levels_[k - 1];
    auto& children = ls.levels_[k];
    children.reserve(parents.size() * static_cast<std::size_t>(t.n));
    lengths.assign(static_cast<std::size_t>(t.n), 0.0);
    for (const Interval& p : parents) {
      for (auto& l : lengths) {
        double ratio = t.c;
        if (opt.mode == Mode::cantor_like && t.a > 0.0) {
          const double lo = t.c * (1.0 - t.a);
          const double hi = t.c * (1.0 + t.a);
          ratio = lo + (hi - lo) * detail::unit_draw(gen);
        }
        l = p.length * ratio;
      }
      detail::place_children(p, lengths, opt.placement, children);
    }
  }
  ls.tables_ = std::move(tables);
  ls.finalize();
  return ls;
}

/// The stored k-level intervals, 1 <= k <= depth.
inline std::span<const Interval> intervals_at_level(const LevelStructure& ls, std::size_t k) {
  if (k < 1 || k > ls.depth())
    throw ValidationError("level " + std::to_string(k) + " outside 1.." + std::to_string(ls.depth()));
  return ls.level(k);
}

/// Index of the k-level interval containing x, or nullopt when x lies in a
/// gap. Endpoints are inclusive up to 1e-12 of the nominal level length;
/// touching intervals resolve to the right one.
inline std::optional<std::size_t> locate(const LevelStructure& ls, double x, std::size_t k) {
  auto lv = intervals_at_level(ls, k);
  const double tol = 1e-12 * ls.nominal_length(k);
  auto it = std::upper_bound(lv.begin(), lv.end(), x + tol,
                             [](double v, const Interval& iv) { return v < iv.left; });
  if (it == lv.begin()) return std::nullopt;
  --it;
  if (x <= it->right() + tol) return static_cast<std::size_t>(it - lv.begin());
  return std::nullopt;
}

/// Level-k discretization of the natural measure of the closed ball B(x, r):
/// each k-level interval carries mass 1/N_k spread uniformly along it, and the
/// ball collects the covered fraction of each.
inline double natural_measure_ball(const LevelStructure& ls, double x, double r, std::size_t k) {
  if (!(r > 0.0)) throw ValidationError("ball radius must be positive");
  if (!locate(ls, x, k)) throw ValidationError("x lies in a gap of level " + std::to_string(k) + "; use points of E");
  auto lv = intervals_at_level(ls, k);
  const double lo = x - r;
  const double hi = x + r;
  auto first = std::partition_point(lv.begin(), lv.end(), [&](const Interval& iv) { return iv.right() <= lo; });
  auto last = std::partition_point(first, lv.end(), [&](const Interval& iv) { return iv.left < hi; });
  double covered = 0.0;
  for (auto it = first; it != last; ++it) {
    const double inside = std::min(it->right(), hi) - std::max(it->left, lo);
    covered += it == first || it + 1 == last ? std::clamp(inside / it->length, 0.0, 1.0) : 1.0;
  }
  return covered * ls.measure_weight(k);
}

/// Structural findings: counts, nesting, disjoint interiors, ordering, lengths.
/// An empty result means every invariant holds.
inline std::vector<std::string> check_structure(const LevelStructure& ls) {
  std::vector<std::string> findings;
  const auto& tables = ls.tables();
  for (std::size_t k = 1; k <= ls.depth(); ++k) {
    auto parents = ls.level(k - 1);
    auto children = ls.level(k);
    const Term& t = tables.term(k);
    const auto n = static_cast<std::size_t>(t.n);
    const std::string at = " at level " + std::to_string(k);
    if (children.size() != parents.size() * n) {
      findings.push_back("interval count " + std::to_string(children.size()) + " != N_k" + at);
      continue;
    }
    const double nominal = std::exp(tables.log_delta(k));
    for (std::size_t i = 0; i < children.size(); ++i) {
      const Interval& c = children[i];
      const Interval& p = parents[i / n];
      // Relative slack plus a few ulps of the coordinate itself.
      const double tol = 1e-12 * p.length + 4.0 * std::numeric_limits<double>::epsilon();
      if (!(c.length > 0.0)) findings.push_back("non-positive length" + at);
      if (c.left < p.left - tol || c.right() > p.right() + tol)
        findings.push_back("interval " + std::to_string(i) + " escapes its parent" + at);
      if (i > 0 && c.left < children[i - 1].left)
        findings.push_back("intervals out of order at index " + std::to_string(i) + at);
      if (i % n != 0 && c.left < children[i - 1].right() - tol)
        findings.push_back("siblings " + std::to_string(i - 1) + "," + std::to_string(i) + " overlap" + at);
      if (ls.mode() == Mode::moran) {
        if (std::abs(c.length - nominal) > 1e-12 * nominal)
          findings.push_back("length of interval " + std::to_string(i) + " differs from delta_k" + at);
      } else {
        const double ratio = c.length / p.length;
        const double slack = 1e-12 * t.c;
        if (ratio < t.c * (1.0 - t.a) - slack || ratio > t.c * (1.0 + t.a) + slack)
          findings.push_back("ratio of interval " + std::to_string(i) + " outside the band" + at);
      }
      if (findings.size() > 32) return findings;
    }
  }
  return findings;
}

/// CSV with columns level,index,left,length; levels 1..depth.
inline void write_levels_csv(std::ostream& os, const LevelStructure& ls) {
  os << "level,index,left,length\n";
  char buf[96];
  for (std::size_t k = 1; k <= ls.depth(); ++k) {
    auto lv = ls.level(k);
    for (std::size_t i = 0; i < lv.size(); ++i) {
      std::snprintf(buf, sizeof buf, "%zu,%zu,%.17g,%.17g\n", k, i, lv[i].left, lv[i].length);
      os << buf;
    }
  }
}

}  // namespace moran
