#pragma once

// Sequences {n_k}, {c_k}, {a_k} that define a homogeneous Moran set or a
// Cantor-like set, their validation, and logarithmic prefix tables.
//
// Four finitely describable kinds are supported so that sup n_k and
// inf c_k are decidable from the description alone:
//
//   constant            one triple (n, c, a) for every k
//   periodic            a finite list repeated cyclically
//   explicit_with_tail  a finite list for k <= K0, then one tail triple
//   block_rule          regimes selected by geometric block families:
//                       k belongs to family (b, s, e) iff s*b^j <= k < e*b^j
//                       for some j >= 0; the first matching family wins,
//                       otherwise the default regime applies
//
// An optional geometric perturbation a_k = scale * ratio^k overrides the
// per-triple a values; it is the usual way to describe a summable {a_k}.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "moran/error.hpp"

namespace moran {

/// One level of the construction: n_k children, ratio c_k, band half-width a_k.
struct Term {
  int n = 2;
  double c = 0.5;
  double a = 0.0;

  friend bool operator==(const Term&, const Term&) = default;
};

enum class SpecKind { constant, periodic, explicit_with_tail, block_rule };

inline const char* to_string(SpecKind kind) {
  switch (kind) {
    case SpecKind::constant: return "constant";
    case SpecKind::periodic: return "periodic";
    case SpecKind::explicit_with_tail: return "explicit_with_tail";
    case SpecKind::block_rule: return "block_rule";
  }
  return "unknown";
}

/// k selects `regime` iff start * base^j <= k < end * base^j for some j >= 0.
struct BlockFamily {
  std::uint64_t base = 2;
  std::uint64_t start = 1;
  std::uint64_t end = 2;
  std::size_t regime = 0;

  bool contains(std::uint64_t k) const {
    std::uint64_t lo = start;
    std::uint64_t hi = end;
    constexpr auto kMax = std::numeric_limits<std::uint64_t>::max();
    while (lo <= k) {
      if (k < hi) return true;
      if (lo > kMax / base) return false;
      lo *= base;
      hi = hi > kMax / base ? kMax : hi * base;
    }
    return false;
  }
};

/// a_k = scale * ratio^k.
struct Perturbation {
  double scale = 0.0;
  double ratio = 0.0;

  double at(std::size_t k) const { return scale * std::pow(ratio, static_cast<double>(k)); }
};

struct ClassFlags {
  bool moran = false;
  bool cantor_like = false;
};

class SequenceSpec {
 public:
  static SequenceSpec constant(Term term) {
    SequenceSpec s(SpecKind::constant);
    s.values_ = {term};
    return s;
  }

  static SequenceSpec periodic(std::vector<Term> period) {
    if (period.empty()) throw ValidationError("periodic spec needs at least one term");
    SequenceSpec s(SpecKind::periodic);
    s.values_ = std::move(period);
    return s;
  }

  static SequenceSpec explicit_with_tail(std::vector<Term> prefix, Term tail) {
    SequenceSpec s(SpecKind::explicit_with_tail);
    s.values_ = std::move(prefix);
    s.tail_ = tail;
    return s;
  }

  /// `regimes[default_regime]` applies wherever no family matches.
  static SequenceSpec block_rule(std::vector<Term> regimes, std::vector<BlockFamily> families,
                                 std::size_t default_regime = 0) {
    if (regimes.empty()) throw ValidationError("block-rule spec needs at least one regime");
    if (default_regime >= regimes.size())
      throw ValidationError("block-rule default regime index out of range");
    for (const auto& f : families) {
      if (f.base < 2) throw ValidationError("block family base must be >= 2");
      if (f.start < 1 || f.end <= f.start)
        throw ValidationError("block family needs 1 <= start < end");
      if (f.regime >= regimes.size()) throw ValidationError("block family regime index out of range");
    }
    SequenceSpec s(SpecKind::block_rule);
    s.values_ = std::move(regimes);
    s.families_ = std::move(families);
    s.default_regime_ = default_regime;
    return s;
  }

  SequenceSpec& with_flags(ClassFlags flags) {
    flags_ = flags;
    return *this;
  }

  SequenceSpec& with_perturbation(Perturbation p) {
    if (!(p.scale >= 0.0) || !(p.ratio >= 0.0) || !(p.ratio < 1.0))
      throw ValidationError("perturbation needs scale >= 0 and 0 <= ratio < 1");
    perturbation_ = p;
    return *this;
  }

  SequenceSpec& with_name(std::string name) {
    name_ = std::move(name);
    return *this;
  }

  SpecKind kind() const { return kind_; }
  const ClassFlags& flags() const { return flags_; }
  const std::string& name() const { return name_; }
  const std::vector<Term>& values() const { return values_; }
  const std::optional<Term>& tail() const { return tail_; }
  const std::vector<BlockFamily>& families() const { return families_; }
  std::size_t default_regime() const { return default_regime_; }
  const std::optional<Perturbation>& perturbation() const { return perturbation_; }

  /// The k-th triple, k >= 1.
  Term at(std::size_t k) const {
    if (k == 0) throw ValidationError("sequence index k must be >= 1");
    Term t = raw_at(k);
    if (perturbation_) t.a = perturbation_->at(k);
    return t;
  }

  /// Every distinct triple the rule can produce (a values as written).
  std::vector<Term> value_set() const {
    std::vector<Term> out = values_;
    if (tail_) out.push_back(*tail_);
    return out;
  }

 private:
  explicit SequenceSpec(SpecKind kind) : kind_(kind) {}

  Term raw_at(std::size_t k) const {
    switch (kind_) {
      case SpecKind::constant: return values_.front();
      case SpecKind::periodic: return values_[(k - 1) % values_.size()];
      case SpecKind::explicit_with_tail: return k <= values_.size() ? values_[k - 1] : *tail_;
      case SpecKind::block_rule:
        for (const auto& f : families_)
          if (f.contains(k)) return values_[f.regime];
        return values_[default_regime_];
    }
    throw ValidationError("unknown spec kind");
  }

  SpecKind kind_;
  std::string name_;
  std::vector<Term> values_;
  std::optional<Term> tail_;
  std::vector<BlockFamily> families_;
  std::size_t default_regime_ = 0;
  std::optional<Perturbation> perturbation_;
  ClassFlags flags_;
};

inline Term eval_sequence(const SequenceSpec& spec, std::size_t k) { return spec.at(k); }

// ---------------------------------------------------------------------------
// Validation

struct Violation {
  std::size_t k = 0;  // first offending level; 0 if only found in the value set
  std::string rule;
  std::string detail;
};

struct ValidationReport {
  bool ok = true;
  std::vector<Violation> violations;
  int max_n = 0;           // M = sup n_k
  double inf_c = 1.0;      // c_* = inf c_k
  double sup_a = 0.0;
  double a_series = 0.0;   // sum of a_k; +inf when not summable
  std::size_t probe_depth = 0;
};

namespace detail {

inline std::string term_string(const Term& t) {
  std::ostringstream os;
  os << "(n=" << t.n << ", c=" << t.c << ", a=" << t.a << ")";
  return os.str();
}

// Rules that hold per level; `flags` selects which class preconditions apply.
inline std::optional<std::pair<std::string, std::string>> term_violation(const Term& t,
                                                                         const ClassFlags& flags) {
  if (t.n < 2) return std::pair{std::string("n_k >= 2"), "n_k = " + std::to_string(t.n)};
  if (!(t.c > 0.0 && t.c < 1.0))
    return std::pair{std::string("0 < c_k < 1"), "c_k = " + term_string(t)};
  if (!(t.a >= 0.0)) return std::pair{std::string("a_k >= 0"), "a_k = " + term_string(t)};
  if (flags.moran && !(t.n * t.c < 1.0))
    return std::pair{std::string("n_k c_k < 1"), "n_k c_k = " + std::to_string(t.n * t.c)};
  return std::nullopt;
}

inline constexpr std::size_t kValidationScanLimit = std::size_t{1} << 20;

}  // namespace detail

/// Checks every invariant up to `probe_depth`, and exactly over the value set.
inline ValidationReport validate(const SequenceSpec& spec, std::size_t probe_depth) {
  if (probe_depth < 1) throw ValidationError("probe_depth must be >= 1");
  ValidationReport rep;
  rep.probe_depth = probe_depth;
  const auto& flags = spec.flags();

  auto seen_rule = [&](const std::string& rule) {
    return std::any_of(rep.violations.begin(), rep.violations.end(),
                       [&](const Violation& v) { return v.rule == rule; });
  };

  for (std::size_t k = 1; k <= probe_depth; ++k) {
    if (auto v = detail::term_violation(spec.at(k), flags); v && !seen_rule(v->first))
      rep.violations.push_back({k, v->first, v->second});
  }

  // Exact pass: any offending value of the finite value set is located by
  // scanning forward from the probe depth.
  for (const Term& t : spec.value_set()) {
    Term probe = t;
    if (spec.perturbation()) probe.a = 0.0;
    auto v = detail::term_violation(probe, flags);
    if (!v || seen_rule(v->first)) continue;
    std::size_t where = 0;
    for (std::size_t k = probe_depth + 1; k <= detail::kValidationScanLimit; ++k) {
      Term at = spec.at(k);
      if (at.n == t.n && at.c == t.c) {
        where = k;
        break;
      }
    }
    rep.violations.push_back({where, v->first, v->second + " in value set " + detail::term_string(t)});
  }

  const auto values = spec.value_set();
  for (const Term& t : values) {
    rep.max_n = std::max(rep.max_n, t.n);
    rep.inf_c = std::min(rep.inf_c, t.c);
  }

  // Summability of {a_k}: only finitely many nonzero terms, or the
  // geometric perturbation.
  if (const auto& p = spec.perturbation()) {
    rep.sup_a = p->scale * p->ratio;
    rep.a_series = p->ratio > 0.0 ? p->scale * p->ratio / (1.0 - p->ratio) : 0.0;
  } else {
    std::vector<Term> recurring;
    double finite_part = 0.0;
    switch (spec.kind()) {
      case SpecKind::explicit_with_tail:
        for (const Term& t : spec.values()) finite_part += t.a;
        recurring = {*spec.tail()};
        break;
      default:
        recurring = spec.values();
        break;
    }
    for (const Term& t : values) rep.sup_a = std::max(rep.sup_a, t.a);
    const bool summable = std::all_of(recurring.begin(), recurring.end(),
                                      [](const Term& t) { return t.a == 0.0; });
    rep.a_series = summable ? finite_part : std::numeric_limits<double>::infinity();
  }

  if (flags.cantor_like) {
    if (!(rep.inf_c > 0.0) && !seen_rule("0 < c_k < 1"))
      rep.violations.push_back({0, "inf c_k > 0", "c_* = " + std::to_string(rep.inf_c)});
    if (!std::isfinite(rep.a_series)) {
      std::size_t where = 0;
      const std::size_t from = spec.kind() == SpecKind::explicit_with_tail ? spec.values().size() + 1 : 1;
      for (std::size_t k = from; k <= from + detail::kValidationScanLimit; ++k) {
        if (spec.at(k).a > 0.0) {
          where = k;
          break;
        }
      }
      rep.violations.push_back({where, "sum a_k < inf", "a_k does not vanish on a recurring term"});
    }
  }

  std::stable_sort(rep.violations.begin(), rep.violations.end(),
                   [](const Violation& x, const Violation& y) {
                     auto key = [](const Violation& v) { return v.k == 0 ? SIZE_MAX : v.k; };
                     return key(x) < key(y);
                   });
  rep.ok = rep.violations.empty();
  return rep;
}

// ---------------------------------------------------------------------------
// Prefix tables

/// Cumulative log n_i and log c_i, i = 1..k, for k = 0..K.
class PrefixTables {
 public:
  std::size_t depth() const { return terms_.size(); }

  /// log N_k.
  double log_count(std::size_t k) const { return log_count_.at(k); }
  /// log delta_k.
  double log_delta(std::size_t k) const { return log_delta_.at(k); }

  std::span<const double> log_counts() const { return log_count_; }
  std::span<const double> log_deltas() const { return log_delta_; }

  /// The k-th triple, 1 <= k <= depth().
  const Term& term(std::size_t k) const {
    if (k == 0 || k > terms_.size()) throw ValidationError("term index out of table range");
    return terms_[k - 1];
  }

  /// sup of c_k over the tabulated levels.
  double sup_c() const { return sup_c_; }

 private:
  friend PrefixTables build_prefix_tables(const SequenceSpec&, std::size_t);

  std::vector<Term> terms_;
  std::vector<double> log_count_;
  std::vector<double> log_delta_;
  double sup_c_ = 0.0;
};

namespace detail {

// Neumaier-compensated running sum.
struct CompensatedSum {
  double sum = 0.0;
  double carry = 0.0;

  void add(double x) {
    const double t = sum + x;
    if (std::abs(sum) >= std::abs(x))
      carry += (sum - t) + x;
    else
      carry += (x - t) + sum;
    sum = t;
  }
  double value() const { return sum + carry; }
};

}  // namespace detail

inline PrefixTables build_prefix_tables(const SequenceSpec& spec, std::size_t depth) {
  if (depth < 1) throw ValidationError("prefix table depth must be >= 1");
  PrefixTables t;
  t.terms_.reserve(depth);
  t.log_count_.assign(depth + 1, 0.0);
  t.log_delta_.assign(depth + 1, 0.0);
  detail::CompensatedSum count;
  detail::CompensatedSum delta;
  for (std::size_t k = 1; k <= depth; ++k) {
    const Term term = spec.at(k);
    if (term.n < 2 || !(term.c > 0.0 && term.c < 1.0)) {
      throw ValidationError("spec violates n_k >= 2 or 0 < c_k < 1 at k = " + std::to_string(k));
    }
    t.terms_.push_back(term);
    t.sup_c_ = std::max(t.sup_c_, term.c);
    count.add(std::log(static_cast<double>(term.n)));
    delta.add(std::log(term.c));
    t.log_count_[k] = count.value();
    t.log_delta_[k] = delta.value();
  }
  return t;
}

}  // namespace moran
