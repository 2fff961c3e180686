#pragma once

// JSON and CSV forms of specs and reports. Spec files follow the schema in
// README.md; non-finite numbers are written as null.

#include <charconv>
#include <cstdint>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "moran/construct.hpp"
#include "moran/error.hpp"
#include "moran/estimate.hpp"
#include "moran/formulas.hpp"
#include "moran/sequences.hpp"

namespace moran::io {

using Json = nlohmann::ordered_json;

namespace detail {

inline Json number(double x) { return std::isfinite(x) ? Json(x) : Json(nullptr); }

inline std::string fmt(double x) {
  if (!std::isfinite(x)) return std::isnan(x) ? "nan" : (x > 0 ? "inf" : "-inf");
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

inline double parse_ratio(const Json& j, const char* field) {
  if (j.is_number()) return j.get<double>();
  if (!j.is_string()) throw ValidationError(std::string("field '") + field + "' must be a number or \"p/q\"");
  const auto s = j.get<std::string>();
  const auto slash = s.find('/');
  auto to_double = [&](std::string_view part) {
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(part.data(), part.data() + part.size(), v);
    if (ec != std::errc() || ptr != part.data() + part.size())
      throw ValidationError(std::string("cannot parse '") + s + "' in field '" + field + "'");
    return v;
  };
  const std::string_view sv(s);
  if (slash == std::string::npos) return to_double(sv);
  const double q = to_double(sv.substr(slash + 1));
  if (q == 0.0) throw ValidationError(std::string("zero denominator in field '") + field + "'");
  return to_double(sv.substr(0, slash)) / q;
}

inline Term parse_term(const Json& j) {
  if (!j.is_object()) throw ValidationError("each value must be an object {n, c, a}");
  Term t;
  if (!j.contains("n") || !j.contains("c")) throw ValidationError("each value needs fields n and c");
  if (!j["n"].is_number_integer()) throw ValidationError("field 'n' must be an integer");
  t.n = j["n"].get<int>();
  t.c = parse_ratio(j["c"], "c");
  t.a = j.contains("a") ? parse_ratio(j["a"], "a") : 0.0;
  return t;
}

inline Json term_json(const Term& t) { return Json{{"n", t.n}, {"c", number(t.c)}, {"a", number(t.a)}}; }

}  // namespace detail

// ---------------------------------------------------------------------------
// Specs

/// Builds a spec from a parsed document. Structural problems (unknown kind,
/// missing fields, bad indices) raise ValidationError; value ranges such as
/// n_k >= 2 are left to validate().
inline SequenceSpec spec_from_json(const Json& j) {
  if (!j.is_object()) throw ValidationError("spec document must be a JSON object");
  if (!j.contains("kind") || !j["kind"].is_string()) throw ValidationError("spec needs a string field 'kind'");
  const auto kind = j["kind"].get<std::string>();
  std::vector<Term> values;
  if (j.contains("values")) {
    if (!j["values"].is_array()) throw ValidationError("field 'values' must be an array");
    for (const auto& v : j["values"]) values.push_back(detail::parse_term(v));
  }
  auto need_values = [&] {
    if (values.empty()) throw ValidationError("spec kind '" + kind + "' needs a non-empty 'values' array");
  };

  std::optional<SequenceSpec> spec;
  try {
    if (kind == "constant") {
      need_values();
      if (values.size() != 1) throw ValidationError("constant spec takes exactly one value");
      spec = SequenceSpec::constant(values.front());
    } else if (kind == "periodic") {
      need_values();
      spec = SequenceSpec::periodic(values);
    } else if (kind == "explicit_with_tail") {
      if (!j.contains("tail")) throw ValidationError("explicit_with_tail spec needs a 'tail' value");
      spec = SequenceSpec::explicit_with_tail(values, detail::parse_term(j["tail"]));
    } else if (kind == "block_rule") {
      need_values();
      std::vector<BlockFamily> families;
      if (j.contains("blocks")) {
        if (!j["blocks"].is_array()) throw ValidationError("field 'blocks' must be an array");
        for (const auto& b : j["blocks"]) {
          BlockFamily f;
          f.base = b.at("base").get<std::uint64_t>();
          f.start = b.at("start").get<std::uint64_t>();
          f.end = b.at("end").get<std::uint64_t>();
          f.regime = b.at("regime").get<std::size_t>();
          families.push_back(f);
        }
      }
      spec = SequenceSpec::block_rule(values, families, j.value("default_regime", std::size_t{0}));
    } else {
      throw ValidationError("unknown spec kind '" + kind + "'");
    }

    if (j.contains("perturbation")) {
      const auto& p = j["perturbation"];
      spec->with_perturbation({detail::parse_ratio(p.at("scale"), "scale"), detail::parse_ratio(p.at("ratio"), "ratio")});
    }
    ClassFlags flags;
    if (j.contains("class_flags")) {
      flags.moran = j["class_flags"].value("moran", false);
      flags.cantor_like = j["class_flags"].value("cantor_like", false);
    }
    spec->with_flags(flags);
    spec->with_name(j.value("name", std::string{}));
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed spec: ") + e.what());
  }
  return *spec;
}

inline Json spec_to_json(const SequenceSpec& s) {
  Json j;
  j["name"] = s.name();
  j["kind"] = to_string(s.kind());
  Json values = Json::array();
  for (const auto& t : s.values()) values.push_back(detail::term_json(t));
  j["values"] = values;
  if (s.tail()) j["tail"] = detail::term_json(*s.tail());
  if (s.kind() == SpecKind::block_rule) {
    Json blocks = Json::array();
    for (const auto& f : s.families())
      blocks.push_back({{"base", f.base}, {"start", f.start}, {"end", f.end}, {"regime", f.regime}});
    j["blocks"] = blocks;
    j["default_regime"] = s.default_regime();
  }
  if (s.perturbation()) j["perturbation"] = {{"scale", s.perturbation()->scale}, {"ratio", s.perturbation()->ratio}};
  j["class_flags"] = {{"moran", s.flags().moran}, {"cantor_like", s.flags().cantor_like}};
  return j;
}

/// Unreadable files and JSON syntax errors raise IoError.
inline Json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "'");
  try {
    return Json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw IoError("cannot parse '" + path + "': " + e.what());
  }
}

inline SequenceSpec load_spec(const std::string& path) { return spec_from_json(read_json_file(path)); }

// ---------------------------------------------------------------------------
// Reports

inline Json to_json(const ValidationReport& r) {
  Json v = Json::array();
  for (const auto& x : r.violations) v.push_back({{"k", x.k}, {"rule", x.rule}, {"detail", x.detail}});
  return {{"ok", r.ok},          {"violations", v},        {"max_n", r.max_n},
          {"inf_c", r.inf_c},    {"sup_a", detail::number(r.sup_a)}, {"a_series", detail::number(r.a_series)},
          {"probe_depth", r.probe_depth}};
}

inline Json to_json(const DimensionEstimate& e) {
  Json trace = Json::array();
  for (double x : e.trace) trace.push_back(detail::number(x));
  Json j{{"quantity", e.quantity},
         {"value", detail::number(e.value)},
         {"spread", detail::number(e.spread)},
         {"upper_bound_only", e.upper_bound_only},
         {"tail_window", {e.tail_first(), e.tail_last()}},
         {"value_index", e.index.empty() ? 0 : e.index[e.value_position]},
         {"index", e.index},
         {"trace", trace}};
  if (!e.extremal_k.empty()) {
    j["extremal_k"] = e.extremal_k;
    j["boundary_warning"] = e.boundary_warning;
  }
  return j;
}

inline Json to_json(const SpectrumCurve& c) {
  Json pts = Json::array();
  for (const auto& p : c.points) pts.push_back({{"theta", p.theta}, {"estimate", to_json(p.estimate)}});
  return {{"kind", to_string(c.kind)}, {"monotonicity", to_string(c.monotonicity)}, {"points", pts}};
}

inline Json to_json(const Witness& w) {
  return {{"x", w.x}, {"R", w.R}, {"r", w.r}, {"k", w.k}, {"l", w.l}, {"count", w.count},
          {"exponent", detail::number(w.exponent)}};
}

inline Json to_json(const EmpiricalReport& r) {
  Json trace = Json::array();
  for (double x : r.trace) trace.push_back(detail::number(x));
  Json tw = Json::array();
  for (const auto& w : r.trace_witness) tw.push_back(to_json(w));
  Json j{{"kind", r.kind}, {"value", detail::number(r.value)}};
  if (r.kind.find("spectrum") != std::string::npos) j["theta"] = r.theta;
  j["witness"] = to_json(r.witness);
  j["index"] = r.index;
  j["trace"] = trace;
  j["trace_witness"] = tw;
  j["tail_begin"] = r.tail_begin;
  j["spread"] = detail::number(r.spread);
  j["evaluations"] = r.evaluations;
  j["samples"] = r.samples;
  j["depth"] = r.depth;
  j["note"] = r.note;
  return j;
}

inline Json to_json(const CountingLemmaReport& r) {
  return {{"k", r.k},
          {"l", r.l},
          {"samples", r.samples},
          {"min_contained_big", r.min_contained_big},
          {"max_met_small", r.max_met_small},
          {"max_met_parent", r.max_met_parent},
          {"min_contained_small", r.min_contained_small},
          {"violations", r.violations}};
}

inline Json to_json(const MeasureReport& r) {
  Json radii = Json::array();
  for (double x : r.radii_used) radii.push_back(x);
  return {{"depth", r.depth},
          {"a", r.a},
          {"lambda", detail::number(r.lambda)},
          {"alpha", detail::number(r.alpha)},
          {"beta", detail::number(r.beta)},
          {"c", detail::number(r.c)},
          {"radii_used", radii},
          {"radii_skipped", r.radii_skipped},
          {"samples", r.samples},
          {"findings", r.findings}};
}

// ---------------------------------------------------------------------------
// CSV

/// theta,value,spread
inline void write_curve_csv(std::ostream& os, const SpectrumCurve& c) {
  os << "theta,value,spread\n";
  for (const auto& p : c.points)
    os << detail::fmt(p.theta) << ',' << detail::fmt(p.estimate.value) << ',' << detail::fmt(p.estimate.spread)
       << '\n';
}

struct SweepRow {
  double theta = 0.0;
  double empirical = 0.0;
  double formula = 0.0;
};

/// theta,empirical,formula,abs_diff
inline void write_sweep_csv(std::ostream& os, const std::vector<SweepRow>& rows) {
  os << "theta,empirical,formula,abs_diff\n";
  for (const auto& r : rows)
    os << detail::fmt(r.theta) << ',' << detail::fmt(r.empirical) << ',' << detail::fmt(r.formula) << ','
       << detail::fmt(std::abs(r.empirical - r.formula)) << '\n';
}

}  // namespace moran::io
