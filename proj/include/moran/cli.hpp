#pragma once

// Commands behind the moran_cli binary. Each takes a RunConfig, writes its
// report to the given stream and returns the process exit code:
// 0 pass, 1 domain or validation failure, 2 I/O failure.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <limits>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "moran/construct.hpp"
#include "moran/error.hpp"
#include "moran/estimate.hpp"
#include "moran/formulas.hpp"
#include "moran/io.hpp"
#include "moran/oracle.hpp"
#include "moran/sequences.hpp"

namespace moran::cli {

enum class Format { json, csv };
enum class ModeChoice { automatic, moran, cantor_like };

struct RunConfig {
  std::string command;
  std::string spec_path;
  std::size_t depth = 4096;                // K for the formula paths
  std::optional<std::size_t> realize;      // D for the empirical paths
  Placement placement = Placement::uniform_gaps;
  ModeChoice mode = ModeChoice::automatic;
  std::uint64_t seed = 42;
  std::vector<double> theta_grid;
  std::size_t pair_k_max = 6;
  std::size_t pair_l_max = 6;
  std::size_t samples = 64;
  double tail = 0.5;
  double tolerance = 0.02;
  double empirical_tolerance = 0.05;
  std::optional<std::string> out;
  Format format = Format::json;
  std::size_t jobs = 1;
  bool negative_control = false;
};

inline constexpr int kExitPass = 0;
inline constexpr int kExitFail = 1;
inline constexpr int kExitIo = 2;

/// "a:b:step" -> a, a + step, ..., up to b. Every value must lie in (0, 1).
inline std::vector<double> parse_theta_grid(const std::string& text) {
  double v[3];
  std::size_t pos = 0;
  for (int i = 0; i < 3; ++i) {
    const std::size_t colon = text.find(':', pos);
    if ((i < 2) != (colon != std::string::npos)) throw ValidationError("theta grid must be a:b:step");
    const std::string part = text.substr(pos, i < 2 ? colon - pos : std::string::npos);
    std::size_t used = 0;
    try {
      v[i] = std::stod(part, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != part.size()) throw ValidationError("cannot parse theta grid '" + text + "'");
    pos = colon + 1;
  }
  const auto [a, b, step] = std::tuple{v[0], v[1], v[2]};
  if (!(step > 0.0) || b < a) throw ValidationError("theta grid needs a <= b and step > 0");
  const auto count = static_cast<std::size_t>(std::floor((b - a) / step + 1e-9)) + 1;
  std::vector<double> grid;
  for (std::size_t i = 0; i < count; ++i) grid.push_back(a + static_cast<double>(i) * step);
  check_theta_grid(grid);
  return grid;
}

inline std::vector<double> default_theta_grid() { return parse_theta_grid("0.1:0.9:0.05"); }

namespace detail {

inline Mode resolve_mode(const SequenceSpec& spec, ModeChoice m) {
  if (m == ModeChoice::moran) return Mode::moran;
  if (m == ModeChoice::cantor_like) return Mode::cantor_like;
  if (spec.perturbation()) return Mode::cantor_like;
  for (const auto& t : spec.value_set())
    if (t.a > 0.0) return Mode::cantor_like;
  return Mode::moran;
}

inline BuildOptions build_options(const SequenceSpec& spec, const RunConfig& cfg) {
  BuildOptions opt;
  opt.placement = cfg.placement;
  opt.mode = resolve_mode(spec, cfg.mode);
  opt.seed = cfg.seed;
  return opt;
}

inline std::size_t tail_count(std::size_t n, double fraction) {
  return std::clamp<std::size_t>(static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(n))), 1, n);
}

/// Validation shared by every command; prints violations to `err`.
inline bool validated(const SequenceSpec& spec, std::ostream& err) {
  const auto rep = validate(spec, 1024);
  for (const auto& v : rep.violations)
    err << "violation: " << v.rule << " (k = " << v.k << "): " << v.detail << '\n';
  return rep.ok;
}

inline std::string csv_number(double x) { return io::detail::fmt(x); }

}  // namespace detail

// ---------------------------------------------------------------------------

inline int cmd_validate(const SequenceSpec& spec, const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  const auto rep = validate(spec, cfg.depth);
  for (const auto& v : rep.violations)
    err << "violation: " << v.rule << " (k = " << v.k << "): " << v.detail << '\n';
  if (cfg.format == Format::csv) {
    out << "k,rule,detail\n";
    for (const auto& v : rep.violations) out << v.k << ',' << v.rule << ",\"" << v.detail << "\"\n";
  } else {
    io::Json j{{"command", "validate"}, {"spec", io::spec_to_json(spec)}, {"report", io::to_json(rep)}};
    out << j.dump(2) << '\n';
  }
  return rep.ok ? kExitPass : kExitFail;
}

inline int cmd_dim(const SequenceSpec& spec, const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  if (!detail::validated(spec, err)) return kExitFail;
  if (cfg.depth < 2) throw ValidationError("dim needs --depth >= 2");
  const auto t = build_prefix_tables(spec, cfg.depth);
  const std::size_t l_max = cfg.depth / 2;
  const std::size_t tail = detail::tail_count(l_max, cfg.tail);
  const auto a = assouad_dim_formula(t, l_max, tail);
  const auto lo = lower_dim_bound_formula(t, l_max, tail);
  if (a.boundary_warning) err << "warning: Assouad maximizer lies near the depth boundary; increase --depth\n";

  std::optional<EmpiricalReport> ea;
  std::optional<EmpiricalReport> el;
  if (cfg.realize) {
    const auto ls = build_levels(spec, *cfg.realize, detail::build_options(spec, cfg));
    const auto pairs = pair_grid(cfg.pair_k_max, cfg.pair_l_max);
    ea = empirical_assouad(ls, pairs, cfg.samples, cfg.tail, cfg.jobs);
    el = empirical_lower(ls, pairs, cfg.samples, cfg.tail, cfg.jobs);
  }

  if (cfg.format == Format::csv) {
    out << "quantity,value,spread,upper_bound_only\n";
    for (const auto* e : {&a, &lo})
      out << e->quantity << ',' << detail::csv_number(e->value) << ',' << detail::csv_number(e->spread) << ','
          << (e->upper_bound_only ? "true" : "false") << '\n';
    if (ea) {
      out << "empirical_assouad," << detail::csv_number(ea->value) << ',' << detail::csv_number(ea->spread)
          << ",false\n";
      out << "empirical_lower," << detail::csv_number(el->value) << ',' << detail::csv_number(el->spread)
          << ",true\n";
    }
  } else {
    io::Json j{{"command", "dim"},
               {"spec", io::spec_to_json(spec)},
               {"depth", cfg.depth},
               {"assouad", io::to_json(a)},
               {"lower_bound", io::to_json(lo)}};
    if (ea) {
      j["realization_depth"] = *cfg.realize;
      j["empirical_assouad"] = io::to_json(*ea);
      j["empirical_lower"] = io::to_json(*el);
    }
    out << j.dump(2) << '\n';
  }
  return kExitPass;
}

struct SpectrumRow {
  double theta = 0.0;
  double assouad_formula = 0.0;
  double lower_formula = 0.0;
  double assouad_scalefn = 0.0;
  double lower_scalefn = 0.0;
  std::optional<double> empirical;
  bool flagged = false;
};

inline std::vector<SpectrumRow> spectrum_rows(const SequenceSpec& spec, const RunConfig& cfg) {
  const auto grid = cfg.theta_grid.empty() ? default_theta_grid() : cfg.theta_grid;
  check_theta_grid(grid);
  const auto t = build_prefix_tables(spec, cfg.depth);
  const auto af = spectrum_curve(t, grid, SpectrumKind::assouad, cfg.tail, cfg.jobs);
  const auto lf = spectrum_curve(t, grid, SpectrumKind::lower, cfg.tail, cfg.jobs);
  const auto as = spectrum_curve_scalefn(t, grid, SpectrumKind::assouad, cfg.tail, cfg.jobs);
  const auto ls_ = spectrum_curve_scalefn(t, grid, SpectrumKind::lower, cfg.tail, cfg.jobs);
  std::optional<LevelStructure> real;
  if (cfg.realize) real = build_levels(spec, *cfg.realize, detail::build_options(spec, cfg));

  std::vector<SpectrumRow> rows;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    SpectrumRow r;
    r.theta = grid[i];
    r.assouad_formula = af.points[i].estimate.value;
    r.lower_formula = lf.points[i].estimate.value;
    r.assouad_scalefn = as.points[i].estimate.value;
    r.lower_scalefn = ls_.points[i].estimate.value;
    r.flagged = std::abs(r.assouad_formula - r.assouad_scalefn) > cfg.tolerance ||
                std::abs(r.lower_formula - r.lower_scalefn) > cfg.tolerance;
    if (real) {
      const auto ks = usable_spectrum_levels(*real, grid[i]);
      if (ks.empty()) {
        r.empirical = std::numeric_limits<double>::quiet_NaN();
      } else {
        r.empirical = empirical_spectrum_point(*real, grid[i], ks, cfg.samples, SpectrumKind::assouad, cfg.tail,
                                               cfg.jobs)
                          .value;
        if (!(std::abs(*r.empirical - r.assouad_formula) <= cfg.empirical_tolerance)) r.flagged = true;
      }
    }
    rows.push_back(r);
  }
  return rows;
}

inline int cmd_spectrum(const SequenceSpec& spec, const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  if (!cfg.theta_grid.empty()) check_theta_grid(cfg.theta_grid);
  if (!detail::validated(spec, err)) return kExitFail;
  const auto rows = spectrum_rows(spec, cfg);
  const bool empirical = cfg.realize.has_value();
  std::size_t flagged = 0;
  for (const auto& r : rows) flagged += r.flagged ? 1 : 0;
  if (flagged > 0) err << "note: " << flagged << " theta value(s) flagged\n";

  if (cfg.format == Format::csv) {
    out << "theta,assouad_formula,lower_formula,assouad_scalefn,lower_scalefn";
    if (empirical) out << ",empirical";
    out << ",flagged\n";
    for (const auto& r : rows) {
      out << detail::csv_number(r.theta) << ',' << detail::csv_number(r.assouad_formula) << ','
          << detail::csv_number(r.lower_formula) << ',' << detail::csv_number(r.assouad_scalefn) << ','
          << detail::csv_number(r.lower_scalefn);
      if (empirical) out << ',' << detail::csv_number(*r.empirical);
      out << ',' << (r.flagged ? 1 : 0) << '\n';
    }
  } else {
    io::Json arr = io::Json::array();
    for (const auto& r : rows) {
      io::Json row{{"theta", r.theta},
                   {"assouad_formula", io::detail::number(r.assouad_formula)},
                   {"lower_formula", io::detail::number(r.lower_formula)},
                   {"assouad_scalefn", io::detail::number(r.assouad_scalefn)},
                   {"lower_scalefn", io::detail::number(r.lower_scalefn)}};
      if (empirical) row["empirical"] = io::detail::number(*r.empirical);
      row["flagged"] = r.flagged;
      arr.push_back(row);
    }
    io::Json j{{"command", "spectrum"},
               {"spec", io::spec_to_json(spec)},
               {"depth", cfg.depth},
               {"tolerance", cfg.tolerance},
               {"rows", arr}};
    if (empirical) j["realization_depth"] = *cfg.realize;
    out << j.dump(2) << '\n';
  }
  return kExitPass;
}

// ---------------------------------------------------------------------------
// verify

struct CheckResult {
  std::string name;
  bool ok = true;
  std::vector<std::string> findings;
  io::Json details = io::Json::object();
};

/// Intervals of `level` meeting [lo, hi], clipped to it.
inline std::vector<Interval> clipped_window(std::span<const Interval> level, double lo, double hi) {
  std::vector<Interval> out;
  for (const auto& iv : level) {
    if (iv.right() < lo || iv.left > hi) continue;
    const double a = std::max(iv.left, lo);
    const double b = std::min(iv.right(), hi);
    out.push_back({a, b - a});
  }
  return out;
}

inline CheckResult check_oracle_equivalence(const SequenceSpec& spec, std::size_t depth) {
  CheckResult res;
  res.name = "oracle_equivalence";
  const std::size_t K = std::clamp<std::size_t>(depth, 4, 256);
  const std::size_t l_max = K / 2;
  const auto t = build_prefix_tables(spec, K);
  const auto a = assouad_dim_formula(t, l_max, 1);
  const auto lo = lower_dim_bound_formula(t, l_max, 1);
  const auto o = oracle::dimension_sweep(spec, K, l_max);
  double worst = 0.0;
  auto rel = [](double x, double y) { return std::abs(x - y) / std::max(std::abs(y), 1e-300); };
  for (std::size_t i = 0; i < l_max; ++i) worst = std::max({worst, rel(a.trace[i], o.sup[i]), rel(lo.trace[i], o.inf[i])});
  for (double theta : {0.25, 0.5, 0.75}) {
    const auto w = auto_window(t, theta);
    const auto fa = assouad_spectrum_formula(t, theta, w);
    const auto ot = oracle::spectrum_trace(spec, theta, w.first, w.last, K);
    for (std::size_t i = 0; i < ot.size(); ++i) worst = std::max(worst, rel(fa.trace[i], ot[i]));
    const auto grid = level_log_r_grid(t, w);
    const auto fs = spectrum_via_scale_function(t, theta, grid, SpectrumKind::assouad);
    const auto os = oracle::scalefn_trace(spec, theta, w.first, w.last, K);
    for (std::size_t i = 0; i < os.size(); ++i) worst = std::max(worst, rel(fs.trace[i], os[i]));
  }
  res.details = {{"depth", K}, {"max_relative_difference", worst}};
  if (!(worst <= 1e-10)) {
    res.ok = false;
    res.findings.push_back("formula traces differ from the oracle by " + std::to_string(worst));
  }
  return res;
}

inline CheckResult check_greedy_optimality(const LevelStructure& ls, std::size_t instances, std::uint64_t seed) {
  CheckResult res;
  res.name = "greedy_vs_exhaustive";
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::size_t tested = 0;
  std::size_t attempts = 0;
  while (tested < instances && attempts < 50 * instances) {
    ++attempts;
    const std::size_t level = 1 + gen() % ls.depth();
    const auto lv = ls.level(level);
    const double x = lv[gen() % lv.size()].left;
    const double R = ls.nominal_length(level) * (0.5 + 8.0 * unit(gen));
    const auto ivs = clipped_window(lv, x - R, x + R);
    if (ivs.empty() || ivs.size() > 12) continue;
    const double r = R * (0.02 + 0.6 * unit(gen));
    const long long g = greedy_cover_count(lv, x - R, x + R, r);
    const long long e = oracle::min_cover_exhaustive(ivs, r);
    ++tested;
    if (g != e && res.findings.size() < 16) {
      char buf[160];
      std::snprintf(buf, sizeof buf, "greedy %lld != exhaustive %lld at x=%.17g R=%.17g r=%.17g level=%zu", g, e, x,
                    R, r, level);
      res.findings.emplace_back(buf);
    }
  }
  res.ok = res.findings.empty() && tested > 0;
  if (tested == 0) res.findings.push_back("no covering instance with <= 12 intervals found");
  res.details = {{"instances", tested}};
  return res;
}

inline CheckResult check_counting(const LevelStructure& ls, std::size_t samples) {
  CheckResult res;
  res.name = "counting_lemmas";
  io::Json reps = io::Json::array();
  std::size_t pairs = 0;
  for (std::size_t k = 1; k <= 5; ++k) {
    for (std::size_t l = 1; l <= 5; ++l) {
      if (k + l + 1 > ls.depth()) continue;
      const auto rep = check_counting_lemmas(ls, k, l, samples);
      ++pairs;
      reps.push_back(io::to_json(rep));
      for (const auto& v : rep.violations) {
        res.ok = false;
        if (res.findings.size() < 32) res.findings.push_back(v);
      }
    }
  }
  if (pairs == 0) {
    res.ok = false;
    res.findings.push_back("realization too shallow for counting checks (need depth >= 3)");
  }
  res.details = {{"pairs", pairs}, {"reports", reps}};
  return res;
}

inline CheckResult check_measure(const LevelStructure& ls, std::size_t samples) {
  CheckResult res;
  res.name = "measure_properties";
  std::vector<double> radii;
  for (std::size_t m = 1; m <= ls.depth(); ++m) radii.push_back(ls.nominal_length(m));
  const auto rep = check_measure_properties(ls, radii, samples, 0.25);
  res.findings = rep.findings;
  res.ok = rep.findings.empty();
  res.details = io::to_json(rep);
  return res;
}

/// Moves the second child of the first level-2 parent onto its left sibling,
/// so siblings overlap and the counting bounds see a doubled interval.
inline LevelStructure corrupt(const LevelStructure& ls) {
  std::vector<std::vector<Interval>> levels;
  for (std::size_t k = 0; k <= ls.depth(); ++k) {
    auto lv = ls.level(k);
    levels.emplace_back(lv.begin(), lv.end());
  }
  const std::size_t k = std::min<std::size_t>(2, ls.depth());
  if (levels[k].size() >= 2) levels[k][1].left = levels[k][0].left;
  return LevelStructure::from_levels(std::move(levels), ls.tables(), ls.placement(), ls.mode());
}

inline int cmd_verify(const SequenceSpec& spec, const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  if (!detail::validated(spec, err)) return kExitFail;
  const std::size_t D = cfg.realize.value_or(12);
  const std::size_t samples = std::max<std::size_t>(cfg.samples, 1);
  auto ls = build_levels(spec, D, detail::build_options(spec, cfg));
  if (cfg.negative_control) ls = corrupt(ls);

  std::vector<CheckResult> checks;
  {
    CheckResult s;
    s.name = "structure";
    s.findings = check_structure(ls);
    s.ok = s.findings.empty();
    checks.push_back(std::move(s));
  }
  checks.push_back(check_oracle_equivalence(spec, cfg.depth));
  checks.push_back(check_greedy_optimality(ls, 200, cfg.seed));
  checks.push_back(check_counting(ls, samples));
  checks.push_back(check_measure(ls, samples));

  bool ok = true;
  io::Json arr = io::Json::array();
  io::Json findings = io::Json::array();
  for (const auto& c : checks) {
    ok = ok && c.ok;
    arr.push_back({{"name", c.name}, {"ok", c.ok}, {"findings", c.findings}, {"details", c.details}});
    for (const auto& f : c.findings) {
      findings.push_back({{"check", c.name}, {"finding", f}});
      err << c.name << ": " << f << '\n';
    }
  }
  if (cfg.format == Format::csv) {
    out << "check,ok,findings\n";
    for (const auto& c : checks) out << c.name << ',' << (c.ok ? "true" : "false") << ',' << c.findings.size() << '\n';
  } else {
    io::Json j{{"command", "verify"},
               {"spec", io::spec_to_json(spec)},
               {"realization_depth", D},
               {"negative_control", cfg.negative_control},
               {"ok", ok},
               {"checks", arr},
               {"findings", findings}};
    out << j.dump(2) << '\n';
  }
  return ok ? kExitPass : kExitFail;
}

inline int cmd_levels(const SequenceSpec& spec, const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  if (!detail::validated(spec, err)) return kExitFail;
  const auto ls = build_levels(spec, cfg.realize.value_or(6), detail::build_options(spec, cfg));
  write_levels_csv(out, ls);
  return kExitPass;
}

// ---------------------------------------------------------------------------

/// Loads the spec, runs the command and maps errors to exit codes. Output
/// goes to cfg.out when set, otherwise to `out`.
inline int run(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  try {
    const auto spec = io::load_spec(cfg.spec_path);
    std::ostringstream buf;
    int code = kExitFail;
    if (cfg.command == "validate")
      code = cmd_validate(spec, cfg, buf, err);
    else if (cfg.command == "dim")
      code = cmd_dim(spec, cfg, buf, err);
    else if (cfg.command == "spectrum")
      code = cmd_spectrum(spec, cfg, buf, err);
    else if (cfg.command == "verify")
      code = cmd_verify(spec, cfg, buf, err);
    else if (cfg.command == "levels")
      code = cmd_levels(spec, cfg, buf, err);
    else
      throw ValidationError("unknown command '" + cfg.command + "'");
    if (cfg.out) {
      std::ofstream f(*cfg.out, std::ios::binary);
      if (!f) throw IoError("cannot write '" + *cfg.out + "'");
      f << buf.str();
      if (!f) throw IoError("write to '" + *cfg.out + "' failed");
    } else {
      out << buf.str();
    }
    return code;
  } catch (const IoError& e) {
    err << "error: " << e.what() << '\n';
    return kExitIo;
  } catch (const DepthError& e) {
    err << "error: " << e.what();
    if (e.required_depth() > 0) err << " (required depth " << e.required_depth() << ")";
    err << '\n';
    return kExitFail;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kExitFail;
  }
}

}  // namespace moran::cli
