#include <catch_amalgamated.hpp>

#include <cmath>
#include <random>
#include <vector>

#include "moran/estimate.hpp"
#include "moran/oracle.hpp"

using namespace moran;
using Catch::Approx;

namespace {

const double kLog2Log3 = std::log(2.0) / std::log(3.0);
const SequenceSpec kMiddleThird = SequenceSpec::constant({2, 1.0 / 3.0, 0.0});

SequenceSpec dyadic_block() {
  return SequenceSpec::block_rule({{2, 0.25, 0.0}, {3, 0.25, 0.0}}, {{4, 1, 2, 1}});
}

std::vector<Interval> clip(std::span<const Interval> lv, double lo, double hi) {
  std::vector<Interval> out;
  for (const auto& iv : lv) {
    if (iv.right() < lo || iv.left > hi) continue;
    const double a = std::max(iv.left, lo);
    out.push_back({a, std::min(iv.right(), hi) - a});
  }
  return out;
}

}  // namespace

TEST_CASE("covering numbers on the middle-third set", "[estimate]") {
  const auto ls = build_levels(kMiddleThird, 6);
  CHECK(covering_number(ls, 0.0, 1.0 / 3.0, 1.0 / 27.0, 3) == 4);
  CHECK(covering_number(ls, 0.0, 1.0 / 3.0, 1.0 / 9.0, 3) == 2);
  CHECK(covering_number(ls, 0.0, 2.0, 0.5, 3) == 1);
  CHECK(covering_number(ls, 0.0, 1.0 / 3.0, 1.0 / 27.0, 6) == 4);
  CHECK(two_scale_exponent(ls, 0.0, 1.0 / 3.0, 1.0 / 27.0, 3) == Approx(kLog2Log3).epsilon(1e-14));
  CHECK(two_scale_exponent(ls, 0.0, 2.0, 0.5, 3) == 0.0);

  // Exhaustive oracle on the same clipped window.
  const auto ivs = clip(ls.level(3), -1.0 / 3.0, 1.0 / 3.0);
  CHECK(ivs.size() == 4);
  CHECK(oracle::min_cover_exhaustive(ivs, 1.0 / 27.0) == 4);
}

TEST_CASE("covering number errors", "[estimate][errors]") {
  const auto ls = build_levels(kMiddleThird, 4);
  CHECK_THROWS_AS(covering_number(ls, 0.0, 0.1, 0.1, 4), ValidationError);
  CHECK_THROWS_AS(covering_number(ls, 0.0, 0.1, 0.2, 4), ValidationError);
  CHECK_THROWS_AS(covering_number(ls, 0.0, 0.1, 0.0, 4), ValidationError);
  CHECK_THROWS_AS(covering_number(ls, 0.0, 1.0 / 3.0, 1.0 / 81.0, 3), DepthError);
  CHECK_THROWS_AS(covering_number(ls, 0.5, 0.3, 0.1, 4), ValidationError);
  CHECK_THROWS_AS(covering_number(ls, 0.0, 0.3, 0.1, 5), ValidationError);
}

TEST_CASE("covering number bounded by the interval count of the ball", "[estimate][property]") {
  const auto ls = build_levels(kMiddleThird, 10);
  std::mt19937_64 gen(1);
  const auto xs = sample_points(ls, 64);
  for (double x : xs) {
    for (int q = 0; q < 10; ++q) {
      const double R = std::pow(3.0, -1.0 - static_cast<double>(gen() % 5));
      const double r = R * std::pow(3.0, -1.0 - static_cast<double>(gen() % 4));
      const long long n = covering_number(ls, x, R, r, 10);
      CHECK(n >= 1);
      CHECK(n <= static_cast<long long>(std::ceil(R / r)) + 1);
    }
  }
}

TEST_CASE("greedy covering equals the exhaustive minimum", "[estimate][property]") {
  std::mt19937_64 gen(2024);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int inst = 0; inst < 300; ++inst) {
    const std::size_t n = 1 + gen() % 12;
    std::vector<Interval> ivs;
    double pos = u(gen);
    for (std::size_t i = 0; i < n; ++i) {
      const double len = 0.2 * u(gen) * u(gen);
      ivs.push_back({pos, len});
      pos += len + (gen() % 4 == 0 ? 0.0 : 0.3 * u(gen));
    }
    const double r = 0.02 + 0.3 * u(gen);
    CHECK(greedy_cover_count(ivs, r) == oracle::min_cover_exhaustive(ivs, r));
  }
}

TEST_CASE("covering number monotone in r and R", "[estimate][property]") {
  const auto ls = build_levels(dyadic_block(), 9);
  const auto xs = sample_points(ls, 40);
  std::mt19937_64 gen(4);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double finest = ls.max_length(9);
  for (double x : xs) {
    for (int q = 0; q < 10; ++q) {
      const double r1 = finest * (1.0 + 200.0 * u(gen));
      const double r2 = r1 * (1.0 + u(gen));
      const double R1 = r2 * (1.0 + 10.0 * u(gen));
      const double R2 = R1 * (1.0 + u(gen));
      CHECK(covering_number(ls, x, R1, r1, 9) >= covering_number(ls, x, R1, r2, 9));
      CHECK(covering_number(ls, x, R1, r1, 9) <= covering_number(ls, x, R2, r1, 9));
    }
  }
}

TEST_CASE("level-tagged scale pairs match the tables", "[estimate][property]") {
  const auto t = build_prefix_tables(dyadic_block(), 40);
  for (std::size_t k = 1; k < 20; ++k) {
    for (std::size_t l = 1; l < 20; ++l) {
      const auto sp = level_scale_pair(t, k, l);
      CHECK(std::abs(std::log(sp.R / sp.r) - (t.log_delta(k) - t.log_delta(k + l))) <= 1e-12 * (k + l));
      REQUIRE(sp.levels.has_value());
      CHECK(sp.levels->first == k);
    }
  }
  CHECK_THROWS_AS(level_scale_pair(t, 30, 11), DepthError);
  CHECK_THROWS_AS(level_scale_pair(t, 3, 0), ValidationError);
}

TEST_CASE("sample points lie in E", "[estimate]") {
  const auto ls = build_levels(kMiddleThird, 8);
  const auto xs = sample_points(ls, 50);
  CHECK(xs.size() == 50);
  for (double x : xs)
    for (std::size_t k = 1; k <= 8; ++k) CHECK(locate(ls, x, k).has_value());
  CHECK(sample_points(ls, 1000).size() == 256);
  CHECK_THROWS_AS(sample_points(ls, 0), ValidationError);
}

TEST_CASE("empirical dimensions", "[estimate]") {
  SECTION("middle-third, both placements") {
    for (auto p : {Placement::uniform_gaps, Placement::left_packed}) {
      BuildOptions o;
      o.placement = p;
      const auto ls = build_levels(kMiddleThird, 12);
      const auto pairs = pair_grid(5, 5);
      const auto a = empirical_assouad(ls, pairs, 32);
      const auto l = empirical_lower(ls, pairs, 32);
      CHECK(l.value <= a.value);
      CHECK(std::abs(a.value - kLog2Log3) <= 0.05);
      CHECK(l.kind == "lower");
      CHECK(a.evaluations == 25 * 32);
      // The witness reproduces the reported exponent.
      const auto& w = a.witness;
      CHECK(covering_number(ls, w.x, w.R, w.r, 12) == w.count);
      CHECK(two_scale_exponent(ls, w.x, w.R, w.r, 12) == w.exponent);
      CHECK(w.exponent == a.value);
    }
  }
  SECTION("constant (2, 1/4)") {
    const auto ls = build_levels(SequenceSpec::constant({2, 0.25, 0.0}), 14);
    const auto a = empirical_assouad(ls, pair_grid(5, 5), 32);
    CHECK(std::abs(a.value - 0.5) <= 0.05);
  }
  SECTION("block rule: lower estimate respects the formula bound") {
    const auto spec = dyadic_block();
    const auto ls = build_levels(spec, 15);
    const auto l = empirical_lower(ls, pair_grid(6, 6), 32);
    const auto t = build_prefix_tables(spec, 4096);
    CHECK(l.value <= lower_dim_bound_formula(t, 2048, 1024).value + 0.05);
  }
  SECTION("parallel evaluation is identical") {
    const auto ls = build_levels(dyadic_block(), 12);
    const auto pairs = pair_grid(4, 5);
    const auto a1 = empirical_assouad(ls, pairs, 24, 0.5, 1);
    const auto a4 = empirical_assouad(ls, pairs, 24, 0.5, 4);
    CHECK(a1.value == a4.value);
    CHECK(a1.witness.x == a4.witness.x);
    CHECK(a1.trace == a4.trace);
  }
  SECTION("errors") {
    const auto ls = build_levels(kMiddleThird, 6);
    CHECK_THROWS_AS(empirical_assouad(ls, pair_grid(2, 2), 0), ValidationError);
    CHECK_THROWS_AS(empirical_assouad(ls, pair_grid(5, 5), 8), DepthError);
  }
}

TEST_CASE("desk-scale sandwich on catalog specs", "[estimate][property]") {
  struct Case {
    SequenceSpec spec;
    std::size_t depth;
  };
  const std::vector<Case> cases{
      {kMiddleThird, 15},
      {SequenceSpec::constant({2, 0.25, 0.0}), 15},
      // (3, 1/5) at depth 15 exceeds the 2^24 interval budget; 14 is the deepest realization.
      {SequenceSpec::constant({3, 0.2, 0.0}), 14},
      {dyadic_block(), 15},
      {SequenceSpec::periodic({{2, 0.25, 0.0}, {3, 0.25, 0.0}}), 15},
  };
  for (const auto& c : cases) {
    const auto ls = build_levels(c.spec, c.depth);
    const auto pairs = pair_grid(5, 5);
    const auto a = empirical_assouad(ls, pairs, 32);
    const auto l = empirical_lower(ls, pairs, 32);
    const auto t = build_prefix_tables(c.spec, 4096);
    CHECK(l.value <= a.value);
    CHECK(a.value <= assouad_dim_formula(t, 2048, 1024).value + 0.05);
  }
}

TEST_CASE("empirical spectrum points", "[estimate]") {
  const auto ls = build_levels(kMiddleThird, 14);
  const auto ks = usable_spectrum_levels(ls, 0.5);
  REQUIRE_FALSE(ks.empty());
  for (std::size_t k : ks) {
    CHECK(std::exp(ls.tables().log_delta(k) / 0.5) >= ls.max_length(14));
    CHECK(-ls.tables().log_delta(k) >= kDefaultMinLogSeparation);
  }
  CHECK(usable_spectrum_levels(ls, 0.5, 0.0).size() >= ks.size());
  const auto e = empirical_spectrum_point(ls, 0.5, ks, 48);
  CHECK(std::abs(e.value - kLog2Log3) <= 0.05);
  CHECK(e.theta == 0.5);
  CHECK(e.witness.r == Approx(e.witness.R * e.witness.R).epsilon(1e-12));
  const auto low = empirical_spectrum_point(ls, 0.5, ks, 48, SpectrumKind::lower);
  CHECK(low.value <= e.value);

  const std::vector<std::size_t> too_deep{13};
  CHECK_THROWS_AS(empirical_spectrum_point(ls, 0.5, too_deep, 8), DepthError);
  CHECK_THROWS_AS(empirical_spectrum_point(ls, 1.5, ks, 8), ValidationError);
}

TEST_CASE("counting lemmas", "[estimate]") {
  SECTION("middle-third k=3 l=4") {
    const auto ls = build_levels(kMiddleThird, 10);
    const auto rep = check_counting_lemmas(ls, 3, 4, 100);
    CHECK(rep.ok());
    CHECK(rep.samples == 100);
    CHECK(rep.min_contained_big >= 1);
    CHECK(rep.max_met_small <= 4);
    CHECK(rep.max_met_parent <= 4);
    CHECK(rep.min_contained_small >= 1);
  }
  SECTION("left-packed (2, 1/4) k=2 l=3") {
    BuildOptions o;
    o.placement = Placement::left_packed;
    const auto ls = build_levels(SequenceSpec::constant({2, 0.25, 0.0}), 8, o);
    CHECK(check_counting_lemmas(ls, 2, 3, 100).ok());
  }
  SECTION("corrupted structure") {
    const auto ls = build_levels(kMiddleThird, 8);
    std::vector<std::vector<Interval>> levels;
    for (std::size_t k = 0; k <= 8; ++k) levels.emplace_back(ls.level(k).begin(), ls.level(k).end());
    // Stack five extra level-5 intervals on top of the first one.
    for (int i = 0; i < 5; ++i) levels[5].insert(levels[5].begin() + 1, levels[5][0]);
    const auto bad = LevelStructure::from_levels(levels, ls.tables(), ls.placement(), ls.mode());
    CHECK_FALSE(check_structure(bad).empty());
    CHECK_FALSE(check_counting_lemmas(bad, 2, 3, 256).ok());
  }
  CHECK_THROWS_AS(check_counting_lemmas(build_levels(kMiddleThird, 6), 3, 3, 10), DepthError);
}

TEST_CASE("measure properties", "[estimate]") {
  std::vector<double> radii;
  for (int m = 1; m <= 10; ++m) radii.push_back(std::pow(3.0, -m));
  const auto ls = build_levels(kMiddleThird, 12);
  const auto rep = check_measure_properties(ls, radii, 64, 1.0 / 3.0);
  CHECK(rep.findings.empty());
  CHECK(std::isfinite(rep.lambda));
  CHECK(rep.alpha > 1.0);
  CHECK(std::isfinite(rep.beta));
  CHECK(rep.radii_used.size() == 10);

  const auto shallow = build_levels(kMiddleThird, 6);
  const auto part = check_measure_properties(shallow, radii, 16, 1.0 / 3.0);
  CHECK(part.radii_skipped == 5);
  CHECK_THROWS_AS(check_measure_properties(ls, radii, 16, 1.0), ValidationError);

  const std::size_t depths[] = {6, 12};
  std::vector<double> coarse;
  for (int m = 1; m <= 4; ++m) coarse.push_back(std::pow(3.0, -m));
  const auto trend = check_measure_trend(kMiddleThird, depths, {}, coarse, 32, 1.0 / 3.0);
  CHECK(trend.reports.size() == 2);
  CHECK(trend.c_non_increasing);
  CHECK(trend.reports[1].c <= trend.reports[0].c + 1e-9);
}
