#include <catch_amalgamated.hpp>

#include <cmath>
#include <random>
#include <sstream>

#include "moran/construct.hpp"

using namespace moran;
using Catch::Approx;

namespace {

const SequenceSpec kMiddleThird = SequenceSpec::constant({2, 1.0 / 3.0, 0.0});

SequenceSpec perturbed_middle_third() {
  return SequenceSpec::constant({2, 1.0 / 3.0, 0.0}).with_perturbation({1.0, 0.5});
}

BuildOptions cantor(std::uint64_t seed, Placement p = Placement::uniform_gaps) {
  BuildOptions o;
  o.mode = Mode::cantor_like;
  o.seed = seed;
  o.placement = p;
  return o;
}

}  // namespace

TEST_CASE("middle-third levels", "[construct]") {
  const auto ls = build_levels(kMiddleThird, 2);
  const auto l1 = intervals_at_level(ls, 1);
  REQUIRE(l1.size() == 2);
  CHECK(l1[0].left == 0.0);
  CHECK(l1[0].right() == Approx(1.0 / 3.0));
  CHECK(l1[1].left == Approx(2.0 / 3.0));
  CHECK(l1[1].right() == Approx(1.0));

  const auto l2 = intervals_at_level(ls, 2);
  REQUIRE(l2.size() == 4);
  const double lefts[] = {0.0, 2.0 / 9.0, 2.0 / 3.0, 8.0 / 9.0};
  for (int i = 0; i < 4; ++i) {
    CHECK(l2[i].left == Approx(lefts[i]).margin(1e-15));
    CHECK(l2[i].length == Approx(1.0 / 9.0).epsilon(1e-14));
  }
  CHECK(ls.measure_weight(2) == 0.25);
  CHECK(check_structure(ls).empty());
}

TEST_CASE("left-packed levels", "[construct]") {
  BuildOptions o;
  o.placement = Placement::left_packed;
  const auto ls = build_levels(kMiddleThird, 1, o);
  const auto l1 = intervals_at_level(ls, 1);
  CHECK(l1[0].left == 0.0);
  CHECK(l1[0].right() == Approx(1.0 / 3.0));
  CHECK(l1[1].left == Approx(1.0 / 3.0));
  CHECK(l1[1].right() == Approx(2.0 / 3.0));

  const auto q = build_levels(SequenceSpec::constant({2, 0.25, 0.0}), 1, o);
  CHECK(intervals_at_level(q, 1)[1].left == 0.25);
  CHECK(intervals_at_level(q, 1)[1].right() == 0.5);
}

TEST_CASE("intervals_at_level range", "[construct][errors]") {
  const auto ls = build_levels(kMiddleThird, 3);
  CHECK_THROWS_AS(intervals_at_level(ls, 0), ValidationError);
  CHECK_THROWS_AS(intervals_at_level(ls, 4), ValidationError);
  CHECK(intervals_at_level(ls, 3).size() == 8);
}

TEST_CASE("Cantor-like ratios stay in the band", "[construct]") {
  const auto ls = build_levels(perturbed_middle_third(), 2, cantor(42));
  const auto l1 = intervals_at_level(ls, 1);
  const auto l2 = intervals_at_level(ls, 2);
  for (std::size_t i = 0; i < l2.size(); ++i) {
    const double ratio = l2[i].length / l1[i / 2].length;
    CHECK(ratio >= (1.0 / 3.0) * 0.75 - 1e-15);
    CHECK(ratio <= (1.0 / 3.0) * 1.25 + 1e-15);
  }
  CHECK(check_structure(ls).empty());
}

TEST_CASE("Cantor-like structures over many seeds and both placements", "[construct][property]") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    for (auto p : {Placement::uniform_gaps, Placement::left_packed}) {
      const auto ls = build_levels(perturbed_middle_third(), 8, cantor(seed, p));
      CHECK(check_structure(ls).empty());
    }
  }
}

TEST_CASE("build is deterministic in (spec, depth, placement, seed)", "[construct][property]") {
  const auto a = build_levels(perturbed_middle_third(), 10, cantor(42));
  const auto b = build_levels(perturbed_middle_third(), 10, cantor(42));
  const auto c = build_levels(perturbed_middle_third(), 10, cantor(43));
  bool differs = false;
  for (std::size_t k = 1; k <= 10; ++k) {
    const auto la = a.level(k);
    const auto lb = b.level(k);
    const auto lc = c.level(k);
    REQUIRE(la.size() == lb.size());
    for (std::size_t i = 0; i < la.size(); ++i) {
      CHECK(la[i].left == lb[i].left);
      CHECK(la[i].length == lb[i].length);
      differs = differs || la[i].length != lc[i].length;
    }
  }
  CHECK(differs);
}

TEST_CASE("sampled ratios match the documented generator", "[construct]") {
  // First draw of mt19937_64(42) mapped to [0,1) with 53 bits.
  std::mt19937_64 gen(42);
  const double u = static_cast<double>(gen() >> 11) * 0x1.0p-53;
  const auto ls = build_levels(perturbed_middle_third(), 1, cantor(42));
  const double lo = (1.0 / 3.0) * 0.5;
  const double hi = (1.0 / 3.0) * 1.5;
  CHECK(ls.level(1)[0].length == Approx(lo + (hi - lo) * u).epsilon(1e-15));
}

TEST_CASE("Moran lengths match delta_k", "[construct][property]") {
  std::mt19937_64 gen(3);
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<Term> period(1 + gen() % 4);
    for (auto& t : period) {
      t.n = 2 + static_cast<int>(gen() % 3);
      t.c = (0.2 + 0.7 * static_cast<double>(gen() % 1000) / 1000.0) / t.n;
    }
    const auto spec = SequenceSpec::periodic(period);
    for (auto p : {Placement::uniform_gaps, Placement::left_packed}) {
      BuildOptions o;
      o.placement = p;
      const auto ls = build_levels(spec, 7, o);
      const auto findings = check_structure(ls);
      INFO(trial << " " << (findings.empty() ? std::string() : findings.front()));
      CHECK(findings.empty());
      for (std::size_t k = 1; k <= 7; ++k) {
        CHECK(std::abs(ls.max_length(k) - ls.nominal_length(k)) <= 1e-12 * ls.nominal_length(k));
        CHECK(std::abs(ls.min_length(k) - ls.nominal_length(k)) <= 1e-12 * ls.nominal_length(k));
      }
    }
  }
}

TEST_CASE("budget and feasibility errors", "[construct][errors]") {
  BuildOptions small;
  small.interval_budget = 100;
  CHECK_THROWS_AS(build_levels(kMiddleThird, 6, small), ResourceError);
  CHECK_NOTHROW(build_levels(kMiddleThird, 5, small));
  CHECK_THROWS_AS(build_levels(kMiddleThird, 40), ResourceError);
  CHECK_THROWS_AS(build_levels(kMiddleThird, 0), ValidationError);

  CHECK_THROWS_AS(build_levels(SequenceSpec::constant({3, 0.5, 0.0}), 2), ConstructionError);
  const auto wide = SequenceSpec::constant({2, 0.45, 0.0}).with_perturbation({0.5, 0.5});
  CHECK_THROWS_AS(build_levels(wide, 2, cantor(1)), ConstructionError);
  CHECK_NOTHROW(build_levels(wide, 2));
}

TEST_CASE("locate", "[construct]") {
  const auto ls = build_levels(kMiddleThird, 3);
  CHECK(locate(ls, 0.0, 2) == std::optional<std::size_t>{0});
  CHECK_FALSE(locate(ls, 0.5, 1).has_value());
  CHECK(locate(ls, 2.0 / 3.0, 2) == std::optional<std::size_t>{2});
  CHECK(locate(ls, 1.0, 3) == std::optional<std::size_t>{7});
  CHECK(locate(ls, 1.0 / 9.0, 2) == std::optional<std::size_t>{0});
  CHECK_FALSE(locate(ls, 0.15, 2).has_value());
}

TEST_CASE("natural measure of balls", "[construct]") {
  const auto ls = build_levels(kMiddleThird, 4);
  CHECK(natural_measure_ball(ls, 0.0, 1.0 / 9.0, 2) == 0.25);
  CHECK(natural_measure_ball(ls, 0.0, 1.0, 2) == 1.0);
  CHECK(natural_measure_ball(ls, 0.0, 1.0 / 3.0, 2) == 0.5);
  CHECK(natural_measure_ball(ls, 0.0, 1.0 / 18.0, 2) == Approx(0.125).epsilon(1e-14));
  CHECK(natural_measure_ball(ls, 1.0, 0.5, 1) == Approx(0.5).epsilon(1e-14));
  CHECK(natural_measure_ball(ls, 1.0, 0.5, 3) == Approx(0.5).epsilon(1e-14));
  CHECK_THROWS_AS(natural_measure_ball(ls, 0.5, 0.1, 2), ValidationError);
  CHECK_THROWS_AS(natural_measure_ball(ls, 0.0, 0.0, 2), ValidationError);
}

TEST_CASE("natural measure is additive over disjoint balls", "[construct][property]") {
  const auto ls = build_levels(kMiddleThird, 6);
  for (std::size_t k = 1; k <= 6; ++k) {
    // Balls at left endpoints with radius equal to the length; neighbours only touch.
    double total = 0.0;
    for (const auto& iv : ls.level(1)) total += natural_measure_ball(ls, iv.left, iv.length, k);
    CHECK(std::abs(total - 1.0) <= 1e-12);
    total = 0.0;
    for (const auto& iv : ls.level(k)) total += natural_measure_ball(ls, iv.left, iv.length, k);
    CHECK(std::abs(total - 1.0) <= 1e-12);
  }
}

TEST_CASE("check_structure flags corrupted levels", "[construct][negative]") {
  const auto ls = build_levels(kMiddleThird, 3);
  std::vector<std::vector<Interval>> levels;
  for (std::size_t k = 0; k <= 3; ++k) levels.emplace_back(ls.level(k).begin(), ls.level(k).end());

  auto overlap = levels;
  overlap[2][1].left = overlap[2][0].left + overlap[2][0].length / 2;
  CHECK_FALSE(check_structure(LevelStructure::from_levels(overlap, ls.tables(), ls.placement(), ls.mode())).empty());

  auto escape = levels;
  escape[3][7].left = 1.0;
  CHECK_FALSE(check_structure(LevelStructure::from_levels(escape, ls.tables(), ls.placement(), ls.mode())).empty());

  auto missing = levels;
  missing[2].pop_back();
  CHECK_FALSE(check_structure(LevelStructure::from_levels(missing, ls.tables(), ls.placement(), ls.mode())).empty());

  auto wrong_length = levels;
  wrong_length[1][0].length *= 0.9;
  CHECK_FALSE(
      check_structure(LevelStructure::from_levels(wrong_length, ls.tables(), ls.placement(), ls.mode())).empty());
}

TEST_CASE("levels CSV", "[construct]") {
  std::ostringstream os;
  write_levels_csv(os, build_levels(kMiddleThird, 1));
  CHECK(os.str() == "level,index,left,length\n1,0,0,0.33333333333333331\n1,1,0.66666666666666674,0.33333333333333331\n");
}
