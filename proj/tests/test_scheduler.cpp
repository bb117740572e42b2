#include <catch2/catch_amalgamated.hpp>

#include "valo/rng.hpp"
#include "valo/scheduler.hpp"

using namespace valo;
using namespace valo::scheduler;
using timepred::CalibratedPredictor;
using timepred::HistoryStore;

namespace {

// Linear per-block models keep the arithmetic easy to do by hand.
CalibratedPredictor simple_predictor(int num_regions, double es_per_voxel,
                                     double dense_per_region, double tail) {
  CalibratedPredictor pred;
  pred.blocks = {{0.0, es_per_voxel, 0.0}};
  pred.block_ratios = {1.0};
  for (int k = 1; k <= num_regions; ++k)
    pred.dense.ms_by_size.push_back(dense_per_region * k);
  pred.tail.e_r = tail;
  return pred;
}

voxel::RegionCounts span_of(const std::vector<int>& regions,
                            const std::vector<int64_t>& counts) {
  voxel::RegionCounts rc;
  rc.regions = regions;
  rc.counts = counts;
  return rc;
}

} // namespace

TEST_CASE("reorder starts after r_last and wraps") {
  SECTION("full span, r_last = 5: starts at 6, ends at 5") {
    std::vector<int> regions;
    std::vector<int64_t> counts;
    for (int r = 0; r < 18; ++r) {
      regions.push_back(r);
      counts.push_back(10 + r);
    }
    reorder(regions, counts, 5, 18);
    REQUIRE(regions.front() == 6);
    REQUIRE(regions.back() == 5);
    REQUIRE(counts.front() == 16);
    for (size_t i = 0; i < regions.size(); ++i)
      REQUIRE(counts[i] == 10 + regions[i]); // permuted identically
  }

  SECTION("r_last beyond the last non-empty region wraps to the first") {
    // circular successor scan by hand: 13, 14, ..., 17, 0, 1, 2 -> region 2
    std::vector<int> regions = {2, 3, 4, 5};
    std::vector<int64_t> counts = {5, 6, 7, 8};
    reorder(regions, counts, 12, 18);
    REQUIRE(regions == std::vector<int>{2, 3, 4, 5});
  }

  SECTION("single-region span is unchanged") {
    std::vector<int> regions = {7};
    std::vector<int64_t> counts = {3};
    reorder(regions, counts, 7, 18);
    REQUIRE(regions == std::vector<int>{7});
  }

  SECTION("empty interior regions cannot start the rotation") {
    std::vector<int> regions = {4, 5, 6, 7};
    std::vector<int64_t> counts = {3, 0, 0, 2};
    reorder(regions, counts, 4, 18);
    REQUIRE(regions == std::vector<int>{7, 4, 5, 6});
    REQUIRE(counts == std::vector<int64_t>{2, 3, 0, 0});
  }
}

TEST_CASE("schedule selects the longest prefix that fits the budget") {
  const int nr = 6;
  HistoryStore hist(nr, 1);
  auto pred = simple_predictor(nr, 1e-3, 5.0, 2.0);

  SECTION("unconstrained budget selects every schedulable region") {
    SchedulerState state{5, 1e9};
    const auto sel = schedule(span_of({0, 1, 2, 3, 4, 5},
                                      {100, 100, 100, 100, 100, 100}),
                              nr, state, pred, hist, 6.0);
    REQUIRE(sel.regions.size() == 6);
    REQUIRE(sel.feasible);
    REQUIRE(state.r_last == sel.regions.back());
  }

  SECTION("budget below the single-region cost falls back to the floor") {
    // every prefix costs at least dense[1] + tail = 7 ms
    SchedulerState state{5, 6.0};
    const auto sel = schedule(span_of({0, 1, 2}, {100, 100, 100}), nr, state,
                              pred, hist, 0.0);
    REQUIRE(sel.regions.size() == 1);
    REQUIRE_FALSE(sel.feasible);
    REQUIRE(sel.predicted_ms >= sel.remaining_ms);
  }

  SECTION("exact arithmetic on a fixed budget") {
    // prefix k costs 0.001 * 100k + 5k + 2 = 5.1k + 2; fits k while
    // 5.1k + 2 < D - 6
    SchedulerState state{5, 30.0};
    const auto sel = schedule(span_of({0, 1, 2, 3, 4, 5},
                                      {100, 100, 100, 100, 100, 100}),
                              nr, state, pred, hist, 6.0);
    // remaining 24: k=4 -> 22.4 < 24, k=5 -> 27.5 >= 24
    REQUIRE(sel.regions.size() == 4);
    REQUIRE(sel.regions == std::vector<int>{0, 1, 2, 3});
    REQUIRE(sel.predicted_ms == Catch::Approx(22.4));
  }

  SECTION("selection is a prefix of the rotated span") {
    SchedulerState state{2, 40.0};
    const auto sel = schedule(span_of({0, 1, 2, 3, 4, 5},
                                      {50, 60, 70, 80, 90, 100}),
                              nr, state, pred, hist, 6.0);
    REQUIRE(sel.regions.front() == 3); // first non-empty after r_last = 2
    for (size_t i = 1; i < sel.regions.size(); ++i)
      REQUIRE(sel.regions[i] == (sel.regions[i - 1] + 1) % nr);
  }

  SECTION("empty span signals a frame skip") {
    SchedulerState state{0, 100.0};
    REQUIRE_THROWS_AS(schedule(voxel::RegionCounts{}, nr, state, pred, hist,
                               0.0),
                      std::invalid_argument);
  }
}

TEST_CASE("three constrained frames rotate through all regions") {
  const int nr = 6;
  HistoryStore hist(nr, 1);
  auto pred = simple_predictor(nr, 1e-3, 5.0, 2.0);
  // budget for exactly 2 regions per frame: cost(2) = 10.2 + 2, cost(3) = 17.3
  SchedulerState state{nr - 1, 6.0 + 14.0};
  std::vector<char> seen(nr, 0);
  for (int f = 0; f < 3; ++f) {
    const auto sel = schedule(span_of({0, 1, 2, 3, 4, 5},
                                      {100, 100, 100, 100, 100, 100}),
                              nr, state, pred, hist, 6.0);
    REQUIRE(sel.regions.size() == 2);
    for (int r : sel.regions) seen[r] = 1;
  }
  for (int r = 0; r < nr; ++r) REQUIRE(seen[r] == 1);
}

TEST_CASE("increasing the deadline never shrinks the selection") {
  const int nr = 12;
  Rng rng(23);
  auto pred = simple_predictor(nr, 2e-3, 4.0, 3.0);
  HistoryStore hist(nr, 1);
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<int> regions;
    std::vector<int64_t> counts;
    const int first = static_cast<int>(rng.below(nr - 2));
    const int last = first + 1 + static_cast<int>(rng.below(nr - first - 1));
    for (int r = first; r <= last; ++r) {
      regions.push_back(r);
      const bool edge = r == first || r == last;
      counts.push_back(edge ? 1 + static_cast<int64_t>(rng.below(3000))
                            : static_cast<int64_t>(rng.below(3000)));
    }
    const int r_last = static_cast<int>(rng.below(nr));
    const double d1 = rng.uniform(5.0, 80.0);
    const double d2 = d1 + rng.uniform(0.0, 60.0);
    SchedulerState s1{r_last, d1}, s2{r_last, d2};
    const auto sel1 = schedule(span_of(regions, counts), nr, s1, pred, hist, 6.0);
    const auto sel2 = schedule(span_of(regions, counts), nr, s2, pred, hist, 6.0);
    REQUIRE(sel1.regions.size() <= sel2.regions.size());
  }
}

TEST_CASE("region_drop trims the dense-stage workload to fit") {
  timepred::DenseTimeTable table;
  table.ms_by_size = {5.0, 10.0, 15.0, 20.0};
  timepred::TailTimeBound tail{2.0};
  const std::vector<int> sel = {3, 4, 5, 6};

  SECTION("no drop when the full selection still fits") {
    const auto kept = region_drop(sel, 10.0, table, tail, 40.0, true);
    REQUIRE(kept == sel);
  }

  SECTION("keeps exactly one region when only table[1] fits") {
    // remaining = 40 - 30 = 10: k=1 needs 5 + 2 = 7 < 10, k=2 needs 12 >= 10
    const auto kept = region_drop(sel, 30.0, table, tail, 40.0, true);
    REQUIRE(kept == std::vector<int>{3});
  }

  SECTION("keeps the largest prefix that fits") {
    // remaining = 19: k=3 needs 17 < 19, k=4 needs 22 >= 19
    const auto kept = region_drop(sel, 21.0, table, tail, 40.0, true);
    REQUIRE(kept == std::vector<int>{3, 4, 5});
  }

  SECTION("fully sparse pipelines bypass the check") {
    const auto kept = region_drop(sel, 1000.0, table, tail, 40.0, false);
    REQUIRE(kept == sel);
  }

  SECTION("never returns an empty list even when nothing fits") {
    const auto kept = region_drop(sel, 39.0, table, tail, 40.0, true);
    REQUIRE(kept == std::vector<int>{3});
  }

  SECTION("output is always a prefix of the input") {
    Rng rng(31);
    for (int trial = 0; trial < 200; ++trial) {
      const double elapsed = rng.uniform(0.0, 50.0);
      const auto kept = region_drop(sel, elapsed, table, tail, 40.0, true);
      REQUIRE(!kept.empty());
      REQUIRE(kept.size() <= sel.size());
      for (size_t i = 0; i < kept.size(); ++i) REQUIRE(kept[i] == sel[i]);
    }
  }
}
