#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

#include "valo/timepred.hpp"
#include "valo/voxel.hpp"

namespace valo::scheduler {

struct SchedulerState {
  int r_last = 0;          // last scheduled region
  double deadline_ms = 0.0; // relative deadline D
};

struct RegionSchedule {
  std::vector<int> regions;       // R_sel, in rotated order
  std::vector<int64_t> counts;    // C_sel, aligned
  double predicted_ms = 0.0;      // E at decision time
  double remaining_ms = 0.0;      // D - elapsed at decision time
  bool feasible = true;           // false when only the liveness floor fit
};

// Rotate the schedulable span so it begins at the first non-empty region
// after r_last in circular region order. Empty interior regions cannot start
// a rotation but keep their place in the rotated list.
inline void reorder(std::vector<int>& regions, std::vector<int64_t>& counts,
                    int r_last, int num_regions) {
  if (regions.empty()) return;
  std::vector<int> pos_of(static_cast<size_t>(num_regions), -1);
  for (size_t i = 0; i < regions.size(); ++i) pos_of[regions[i]] = static_cast<int>(i);

  int start_pos = -1;
  for (int step = 1; step <= num_regions; ++step) {
    const int r = (r_last + step) % num_regions;
    const int p = pos_of[r];
    if (p >= 0 && counts[p] > 0) {
      start_pos = p;
      break;
    }
  }
  if (start_pos <= 0) return; // already starts there (or no rotation needed)
  std::rotate(regions.begin(), regions.begin() + start_pos, regions.end());
  std::rotate(counts.begin(), counts.begin() + start_pos, counts.end());
}

// Algorithm 1: greedy prefix selection. Candidate prefixes of the reordered
// span are priced from longest to shortest and the first one whose predicted
// time fits strictly inside the remaining budget wins. If none fits, the
// single-region prefix is returned anyway so the pipeline always makes
// progress; region drop recovers the deadline downstream.
inline RegionSchedule schedule(const voxel::RegionCounts& span,
                               int num_regions, SchedulerState& state,
                               const timepred::CalibratedPredictor& pred,
                               const timepred::HistoryStore& history,
                               double elapsed_ms) {
  if (span.empty())
    throw std::invalid_argument("schedule: empty region span (frame skip)");

  RegionSchedule sel;
  sel.regions = span.regions;
  sel.counts = span.counts;
  reorder(sel.regions, sel.counts, state.r_last, num_regions);
  sel.remaining_ms = state.deadline_ms - elapsed_ms;

  // Prefix sums in rotated order make each candidate O(blocks): the first
  // block's count is exact, later blocks sum history rows.
  const int nb = pred.num_blocks();
  const size_t n = sel.regions.size();
  std::vector<double> prefix_first(n + 1, 0.0);
  std::vector<std::vector<double>> prefix_hist(
      static_cast<size_t>(nb), std::vector<double>(n + 1, 0.0));
  for (size_t i = 0; i < n; ++i) {
    const int r = sel.regions[i];
    prefix_first[i + 1] =
        prefix_first[i] + static_cast<double>(sel.counts[i]);
    for (int b = 1; b < nb; ++b) {
      const double c =
          history.known(r)
              ? static_cast<double>(history.count(r, b))
              : static_cast<double>(sel.counts[i]) * pred.block_ratios[b];
      prefix_hist[b][i + 1] = prefix_hist[b][i] + c;
    }
  }
  auto predict_prefix = [&](size_t len) {
    double e;
    if (pred.mode == timepred::PredictorMode::whole_quadratic) {
      e = pred.whole_quadratic.eval(
          static_cast<int64_t>(std::llround(prefix_first[len])));
    } else {
      e = pred.blocks[0].eval(
          static_cast<int64_t>(std::llround(prefix_first[len])));
      for (int b = 1; b < nb; ++b)
        e += pred.blocks[b].eval(
            static_cast<int64_t>(std::llround(prefix_hist[b][len])));
    }
    return e + pred.dense.at(static_cast<int>(len)) + pred.tail.e_r;
  };

  size_t chosen = 1;
  sel.feasible = false;
  for (size_t len = n; len >= 1; --len) {
    const double e = predict_prefix(len);
    if (e < sel.remaining_ms) {
      chosen = len;
      sel.predicted_ms = e;
      sel.feasible = true;
      break;
    }
    if (len == 1) { // liveness floor
      chosen = 1;
      sel.predicted_ms = e;
    }
  }
  sel.regions.resize(chosen);
  sel.counts.resize(chosen);
  state.r_last = sel.regions.back();
  return sel;
}

// Post-backbone recovery: keep the largest prefix whose remaining dense +
// tail time still fits the budget, never dropping below one region. Fully
// sparse pipelines bypass the check.
inline std::vector<int> region_drop(const std::vector<int>& selected,
                                    double elapsed_ms,
                                    const timepred::DenseTimeTable& table,
                                    const timepred::TailTimeBound& tail,
                                    double deadline_ms, bool has_dense_stage) {
  if (!has_dense_stage || selected.empty()) return selected;
  const double remaining = deadline_ms - elapsed_ms;
  for (int k = static_cast<int>(selected.size()); k >= 1; --k) {
    if (table.at(k) + tail.e_r < remaining)
      return std::vector<int>(selected.begin(), selected.begin() + k);
  }
  return std::vector<int>(selected.begin(), selected.begin() + 1);
}

} // namespace valo::scheduler
