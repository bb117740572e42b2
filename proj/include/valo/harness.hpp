#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "valo/dethead.hpp"
#include "valo/forecast.hpp"
#include "valo/rng.hpp"
#include "valo/scene.hpp"
#include "valo/scheduler.hpp"
#include "valo/sparseprop.hpp"
#include "valo/timepred.hpp"
#include "valo/voxel.hpp"

namespace valo::harness {

struct DetectorNoise {
  double miss_rate = 0.0;  // P(object in a processed region is not detected)
  double pos_sigma = 0.0;  // meters, x/y jitter
  double fp_rate = 0.0;    // P(one false positive per processed region)

  void validate() const {
    if (miss_rate < 0.0 || miss_rate > 1.0 || fp_rate < 0.0 || fp_rate > 1.0)
      throw std::invalid_argument("detector noise: rates must be in [0,1]");
    if (pos_sigma < 0.0)
      throw std::invalid_argument("detector noise: pos_sigma must be >= 0");
  }
};

// Ground-truth cost model of the dense stages and the tail. The 2D backbone
// and detection head scale with the number of selected regions; the head
// additionally shrinks under the gather optimization by the gathered/full
// MAC ratio, floored at a launch overhead.
struct StageCosts {
  double dense_base_ms = 8.0;
  double dense_per_region_ms = 3.5; // 2D backbone
  double head_base_ms = 15.0;
  double head_per_region_ms = 5.0;  // detection head, full-grid convolutions
  double head_floor_ms = 1.5;
  double tail_ms = 8.0;
  double sigma_dense = 0.0;
  double sigma_tail = 0.0;
  int nominal_proposals = 100;

  double bb2d_ms(int k) const { return dense_base_ms + dense_per_region_ms * k; }
  double head_full_ms(int k) const { return head_base_ms + head_per_region_ms * k; }
};

struct SimConfig {
  std::vector<double> deadlines_ms{350.0, 285.0, 220.0, 155.0, 90.0};
  int num_regions = 18;
  voxel::GridGeometry grid;
  sparseprop::BackboneSpec backbone = sparseprop::BackboneSpec::default_spec();
  sparseprop::CostOracle oracle = sparseprop::CostOracle::default_oracle();
  StageCosts stages;
  timepred::PredictorMode predictor_mode = timepred::PredictorMode::history;
  bool scheduling = true;
  bool forecasting = true;
  bool region_drop = true;
  bool dethead_opt = false;
  bool has_dense_stage = true;
  DetectorNoise noise;
  double iou_threshold = 0.5;
  int forecast_max_age_frames = 10;
  double count_overhead_ms = 3.0;
  double sched_overhead_ms = 3.0;
  double forecast_base_ms = 0.1;
  double forecast_per_pose_ms = 0.002;
  double match_distance_m = 2.0; // accuracy-proxy center-distance gate
  uint64_t seed = 1;

  void validate() const {
    for (double d : deadlines_ms)
      if (d <= 0.0)
        throw std::invalid_argument("sim: deadlines must be > 0");
    if (deadlines_ms.empty())
      throw std::invalid_argument("sim: at least one deadline required");
    grid.validate();
    backbone.validate();
    oracle.validate();
    noise.validate();
    if (oracle.blocks.size() != backbone.num_blocks())
      throw std::invalid_argument(
          "sim: cost oracle block count does not match the backbone");
    if (iou_threshold <= 0.0 || iou_threshold >= 1.0)
      throw std::invalid_argument("sim: iou_threshold must be in (0,1)");
    voxel::RegionPartition::make(grid.dims[0], num_regions);
  }
};

// Scored output of one frame plus the decision log.
struct FrameResult {
  int frame = 0;
  double timestamp = 0.0;

  // decision log
  std::vector<int> span_regions;      // R_S
  std::vector<int64_t> span_counts;   // C_S
  int r_last_before = 0;
  std::vector<int> selected;          // R_sel at decision time
  std::vector<int> processed;         // after region drop
  int dropped_regions = 0;
  double predicted_e_ms = 0.0;
  double remaining_ms = 0.0;
  bool sched_feasible = true;

  // paired predictor errors for the executed selection
  double predicted_es_history_ms = 0.0;
  double predicted_es_quadratic_ms = 0.0;
  double actual_es_ms = 0.0;

  // virtual-clock stages
  double overhead_ms = 0.0;
  double sparse_ms = 0.0;
  double forecast_ms = 0.0;        // raw duration (runs in parallel)
  double forecast_excess_ms = 0.0; // part exceeding the covering stages
  double dense_ms = 0.0;
  double tail_ms = 0.0;
  double total_ms = 0.0;

  bool met_deadline = true;
  bool buffer_used = false;

  int fresh_detections = 0;
  int forecast_poses = 0;
  std::vector<forecast::ObjectPose> emitted; // produced this frame
  std::vector<forecast::ObjectPose> scored;  // buffer contents when missed
};

struct StageStats {
  double mean = 0.0, p99 = 0.0, max = 0.0;
};

struct RunMetrics {
  double deadline_ms = 0.0;
  int frames = 0;
  double miss_rate = 0.0;
  double recall = 0.0;
  double precision = 0.0;
  double mean_selected = 0.0;
  double mean_processed = 0.0;
  double mean_staleness = 0.0;
  double max_staleness = 0.0;
  StageStats sparse, dense, tail, total;
};

struct RunResult {
  RunMetrics metrics;
  std::vector<FrameResult> frames;
};

// Oracle stand-in for the DNN decoder: every ground-truth object whose BEV
// center voxel lies in a processed region is reported, subject to the
// configured miss/jitter/false-positive noise. One noise draw is consumed
// per truth object and per region regardless of the processed set, so paired
// runs see identical randomness.
inline std::vector<forecast::ObjectPose> oracle_detect(
    const scene::Frame& frame, const std::vector<int>& processed_regions,
    const voxel::GridGeometry& grid, const voxel::RegionPartition& part,
    const DetectorNoise& noise, Rng& rng) {
  noise.validate();
  std::vector<char> processed(static_cast<size_t>(part.num_regions), 0);
  for (int r : processed_regions) processed[r] = 1;

  std::vector<forecast::ObjectPose> out;
  for (const auto& obj : frame.truth) {
    const double roll = rng.u01();
    const double jx = noise.pos_sigma > 0.0 ? rng.normal() : 0.0;
    const double jy = noise.pos_sigma > 0.0 ? rng.normal() : 0.0;
    const double conf = 0.5 + 0.5 * rng.u01();

    const int64_t ix = static_cast<int64_t>(
        std::floor((obj.center.x - grid.origin[0]) / grid.voxel_size[0]));
    if (ix < 0 || ix >= grid.dims[0]) continue;
    const int region = part.region_of(static_cast<int32_t>(ix));
    if (!processed[region]) continue;
    if (roll < noise.miss_rate) continue;

    forecast::ObjectPose pose;
    pose.position = {obj.center.x + jx * noise.pos_sigma,
                     obj.center.y + jy * noise.pos_sigma, obj.center.z};
    pose.size = obj.size;
    pose.heading = obj.heading;
    pose.velocity = obj.velocity;
    pose.confidence = conf;
    pose.label = obj.label;
    pose.t_det = frame.timestamp;
    pose.source_region = region;
    out.push_back(pose);
  }
  for (int r = 0; r < part.num_regions; ++r) {
    const double roll = rng.u01();
    const double ux = rng.u01();
    const double uy = rng.u01();
    const double conf = 0.3 + 0.4 * rng.u01();
    if (!processed[r] || roll >= noise.fp_rate) continue;
    forecast::ObjectPose fp;
    const double region_w = grid.voxel_size[0] * part.region_width;
    fp.position = {grid.origin[0] + region_w * (r + ux),
                   grid.origin[1] + grid.voxel_size[1] * grid.dims[1] * uy,
                   1.0};
    fp.size = {1.5, 1.5, 1.5};
    fp.confidence = conf;
    fp.label = "clutter";
    fp.t_det = frame.timestamp;
    fp.source_region = r;
    out.push_back(fp);
  }
  return out;
}

namespace detail {

struct Matcher {
  int64_t matched = 0, truth_total = 0, emitted_total = 0;

  // Greedy one-to-one matching by confidence order within the distance gate.
  void score(const std::vector<forecast::ObjectPose>& scored,
             const std::vector<scene::GroundTruthObject>& truth,
             double max_dist) {
    truth_total += static_cast<int64_t>(truth.size());
    emitted_total += static_cast<int64_t>(scored.size());
    std::vector<char> used(truth.size(), 0);
    std::vector<size_t> order(scored.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
      return scored[a].confidence > scored[b].confidence;
    });
    for (size_t oi : order) {
      const auto& p = scored[oi];
      double best = max_dist;
      int best_t = -1;
      for (size_t t = 0; t < truth.size(); ++t) {
        if (used[t] || truth[t].label != p.label) continue;
        const double d = std::hypot(p.position.x - truth[t].center.x,
                                    p.position.y - truth[t].center.y);
        if (d <= best) {
          best = d;
          best_t = static_cast<int>(t);
        }
      }
      if (best_t >= 0) {
        used[best_t] = 1;
        ++matched;
      }
    }
  }

  double recall() const {
    return truth_total == 0 ? 1.0
                            : static_cast<double>(matched) / truth_total;
  }
  double precision() const {
    return emitted_total == 0 ? 1.0
                              : static_cast<double>(matched) / emitted_total;
  }
};

inline StageStats stats_of(std::vector<double> v) {
  StageStats st;
  if (v.empty()) return st;
  double sum = 0.0;
  for (double x : v) sum += x;
  st.mean = sum / static_cast<double>(v.size());
  st.p99 = timepred::percentile_upper(v, 0.99);
  st.max = *std::max_element(v.begin(), v.end());
  return st;
}

} // namespace detail

// One closed-loop run over the scenario at a fixed deadline.
class Simulation {
public:
  Simulation(const scene::Scenario& scenario, const SimConfig& cfg,
             const timepred::CalibratedPredictor& predictor)
      : sc_(scenario), cfg_(cfg), pred_(predictor) {
    cfg_.validate();
    pred_.mode = cfg_.predictor_mode;
    part_ = voxel::RegionPartition::make(cfg_.grid.dims[0], cfg_.num_regions);
    if (pred_.num_blocks() != static_cast<int>(cfg_.backbone.num_blocks()))
      throw std::invalid_argument(
          "sim: predictor block count does not match the backbone");
    if (pred_.dense.max_size() < cfg_.num_regions)
      throw std::invalid_argument("sim: dense table smaller than num_regions");
    // final BEV extent, for the MAC-ratio head-cost scaling
    sparseprop::Extent ext = cfg_.grid.dims;
    for (const auto& block : cfg_.backbone.blocks)
      for (const auto& layer : block.layers)
        ext = sparseprop::output_extent(ext, layer);
    bev_extent_ = ext;
  }

  // Noiseless dense-stage duration for k regions; the profiled table and the
  // simulated "actual" share this base so sigma = 0 runs are exact.
  double dense_noiseless_ms(int k) const {
    double head = cfg_.stages.head_full_ms(k);
    if (cfg_.dethead_opt) {
      const int64_t bev_w = static_cast<int64_t>(bev_extent_[0]) * k /
                            cfg_.num_regions;
      dethead::MacDims dims;
      dims.height = bev_extent_[1];
      dims.width = std::max<int64_t>(1, bev_w);
      const int64_t full =
          dethead::mac_count(dethead::MacMode::full, dims, 0);
      const int64_t gathered = dethead::mac_count(
          dethead::MacMode::gathered, dims, cfg_.stages.nominal_proposals);
      head = std::max(cfg_.stages.head_floor_ms,
                      head * static_cast<double>(gathered) /
                          static_cast<double>(full));
    }
    return cfg_.stages.bb2d_ms(k) + head;
  }

  double tail_noiseless_ms() const { return cfg_.stages.tail_ms; }

  RunResult run(double deadline_ms) {
    RunResult result;
    result.metrics.deadline_ms = deadline_ms;

    timepred::HistoryStore history(cfg_.num_regions,
                                   static_cast<int>(cfg_.backbone.num_blocks()));
    forecast::PoseQueue queue;
    scheduler::SchedulerState state;
    state.r_last = cfg_.num_regions - 1; // so frame 0 starts at region 0
    state.deadline_ms = deadline_ms;

    std::vector<forecast::ObjectPose> buffer; // latest scored output
    std::vector<int64_t> last_processed(static_cast<size_t>(cfg_.num_regions),
                                        -1);
    detail::Matcher matcher;
    std::vector<double> sparse_v, dense_v, tail_v, total_v;
    double staleness_sum = 0.0;
    int64_t staleness_n = 0;
    double staleness_max = 0.0;
    int64_t selected_sum = 0, processed_sum = 0;
    const double max_age_s =
        cfg_.forecast_max_age_frames * sc_.cfg.frame_period;

    for (int f = 0; f < sc_.cfg.frame_count; ++f) {
      Rng cost_rng = Rng::sub(cfg_.seed, 0xc057, static_cast<uint64_t>(f));
      Rng det_rng = Rng::sub(cfg_.seed, 0xde7, static_cast<uint64_t>(f));

      FrameResult fr;
      fr.frame = f;
      const scene::Frame frame = scene::render_frame(sc_, f);
      fr.timestamp = frame.timestamp;
      fr.r_last_before = state.r_last;

      const voxel::SparseVoxelGrid grid = voxel::voxelize(frame.points, cfg_.grid);
      const voxel::RegionCounts span = voxel::count_voxels(grid, part_);
      fr.span_regions = span.regions;
      fr.span_counts = span.counts;

      if (span.empty()) { // frame skip: nothing to schedule or process
        fr.overhead_ms = cfg_.scheduling ? cfg_.count_overhead_ms : 0.0;
        fr.total_ms = fr.overhead_ms;
        fr.met_deadline = fr.total_ms <= deadline_ms;
        finish_frame(fr, frame, queue, buffer, matcher, max_age_s, deadline_ms);
        total_v.push_back(fr.total_ms);
        result.frames.push_back(std::move(fr));
        continue;
      }

      // --- schedule ---
      double clock = 0.0;
      scheduler::RegionSchedule sel;
      if (cfg_.scheduling) {
        clock += cfg_.count_overhead_ms + cfg_.sched_overhead_ms;
        state.deadline_ms = deadline_ms;
        sel = scheduler::schedule(span, cfg_.num_regions, state, pred_,
                                  history, clock);
      } else {
        sel.regions = span.regions;
        sel.counts = span.counts;
        sel.remaining_ms = deadline_ms;
      }
      fr.overhead_ms = clock;
      fr.selected = sel.regions;
      fr.predicted_e_ms = sel.predicted_ms;
      fr.remaining_ms = sel.remaining_ms;
      fr.sched_feasible = sel.feasible;
      selected_sum += static_cast<int64_t>(sel.regions.size());

      // paired predictor errors on the executed selection
      fr.predicted_es_history_ms = [&] {
        auto p = pred_;
        p.mode = timepred::PredictorMode::history;
        return timepred::predict_e_s(p, sel.regions, sel.counts, history);
      }();
      fr.predicted_es_quadratic_ms = [&] {
        auto p = pred_;
        p.mode = timepred::PredictorMode::whole_quadratic;
        return timepred::predict_e_s(p, sel.regions, sel.counts, history);
      }();

      // --- 3D backbone on the filtered grid ---
      const voxel::SparseVoxelGrid filtered =
          voxel::filter_regions(grid, sel.regions, part_);
      const sparseprop::RegionBlockCounts rbc =
          sparseprop::per_region_block_counts(filtered, cfg_.backbone, part_);
      std::vector<int64_t> block_counts(cfg_.backbone.num_blocks());
      for (size_t b = 0; b < block_counts.size(); ++b)
        block_counts[b] = rbc.block_total(static_cast<int>(b));
      const std::vector<double> block_ms =
          sparseprop::simulate_cost(block_counts, cfg_.oracle, cost_rng);
      for (double ms : block_ms) fr.sparse_ms += ms;
      fr.actual_es_ms = fr.sparse_ms;
      clock += fr.sparse_ms;

      // --- region drop ---
      fr.processed = sel.regions;
      if (cfg_.scheduling && cfg_.region_drop && cfg_.has_dense_stage) {
        fr.processed = scheduler::region_drop(sel.regions, clock, pred_.dense,
                                              pred_.tail, deadline_ms, true);
        fr.dropped_regions =
            static_cast<int>(sel.regions.size() - fr.processed.size());
      }
      processed_sum += static_cast<int64_t>(fr.processed.size());

      // --- dense stages ---
      if (cfg_.has_dense_stage) {
        fr.dense_ms = dense_noiseless_ms(static_cast<int>(fr.processed.size()));
        if (cfg_.stages.sigma_dense > 0.0)
          fr.dense_ms *= std::exp(cfg_.stages.sigma_dense * cost_rng.normal());
        clock += fr.dense_ms;
      }

      // --- oracle detection ---
      std::vector<forecast::ObjectPose> fresh = oracle_detect(
          frame, fr.processed, cfg_.grid, part_, cfg_.noise, det_rng);
      fr.fresh_detections = static_cast<int>(fresh.size());

      // --- forecasting (runs in parallel with the backbones) ---
      std::vector<forecast::ObjectPose> merged = fresh;
      if (cfg_.forecasting) {
        const std::vector<forecast::ObjectPose> fc = forecast::forecast_all(
            queue, [&](double t) { return sc_.ego.pose_at(t); }, frame.ego,
            frame.timestamp, max_age_s);
        fr.forecast_ms = cfg_.forecast_base_ms +
                         cfg_.forecast_per_pose_ms * static_cast<double>(fc.size());
        fr.forecast_excess_ms =
            std::max(0.0, fr.forecast_ms - (fr.sparse_ms + fr.dense_ms));
        clock += fr.forecast_excess_ms;
        merged = forecast::merge_nms(fresh, fc, cfg_.iou_threshold);
        fr.forecast_poses = static_cast<int>(merged.size() - fresh.size());
      }

      // --- tail stage ---
      fr.tail_ms = tail_noiseless_ms();
      if (cfg_.stages.sigma_tail > 0.0)
        fr.tail_ms *= std::exp(cfg_.stages.sigma_tail * cost_rng.normal());
      clock += fr.tail_ms;

      fr.total_ms = clock;
      fr.met_deadline = fr.total_ms <= deadline_ms;
      fr.emitted = merged;

      if (fr.met_deadline) {
        timepred::update_history(history, fr.processed, rbc, f);
        queue.update(fresh, fr.processed);
        for (int r : fr.processed) last_processed[r] = f;
        buffer = merged;
        fr.scored = merged;
      } else { // aborted: buffered output stands in, state untouched
        fr.buffer_used = true;
        fr.scored = buffer;
      }

      // staleness over the schedulable span
      for (int r : fr.span_regions) {
        const double s = last_processed[r] >= 0
                             ? static_cast<double>(f - last_processed[r])
                             : static_cast<double>(f + 1);
        staleness_sum += s;
        ++staleness_n;
        staleness_max = std::max(staleness_max, s);
      }

      matcher.score(fr.scored, frame.truth, cfg_.match_distance_m);
      sparse_v.push_back(fr.sparse_ms);
      dense_v.push_back(fr.dense_ms);
      tail_v.push_back(fr.tail_ms);
      total_v.push_back(fr.total_ms);
      result.frames.push_back(std::move(fr));
    }

    RunMetrics& m = result.metrics;
    m.frames = static_cast<int>(result.frames.size());
    int misses = 0;
    for (const auto& fr : result.frames) misses += fr.met_deadline ? 0 : 1;
    m.miss_rate = m.frames > 0 ? static_cast<double>(misses) / m.frames : 0.0;
    m.recall = matcher.recall();
    m.precision = matcher.precision();
    m.mean_selected =
        m.frames > 0 ? static_cast<double>(selected_sum) / m.frames : 0.0;
    m.mean_processed =
        m.frames > 0 ? static_cast<double>(processed_sum) / m.frames : 0.0;
    m.mean_staleness =
        staleness_n > 0 ? staleness_sum / static_cast<double>(staleness_n) : 0.0;
    m.max_staleness = staleness_max;
    m.sparse = detail::stats_of(sparse_v);
    m.dense = detail::stats_of(dense_v);
    m.tail = detail::stats_of(tail_v);
    m.total = detail::stats_of(total_v);
    return result;
  }

  const voxel::RegionPartition& partition() const { return part_; }
  const sparseprop::Extent& bev_extent() const { return bev_extent_; }

private:
  void finish_frame(FrameResult& fr, const scene::Frame& frame,
                    const forecast::PoseQueue& queue,
                    std::vector<forecast::ObjectPose>& buffer,
                    detail::Matcher& matcher, double max_age_s,
                    double deadline_ms) {
    (void)deadline_ms;
    if (cfg_.forecasting) {
      fr.emitted = forecast::forecast_all(
          queue, [&](double t) { return sc_.ego.pose_at(t); }, frame.ego,
          frame.timestamp, max_age_s);
      fr.forecast_poses = static_cast<int>(fr.emitted.size());
    }
    if (fr.met_deadline) {
      buffer = fr.emitted;
      fr.scored = fr.emitted;
    } else {
      fr.buffer_used = true;
      fr.scored = buffer;
    }
    matcher.score(fr.scored, frame.truth, cfg_.match_distance_m);
  }

  scene::Scenario sc_;
  SimConfig cfg_;
  timepred::CalibratedPredictor pred_;
  voxel::RegionPartition part_;
  sparseprop::Extent bev_extent_{1, 1, 1};
};

inline RunResult run_simulation(const scene::Scenario& sc, const SimConfig& cfg,
                                const timepred::CalibratedPredictor& pred,
                                double deadline_ms) {
  Simulation sim(sc, cfg, pred);
  return sim.run(deadline_ms);
}

// Independent run per deadline with identical seeds; results keyed by
// deadline in input order.
inline std::vector<RunResult> sweep_deadlines(
    const scene::Scenario& sc, const SimConfig& cfg,
    const timepred::CalibratedPredictor& pred) {
  std::vector<RunResult> out;
  for (double d : cfg.deadlines_ms) out.push_back(run_simulation(sc, cfg, pred, d));
  return out;
}

struct PredictorComparison {
  std::vector<double> err_history;   // |predicted - actual| E_S per frame
  std::vector<double> err_quadratic;
  double median_history = 0.0;
  double median_quadratic = 0.0;
  // CDF sampled at fixed quantiles
  std::vector<double> quantiles{0.1, 0.25, 0.5, 0.75, 0.9, 0.99};
  std::vector<double> cdf_history;
  std::vector<double> cdf_quadratic;
};

// Paired per-frame E_S prediction errors: the run is driven by cfg's mode,
// but both predictors are evaluated on each frame's executed selection.
inline PredictorComparison compare_predictors(
    const scene::Scenario& sc, const SimConfig& cfg,
    const timepred::CalibratedPredictor& pred, double deadline_ms) {
  RunResult rr = run_simulation(sc, cfg, pred, deadline_ms);
  PredictorComparison cmp;
  for (const auto& fr : rr.frames) {
    if (fr.selected.empty()) continue;
    cmp.err_history.push_back(
        std::fabs(fr.predicted_es_history_ms - fr.actual_es_ms));
    cmp.err_quadratic.push_back(
        std::fabs(fr.predicted_es_quadratic_ms - fr.actual_es_ms));
  }
  if (cmp.err_history.empty()) return cmp;
  cmp.median_history = timepred::percentile_upper(cmp.err_history, 0.5);
  cmp.median_quadratic = timepred::percentile_upper(cmp.err_quadratic, 0.5);
  for (double q : cmp.quantiles) {
    cmp.cdf_history.push_back(timepred::percentile_upper(cmp.err_history, q));
    cmp.cdf_quadratic.push_back(
        timepred::percentile_upper(cmp.err_quadratic, q));
  }
  return cmp;
}

struct ProfileParams {
  int frames = 48;
  double density_lo = 0.35;
  double density_hi = 1.5;
  int dense_reps = 8;
  int tail_reps = 200;
  uint64_t seed = 7;

  void validate() const {
    if (frames <= 0 || dense_reps <= 0 || tail_reps <= 0)
      throw std::invalid_argument("profile: sample counts must be > 0");
    if (density_lo <= 0.0 || density_hi < density_lo)
      throw std::invalid_argument("profile: bad density range");
  }
};

// Synthetic offline profiling: scenes of varying density and object mix are
// pushed through the coordinate propagation and priced by the cost oracle,
// covering the count ranges the fitted models will see online.
inline timepred::ProfileDataset make_profile(const scene::ScenarioConfig& base,
                                             const SimConfig& cfg,
                                             const ProfileParams& pp) {
  pp.validate();
  cfg.validate();
  timepred::ProfileDataset ds;
  Rng rng = Rng::sub(pp.seed, 0x9f0f11e);
  Simulation sim_probe(scene::generate_scenario(base), cfg,
                       [&] { // minimal predictor; only cost helpers are used
                         timepred::CalibratedPredictor p;
                         p.blocks.resize(cfg.backbone.num_blocks());
                         p.block_ratios.assign(cfg.backbone.num_blocks(), 1.0);
                         p.dense.ms_by_size.assign(cfg.num_regions, 0.0);
                         return p;
                       }());

  for (int i = 0; i < pp.frames; ++i) {
    const double scale = pp.density_lo + (pp.density_hi - pp.density_lo) * rng.u01();
    scene::ScenarioConfig sc_cfg = base;
    sc_cfg.seed = Rng::mix(pp.seed, static_cast<uint64_t>(i));
    sc_cfg.frame_count = 1;
    sc_cfg.clutter_points = static_cast<int>(base.clutter_points * scale);
    // alternate clutter-heavy and object-heavy mixes so the dilation ratio
    // (and thus the count -> time relation) is not a single curve
    sc_cfg.num_objects = (i % 2 == 0)
                             ? static_cast<int>(base.num_objects * scale)
                             : static_cast<int>(base.num_objects * 2 * scale);
    const scene::Scenario sc = scene::generate_scenario(sc_cfg);
    const scene::Frame frame = scene::render_frame(sc, 0);
    const voxel::SparseVoxelGrid grid = voxel::voxelize(frame.points, cfg.grid);
    const sparseprop::BackboneTrace tr =
        sparseprop::run_backbone(grid, cfg.backbone);
    Rng cost_rng = Rng::sub(pp.seed, 0xb10c, static_cast<uint64_t>(i));
    timepred::ProfileDataset::FrameSample fs;
    fs.block_counts = tr.block_input_counts;
    fs.block_ms = sparseprop::simulate_cost(tr.block_input_counts, cfg.oracle,
                                            cost_rng);
    ds.frames.push_back(std::move(fs));
  }

  Rng stage_rng = Rng::sub(pp.seed, 0xde25e);
  for (int k = 1; k <= cfg.num_regions; ++k)
    for (int rep = 0; rep < pp.dense_reps; ++rep) {
      double ms = sim_probe.dense_noiseless_ms(k);
      if (cfg.stages.sigma_dense > 0.0)
        ms *= std::exp(cfg.stages.sigma_dense * stage_rng.normal());
      ds.dense_samples.emplace_back(k, ms);
    }
  for (int rep = 0; rep < pp.tail_reps; ++rep) {
    double ms = cfg.stages.tail_ms;
    if (cfg.stages.sigma_tail > 0.0)
      ms *= std::exp(cfg.stages.sigma_tail * stage_rng.normal());
    ds.tail_samples.push_back(ms);
  }
  return ds;
}

// Predictor built directly from the ground-truth cost model: block models
// equal the oracle coefficients, the dense table and tail bound equal the
// noiseless stage costs. block_ratios must still be supplied (they describe
// scene content, not the oracle).
inline timepred::CalibratedPredictor exact_predictor(
    const SimConfig& cfg, const std::vector<double>& block_ratios) {
  timepred::CalibratedPredictor pred;
  for (const auto& bc : cfg.oracle.blocks)
    pred.blocks.push_back({bc.a, bc.b, bc.c});
  pred.block_ratios = block_ratios;

  // probe simulation only for dense_noiseless_ms
  scene::ScenarioConfig tiny;
  tiny.frame_count = 1;
  tiny.num_objects = 0;
  tiny.clutter_points = 0;
  Simulation sim(scene::generate_scenario(tiny), cfg, [&] {
    timepred::CalibratedPredictor p;
    p.blocks = pred.blocks;
    p.block_ratios.assign(cfg.backbone.num_blocks(), 1.0);
    p.dense.ms_by_size.assign(cfg.num_regions, 0.0);
    return p;
  }());
  for (int k = 1; k <= cfg.num_regions; ++k)
    pred.dense.ms_by_size.push_back(sim.dense_noiseless_ms(k));
  pred.tail.e_r = cfg.stages.tail_ms;
  pred.mode = cfg.predictor_mode;
  return pred;
}

// Content-derived cold-start ratios: per-block count ratios of one full
// propagation of the scenario's first frame.
inline std::vector<double> scene_block_ratios(const scene::Scenario& sc,
                                              const SimConfig& cfg) {
  const scene::Frame frame = scene::render_frame(sc, 0);
  const voxel::SparseVoxelGrid grid = voxel::voxelize(frame.points, cfg.grid);
  const sparseprop::BackboneTrace tr =
      sparseprop::run_backbone(grid, cfg.backbone);
  std::vector<double> ratios(tr.block_input_counts.size(), 1.0);
  if (tr.block_input_counts[0] > 0)
    for (size_t b = 0; b < ratios.size(); ++b)
      ratios[b] = static_cast<double>(tr.block_input_counts[b]) /
                  static_cast<double>(tr.block_input_counts[0]);
  return ratios;
}

} // namespace valo::harness
