#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace valo::timepred {

// Per-block latency model E_B(n) = alpha n^2 + beta n + gamma (milliseconds).
struct BlockTimeModel {
  double alpha = 0.0;
  double beta = 0.0;
  double gamma = 0.0;

  double eval(int64_t n) const {
    const double x = static_cast<double>(n);
    return alpha * x * x + beta * x + gamma;
  }
};

// Offline-profiled dense-stage time, one entry per possible selection size.
struct DenseTimeTable {
  std::vector<double> ms_by_size; // index k-1 for |R_sel| = k

  double at(int num_regions) const {
    if (num_regions < 1 ||
        num_regions > static_cast<int>(ms_by_size.size()))
      throw std::out_of_range("dense table: size " +
                              std::to_string(num_regions) + " not profiled");
    return ms_by_size[static_cast<size_t>(num_regions) - 1];
  }
  int max_size() const { return static_cast<int>(ms_by_size.size()); }
};

struct TailTimeBound {
  double e_r = 0.0; // ms
};

// Last-observed per-region block input counts, refreshed only when a region
// is actually processed. Rows never processed stay unknown and fall back to
// ratio scaling at prediction time.
class HistoryStore {
public:
  HistoryStore() = default;
  HistoryStore(int num_regions, int num_blocks)
      : num_regions_(num_regions), num_blocks_(num_blocks),
        counts_(static_cast<size_t>(num_regions) * num_blocks, 0),
        last_frame_(static_cast<size_t>(num_regions), -1) {}

  int num_regions() const { return num_regions_; }
  int num_blocks() const { return num_blocks_; }
  bool known(int region) const { return last_frame_[region] >= 0; }
  int64_t last_update_frame(int region) const { return last_frame_[region]; }

  int64_t count(int region, int block) const {
    return counts_[static_cast<size_t>(region) * num_blocks_ + block];
  }

  void update_row(int region, const int64_t* block_counts, int64_t frame) {
    for (int b = 0; b < num_blocks_; ++b)
      counts_[static_cast<size_t>(region) * num_blocks_ + b] = block_counts[b];
    last_frame_[region] = frame;
  }

  // Staleness in frames; -1 when the region was never processed.
  int64_t staleness(int region, int64_t frame) const {
    return known(region) ? frame - last_frame_[region] : -1;
  }

private:
  int num_regions_ = 0;
  int num_blocks_ = 0;
  std::vector<int64_t> counts_;
  std::vector<int64_t> last_frame_;
};

// Overwrite exactly the rows of the processed regions with this frame's
// per-region block counts.
template <typename RegionBlockMatrix>
inline void update_history(HistoryStore& history,
                           const std::vector<int>& processed,
                           const RegionBlockMatrix& counts, int64_t frame) {
  std::vector<int64_t> row(static_cast<size_t>(history.num_blocks()));
  for (int r : processed) {
    for (int b = 0; b < history.num_blocks(); ++b) row[b] = counts.at(r, b);
    history.update_row(r, row.data(), frame);
  }
}

// Profiling samples, grouped per profiled frame so both the per-block models
// and the whole-backbone baseline can be fitted from the same dataset.
struct ProfileDataset {
  struct FrameSample {
    std::vector<int64_t> block_counts;
    std::vector<double> block_ms;
  };
  std::vector<FrameSample> frames;
  std::vector<std::pair<int, double>> dense_samples; // (|R_sel|, ms)
  std::vector<double> tail_samples;                  // ms

  int num_blocks() const {
    return frames.empty() ? 0 : static_cast<int>(frames[0].block_counts.size());
  }
};

struct FitResult {
  BlockTimeModel model;
  double max_abs_residual = 0.0;
  double rms_residual = 0.0;
};

// Least-squares quadratic via normal equations on the mean-centered, scaled
// abscissa; raw voxel counts (~1e5) would make the raw-power basis hopeless.
inline FitResult fit_quadratic(const std::vector<std::pair<int64_t, double>>&
                                   samples) {
  std::vector<long double> xs, ys;
  long double x_min = 0, x_max = 0;
  for (const auto& [n, ms] : samples) {
    xs.push_back(static_cast<long double>(n));
    ys.push_back(static_cast<long double>(ms));
  }
  if (xs.size() < 3)
    throw std::invalid_argument("fit: need at least 3 samples");
  {
    auto [lo, hi] = std::minmax_element(xs.begin(), xs.end());
    x_min = *lo;
    x_max = *hi;
  }
  // identifiability: three distinct abscissae
  {
    std::vector<long double> d = xs;
    std::sort(d.begin(), d.end());
    d.erase(std::unique(d.begin(), d.end()), d.end());
    if (d.size() < 3)
      throw std::invalid_argument(
          "fit: need >= 3 distinct counts for a quadratic (got " +
          std::to_string(d.size()) + ")");
  }

  long double mean = 0;
  for (long double x : xs) mean += x;
  mean /= xs.size();
  long double scale = (x_max - x_min) / 2;
  if (scale <= 0) scale = 1;

  // normal equations for t = A + B u + C u^2, u = (x - mean) / scale
  long double s[5] = {0, 0, 0, 0, 0}; // sums of u^0..u^4
  long double t0 = 0, t1 = 0, t2 = 0; // sums of y u^0..u^2
  for (size_t i = 0; i < xs.size(); ++i) {
    const long double u = (xs[i] - mean) / scale;
    long double p = 1;
    for (int k = 0; k < 5; ++k) {
      s[k] += p;
      p *= u;
    }
    t0 += ys[i];
    t1 += ys[i] * u;
    t2 += ys[i] * u * u;
  }
  long double m[3][4] = {{s[0], s[1], s[2], t0},
                         {s[1], s[2], s[3], t1},
                         {s[2], s[3], s[4], t2}};
  // Gaussian elimination with partial pivoting
  for (int col = 0; col < 3; ++col) {
    int piv = col;
    for (int r = col + 1; r < 3; ++r)
      if (std::fabs(static_cast<double>(m[r][col])) >
          std::fabs(static_cast<double>(m[piv][col])))
        piv = r;
    std::swap(m[col], m[piv]);
    if (m[col][col] == 0)
      throw std::invalid_argument("fit: rank-deficient design");
    for (int r = 0; r < 3; ++r) {
      if (r == col) continue;
      const long double f = m[r][col] / m[col][col];
      for (int k = col; k < 4; ++k) m[r][k] -= f * m[col][k];
    }
  }
  const long double A = m[0][3] / m[0][0];
  const long double B = m[1][3] / m[1][1];
  const long double C = m[2][3] / m[2][2];

  FitResult fr;
  fr.model.alpha = static_cast<double>(C / (scale * scale));
  fr.model.beta = static_cast<double>(B / scale - 2 * C * mean / (scale * scale));
  fr.model.gamma = static_cast<double>(A - B * mean / scale +
                                       C * mean * mean / (scale * scale));
  long double sq = 0;
  for (const auto& [n, ms] : samples) {
    const double r = ms - fr.model.eval(n);
    fr.max_abs_residual = std::max(fr.max_abs_residual, std::fabs(r));
    sq += static_cast<long double>(r) * r;
  }
  fr.rms_residual = std::sqrt(static_cast<double>(sq / samples.size()));
  return fr;
}

inline FitResult fit_block_model(const ProfileDataset& ds, int block) {
  std::vector<std::pair<int64_t, double>> samples;
  for (const auto& fr : ds.frames)
    samples.emplace_back(fr.block_counts.at(block), fr.block_ms.at(block));
  return fit_quadratic(samples);
}

// Upper nearest-rank percentile: smallest sample at sorted position
// ceil(p * (N - 1)), zero-based. For 100 samples at p = 0.99 this picks the
// maximum.
inline double percentile_upper(std::vector<double> v, double p) {
  if (v.empty()) throw std::invalid_argument("percentile: no samples");
  std::sort(v.begin(), v.end());
  const double pos = p * static_cast<double>(v.size() - 1);
  size_t idx = static_cast<size_t>(std::ceil(pos));
  if (idx >= v.size()) idx = v.size() - 1;
  return v[idx];
}

enum class PredictorMode { history, whole_quadratic };

// Everything the scheduler needs to price a candidate selection.
struct CalibratedPredictor {
  std::vector<BlockTimeModel> blocks;
  DenseTimeTable dense;
  TailTimeBound tail;
  std::vector<double> block_ratios; // cold-start count ratio per block
  BlockTimeModel whole_quadratic;   // baseline: total ms vs total input count
  PredictorMode mode = PredictorMode::history;

  int num_blocks() const { return static_cast<int>(blocks.size()); }
};

// Predicted 3D-backbone time for a candidate region list. The first block's
// count is known exactly from the candidate voxel counts; later blocks come
// from the history store, with unknown rows falling back to the calibrated
// per-block ratio of the region's first-block count.
inline double predict_e_s(const CalibratedPredictor& pred,
                          const std::vector<int>& candidate_regions,
                          const std::vector<int64_t>& candidate_counts,
                          const HistoryStore& history) {
  if (candidate_regions.empty())
    throw std::invalid_argument("predict_e_s: empty candidate list");
  int64_t first_block = 0;
  for (int64_t c : candidate_counts) first_block += c;

  if (pred.mode == PredictorMode::whole_quadratic)
    return pred.whole_quadratic.eval(first_block);

  double total = pred.blocks[0].eval(first_block);
  for (int b = 1; b < pred.num_blocks(); ++b) {
    double count_b = 0.0;
    for (size_t i = 0; i < candidate_regions.size(); ++i) {
      const int r = candidate_regions[i];
      if (history.known(r))
        count_b += static_cast<double>(history.count(r, b));
      else
        count_b += static_cast<double>(candidate_counts[i]) *
                   pred.block_ratios[b];
    }
    total += pred.blocks[b].eval(static_cast<int64_t>(std::llround(count_b)));
  }
  return total;
}

// E = E_S + E_D + E_R for the candidate selection.
inline double predict_total(const CalibratedPredictor& pred,
                            const std::vector<int>& candidate_regions,
                            const std::vector<int64_t>& candidate_counts,
                            const HistoryStore& history) {
  return predict_e_s(pred, candidate_regions, candidate_counts, history) +
         pred.dense.at(static_cast<int>(candidate_regions.size())) +
         pred.tail.e_r;
}

// Fit every predictor component from one profile dataset. Dense samples must
// cover every selection size 1..N_R; the table is mean-per-size with a
// running-max pass so the non-decreasing invariant survives noisy profiles.
inline CalibratedPredictor calibrate(const ProfileDataset& ds,
                                     int num_region_sizes) {
  if (ds.frames.empty())
    throw std::invalid_argument("calibrate: no profile frames");
  CalibratedPredictor pred;
  const int nb = ds.num_blocks();
  for (int b = 0; b < nb; ++b) {
    FitResult fr = fit_block_model(ds, b);
    fr.model.gamma = std::max(0.0, fr.model.gamma);
    pred.blocks.push_back(fr.model);
  }

  // whole-backbone baseline: total time vs block-1 count
  {
    std::vector<std::pair<int64_t, double>> totals;
    for (const auto& fr : ds.frames) {
      double sum = 0.0;
      for (double ms : fr.block_ms) sum += ms;
      totals.emplace_back(fr.block_counts[0], sum);
    }
    pred.whole_quadratic = fit_quadratic(totals).model;
  }

  pred.block_ratios.assign(nb, 1.0);
  {
    std::vector<long double> sums(nb, 0);
    for (const auto& fr : ds.frames)
      for (int b = 0; b < nb; ++b) sums[b] += fr.block_counts[b];
    for (int b = 0; b < nb; ++b)
      pred.block_ratios[b] =
          sums[0] > 0 ? static_cast<double>(sums[b] / sums[0]) : 1.0;
  }

  std::map<int, std::pair<double, int>> per_size; // sum, count
  for (const auto& [k, ms] : ds.dense_samples) {
    auto& agg = per_size[k];
    agg.first += ms;
    agg.second += 1;
  }
  std::string gaps;
  for (int k = 1; k <= num_region_sizes; ++k)
    if (!per_size.count(k)) gaps += (gaps.empty() ? "" : ", ") + std::to_string(k);
  if (!gaps.empty())
    throw std::invalid_argument(
        "calibrate: dense samples missing selection sizes: " + gaps);
  double running = 0.0;
  for (int k = 1; k <= num_region_sizes; ++k) {
    const auto& agg = per_size[k];
    running = std::max(running, agg.first / agg.second);
    pred.dense.ms_by_size.push_back(running);
  }

  pred.tail.e_r = percentile_upper(ds.tail_samples, 0.99);
  return pred;
}

// ---- serialization ----------------------------------------------------

inline std::string format_full(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

// CSV with one section per sample kind.
inline void write_profile_csv(const ProfileDataset& ds,
                              const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path);
  out << "[blocks]\nframe,block,count,ms\n";
  for (size_t f = 0; f < ds.frames.size(); ++f)
    for (size_t b = 0; b < ds.frames[f].block_counts.size(); ++b)
      out << f << ',' << b << ',' << ds.frames[f].block_counts[b] << ','
          << format_full(ds.frames[f].block_ms[b]) << '\n';
  out << "[dense]\nnum_regions,ms\n";
  for (const auto& [k, ms] : ds.dense_samples)
    out << k << ',' << format_full(ms) << '\n';
  out << "[tail]\nms\n";
  for (double ms : ds.tail_samples) out << format_full(ms) << '\n';
}

inline ProfileDataset read_profile_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  ProfileDataset ds;
  std::string line, section;
  int lineno = 0;
  auto fail = [&](const std::string& why) {
    throw std::runtime_error(path + ":" + std::to_string(lineno) + ": " + why);
  };
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line.front() == '[') {
      section = line;
      std::getline(in, line); // skip header row
      ++lineno;
      continue;
    }
    std::istringstream ss(line);
    std::string tok;
    std::vector<std::string> cols;
    while (std::getline(ss, tok, ',')) cols.push_back(tok);
    try {
      if (section == "[blocks]") {
        if (cols.size() != 4) fail("expected frame,block,count,ms");
        const size_t f = std::stoul(cols[0]);
        const size_t b = std::stoul(cols[1]);
        if (ds.frames.size() <= f) ds.frames.resize(f + 1);
        auto& fr = ds.frames[f];
        if (fr.block_counts.size() <= b) {
          fr.block_counts.resize(b + 1, 0);
          fr.block_ms.resize(b + 1, 0.0);
        }
        fr.block_counts[b] = std::stoll(cols[2]);
        fr.block_ms[b] = std::stod(cols[3]);
      } else if (section == "[dense]") {
        if (cols.size() != 2) fail("expected num_regions,ms");
        ds.dense_samples.emplace_back(std::stoi(cols[0]), std::stod(cols[1]));
      } else if (section == "[tail]") {
        if (cols.size() != 1) fail("expected ms");
        ds.tail_samples.push_back(std::stod(cols[0]));
      } else {
        fail("row outside a known section");
      }
    } catch (const std::invalid_argument&) {
      fail("malformed number");
    }
  }
  return ds;
}

inline void write_calibration(const CalibratedPredictor& pred,
                              const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path);
  out << "[blocks]\n";
  for (const auto& m : pred.blocks)
    out << format_full(m.alpha) << ' ' << format_full(m.beta) << ' '
        << format_full(m.gamma) << '\n';
  out << "[whole_quadratic]\n"
      << format_full(pred.whole_quadratic.alpha) << ' '
      << format_full(pred.whole_quadratic.beta) << ' '
      << format_full(pred.whole_quadratic.gamma) << '\n';
  out << "[ratios]\n";
  for (double r : pred.block_ratios) out << format_full(r) << '\n';
  out << "[dense]\n";
  for (double ms : pred.dense.ms_by_size) out << format_full(ms) << '\n';
  out << "[tail]\n" << format_full(pred.tail.e_r) << '\n';
}

inline CalibratedPredictor read_calibration(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open calibration file " + path);
  CalibratedPredictor pred;
  std::string line, section;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line.front() == '[') {
      section = line;
      continue;
    }
    std::istringstream ss(line);
    if (section == "[blocks]") {
      BlockTimeModel m;
      ss >> m.alpha >> m.beta >> m.gamma;
      pred.blocks.push_back(m);
    } else if (section == "[whole_quadratic]") {
      ss >> pred.whole_quadratic.alpha >> pred.whole_quadratic.beta >>
          pred.whole_quadratic.gamma;
    } else if (section == "[ratios]") {
      double r;
      ss >> r;
      pred.block_ratios.push_back(r);
    } else if (section == "[dense]") {
      double ms;
      ss >> ms;
      pred.dense.ms_by_size.push_back(ms);
    } else if (section == "[tail]") {
      ss >> pred.tail.e_r;
    } else {
      throw std::runtime_error(path + ": row outside a known section");
    }
  }
  if (pred.blocks.empty())
    throw std::runtime_error(path + ": no block models found");
  return pred;
}

} // namespace valo::timepred
