#pragma once

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "valo/harness.hpp"

namespace valo::report {

inline std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline const char* metrics_csv_header() {
  return "deadline_ms,frames,miss_rate,recall,precision,mean_selected,"
         "mean_processed,mean_staleness,max_staleness,mean_sparse_ms,"
         "mean_dense_ms,mean_tail_ms,mean_total_ms,p99_total_ms";
}

inline std::string metrics_csv_row(const harness::RunMetrics& m) {
  std::ostringstream out;
  out << fmt(m.deadline_ms) << ',' << m.frames << ',' << fmt(m.miss_rate)
      << ',' << fmt(m.recall) << ',' << fmt(m.precision) << ','
      << fmt(m.mean_selected) << ',' << fmt(m.mean_processed) << ','
      << fmt(m.mean_staleness) << ',' << fmt(m.max_staleness) << ','
      << fmt(m.sparse.mean) << ',' << fmt(m.dense.mean) << ','
      << fmt(m.tail.mean) << ',' << fmt(m.total.mean) << ','
      << fmt(m.total.p99);
  return out.str();
}

inline void write_metrics_csv(const std::vector<harness::RunMetrics>& rows,
                              const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path);
  out << metrics_csv_header() << '\n';
  for (const auto& m : rows) out << metrics_csv_row(m) << '\n';
}

inline std::vector<harness::RunMetrics> read_metrics_csv(
    const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::vector<harness::RunMetrics> rows;
  std::string line;
  std::getline(in, line); // header
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string tok;
    std::vector<double> v;
    while (std::getline(ss, tok, ',')) v.push_back(std::stod(tok));
    if (v.size() < 14) throw std::runtime_error(path + ": short metrics row");
    harness::RunMetrics m;
    m.deadline_ms = v[0];
    m.frames = static_cast<int>(v[1]);
    m.miss_rate = v[2];
    m.recall = v[3];
    m.precision = v[4];
    m.mean_selected = v[5];
    m.mean_processed = v[6];
    m.mean_staleness = v[7];
    m.max_staleness = v[8];
    m.sparse.mean = v[9];
    m.dense.mean = v[10];
    m.tail.mean = v[11];
    m.total.mean = v[12];
    m.total.p99 = v[13];
    rows.push_back(m);
  }
  return rows;
}

// Per-frame decision log, one JSON document per run.
inline nlohmann::json frames_to_json(const harness::RunResult& rr) {
  nlohmann::json j;
  j["deadline_ms"] = rr.metrics.deadline_ms;
  j["frames"] = nlohmann::json::array();
  for (const auto& fr : rr.frames) {
    nlohmann::json f;
    f["frame"] = fr.frame;
    f["timestamp"] = fr.timestamp;
    f["r_last_before"] = fr.r_last_before;
    f["span_regions"] = fr.span_regions;
    f["span_counts"] = fr.span_counts;
    f["selected"] = fr.selected;
    f["processed"] = fr.processed;
    f["dropped_regions"] = fr.dropped_regions;
    f["predicted_e_ms"] = fr.predicted_e_ms;
    f["remaining_ms"] = fr.remaining_ms;
    f["sched_feasible"] = fr.sched_feasible;
    f["predicted_es_history_ms"] = fr.predicted_es_history_ms;
    f["predicted_es_quadratic_ms"] = fr.predicted_es_quadratic_ms;
    f["actual_es_ms"] = fr.actual_es_ms;
    f["overhead_ms"] = fr.overhead_ms;
    f["sparse_ms"] = fr.sparse_ms;
    f["forecast_ms"] = fr.forecast_ms;
    f["forecast_excess_ms"] = fr.forecast_excess_ms;
    f["dense_ms"] = fr.dense_ms;
    f["tail_ms"] = fr.tail_ms;
    f["total_ms"] = fr.total_ms;
    f["met_deadline"] = fr.met_deadline;
    f["buffer_used"] = fr.buffer_used;
    f["fresh_detections"] = fr.fresh_detections;
    f["forecast_poses"] = fr.forecast_poses;
    j["frames"].push_back(std::move(f));
  }
  return j;
}

// Final merged poses, one row per pose per frame.
inline void write_poses_csv(const harness::RunResult& rr,
                            const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path);
  out << "frame,source,label,x,y,z,l,w,h,heading,vx,vy,confidence,t_det\n";
  for (const auto& fr : rr.frames) {
    // merge_nms keeps detections first, surviving forecasts after
    for (size_t i = 0; i < fr.emitted.size(); ++i) {
      const auto& p = fr.emitted[i];
      const bool is_forecast = static_cast<int>(i) >= fr.fresh_detections;
      out << fr.frame << ',' << (is_forecast ? "forecast" : "detected") << ','
          << p.label << ',' << fmt(p.position.x) << ',' << fmt(p.position.y)
          << ',' << fmt(p.position.z) << ',' << fmt(p.size.x) << ','
          << fmt(p.size.y) << ',' << fmt(p.size.z) << ',' << fmt(p.heading)
          << ',' << fmt(p.velocity.x) << ',' << fmt(p.velocity.y) << ','
          << fmt(p.confidence) << ',' << fmt(p.t_det) << '\n';
    }
  }
}

// Minimal line chart, one polyline per series over a shared x axis.
struct ChartSeries {
  std::string label;
  std::string color = "#1f77b4";
  std::vector<double> y;
};

inline void write_svg_chart(const std::string& path, const std::string& title,
                            const std::string& x_label,
                            const std::vector<double>& xs,
                            const std::vector<ChartSeries>& series) {
  const int w = 640, h = 400, ml = 70, mr = 20, mt = 40, mb = 50;
  double x_min = xs.front(), x_max = xs.back();
  if (x_min > x_max) std::swap(x_min, x_max);
  double y_min = 0.0, y_max = 1e-12;
  for (const auto& s : series)
    for (double v : s.y) y_max = std::max(y_max, v);
  y_max *= 1.08;

  auto px = [&](double x) {
    return ml + (x - x_min) / (x_max - x_min + 1e-300) * (w - ml - mr);
  };
  auto py = [&](double y) {
    return h - mb - (y - y_min) / (y_max - y_min) * (h - mt - mb);
  };

  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path);
  out << "<svg xmlns='http://www.w3.org/2000/svg' width='" << w
      << "' height='" << h << "'>\n";
  out << "<rect width='100%' height='100%' fill='white'/>\n";
  out << "<text x='" << w / 2 << "' y='24' text-anchor='middle' "
         "font-family='sans-serif' font-size='16'>" << title << "</text>\n";
  out << "<line x1='" << ml << "' y1='" << h - mb << "' x2='" << w - mr
      << "' y2='" << h - mb << "' stroke='black'/>\n";
  out << "<line x1='" << ml << "' y1='" << mt << "' x2='" << ml << "' y2='"
      << h - mb << "' stroke='black'/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double yv = y_min + (y_max - y_min) * i / 4.0;
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.3g", yv);
    out << "<text x='" << ml - 8 << "' y='" << py(yv) + 4
        << "' text-anchor='end' font-family='sans-serif' font-size='11'>"
        << buf << "</text>\n";
    out << "<line x1='" << ml << "' y1='" << py(yv) << "' x2='" << w - mr
        << "' y2='" << py(yv) << "' stroke='#dddddd'/>\n";
  }
  for (double xv : xs) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.4g", xv);
    out << "<text x='" << px(xv) << "' y='" << h - mb + 18
        << "' text-anchor='middle' font-family='sans-serif' font-size='11'>"
        << buf << "</text>\n";
  }
  out << "<text x='" << (ml + w - mr) / 2 << "' y='" << h - 12
      << "' text-anchor='middle' font-family='sans-serif' font-size='12'>"
      << x_label << "</text>\n";
  int li = 0;
  for (const auto& s : series) {
    out << "<polyline fill='none' stroke='" << s.color
        << "' stroke-width='2' points='";
    for (size_t i = 0; i < xs.size() && i < s.y.size(); ++i)
      out << px(xs[i]) << ',' << py(s.y[i]) << ' ';
    out << "'/>\n";
    for (size_t i = 0; i < xs.size() && i < s.y.size(); ++i)
      out << "<circle cx='" << px(xs[i]) << "' cy='" << py(s.y[i])
          << "' r='3' fill='" << s.color << "'/>\n";
    out << "<text x='" << w - mr - 10 << "' y='" << mt + 16 * li
        << "' text-anchor='end' font-family='sans-serif' font-size='12' fill='"
        << s.color << "'>" << s.label << "</text>\n";
    ++li;
  }
  out << "</svg>\n";
}

// Accuracy-proxy and miss-rate charts over a deadline sweep.
inline void write_sweep_charts(const std::vector<harness::RunMetrics>& rows,
                               const std::string& dir) {
  std::vector<double> xs;
  ChartSeries recall{"recall", "#1f77b4", {}};
  ChartSeries precision{"precision", "#2ca02c", {}};
  ChartSeries miss{"miss rate", "#d62728", {}};
  for (const auto& m : rows) {
    xs.push_back(m.deadline_ms);
    recall.y.push_back(m.recall);
    precision.y.push_back(m.precision);
    miss.y.push_back(m.miss_rate);
  }
  write_svg_chart(dir + "/accuracy_vs_deadline.svg",
                  "Accuracy proxy vs deadline", "deadline (ms)", xs,
                  {recall, precision});
  write_svg_chart(dir + "/miss_rate_vs_deadline.svg", "Miss rate vs deadline",
                  "deadline (ms)", xs, {miss});
}

} // namespace valo::report
