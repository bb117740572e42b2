#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "valo/geometry.hpp"

namespace valo::forecast {

// Detected-object state. position/heading are expressed in the LiDAR frame
// of the detection time; velocity stays in the global frame so constant-
// velocity extrapolation is frame-independent.
struct ObjectPose {
  Vec3 position;            // T, meters, LiDAR frame at t_det
  Vec3 size{1.0, 1.0, 1.0}; // l, w, h meters
  double heading = 0.0;     // radians, LiDAR frame at t_det
  Vec2 velocity;            // m/s, global frame
  double confidence = 1.0;  // [0, 1]
  std::string label = "car";
  double t_det = 0.0;       // seconds
  int source_region = 0;

  void validate() const {
    if (confidence < 0.0 || confidence > 1.0)
      throw std::invalid_argument("pose: confidence outside [0,1]");
    if (size.x <= 0.0 || size.y <= 0.0 || size.z <= 0.0)
      throw std::invalid_argument("pose: size components must be > 0");
  }
};

// Latest detections per region: one generation of poses per source region,
// replaced wholesale whenever that region is processed again.
class PoseQueue {
public:
  // Remove every pose belonging to a processed region, then append the fresh
  // detections. A detection tagged with an unprocessed region is a contract
  // violation.
  void update(const std::vector<ObjectPose>& fresh,
              const std::vector<int>& processed_regions) {
    std::vector<char> processed;
    int max_r = -1;
    for (int r : processed_regions) max_r = std::max(max_r, r);
    for (const auto& p : fresh) max_r = std::max(max_r, p.source_region);
    processed.assign(static_cast<size_t>(max_r) + 2, 0);
    for (int r : processed_regions) processed[r] = 1;
    for (const auto& p : fresh)
      if (p.source_region < 0 || !processed[p.source_region])
        throw std::invalid_argument(
            "pose queue: detection tagged with unprocessed region " +
            std::to_string(p.source_region));

    for (int r : processed_regions) by_region_.erase(r);
    for (const auto& p : fresh) by_region_[p.source_region].push_back(p);
  }

  size_t size() const {
    size_t n = 0;
    for (const auto& [r, v] : by_region_) n += v.size();
    return n;
  }

  std::vector<ObjectPose> all() const {
    std::vector<ObjectPose> out;
    for (const auto& [r, v] : by_region_)
      out.insert(out.end(), v.begin(), v.end());
    return out;
  }

  const std::map<int, std::vector<ObjectPose>>& by_region() const {
    return by_region_;
  }

  void clear() { by_region_.clear(); }

private:
  std::map<int, std::vector<ObjectPose>> by_region_;
};

using EgoLookup = std::function<EgoPose(double)>;

// Forecast one pose from its detection frame to t_cur:
//   1. LiDAR(t_det) -> global via the detection-time ego pose,
//   2. advance by v * (t_cur - t_det),
//   3. global -> LiDAR(t_cur) via the current ego pose.
// Size, velocity, confidence and label carry over unchanged.
inline ObjectPose forecast_pose(const ObjectPose& pose,
                                const EgoPose& ego_at_det,
                                const EgoPose& ego_at_cur, double t_cur) {
  ObjectPose out = pose;
  Vec3 global = ego_at_det.to_global(pose.position);
  const double heading_global = ego_at_det.heading_to_global(pose.heading);
  const double dt = t_cur - pose.t_det;
  global.x += pose.velocity.x * dt;
  global.y += pose.velocity.y * dt;
  out.position = ego_at_cur.to_local(global);
  out.heading = ego_at_cur.heading_to_local(heading_global);
  out.t_det = t_cur;
  return out;
}

// Forecast every queued pose to t_cur. Poses older than max_age_s are
// expired instead of forecast; the queue itself is left untouched.
inline std::vector<ObjectPose> forecast_all(const PoseQueue& queue,
                                            const EgoLookup& ego_at,
                                            const EgoPose& ego_at_cur,
                                            double t_cur,
                                            double max_age_s = 3.5) {
  std::vector<ObjectPose> out;
  for (const auto& [region, poses] : queue.by_region()) {
    for (const auto& pose : poses) {
      if (t_cur - pose.t_det > max_age_s) continue;
      out.push_back(forecast_pose(pose, ego_at(pose.t_det), ego_at_cur, t_cur));
    }
  }
  return out;
}

// BEV IoU surrogate: both boxes are expressed in the reference box's heading
// frame and intersected as axis-aligned rectangles. Cheap and sufficient for
// overlap detection in the merge; swap in an exact rotated IoU via the hook
// on merge_nms if needed.
inline double bev_iou_surrogate(const ObjectPose& ref, const ObjectPose& other) {
  const double c = std::cos(ref.heading), s = std::sin(ref.heading);
  const double dx = other.position.x - ref.position.x;
  const double dy = other.position.y - ref.position.y;
  const double rx = c * dx + s * dy;  // other's center in ref frame
  const double ry = -s * dx + c * dy;

  const double a_l = ref.size.x, a_w = ref.size.y;
  const double b_l = other.size.x, b_w = other.size.y;
  const double ix = std::min(a_l / 2, rx + b_l / 2) - std::max(-a_l / 2, rx - b_l / 2);
  const double iy = std::min(a_w / 2, ry + b_w / 2) - std::max(-a_w / 2, ry - b_w / 2);
  if (ix <= 0.0 || iy <= 0.0) return 0.0;
  const double inter = ix * iy;
  const double uni = a_l * a_w + b_l * b_w - inter;
  return uni > 0.0 ? inter / uni : 0.0;
}

using IouFn = std::function<double(const ObjectPose&, const ObjectPose&)>;

// Priority NMS: detections always survive. A forecast overlapping any
// detection of the same label at >= threshold is removed, then the surviving
// forecasts go through standard greedy score-ordered NMS among themselves.
inline std::vector<ObjectPose> merge_nms(
    const std::vector<ObjectPose>& detections,
    const std::vector<ObjectPose>& forecasts, double iou_threshold,
    const IouFn& iou = bev_iou_surrogate) {
  if (iou_threshold <= 0.0 || iou_threshold >= 1.0)
    throw std::invalid_argument("merge_nms: threshold must be in (0,1)");

  std::vector<ObjectPose> out = detections;
  std::vector<ObjectPose> alive;
  for (const auto& f : forecasts) {
    bool suppressed = false;
    for (const auto& d : detections)
      if (d.label == f.label && iou(d, f) >= iou_threshold) {
        suppressed = true;
        break;
      }
    if (!suppressed) alive.push_back(f);
  }

  std::stable_sort(alive.begin(), alive.end(),
                   [](const ObjectPose& a, const ObjectPose& b) {
                     return a.confidence > b.confidence;
                   });
  std::vector<char> removed(alive.size(), 0);
  for (size_t i = 0; i < alive.size(); ++i) {
    if (removed[i]) continue;
    out.push_back(alive[i]);
    for (size_t j = i + 1; j < alive.size(); ++j)
      if (!removed[j] && alive[i].label == alive[j].label &&
          iou(alive[i], alive[j]) >= iou_threshold)
        removed[j] = 1;
  }
  return out;
}

} // namespace valo::forecast
