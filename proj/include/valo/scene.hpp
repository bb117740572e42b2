#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "valo/geometry.hpp"
#include "valo/rng.hpp"
#include "valo/voxel.hpp"

namespace valo::scene {

struct GroundTruthObject {
  int id = 0;
  std::string label = "car";
  Vec3 center;              // meters, global frame (box center) at t = 0
  Vec3 size{4.5, 1.9, 1.7}; // length, width, height (meters)
  double heading = 0.0;     // radians, global frame
  Vec2 velocity;            // m/s, global frame

  void validate(double max_speed) const {
    if (size.x <= 0.0 || size.y <= 0.0 || size.z <= 0.0)
      throw std::invalid_argument("object " + std::to_string(id) +
                                  ": size components must be > 0");
    const double v = std::hypot(velocity.x, velocity.y);
    if (v > max_speed)
      throw std::invalid_argument("object " + std::to_string(id) +
                                  ": speed exceeds max_speed");
  }

  Vec3 center_at(double t) const {
    return {center.x + velocity.x * t, center.y + velocity.y * t, center.z};
  }
};

struct ScenarioConfig {
  uint64_t seed = 1;
  double frame_period = 0.35; // seconds
  int frame_count = 40;
  double detection_width = 108.0;  // meters (x, LiDAR frame)
  double detection_height = 108.0; // meters (y)
  double max_speed = 30.0;         // m/s

  // random object population (used when objects below is empty)
  int num_objects = 12;
  double speed_scale = 1.0; // scales sampled object speeds; 0 = static world

  // point sampling
  int points_per_face = 60;     // per object face (4 sides + top)
  int clutter_points = 9000;    // per detection-area's worth of ground
  double clutter_gradient = 0.0; // linear density slope along global x, [-1,1]
  double clutter_z_lo = -0.2;
  double clutter_z_hi = 0.4;

  std::vector<GroundTruthObject> objects; // explicit list, optional
  std::vector<EgoPose> ego_waypoints;     // optional; default = static ego

  void validate() const {
    if (frame_period <= 0.0)
      throw std::invalid_argument("scenario: frame_period must be > 0");
    if (frame_count <= 0)
      throw std::invalid_argument("scenario: frame_count must be > 0");
    if (detection_width <= 0.0)
      throw std::invalid_argument("scenario: detection_width must be > 0");
    if (detection_height <= 0.0)
      throw std::invalid_argument("scenario: detection_height must be > 0");
    if (num_objects < 0)
      throw std::invalid_argument("scenario: num_objects must be >= 0");
    if (points_per_face < 0)
      throw std::invalid_argument("scenario: points_per_face must be >= 0");
    if (clutter_points < 0)
      throw std::invalid_argument("scenario: clutter_points must be >= 0");
    if (clutter_gradient < -1.0 || clutter_gradient > 1.0)
      throw std::invalid_argument("scenario: clutter_gradient must be in [-1,1]");
    if (max_speed <= 0.0)
      throw std::invalid_argument("scenario: max_speed must be > 0");
  }
};

// A scenario owns a fixed world: ground clutter points in the global frame
// and per-object surface points in each object's local frame. Rendering a
// frame is then a pure rigid-transform pass, so a static world produces the
// exact same point set every frame.
struct Scenario {
  ScenarioConfig cfg;
  std::vector<GroundTruthObject> objects; // state at t = 0, global frame
  EgoTrajectory ego;
  std::vector<voxel::Point> clutter;                  // global frame
  std::vector<std::vector<voxel::Point>> surf_points; // object frame, per object

  double duration() const { return cfg.frame_period * (cfg.frame_count - 1); }
  double frame_time(int frame) const { return cfg.frame_period * frame; }
};

// Everything the simulator consumes for one frame. Points and ground truth
// are expressed in the LiDAR frame at the frame's timestamp.
struct Frame {
  int index = 0;
  double timestamp = 0.0;
  EgoPose ego;
  std::vector<voxel::Point> points;
  std::vector<GroundTruthObject> truth; // LiDAR frame: center, heading local
};

namespace detail {

inline const char* kLabels[] = {"car", "pedestrian", "cyclist", "truck"};

inline Vec3 label_size(Rng& rng, const std::string& label) {
  if (label == "pedestrian") return {0.7 + 0.2 * rng.u01(), 0.7, 1.7};
  if (label == "cyclist") return {1.8 + 0.3 * rng.u01(), 0.7, 1.6};
  if (label == "truck") return {7.0 + 2.0 * rng.u01(), 2.6, 3.0};
  return {4.2 + 0.8 * rng.u01(), 1.8 + 0.2 * rng.u01(), 1.6};
}

// Inverse-CDF sample of a linear density 1 + g * (2t - 1) on [0, 1].
inline double sample_linear(Rng& rng, double g) {
  const double u = rng.u01();
  if (std::fabs(g) < 1e-12) return u;
  const double a = 1.0 - g;
  const double t = (-a + std::sqrt(a * a + 4.0 * g * u)) / (2.0 * g);
  return std::min(1.0, std::max(0.0, t));
}

// Surface points of an upright box in its local frame: 4 side faces + top.
inline std::vector<voxel::Point> sample_box_surface(Rng& rng, const Vec3& size,
                                                    int per_face) {
  std::vector<voxel::Point> out;
  const double hl = size.x / 2.0, hw = size.y / 2.0, hh = size.z / 2.0;
  auto emit = [&](double lx, double ly, double lz) {
    out.push_back({lx, ly, lz, rng.uniform(0.1, 0.9)});
  };
  for (int i = 0; i < per_face; ++i) {
    emit(hl, rng.uniform(-hw, hw), rng.uniform(-hh, hh));
    emit(-hl, rng.uniform(-hw, hw), rng.uniform(-hh, hh));
    emit(rng.uniform(-hl, hl), hw, rng.uniform(-hh, hh));
    emit(rng.uniform(-hl, hl), -hw, rng.uniform(-hh, hh));
    emit(rng.uniform(-hl, hl), rng.uniform(-hw, hw), hh);
  }
  return out;
}

} // namespace detail

// Deterministic for a given config: objects, trajectory, and the fixed world
// point sets all come from the seeded stream.
inline Scenario generate_scenario(const ScenarioConfig& cfg) {
  cfg.validate();
  Scenario sc;
  sc.cfg = cfg;

  if (!cfg.objects.empty()) {
    sc.objects = cfg.objects;
  } else {
    Rng rng = Rng::sub(cfg.seed, /*stream=*/0x5ce);
    const double hw = cfg.detection_width / 2.0 - 4.0;
    const double hh = cfg.detection_height / 2.0 - 4.0;
    for (int i = 0; i < cfg.num_objects; ++i) {
      GroundTruthObject obj;
      obj.id = i;
      obj.label = detail::kLabels[rng.below(4)];
      obj.size = detail::label_size(rng, obj.label);
      obj.center = {rng.uniform(-hw, hw), rng.uniform(-hh, hh),
                    obj.size.z / 2.0};
      obj.heading =
          normalize_angle(rng.uniform(-3.141592653589793, 3.141592653589793));
      const double speed =
          std::min(cfg.max_speed, rng.uniform(0.0, 12.0) * cfg.speed_scale);
      obj.velocity = {speed * std::cos(obj.heading),
                      speed * std::sin(obj.heading)};
      sc.objects.push_back(obj);
    }
  }
  for (const auto& o : sc.objects) o.validate(cfg.max_speed);

  if (!cfg.ego_waypoints.empty()) {
    sc.ego.waypoints = cfg.ego_waypoints;
  } else {
    EgoPose start; // static ego covering the whole scenario
    start.timestamp = 0.0;
    EgoPose end = start;
    end.timestamp = sc.duration() + cfg.frame_period;
    sc.ego.waypoints = {start, end};
  }
  for (auto& wp : sc.ego.waypoints) wp.yaw = normalize_angle(wp.yaw);
  sc.ego.validate();
  if (sc.ego.waypoints.back().timestamp < sc.duration())
    throw std::invalid_argument(
        "scenario: ego trajectory ends before the last frame");

  // Clutter covers the union of detection areas along the trajectory, with
  // the count scaled so density per detection area stays as configured.
  {
    const double hw = cfg.detection_width / 2.0;
    const double hh = cfg.detection_height / 2.0;
    double x_lo = 1e300, x_hi = -1e300, y_lo = 1e300, y_hi = -1e300;
    for (int f = 0; f < cfg.frame_count; ++f) {
      const EgoPose p = sc.ego.pose_at(sc.frame_time(f));
      // conservative: a yawed square fits inside the enclosing circle
      const double r = std::hypot(hw, hh);
      x_lo = std::min(x_lo, p.position.x - r);
      x_hi = std::max(x_hi, p.position.x + r);
      y_lo = std::min(y_lo, p.position.y - r);
      y_hi = std::max(y_hi, p.position.y + r);
    }
    const double area_scale = ((x_hi - x_lo) * (y_hi - y_lo)) /
                              (cfg.detection_width * cfg.detection_height);
    const int count = static_cast<int>(cfg.clutter_points *
                                       std::min(area_scale, 16.0));
    Rng rng = Rng::sub(cfg.seed, /*stream=*/0xc1a77e4);
    for (int i = 0; i < count; ++i) {
      voxel::Point p;
      p.x = x_lo + (x_hi - x_lo) * detail::sample_linear(rng, cfg.clutter_gradient);
      p.y = rng.uniform(y_lo, y_hi);
      p.z = rng.uniform(cfg.clutter_z_lo, cfg.clutter_z_hi);
      p.intensity = rng.uniform(0.0, 1.0);
      sc.clutter.push_back(p);
    }
  }

  {
    Rng rng = Rng::sub(cfg.seed, /*stream=*/0x5f); // surface points
    for (const auto& obj : sc.objects)
      sc.surf_points.push_back(
          detail::sample_box_surface(rng, obj.size, cfg.points_per_face));
  }
  return sc;
}

// Pure rigid-transform pass over the scenario's fixed world.
inline Frame render_frame(const Scenario& sc, int frame_index) {
  if (frame_index < 0 || frame_index >= sc.cfg.frame_count)
    throw std::out_of_range("render_frame: frame index " +
                            std::to_string(frame_index) + " out of range");
  Frame fr;
  fr.index = frame_index;
  fr.timestamp = sc.frame_time(frame_index);
  fr.ego = sc.ego.pose_at(fr.timestamp);

  const double hw = sc.cfg.detection_width / 2.0;
  const double hh = sc.cfg.detection_height / 2.0;
  auto clip_emit = [&](const Vec3& local, double intensity) {
    if (local.x < -hw || local.x >= hw || local.y < -hh || local.y >= hh)
      return;
    fr.points.push_back({local.x, local.y, local.z, intensity});
  };

  for (const auto& p : sc.clutter)
    clip_emit(fr.ego.to_local({p.x, p.y, p.z}), p.intensity);

  for (size_t oi = 0; oi < sc.objects.size(); ++oi) {
    const auto& obj = sc.objects[oi];
    const Vec3 c = obj.center_at(fr.timestamp);
    const double cy = std::cos(obj.heading), sy = std::sin(obj.heading);
    for (const auto& sp : sc.surf_points[oi]) {
      const Vec3 global{c.x + cy * sp.x - sy * sp.y,
                        c.y + sy * sp.x + cy * sp.y, c.z + sp.z};
      clip_emit(fr.ego.to_local(global), sp.intensity);
    }
  }

  for (const auto& obj : sc.objects) {
    GroundTruthObject local = obj;
    local.center = fr.ego.to_local(obj.center_at(fr.timestamp));
    local.heading = fr.ego.heading_to_local(obj.heading);
    if (local.center.x < -hw || local.center.x >= hw ||
        local.center.y < -hh || local.center.y >= hh)
      continue;
    fr.truth.push_back(local);
  }
  return fr;
}

// Frame dump: one record per point (x, y, z, intensity). Flat little-endian
// float32 for ".bin", text for ".csv"; selected by extension.
inline void write_frame_dump(const Frame& fr, const std::string& path) {
  const bool csv = path.size() >= 4 && path.substr(path.size() - 4) == ".csv";
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path);
  if (csv) {
    out << "x,y,z,intensity\n";
    char buf[160];
    for (const auto& p : fr.points) {
      std::snprintf(buf, sizeof(buf), "%.9g,%.9g,%.9g,%.9g\n", p.x, p.y, p.z,
                    p.intensity);
      out << buf;
    }
  } else {
    for (const auto& p : fr.points) {
      const float rec[4] = {static_cast<float>(p.x), static_cast<float>(p.y),
                            static_cast<float>(p.z),
                            static_cast<float>(p.intensity)};
      out.write(reinterpret_cast<const char*>(rec), sizeof(rec));
    }
  }
}

} // namespace valo::scene
