#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace valo {

struct Vec3 {
  double x = 0.0, y = 0.0, z = 0.0;

  Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
  Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
  Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
};

struct Vec2 {
  double x = 0.0, y = 0.0;
};

// Normalize an angle to [-pi, pi).
inline double normalize_angle(double a) {
  constexpr double two_pi = 6.283185307179586476925287;
  a = std::fmod(a, two_pi);
  if (a < -3.141592653589793238462643) a += two_pi;
  if (a >= 3.141592653589793238462643) a -= two_pi;
  return a;
}

// Ego pose at a point in time. yaw is the heading of the sensor frame's +x
// axis in the global frame, normalized to [-pi, pi).
struct EgoPose {
  double timestamp = 0.0; // seconds
  Vec3 position;          // meters, global frame
  double yaw = 0.0;       // radians

  // sensor (LiDAR) frame -> global frame
  Vec3 to_global(const Vec3& p) const {
    const double c = std::cos(yaw), s = std::sin(yaw);
    return {position.x + c * p.x - s * p.y, position.y + s * p.x + c * p.y,
            position.z + p.z};
  }

  // global frame -> sensor (LiDAR) frame
  Vec3 to_local(const Vec3& p) const {
    const double c = std::cos(yaw), s = std::sin(yaw);
    const double dx = p.x - position.x, dy = p.y - position.y;
    return {c * dx + s * dy, -s * dx + c * dy, p.z - position.z};
  }

  double heading_to_global(double local_heading) const {
    return normalize_angle(local_heading + yaw);
  }
  double heading_to_local(double global_heading) const {
    return normalize_angle(global_heading - yaw);
  }
};

// Piecewise-linear ego trajectory: positions interpolated linearly between
// waypoints, yaw interpolated along the shortest angular path.
struct EgoTrajectory {
  std::vector<EgoPose> waypoints;

  void validate() const {
    if (waypoints.empty())
      throw std::invalid_argument("ego trajectory: no waypoints");
    for (size_t i = 1; i < waypoints.size(); ++i)
      if (waypoints[i].timestamp <= waypoints[i - 1].timestamp)
        throw std::invalid_argument(
            "ego trajectory: timestamps must be strictly increasing");
  }

  EgoPose pose_at(double t) const {
    if (waypoints.empty())
      throw std::runtime_error("ego trajectory: no waypoints");
    const double t0 = waypoints.front().timestamp;
    const double t1 = waypoints.back().timestamp;
    if (t < t0 - 1e-9 || t > t1 + 1e-9)
      throw std::runtime_error("no ego pose available for t=" +
                               std::to_string(t));
    if (waypoints.size() == 1 || t <= t0) return at_index(0, t);
    size_t hi = 1;
    while (hi < waypoints.size() - 1 && waypoints[hi].timestamp < t) ++hi;
    const EgoPose& a = waypoints[hi - 1];
    const EgoPose& b = waypoints[hi];
    const double u = (t - a.timestamp) / (b.timestamp - a.timestamp);
    EgoPose p;
    p.timestamp = t;
    p.position = a.position + (b.position - a.position) * u;
    p.yaw = normalize_angle(a.yaw + normalize_angle(b.yaw - a.yaw) * u);
    return p;
  }

private:
  EgoPose at_index(size_t i, double t) const {
    EgoPose p = waypoints[i];
    p.timestamp = t;
    p.yaw = normalize_angle(p.yaw);
    return p;
  }
};

} // namespace valo
