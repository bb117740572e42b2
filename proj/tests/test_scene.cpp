#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <sstream>

#include "valo/scene.hpp"

using namespace valo;
using namespace valo::scene;

namespace {

std::string serialize(const Frame& fr) {
  std::ostringstream ss;
  ss.precision(17);
  for (const auto& p : fr.points)
    ss << p.x << ' ' << p.y << ' ' << p.z << ' ' << p.intensity << '\n';
  for (const auto& t : fr.truth)
    ss << t.id << ' ' << t.center.x << ' ' << t.center.y << ' ' << t.heading
       << '\n';
  return ss.str();
}

ScenarioConfig small_cfg(uint64_t seed = 1) {
  ScenarioConfig cfg;
  cfg.seed = seed;
  cfg.frame_count = 5;
  cfg.num_objects = 4;
  cfg.clutter_points = 300;
  cfg.points_per_face = 10;
  return cfg;
}

} // namespace

TEST_CASE("generate_scenario is deterministic under a fixed seed") {
  const Scenario a = generate_scenario(small_cfg(1));
  const Scenario b = generate_scenario(small_cfg(1));
  REQUIRE(a.objects.size() == b.objects.size());
  REQUIRE(serialize(render_frame(a, 2)) == serialize(render_frame(b, 2)));
}

TEST_CASE("scenario with zero objects is valid and empty") {
  ScenarioConfig cfg = small_cfg();
  cfg.num_objects = 0;
  const Scenario sc = generate_scenario(cfg);
  REQUIRE(sc.objects.empty());
  REQUIRE(render_frame(sc, 0).truth.empty());
}

TEST_CASE("different seeds produce different object placements") {
  const Scenario a = generate_scenario(small_cfg(1));
  const Scenario b = generate_scenario(small_cfg(2));
  REQUIRE(serialize(render_frame(a, 0)) != serialize(render_frame(b, 0)));
}

TEST_CASE("static scene renders identical ground truth on frames 0 and 1") {
  ScenarioConfig cfg = small_cfg();
  cfg.speed_scale = 0.0;
  const Scenario sc = generate_scenario(cfg);
  const Frame f0 = render_frame(sc, 0);
  const Frame f1 = render_frame(sc, 1);
  REQUIRE(f0.truth.size() == f1.truth.size());
  for (size_t i = 0; i < f0.truth.size(); ++i) {
    REQUIRE(f0.truth[i].center.x == f1.truth[i].center.x);
    REQUIRE(f0.truth[i].center.y == f1.truth[i].center.y);
    REQUIRE(f0.truth[i].heading == f1.truth[i].heading);
  }
}

TEST_CASE("constant-velocity object advances 0.7 m per 0.35 s frame") {
  ScenarioConfig cfg;
  cfg.frame_count = 4;
  cfg.clutter_points = 0;
  cfg.points_per_face = 1;
  GroundTruthObject obj;
  obj.id = 0;
  obj.center = {0.0, 0.0, 0.8};
  obj.velocity = {2.0, 0.0};
  cfg.objects = {obj};
  const Scenario sc = generate_scenario(cfg);
  for (int f = 0; f < 4; ++f) {
    const Vec3 c = sc.objects[0].center_at(sc.frame_time(f));
    REQUIRE(c.x == Catch::Approx(0.7 * f).margin(1e-12));
    REQUIRE(c.y == 0.0);
  }
}

TEST_CASE("ego translating +1 m in x shifts a static object's LiDAR x by -1") {
  ScenarioConfig cfg;
  cfg.frame_count = 2;
  cfg.frame_period = 1.0;
  cfg.clutter_points = 0;
  cfg.points_per_face = 1;
  GroundTruthObject obj;
  obj.center = {10.0, 3.0, 0.8};
  cfg.objects = {obj};
  EgoPose w0, w1;
  w0.timestamp = 0.0;
  w1.timestamp = 1.0;
  w1.position = {1.0, 0.0, 0.0};
  cfg.ego_waypoints = {w0, w1};
  const Scenario sc = generate_scenario(cfg);
  const Frame f0 = render_frame(sc, 0);
  const Frame f1 = render_frame(sc, 1);
  // hand-applied inverse ego transform: x_local = x_global - ego_x
  REQUIRE(f0.truth[0].center.x == Catch::Approx(10.0).margin(1e-12));
  REQUIRE(f1.truth[0].center.x == Catch::Approx(9.0).margin(1e-12));
}

TEST_CASE("LiDAR->global->LiDAR round trip is identity within 1e-9") {
  Rng rng(42);
  for (int t = 0; t < 200; ++t) {
    EgoPose ego;
    ego.position = {rng.uniform(-50, 50), rng.uniform(-50, 50), 0.0};
    ego.yaw = normalize_angle(rng.uniform(-3.14, 3.14));
    const Vec3 p{rng.uniform(-60, 60), rng.uniform(-60, 60),
                 rng.uniform(-3, 3)};
    const Vec3 rt = ego.to_local(ego.to_global(p));
    REQUIRE(std::fabs(rt.x - p.x) < 1e-9);
    REQUIRE(std::fabs(rt.y - p.y) < 1e-9);
    REQUIRE(std::fabs(rt.z - p.z) < 1e-9);
  }
}

TEST_CASE("rendered points lie within the detection area") {
  ScenarioConfig cfg = small_cfg(3);
  EgoPose w0, w1;
  w0.timestamp = 0.0;
  w1.timestamp = 2.0;
  w1.position = {20.0, 5.0, 0.0};
  w1.yaw = 0.7;
  cfg.ego_waypoints = {w0, w1};
  const Scenario sc = generate_scenario(cfg);
  for (int f = 0; f < cfg.frame_count; ++f) {
    const Frame fr = render_frame(sc, f);
    for (const auto& p : fr.points) {
      REQUIRE(p.x >= -54.0);
      REQUIRE(p.x < 54.0);
      REQUIRE(p.y >= -54.0);
      REQUIRE(p.y < 54.0);
    }
  }
}

TEST_CASE("invalid scenario config reports the offending field") {
  ScenarioConfig cfg = small_cfg();
  cfg.detection_width = -1.0;
  REQUIRE_THROWS_WITH(generate_scenario(cfg),
                      Catch::Matchers::ContainsSubstring("detection_width"));
  cfg = small_cfg();
  cfg.frame_period = 0.0;
  REQUIRE_THROWS_WITH(generate_scenario(cfg),
                      Catch::Matchers::ContainsSubstring("frame_period"));
  cfg = small_cfg();
  GroundTruthObject bad;
  bad.size = {0.0, 1.0, 1.0};
  cfg.objects = {bad};
  REQUIRE_THROWS_WITH(generate_scenario(cfg),
                      Catch::Matchers::ContainsSubstring("size"));
}

TEST_CASE("render_frame rejects out-of-range indices") {
  const Scenario sc = generate_scenario(small_cfg());
  REQUIRE_THROWS_AS(render_frame(sc, 5), std::out_of_range);
  REQUIRE_THROWS_AS(render_frame(sc, -1), std::out_of_range);
}

TEST_CASE("ego trajectory interpolates position and yaw linearly") {
  EgoTrajectory traj;
  EgoPose w0, w1;
  w0.timestamp = 0.0;
  w0.yaw = 0.0;
  w1.timestamp = 2.0;
  w1.position = {4.0, 2.0, 0.0};
  w1.yaw = 1.0;
  traj.waypoints = {w0, w1};
  const EgoPose mid = traj.pose_at(1.0);
  REQUIRE(mid.position.x == Catch::Approx(2.0));
  REQUIRE(mid.position.y == Catch::Approx(1.0));
  REQUIRE(mid.yaw == Catch::Approx(0.5));
  REQUIRE_THROWS_AS(traj.pose_at(3.0), std::runtime_error);

  // shortest-path yaw interpolation across the wrap
  EgoTrajectory wrap;
  w0.yaw = 3.0;
  w1.yaw = -3.0;
  w1.position = {};
  wrap.waypoints = {w0, w1};
  const double y = wrap.pose_at(1.0).yaw;
  REQUIRE(std::fabs(normalize_angle(y - 3.141592653589793)) < 0.3);
}

TEST_CASE("velocity above max_speed is rejected") {
  ScenarioConfig cfg = small_cfg();
  GroundTruthObject fast;
  fast.velocity = {40.0, 0.0};
  cfg.objects = {fast};
  REQUIRE_THROWS_WITH(generate_scenario(cfg),
                      Catch::Matchers::ContainsSubstring("max_speed"));
}
