#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <fstream>

#include "valo/config.hpp"
#include "valo/report.hpp"
#include "valo/scene.hpp"

using namespace valo;
using namespace valo::config;

namespace {

const char* kSampleConfig = R"(# sample
[scenario]
seed = 4
frame_count = 6
clutter_points = 1200
num_objects = 0

[object]
id = 1
label = car
center = 10 5 0.8
size = 4.5 1.8 1.6
heading = 0.1
velocity = 2 0

[object]
id = 2
label = pedestrian
center = -8 2 0.9
size = 0.8 0.8 1.8
heading = 0
velocity = 0 1

[ego]
waypoint = 0.0  0 0 0  0.0
waypoint = 5.0  10 0 0  0.3

[regions]
count = 18

[sim]
deadlines = 350 220 90
seed = 9
)";

} // namespace

TEST_CASE("config parser handles sections, comments, repeated keys") {
  const Config cfg = parse_config_text(kSampleConfig, "sample.ini");
  REQUIRE(cfg.get_int("scenario", "seed", 0) == 4);
  REQUIRE(cfg.get_int("scenario", "frame_count", 0) == 6);
  REQUIRE(cfg.find_all("object").size() == 2);
  REQUIRE(cfg.get_nums("sim", "deadlines", {}).size() == 3);
  REQUIRE(cfg.get_str("missing", "key", "fallback") == "fallback");
}

TEST_CASE("config errors carry file and line diagnostics") {
  REQUIRE_THROWS_WITH(parse_config_text("[scenario]\nbroken line\n", "x.ini"),
                      Catch::Matchers::ContainsSubstring("x.ini:2"));
  REQUIRE_THROWS_WITH(parse_config_text("key = 1\n", "y.ini"),
                      Catch::Matchers::ContainsSubstring("outside any"));
  REQUIRE_THROWS_WITH(parse_config_text("[bad\n", "z.ini"),
                      Catch::Matchers::ContainsSubstring("z.ini:1"));
  const Config cfg =
      parse_config_text("[scenario]\nframe_count = soon\n", "w.ini");
  REQUIRE_THROWS_WITH(cfg.get_int("scenario", "frame_count", 0),
                      Catch::Matchers::ContainsSubstring("w.ini:2"));
}

TEST_CASE("overrides replace or append leaf keys") {
  Config cfg = parse_config_text(kSampleConfig, "sample.ini");
  apply_override(cfg, "scenario.seed=77");
  apply_override(cfg, "stages.tail=12.5");
  REQUIRE(cfg.get_int("scenario", "seed", 0) == 77);
  REQUIRE(cfg.get_num("stages", "tail", 0.0) == 12.5);
  REQUIRE_THROWS_AS(apply_override(cfg, "nodots"), ConfigError);
}

TEST_CASE("scenario config builds explicit objects and ego waypoints") {
  const Config cfg = parse_config_text(kSampleConfig, "sample.ini");
  const auto sc_cfg = load_scenario_config(cfg);
  REQUIRE(sc_cfg.objects.size() == 2);
  REQUIRE(sc_cfg.objects[0].label == "car");
  REQUIRE(sc_cfg.objects[1].center.x == -8.0);
  REQUIRE(sc_cfg.ego_waypoints.size() == 2);
  REQUIRE(sc_cfg.ego_waypoints[1].position.x == 10.0);
  const auto scenario = scene::generate_scenario(sc_cfg);
  REQUIRE(scenario.objects.size() == 2);
}

TEST_CASE("sim config builds backbone and oracle from config text") {
  const char* text = R"(
[backbone]
block = SM3 SM3 SP3s2
block = SM3 SP3s2
block = SM3

[oracle]
block_cost = 1e-9 1e-3 2.0
block_cost = 2e-9 2e-3 1.0
block_cost = 3e-9 3e-3 0.5
sigma = 0.05

[grid]
dims = 720 720 20

[regions]
count = 18
)";
  const Config cfg = parse_config_text(text, "bb.ini");
  const auto sim = load_sim_config(cfg);
  REQUIRE(sim.backbone.num_blocks() == 3);
  REQUIRE(sim.backbone.blocks[0].layers.size() == 3);
  REQUIRE(sim.backbone.blocks[0].layers[2].kind ==
          sparseprop::LayerKind::sparse);
  REQUIRE(sim.backbone.blocks[0].layers[2].stride[0] == 2);
  REQUIRE(sim.oracle.blocks.size() == 3);
  REQUIRE(sim.oracle.blocks[1].b == 2e-3);
  REQUIRE(sim.oracle.sigma == 0.05);
  REQUIRE(sim.grid.dims[0] == 720);
  sim.validate();
}

TEST_CASE("render_config round-trips through the parser") {
  const Config cfg = parse_config_text(kSampleConfig, "sample.ini");
  const std::string text = render_config(cfg);
  const Config again = parse_config_text(text, "again.ini");
  REQUIRE(render_config(again) == text);
  REQUIRE(fnv1a_hash(text) == fnv1a_hash(render_config(again)));
}

TEST_CASE("frame dumps in binary and CSV formats") {
  scene::ScenarioConfig sc;
  sc.frame_count = 1;
  sc.num_objects = 0;
  sc.clutter_points = 50;
  const auto scenario = scene::generate_scenario(sc);
  const auto frame = scene::render_frame(scenario, 0);

  scene::write_frame_dump(frame, "dump_test.bin");
  {
    std::ifstream in("dump_test.bin", std::ios::binary | std::ios::ate);
    REQUIRE(static_cast<size_t>(in.tellg()) ==
            frame.points.size() * 4 * sizeof(float));
    in.seekg(0);
    float rec[4];
    in.read(reinterpret_cast<char*>(rec), sizeof(rec));
    REQUIRE(rec[0] == static_cast<float>(frame.points[0].x));
    REQUIRE(rec[3] == static_cast<float>(frame.points[0].intensity));
  }

  scene::write_frame_dump(frame, "dump_test.csv");
  {
    std::ifstream in("dump_test.csv");
    std::string header;
    std::getline(in, header);
    REQUIRE(header == "x,y,z,intensity");
    size_t rows = 0;
    std::string line;
    while (std::getline(in, line))
      if (!line.empty()) ++rows;
    REQUIRE(rows == frame.points.size());
  }
}

TEST_CASE("metrics CSV round-trips") {
  harness::RunMetrics m;
  m.deadline_ms = 155.0;
  m.frames = 40;
  m.miss_rate = 0.025;
  m.recall = 0.91;
  m.precision = 0.96;
  m.mean_selected = 7.25;
  m.mean_processed = 7.0;
  m.mean_staleness = 1.5;
  m.max_staleness = 4.0;
  m.sparse.mean = 30.0;
  m.dense.mean = 95.0;
  m.tail.mean = 8.0;
  m.total.mean = 140.0;
  m.total.p99 = 151.0;
  report::write_metrics_csv({m}, "metrics_test.csv");
  const auto rows = report::read_metrics_csv("metrics_test.csv");
  REQUIRE(rows.size() == 1);
  REQUIRE(rows[0].deadline_ms == 155.0);
  REQUIRE(rows[0].miss_rate == 0.025);
  REQUIRE(rows[0].total.p99 == 151.0);
}

TEST_CASE("svg chart writer emits one polyline per series") {
  report::ChartSeries s1{"a", "#111111", {0.1, 0.5, 0.9}};
  report::ChartSeries s2{"b", "#222222", {0.2, 0.4, 0.6}};
  report::write_svg_chart("chart_test.svg", "t", "x", {90, 155, 220},
                          {s1, s2});
  std::ifstream in("chart_test.svg");
  std::string all((std::istreambuf_iterator<char>(in)),
                  std::istreambuf_iterator<char>());
  REQUIRE(all.find("<svg") != std::string::npos);
  size_t polylines = 0, pos = 0;
  while ((pos = all.find("<polyline", pos)) != std::string::npos) {
    ++polylines;
    pos += 9;
  }
  REQUIRE(polylines == 2);
}
