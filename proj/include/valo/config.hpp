#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "valo/harness.hpp"
#include "valo/scene.hpp"

namespace valo::config {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Entry {
  std::string key, value;
  int line = 0;
};

struct Section {
  std::string name;
  int line = 0;
  std::vector<Entry> entries;

  const Entry* find(const std::string& key) const {
    for (const auto& e : entries)
      if (e.key == key) return &e;
    return nullptr;
  }
  std::vector<const Entry*> find_all(const std::string& key) const {
    std::vector<const Entry*> out;
    for (const auto& e : entries)
      if (e.key == key) out.push_back(&e);
    return out;
  }
};

// Sectioned key/value text. Sections may repeat ([object] once per object),
// and so may keys within a section (waypoint, block, block_cost).
struct Config {
  std::string source = "<builtin>";
  std::vector<Section> sections;

  const Section* find(const std::string& name) const {
    for (const auto& s : sections)
      if (s.name == name) return &s;
    return nullptr;
  }
  std::vector<const Section*> find_all(const std::string& name) const {
    std::vector<const Section*> out;
    for (const auto& s : sections)
      if (s.name == name) out.push_back(&s);
    return out;
  }

  [[noreturn]] void fail(int line, const std::string& why) const {
    throw ConfigError(source + ":" + std::to_string(line) + ": " + why);
  }

  // --- typed access with diagnostics ---
  std::string get_str(const std::string& sec, const std::string& key,
                      const std::string& fallback) const {
    const Section* s = find(sec);
    if (!s) return fallback;
    const Entry* e = s->find(key);
    return e ? e->value : fallback;
  }

  double get_num(const std::string& sec, const std::string& key,
                 double fallback) const {
    const Section* s = find(sec);
    const Entry* e = s ? s->find(key) : nullptr;
    if (!e) return fallback;
    try {
      size_t pos = 0;
      const double v = std::stod(e->value, &pos);
      while (pos < e->value.size() && std::isspace(e->value[pos])) ++pos;
      if (pos != e->value.size()) throw std::invalid_argument("");
      return v;
    } catch (...) {
      fail(e->line, sec + "." + key + ": expected a number, got '" + e->value + "'");
    }
  }

  int64_t get_int(const std::string& sec, const std::string& key,
                  int64_t fallback) const {
    const double v = get_num(sec, key, static_cast<double>(fallback));
    return static_cast<int64_t>(v);
  }

  bool get_bool(const std::string& sec, const std::string& key,
                bool fallback) const {
    const Section* s = find(sec);
    const Entry* e = s ? s->find(key) : nullptr;
    if (!e) return fallback;
    if (e->value == "true" || e->value == "1" || e->value == "on") return true;
    if (e->value == "false" || e->value == "0" || e->value == "off")
      return false;
    fail(e->line, sec + "." + key + ": expected true/false, got '" + e->value + "'");
  }

  std::vector<double> get_nums(const std::string& sec, const std::string& key,
                               const std::vector<double>& fallback) const {
    const Section* s = find(sec);
    const Entry* e = s ? s->find(key) : nullptr;
    if (!e) return fallback;
    return parse_nums(*e, sec + "." + key);
  }

  std::vector<double> parse_nums(const Entry& e, const std::string& ctx) const {
    std::vector<double> out;
    std::istringstream ss(e.value);
    std::string tok;
    while (ss >> tok) {
      try {
        out.push_back(std::stod(tok));
      } catch (...) {
        fail(e.line, ctx + ": expected numbers, got '" + tok + "'");
      }
    }
    if (out.empty()) fail(e.line, ctx + ": expected at least one number");
    return out;
  }
};

inline Config parse_config_text(const std::string& text,
                                const std::string& source) {
  Config cfg;
  cfg.source = source;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  Section* cur = nullptr;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const size_t cmt = std::min(line.find('#'), line.find(';'));
    if (cmt != std::string::npos) line = line.substr(0, cmt);
    size_t b = line.find_first_not_of(" \t");
    if (b == std::string::npos) continue;
    size_t e = line.find_last_not_of(" \t");
    line = line.substr(b, e - b + 1);

    if (line.front() == '[') {
      if (line.back() != ']')
        cfg.fail(lineno, "unterminated section header '" + line + "'");
      cfg.sections.push_back(Section{line.substr(1, line.size() - 2), lineno, {}});
      cur = &cfg.sections.back();
      continue;
    }
    const size_t eq = line.find('=');
    if (eq == std::string::npos)
      cfg.fail(lineno, "expected 'key = value', got '" + line + "'");
    if (!cur) cfg.fail(lineno, "key/value outside any [section]");
    Entry entry;
    entry.line = lineno;
    entry.key = line.substr(0, eq);
    entry.value = line.substr(eq + 1);
    auto trim = [](std::string& s) {
      const size_t b2 = s.find_first_not_of(" \t");
      if (b2 == std::string::npos) {
        s.clear();
        return;
      }
      const size_t e2 = s.find_last_not_of(" \t");
      s = s.substr(b2, e2 - b2 + 1);
    };
    trim(entry.key);
    trim(entry.value);
    if (entry.key.empty()) cfg.fail(lineno, "empty key");
    cur->entries.push_back(std::move(entry));
  }
  return cfg;
}

inline Config load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str(), path);
}

// Apply one "section.key=value" override (CLI --set).
inline void apply_override(Config& cfg, const std::string& spec) {
  const size_t dot = spec.find('.');
  const size_t eq = spec.find('=');
  if (dot == std::string::npos || eq == std::string::npos || dot > eq)
    throw ConfigError("override '" + spec + "': expected section.key=value");
  const std::string sec = spec.substr(0, dot);
  const std::string key = spec.substr(dot + 1, eq - dot - 1);
  const std::string value = spec.substr(eq + 1);
  for (auto& s : cfg.sections)
    if (s.name == sec) {
      for (auto& e : s.entries)
        if (e.key == key) {
          e.value = value;
          return;
        }
      s.entries.push_back(Entry{key, value, 0});
      return;
    }
  cfg.sections.push_back(Section{sec, 0, {Entry{key, value, 0}}});
}

// Canonical text of a parsed config; hashing this pins the run's inputs.
inline std::string render_config(const Config& cfg) {
  std::ostringstream out;
  for (const auto& s : cfg.sections) {
    out << '[' << s.name << "]\n";
    for (const auto& e : s.entries) out << e.key << " = " << e.value << '\n';
  }
  return out.str();
}

inline uint64_t fnv1a_hash(const std::string& text) {
  uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

// ---- assembly into module configs -------------------------------------

inline sparseprop::LayerSpec parse_layer(const std::string& tok,
                                         const Config& cfg, int line) {
  // SM3 = submanifold 3x3x3; SP3s2 = sparse 3x3x3 stride 2 (isotropic)
  sparseprop::LayerSpec l;
  if (tok.size() < 3) cfg.fail(line, "bad layer token '" + tok + "'");
  const std::string kind = tok.substr(0, 2);
  if (kind == "SM")
    l.kind = sparseprop::LayerKind::submanifold;
  else if (kind == "SP")
    l.kind = sparseprop::LayerKind::sparse;
  else
    cfg.fail(line, "bad layer kind in '" + tok + "' (want SM or SP)");
  size_t i = 2;
  std::string num;
  while (i < tok.size() && std::isdigit(tok[i])) num += tok[i++];
  if (num.empty()) cfg.fail(line, "missing kernel size in '" + tok + "'");
  const int k = std::stoi(num);
  l.kernel = {k, k, k};
  l.stride = {1, 1, 1};
  if (i < tok.size()) {
    if (tok[i] != 's') cfg.fail(line, "bad layer suffix in '" + tok + "'");
    const int s = std::stoi(tok.substr(i + 1));
    l.stride = {s, s, s};
  }
  return l;
}

inline scene::ScenarioConfig load_scenario_config(const Config& cfg) {
  scene::ScenarioConfig sc;
  sc.seed = static_cast<uint64_t>(cfg.get_int("scenario", "seed", 1));
  sc.frame_period = cfg.get_num("scenario", "frame_period", 0.35);
  sc.frame_count = static_cast<int>(cfg.get_int("scenario", "frame_count", 40));
  sc.detection_width = cfg.get_num("scenario", "detection_width", 108.0);
  sc.detection_height = cfg.get_num("scenario", "detection_height", 108.0);
  sc.max_speed = cfg.get_num("scenario", "max_speed", 30.0);
  sc.num_objects = static_cast<int>(cfg.get_int("scenario", "num_objects", 12));
  sc.speed_scale = cfg.get_num("scenario", "speed_scale", 1.0);
  sc.points_per_face =
      static_cast<int>(cfg.get_int("scenario", "points_per_face", 60));
  sc.clutter_points =
      static_cast<int>(cfg.get_int("scenario", "clutter_points", 9000));
  sc.clutter_z_lo = cfg.get_num("scenario", "clutter_z_lo", -0.2);
  sc.clutter_z_hi = cfg.get_num("scenario", "clutter_z_hi", 0.4);

  for (const Section* os : cfg.find_all("object")) {
    scene::GroundTruthObject obj;
    obj.id = static_cast<int>(cfg.get_int("object", "id", 0));
    if (const Entry* e = os->find("id")) obj.id = std::stoi(e->value);
    if (const Entry* e = os->find("label")) obj.label = e->value;
    if (const Entry* e = os->find("center")) {
      auto v = cfg.parse_nums(*e, "object.center");
      if (v.size() != 3) cfg.fail(e->line, "object.center: want 3 numbers");
      obj.center = {v[0], v[1], v[2]};
    }
    if (const Entry* e = os->find("size")) {
      auto v = cfg.parse_nums(*e, "object.size");
      if (v.size() != 3) cfg.fail(e->line, "object.size: want 3 numbers");
      obj.size = {v[0], v[1], v[2]};
    }
    if (const Entry* e = os->find("heading")) obj.heading = std::stod(e->value);
    if (const Entry* e = os->find("velocity")) {
      auto v = cfg.parse_nums(*e, "object.velocity");
      if (v.size() != 2) cfg.fail(e->line, "object.velocity: want 2 numbers");
      obj.velocity = {v[0], v[1]};
    }
    sc.objects.push_back(obj);
  }

  if (const Section* es = cfg.find("ego")) {
    for (const Entry* e : es->find_all("waypoint")) {
      auto v = cfg.parse_nums(*e, "ego.waypoint");
      if (v.size() != 5)
        cfg.fail(e->line, "ego.waypoint: want 't x y z yaw' (5 numbers)");
      EgoPose wp;
      wp.timestamp = v[0];
      wp.position = {v[1], v[2], v[3]};
      wp.yaw = v[4];
      sc.ego_waypoints.push_back(wp);
    }
  }
  return sc;
}

inline harness::SimConfig load_sim_config(const Config& cfg) {
  harness::SimConfig sim;
  sim.deadlines_ms =
      cfg.get_nums("sim", "deadlines", {350.0, 285.0, 220.0, 155.0, 90.0});
  sim.num_regions = static_cast<int>(cfg.get_int("regions", "count", 18));

  {
    auto v = cfg.get_nums("grid", "voxel_size", {0.075, 0.075, 0.2});
    if (v.size() != 3) throw ConfigError("grid.voxel_size: want 3 numbers");
    sim.grid.voxel_size = {v[0], v[1], v[2]};
    v = cfg.get_nums("grid", "origin", {-54.0, -54.0, -5.0});
    if (v.size() != 3) throw ConfigError("grid.origin: want 3 numbers");
    sim.grid.origin = {v[0], v[1], v[2]};
    v = cfg.get_nums("grid", "dims", {1440.0, 1440.0, 40.0});
    if (v.size() != 3) throw ConfigError("grid.dims: want 3 numbers");
    sim.grid.dims = {static_cast<int32_t>(v[0]), static_cast<int32_t>(v[1]),
                     static_cast<int32_t>(v[2])};
  }

  if (const Section* bs = cfg.find("backbone")) {
    sparseprop::BackboneSpec bb;
    for (const Entry* e : bs->find_all("block")) {
      sparseprop::BlockSpec block;
      std::istringstream ss(e->value);
      std::string tok;
      while (ss >> tok) block.layers.push_back(parse_layer(tok, cfg, e->line));
      bb.blocks.push_back(block);
    }
    if (!bb.blocks.empty()) sim.backbone = bb;
  }

  {
    sparseprop::CostOracle oracle;
    oracle.sigma = cfg.get_num("oracle", "sigma", 0.0);
    oracle.seed = static_cast<uint64_t>(cfg.get_int("oracle", "seed", 99));
    if (const Section* os = cfg.find("oracle")) {
      for (const Entry* e : os->find_all("block_cost")) {
        auto v = cfg.parse_nums(*e, "oracle.block_cost");
        if (v.size() != 3)
          cfg.fail(e->line, "oracle.block_cost: want 'a b c' (3 numbers)");
        oracle.blocks.push_back({v[0], v[1], v[2]});
      }
    }
    if (oracle.blocks.empty())
      oracle.blocks = sparseprop::CostOracle::default_oracle().blocks;
    while (oracle.blocks.size() < sim.backbone.num_blocks())
      oracle.blocks.push_back(oracle.blocks.back());
    oracle.blocks.resize(sim.backbone.num_blocks());
    sim.oracle = oracle;
  }

  sim.stages.dense_base_ms = cfg.get_num("stages", "dense_base", 8.0);
  sim.stages.dense_per_region_ms = cfg.get_num("stages", "dense_per_region", 3.5);
  sim.stages.head_base_ms = cfg.get_num("stages", "head_base", 15.0);
  sim.stages.head_per_region_ms = cfg.get_num("stages", "head_per_region", 5.0);
  sim.stages.head_floor_ms = cfg.get_num("stages", "head_floor", 1.5);
  sim.stages.tail_ms = cfg.get_num("stages", "tail", 8.0);
  sim.stages.sigma_dense = cfg.get_num("stages", "sigma_dense", 0.0);
  sim.stages.sigma_tail = cfg.get_num("stages", "sigma_tail", 0.0);
  sim.stages.nominal_proposals =
      static_cast<int>(cfg.get_int("stages", "nominal_proposals", 100));

  const std::string mode = cfg.get_str("sim", "predictor", "history");
  if (mode == "history")
    sim.predictor_mode = timepred::PredictorMode::history;
  else if (mode == "whole_quadratic")
    sim.predictor_mode = timepred::PredictorMode::whole_quadratic;
  else
    throw ConfigError("sim.predictor: unknown mode '" + mode + "'");

  sim.scheduling = cfg.get_bool("sim", "scheduling", true);
  sim.forecasting = cfg.get_bool("sim", "forecasting", true);
  sim.region_drop = cfg.get_bool("sim", "region_drop", true);
  sim.dethead_opt = cfg.get_bool("sim", "dethead_opt", false);
  sim.has_dense_stage = cfg.get_bool("sim", "has_dense_stage", true);
  sim.iou_threshold = cfg.get_num("sim", "iou_threshold", 0.5);
  sim.forecast_max_age_frames =
      static_cast<int>(cfg.get_int("sim", "forecast_max_age_frames", 10));
  sim.count_overhead_ms = cfg.get_num("sim", "count_overhead_ms", 3.0);
  sim.sched_overhead_ms = cfg.get_num("sim", "sched_overhead_ms", 3.0);
  sim.forecast_base_ms = cfg.get_num("sim", "forecast_base_ms", 0.1);
  sim.forecast_per_pose_ms = cfg.get_num("sim", "forecast_per_pose_ms", 0.002);
  sim.match_distance_m = cfg.get_num("sim", "match_distance", 2.0);
  sim.seed = static_cast<uint64_t>(cfg.get_int("sim", "seed", 1));

  sim.noise.miss_rate = cfg.get_num("detector", "miss_rate", 0.0);
  sim.noise.pos_sigma = cfg.get_num("detector", "pos_sigma", 0.0);
  sim.noise.fp_rate = cfg.get_num("detector", "fp_rate", 0.0);
  return sim;
}

inline harness::ProfileParams load_profile_params(const Config& cfg) {
  harness::ProfileParams pp;
  pp.frames = static_cast<int>(cfg.get_int("profile", "frames", 48));
  pp.density_lo = cfg.get_num("profile", "density_lo", 0.35);
  pp.density_hi = cfg.get_num("profile", "density_hi", 1.5);
  pp.dense_reps = static_cast<int>(cfg.get_int("profile", "dense_reps", 8));
  pp.tail_reps = static_cast<int>(cfg.get_int("profile", "tail_reps", 200));
  pp.seed = static_cast<uint64_t>(cfg.get_int("profile", "seed", 7));
  return pp;
}

} // namespace valo::config
