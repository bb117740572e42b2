#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "valo/config.hpp"
#include "valo/harness.hpp"
#include "valo/report.hpp"
#include "valo/scene.hpp"
#include "valo/timepred.hpp"
#include "valo/verify.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kVersion = "valo 1.0.0";

struct CommonOpts {
  std::string config_path;
  std::vector<std::string> overrides;
};

valo::config::Config load(const CommonOpts& opts) {
  valo::config::Config cfg;
  if (!opts.config_path.empty())
    cfg = valo::config::load_config(opts.config_path);
  for (const auto& ov : opts.overrides) valo::config::apply_override(cfg, ov);
  return cfg;
}

std::string default_out_root() {
  if (const char* env = std::getenv("VALO_OUT_ROOT")) return env;
  return "runs";
}

std::string hash_hex(uint64_t h) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string file_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int cmd_profile(const CommonOpts& common, const std::string& out_path) {
  const auto cfg = load(common);
  const auto scenario_cfg = valo::config::load_scenario_config(cfg);
  const auto sim_cfg = valo::config::load_sim_config(cfg);
  const auto pp = valo::config::load_profile_params(cfg);
  const auto ds = valo::harness::make_profile(scenario_cfg, sim_cfg, pp);
  valo::timepred::write_profile_csv(ds, out_path);
  std::cout << "profile: " << ds.frames.size() << " backbone frames, "
            << ds.dense_samples.size() << " dense samples, "
            << ds.tail_samples.size() << " tail samples -> " << out_path
            << "\n";
  return 0;
}

int cmd_calibrate(const CommonOpts& common, const std::string& profile_path,
                  const std::string& out_path) {
  const auto cfg = load(common);
  const auto sim_cfg = valo::config::load_sim_config(cfg);
  const auto ds = valo::timepred::read_profile_csv(profile_path);
  const auto pred = valo::timepred::calibrate(ds, sim_cfg.num_regions);
  valo::timepred::write_calibration(pred, out_path);
  std::cout << "calibration: " << pred.blocks.size() << " block models, "
            << pred.dense.max_size() << " dense entries, E_R = "
            << pred.tail.e_r << " ms -> " << out_path << "\n";
  for (size_t b = 0; b < pred.blocks.size(); ++b)
    std::cout << "  block " << b + 1 << ": alpha="
              << valo::timepred::format_full(pred.blocks[b].alpha)
              << " beta=" << valo::timepred::format_full(pred.blocks[b].beta)
              << " gamma=" << valo::timepred::format_full(pred.blocks[b].gamma)
              << "\n";
  return 0;
}

int cmd_verify(int trials, uint64_t seed, double inject_fault) {
  using valo::verify::SuiteResult;
  std::vector<SuiteResult> suites;
  suites.push_back(valo::verify::run_sparseprop_suite(trials, seed));
  suites.push_back(
      valo::verify::run_dethead_suite(trials, seed + 1, 1e-6, inject_fault));
  suites.push_back(valo::verify::run_forecast_suite(trials, seed + 2));

  bool ok = true;
  for (const auto& s : suites) {
    std::printf("%-26s trials=%-6d failures=%-4d max_dev=%.3e %s [%s]\n",
                s.name.c_str(), s.trials, s.failures, s.max_abs_deviation,
                s.note.c_str(), s.passed() ? "PASS" : "FAIL");
    ok = ok && s.passed();
  }
  return ok ? 0 : 1;
}

struct RunArtifacts {
  fs::path dir;
  valo::config::Config cfg;
  valo::scene::ScenarioConfig scenario_cfg;
  valo::harness::SimConfig sim_cfg;
  valo::timepred::CalibratedPredictor pred;
};

RunArtifacts prepare_run(const CommonOpts& common,
                         const std::string& calibration_path,
                         const std::string& out_dir, const std::string& name) {
  RunArtifacts art;
  art.cfg = load(common);
  art.scenario_cfg = valo::config::load_scenario_config(art.cfg);
  art.sim_cfg = valo::config::load_sim_config(art.cfg);
  if (calibration_path.empty())
    throw valo::config::ConfigError(
        "missing calibration file (run 'valo profile' then 'valo calibrate')");
  art.pred = valo::timepred::read_calibration(calibration_path);

  const fs::path root = out_dir.empty() ? default_out_root() : out_dir;
  art.dir = root / (name.empty() ? "run" : name);
  fs::create_directories(art.dir);

  const std::string resolved = valo::config::render_config(art.cfg);
  {
    std::ofstream out(art.dir / "config.resolved", std::ios::binary);
    out << resolved;
  }
  json manifest;
  manifest["version"] = kVersion;
  manifest["config_hash"] = hash_hex(valo::config::fnv1a_hash(resolved));
  manifest["calibration_hash"] =
      hash_hex(valo::config::fnv1a_hash(file_text(calibration_path)));
  manifest["scenario_seed"] = art.scenario_cfg.seed;
  manifest["sim_seed"] = art.sim_cfg.seed;
  manifest["deadlines_ms"] = art.sim_cfg.deadlines_ms;
  manifest["config"] = "config.resolved";
  {
    std::ofstream out(art.dir / "manifest.json", std::ios::binary);
    out << manifest.dump(2) << "\n";
  }
  return art;
}

void write_run_outputs(const RunArtifacts& art,
                       const std::vector<valo::harness::RunResult>& runs,
                       bool svg, int dump_frames,
                       const valo::scene::Scenario& scenario) {
  std::vector<valo::harness::RunMetrics> rows;
  for (const auto& rr : runs) rows.push_back(rr.metrics);
  valo::report::write_metrics_csv(rows, (art.dir / "metrics.csv").string());
  for (const auto& rr : runs) {
    const std::string tag = std::to_string(
        static_cast<long long>(rr.metrics.deadline_ms));
    {
      std::ofstream out(art.dir / ("frames_" + tag + "ms.json"),
                        std::ios::binary);
      out << valo::report::frames_to_json(rr).dump(2) << "\n";
    }
    valo::report::write_poses_csv(
        rr, (art.dir / ("poses_" + tag + "ms.csv")).string());
  }
  if (svg) valo::report::write_sweep_charts(rows, art.dir.string());
  for (int f = 0; f < dump_frames && f < scenario.cfg.frame_count; ++f) {
    const auto frame = valo::scene::render_frame(scenario, f);
    valo::scene::write_frame_dump(
        frame, (art.dir / ("frame_" + std::to_string(f) + ".bin")).string());
  }
  std::cout << "wrote " << (art.dir / "metrics.csv").string() << " ("
            << rows.size() << " deadline rows)\n";
}

int cmd_simulate(const CommonOpts& common, const std::string& calibration,
                 const std::string& out_dir, const std::string& name,
                 double deadline, bool svg, int dump_frames) {
  RunArtifacts art = prepare_run(common, calibration, out_dir, name);
  const auto scenario = valo::scene::generate_scenario(art.scenario_cfg);
  const double d = deadline > 0.0 ? deadline : art.sim_cfg.deadlines_ms.front();
  std::vector<valo::harness::RunResult> runs;
  runs.push_back(
      valo::harness::run_simulation(scenario, art.sim_cfg, art.pred, d));
  write_run_outputs(art, runs, svg, dump_frames, scenario);
  const auto& m = runs[0].metrics;
  std::printf("deadline %.0f ms: miss_rate=%.4f recall=%.4f precision=%.4f "
              "mean|R_sel|=%.2f\n",
              m.deadline_ms, m.miss_rate, m.recall, m.precision,
              m.mean_selected);
  return 0;
}

int cmd_sweep(const CommonOpts& common, const std::string& calibration,
              const std::string& out_dir, const std::string& name, bool svg) {
  RunArtifacts art = prepare_run(common, calibration, out_dir, name);
  const auto scenario = valo::scene::generate_scenario(art.scenario_cfg);
  const auto runs =
      valo::harness::sweep_deadlines(scenario, art.sim_cfg, art.pred);
  write_run_outputs(art, runs, svg, 0, scenario);
  for (const auto& rr : runs)
    std::printf("deadline %.0f ms: miss_rate=%.4f recall=%.4f "
                "mean|R_sel|=%.2f\n",
                rr.metrics.deadline_ms, rr.metrics.miss_rate,
                rr.metrics.recall, rr.metrics.mean_selected);
  return 0;
}

int cmd_report(const std::string& run_dir, bool svg) {
  const fs::path dir = run_dir;
  const fs::path metrics = dir / "metrics.csv";
  if (!fs::exists(metrics))
    throw std::runtime_error("no runs found in " + run_dir +
                             " (missing metrics.csv)");
  const auto rows = valo::report::read_metrics_csv(metrics.string());
  if (rows.empty())
    throw std::runtime_error("no runs found in " + run_dir +
                             " (metrics.csv is empty)");
  std::printf("%10s %8s %8s %10s %12s %14s\n", "deadline", "miss", "recall",
              "precision", "mean|R_sel|", "mean total ms");
  for (const auto& m : rows)
    std::printf("%10.0f %8.4f %8.4f %10.4f %12.2f %14.2f\n", m.deadline_ms,
                m.miss_rate, m.recall, m.precision, m.mean_selected,
                m.total.mean);
  if (svg) valo::report::write_sweep_charts(rows, dir.string());
  return 0;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"Deadline-aware anytime perception scheduling simulator"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  CommonOpts common;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", common.config_path,
                    "scenario/simulation config file");
    sub->add_option("--set", common.overrides,
                    "override a leaf key: section.key=value");
  };

  // profile
  std::string profile_out = "profile.csv";
  CLI::App* profile = app.add_subcommand(
      "profile", "generate an offline profiling dataset (CSV)");
  add_common(profile);
  profile->add_option("--out", profile_out, "output CSV path");

  // calibrate
  std::string calib_profile = "profile.csv";
  std::string calib_out = "calibration.txt";
  CLI::App* calibrate = app.add_subcommand(
      "calibrate", "fit predictor components from a profile dataset");
  add_common(calibrate);
  calibrate->add_option("--profile", calib_profile, "profile CSV path");
  calibrate->add_option("--out", calib_out, "output calibration path");

  // verify
  int verify_trials = 300;
  uint64_t verify_seed = 12345;
  double inject_fault = 0.0;
  CLI::App* verify =
      app.add_subcommand("verify", "run the oracle-equivalence suites");
  verify->add_option("--trials", verify_trials, "trials per suite");
  verify->add_option("--seed", verify_seed, "suite RNG seed");
  verify
      ->add_option("--inject-dethead-fault", inject_fault,
                   "perturb the gathered conv path (mutation check)")
      ->group(""); // hidden

  // simulate / sweep
  std::string calibration_path, out_dir, run_name = "run";
  double one_deadline = 0.0;
  bool svg = false;
  int dump_frames = 0;
  CLI::App* simulate =
      app.add_subcommand("simulate", "run one closed-loop simulation");
  add_common(simulate);
  simulate->add_option("--calibration", calibration_path,
                       "calibration file from 'valo calibrate'");
  simulate->add_option("--out-dir", out_dir,
                       "output root (default $VALO_OUT_ROOT or ./runs)");
  simulate->add_option("--name", run_name, "run directory name");
  simulate->add_option("--deadline", one_deadline,
                       "deadline ms (default: first configured)");
  simulate->add_flag("--svg", svg, "write SVG charts");
  simulate->add_option("--dump-frames", dump_frames,
                       "dump the first N rendered frames (.bin)");

  CLI::App* sweep = app.add_subcommand(
      "sweep", "run one simulation per configured deadline");
  add_common(sweep);
  sweep->add_option("--calibration", calibration_path, "calibration file");
  sweep->add_option("--out-dir", out_dir, "output root");
  sweep->add_option("--name", run_name, "run directory name");
  sweep->add_flag("--svg", svg, "write SVG charts");

  // report
  std::string report_dir;
  CLI::App* report =
      app.add_subcommand("report", "summarize a finished run directory");
  report->add_option("--run-dir", report_dir, "run directory")->required();
  report->add_flag("--svg", svg, "write SVG charts");

  CLI11_PARSE(app, argc, argv);

  try {
    if (profile->parsed()) return cmd_profile(common, profile_out);
    if (calibrate->parsed())
      return cmd_calibrate(common, calib_profile, calib_out);
    if (verify->parsed())
      return cmd_verify(verify_trials, verify_seed, inject_fault);
    if (simulate->parsed())
      return cmd_simulate(common, calibration_path, out_dir, run_name,
                          one_deadline, svg, dump_frames);
    if (sweep->parsed())
      return cmd_sweep(common, calibration_path, out_dir, run_name, svg);
    if (report->parsed()) return cmd_report(report_dir, svg);
  } catch (const valo::config::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 2;
}
