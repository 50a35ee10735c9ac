// Copyright 2026 The gmppi Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// gmppi command-line driver: track, forest, bench, render-debug.

#include <gmppi/io.hpp>

#include <CLI11.hpp>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

namespace fs = std::filesystem;
using namespace gmppi;

namespace {

struct GlobalOptions {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  std::string out = "out";
  std::vector<std::string> sets;
};

// File, then --set, then the dedicated flags.
// Presets go under the config file; `extra` (subcommand flags) goes on top of
// the --set overrides.
ScenarioConfig resolve(const GlobalOptions& g, const std::vector<Json>& presets,
                       const std::vector<std::string>& extra = {}) {
  std::vector<std::string> overrides = g.sets;
  overrides.insert(overrides.end(), extra.begin(), extra.end());
  if (g.seed) overrides.push_back("run.seed=" + std::to_string(*g.seed));
  if (g.threads) overrides.push_back("run.threads=" + std::to_string(*g.threads));
  return load_config(g.config, overrides, presets);
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

// "0-9" or "1,4,7" (ranges may be mixed into lists).
std::vector<std::uint64_t> parse_seeds(const std::string& text) {
  std::vector<std::uint64_t> out;
  for (const std::string& item : split_list(text)) {
    const auto dash = item.find('-');
    if (dash == std::string::npos) {
      out.push_back(std::stoull(item));
    } else {
      const std::uint64_t lo = std::stoull(item.substr(0, dash));
      const std::uint64_t hi = std::stoull(item.substr(dash + 1));
      if (hi < lo) throw std::invalid_argument("bad seed range '" + item + "'");
      for (std::uint64_t s = lo; s <= hi; ++s) out.push_back(s);
    }
  }
  if (out.empty()) throw std::invalid_argument("empty seed list");
  return out;
}

std::vector<double> parse_doubles(const std::string& text) {
  std::vector<double> out;
  for (const std::string& item : split_list(text)) out.push_back(std::stod(item));
  if (out.empty()) throw std::invalid_argument("empty list");
  return out;
}

std::vector<int> parse_ints(const std::string& text) {
  std::vector<int> out;
  for (const std::string& item : split_list(text)) out.push_back(std::stoi(item));
  if (out.empty()) throw std::invalid_argument("empty list");
  return out;
}

std::string speed_tag(double v) {
  std::string s = format_double(v);
  std::replace(s.begin(), s.end(), '.', 'p');
  return s;
}

void print_summary(const std::string& label, const RunResult& r) {
  const RunMetrics& m = r.metrics;
  std::printf("%s: pos_rmse %.4f heading_rmse %.4f max_v %.3f max_a %.3f success %d%s%s\n", label.c_str(),
              m.pos_rmse, m.heading_rmse, m.max_speed, m.max_accel, m.success ? 1 : 0,
              r.log.failure.empty() ? "" : " ", r.log.failure.c_str());
}

void write_run_artifacts(const fs::path& stem, const RunResult& r, const ScenarioConfig& cfg, bool diagnostics) {
  write_file_atomic(fs::path(stem.string() + ".csv"), run_csv(r.log));
  write_file_atomic(fs::path(stem.string() + ".json"), run_report_json(r, to_json(cfg)).dump(2) + "\n");
  if (diagnostics) write_file_atomic(fs::path(stem.string() + ".diag.jsonl"), diagnostics_jsonl(r.log.diagnostics));
}

// Runs jobs(i) for i in [0, n) on `workers` threads.
template <typename Fn>
void run_pool(int n, int workers, Fn&& job) {
  workers = std::clamp(workers, 1, std::max(1, n));
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  std::mutex err_mutex;
  std::exception_ptr error;
  const auto worker = [&] {
    for (int i = next++; i < n; i = next++) {
      try {
        job(i);
      } catch (...) {
        std::lock_guard lock(err_mutex);
        if (!error) error = std::current_exception();
      }
    }
  };
  if (workers == 1) {
    worker();
  } else {
    for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (std::thread& t : pool) t.join();
  }
  if (error) std::rethrow_exception(error);
}

// --- track -----------------------------------------------------------------

struct TrackOptions {
  std::string traj;
  std::string controller;
  std::string ablate;
  bool diagnostics = false;
};

int cmd_track(const GlobalOptions& g, const TrackOptions& o) {
  std::vector<std::string> extra;
  if (!o.traj.empty()) extra.push_back("trajectory.kind=" + std::string(to_string(parse_trajectory_kind(o.traj))));
  if (!o.controller.empty()) extra.push_back("run.controller=" + o.controller);
  const ScenarioConfig base = resolve(g, {}, extra);

  struct Variant {
    std::string name;
    ScenarioConfig cfg;
  };
  std::vector<Variant> variants{{to_string(base.controller), base}};
  for (const std::string& a : split_list(o.ablate)) {
    ScenarioConfig v = base;
    v.controller = ControllerKind::kGmppi;
    if (a == "no_se3") {
      v.gmppi.ablation.no_se3 = true;
    } else if (a == "const_dt") {
      v.gmppi.ablation.const_dt = true;
    } else if (a == "const_noise") {
      v.gmppi.ablation.const_noise_cost = true;
    } else {
      throw ConfigError({"--ablate: unknown variant '" + a + "' (expected no_se3, const_dt, const_noise)"});
    }
    variants.push_back({a, v});
  }

  const fs::path out(g.out);
  const std::string traj_name = to_string(base.trajectory.kind);
  std::vector<SweepRow> rows;
  for (const Variant& v : variants) {
    Scenario sc = make_scenario(v.cfg);
    sc.sim.record_diagnostics = o.diagnostics;
    const RunResult r = run_closed_loop(sc);
    const std::string label = "track_" + traj_name + "_" + v.name + "_s" + std::to_string(v.cfg.seed);
    write_run_artifacts(out / label, r, v.cfg, o.diagnostics);
    print_summary(label, r);
    rows.push_back({v.name, v.cfg.seed, v.cfg.trajectory.speed, r.metrics});
  }
  write_file_atomic(out / ("track_" + traj_name + "_aggregate.csv"), aggregate_csv(rows, true));
  return 0;
}

// --- forest ----------------------------------------------------------------

struct ForestCmdOptions {
  std::string speeds = "3,5,7";
  std::string seeds = "0-9";
  int workers = 0;
  bool diagnostics = false;
};

int cmd_forest(const GlobalOptions& g, const ForestCmdOptions& o) {
  const ScenarioConfig base = resolve(g, {forest_run_preset()});
  const std::vector<double> speeds = parse_doubles(o.speeds);
  const std::vector<std::uint64_t> seeds = parse_seeds(o.seeds);

  std::vector<ScenarioConfig> jobs;
  for (double v : speeds) {
    for (std::uint64_t s : seeds) {
      ScenarioConfig c = base;
      c.trajectory.speed = v;
      c.seed = s;
      jobs.push_back(c);
    }
  }
  const int hw = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  const int per_run = base.threads > 0 ? base.threads : 1;
  const int workers = o.workers > 0 ? o.workers : std::max(1, hw / per_run);
  for (ScenarioConfig& c : jobs) {
    if (c.threads <= 0) c.threads = 1;
  }

  const fs::path out(g.out);
  std::vector<SweepRow> rows(jobs.size());
  std::mutex print_mutex;
  run_pool(static_cast<int>(jobs.size()), workers, [&](int i) {
    const ScenarioConfig& c = jobs[i];
    Scenario sc = make_scenario(c);
    sc.sim.record_diagnostics = o.diagnostics;
    const RunResult r = run_closed_loop(sc);
    const std::string label = "forest_v" + speed_tag(c.trajectory.speed) + "_s" + std::to_string(c.seed);
    write_run_artifacts(out / label, r, c, o.diagnostics);
    write_file_atomic(out / (label + ".forest.json"), forest_json(*sc.forest).dump(1) + "\n");
    rows[i] = {"gmppi", c.seed, c.trajectory.speed, r.metrics};
    std::lock_guard lock(print_mutex);
    print_summary(label, r);
  });

  write_file_atomic(out / "forest_aggregate.csv", aggregate_csv(rows, false));
  const std::string summary = success_summary_csv(rows);
  write_file_atomic(out / "forest_summary.csv", summary);
  std::cout << summary;
  return 0;
}

// --- bench -----------------------------------------------------------------

struct BenchOptions {
  int iterations = 1000;
  int warmup = 20;
  std::string threads = "1,2,4,8";
  double speed = 5.0;
};

struct PhaseSamples {
  std::vector<double> prepare, rollout, cost, update, total;
};

double percentile(std::vector<double> xs, double p) {
  if (xs.empty()) return 0.0;
  std::sort(xs.begin(), xs.end());
  const double pos = p * (xs.size() - 1);
  const auto lo = static_cast<std::size_t>(pos);
  const std::size_t hi = std::min(lo + 1, xs.size() - 1);
  return xs[lo] + (pos - lo) * (xs[hi] - xs[lo]);
}

Json phase_json(const std::vector<double>& ms) {
  return {{"median_ms", percentile(ms, 0.5)}, {"p95_ms", percentile(ms, 0.95)}};
}

// Closed-loop flight down the forest line; frames are rendered at the
// camera rate exactly as in the simulator.
std::vector<Command> bench_run(const ScenarioConfig& cfg, int threads, int iterations, int warmup,
                               PhaseSamples& samples) {
  Scenario sc = make_scenario(cfg);
  sc.gmppi.threads = threads;
  sc.gmppi.base_dt = sc.sim.dt;
  const ReferenceTrajectory traj(sc.trajectory);
  GmppiController controller(sc.gmppi, sc.plant);
  State x = initial_state(traj, sc.plant.vehicle);
  std::optional<DepthFrame> frame;
  long long last_capture = -1;
  std::vector<Command> commands;
  commands.reserve(iterations + warmup);
  for (int i = 0; i < iterations + warmup; ++i) {
    const double t = i * sc.sim.dt;
    const auto capture = static_cast<long long>(std::floor(t * sc.sim.camera_rate_hz + 1e-9));
    if (capture != last_capture) {
      frame = render_depth({x.p, x.q}, sc.camera, *sc.forest, sc.gmppi.sensor_range);
      last_capture = capture;
    }
    const auto t0 = std::chrono::steady_clock::now();
    const IterationOutput& it = controller.step(x, t, traj, &*frame);
    const double wall = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    commands.push_back(it.command);
    if (i >= warmup) {
      const PhaseTimings& pt = it.diagnostics.timings;
      samples.prepare.push_back(pt.prepare_ns * 1e-6);
      samples.rollout.push_back(pt.rollout_ns * 1e-6);
      samples.cost.push_back(pt.cost_ns * 1e-6);
      samples.update.push_back(pt.update_ns * 1e-6);
      samples.total.push_back(wall);
    }
    x = integrate_step(x, it.command, sc.sim.dt, sc.plant);
    // Restart the line before the vehicle leaves the forest or crashes.
    if (!x.finite() || ground_truth_contact(x, sc.plant.vehicle, *sc.forest).collided() ||
        x.p.x() > sc.trajectory.origin.x() + 0.8 * sc.trajectory.length) {
      controller.reset();
      x = initial_state(traj, sc.plant.vehicle);
      last_capture = -1;
    }
  }
  return commands;
}

int cmd_bench(const GlobalOptions& g, const BenchOptions& o) {
  ScenarioConfig cfg = resolve(g, {forest_run_preset()});
  cfg.trajectory.speed = o.speed;
  if (o.iterations < 1) throw ConfigError({"--iterations must be >= 1"});
  const std::vector<int> thread_counts = parse_ints(o.threads);

  Json report;
  report["rollouts"] = cfg.gmppi.rollouts;
  report["horizon_steps"] = cfg.gmppi.horizon_steps;
  report["frame"] = {cfg.camera.width, cfg.camera.height};
  report["iterations"] = o.iterations;
  report["hardware_threads"] = std::thread::hardware_concurrency();
  report["target_ms"] = 10.0;
  report["config"] = to_json(cfg);
  Json sweep = Json::array();

  std::optional<std::vector<Command>> reference;
  bool identical = true;
  for (int threads : thread_counts) {
    PhaseSamples s;
    const std::vector<Command> commands = bench_run(cfg, threads, o.iterations, o.warmup, s);
    if (!reference) {
      reference = commands;
    } else if (commands != *reference) {
      identical = false;
    }
    const double median = percentile(s.total, 0.5);
    sweep.push_back({{"threads", threads},
                     {"prepare", phase_json(s.prepare)},
                     {"rollout", phase_json(s.rollout)},
                     {"cost", phase_json(s.cost)},
                     {"update", phase_json(s.update)},
                     {"total", phase_json(s.total)},
                     {"rollouts_per_second", median > 0.0 ? cfg.gmppi.rollouts / (median * 1e-3) : 0.0}});
    std::printf("threads %d: median %.3f ms p95 %.3f ms (rollout %.3f, cost %.3f)\n", threads, median,
                percentile(s.total, 0.95), percentile(s.rollout, 0.5), percentile(s.cost, 0.5));
    std::fflush(stdout);
  }
  report["sweep"] = sweep;
  report["bit_identical_across_threads"] = identical;
  write_file_atomic(fs::path(g.out) / "bench.json", report.dump(2) + "\n");
  if (!identical) {
    std::fprintf(stderr, "controller outputs differ across thread counts\n");
    return 1;
  }
  return 0;
}

// --- render-debug ------------------------------------------------------------

struct RenderOptions {
  double time = 0.0;
};

int cmd_render_debug(const GlobalOptions& g, const RenderOptions& o) {
  const ScenarioConfig cfg = resolve(g, {forest_run_preset()});
  const Scenario sc = make_scenario(cfg);
  const ReferenceTrajectory traj(sc.trajectory);
  const FlatReferencePoint ref = flat_reference(traj, o.time, sc.plant.vehicle);
  const DepthFrame frame = render_depth({ref.p_ref, ref.q_ref}, sc.camera, *sc.forest, cfg.gmppi.sensor_range);
  const fs::path out(g.out);
  write_file_atomic(out / "depth.pfm", depth_pfm(frame));
  Json side = depth_sidecar_json(frame);
  side["config"] = to_json(cfg);
  write_file_atomic(out / "depth.json", side.dump(2) + "\n");
  write_file_atomic(out / "forest.json", forest_json(*sc.forest).dump(1) + "\n");
  int returns = 0;
  for (float d : frame.depths()) returns += std::isfinite(d);
  std::printf("rendered %dx%d frame, %d returns, %zu trees -> %s\n", frame.width(), frame.height(), returns,
              sc.forest->trees.size(), (out / "depth.pfm").c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sampling-based MPC for multirotors with geometric rollouts"};
  app.require_subcommand(1);
  GlobalOptions g;
  app.add_option("--config", g.config, "JSON configuration file")->check(CLI::ExistingFile);
  app.add_option("--seed", g.seed, "Seed for controller noise and forest layout");
  app.add_option("--threads", g.threads, "Controller worker threads (0 = hardware default)");
  app.add_option("--out", g.out, "Output directory")->capture_default_str();
  app.add_option("--set", g.sets, "Override a config value, e.g. gmppi.lambda=10 (repeatable)");

  TrackOptions track_opts;
  CLI::App* track = app.add_subcommand("track", "Fly a reference trajectory and report tracking metrics");
  track->add_option("--traj", track_opts.traj, "hover | fig8 | hypo | line");
  track->add_option("--controller", track_opts.controller, "gmppi | se3");
  track->add_option("--ablate", track_opts.ablate, "Extra GMPPI variants: no_se3,const_dt,const_noise");
  track->add_flag("--diagnostics", track_opts.diagnostics, "Write per-iteration diagnostics");

  ForestCmdOptions forest_opts;
  CLI::App* forest = app.add_subcommand("forest", "Sweep forest flights over speeds and seeds");
  forest->add_option("--speeds", forest_opts.speeds, "Comma-separated speeds [m/s]")->capture_default_str();
  forest->add_option("--seeds", forest_opts.seeds, "Seeds, e.g. 0-9 or 1,3,5")->capture_default_str();
  forest->add_option("--workers", forest_opts.workers, "Concurrent runs (0 = auto)");
  forest->add_flag("--diagnostics", forest_opts.diagnostics, "Write per-iteration diagnostics");

  BenchOptions bench_opts;
  CLI::App* bench = app.add_subcommand("bench", "Time controller iterations across thread counts");
  bench->add_option("--iterations", bench_opts.iterations, "Timed iterations per thread count")
      ->capture_default_str();
  bench->add_option("--warmup", bench_opts.warmup, "Untimed leading iterations")->capture_default_str();
  bench->add_option("--thread-counts", bench_opts.threads, "Comma-separated thread counts")->capture_default_str();
  bench->add_option("--speed", bench_opts.speed, "Line speed of the synthetic flight [m/s]")->capture_default_str();

  RenderOptions render_opts;
  CLI::App* render = app.add_subcommand("render-debug", "Dump one depth frame as PFM plus JSON");
  render->add_option("--time", render_opts.time, "Reference time of the camera pose [s]")->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  try {
    if (track->parsed()) return cmd_track(g, track_opts);
    if (forest->parsed()) return cmd_forest(g, forest_opts);
    if (bench->parsed()) return cmd_bench(g, bench_opts);
    if (render->parsed()) return cmd_render_debug(g, render_opts);
  } catch (const ConfigError& e) {
    std::cerr << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
