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

// Acceptance run: one PASS/FAIL line per criterion. Pass criterion numbers
// as arguments to run a subset, e.g. `acceptance 1 2 4`.

#include "oracles.hpp"

#include <gmppi/config.hpp>
#include <gmppi/io.hpp>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <functional>
#include <numeric>
#include <random>
#include <set>
#include <string>
#include <thread>
#include <vector>

namespace gmppi {
namespace {

using Clock = std::chrono::steady_clock;

struct Verdict {
  bool pass = false;
  std::string detail;
};

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double median(std::vector<double> xs) {
  std::sort(xs.begin(), xs.end());
  const std::size_t n = xs.size();
  return n % 2 ? xs[n / 2] : 0.5 * (xs[n / 2 - 1] + xs[n / 2]);
}

double mean(const std::vector<double>& xs) {
  return std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
}

// Runs `n` independent jobs on min(n, hardware threads) workers.
void parallel_jobs(int n, const std::function<void(int)>& job) {
  const int workers = std::max(1, std::min<int>(n, static_cast<int>(std::thread::hardware_concurrency())));
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (int i = next++; i < n; i = next++) job(i);
    });
  }
  for (std::thread& t : pool) t.join();
}

std::vector<RunResult> run_all(const std::vector<ScenarioConfig>& cfgs) {
  std::vector<RunResult> out(cfgs.size());
  parallel_jobs(static_cast<int>(cfgs.size()), [&](int i) { out[i] = run_closed_loop(make_scenario(cfgs[i])); });
  return out;
}

ScenarioConfig with(std::vector<std::string> overrides, std::vector<Json> presets = {}) {
  for (const std::string& o : overrides) presets.push_back(override_patch(o));
  return resolve_config(presets);
}

// --- 1 ---------------------------------------------------------------------

Verdict dynamics_correctness() {
  const PlantModel plant;
  std::vector<std::string> bad;

  PlantModel no_drag = plant;
  no_drag.vehicle.drag_diag = Vec3::Zero();
  State x;
  for (int i = 0; i < 100; ++i) x = rk4_step(x, {0.0, Vec3::Zero()}, 0.01, no_drag);
  const double fall_err = std::max(std::abs(x.p.z() + 4.905), std::abs(x.v.z() + 9.81));
  if (!(fall_err <= 1e-9)) bad.push_back(fmt("free fall err %.3g", fall_err));

  State hover;
  hover.p = Vec3(0, 0, 2);
  const Command u_hover{plant.vehicle.hover_thrust(), Vec3::Zero()};
  const double hover_acc = state_derivative(hover, u_hover, plant).dv.norm();
  State h = hover;
  for (int i = 0; i < 100; ++i) h = rk4_step(h, u_hover, 0.01, plant);
  const double hover_drift = (h.p - hover.p).norm() + h.v.norm();
  if (!(hover_acc <= 1e-9 && hover_drift <= 1e-9)) bad.push_back(fmt("hover acc %.3g drift %.3g", hover_acc, hover_drift));

  State moving;
  moving.v = Vec3(1, 0, 0);
  const Vec3 drag = state_derivative(moving, {0.0, Vec3::Zero()}, plant).dv;
  const double drag_expected = -0.28 / 1.21;
  if (!(std::abs(drag.x() - drag_expected) <= 1e-6 && std::abs(drag.z() + 9.81) <= 1e-6))
    bad.push_back(fmt("drag %.8f", drag.x()));

  // Step-halving on a tumbling, dragging flight.
  PlantModel soft = plant;
  soft.rate_tracking.rate_gain = 5.0;
  State x0;
  x0.p = Vec3(0, 0, 2);
  x0.v = Vec3(3.0, -1.0, 0.5);
  x0.w = Vec3(0.5, -0.3, 0.8);
  const Command u{14.0, Vec3(1.0, 0.6, -0.4)};
  const auto run = [&](int steps) {
    State s = x0;
    for (int i = 0; i < steps; ++i) s = rk4_step(s, u, 1.0 / steps, soft);
    return s;
  };
  const auto gap = [](const State& a, const State& b) {
    return std::max({(a.p - b.p).norm(), (a.v - b.v).norm(), (a.w - b.w).norm(),
                     std::sqrt(quat_distance(a.q, b.q))});
  };
  const State a = run(20), b = run(40), c = run(80);
  const double order = std::log2(gap(a, b) / gap(b, c));
  if (!(std::abs(order - 4.0) <= 0.3)) bad.push_back(fmt("order %.3f", order));

  Verdict v;
  v.pass = bad.empty();
  v.detail = fmt("free-fall err %.2e, hover acc %.2e, drag vx_dot %.6f (expect %.6f), RK4 order %.3f", fall_err,
                 hover_acc, drag.x(), drag_expected, order);
  for (const std::string& s : bad) v.detail += "; FAILED " + s;
  return v;
}

// --- 2 ---------------------------------------------------------------------

Verdict mppi_algebra() {
  const double lambda = 20.0;
  const auto pair = weights_from_costs(std::vector<double>{0.0, lambda * std::log(2.0)}, lambda);
  const double pair_err = std::max(std::abs(pair[0] - 2.0 / 3.0), std::abs(pair[1] - 1.0 / 3.0));

  std::mt19937_64 rng(2026);
  std::uniform_int_distribution<int> size(1, 1024);
  std::uniform_real_distribution<double> scale_exp(-3.0, 6.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  double worst_sum = 0.0, worst_shift = 0.0;
  bool negative = false;
  for (int trial = 0; trial < 10000; ++trial) {
    const double scale = std::pow(10.0, scale_exp(rng));
    std::vector<double> c(size(rng));
    for (double& x : c) x = scale * unit(rng);
    const auto w = weights_from_costs(c, lambda);
    worst_sum = std::max(worst_sum, std::abs(std::accumulate(w.begin(), w.end(), 0.0) - 1.0));
    for (double x : w) negative |= x < 0.0;
    if (trial % 10 == 0) {
      const double shift = 1e3 * unit(rng);
      for (double& x : c) x += shift;
      const auto ws = weights_from_costs(c, lambda);
      for (std::size_t k = 0; k < w.size(); ++k) worst_shift = std::max(worst_shift, std::abs(ws[k] - w[k]));
    }
  }
  Verdict v;
  v.pass = pair_err <= 1e-12 && worst_shift <= 1e-12 && worst_sum <= 1e-9 && !negative;
  v.detail = fmt("closed-form err %.2e, shift err %.2e, max |sum w - 1| %.2e over 1e4 vectors", pair_err,
                 worst_shift, worst_sum);
  return v;
}

// --- 3 ---------------------------------------------------------------------

Verdict collision_oracle() {
  const double range = 13.0, d_a = 2.0;
  const Bounds2 bounds{0.0, 45.0, -15.0, 15.0};
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  // Gated sample: uniform over the image and over range. A second stratum
  // concentrates queries around the first surface and is only reported.
  int agree = 0, total = 0, unexplained = 0;
  int near_agree = 0, near_total = 0;
  for (int f = 0; f < 20; ++f) {
    const Forest forest = generate_forest(1.0 / 25.0, bounds, 1000 + f);
    const CameraModel cam = make_forward_camera(96, 72, 90.0, camera_tilt_for_speed(3.0 + 0.5 * f));
    const Pose pose{Vec3(5.0 + 30.0 * unit(rng), -10.0 + 20.0 * unit(rng), 1.0 + unit(rng)),
                    quat_from_yaw(2.0 * kPi * unit(rng))};
    const DepthFrame frame = render_depth(pose, cam, forest, range);
    const Vec3 origin = frame.camera_origin();
    const auto ray_through = [&](double u, double v) {
      return (frame.world_from_camera() * Vec3((u - cam.cx) / cam.fx, (v - cam.cy) / cam.fy, 1.0)).normalized();
    };
    for (int i = 0; i < 750; ++i) {
      const bool near = i >= 500;
      const double u = -0.5 + cam.width * unit(rng);
      const double v = -0.5 + cam.height * unit(rng);
      const Vec3 dir = ray_through(u, v);
      double dist = 0.05 + (range + d_a) * unit(rng);
      if (near) {
        const double hit = testing::march_first_hit(origin, dir, forest, range);
        if (!std::isfinite(hit)) {
          --i;
          continue;
        }
        dist = std::max(0.05, hit - 0.5 + (d_a + 1.0) * unit(rng));
      }
      const Vec3 pt = origin + dist * dir;
      const bool projective = point_collides(pt, frame, d_a);
      const bool truth = testing::brute_force_collides(pt, origin, forest, range, d_a);
      if (near) {
        ++near_total;
        near_agree += projective == truth;
      } else {
        ++total;
        agree += projective == truth;
      }
      if (projective == truth) continue;
      // A disagreement must come from quantization: the ray through the
      // nearest pixel center, at the same range, agrees with the projection.
      const auto [pu, pv] = nearest_pixel(world_to_pixel(pt, frame), cam);
      const double hit_c = testing::march_first_hit(origin, ray_through(pu, pv), forest, range);
      const double r = (pt - origin).norm();
      const bool center_truth = std::isfinite(hit_c) && r >= hit_c - 1e-5 && r <= hit_c + d_a + 1e-5;
      if (center_truth != projective) ++unexplained;
    }
  }
  const double rate = static_cast<double>(agree) / total;
  Verdict v;
  v.pass = rate >= 0.99 && unexplained == 0;
  v.detail = fmt("agreement %.2f%% over %d uniform in-FOV points in 20 forests (%d disagreements); near-surface "
                 "stratum %.2f%% over %d (reported); %d disagreements not explained by pixel quantization",
                 100.0 * rate, total, total - agree, 100.0 * near_agree / near_total, near_total, unexplained);
  return v;
}

// --- 4 ---------------------------------------------------------------------

Verdict timestep_schedule() {
  const GmppiConfig cfg;
  const TimestepSchedule ex = compute_timesteps(5.0, 10.0, cfg);
  double worst = 0.0;
  int checked = 0;
  for (double v = 1.0; v <= 12.0; v += 0.25) {
    for (double s = 2.0; s <= 13.0; s += 0.5) {
      const TimestepSchedule sch = compute_timesteps(v, s, cfg);
      if (sch.clamped) continue;
      double sum = 0.0;
      for (double n : sch.multipliers) sum += n * sch.base_dt * v;
      worst = std::max(worst, std::abs(sum - std::min(s, cfg.horizon_cap)) / s);
      ++checked;
    }
  }
  Verdict r;
  r.pass = ex.n_far == 9.5 && !ex.clamped && checked > 100 && worst <= 1e-12;
  r.detail = fmt("n_far(s=10, v=5) = %.15g; identity max rel err %.2e over %d unclamped cases", ex.n_far, worst,
                 checked);
  return r;
}

// --- 5 and 6 ---------------------------------------------------------------

struct TrackingRuns {
  double peak_ref_speed = 0.0;
  double se3_rmse = 0.0;
  std::vector<double> full, no_se3, hover_full, hover_const;
  std::vector<std::string> failures;
  double tracking_seconds = 0.0;
  double ablation_seconds = 0.0;
};

const TrackingRuns& tracking_runs(bool need_ablation) {
  static TrackingRuns runs;
  static bool tracked = false, ablated = false;
  const auto note = [](const std::string& what, std::uint64_t seed, const RunResult& r) {
    if (!r.metrics.success) runs.failures.push_back(fmt("%s seed %llu: %s", what.c_str(),
                                                        static_cast<unsigned long long>(seed), r.log.failure.c_str()));
  };
  const std::vector<std::string> fig8{"trajectory.kind=figure8", "trajectory.speed=8", "run.threads=1"};
  if (!tracked) {
    const auto t0 = Clock::now();
    const ScenarioConfig se3 = with({"trajectory.kind=figure8", "trajectory.speed=8", "run.controller=se3"});
    const ReferenceTrajectory ref(se3.trajectory);
    for (double t = 0.0; t <= ref.duration(); t += 1e-4) runs.peak_ref_speed = std::max(runs.peak_ref_speed, ref.sample(t).v.norm());
    std::vector<ScenarioConfig> cfgs{se3};
    for (int s = 0; s < 5; ++s) {
      auto o = fig8;
      o.push_back("run.seed=" + std::to_string(s));
      cfgs.push_back(with(o));
    }
    const auto res = run_all(cfgs);
    runs.se3_rmse = res[0].metrics.pos_rmse;
    note("se3 figure8", 0, res[0]);
    for (int s = 0; s < 5; ++s) {
      runs.full.push_back(res[s + 1].metrics.pos_rmse);
      note("gmppi figure8", s, res[s + 1]);
    }
    runs.tracking_seconds = seconds_since(t0);
    tracked = true;
  }
  if (need_ablation && !ablated) {
    const auto t0 = Clock::now();
    std::vector<ScenarioConfig> cfgs;
    for (int s = 0; s < 5; ++s) {
      auto o = fig8;
      o.push_back("run.seed=" + std::to_string(s));
      o.push_back("gmppi.ablation.no_se3=true");
      cfgs.push_back(with(o));
    }
    for (const char* variant : {"false", "true"}) {
      for (int s = 0; s < 5; ++s) {
        // 5 s of hover after the 2 s settle window keeps the batch inside the
        // time budget on small machines.
        cfgs.push_back(with({"trajectory.kind=hover", "trajectory.hover_duration=5", "run.threads=1",
                             "run.seed=" + std::to_string(s),
                             std::string("gmppi.ablation.const_noise=") + variant}));
      }
    }
    const auto res = run_all(cfgs);
    for (int s = 0; s < 5; ++s) {
      runs.no_se3.push_back(res[s].metrics.pos_rmse);
      runs.hover_full.push_back(res[5 + s].metrics.max_speed);
      runs.hover_const.push_back(res[10 + s].metrics.max_speed);
      note("no_se3 figure8", s, res[s]);
      note("gmppi hover", s, res[5 + s]);
      note("const_noise hover", s, res[10 + s]);
    }
    runs.ablation_seconds = seconds_since(t0);
    ablated = true;
  }
  return runs;
}

Verdict tracking_parity() {
  const TrackingRuns& r = tracking_runs(false);
  const double ratio = mean(r.full) / r.se3_rmse;
  const double worst = *std::max_element(r.full.begin(), r.full.end()) / r.se3_rmse;
  Verdict v;
  v.pass = r.peak_ref_speed >= 8.0 - 1e-6 && ratio <= 1.5 && r.failures.empty() && r.tracking_seconds < 300.0;
  v.detail = fmt("figure-8 peak ref speed %.4f m/s; SE(3) rmse %.4f m; GMPPI rmse mean %.4f m over 5 seeds "
                 "(ratio %.3f, worst seed %.3f, limit 1.5); %.0f s",
                 r.peak_ref_speed, r.se3_rmse, mean(r.full), ratio, worst, r.tracking_seconds);
  for (const std::string& f : r.failures) v.detail += "; " + f;
  return v;
}

Verdict ablation_ordering() {
  const TrackingRuns& r = tracking_runs(true);
  const double full = median(r.full), no_se3 = median(r.no_se3);
  const double hover_full = median(r.hover_full), hover_const = median(r.hover_const);
  // The figure-8 runs are shared with criterion 5, so count their time here too.
  const double elapsed = r.tracking_seconds + r.ablation_seconds;
  Verdict v;
  v.pass = full < no_se3 && hover_full < hover_const && elapsed < 600.0;
  v.detail = fmt("figure-8 median rmse full %.4f vs no_se3 %.4f m; hover median max_speed full %.3e vs "
                 "const_noise %.3e m/s%s; %.0f s",
                 full, no_se3, hover_full, hover_const,
                 hover_const < 1e-6 ? " (both at round-off: an on-reference start stays at equilibrium)" : "",
                 elapsed);
  return v;
}

// --- 7 ---------------------------------------------------------------------

Verdict forest_avoidance() {
  const auto t0 = Clock::now();
  std::vector<ScenarioConfig> cfgs;
  const std::vector<double> speeds{3.0, 5.0, 7.0};
  for (double speed : speeds) {
    for (int s = 0; s < 10; ++s) {
      cfgs.push_back(with({fmt("trajectory.speed=%g", speed), "trajectory.length=40", "run.threads=1",
                           "run.seed=" + std::to_string(s)},
                          {forest_run_preset()}));
    }
  }
  const auto res = run_all(cfgs);
  std::vector<int> ok(speeds.size(), 0);
  std::string failures;
  double min_clearance = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < res.size(); ++i) {
    ok[i / 10] += res[i].metrics.success;
    min_clearance = std::min(min_clearance, res[i].metrics.min_clearance);
    if (!res[i].metrics.success) failures += fmt("; v=%g seed %zu: %s", speeds[i / 10], i % 10, res[i].log.failure.c_str());
  }
  const double elapsed = seconds_since(t0);
  Verdict v;
  v.pass = ok[0] == 10 && ok[1] == 10 && ok[2] >= 8 && elapsed < 900.0;
  v.detail = fmt("success 3 m/s %d/10, 5 m/s %d/10, 7 m/s %d/10 (need 10, 10, >= 8); min clearance %.3f m; %.0f s",
                 ok[0], ok[1], ok[2], min_clearance, elapsed) +
             failures;
  return v;
}

// --- 8 ---------------------------------------------------------------------

Verdict determinism() {
  const auto t0 = Clock::now();
  const std::vector<std::pair<std::string, std::vector<Json>>> cases{
      {"forest line 5 m/s", {forest_run_preset(), override_patch("trajectory.speed=5"), override_patch("run.seed=7"),
                             override_patch("sim.duration=1.5")}},
      {"figure-8", {override_patch("trajectory.kind=figure8"), override_patch("run.seed=11"),
                    override_patch("sim.duration=1.5")}},
  };
  bool identical = true;
  std::string detail;
  for (const auto& [name, patches] : cases) {
    std::string first;
    for (int threads : {1, 4, 8}) {
      std::vector<Json> p = patches;
      p.push_back(override_patch("run.threads=" + std::to_string(threads)));
      const ScenarioConfig cfg = resolve_config(p);
      const std::string csv = run_csv(run_closed_loop(make_scenario(cfg)).log);
      if (threads == 1) {
        first = csv;
      } else if (csv != first) {
        identical = false;
        detail += fmt("; %s differs at %d threads", name.c_str(), threads);
      }
    }
    detail = fmt("%s%s%s: %zu-byte CSV", detail.c_str(), detail.empty() ? "" : "; ", name.c_str(), first.size());
  }
  const double elapsed = seconds_since(t0);
  Verdict v;
  v.pass = identical && elapsed < 120.0;
  v.detail = fmt("1/4/8 threads byte-identical: %s; %s; %.0f s", identical ? "yes" : "no", detail.c_str(), elapsed);
  return v;
}

// --- 9 ---------------------------------------------------------------------

Verdict throughput() {
  const ScenarioConfig cfg = with({"trajectory.speed=5"}, {forest_run_preset()});
  const Scenario sc = make_scenario(cfg);
  const ReferenceTrajectory traj(sc.trajectory);
  const int hw = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  std::vector<int> counts{1};
  if (hw > 1) counts.push_back(std::min(hw, 8));
  std::string detail;
  double target_latency = 0.0;
  bool bit_identical = true;
  Command reference_cmd;
  for (int threads : counts) {
    GmppiConfig g = sc.gmppi;
    g.threads = threads;
    GmppiController ctl(g, sc.plant);
    State x = initial_state(traj, sc.plant.vehicle);
    std::vector<double> ms;
    Command last;
    const int iterations = 300;
    for (int i = 0; i < iterations; ++i) {
      const double t = 0.01 * i;
      const DepthFrame frame = render_depth({x.p, x.q}, sc.camera, *sc.forest, g.sensor_range);
      const auto t0 = Clock::now();
      last = ctl.step(x, t, traj, &frame).command;
      ms.push_back(1e3 * seconds_since(t0));
      x = integrate_step(x, last, 0.01, sc.plant);
    }
    if (threads == 1) {
      reference_cmd = last;
    } else {
      bit_identical &= last == reference_cmd;
    }
    const double med = median(ms);
    target_latency = med;
    detail += fmt("%s%d thread%s: median %.2f ms (%.0f rollouts/s)", detail.empty() ? "" : ", ", threads,
                  threads == 1 ? "" : "s", med, g.rollouts / (med * 1e-3));
  }
  const bool target_met = hw >= 8 && target_latency <= 10.0;
  Verdict v;
  v.pass = bit_identical;
  v.detail = fmt("K=768 N=30 96x72 on %d hardware thread%s; %s; 10 ms target on 8 threads %s (reported, not gated)",
                 hw, hw == 1 ? "" : "s", detail.c_str(),
                 target_met ? "met" : (hw >= 8 ? "missed" : "not measurable on this machine"));
  return v;
}

}  // namespace
}  // namespace gmppi

int main(int argc, char** argv) {
  using namespace gmppi;
  const std::vector<std::pair<const char*, Verdict (*)()>> criteria{
      {"dynamics correctness", dynamics_correctness},
      {"MPPI algebra", mppi_algebra},
      {"collision-oracle equivalence", collision_oracle},
      {"timestep schedule", timestep_schedule},
      {"tracking parity", tracking_parity},
      {"ablation ordering", ablation_ordering},
      {"forest avoidance", forest_avoidance},
      {"determinism", determinism},
      {"throughput", throughput},
  };
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!selected.empty() && !selected.count(id)) continue;
    Verdict v;
    try {
      v = criteria[i].second();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    failed += !v.pass;
    std::printf("%s [%d] %s: %s\n", v.pass ? "PASS" : "FAIL", id, criteria[i].first, v.detail.c_str());
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
