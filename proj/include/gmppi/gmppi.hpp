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

// Sampling-based predictive controller mixing two kinds of rollouts:
//
//  * geometric rollouts, closed-loop simulations of the SE(3) tracking law
//    with per-rollout Gaussian gain perturbations;
//  * random rollouts, the nominal command sequence plus per-step Gaussian
//    thrust/roll-rate/pitch-rate noise, with yaw rate set by a proportional
//    heading law.
//
// Each rollout is scored by a seven-term cost (tracking, smoothness,
// depth-image collisions), costs become softmax weights and the nominal
// sequence is replaced by the weighted average of all rollout commands.
// Step lengths grow after the first few steps so that the horizon spans the
// sensor range at the current nominal speed.
#pragma once

#include <gmppi/dynamics.hpp>
#include <gmppi/parallel.hpp>
#include <gmppi/perception.hpp>
#include <gmppi/random.hpp>
#include <gmppi/se3_controller.hpp>
#include <gmppi/trajectory.hpp>

#include <array>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

namespace gmppi {

// ---------------------------------------------------------------------------
// Schedules
// ---------------------------------------------------------------------------

/// Per-step coefficient varying linearly from the first to the last step.
struct LinearProfile {
  double first = 0.0;
  double last = 0.0;

  double at(int j, int n) const {
    if (n <= 1) return first;
    return first + (last - first) * static_cast<double>(j) / (n - 1);
  }
};

/// Low and flat over the near steps, rising to `peak` at `peak_step`, then
/// decaying linearly to `last` at the final step.
struct PeakedProfile {
  double near = 0.0;
  double peak = 0.0;
  double last = 0.0;

  double at(int j, int n, int near_steps, int peak_step) const {
    if (j < near_steps) return near;
    if (j <= peak_step) {
      const int span = peak_step - near_steps + 1;
      return near + (peak - near) * static_cast<double>(j - near_steps + 1) / span;
    }
    const int span = (n - 1) - peak_step;
    if (span <= 0) return peak;
    return peak + (last - peak) * static_cast<double>(j - peak_step) / span;
  }
};

enum CostTerm : std::size_t {
  kCostPosition = 0,
  kCostVelocity,
  kCostOrientation,
  kCostRate,
  kCostJerk,
  kCostSmooth,
  kCostObstacle,
  kCostTermCount,
};

inline constexpr std::array<const char*, kCostTermCount> kCostTermNames{
    "position", "velocity", "orientation", "rate", "jerk", "smooth", "obstacle"};

using CostVector = std::array<double, kCostTermCount>;

struct CostProfile {
  LinearProfile position{40.0, 10.0};
  LinearProfile velocity{2.0, 6.0};
  LinearProfile orientation{20.0, 5.0};
  LinearProfile rate{0.5, 0.1};
  LinearProfile jerk{0.02, 0.02};
  LinearProfile smooth{5.0, 5.0};
  LinearProfile obstacle{1000.0, 1000.0};

  std::array<const LinearProfile*, kCostTermCount> terms() const {
    return {&position, &velocity, &orientation, &rate, &jerk, &smooth, &obstacle};
  }
};

struct NoiseProfile {
  PeakedProfile thrust{0.5, 2.0, 1.0};
  PeakedProfile rate_x{0.5, 2.0, 1.0};
  PeakedProfile rate_y{0.5, 2.0, 1.0};
  int peak_step = 15;
};

/// Per-step cost coefficients c_j and the jerk tolerance multiple.
struct CostSchedule {
  std::vector<CostVector> coeffs;
  double jerk_tolerance = 1.4;
};

/// Per-step standard deviations (thrust [N], roll rate, pitch rate [rad/s]).
struct NoiseSchedule {
  std::vector<Vec3> sigma;
};

struct TimestepSchedule {
  std::vector<double> multipliers;
  double base_dt = 0.01;
  int near_steps = 0;
  double n_near = 1.0;
  double n_far = 1.0;
  /// True when n_far hit the floor or the ceiling.
  bool clamped = false;

  int size() const { return static_cast<int>(multipliers.size()); }
  std::vector<double> dts() const {
    std::vector<double> out(multipliers.size());
    for (std::size_t j = 0; j < out.size(); ++j) out[j] = multipliers[j] * base_dt;
    return out;
  }
  double horizon() const {
    double total = 0.0;
    for (double n : multipliers) total += n * base_dt;
    return total;
  }
};

struct Ablation {
  bool no_se3 = false;
  bool const_dt = false;
  bool const_noise_cost = false;
};

struct GmppiConfig {
  int rollouts = 768;
  int se3_rollouts = 32;
  int horizon_steps = 30;
  double lambda = 20.0;
  double yaw_gain = 2.0;

  Se3Gains base_gains{};
  /// Standard deviation of the per-rollout gain perturbation.
  Se3Gains gain_sigma{0.6, 1.5, 0.4, 0.8, 0.5, 0.5};

  double base_dt = 0.01;
  int near_steps = 10;
  double n_near = 1.0;
  double n_max = 20.0;
  double v_min = 0.5;
  double horizon_cap = 10.0;
  double sensor_range = 13.0;

  CostProfile cost{};
  NoiseProfile noise{};
  double jerk_tolerance = 1.4;
  CollisionBoxParams box{};
  Ablation ablation{};

  std::uint64_t seed = 0;
  int threads = 0;

  int geometric_rollouts() const { return ablation.no_se3 ? 0 : se3_rollouts; }

  void validate() const {
    if (rollouts < 1) throw std::invalid_argument("rollouts must be >= 1");
    if (se3_rollouts < 0 || se3_rollouts > rollouts)
      throw std::invalid_argument("se3_rollouts must be in [0, rollouts]");
    if (se3_rollouts % 32 != 0) throw std::invalid_argument("se3_rollouts must be a multiple of 32");
    if (horizon_steps < 1) throw std::invalid_argument("horizon_steps must be >= 1");
    if (!(lambda > 0.0)) throw std::invalid_argument("lambda must be > 0");
    if (near_steps < 0 || near_steps >= horizon_steps)
      throw std::invalid_argument("near_steps must be in [0, horizon_steps)");
    if (!(n_near >= 1.0) || !(n_max >= n_near))
      throw std::invalid_argument("need 1 <= n_near <= n_max");
    if (!(base_dt > 0.0) || !(v_min > 0.0) || !(horizon_cap > 0.0) || !(sensor_range > 0.0))
      throw std::invalid_argument("base_dt, v_min, horizon_cap, sensor_range must be > 0");
    if (!base_gains.valid() || !gain_sigma.valid())
      throw std::invalid_argument("gains and gain sigmas must be >= 0");
    if (!box.valid()) throw std::invalid_argument("invalid collision box");
    if (!(jerk_tolerance >= 0.0)) throw std::invalid_argument("jerk_tolerance must be >= 0");
  }
};

namespace detail {

template <typename T>
T mean_of(const std::vector<T>& xs, T zero) {
  T sum = zero;
  for (const T& x : xs) sum = sum + x;
  return xs.empty() ? zero : T(sum / static_cast<double>(xs.size()));
}

}  // namespace detail

inline CostSchedule make_cost_schedule(const GmppiConfig& cfg) {
  const int n = cfg.horizon_steps;
  CostSchedule s;
  s.jerk_tolerance = cfg.jerk_tolerance;
  s.coeffs.resize(n);
  const auto terms = cfg.cost.terms();
  for (int j = 0; j < n; ++j)
    for (std::size_t t = 0; t < kCostTermCount; ++t) s.coeffs[j][t] = terms[t]->at(j, n);
  if (cfg.ablation.const_noise_cost) {
    CostVector mean{};
    for (const auto& c : s.coeffs)
      for (std::size_t t = 0; t < kCostTermCount; ++t) mean[t] += c[t] / n;
    for (auto& c : s.coeffs) c = mean;
  }
  return s;
}

inline NoiseSchedule make_noise_schedule(const GmppiConfig& cfg) {
  const int n = cfg.horizon_steps;
  const int m = cfg.near_steps;
  const int peak = std::clamp(cfg.noise.peak_step, m, n - 1);
  NoiseSchedule s;
  s.sigma.resize(n);
  for (int j = 0; j < n; ++j) {
    s.sigma[j] = {cfg.noise.thrust.at(j, n, m, peak), cfg.noise.rate_x.at(j, n, m, peak),
                  cfg.noise.rate_y.at(j, n, m, peak)};
  }
  if (cfg.ablation.const_noise_cost) {
    const Vec3 mean = detail::mean_of<Vec3>(s.sigma, Vec3::Zero());
    for (auto& sig : s.sigma) sig = mean;
  }
  return s;
}

/// Step multipliers: `near_steps` fixed at n_near, the rest at the n_far
/// that makes the horizon cover min(sensor_range, horizon_cap) at the
/// nominal average speed. Speed is floored at v_min; n_far is clamped to
/// [n_near, n_max]. The const_dt ablation spreads the same horizon evenly.
inline TimestepSchedule compute_timesteps(double v_avg_nom, double sensor_range,
                                          const GmppiConfig& cfg) {
  const int n = cfg.horizon_steps;
  const int m = cfg.near_steps;
  const double reach = std::min(sensor_range, cfg.horizon_cap);
  const double speed = std::max(v_avg_nom, cfg.v_min);
  const double total = reach / (speed * cfg.base_dt);

  TimestepSchedule s;
  s.base_dt = cfg.base_dt;
  s.n_near = cfg.n_near;
  if (cfg.ablation.const_dt) {
    const double raw = total / n;
    const double even = std::clamp(raw, cfg.n_near, cfg.n_max);
    s.near_steps = 0;
    s.n_far = even;
    s.clamped = even != raw;
    s.multipliers.assign(n, even);
    return s;
  }
  const double raw = (total - m * cfg.n_near) / (n - m);
  const double far = std::clamp(raw, cfg.n_near, cfg.n_max);
  s.near_steps = m;
  s.n_far = far;
  s.clamped = far != raw;
  s.multipliers.assign(n, far);
  for (int j = 0; j < m; ++j) s.multipliers[j] = cfg.n_near;
  return s;
}

/// A command sequence anchored in time: command j is held over
/// [start + sum(dts[0..j)), start + sum(dts[0..j])).
struct TimedCommands {
  double start_time = 0.0;
  std::vector<double> dts;
  std::vector<Command> commands;
};

/// Zero-order-hold resampling of `seq` onto the step starts of a grid that
/// begins at `start_time`. Times past the end of `seq` repeat its last
/// command; times before its start take the first.
inline std::vector<Command> resample_commands(const TimedCommands& seq, double start_time,
                                              std::span<const double> dts) {
  std::vector<Command> out(dts.size());
  if (seq.commands.empty()) return out;
  constexpr double kEps = 1e-9;
  std::size_t src = 0;
  double src_end = seq.start_time + seq.dts[0];
  double t = start_time;
  for (std::size_t j = 0; j < dts.size(); ++j) {
    while (src + 1 < seq.commands.size() && t + kEps >= src_end) {
      ++src;
      src_end += seq.dts[src];
    }
    out[j] = seq.commands[src];
    t += dts[j];
  }
  return out;
}

// ---------------------------------------------------------------------------
// Rollouts
// ---------------------------------------------------------------------------

/// K rollouts stored contiguously per rollout.
struct RolloutBatch {
  int rollouts = 0;
  int steps = 0;
  std::vector<Command> commands;  // rollouts x steps
  std::vector<State> states;      // rollouts x (steps + 1)
  std::vector<double> costs;
  std::vector<double> weights;
  std::vector<CostVector> cost_terms;
  std::vector<std::uint8_t> collided;

  void resize(int k, int n) {
    rollouts = k;
    steps = n;
    commands.resize(static_cast<std::size_t>(k) * n);
    states.resize(static_cast<std::size_t>(k) * (n + 1));
    costs.assign(k, 0.0);
    weights.assign(k, 0.0);
    cost_terms.assign(k, CostVector{});
    collided.assign(k, 0);
  }
  std::span<Command> commands_of(int k) {
    return {commands.data() + static_cast<std::size_t>(k) * steps, static_cast<std::size_t>(steps)};
  }
  std::span<const Command> commands_of(int k) const {
    return {commands.data() + static_cast<std::size_t>(k) * steps, static_cast<std::size_t>(steps)};
  }
  std::span<State> states_of(int k) {
    return {states.data() + static_cast<std::size_t>(k) * (steps + 1),
            static_cast<std::size_t>(steps + 1)};
  }
  std::span<const State> states_of(int k) const {
    return {states.data() + static_cast<std::size_t>(k) * (steps + 1),
            static_cast<std::size_t>(steps + 1)};
  }
};

/// Read-only inputs shared by every rollout in one iteration.
struct RolloutContext {
  State x0;
  std::span<const Command> nominal;
  std::span<const double> dts;
  /// Reference at the start of every step and at the horizon end (N + 1).
  std::span<const FlatReferencePoint> refs;
  /// Positions of the nominal sequence rolled out from x0 (N + 1).
  std::span<const Vec3> nominal_positions;
  /// Acceleration just before the first step, for the first jerk sample.
  Vec3 initial_accel = Vec3::Zero();
  const NoiseSchedule* noise = nullptr;
  const CostSchedule* cost = nullptr;
  const DepthFrame* frame = nullptr;
  const GmppiConfig* cfg = nullptr;
  const PlantModel* plant = nullptr;
  std::uint64_t iteration = 0;
};

/// Nominal plus noise on thrust and roll/pitch rate; yaw rate from the
/// proportional heading law. Draws come from block j of the rollout stream.
inline void generate_random_rollout(const RolloutContext& ctx, int k, std::span<Command> commands,
                                    std::span<State> states) {
  const GmppiConfig& cfg = *ctx.cfg;
  const RolloutStream stream(cfg.seed, RngDomain::kCommandNoise, ctx.iteration,
                             static_cast<std::uint32_t>(k));
  State x = ctx.x0;
  states[0] = x;
  for (std::size_t j = 0; j < ctx.dts.size(); ++j) {
    const Vec3& sigma = ctx.noise->sigma[j];
    const auto n = stream.normals(static_cast<std::uint32_t>(j));
    Command u = ctx.nominal[j];
    u.thrust += sigma.x() * n[0];
    u.body_rates.x() += sigma.y() * n[1];
    u.body_rates.y() += sigma.z() * n[2];
    const FlatReferencePoint& ref = ctx.refs[j];
    u.body_rates.z() = cfg.yaw_gain * heading_angle_error(x.q, ref.h_ref).angle + ref.w_ref.z();
    u = clamp_command(u, ctx.plant->limits);
    commands[j] = u;
    x = integrate_step(x, u, ctx.dts[j], *ctx.plant);
    states[j + 1] = x;
  }
}

/// Closed-loop SE(3) rollout with this rollout's perturbed gains.
inline void generate_se3_rollout(const RolloutContext& ctx, int k, std::span<Command> commands,
                                 std::span<State> states) {
  const GmppiConfig& cfg = *ctx.cfg;
  const RolloutStream stream(cfg.seed, RngDomain::kGainNoise, ctx.iteration,
                             static_cast<std::uint32_t>(k));
  const Se3Gains gains = perturb_gains(cfg.base_gains, cfg.gain_sigma, stream);
  State x = ctx.x0;
  states[0] = x;
  for (std::size_t j = 0; j < ctx.dts.size(); ++j) {
    const Command u = se3_command(x, ctx.refs[j], gains, *ctx.plant);
    commands[j] = u;
    x = integrate_step(x, u, ctx.dts[j], *ctx.plant);
    states[j + 1] = x;
  }
}

struct RolloutCost {
  double total = 0.0;
  /// Coefficient-weighted contribution of each term.
  CostVector terms{};
  /// Number of steps with at least one colliding collision-box point.
  int colliding_steps = 0;
};

/// Sum over steps j = 0..N-1 of c_j . e_j evaluated at state j + 1. The
/// obstacle term is (N - j) times the number of colliding box points.
inline RolloutCost rollout_cost(std::span<const State> states, const RolloutContext& ctx) {
  const int n = static_cast<int>(ctx.dts.size());
  const CostSchedule& sched = *ctx.cost;
  RolloutCost out;
  Vec3 prev_accel = ctx.initial_accel;
  double prev_dt = ctx.dts.empty() ? 0.0 : ctx.dts[0];
  for (int j = 0; j < n; ++j) {
    const State& x = states[j + 1];
    const FlatReferencePoint& ref = ctx.refs[j + 1];
    const double dt = ctx.dts[j];
    const Vec3 accel = (x.v - states[j].v) / dt;
    const Vec3 jerk = (accel - prev_accel) / (0.5 * (dt + prev_dt));
    prev_accel = accel;
    prev_dt = dt;

    CostVector e{};
    e[kCostPosition] = (x.p - ref.p_ref).norm();
    e[kCostVelocity] = (x.v - ref.v_ref).norm();
    e[kCostOrientation] = quat_distance(x.q, ref.q_ref);
    e[kCostRate] = (x.w - ref.w_ref).norm();
    e[kCostJerk] = std::max(jerk.norm() - sched.jerk_tolerance * ref.j_ref.norm(), 0.0);
    e[kCostSmooth] = (x.p - ctx.nominal_positions[j + 1]).norm();
    if (ctx.frame != nullptr) {
      const int hits = state_collision_count(x.p, *ctx.frame, ctx.cfg->box);
      e[kCostObstacle] = static_cast<double>(n - j) * hits;
      out.colliding_steps += hits > 0;
    }
    const CostVector& c = sched.coeffs[j];
    for (std::size_t t = 0; t < kCostTermCount; ++t) {
      const double term = c[t] * e[t];
      out.terms[t] += term;
      out.total += term;
    }
  }
  return out;
}

/// Softmax of -(C - min C) / lambda. Exact ties at the minimum share the
/// mass equally as lambda -> 0.
inline std::vector<double> weights_from_costs(std::span<const double> costs, double lambda) {
  std::vector<double> w(costs.size(), 0.0);
  if (costs.empty()) return w;
  double rho = costs[0];
  for (double c : costs) rho = std::min(rho, c);
  double eta = 0.0;
  for (std::size_t k = 0; k < costs.size(); ++k) {
    w[k] = std::exp(-(costs[k] - rho) / lambda);
    eta += w[k];
  }
  for (double& x : w) x /= eta;
  return w;
}

/// Weighted average of the rollout commands per step, clamped.
inline std::vector<Command> update_nominal(const RolloutBatch& batch, const CommandLimits& limits) {
  std::vector<Command> out(batch.steps);
  for (int j = 0; j < batch.steps; ++j) {
    double thrust = 0.0;
    Vec3 rates = Vec3::Zero();
    for (int k = 0; k < batch.rollouts; ++k) {
      const double w = batch.weights[k];
      if (w == 0.0) continue;
      const Command& u = batch.commands[static_cast<std::size_t>(k) * batch.steps + j];
      thrust += w * u.thrust;
      rates += w * u.body_rates;
    }
    out[j] = clamp_command({thrust, rates}, limits);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Iteration
// ---------------------------------------------------------------------------

/// The nominal plan carried between iterations.
struct NominalPlan {
  TimedCommands commands;
  /// Open-loop states of `commands` from the state it was computed at.
  std::vector<State> states;
};

struct PhaseTimings {
  std::int64_t prepare_ns = 0;
  std::int64_t rollout_ns = 0;
  std::int64_t cost_ns = 0;
  std::int64_t update_ns = 0;
  std::int64_t total_ns() const { return prepare_ns + rollout_ns + cost_ns + update_ns; }
};

struct IterationDiagnostics {
  std::uint64_t iteration = 0;
  double min_cost = 0.0;
  double mean_cost = 0.0;
  double max_cost = 0.0;
  CostVector term_means{};
  double n_far = 0.0;
  double horizon = 0.0;
  /// Fraction of rollouts with any colliding step.
  double collision_fraction = 0.0;
  /// Total weight assigned to colliding rollouts.
  double collision_weight = 0.0;
  double effective_samples = 0.0;
  PhaseTimings timings;
};

struct IterationOutput {
  Command command;
  NominalPlan plan;
  IterationDiagnostics diagnostics;
};

/// Scratch buffers reused across iterations.
struct IterationWorkspace {
  RolloutBatch batch;
  std::vector<FlatReferencePoint> refs;
  std::vector<Vec3> nominal_positions;
};

/// Initial nominal: per-step flatness feed-forward of the reference.
inline std::vector<Command> reference_commands(std::span<const FlatReferencePoint> refs,
                                               std::size_t steps, const PlantModel& plant) {
  std::vector<Command> out(steps);
  for (std::size_t j = 0; j < steps; ++j) {
    const FlatReferencePoint& r = refs[j];
    out[j] = clamp_command(
        {plant.vehicle.mass * (r.a_ref - plant.vehicle.gravity).norm(), r.w_ref}, plant.limits);
  }
  return out;
}

/// One controller iteration at time `t`. `previous` is the plan returned by
/// the last iteration (absent on the first). `frame` may be null when no
/// depth data is available; the obstacle term is then zero.
inline IterationOutput gmppi_iteration(const State& x_hat, double t,
                                       const std::optional<NominalPlan>& previous,
                                       const ReferenceTrajectory& reference,
                                       const DepthFrame* frame, const GmppiConfig& cfg,
                                       const PlantModel& plant, const CostSchedule& cost,
                                       const NoiseSchedule& noise, std::uint64_t iteration,
                                       const std::optional<Command>& last_applied,
                                       IterationWorkspace& ws, ParallelExecutor& executor) {
  using Clock = std::chrono::steady_clock;
  const auto ns_since = [](Clock::time_point since) {
    return std::chrono::duration_cast<std::chrono::nanoseconds>(Clock::now() - since).count();
  };
  if (!x_hat.finite()) throw std::domain_error("state estimate is not finite");
  if (!(reference.duration() >= 0.0)) throw std::invalid_argument("empty reference");

  IterationOutput out;
  IterationDiagnostics& diag = out.diagnostics;
  diag.iteration = iteration;
  const auto t_prepare = Clock::now();

  const int n = cfg.horizon_steps;
  const int k_total = cfg.rollouts;
  const int k_se3 = cfg.geometric_rollouts();

  double v_avg = x_hat.v.norm();
  if (previous && !previous->states.empty()) {
    v_avg = 0.0;
    for (const State& s : previous->states) v_avg += s.v.norm();
    v_avg /= static_cast<double>(previous->states.size());
  }
  const TimestepSchedule sched = compute_timesteps(v_avg, cfg.sensor_range, cfg);
  const std::vector<double> dts = sched.dts();
  diag.n_far = sched.n_far;
  diag.horizon = sched.horizon();

  ws.refs.resize(n + 1);
  double tj = t;
  for (int j = 0; j <= n; ++j) {
    ws.refs[j] = flat_reference(reference, tj, plant.vehicle);
    if (j < n) tj += dts[j];
  }
  std::vector<Command> nominal = previous ? resample_commands(previous->commands, t, dts)
                                          : reference_commands(ws.refs, n, plant);
  const std::vector<State> nominal_states = rollout_open_loop(x_hat, nominal, dts, plant);
  ws.nominal_positions.resize(n + 1);
  for (int j = 0; j <= n; ++j) ws.nominal_positions[j] = nominal_states[j].p;

  RolloutContext ctx;
  ctx.x0 = x_hat;
  ctx.nominal = nominal;
  ctx.dts = dts;
  ctx.refs = ws.refs;
  ctx.nominal_positions = ws.nominal_positions;
  ctx.initial_accel = linear_acceleration(x_hat, last_applied.value_or(nominal.front()), plant);
  ctx.noise = &noise;
  ctx.cost = &cost;
  ctx.frame = frame;
  ctx.cfg = &cfg;
  ctx.plant = &plant;
  ctx.iteration = iteration;

  RolloutBatch& batch = ws.batch;
  batch.resize(k_total, n);
  diag.timings.prepare_ns = ns_since(t_prepare);

  const auto t_rollout = Clock::now();
  executor.for_each(k_total, [&](int k) {
    if (k < k_se3) {
      generate_se3_rollout(ctx, k, batch.commands_of(k), batch.states_of(k));
    } else {
      generate_random_rollout(ctx, k, batch.commands_of(k), batch.states_of(k));
    }
  });
  diag.timings.rollout_ns = ns_since(t_rollout);

  const auto t_cost = Clock::now();
  executor.for_each(k_total, [&](int k) {
    const RolloutCost c = rollout_cost(batch.states_of(k), ctx);
    batch.costs[k] = c.total;
    batch.cost_terms[k] = c.terms;
    batch.collided[k] = c.colliding_steps > 0;
  });
  diag.timings.cost_ns = ns_since(t_cost);

  const auto t_update = Clock::now();
  batch.weights = weights_from_costs(batch.costs, cfg.lambda);
  std::vector<Command> updated = update_nominal(batch, plant.limits);

  diag.min_cost = std::numeric_limits<double>::infinity();
  diag.max_cost = -std::numeric_limits<double>::infinity();
  double sum_w2 = 0.0;
  int colliding = 0;
  for (int k = 0; k < k_total; ++k) {
    const double c = batch.costs[k];
    diag.min_cost = std::min(diag.min_cost, c);
    diag.max_cost = std::max(diag.max_cost, c);
    diag.mean_cost += c / k_total;
    for (std::size_t term = 0; term < kCostTermCount; ++term)
      diag.term_means[term] += batch.cost_terms[k][term] / k_total;
    sum_w2 += batch.weights[k] * batch.weights[k];
    if (batch.collided[k]) {
      ++colliding;
      diag.collision_weight += batch.weights[k];
    }
  }
  diag.collision_fraction = static_cast<double>(colliding) / k_total;
  diag.effective_samples = sum_w2 > 0.0 ? 1.0 / sum_w2 : 0.0;

  out.command = updated.front();
  out.plan.commands = TimedCommands{t, dts, updated};
  out.plan.states = rollout_open_loop(x_hat, out.plan.commands.commands, dts, plant);
  diag.timings.update_ns = ns_since(t_update);
  return out;
}

/// Stateful wrapper that carries the nominal plan and iteration counter.
class GmppiController {
 public:
  GmppiController(GmppiConfig cfg, PlantModel plant)
      : cfg_(std::move(cfg)),
        plant_(std::move(plant)),
        cost_((cfg_.validate(), make_cost_schedule(cfg_))),
        noise_(make_noise_schedule(cfg_)),
        executor_(cfg_.threads) {}

  /// Runs one iteration and returns the first nominal command.
  const IterationOutput& step(const State& x_hat, double t, const ReferenceTrajectory& reference,
                              const DepthFrame* frame) {
    last_ = gmppi_iteration(x_hat, t, plan_, reference, frame, cfg_, plant_, cost_, noise_,
                            iteration_, last_command_, workspace_, executor_);
    plan_ = last_.plan;
    last_command_ = last_.command;
    ++iteration_;
    return last_;
  }

  void reset() {
    plan_.reset();
    last_command_.reset();
    iteration_ = 0;
  }

  const GmppiConfig& config() const { return cfg_; }
  const PlantModel& plant() const { return plant_; }
  const CostSchedule& cost_schedule() const { return cost_; }
  const NoiseSchedule& noise_schedule() const { return noise_; }
  const std::optional<NominalPlan>& plan() const { return plan_; }
  const RolloutBatch& last_batch() const { return workspace_.batch; }
  std::uint64_t iteration() const { return iteration_; }

 private:
  GmppiConfig cfg_;
  PlantModel plant_;
  CostSchedule cost_;
  NoiseSchedule noise_;
  ParallelExecutor executor_;
  IterationWorkspace workspace_;
  std::optional<NominalPlan> plan_;
  std::optional<Command> last_command_;
  IterationOutput last_;
  std::uint64_t iteration_ = 0;
};

}  // namespace gmppi
