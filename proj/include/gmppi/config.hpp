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

// Scenario configuration as a JSON tree.
//
// The defaults tree is generated from the default-constructed structs, so it
// is also the schema: user files and dotted `key=value` overrides may only
// touch keys that already exist there, with a value of the same JSON type.
#pragma once

#include <gmppi/simulation.hpp>

#include <nlohmann/json.hpp>

#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace gmppi {

using Json = nlohmann::ordered_json;

class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(std::vector<std::string> problems)
      : std::runtime_error(join(problems)), problems_(std::move(problems)) {}

  const std::vector<std::string>& problems() const { return problems_; }

 private:
  static std::string join(const std::vector<std::string>& problems) {
    std::string out = "invalid configuration:";
    for (const std::string& p : problems) out += "\n  " + p;
    return out;
  }

  std::vector<std::string> problems_;
};

struct CameraSettings {
  int width = 96;
  int height = 72;
  double hfov_deg = 90.0;
  double tilt_deg = 0.0;
  /// Use the speed-to-tilt table for forest runs instead of `tilt_deg`.
  bool tilt_from_speed = true;
  Vec3 offset = Vec3::Zero();
};

struct ForestSettings {
  bool enabled = false;
  double density = 1.0 / 25.0;
  Bounds2 bounds{0.0, 45.0, -15.0, 15.0};
  double radius = 0.3;
  double height = 10.0;
  double clearing_radius = 2.0;
};

struct ScenarioConfig {
  VehicleParams vehicle{};
  CommandLimits limits{};
  BodyRateTracking rate_tracking{};
  GmppiConfig gmppi{};
  CameraSettings camera{};
  TrajectoryParams trajectory{};
  ForestSettings forest{};
  SimParams sim{};
  ControllerKind controller = ControllerKind::kGmppi;
  /// Seeds both the controller streams and the forest layout.
  std::uint64_t seed = 0;
  /// Controller worker threads; <= 0 picks the hardware default.
  int threads = 0;
};

namespace detail {

inline Json vec_json(const Vec3& v) { return Json::array({v.x(), v.y(), v.z()}); }
inline Vec3 json_vec(const Json& j) { return Vec3(j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>()); }

inline Json gains_json(const Se3Gains& g) {
  return {{"kp_xy", g.kp_xy}, {"kp_z", g.kp_z}, {"kv_xy", g.kv_xy},
          {"kv_z", g.kv_z},   {"kr_xy", g.kr_xy}, {"kr_z", g.kr_z}};
}
inline Se3Gains json_gains(const Json& j) {
  return {j.at("kp_xy").get<double>(), j.at("kp_z").get<double>(), j.at("kv_xy").get<double>(),
          j.at("kv_z").get<double>(),  j.at("kr_xy").get<double>(), j.at("kr_z").get<double>()};
}

inline Json linear_json(const LinearProfile& p) { return Json::array({p.first, p.last}); }
inline LinearProfile json_linear(const Json& j) { return {j.at(0).get<double>(), j.at(1).get<double>()}; }
inline Json peaked_json(const PeakedProfile& p) { return Json::array({p.near, p.peak, p.last}); }
inline PeakedProfile json_peaked(const Json& j) {
  return {j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>()};
}

inline const char* json_type(const Json& j) {
  if (j.is_boolean()) return "boolean";
  if (j.is_number()) return "number";
  return j.type_name();
}

inline bool same_kind(const Json& a, const Json& b) {
  if (a.is_number() && b.is_number()) return !a.is_number_integer() || b.is_number_integer();
  return a.type() == b.type();
}

// Overlays `patch` onto `base` in place, reporting keys that do not exist in
// the base tree and values whose type differs.
inline void overlay(Json& base, const Json& patch, const std::string& path,
                    std::vector<std::string>& problems) {
  if (!patch.is_object()) {
    problems.push_back((path.empty() ? "<root>" : path) + ": expected an object");
    return;
  }
  for (const auto& [key, value] : patch.items()) {
    const std::string where = path.empty() ? key : path + "." + key;
    if (!base.contains(key)) {
      problems.push_back(where + ": unknown key");
      continue;
    }
    Json& slot = base[key];
    if (slot.is_object()) {
      overlay(slot, value, where, problems);
    } else if (slot.is_array()) {
      if (!value.is_array() || value.size() != slot.size()) {
        problems.push_back(where + ": expected an array of " + std::to_string(slot.size()) + " numbers");
        continue;
      }
      bool ok = true;
      for (const Json& e : value) ok = ok && e.is_number();
      if (!ok) {
        problems.push_back(where + ": array entries must be numbers");
        continue;
      }
      slot = value;
    } else if (!same_kind(slot, value)) {
      problems.push_back(where + ": expected " + json_type(slot) + ", got " + json_type(value));
    } else {
      slot = value;
    }
  }
}

}  // namespace detail

inline Json to_json(const ScenarioConfig& c) {
  using detail::vec_json;
  const VehicleParams& v = c.vehicle;
  const GmppiConfig& g = c.gmppi;
  const TrajectoryParams& t = c.trajectory;
  Json j;
  j["vehicle"] = {{"mass", v.mass},
                  {"arm_length", v.arm_length},
                  {"torque_const", v.torque_const},
                  {"inertia", vec_json(v.inertia_diag)},
                  {"length", v.length},
                  {"width", v.width},
                  {"height", v.height},
                  {"drag", vec_json(v.drag_diag)},
                  {"gravity", vec_json(v.gravity)}};
  j["limits"] = {{"thrust_min", c.limits.thrust_min},
                 {"thrust_max", c.limits.thrust_max},
                 {"rate_xy_max", c.limits.rate_xy_max},
                 {"rate_z_max", c.limits.rate_z_max}};
  j["rate_tracking"] = {{"rate_gain", c.rate_tracking.rate_gain},
                        {"perfect", c.rate_tracking.perfect},
                        {"max_stiff_product", c.rate_tracking.max_stiff_product}};
  Json cost;
  for (std::size_t i = 0; i < kCostTermCount; ++i) cost[kCostTermNames[i]] = detail::linear_json(*g.cost.terms()[i]);
  j["gmppi"] = {{"rollouts", g.rollouts},
                {"se3_rollouts", g.se3_rollouts},
                {"horizon_steps", g.horizon_steps},
                {"lambda", g.lambda},
                {"yaw_gain", g.yaw_gain},
                {"gains", detail::gains_json(g.base_gains)},
                {"gain_sigma", detail::gains_json(g.gain_sigma)},
                {"near_steps", g.near_steps},
                {"n_near", g.n_near},
                {"n_max", g.n_max},
                {"v_min", g.v_min},
                {"horizon_cap", g.horizon_cap},
                {"sensor_range", g.sensor_range},
                {"jerk_tolerance", g.jerk_tolerance},
                {"cost", cost},
                {"noise",
                 {{"thrust", detail::peaked_json(g.noise.thrust)},
                  {"rate_x", detail::peaked_json(g.noise.rate_x)},
                  {"rate_y", detail::peaked_json(g.noise.rate_y)},
                  {"peak_step", g.noise.peak_step}}},
                {"box",
                 {{"length", g.box.length},
                  {"width", g.box.width},
                  {"height", g.box.height},
                  {"epsilon", g.box.epsilon},
                  {"assumed_depth", g.box.assumed_depth}}},
                {"ablation",
                 {{"no_se3", g.ablation.no_se3},
                  {"const_dt", g.ablation.const_dt},
                  {"const_noise", g.ablation.const_noise_cost}}}};
  j["camera"] = {{"width", c.camera.width},
                 {"height", c.camera.height},
                 {"hfov_deg", c.camera.hfov_deg},
                 {"tilt_deg", c.camera.tilt_deg},
                 {"tilt_from_speed", c.camera.tilt_from_speed},
                 {"offset", vec_json(c.camera.offset)}};
  j["trajectory"] = {{"kind", to_string(t.kind)},
                     {"origin", vec_json(t.origin)},
                     {"speed", t.speed},
                     {"extent_x", t.extent_x},
                     {"extent_y", t.extent_y},
                     {"ramp_time", t.ramp_time},
                     {"laps", t.laps},
                     {"length", t.length},
                     {"hover_duration", t.hover_duration},
                     {"yaw", t.yaw},
                     {"hypo_big_radius", t.hypo_big_radius},
                     {"hypo_small_radius", t.hypo_small_radius},
                     {"hypo_pen", t.hypo_pen}};
  const Bounds2& b = c.forest.bounds;
  j["forest"] = {{"enabled", c.forest.enabled},
                 {"density", c.forest.density},
                 {"bounds", Json::array({b.x_min, b.x_max, b.y_min, b.y_max})},
                 {"radius", c.forest.radius},
                 {"height", c.forest.height},
                 {"clearing_radius", c.forest.clearing_radius}};
  j["sim"] = {{"dt", c.sim.dt},
              {"camera_rate_hz", c.sim.camera_rate_hz},
              {"duration", c.sim.duration},
              {"settle_time", c.sim.settle_time},
              {"divergence_distance", c.sim.divergence_distance},
              {"goal_tolerance", c.sim.goal_tolerance}};
  j["run"] = {{"controller", to_string(c.controller)}, {"seed", c.seed}, {"threads", c.threads}};
  return j;
}

inline ControllerKind parse_controller_kind(const std::string& name) {
  if (name == "gmppi") return ControllerKind::kGmppi;
  if (name == "se3") return ControllerKind::kSe3;
  throw std::invalid_argument("unknown controller '" + name + "' (expected gmppi or se3)");
}

/// Reads a fully populated tree (as produced by to_json) back into structs.
inline ScenarioConfig from_json(const Json& j) {
  using detail::json_vec;
  ScenarioConfig c;
  const Json& v = j.at("vehicle");
  c.vehicle.mass = v.at("mass");
  c.vehicle.arm_length = v.at("arm_length");
  c.vehicle.torque_const = v.at("torque_const");
  c.vehicle.inertia_diag = json_vec(v.at("inertia"));
  c.vehicle.length = v.at("length");
  c.vehicle.width = v.at("width");
  c.vehicle.height = v.at("height");
  c.vehicle.drag_diag = json_vec(v.at("drag"));
  c.vehicle.gravity = json_vec(v.at("gravity"));

  const Json& l = j.at("limits");
  c.limits = {l.at("thrust_min"), l.at("thrust_max"), l.at("rate_xy_max"), l.at("rate_z_max")};
  const Json& rt = j.at("rate_tracking");
  c.rate_tracking = {rt.at("rate_gain"), rt.at("perfect"), rt.at("max_stiff_product")};

  const Json& g = j.at("gmppi");
  GmppiConfig& m = c.gmppi;
  m.rollouts = g.at("rollouts");
  m.se3_rollouts = g.at("se3_rollouts");
  m.horizon_steps = g.at("horizon_steps");
  m.lambda = g.at("lambda");
  m.yaw_gain = g.at("yaw_gain");
  m.base_gains = detail::json_gains(g.at("gains"));
  m.gain_sigma = detail::json_gains(g.at("gain_sigma"));
  m.near_steps = g.at("near_steps");
  m.n_near = g.at("n_near");
  m.n_max = g.at("n_max");
  m.v_min = g.at("v_min");
  m.horizon_cap = g.at("horizon_cap");
  m.sensor_range = g.at("sensor_range");
  m.jerk_tolerance = g.at("jerk_tolerance");
  const Json& cost = g.at("cost");
  m.cost.position = detail::json_linear(cost.at("position"));
  m.cost.velocity = detail::json_linear(cost.at("velocity"));
  m.cost.orientation = detail::json_linear(cost.at("orientation"));
  m.cost.rate = detail::json_linear(cost.at("rate"));
  m.cost.jerk = detail::json_linear(cost.at("jerk"));
  m.cost.smooth = detail::json_linear(cost.at("smooth"));
  m.cost.obstacle = detail::json_linear(cost.at("obstacle"));
  const Json& noise = g.at("noise");
  m.noise.thrust = detail::json_peaked(noise.at("thrust"));
  m.noise.rate_x = detail::json_peaked(noise.at("rate_x"));
  m.noise.rate_y = detail::json_peaked(noise.at("rate_y"));
  m.noise.peak_step = noise.at("peak_step");
  const Json& box = g.at("box");
  m.box = {box.at("length"), box.at("width"), box.at("height"), box.at("epsilon"), box.at("assumed_depth")};
  const Json& ab = g.at("ablation");
  m.ablation = {ab.at("no_se3"), ab.at("const_dt"), ab.at("const_noise")};

  const Json& cam = j.at("camera");
  c.camera.width = cam.at("width");
  c.camera.height = cam.at("height");
  c.camera.hfov_deg = cam.at("hfov_deg");
  c.camera.tilt_deg = cam.at("tilt_deg");
  c.camera.tilt_from_speed = cam.at("tilt_from_speed");
  c.camera.offset = json_vec(cam.at("offset"));

  const Json& t = j.at("trajectory");
  TrajectoryParams& tp = c.trajectory;
  tp.kind = parse_trajectory_kind(t.at("kind").get<std::string>());
  tp.origin = json_vec(t.at("origin"));
  tp.speed = t.at("speed");
  tp.extent_x = t.at("extent_x");
  tp.extent_y = t.at("extent_y");
  tp.ramp_time = t.at("ramp_time");
  tp.laps = t.at("laps");
  tp.length = t.at("length");
  tp.hover_duration = t.at("hover_duration");
  tp.yaw = t.at("yaw");
  tp.hypo_big_radius = t.at("hypo_big_radius");
  tp.hypo_small_radius = t.at("hypo_small_radius");
  tp.hypo_pen = t.at("hypo_pen");

  const Json& f = j.at("forest");
  c.forest.enabled = f.at("enabled");
  c.forest.density = f.at("density");
  const Json& b = f.at("bounds");
  c.forest.bounds = {b.at(0), b.at(1), b.at(2), b.at(3)};
  c.forest.radius = f.at("radius");
  c.forest.height = f.at("height");
  c.forest.clearing_radius = f.at("clearing_radius");

  const Json& s = j.at("sim");
  c.sim.dt = s.at("dt");
  c.sim.camera_rate_hz = s.at("camera_rate_hz");
  c.sim.duration = s.at("duration");
  c.sim.settle_time = s.at("settle_time");
  c.sim.divergence_distance = s.at("divergence_distance");
  c.sim.goal_tolerance = s.at("goal_tolerance");

  const Json& r = j.at("run");
  c.controller = parse_controller_kind(r.at("controller").get<std::string>());
  c.seed = r.at("seed");
  c.threads = r.at("threads");
  return c;
}

/// Semantic checks beyond the schema; returns every problem found.
inline std::vector<std::string> validate(const ScenarioConfig& c) {
  std::vector<std::string> problems;
  const auto check = [&problems](bool ok, const char* what) {
    if (!ok) problems.emplace_back(what);
  };
  check(c.vehicle.valid(), "vehicle: mass, inertia and box dimensions must be > 0, drag >= 0");
  check(c.limits.thrust_min >= 0.0 && c.limits.thrust_max > c.limits.thrust_min,
        "limits: need 0 <= thrust_min < thrust_max");
  check(c.limits.rate_xy_max > 0.0 && c.limits.rate_z_max > 0.0, "limits: rate limits must be > 0");
  check(c.rate_tracking.rate_gain > 0.0, "rate_tracking.rate_gain must be > 0");
  check(c.rate_tracking.max_stiff_product > 0.0, "rate_tracking.max_stiff_product must be > 0");
  try {
    c.gmppi.validate();
  } catch (const std::invalid_argument& e) {
    problems.push_back(std::string("gmppi: ") + e.what());
  }
  check(c.camera.width > 0 && c.camera.height > 0, "camera: width and height must be > 0");
  check(c.camera.hfov_deg > 0.0 && c.camera.hfov_deg < 180.0, "camera.hfov_deg must be in (0, 180)");
  check(c.trajectory.speed > 0.0 || c.trajectory.kind == TrajectoryKind::kHover, "trajectory.speed must be > 0");
  check(c.forest.density >= 0.0 && c.forest.radius > 0.0 && c.forest.height > 0.0,
        "forest: density >= 0, radius and height > 0");
  check(c.forest.bounds.x_max >= c.forest.bounds.x_min && c.forest.bounds.y_max >= c.forest.bounds.y_min,
        "forest.bounds must be [x_min, x_max, y_min, y_max]");
  check(c.sim.dt > 0.0, "sim.dt must be > 0");
  check(c.sim.camera_rate_hz > 0.0, "sim.camera_rate_hz must be > 0");
  check(c.sim.divergence_distance > 0.0 && c.sim.goal_tolerance > 0.0,
        "sim: divergence_distance and goal_tolerance must be > 0");
  check(c.sim.settle_time >= 0.0, "sim.settle_time must be >= 0");
  return problems;
}

/// Parses the value side of a `key=value` override: JSON if it parses,
/// otherwise the raw text as a string.
inline Json parse_override_value(const std::string& text) {
  try {
    return Json::parse(text);
  } catch (const Json::parse_error&) {
    return Json(text);
  }
}

/// Turns "a.b.c=value" into {"a": {"b": {"c": value}}}.
inline Json override_patch(const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0)
    throw ConfigError({"override '" + assignment + "': expected key=value"});
  const std::string key = assignment.substr(0, eq);
  Json patch = parse_override_value(assignment.substr(eq + 1));
  std::size_t end = key.size();
  while (true) {
    const auto dot = key.rfind('.', end - 1);
    const std::size_t begin = dot == std::string::npos ? 0 : dot + 1;
    const std::string part = key.substr(begin, end - begin);
    if (part.empty()) throw ConfigError({"override '" + assignment + "': empty key segment"});
    patch = Json{{part, patch}};
    if (dot == std::string::npos) break;
    end = dot;
  }
  return patch;
}

/// Applies patches in order on top of the defaults and validates the result.
inline ScenarioConfig resolve_config(const std::vector<Json>& patches) {
  Json tree = to_json(ScenarioConfig{});
  std::vector<std::string> problems;
  for (const Json& p : patches) detail::overlay(tree, p, "", problems);
  if (!problems.empty()) throw ConfigError(problems);
  ScenarioConfig cfg;
  try {
    cfg = from_json(tree);
  } catch (const std::exception& e) {
    throw ConfigError({e.what()});
  }
  problems = validate(cfg);
  if (!problems.empty()) throw ConfigError(problems);
  return cfg;
}

inline Json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError({"cannot open config file '" + path + "'"});
  try {
    return Json::parse(in, nullptr, true, true);
  } catch (const Json::parse_error& e) {
    throw ConfigError({path + ": " + e.what()});
  }
}

/// Preset for forest flights: a line at 1.5 m altitude through the forest.
inline Json forest_run_preset() {
  return {{"forest", {{"enabled", true}}},
          {"trajectory", {{"kind", "line"}, {"origin", Json::array({0.0, 0.0, 1.5})}}}};
}

/// Defaults, then `presets`, then the optional file, then `key=value`
/// overrides.
inline ScenarioConfig load_config(const std::string& path, const std::vector<std::string>& overrides,
                                  const std::vector<Json>& presets = {}) {
  std::vector<Json> patches = presets;
  if (!path.empty()) patches.push_back(load_json_file(path));
  for (const std::string& o : overrides) patches.push_back(override_patch(o));
  return resolve_config(patches);
}

/// Camera tilt for a scenario: the speed table for forest runs when enabled.
inline double resolved_tilt_deg(const ScenarioConfig& c) {
  if (c.forest.enabled && c.camera.tilt_from_speed) return camera_tilt_for_speed(c.trajectory.speed);
  return c.camera.tilt_deg;
}

/// Builds the runnable scenario, including the forest for this seed.
inline Scenario make_scenario(const ScenarioConfig& c) {
  Scenario sc;
  sc.controller = c.controller;
  sc.gmppi = c.gmppi;
  sc.gmppi.seed = c.seed;
  sc.gmppi.threads = c.threads;
  sc.plant = {c.vehicle, c.limits, c.rate_tracking};
  sc.trajectory = c.trajectory;
  sc.camera = make_forward_camera(c.camera.width, c.camera.height, c.camera.hfov_deg, resolved_tilt_deg(c),
                                  c.camera.offset);
  sc.sim = c.sim;
  if (c.forest.enabled) {
    ForestOptions opts;
    opts.radius = c.forest.radius;
    opts.height = c.forest.height;
    opts.clearing_center = c.trajectory.origin.head<2>();
    opts.clearing_radius = c.forest.clearing_radius;
    sc.forest = generate_forest(c.forest.density, c.forest.bounds, c.seed, opts);
  }
  return sc;
}

}  // namespace gmppi
