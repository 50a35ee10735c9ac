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

// Run artifacts: run-log CSV, metrics and forest JSON, aggregate sweep CSV,
// depth frames as PFM with a JSON sidecar.
#pragma once

#include <gmppi/config.hpp>

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace gmppi {

inline constexpr const char* kRunCsvHeader =
    "t,px,py,pz,vx,vy,vz,qw,qx,qy,qz,wx,wy,wz,thrust,wcx,wcy,wcz,ref_px,ref_py,ref_pz,ref_heading";

/// Shortest round-trip decimal form of a double.
inline std::string format_double(double x) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

/// Writes `contents` to a sibling temporary file and renames it over `path`.
inline void write_file_atomic(const std::filesystem::path& path, const std::string& contents) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write '" + tmp.string() + "'");
    out << contents;
    if (!out) throw std::runtime_error("write failed for '" + tmp.string() + "'");
  }
  std::filesystem::rename(tmp, path);
}

inline void write_run_csv(std::ostream& out, const RunLog& log) {
  out << kRunCsvHeader << '\n';
  for (const LogRow& r : log.rows) {
    const double values[] = {r.t,
                             r.x.p.x(), r.x.p.y(), r.x.p.z(),
                             r.x.v.x(), r.x.v.y(), r.x.v.z(),
                             r.x.q.w(), r.x.q.x(), r.x.q.y(), r.x.q.z(),
                             r.x.w.x(), r.x.w.y(), r.x.w.z(),
                             r.u.thrust, r.u.body_rates.x(), r.u.body_rates.y(), r.u.body_rates.z(),
                             r.ref_p.x(), r.ref_p.y(), r.ref_p.z(), r.ref_heading};
    bool first = true;
    for (double v : values) {
      if (!first) out << ',';
      out << format_double(v);
      first = false;
    }
    out << '\n';
  }
}

inline std::string run_csv(const RunLog& log) {
  std::ostringstream out;
  write_run_csv(out, log);
  return out.str();
}

inline Json finite_or_null(double x) { return std::isfinite(x) ? Json(x) : Json(nullptr); }

inline Json metrics_json(const RunMetrics& m) {
  return {{"pos_rmse", m.pos_rmse},
          {"heading_rmse", m.heading_rmse},
          {"max_speed", m.max_speed},
          {"max_accel", m.max_accel},
          {"success", m.success},
          {"min_clearance", finite_or_null(m.min_clearance)},
          {"iterations", m.iterations}};
}

/// Metrics of one run with its outcome and the resolved configuration.
inline Json run_report_json(const RunResult& r, const Json& resolved_config) {
  Json j = metrics_json(r.metrics);
  j["collided"] = r.log.collided;
  j["diverged"] = r.log.diverged;
  j["reached_goal"] = r.log.reached_goal;
  j["failure"] = r.log.failure;
  j["config"] = resolved_config;
  return j;
}

inline Json forest_json(const Forest& f) {
  Json trees = Json::array();
  for (const Tree& t : f.trees) {
    trees.push_back({{"x", t.center.x()}, {"y", t.center.y()}, {"radius", t.radius}, {"height", t.height}});
  }
  return {{"seed", f.seed},
          {"density", f.density},
          {"bounds", {{"x_min", f.bounds.x_min}, {"x_max", f.bounds.x_max},
                      {"y_min", f.bounds.y_min}, {"y_max", f.bounds.y_max}}},
          {"trees", trees}};
}

inline Forest forest_from_json(const Json& j) {
  Forest f;
  f.seed = j.at("seed");
  f.density = j.at("density");
  const Json& b = j.at("bounds");
  f.bounds = {b.at("x_min"), b.at("x_max"), b.at("y_min"), b.at("y_max")};
  for (const Json& t : j.at("trees")) {
    f.trees.push_back({Eigen::Vector2d(t.at("x").get<double>(), t.at("y").get<double>()), t.at("radius"),
                       t.at("height")});
  }
  return f;
}

/// One aggregate row per run.
struct SweepRow {
  std::string variant;
  std::uint64_t seed = 0;
  double speed = 0.0;
  RunMetrics metrics;
};

/// Aggregate CSV. With `with_variant` a leading `variant` column names the
/// controller configuration of each row.
inline std::string aggregate_csv(const std::vector<SweepRow>& rows, bool with_variant) {
  std::ostringstream out;
  if (with_variant) out << "variant,";
  out << "seed,speed,success,pos_rmse,heading_rmse,max_v,max_a\n";
  for (const SweepRow& r : rows) {
    if (with_variant) out << r.variant << ',';
    out << r.seed << ',' << format_double(r.speed) << ',' << (r.metrics.success ? 1 : 0) << ','
        << format_double(r.metrics.pos_rmse) << ',' << format_double(r.metrics.heading_rmse) << ','
        << format_double(r.metrics.max_speed) << ',' << format_double(r.metrics.max_accel) << '\n';
  }
  return out.str();
}

/// Success rate per speed, in order of first appearance.
inline std::string success_summary_csv(const std::vector<SweepRow>& rows) {
  std::vector<double> speeds;
  for (const SweepRow& r : rows)
    if (std::find(speeds.begin(), speeds.end(), r.speed) == speeds.end()) speeds.push_back(r.speed);
  std::ostringstream out;
  out << "speed,runs,successes,success_rate\n";
  for (double s : speeds) {
    int runs = 0, ok = 0;
    for (const SweepRow& r : rows) {
      if (r.speed != s) continue;
      ++runs;
      ok += r.metrics.success;
    }
    out << format_double(s) << ',' << runs << ',' << ok << ',' << format_double(static_cast<double>(ok) / runs)
        << '\n';
  }
  return out.str();
}

/// Little-endian PFM ("Pf", scale -1), rows stored bottom to top.
inline std::string depth_pfm(const DepthFrame& frame) {
  std::ostringstream out(std::ios::binary);
  out << "Pf\n" << frame.width() << ' ' << frame.height() << "\n-1.0\n";
  static_assert(sizeof(float) == 4);
  for (int v = frame.height() - 1; v >= 0; --v) {
    for (int u = 0; u < frame.width(); ++u) {
      const float d = frame.depth(u, v);
      unsigned char bytes[4];
      std::memcpy(bytes, &d, 4);
      if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + 4);
      out.write(reinterpret_cast<const char*>(bytes), 4);
    }
  }
  return out.str();
}

inline Json depth_sidecar_json(const DepthFrame& frame) {
  const CameraModel& c = frame.camera();
  const Pose& pose = frame.capture_pose();
  const UnitQuat& q = pose.attitude;
  const UnitQuat& m = c.mount_rotation;
  return {{"width", c.width},
          {"height", c.height},
          {"fx", c.fx},
          {"fy", c.fy},
          {"cx", c.cx},
          {"cy", c.cy},
          {"tilt_deg", c.tilt_deg},
          {"range", frame.range()},
          {"no_return", "inf"},
          {"depth", "euclidean ray distance [m]"},
          {"row_order", "bottom_to_top"},
          {"mount_rotation_wxyz", {m.w(), m.x(), m.y(), m.z()}},
          {"mount_translation", detail::vec_json(c.mount_translation)},
          {"position", detail::vec_json(pose.position)},
          {"attitude_wxyz", {q.w(), q.x(), q.y(), q.z()}}};
}

/// Per-iteration controller diagnostics as one JSON object.
inline Json diagnostics_json(const IterationDiagnostics& d) {
  Json terms;
  for (std::size_t i = 0; i < kCostTermCount; ++i) terms[kCostTermNames[i]] = d.term_means[i];
  return {{"iteration", d.iteration},
          {"min_cost", d.min_cost},
          {"mean_cost", d.mean_cost},
          {"max_cost", d.max_cost},
          {"term_means", terms},
          {"n_far", d.n_far},
          {"horizon", d.horizon},
          {"collision_fraction", d.collision_fraction},
          {"collision_weight", d.collision_weight},
          {"effective_samples", d.effective_samples},
          {"timings_ns",
           {{"prepare", d.timings.prepare_ns},
            {"rollout", d.timings.rollout_ns},
            {"cost", d.timings.cost_ns},
            {"update", d.timings.update_ns}}}};
}

inline std::string diagnostics_jsonl(const std::vector<IterationDiagnostics>& diags) {
  std::string out;
  for (const IterationDiagnostics& d : diags) out += diagnostics_json(d).dump() + "\n";
  return out;
}

}  // namespace gmppi
