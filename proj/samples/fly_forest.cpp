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

// Loads a scenario file, flies it once and prints the headline metrics.
//
//   fly_forest samples/forest_5ms.json [key=value ...]

#include <gmppi/config.hpp>
#include <gmppi/simulation.hpp>

#include <cstdio>
#include <string>
#include <vector>

int main(int argc, char** argv) {
  if (argc < 2) {
    std::fprintf(stderr, "usage: %s config.json [key=value ...]\n", argv[0]);
    return 2;
  }
  const std::vector<std::string> overrides(argv + 2, argv + argc);
  try {
    const gmppi::ScenarioConfig cfg = gmppi::load_config(argv[1], overrides);
    const gmppi::RunResult r = gmppi::run_closed_loop(gmppi::make_scenario(cfg));
    std::printf("success %d  pos_rmse %.3f m  max_speed %.2f m/s  min_clearance %.2f m  %s\n", r.metrics.success,
                r.metrics.pos_rmse, r.metrics.max_speed, r.metrics.min_clearance,
                r.log.failure.empty() ? "" : r.log.failure.c_str());
    return r.metrics.success ? 0 : 1;
  } catch (const gmppi::ConfigError& e) {
    for (const std::string& p : e.problems()) std::fprintf(stderr, "config: %s\n", p.c_str());
    return 2;
  }
}
