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
#pragma once

#include <tbb/blocked_range.h>
#include <tbb/parallel_for.h>
#include <tbb/task_arena.h>

#include <memory>

namespace gmppi {

/// Index-parallel loop over a private TBB arena. Callers must make every
/// iteration write only its own outputs; then results do not depend on the
/// worker count.
class ParallelExecutor {
 public:
  /// `threads` <= 0 selects the TBB default concurrency.
  explicit ParallelExecutor(int threads = 0)
      : threads_(threads > 0 ? threads : tbb::this_task_arena::max_concurrency()),
        arena_(std::make_unique<tbb::task_arena>(threads_)) {}

  int threads() const { return threads_; }

  template <typename Fn>
  void for_each(int n, Fn&& fn, int grain = 8) {
    if (threads_ == 1) {
      for (int i = 0; i < n; ++i) fn(i);
      return;
    }
    arena_->execute([&] {
      tbb::parallel_for(tbb::blocked_range<int>(0, n, grain), [&](const tbb::blocked_range<int>& r) {
        for (int i = r.begin(); i != r.end(); ++i) fn(i);
      });
    });
  }

 private:
  int threads_;
  std::unique_ptr<tbb::task_arena> arena_;
};

}  // namespace gmppi
