// Copyright 2026 The bytheway Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <algorithm>
#include <cstdlib>
#include <thread>
#include <vector>

namespace btw::detail {

// Thread cap: BTW_THREADS if set to a positive integer, else hardware
// concurrency. Re-read on every call so tests can flip it at runtime.
inline unsigned thread_cap() {
  if (const char* env = std::getenv("BTW_THREADS")) {
    char* end = nullptr;
    const long parsed = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && parsed >= 1)
      return static_cast<unsigned>(std::min<long>(parsed, 1024));
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1u : hw;
}

// Runs body(begin, end) over contiguous chunks of [0, count). Each index is
// visited exactly once by exactly one thread, so bodies that write disjoint
// outputs produce bit-identical results for every thread count. `grain` is
// the minimum chunk size worth a thread.
template <typename Body>
inline void parallel_for(std::size_t count, std::size_t grain, Body&& body) {
  if (count == 0) return;
  grain = std::max<std::size_t>(grain, 1);
  const std::size_t max_threads = std::min<std::size_t>(thread_cap(), (count + grain - 1) / grain);
  if (max_threads <= 1) {
    body(std::size_t{0}, count);
    return;
  }
  const std::size_t chunk = (count + max_threads - 1) / max_threads;
  std::vector<std::thread> workers;
  workers.reserve(max_threads - 1);
  std::size_t begin = chunk;  // first chunk runs on the calling thread
  for (std::size_t t = 1; t < max_threads && begin < count; ++t) {
    const std::size_t end = std::min(begin + chunk, count);
    workers.emplace_back([&body, begin, end] { body(begin, end); });
    begin = end;
  }
  body(std::size_t{0}, std::min(chunk, count));
  for (auto& w : workers) w.join();
}

}  // namespace btw::detail
