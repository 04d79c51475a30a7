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

#include <cstddef>
#include <span>

namespace btw::detail {

// Pairwise summation. Deterministic for a fixed element order and keeps the
// rounding error at O(log n) ulps, which is what lets reductions over sites
// stay inside the documented tolerances regardless of batch size.
inline double pairwise_sum(std::span<const double> values) {
  if (values.size() <= 16) {
    double acc = 0.0;
    for (const double v : values) acc += v;
    return acc;
  }
  const std::size_t half = values.size() / 2;
  return pairwise_sum(values.first(half)) + pairwise_sum(values.subspan(half));
}

}  // namespace btw::detail
