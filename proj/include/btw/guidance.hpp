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
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "btw/attention.hpp"
#include "btw/errors.hpp"

namespace btw {

/// How anchor maps are resampled onto a finer grid. Bilinear weights are
/// convex, so stochastic rows stay stochastic; nearest is kept as an
/// ablation switch.
enum class UpsampleMethod { bilinear, nearest };

/// Temporal self-guidance configuration. Block indices are abstract: callers
/// map their decoder blocks onto 0..N-1. The defaults anchor on block 1 and
/// guide blocks 2 and 3, matching a four-block decoder whose earliest
/// temporal-attention block is index 1.
struct GuidanceConfig {
  double alpha = 0.6;
  std::size_t anchor_block = 1;
  std::vector<std::size_t> guided_blocks = {2, 3};
  UpsampleMethod upsample = UpsampleMethod::bilinear;

  void validate() const {
    if (!(alpha >= 0.0 && alpha <= 1.0))
      throw ParamError("alpha must be in [0, 1], got " + std::to_string(alpha));
    for (const std::size_t m : guided_blocks)
      if (m == anchor_block)
        throw ParamError("anchor block " + std::to_string(anchor_block) +
                         " cannot also be a guided block");
  }
};

namespace detail {

// Corner-aligned source coordinate for output index i on an axis resized
// from `from` to `to` samples.
inline double aligned_coord(std::size_t i, std::size_t from, std::size_t to) {
  if (to <= 1 || from <= 1) return 0.0;
  return static_cast<double>(i) * static_cast<double>(from - 1) / static_cast<double>(to - 1);
}

struct AxisSample {
  std::size_t lo = 0;
  std::size_t hi = 0;
  double frac = 0.0;  // weight of hi
};

inline std::vector<AxisSample> sample_axis(std::size_t from, std::size_t to,
                                           UpsampleMethod method) {
  std::vector<AxisSample> samples(to);
  for (std::size_t i = 0; i < to; ++i) {
    const double coord = aligned_coord(i, from, to);
    if (method == UpsampleMethod::nearest) {
      const auto idx = static_cast<std::size_t>(std::lround(coord));
      samples[i] = {std::min(idx, from - 1), std::min(idx, from - 1), 0.0};
    } else {
      const auto lo = static_cast<std::size_t>(coord);
      samples[i] = {lo, std::min(lo + 1, from - 1), coord - static_cast<double>(lo)};
    }
  }
  return samples;
}

}  // namespace detail

/// Resamples each site's F x F map from the anchor grid (B, H1, W1) onto the
/// finer grid (B, H2, W2), interpolating over the spatial axes only. The
/// attention matrices themselves are untouched; equal grids reproduce the
/// input bit for bit. Shrinking either axis is out of scope and rejected.
inline AttnMapBatch upsample_spatial(const AttnMapBatch& anchor, std::size_t target_h,
                                     std::size_t target_w,
                                     UpsampleMethod method = UpsampleMethod::bilinear) {
  const SpatialDims& src = anchor.spatial();
  if (target_h < src.height || target_w < src.width)
    throw ShapeError("upsample_spatial cannot shrink the grid: (" + std::to_string(src.height) +
                     "x" + std::to_string(src.width) + ") -> (" + std::to_string(target_h) + "x" +
                     std::to_string(target_w) + ")");
  if (target_h == 0 || target_w == 0) throw ShapeError("upsample target must be non-empty");

  const SpatialDims dst{src.batch, target_h, target_w};
  const std::size_t frames = anchor.frames();
  const std::size_t per_site = frames * frames;
  const auto rows = detail::sample_axis(src.height, target_h, method);
  const auto cols = detail::sample_axis(src.width, target_w, method);

  std::vector<double> out(dst.sites() * per_site);
  const auto src_vals = anchor.values();
  btw::detail::parallel_for(dst.sites(), 2048 / per_site + 1,
                            [&](std::size_t begin, std::size_t end) {
    for (std::size_t site = begin; site < end; ++site) {
      const std::size_t b = site / (target_h * target_w);
      const std::size_t rem = site % (target_h * target_w);
      const auto& ry = rows[rem / target_w];
      const auto& cx = cols[rem % target_w];

      const double w_lo_y = 1.0 - ry.frac;
      const double w_lo_x = 1.0 - cx.frac;
      const double w00 = w_lo_y * w_lo_x;
      const double w01 = w_lo_y * cx.frac;
      const double w10 = ry.frac * w_lo_x;
      const double w11 = ry.frac * cx.frac;

      const std::size_t base = b * src.height * src.width;
      const double* m00 = src_vals.data() + (base + ry.lo * src.width + cx.lo) * per_site;
      const double* m01 = src_vals.data() + (base + ry.lo * src.width + cx.hi) * per_site;
      const double* m10 = src_vals.data() + (base + ry.hi * src.width + cx.lo) * per_site;
      const double* m11 = src_vals.data() + (base + ry.hi * src.width + cx.hi) * per_site;
      double* dst_map = out.data() + site * per_site;
      for (std::size_t n = 0; n < per_site; ++n)
        dst_map[n] = w00 * m00[n] + w01 * m01[n] + w10 * m10[n] + w11 * m11[n];
    }
  });
  return AttnMapBatch(std::move(out), dst, frames, anchor.stochastic());
}

/// Convex blend toward the upsampled anchor: (1 - alpha) * guided +
/// alpha * anchor_up, entrywise. alpha = 0 and alpha = 1 reproduce the
/// respective input exactly.
inline AttnMapBatch blend(const AttnMapBatch& guided, const AttnMapBatch& anchor_up,
                          double alpha) {
  if (!guided.same_shape(anchor_up)) throw ShapeError("blend requires identical shapes");
  if (!(alpha >= 0.0 && alpha <= 1.0))
    throw ParamError("alpha must be in [0, 1], got " + std::to_string(alpha));

  const double w_guided = 1.0 - alpha;
  std::vector<double> out(guided.values().size());
  const auto g = guided.values();
  const auto a = anchor_up.values();
  btw::detail::parallel_for(out.size(), 1 << 16, [&](std::size_t begin, std::size_t end) {
    for (std::size_t n = begin; n < end; ++n) out[n] = w_guided * g[n] + alpha * a[n];
  });
  return AttnMapBatch(std::move(out), guided.spatial(), guided.frames(),
                      guided.stochastic() && anchor_up.stochastic());
}

}  // namespace btw
