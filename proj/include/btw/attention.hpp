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

#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "btw/detail/parallel.hpp"
#include "btw/detail/summation.hpp"
#include "btw/errors.hpp"

namespace btw {

namespace defaults {
// Row-sum tolerance for accepting a map as stochastic. Matches what 32-bit
// softmax output typically achieves after accumulation.
inline constexpr double row_sum_tol = 1e-5;
// Entries may undershoot zero by this much and still count as stochastic.
inline constexpr double negative_slack = 1e-7;
}  // namespace defaults

/// Spatial layout of the flattened site axis: S = batch * height * width.
struct SpatialDims {
  std::size_t batch = 1;
  std::size_t height = 1;
  std::size_t width = 1;

  std::size_t sites() const { return batch * height * width; }
  bool operator==(const SpatialDims&) const = default;
};

/// Batched temporal attention maps: one F x F matrix per spatial site,
/// stored row-major as an (S, F, F) tensor. The last axis is the softmax
/// axis; for a validated stochastic map every row sums to 1.
///
/// The `stochastic` flag is metadata: validate() sets it after checking the
/// row invariants, and transforms that can produce negative entries clear
/// it. The flag never changes the stored values.
class AttnMapBatch {
 public:
  AttnMapBatch(std::vector<double> data, SpatialDims spatial, std::size_t frames,
               bool stochastic = false)
      : data_(std::move(data)), spatial_(spatial), frames_(frames), stochastic_(stochastic) {
    if (frames_ < 2)
      throw ShapeError("attention map needs at least 2 frames, got " + std::to_string(frames_));
    const std::size_t expected = spatial_.sites() * frames_ * frames_;
    if (data_.size() != expected)
      throw ShapeError("attention data has " + std::to_string(data_.size()) +
                       " values, expected S*F*F = " + std::to_string(expected));
  }

  /// All entries 1/F; every row is a valid softmax output.
  static AttnMapBatch uniform(SpatialDims spatial, std::size_t frames) {
    if (frames < 2) throw ShapeError("attention map needs at least 2 frames");
    std::vector<double> data(spatial.sites() * frames * frames,
                             1.0 / static_cast<double>(frames));
    return AttnMapBatch(std::move(data), spatial, frames, true);
  }

  /// One-hot rows: frame i attends only to frame i.
  static AttnMapBatch identity(SpatialDims spatial, std::size_t frames) {
    if (frames < 2) throw ShapeError("attention map needs at least 2 frames");
    std::vector<double> data(spatial.sites() * frames * frames, 0.0);
    for (std::size_t s = 0; s < spatial.sites(); ++s)
      for (std::size_t i = 0; i < frames; ++i) data[(s * frames + i) * frames + i] = 1.0;
    return AttnMapBatch(std::move(data), spatial, frames, true);
  }

  std::size_t sites() const { return spatial_.sites(); }
  std::size_t frames() const { return frames_; }
  const SpatialDims& spatial() const { return spatial_; }
  bool stochastic() const { return stochastic_; }
  void set_stochastic(bool value) { stochastic_ = value; }

  bool same_shape(const AttnMapBatch& other) const {
    return spatial_ == other.spatial_ && frames_ == other.frames_;
  }

  std::size_t site_index(std::size_t b, std::size_t y, std::size_t x) const {
    return (b * spatial_.height + y) * spatial_.width + x;
  }

  double at(std::size_t site, std::size_t i, std::size_t j) const {
    return data_[(site * frames_ + i) * frames_ + j];
  }
  double& at(std::size_t site, std::size_t i, std::size_t j) {
    return data_[(site * frames_ + i) * frames_ + j];
  }

  std::span<const double> row(std::size_t site, std::size_t i) const {
    return {data_.data() + (site * frames_ + i) * frames_, frames_};
  }
  std::span<double> row(std::size_t site, std::size_t i) {
    return {data_.data() + (site * frames_ + i) * frames_, frames_};
  }

  std::span<const double> values() const { return data_; }
  std::span<double> values() { return data_; }

 private:
  std::vector<double> data_;
  SpatialDims spatial_;
  std::size_t frames_;
  bool stochastic_;
};

/// Diagnostics from validate(). Never used to throw: callers decide.
struct ValidationResult {
  bool stochastic = false;
  double max_row_sum_deviation = 0.0;  ///< max |row sum - 1| over finite rows
  double min_entry = 0.0;
  std::size_t negative_entries = 0;  ///< entries below -negative_slack
  std::size_t nonfinite_entries = 0;
  std::size_t failing_rows = 0;
};

/// Checks every row against the stochastic-map invariants and stamps the
/// `stochastic` flag on the batch accordingly.
inline ValidationResult validate(AttnMapBatch& map, double row_sum_tol = defaults::row_sum_tol) {
  ValidationResult result;
  result.min_entry = std::numeric_limits<double>::infinity();
  const std::size_t frames = map.frames();
  for (std::size_t s = 0; s < map.sites(); ++s) {
    for (std::size_t i = 0; i < frames; ++i) {
      const auto row = map.row(s, i);
      double sum = 0.0;
      bool row_ok = true;
      for (const double v : row) {
        if (!std::isfinite(v)) {
          ++result.nonfinite_entries;
          row_ok = false;
          continue;
        }
        sum += v;
        result.min_entry = std::min(result.min_entry, v);
        if (v < -defaults::negative_slack) {
          ++result.negative_entries;
          row_ok = false;
        }
      }
      if (row_ok) {
        const double deviation = std::abs(sum - 1.0);
        result.max_row_sum_deviation = std::max(result.max_row_sum_deviation, deviation);
        if (deviation > row_sum_tol) row_ok = false;
      }
      if (!row_ok) ++result.failing_rows;
    }
  }
  if (map.sites() == 0) result.min_entry = 0.0;
  result.stochastic = result.failing_rows == 0;
  map.set_stochastic(result.stochastic);
  return result;
}

/// Per-site energies: (1/F) * sum of squared entries of the site's map.
inline std::vector<double> site_energies(const AttnMapBatch& map) {
  if (map.sites() == 0) throw ShapeError("energy of an empty attention batch");
  const std::size_t frames = map.frames();
  const double inv_frames = 1.0 / static_cast<double>(frames);
  std::vector<double> energies(map.sites());
  const auto values = map.values();
  const std::size_t per_site = frames * frames;
  detail::parallel_for(map.sites(), 4096 / per_site + 1, [&](std::size_t begin, std::size_t end) {
    for (std::size_t s = begin; s < end; ++s) {
      double acc = 0.0;
      const double* v = values.data() + s * per_site;
      for (std::size_t n = 0; n < per_site; ++n) acc += v[n] * v[n];
      energies[s] = acc * inv_frames;
    }
  });
  return energies;
}

/// Energy of the batch: spatial mean of the per-site energies, so the value
/// is comparable across resolutions.
inline double energy(const AttnMapBatch& map) {
  const auto energies = site_energies(map);
  return detail::pairwise_sum(energies) / static_cast<double>(energies.size());
}

/// Band-resolved energy split. total = high + low up to rounding; per_site
/// holds the per-site totals when requested.
struct EnergyReport {
  double total = 0.0;
  double high = 0.0;
  double low = 0.0;
  std::optional<std::vector<double>> per_site;
};

/// Mean per-site Frobenius distance between two batches of equal shape.
/// Symmetric, zero iff the maps are equal.
inline double disparity(const AttnMapBatch& a, const AttnMapBatch& b) {
  if (!a.same_shape(b)) throw ShapeError("disparity requires identical (S, F, F) shapes");
  if (a.sites() == 0) throw ShapeError("disparity of an empty attention batch");
  const std::size_t per_site = a.frames() * a.frames();
  const auto va = a.values();
  const auto vb = b.values();
  std::vector<double> norms(a.sites());
  detail::parallel_for(a.sites(), 4096 / per_site + 1, [&](std::size_t begin, std::size_t end) {
    for (std::size_t s = begin; s < end; ++s) {
      double acc = 0.0;
      const double* pa = va.data() + s * per_site;
      const double* pb = vb.data() + s * per_site;
      for (std::size_t n = 0; n < per_site; ++n) {
        const double d = pa[n] - pb[n];
        acc += d * d;
      }
      norms[s] = std::sqrt(acc);
    }
  });
  return detail::pairwise_sum(norms) / static_cast<double>(norms.size());
}

}  // namespace btw
