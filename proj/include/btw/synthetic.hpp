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
#include <cstdint>
#include <numbers>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "btw/attention.hpp"
#include "btw/errors.hpp"

namespace btw {

enum class Pattern { gaussian_blob, sinusoidal_grating, checker };

inline Pattern parse_pattern(std::string_view name) {
  if (name == "blob" || name == "gaussian_blob") return Pattern::gaussian_blob;
  if (name == "grating" || name == "sinusoidal_grating") return Pattern::sinusoidal_grating;
  if (name == "checker") return Pattern::checker;
  throw ParamError("unknown pattern '" + std::string(name) +
                   "' (expected blob, grating, or checker)");
}

inline std::string_view pattern_name(Pattern pattern) {
  switch (pattern) {
    case Pattern::gaussian_blob: return "blob";
    case Pattern::sinusoidal_grating: return "grating";
    case Pattern::checker: return "checker";
  }
  throw ParamError("invalid pattern value");
}

/// Grayscale frame sequence, (F, H, W) row-major, intensities in [0, 1].
struct FrameStack {
  std::vector<double> data;
  std::size_t frames = 0;
  std::size_t height = 0;
  std::size_t width = 0;

  std::size_t pixels() const { return height * width; }
  double& at(std::size_t t, std::size_t y, std::size_t x) {
    return data[(t * height + y) * width + x];
  }
  double at(std::size_t t, std::size_t y, std::size_t x) const {
    return data[(t * height + y) * width + x];
  }
};

struct SyntheticVideo {
  FrameStack frames;
  double vx = 0.0;
  double vy = 0.0;
  Pattern pattern = Pattern::sinusoidal_grating;
  std::uint64_t seed = 0;
};

/// Block-matching displacement estimates, one (dx, dy) per block per
/// consecutive frame pair, in pixels per frame.
struct FlowField {
  std::size_t pairs = 0;
  std::size_t grid_h = 0;
  std::size_t grid_w = 0;
  std::vector<double> dx;
  std::vector<double> dy;

  std::size_t index(std::size_t pair, std::size_t by, std::size_t bx) const {
    return (pair * grid_h + by) * grid_w + bx;
  }

  double mean_magnitude() const {
    if (dx.empty()) return 0.0;
    std::vector<double> mags(dx.size());
    for (std::size_t n = 0; n < dx.size(); ++n) mags[n] = std::hypot(dx[n], dy[n]);
    return detail::pairwise_sum(mags) / static_cast<double>(mags.size());
  }
};

namespace detail {

inline double wrap_coord(double a, double n) {
  const double r = std::fmod(a, n);
  return r < 0.0 ? r + n : r;
}

inline std::size_t wrap_index(long long i, std::size_t n) {
  const auto sn = static_cast<long long>(n);
  long long m = i % sn;
  if (m < 0) m += sn;
  return static_cast<std::size_t>(m);
}

}  // namespace detail

/// Renders F frames of a seeded pattern translated by t * (vx, vy) with
/// periodic wrap; frame t is exactly frame 0 resampled at wrapped
/// coordinates, so integer velocities reproduce shifted frames bit for bit.
inline SyntheticVideo gen_video(Pattern pattern, std::size_t height, std::size_t width,
                                std::size_t frames, double vx, double vy,
                                std::uint64_t seed = 0) {
  if (height < 16 || width < 16)
    throw ParamError("frame size must be at least 16x16, got " + std::to_string(height) + "x" +
                     std::to_string(width));
  if (frames < 2 || frames % 2 != 0)
    throw ParamError("frame count must be even and >= 2, got " + std::to_string(frames));
  const double min_side = static_cast<double>(std::min(height, width));
  const double speed = std::hypot(vx, vy);
  if (!std::isfinite(speed) || speed > min_side / static_cast<double>(frames))
    throw ParamError("velocity magnitude " + std::to_string(speed) + " exceeds limit " +
                     std::to_string(min_side / static_cast<double>(frames)));

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double w = static_cast<double>(width);
  const double h = static_cast<double>(height);

  double blob_cx = 0.0, blob_cy = 0.0, phase = 0.0, offset_x = 0.0, offset_y = 0.0;
  const double sigma = min_side / 8.0;
  const double cell = std::max(2.0, std::floor(min_side / 8.0));
  switch (pattern) {
    case Pattern::gaussian_blob:
      blob_cx = unit(rng) * w;
      blob_cy = unit(rng) * h;
      break;
    case Pattern::sinusoidal_grating:
      phase = unit(rng) * 2.0 * std::numbers::pi;
      break;
    case Pattern::checker:
      offset_x = unit(rng) * cell;
      offset_y = unit(rng) * cell;
      break;
  }

  const auto sample = [&](double x, double y) -> double {
    switch (pattern) {
      case Pattern::gaussian_blob: {
        const double ddx = detail::wrap_coord(x - blob_cx + w / 2.0, w) - w / 2.0;
        const double ddy = detail::wrap_coord(y - blob_cy + h / 2.0, h) - h / 2.0;
        return std::exp(-(ddx * ddx + ddy * ddy) / (2.0 * sigma * sigma));
      }
      case Pattern::sinusoidal_grating:
        return 0.5 + 0.5 * std::sin(2.0 * std::numbers::pi * 3.0 * x / w + phase);
      case Pattern::checker: {
        const auto px = static_cast<long long>(std::floor((x + offset_x) / cell));
        const auto py = static_cast<long long>(std::floor((y + offset_y) / cell));
        return ((px + py) & 1) != 0 ? 1.0 : 0.0;
      }
    }
    return 0.0;
  };

  SyntheticVideo video;
  video.vx = vx;
  video.vy = vy;
  video.pattern = pattern;
  video.seed = seed;
  video.frames = {std::vector<double>(frames * height * width), frames, height, width};
  for (std::size_t t = 0; t < frames; ++t) {
    const double td = static_cast<double>(t);
    for (std::size_t y = 0; y < height; ++y) {
      const double sy = detail::wrap_coord(static_cast<double>(y) - td * vy, h);
      for (std::size_t x = 0; x < width; ++x) {
        const double sx = detail::wrap_coord(static_cast<double>(x) - td * vx, w);
        video.frames.at(t, y, x) = sample(sx, sy);
      }
    }
  }
  return video;
}

/// Builds a (1, H, W)-site attention batch from a video: each site's frame-t
/// feature is the wrapped (2r+1)^2 patch around it, and row i is the softmax
/// over j of f_i . f_j / (sqrt(d) * temperature). Identical frames give
/// exactly uniform rows.
inline AttnMapBatch toy_temporal_attention(const FrameStack& video, std::size_t patch_radius = 2,
                                           double temperature = 1.0) {
  if (video.frames < 2) throw ShapeError("toy attention needs at least 2 frames");
  const std::size_t side = 2 * patch_radius + 1;
  if (side > video.height || side > video.width)
    throw ParamError("patch side " + std::to_string(side) + " exceeds frame size");
  if (!(temperature > 0.0))
    throw ParamError("temperature must be > 0, got " + std::to_string(temperature));

  const std::size_t frames_n = video.frames;
  const std::size_t dim = side * side;
  const double scale = 1.0 / (std::sqrt(static_cast<double>(dim)) * temperature);
  const SpatialDims spatial{1, video.height, video.width};
  std::vector<double> out(spatial.sites() * frames_n * frames_n);

  detail::parallel_for(spatial.sites(), 64, [&](std::size_t begin, std::size_t end) {
    std::vector<double> patches(frames_n * dim);
    std::vector<double> logits(frames_n);
    const auto radius = static_cast<long long>(patch_radius);
    for (std::size_t site = begin; site < end; ++site) {
      const auto y = static_cast<long long>(site / video.width);
      const auto x = static_cast<long long>(site % video.width);
      for (std::size_t t = 0; t < frames_n; ++t) {
        double* patch = patches.data() + t * dim;
        std::size_t n = 0;
        for (long long dy = -radius; dy <= radius; ++dy) {
          const std::size_t py = detail::wrap_index(y + dy, video.height);
          for (long long dx = -radius; dx <= radius; ++dx)
            patch[n++] = video.at(t, py, detail::wrap_index(x + dx, video.width));
        }
      }
      for (std::size_t i = 0; i < frames_n; ++i) {
        const double* fi = patches.data() + i * dim;
        double max_logit = -std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < frames_n; ++j) {
          const double* fj = patches.data() + j * dim;
          double dot = 0.0;
          for (std::size_t n = 0; n < dim; ++n) dot += fi[n] * fj[n];
          logits[j] = dot * scale;
          max_logit = std::max(max_logit, logits[j]);
        }
        double* row = out.data() + (site * frames_n + i) * frames_n;
        double denom = 0.0;
        for (std::size_t j = 0; j < frames_n; ++j) {
          row[j] = std::exp(logits[j] - max_logit);
          denom += row[j];
        }
        for (std::size_t j = 0; j < frames_n; ++j) row[j] /= denom;
      }
    }
  });
  return AttnMapBatch(std::move(out), spatial, frames_n, true);
}

/// Exhaustive displacement search between consecutive frames: for every
/// block, the (dx, dy) with |(dx, dy)| <= search_radius minimizing the sum
/// of absolute differences under periodic wrap. Ties go to the smaller
/// magnitude, then lexicographic (dy, dx). Exact for integer translations
/// within the radius.
inline FlowField block_matching_flow(const FrameStack& video, std::size_t block_size = 8,
                                     std::size_t search_radius = 5) {
  if (video.frames < 2) throw ShapeError("flow needs at least 2 frames");
  if (block_size < 1 || block_size > video.height || block_size > video.width)
    throw ParamError("block size must be in [1, min(H, W)]");

  struct Candidate {
    long long dy, dx;
    long long mag2;
  };
  std::vector<Candidate> candidates;
  const auto radius = static_cast<long long>(search_radius);
  for (long long dy = -radius; dy <= radius; ++dy)
    for (long long dx = -radius; dx <= radius; ++dx) {
      const long long mag2 = dy * dy + dx * dx;
      if (mag2 <= radius * radius) candidates.push_back({dy, dx, mag2});
    }
  std::sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
    if (a.mag2 != b.mag2) return a.mag2 < b.mag2;
    if (a.dy != b.dy) return a.dy < b.dy;
    return a.dx < b.dx;
  });

  FlowField flow;
  flow.pairs = video.frames - 1;
  flow.grid_h = video.height / block_size;
  flow.grid_w = video.width / block_size;
  const std::size_t per_pair = flow.grid_h * flow.grid_w;
  flow.dx.assign(flow.pairs * per_pair, 0.0);
  flow.dy.assign(flow.pairs * per_pair, 0.0);

  detail::parallel_for(flow.pairs * per_pair, 8, [&](std::size_t begin, std::size_t end) {
    for (std::size_t n = begin; n < end; ++n) {
      const std::size_t pair = n / per_pair;
      const std::size_t by = (n % per_pair) / flow.grid_w;
      const std::size_t bx = n % flow.grid_w;
      const std::size_t y0 = by * block_size;
      const std::size_t x0 = bx * block_size;

      double best_sad = std::numeric_limits<double>::infinity();
      long long best_dy = 0, best_dx = 0;
      for (const Candidate& c : candidates) {
        double sad = 0.0;
        for (std::size_t y = y0; y < y0 + block_size; ++y) {
          const std::size_t sy = detail::wrap_index(static_cast<long long>(y) + c.dy,
                                                    video.height);
          for (std::size_t x = x0; x < x0 + block_size; ++x) {
            const std::size_t sx = detail::wrap_index(static_cast<long long>(x) + c.dx,
                                                      video.width);
            sad += std::abs(video.at(pair + 1, sy, sx) - video.at(pair, y, x));
          }
        }
        if (sad < best_sad) {
          best_sad = sad;
          best_dy = c.dy;
          best_dx = c.dx;
        }
      }
      flow.dy[n] = static_cast<double>(best_dy);
      flow.dx[n] = static_cast<double>(best_dx);
    }
  });
  return flow;
}

/// Applies an attention batch to per-site pixel trajectories: output frame i
/// at pixel s is sum_j A[s, i, j] * frame_j[s]. Linear in the map; the
/// identity map reproduces the video and the uniform map collapses every
/// frame to the temporal mean.
inline FrameStack reconstruct(const AttnMapBatch& map, const FrameStack& video) {
  if (map.sites() != video.pixels() || map.frames() != video.frames)
    throw ShapeError("attention batch with " + std::to_string(map.sites()) + " sites of " +
                     std::to_string(map.frames()) + " frames cannot reconstruct a " +
                     std::to_string(video.height) + "x" + std::to_string(video.width) + "x" +
                     std::to_string(video.frames) + " video");

  FrameStack out{std::vector<double>(video.data.size()), video.frames, video.height,
                 video.width};
  const std::size_t frames_n = video.frames;
  const std::size_t pixels = video.pixels();
  detail::parallel_for(pixels, 512, [&](std::size_t begin, std::size_t end) {
    for (std::size_t s = begin; s < end; ++s)
      for (std::size_t i = 0; i < frames_n; ++i) {
        const auto row = map.row(s, i);
        double acc = 0.0;
        for (std::size_t j = 0; j < frames_n; ++j) acc += row[j] * video.data[j * pixels + s];
        out.data[i * pixels + s] = acc;
      }
  });
  return out;
}

/// Mean absolute difference between consecutive frames, averaged over all
/// pixels and frame pairs. Zero iff the video is static.
inline double temporal_variation(const FrameStack& video) {
  if (video.frames < 2) throw ShapeError("temporal variation needs at least 2 frames");
  const std::size_t pixels = video.pixels();
  std::vector<double> pair_means(video.frames - 1);
  std::vector<double> diffs(pixels);
  for (std::size_t t = 0; t + 1 < video.frames; ++t) {
    const double* a = video.data.data() + t * pixels;
    const double* b = video.data.data() + (t + 1) * pixels;
    for (std::size_t s = 0; s < pixels; ++s) diffs[s] = std::abs(b[s] - a[s]);
    pair_means[t] = detail::pairwise_sum(diffs) / static_cast<double>(pixels);
  }
  return detail::pairwise_sum(pair_means) / static_cast<double>(pair_means.size());
}

/// Spearman rank correlation with average ranks for ties; returns 0 when
/// either input has zero rank variance.
inline double spearman(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw ShapeError("spearman requires equal-length inputs");
  if (a.size() < 2) throw ShapeError("spearman requires at least 2 points");
  const std::size_t n = a.size();

  const auto ranks = [n](const std::vector<double>& v) {
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](std::size_t x, std::size_t y) { return v[x] < v[y]; });
    std::vector<double> r(n);
    std::size_t i = 0;
    while (i < n) {
      std::size_t j = i;
      while (j + 1 < n && v[order[j + 1]] == v[order[i]]) ++j;
      const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
      for (std::size_t k = i; k <= j; ++k) r[order[k]] = avg;
      i = j + 1;
    }
    return r;
  };

  const std::vector<double> ra = ranks(a);
  const std::vector<double> rb = ranks(b);
  double mean_a = 0.0, mean_b = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mean_a += ra[i];
    mean_b += rb[i];
  }
  mean_a /= static_cast<double>(n);
  mean_b /= static_cast<double>(n);
  double cov = 0.0, var_a = 0.0, var_b = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double da = ra[i] - mean_a;
    const double db = rb[i] - mean_b;
    cov += da * db;
    var_a += da * da;
    var_b += db * db;
  }
  if (var_a == 0.0 || var_b == 0.0) return 0.0;
  return cov / std::sqrt(var_a * var_b);
}

/// Knobs for the energy-motion sweep; defaults match the standard grating
/// run at 64x64 frames of 16.
struct SweepConfig {
  Pattern pattern = Pattern::sinusoidal_grating;
  std::size_t height = 64;
  std::size_t width = 64;
  std::size_t frames = 16;
  std::uint64_t seed = 0;
  std::size_t patch_radius = 2;
  double temperature = 1.0;
  std::size_t block_size = 8;
  std::size_t search_radius = 5;
};

struct SweepPoint {
  double velocity = 0.0;
  double flow = 0.0;
  double energy = 0.0;
};

struct SweepResult {
  std::vector<SweepPoint> points;
  double spearman = 0.0;  // rank correlation of flow magnitude vs energy
};

/// For each velocity v (pixels/frame along x): renders the seeded pattern,
/// measures block-matching flow magnitude and toy-attention energy, and
/// correlates the two. Velocities are canonicalized by magnitude first, so
/// any input order yields the identical result.
inline SweepResult energy_motion_sweep(std::vector<double> velocities,
                                       const SweepConfig& config = {}) {
  if (velocities.size() < 5)
    throw ParamError("sweep requires at least 5 velocities, got " +
                     std::to_string(velocities.size()));
  std::sort(velocities.begin(), velocities.end(), [](double x, double y) {
    if (std::abs(x) != std::abs(y)) return std::abs(x) < std::abs(y);
    return x < y;
  });

  SweepResult result;
  result.points.reserve(velocities.size());
  for (const double v : velocities) {
    const SyntheticVideo video = gen_video(config.pattern, config.height, config.width,
                                           config.frames, v, 0.0, config.seed);
    const AttnMapBatch attn =
        toy_temporal_attention(video.frames, config.patch_radius, config.temperature);
    const FlowField flow =
        block_matching_flow(video.frames, config.block_size, config.search_radius);
    result.points.push_back({v, flow.mean_magnitude(), energy(attn)});
  }

  std::vector<double> flows, energies;
  flows.reserve(result.points.size());
  energies.reserve(result.points.size());
  for (const SweepPoint& p : result.points) {
    flows.push_back(p.flow);
    energies.push_back(p.energy);
  }
  result.spearman = spearman(flows, energies);
  return result;
}

}  // namespace btw
