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
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "btw/attention.hpp"
#include "btw/errors.hpp"
#include "btw/fourier.hpp"
#include "btw/guidance.hpp"

namespace btw {

/// Full parameter set for one pass over a step's attention blocks.
struct BtwParams {
  double beta0 = 1.5;
  std::size_t tau = 7;
  double step_fraction = 0.2;
  GuidanceConfig guidance;

  double alpha() const { return guidance.alpha; }

  void validate() const {
    if (!std::isfinite(beta0) || beta0 <= 0.0)
      throw ParamError("beta0 must be finite and > 0, got " + std::to_string(beta0));
    if (tau < 1) throw ParamError("tau must be >= 1");
    if (!(step_fraction > 0.0 && step_fraction <= 1.0))
      throw ParamError("step_fraction must be in (0, 1], got " + std::to_string(step_fraction));
    guidance.validate();
  }

  /// Named parameter bundles for the two supported backbones.
  static BtwParams preset(std::string_view name) {
    BtwParams params;
    if (name == "animatediff") {
      params.guidance.alpha = 0.6;
      params.beta0 = 1.5;
      params.tau = 7;
    } else if (name == "videocrafter2") {
      params.guidance.alpha = 0.1;
      params.beta0 = 10.0;
      params.tau = 7;
    } else {
      throw ParamError("unknown preset '" + std::string(name) +
                       "' (expected animatediff or videocrafter2)");
    }
    return params;
  }
};

/// Measurements taken while transforming one guided block.
struct BlockTrace {
  std::size_t block = 0;
  double e1 = 0.0;
  double e2 = 0.0;
  double e2_high = 0.0;
  double e2_low = 0.0;
  double beta_used = 0.0;
  double e3 = 0.0;
  double disparity_before = 0.0;
  double disparity_after = 0.0;
};

/// Checks the invariants a completed trace must satisfy: finite fields,
/// non-negative energies and disparities, and restored energy e3 >= e1 - tol
/// whenever the high band carries any energy to amplify.
inline void verify_trace(const BlockTrace& trace, double tol = 1e-6) {
  const double fields[] = {trace.e1,        trace.e2, trace.e2_high,
                           trace.e2_low,    trace.beta_used, trace.e3,
                           trace.disparity_before, trace.disparity_after};
  for (const double v : fields)
    if (!std::isfinite(v)) throw ContractError("trace contains a non-finite measurement");
  if (trace.e1 < 0.0 || trace.e2 < 0.0 || trace.e2_high < 0.0 || trace.e2_low < -tol ||
      trace.e3 < 0.0)
    throw ContractError("trace contains a negative energy");
  if (trace.disparity_before < 0.0 || trace.disparity_after < 0.0)
    throw ContractError("trace contains a negative disparity");
  if (trace.e2_high > 0.0 && trace.e3 < trace.e1 - tol)
    throw ContractError("restored energy " + std::to_string(trace.e3) +
                        " fell below pre-guidance energy " + std::to_string(trace.e1));
}

/// Transforms one guided block against its anchor: measures the pre-guidance
/// energy, pulls the block toward the upsampled anchor, then amplifies the
/// high temporal band just enough to give the energy back. Returns the new
/// block and the trace of every intermediate quantity; the trace has already
/// passed verify_trace.
inline std::pair<AttnMapBatch, BlockTrace> apply_block(const AttnMapBatch& guided,
                                                       const AttnMapBatch& anchor,
                                                       const BtwParams& params) {
  params.validate();
  if (guided.frames() != anchor.frames())
    throw ShapeError("guided and anchor blocks disagree on frame count");
  const BandMask mask(guided.frames(), params.tau);

  BlockTrace trace;
  trace.e1 = energy(guided);

  const AttnMapBatch anchor_up = upsample_spatial(anchor, guided.spatial().height,
                                                  guided.spatial().width,
                                                  params.guidance.upsample);
  trace.disparity_before = disparity(guided, anchor_up);

  const AttnMapBatch blended = blend(guided, anchor_up, params.guidance.alpha);
  trace.disparity_after = disparity(blended, anchor_up);

  const EnergyReport bands = band_energies(blended, mask);
  trace.e2 = bands.total;
  trace.e2_high = bands.high;
  trace.e2_low = bands.low;
  trace.beta_used = adaptive_beta(trace.e1, trace.e2_high, trace.e2_low, params.beta0);

  AttnMapBatch boosted = scale_high(blended, trace.beta_used, mask);
  trace.e3 = energy(boosted);
  verify_trace(trace);
  return {std::move(boosted), trace};
}

/// Whether the transform runs at `step` out of `total_steps`. The active
/// window is the first ceil(step_fraction * total_steps) steps; the small
/// epsilon keeps products like 0.2 * 50 from rounding the window up.
inline bool should_apply(std::size_t step, std::size_t total_steps, double step_fraction) {
  if (total_steps == 0) throw ParamError("total_steps must be >= 1");
  if (step >= total_steps)
    throw ParamError("step index " + std::to_string(step) + " out of range for " +
                     std::to_string(total_steps) + " steps");
  if (!(step_fraction >= 0.0 && step_fraction <= 1.0))
    throw ParamError("step_fraction must be in [0, 1], got " + std::to_string(step_fraction));
  const double raw = std::ceil(step_fraction * static_cast<double>(total_steps) - 1e-9);
  const auto active = static_cast<std::size_t>(raw < 0.0 ? 0.0 : raw);
  return step < active;
}

/// Runs one denoising step over all attention blocks. Outside the active
/// window the blocks pass through untouched with no traces; inside it every
/// guided block is transformed against the (unmodified) anchor block, in the
/// order listed in the guidance config.
inline std::pair<std::vector<AttnMapBatch>, std::vector<BlockTrace>> apply_step(
    std::vector<AttnMapBatch> blocks, const BtwParams& params, std::size_t step,
    std::size_t total_steps) {
  params.validate();
  if (params.guidance.anchor_block >= blocks.size())
    throw ShapeError("anchor block index " + std::to_string(params.guidance.anchor_block) +
                     " out of range for " + std::to_string(blocks.size()) + " blocks");
  for (const std::size_t m : params.guidance.guided_blocks)
    if (m >= blocks.size())
      throw ShapeError("guided block index " + std::to_string(m) + " out of range for " +
                       std::to_string(blocks.size()) + " blocks");

  std::vector<BlockTrace> traces;
  if (!should_apply(step, total_steps, params.step_fraction)) return {std::move(blocks), traces};

  const AttnMapBatch& anchor = blocks[params.guidance.anchor_block];
  for (const std::size_t m : params.guidance.guided_blocks) {
    auto [transformed, trace] = apply_block(blocks[m], anchor, params);
    trace.block = m;
    blocks[m] = std::move(transformed);
    traces.push_back(trace);
  }
  return {std::move(blocks), traces};
}

}  // namespace btw
