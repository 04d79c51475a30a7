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

// Command-line front end. Exit codes: 0 success, 2 usage or parameter
// error, 3 file-format error, 4 numeric-contract violation. All errors are
// emitted as single-line JSON on stderr.

#include <cstddef>
#include <cstdint>
#include <exception>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "btw/bytheway.hpp"

namespace {

using nlohmann::json;

std::vector<double> parse_double_list(const std::string& text, const std::string& flag) {
  std::vector<double> out;
  std::size_t pos = 0;
  try {
    while (pos < text.size()) {
      std::size_t used = 0;
      out.push_back(std::stod(text.substr(pos), &used));
      pos += used;
      if (pos < text.size()) {
        if (text[pos] != ',') throw btw::ParamError("");
        ++pos;
      }
    }
  } catch (const btw::ParamError&) {
    throw btw::ParamError(flag + " must be a comma-separated number list, got '" + text + "'");
  } catch (const std::exception&) {
    throw btw::ParamError(flag + " must be a comma-separated number list, got '" + text + "'");
  }
  if (out.empty())
    throw btw::ParamError(flag + " must contain at least one number");
  return out;
}

std::pair<std::size_t, std::size_t> parse_size(const std::string& text) {
  const std::size_t sep = text.find('x');
  try {
    if (sep == std::string::npos || sep == 0 || sep + 1 >= text.size())
      throw btw::ParamError("");
    std::size_t used_h = 0, used_w = 0;
    const std::string h_part = text.substr(0, sep);
    const std::string w_part = text.substr(sep + 1);
    const unsigned long long h = std::stoull(h_part, &used_h);
    const unsigned long long w = std::stoull(w_part, &used_w);
    if (used_h != h_part.size() || used_w != w_part.size()) throw btw::ParamError("");
    return {static_cast<std::size_t>(h), static_cast<std::size_t>(w)};
  } catch (const std::exception&) {
    throw btw::ParamError("--size must look like HxW, got '" + text + "'");
  }
}

json params_to_json(const btw::BtwParams& params) {
  return json{
      {"alpha", params.alpha()},
      {"beta0", params.beta0},
      {"tau", params.tau},
      {"step_fraction", params.step_fraction},
      {"anchor_block", params.guidance.anchor_block},
      {"guided_blocks", params.guidance.guided_blocks},
      {"upsample",
       params.guidance.upsample == btw::UpsampleMethod::bilinear ? "bilinear" : "nearest"}};
}

json trace_to_json(const btw::BlockTrace& trace) {
  return json{{"block", trace.block},
              {"e1", trace.e1},
              {"e2", trace.e2},
              {"e2_high", trace.e2_high},
              {"e2_low", trace.e2_low},
              {"beta_used", trace.beta_used},
              {"e3", trace.e3},
              {"disparity_before", trace.disparity_before},
              {"disparity_after", trace.disparity_after}};
}

json report_skeleton(const std::string& command) {
  return json{{"tool", "btw"}, {"version", BTW_VERSION}, {"command", command}};
}

void emit_report(const json& doc, const std::string& path) {
  std::cout << doc.dump() << "\n";
  if (path.empty()) return;
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw btw::FormatError("path", "cannot open " + path + " for writing");
  out << doc.dump() << "\n";
  out.flush();
  if (!out) throw btw::FormatError("path", "failed writing " + path);
}

int run(int argc, char** argv) {
  CLI::App app{"temporal attention transform tool"};
  app.require_subcommand(1);

  // transform
  auto* transform = app.add_subcommand("transform", "transform a guided block with an anchor");
  std::string guided_path, anchor_path, out_path, report_path, preset, upsample = "bilinear";
  double alpha = 0.0, beta0 = 0.0;
  std::size_t tau = 0;
  transform->add_option("--guided", guided_path, "guided attention tensor")->required();
  transform->add_option("--anchor", anchor_path, "anchor attention tensor")->required();
  transform->add_option("--out", out_path, "output tensor path")->required();
  auto* alpha_opt = transform->add_option("--alpha", alpha, "guidance ratio in [0, 1]");
  auto* beta0_opt = transform->add_option("--beta0", beta0, "minimum band gain");
  auto* tau_opt = transform->add_option("--tau", tau, "high-band radius");
  transform->add_option("--preset", preset, "parameter preset")
      ->check(CLI::IsMember({"animatediff", "videocrafter2"}));
  transform->add_option("--upsample", upsample, "anchor resampling method")
      ->check(CLI::IsMember({"bilinear", "nearest"}));
  transform->add_option("--report", report_path, "write a JSON report here");

  // energy
  auto* energy_cmd = app.add_subcommand("energy", "print map energy");
  std::string energy_in;
  energy_cmd->add_option("input", energy_in, "attention tensor")->required();
  std::size_t energy_tau = 0;
  auto* energy_tau_opt = energy_cmd->add_option("--tau", energy_tau, "also split by band");

  // disparity
  auto* disparity_cmd = app.add_subcommand("disparity", "print disparity between two maps");
  std::string disparity_a, disparity_b;
  disparity_cmd->add_option("a", disparity_a, "first attention tensor")->required();
  disparity_cmd->add_option("b", disparity_b, "second attention tensor")->required();

  // synth
  auto* synth = app.add_subcommand("synth", "render a synthetic moving video");
  std::string synth_pattern, synth_velocity = "0,0", synth_size = "64x64", synth_out;
  std::size_t synth_frames = 16;
  std::uint64_t synth_seed = 0;
  synth->add_option("--pattern", synth_pattern, "blob, grating, or checker")->required();
  synth->add_option("--velocity", synth_velocity, "pixels/frame as VX,VY");
  synth->add_option("--frames", synth_frames, "frame count (even)");
  synth->add_option("--size", synth_size, "frame size as HxW");
  synth->add_option("--out", synth_out, "output tensor path")->required();
  synth->add_option("--seed", synth_seed, "pattern seed");

  // sweep
  auto* sweep = app.add_subcommand("sweep", "correlate flow magnitude with map energy");
  std::string sweep_pattern = "grating", sweep_velocities, sweep_report, sweep_size = "64x64";
  std::size_t sweep_frames = 16;
  std::uint64_t sweep_seed = 0;
  sweep->add_option("--pattern", sweep_pattern, "blob, grating, or checker");
  sweep->add_option("--velocities", sweep_velocities, "comma-separated pixels/frame list")
      ->required();
  sweep->add_option("--report", sweep_report, "write a JSON report here")->required();
  sweep->add_option("--size", sweep_size, "frame size as HxW");
  sweep->add_option("--frames", sweep_frames, "frame count (even)");
  sweep->add_option("--seed", sweep_seed, "pattern seed");

  // ablate
  auto* ablate = app.add_subcommand("ablate", "rebuild a video through a band-filtered map");
  std::string ablate_mode, ablate_in, ablate_report;
  std::size_t ablate_tau = 0;
  ablate->add_option("--mode", ablate_mode, "which band to keep")
      ->check(CLI::IsMember({"lowpass", "highpass"}))
      ->required();
  ablate->add_option("--tau", ablate_tau, "high-band radius")->required();
  ablate->add_option("--in", ablate_in, "video tensor (F, H, W)")->required();
  ablate->add_option("--report", ablate_report, "write a JSON report here")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  }

  if (transform->parsed()) {
    btw::BtwParams params;
    if (!preset.empty()) params = btw::BtwParams::preset(preset);
    if (*alpha_opt) params.guidance.alpha = alpha;
    if (*beta0_opt) params.beta0 = beta0;
    if (*tau_opt) params.tau = tau;
    params.guidance.upsample =
        upsample == "nearest" ? btw::UpsampleMethod::nearest : btw::UpsampleMethod::bilinear;

    const btw::AttnMapBatch guided = btw::to_attention(btw::read_tensor(guided_path));
    const btw::AttnMapBatch anchor = btw::to_attention(btw::read_tensor(anchor_path));
    auto [out_map, trace] = btw::apply_block(guided, anchor, params);
    btw::write_tensor(out_path, btw::from_attention(out_map));

    json doc = report_skeleton("transform");
    doc["params"] = params_to_json(params);
    doc["trace"] = trace_to_json(trace);
    doc["out"] = out_path;
    emit_report(doc, report_path);
    return 0;
  }

  if (energy_cmd->parsed()) {
    const btw::AttnMapBatch map = btw::to_attention(btw::read_tensor(energy_in));
    json doc = report_skeleton("energy");
    if (*energy_tau_opt) {
      const btw::BandMask mask(map.frames(), energy_tau);
      const btw::EnergyReport report = btw::band_energies(map, mask);
      doc["tau"] = energy_tau;
      doc["total"] = report.total;
      doc["high"] = report.high;
      doc["low"] = report.low;
    } else {
      doc["total"] = btw::energy(map);
    }
    emit_report(doc, "");
    return 0;
  }

  if (disparity_cmd->parsed()) {
    const btw::AttnMapBatch a = btw::to_attention(btw::read_tensor(disparity_a));
    const btw::AttnMapBatch b = btw::to_attention(btw::read_tensor(disparity_b));
    json doc = report_skeleton("disparity");
    doc["disparity"] = btw::disparity(a, b);
    emit_report(doc, "");
    return 0;
  }

  if (synth->parsed()) {
    const std::vector<double> velocity = parse_double_list(synth_velocity, "--velocity");
    if (velocity.size() != 2)
      throw btw::ParamError("--velocity must be VX,VY, got '" + synth_velocity + "'");
    const auto [height, width] = parse_size(synth_size);
    const btw::SyntheticVideo video =
        btw::gen_video(btw::parse_pattern(synth_pattern), height, width, synth_frames,
                       velocity[0], velocity[1], synth_seed);
    btw::write_tensor(synth_out, btw::from_video(video.frames));

    json doc = report_skeleton("synth");
    doc["pattern"] = btw::pattern_name(video.pattern);
    doc["velocity"] = {video.vx, video.vy};
    doc["frames"] = video.frames.frames;
    doc["size"] = {video.frames.height, video.frames.width};
    doc["seed"] = video.seed;
    doc["temporal_variation"] = btw::temporal_variation(video.frames);
    doc["out"] = synth_out;
    emit_report(doc, "");
    return 0;
  }

  if (sweep->parsed()) {
    btw::SweepConfig config;
    config.pattern = btw::parse_pattern(sweep_pattern);
    std::tie(config.height, config.width) = parse_size(sweep_size);
    config.frames = sweep_frames;
    config.seed = sweep_seed;
    const std::vector<double> velocities = parse_double_list(sweep_velocities, "--velocities");
    const btw::SweepResult result = btw::energy_motion_sweep(velocities, config);

    json doc = report_skeleton("sweep");
    doc["params"] = {{"pattern", btw::pattern_name(config.pattern)},
                     {"size", {config.height, config.width}},
                     {"frames", config.frames},
                     {"seed", config.seed},
                     {"patch_radius", config.patch_radius},
                     {"temperature", config.temperature},
                     {"block_size", config.block_size},
                     {"search_radius", config.search_radius}};
    doc["points"] = json::array();
    for (const btw::SweepPoint& p : result.points)
      doc["points"].push_back(
          {{"velocity", p.velocity}, {"flow", p.flow}, {"energy", p.energy}});
    doc["spearman"] = result.spearman;
    emit_report(doc, sweep_report);
    return 0;
  }

  if (ablate->parsed()) {
    const btw::FrameStack video = btw::to_video(btw::read_tensor(ablate_in));
    const btw::AttnMapBatch map = btw::toy_temporal_attention(video);
    const btw::BandMask mask(video.frames, ablate_tau);
    const btw::AttnMapBatch filtered = ablate_mode == "lowpass"
                                           ? btw::scale_high(map, 0.0, mask)
                                           : btw::high_band_component(map, mask);
    const btw::FrameStack recon_full = btw::reconstruct(map, video);
    const btw::FrameStack recon_filtered = btw::reconstruct(filtered, video);
    const double base = btw::temporal_variation(recon_full);
    const double filtered_var = btw::temporal_variation(recon_filtered);

    json doc = report_skeleton("ablate");
    doc["mode"] = ablate_mode;
    doc["tau"] = ablate_tau;
    doc["input_variation"] = btw::temporal_variation(video);
    doc["reconstructed_variation"] = base;
    doc["filtered_variation"] = filtered_var;
    if (base > 0.0)
      doc["variation_ratio"] = filtered_var / base;
    else
      doc["variation_ratio"] = nullptr;
    emit_report(doc, ablate_report);
    return 0;
  }

  return 0;
}

void print_error(const std::string& kind, const std::string& message,
                 const std::string& field = "") {
  json doc{{"error", kind}, {"message", message}};
  if (!field.empty()) doc["field"] = field;
  std::cerr << doc.dump() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const CLI::ParseError& e) {
    print_error("usage", e.what());
    return 2;
  } catch (const btw::ParamError& e) {
    print_error("param", e.what());
    return 2;
  } catch (const btw::ShapeError& e) {
    print_error("shape", e.what());
    return 2;
  } catch (const btw::FormatError& e) {
    print_error("format", e.what(), e.field());
    return 3;
  } catch (const btw::SymmetryError& e) {
    print_error("symmetry", e.what());
    return 4;
  } catch (const btw::ContractError& e) {
    print_error("contract", e.what());
    return 4;
  } catch (const std::exception& e) {
    print_error("internal", e.what());
    return 1;
  }
}
