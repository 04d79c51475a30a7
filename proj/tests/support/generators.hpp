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

#include <atomic>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "btw/attention.hpp"

namespace gen {

/// Random row-stochastic batch: each row is exponential draws normalized to
/// sum 1, giving strictly positive entries with plenty of spread.
inline btw::AttnMapBatch random_stochastic(std::mt19937_64& rng, btw::SpatialDims spatial,
                                           std::size_t frames) {
  std::exponential_distribution<double> draw(1.0);
  std::vector<double> data(spatial.sites() * frames * frames);
  for (std::size_t r = 0; r < spatial.sites() * frames; ++r) {
    double sum = 0.0;
    for (std::size_t j = 0; j < frames; ++j) {
      const double v = draw(rng) + 1e-9;
      data[r * frames + j] = v;
      sum += v;
    }
    for (std::size_t j = 0; j < frames; ++j) data[r * frames + j] /= sum;
  }
  return btw::AttnMapBatch(std::move(data), spatial, frames, true);
}

/// Random unconstrained batch with entries uniform in [lo, hi].
inline btw::AttnMapBatch random_raw(std::mt19937_64& rng, btw::SpatialDims spatial,
                                    std::size_t frames, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> draw(lo, hi);
  std::vector<double> data(spatial.sites() * frames * frames);
  for (double& v : data) v = draw(rng);
  return btw::AttnMapBatch(std::move(data), spatial, frames, false);
}

/// Scratch directory removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::atomic<unsigned> counter{0};
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("btw_test_" + std::to_string(rd()) + "_" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path file(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

}  // namespace gen
