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

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include <catch2/catch_amalgamated.hpp>

#include "btw/tensor_io.hpp"
#include "support/generators.hpp"

using Catch::Matchers::WithinAbs;

namespace {

void write_bytes(const std::filesystem::path& path, const std::vector<unsigned char>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
}

std::vector<unsigned char> read_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// Replaces the first occurrence of `from` in the file with `to`; the two must
// have equal length so offsets stay valid.
void patch_bytes(const std::filesystem::path& path, const std::string& from,
                 const std::string& to) {
  REQUIRE(from.size() == to.size());
  std::vector<unsigned char> bytes = read_bytes(path);
  const auto it = std::search(bytes.begin(), bytes.end(), from.begin(), from.end());
  REQUIRE(it != bytes.end());
  std::copy(to.begin(), to.end(), it);
  write_bytes(path, bytes);
}

template <typename Fn>
std::string thrown_field(Fn&& fn) {
  try {
    fn();
  } catch (const btw::FormatError& e) {
    return e.field();
  }
  return "<no FormatError>";
}

}  // namespace

TEST_CASE("native containers round trip doubles bit for bit", "[io]") {
  gen::TempDir dir;
  std::mt19937_64 rng(101);
  const auto map = gen::random_stochastic(rng, btw::SpatialDims{2, 2, 3}, 8);
  const btw::TensorFile tensor = btw::from_attention(map);
  const auto path = dir.path() / "map.btwt";
  btw::write_tensor(path, tensor);

  const btw::TensorFile loaded = btw::read_tensor(path);
  CHECK(loaded.values == tensor.values);
  CHECK(loaded.dims == std::vector<std::size_t>{12, 8, 8});
  CHECK(loaded.dtype == btw::DType::f64);
  REQUIRE(loaded.spatial.has_value());
  CHECK(loaded.spatial->batch == 2);
  CHECK(loaded.spatial->height == 2);
  CHECK(loaded.spatial->width == 3);
  REQUIRE(loaded.stochastic.has_value());
  CHECK(*loaded.stochastic);

  const btw::AttnMapBatch back = btw::to_attention(loaded);
  CHECK(back.same_shape(map));
  CHECK(std::equal(back.values().begin(), back.values().end(), map.values().begin()));
  CHECK(back.stochastic());
}

TEST_CASE("single-precision containers round trip within float accuracy", "[io]") {
  gen::TempDir dir;
  std::mt19937_64 rng(102);
  const auto map = gen::random_stochastic(rng, btw::SpatialDims{1, 2, 2}, 4);
  btw::TensorFile tensor = btw::from_attention(map, btw::DType::f32);
  const auto path = dir.path() / "map32.btwt";
  btw::write_tensor(path, tensor);

  const btw::TensorFile loaded = btw::read_tensor(path);
  CHECK(loaded.dtype == btw::DType::f32);
  REQUIRE(loaded.values.size() == tensor.values.size());
  for (std::size_t n = 0; n < loaded.values.size(); ++n) {
    CHECK(loaded.values[n] == static_cast<double>(static_cast<float>(tensor.values[n])));
  }
}

TEST_CASE("interchange files round trip through both precisions", "[io]") {
  gen::TempDir dir;
  std::mt19937_64 rng(103);
  const auto map = gen::random_stochastic(rng, btw::SpatialDims{1, 2, 2}, 4);
  const btw::TensorFile tensor = btw::from_attention(map);

  const auto f64_path = dir.path() / "map.npy";
  btw::write_tensor(f64_path, tensor);
  const btw::TensorFile f64_loaded = btw::read_tensor(f64_path);
  CHECK(f64_loaded.values == tensor.values);
  CHECK(f64_loaded.dims == tensor.dims);
  CHECK(f64_loaded.dtype == btw::DType::f64);
  CHECK_FALSE(f64_loaded.spatial.has_value());
  CHECK_FALSE(f64_loaded.stochastic.has_value());

  btw::TensorFile narrow = tensor;
  narrow.dtype = btw::DType::f32;
  const auto f32_path = dir.path() / "map32.npy";
  btw::write_tensor(f32_path, narrow);
  const btw::TensorFile f32_loaded = btw::read_tensor(f32_path);
  CHECK(f32_loaded.dtype == btw::DType::f32);
  for (std::size_t n = 0; n < f32_loaded.values.size(); ++n)
    CHECK(f32_loaded.values[n] == static_cast<double>(static_cast<float>(tensor.values[n])));
}

TEST_CASE("the same payload reads identically from either container", "[io]") {
  gen::TempDir dir;
  std::mt19937_64 rng(104);
  const auto map = gen::random_stochastic(rng, btw::SpatialDims{1, 3, 3}, 8);
  btw::TensorFile tensor = btw::from_attention(map);
  tensor.spatial.reset();
  tensor.stochastic.reset();

  const auto native = dir.path() / "a.btwt";
  const auto interchange = dir.path() / "a.npy";
  btw::write_tensor(native, tensor);
  btw::write_tensor(interchange, tensor);
  const btw::TensorFile from_native = btw::read_tensor(native);
  const btw::TensorFile from_npy = btw::read_tensor(interchange);
  CHECK(from_native.values == from_npy.values);
  CHECK(from_native.dims == from_npy.dims);
}

TEST_CASE("writing is deterministic at the byte level", "[io]") {
  gen::TempDir dir;
  std::mt19937_64 rng(105);
  const auto map = gen::random_stochastic(rng, btw::SpatialDims{1, 2, 2}, 8);
  const btw::TensorFile tensor = btw::from_attention(map);
  const auto first = dir.path() / "first.btwt";
  const auto second = dir.path() / "second.btwt";
  btw::write_tensor(first, tensor);
  btw::write_tensor(second, tensor);
  CHECK(read_bytes(first) == read_bytes(second));

  const auto npy_first = dir.path() / "first.npy";
  const auto npy_second = dir.path() / "second.npy";
  btw::write_tensor(npy_first, tensor);
  btw::write_tensor(npy_second, tensor);
  CHECK(read_bytes(npy_first) == read_bytes(npy_second));
}

TEST_CASE("interchange headers are 64-byte aligned", "[io]") {
  gen::TempDir dir;
  btw::TensorFile tensor;
  tensor.values = {1.0, 2.0, 3.0};
  tensor.dims = {3};
  const auto path = dir.path() / "vec.npy";
  btw::write_tensor(path, tensor);
  const std::vector<unsigned char> bytes = read_bytes(path);
  REQUIRE(bytes.size() > 10);
  const std::size_t header_len = bytes[8] | bytes[9] << 8;
  CHECK((10 + header_len) % 64 == 0);
  CHECK(bytes[10 + header_len - 1] == '\n');
}

TEST_CASE("unreadable or unrecognized files name the offending field", "[io]") {
  gen::TempDir dir;
  CHECK(thrown_field([&] { btw::read_tensor(dir.path() / "absent.btwt"); }) == "path");

  const auto garbage = dir.path() / "garbage.bin";
  write_bytes(garbage, {'n', 'o', 'p', 'e', 0, 0});
  CHECK(thrown_field([&] { btw::read_tensor(garbage); }) == "magic");

  const auto empty = dir.path() / "empty.bin";
  write_bytes(empty, {});
  CHECK(thrown_field([&] { btw::read_tensor(empty); }) == "magic");
}

TEST_CASE("corrupt native containers name the offending field", "[io]") {
  gen::TempDir dir;
  const auto path = dir.path() / "bad.btwt";

  write_bytes(path, {'B', 'T', 'W', 'T'});
  CHECK(thrown_field([&] { btw::read_tensor(path); }) == "version");

  write_bytes(path, {'B', 'T', 'W', 'T', 2, 0});
  CHECK(thrown_field([&] { btw::read_tensor(path); }) == "version");

  write_bytes(path, {'B', 'T', 'W', 'T', 1, 0, 9});
  CHECK(thrown_field([&] { btw::read_tensor(path); }) == "dtype");

  write_bytes(path, {'B', 'T', 'W', 'T', 1, 0, 2, 0});
  CHECK(thrown_field([&] { btw::read_tensor(path); }) == "ndim");

  // One dim of 4 doubles announced, only 2 doubles present.
  std::vector<unsigned char> truncated = {'B', 'T', 'W', 'T', 1, 0, 2, 1};
  btw::detail::append_u64(truncated, 4);
  btw::detail::append_payload(truncated, {1.0, 2.0}, btw::DType::f64);
  write_bytes(path, truncated);
  CHECK(thrown_field([&] { btw::read_tensor(path); }) == "payload");

  // Announced dims cut off mid-list.
  std::vector<unsigned char> short_dims = {'B', 'T', 'W', 'T', 1, 0, 2, 2};
  btw::detail::append_u64(short_dims, 4);
  write_bytes(path, short_dims);
  CHECK(thrown_field([&] { btw::read_tensor(path); }) == "dims");
}

TEST_CASE("corrupt native metadata names the offending field", "[io]") {
  gen::TempDir dir;
  const auto path = dir.path() / "meta.btwt";

  std::vector<unsigned char> base = {'B', 'T', 'W', 'T', 1, 0, 2, 1};
  btw::detail::append_u64(base, 2);
  btw::detail::append_payload(base, {0.5, 0.5}, btw::DType::f64);

  // Metadata length points past the end of the file.
  std::vector<unsigned char> bytes = base;
  btw::detail::append_u32(bytes, 10);
  bytes.push_back('{');
  write_bytes(path, bytes);
  CHECK(thrown_field([&] { btw::read_tensor(path); }) == "metadata");

  // Metadata block followed by stray bytes.
  bytes = base;
  btw::detail::append_u32(bytes, 2);
  bytes.push_back('{');
  bytes.push_back('}');
  bytes.push_back('!');
  write_bytes(path, bytes);
  CHECK(thrown_field([&] { btw::read_tensor(path); }) == "metadata");

  // Metadata bytes that are not JSON.
  bytes = base;
  btw::detail::append_u32(bytes, 3);
  bytes.insert(bytes.end(), {'a', 'b', 'c'});
  write_bytes(path, bytes);
  CHECK(thrown_field([&] { btw::read_tensor(path); }) == "metadata");

  const auto append_json = [&](const std::string& json) {
    bytes = base;
    btw::detail::append_u32(bytes, static_cast<std::uint32_t>(json.size()));
    bytes.insert(bytes.end(), json.begin(), json.end());
    write_bytes(path, bytes);
  };

  append_json(R"({"spatial_dims": [1, 2]})");
  CHECK(thrown_field([&] { btw::read_tensor(path); }) == "spatial_dims");

  append_json(R"({"spatial_dims": [1, -2, 2]})");
  CHECK(thrown_field([&] { btw::read_tensor(path); }) == "spatial_dims");

  append_json(R"({"stochastic": "yes"})");
  CHECK(thrown_field([&] { btw::read_tensor(path); }) == "stochastic");

  // Well-formed metadata still parses.
  append_json(R"({"spatial_dims": [1, 1, 2], "stochastic": true})");
  const btw::TensorFile loaded = btw::read_tensor(path);
  REQUIRE(loaded.spatial.has_value());
  CHECK(loaded.spatial->width == 2);
  REQUIRE(loaded.stochastic.has_value());
  CHECK(*loaded.stochastic);
}

TEST_CASE("corrupt interchange files name the offending field", "[io]") {
  gen::TempDir dir;
  btw::TensorFile tensor;
  tensor.values = {1.0, 2.0, 3.0, 4.0};
  tensor.dims = {2, 2};
  const auto path = dir.path() / "bad.npy";

  btw::write_tensor(path, tensor);
  std::vector<unsigned char> bytes = read_bytes(path);
  bytes[6] = 2;  // major version
  write_bytes(path, bytes);
  CHECK(thrown_field([&] { btw::read_tensor(path); }) == "version");

  btw::write_tensor(path, tensor);
  patch_bytes(path, "<f8", "<i8");
  CHECK(thrown_field([&] { btw::read_tensor(path); }) == "descr");

  btw::write_tensor(path, tensor);
  patch_bytes(path, "False", "True ");
  CHECK(thrown_field([&] { btw::read_tensor(path); }) == "fortran_order");

  btw::write_tensor(path, tensor);
  bytes = read_bytes(path);
  bytes.push_back(0);
  write_bytes(path, bytes);
  CHECK(thrown_field([&] { btw::read_tensor(path); }) == "payload");

  btw::write_tensor(path, tensor);
  bytes = read_bytes(path);
  bytes.pop_back();
  write_bytes(path, bytes);
  CHECK(thrown_field([&] { btw::read_tensor(path); }) == "payload");

  write_bytes(path, {0x93, 'N', 'U', 'M', 'P', 'Y', 1, 0});
  CHECK(thrown_field([&] { btw::read_tensor(path); }) == "header");
}

TEST_CASE("interchange headers missing required keys are rejected", "[io]") {
  gen::TempDir dir;
  const auto path = dir.path() / "odd.npy";
  const auto write_npy_with_header = [&](std::string header) {
    const std::size_t unpadded = 10 + header.size() + 1;
    header.append((64 - unpadded % 64) % 64, ' ');
    header.push_back('\n');
    std::vector<unsigned char> bytes = {0x93, 'N', 'U', 'M', 'P', 'Y', 1, 0};
    btw::detail::append_u16(bytes, static_cast<std::uint16_t>(header.size()));
    bytes.insert(bytes.end(), header.begin(), header.end());
    write_bytes(path, bytes);
  };

  write_npy_with_header("{'fortran_order': False, 'shape': (2, ), }");
  CHECK(thrown_field([&] { btw::read_tensor(path); }) == "descr");

  write_npy_with_header("{'descr': '<f8', 'fortran_order': False, 'shape': (), }");
  CHECK(thrown_field([&] { btw::read_tensor(path); }) == "shape");

  write_npy_with_header("{'descr': '<f8', 'fortran_order': False, 'shape': (x, ), }");
  CHECK(thrown_field([&] { btw::read_tensor(path); }) == "shape");
}

TEST_CASE("writers validate dims and payload before touching disk", "[io]") {
  gen::TempDir dir;
  btw::TensorFile tensor;
  tensor.values = {1.0, 2.0};
  const auto path = dir.path() / "out.btwt";

  CHECK(thrown_field([&] { btw::write_tensor(path, tensor); }) == "ndim");

  tensor.dims = {3};
  CHECK(thrown_field([&] { btw::write_tensor(path, tensor); }) == "dims");

  tensor.dims = {2};
  tensor.values[1] = std::nan("");
  CHECK(thrown_field([&] { btw::write_tensor(path, tensor); }) == "payload");
  CHECK_FALSE(std::filesystem::exists(path));
}

TEST_CASE("attention conversion infers a grid when metadata is absent", "[io]") {
  btw::TensorFile square;
  square.values.assign(4 * 2 * 2, 0.25);
  for (std::size_t n = 0; n < square.values.size(); n += 2) {
    square.values[n] = 0.5;
    square.values[n + 1] = 0.5;
  }
  square.dims = {4, 2, 2};
  const btw::AttnMapBatch from_square = btw::to_attention(square);
  CHECK(from_square.spatial().height == 2);
  CHECK(from_square.spatial().width == 2);
  CHECK(from_square.stochastic());

  btw::TensorFile ragged;
  ragged.values.assign(3 * 2 * 2, 0.5);
  ragged.dims = {3, 2, 2};
  const btw::AttnMapBatch from_ragged = btw::to_attention(ragged);
  CHECK(from_ragged.spatial().height == 1);
  CHECK(from_ragged.spatial().width == 3);
  CHECK(from_ragged.stochastic());
}

TEST_CASE("attention conversion trusts an explicit stochastic flag", "[io]") {
  btw::TensorFile tensor;
  tensor.values.assign(2 * 2 * 2, 9.0);  // not row-stochastic
  tensor.dims = {2, 2, 2};
  tensor.stochastic = false;
  const btw::AttnMapBatch batch = btw::to_attention(tensor);
  CHECK_FALSE(batch.stochastic());
}

TEST_CASE("attention conversion rejects malformed dims and metadata", "[io]") {
  btw::TensorFile tensor;
  tensor.values.assign(4 * 2 * 3, 0.1);
  tensor.dims = {4, 2, 3};
  CHECK(thrown_field([&] { btw::to_attention(tensor); }) == "dims");

  tensor.values.assign(4, 1.0);
  tensor.dims = {4, 1, 1};
  CHECK(thrown_field([&] { btw::to_attention(tensor); }) == "dims");

  tensor.values.assign(8, 0.5);
  tensor.dims = {8};
  CHECK(thrown_field([&] { btw::to_attention(tensor); }) == "dims");

  tensor.values.assign(4 * 2 * 2, 0.5);
  tensor.dims = {4, 2, 2};
  tensor.spatial = btw::SpatialDims{1, 3, 3};
  CHECK(thrown_field([&] { btw::to_attention(tensor); }) == "spatial_dims");
}

TEST_CASE("video conversion checks for a frame axis", "[io]") {
  btw::TensorFile tensor;
  tensor.values.assign(2 * 16 * 16, 0.5);
  tensor.dims = {2, 16, 16};
  const btw::FrameStack video = btw::to_video(tensor);
  CHECK(video.frames == 2);
  CHECK(video.height == 16);
  CHECK(video.width == 16);

  const btw::TensorFile back = btw::from_video(video);
  CHECK(back.dims == tensor.dims);
  CHECK(back.values == tensor.values);

  tensor.dims = {16, 16};
  tensor.values.assign(16 * 16, 0.5);
  CHECK(thrown_field([&] { btw::to_video(tensor); }) == "dims");

  tensor.dims = {1, 16, 16};
  tensor.values.assign(16 * 16, 0.5);
  CHECK(thrown_field([&] { btw::to_video(tensor); }) == "dims");
}
