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

// Binary tensor interchange. Two on-disk forms are supported:
//   BTWT  "BTWT" magic, u16 version (1), u8 dtype (1 = f32, 2 = f64),
//         u8 ndim, ndim x u64 dims, row-major payload, then optionally
//         u32 metadata length + UTF-8 JSON carrying spatial_dims and the
//         stochastic flag. All integers and floats little-endian.
//   NPY   version 1.0 subset: '<f4' / '<f8', C order, little-endian.
// Values are widened to f64 in memory regardless of the stored dtype.

#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "btw/attention.hpp"
#include "btw/errors.hpp"
#include "btw/synthetic.hpp"

namespace btw {

enum class DType : std::uint8_t { f32 = 1, f64 = 2 };

inline std::size_t dtype_size(DType dtype) { return dtype == DType::f32 ? 4 : 8; }

/// A loaded or to-be-written tensor: values (widened to f64), dims, the
/// on-disk element type, and optional attention metadata.
struct TensorFile {
  std::vector<double> values;
  std::vector<std::size_t> dims;
  DType dtype = DType::f64;
  std::optional<SpatialDims> spatial;
  std::optional<bool> stochastic;

  std::size_t element_count() const {
    std::size_t n = 1;
    for (const std::size_t d : dims) n *= d;
    return dims.empty() ? 0 : n;
  }
};

namespace detail {

struct ByteReader {
  const unsigned char* data;
  std::size_t size;
  std::size_t pos = 0;

  std::size_t remaining() const { return size - pos; }

  void need(std::size_t n, const char* field) {
    if (remaining() < n)
      throw FormatError(field, std::string("truncated file while reading ") + field);
  }
  std::uint8_t u8(const char* field) {
    need(1, field);
    return data[pos++];
  }
  std::uint16_t u16(const char* field) {
    need(2, field);
    const std::uint16_t v = static_cast<std::uint16_t>(data[pos]) |
                            static_cast<std::uint16_t>(data[pos + 1]) << 8;
    pos += 2;
    return v;
  }
  std::uint32_t u32(const char* field) {
    need(4, field);
    std::uint32_t v = 0;
    for (int i = 3; i >= 0; --i) v = v << 8 | data[pos + static_cast<std::size_t>(i)];
    pos += 4;
    return v;
  }
  std::uint64_t u64(const char* field) {
    need(8, field);
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = v << 8 | data[pos + static_cast<std::size_t>(i)];
    pos += 8;
    return v;
  }
};

inline void append_u16(std::vector<unsigned char>& out, std::uint16_t v) {
  out.push_back(static_cast<unsigned char>(v & 0xff));
  out.push_back(static_cast<unsigned char>(v >> 8));
}

inline void append_u32(std::vector<unsigned char>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<unsigned char>(v >> 8 * i & 0xff));
}

inline void append_u64(std::vector<unsigned char>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<unsigned char>(v >> 8 * i & 0xff));
}

inline void append_payload(std::vector<unsigned char>& out, const std::vector<double>& values,
                           DType dtype) {
  if (dtype == DType::f64) {
    const std::size_t at = out.size();
    out.resize(at + values.size() * 8);
    std::memcpy(out.data() + at, values.data(), values.size() * 8);
  } else {
    std::vector<float> narrow(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) narrow[i] = static_cast<float>(values[i]);
    const std::size_t at = out.size();
    out.resize(at + narrow.size() * 4);
    std::memcpy(out.data() + at, narrow.data(), narrow.size() * 4);
  }
}

inline std::vector<double> parse_payload(ByteReader& reader, std::size_t count, DType dtype) {
  const std::size_t bytes = count * dtype_size(dtype);
  reader.need(bytes, "payload");
  std::vector<double> values(count);
  if (dtype == DType::f64) {
    std::memcpy(values.data(), reader.data + reader.pos, bytes);
  } else {
    std::vector<float> narrow(count);
    std::memcpy(narrow.data(), reader.data + reader.pos, bytes);
    for (std::size_t i = 0; i < count; ++i) values[i] = narrow[i];
  }
  reader.pos += bytes;
  return values;
}

inline TensorFile read_btwt(ByteReader reader) {
  reader.pos = 4;  // past magic
  const std::uint16_t version = reader.u16("version");
  if (version != 1)
    throw FormatError("version", "unsupported container version " + std::to_string(version));
  const std::uint8_t dtype_code = reader.u8("dtype");
  if (dtype_code != 1 && dtype_code != 2)
    throw FormatError("dtype", "unsupported dtype code " + std::to_string(dtype_code));
  const std::uint8_t ndim = reader.u8("ndim");
  if (ndim == 0) throw FormatError("ndim", "ndim must be >= 1");

  TensorFile tensor;
  tensor.dtype = static_cast<DType>(dtype_code);
  tensor.dims.resize(ndim);
  for (std::size_t i = 0; i < ndim; ++i)
    tensor.dims[i] = static_cast<std::size_t>(reader.u64("dims"));
  tensor.values = parse_payload(reader, tensor.element_count(), tensor.dtype);

  if (reader.remaining() == 0) return tensor;
  const std::uint32_t meta_len = reader.u32("metadata");
  reader.need(meta_len, "metadata");
  const auto* begin = reinterpret_cast<const char*>(reader.data + reader.pos);
  reader.pos += meta_len;
  if (reader.remaining() != 0)
    throw FormatError("metadata", "unexpected bytes after metadata block");

  nlohmann::json meta = nlohmann::json::parse(begin, begin + meta_len, nullptr, false);
  if (meta.is_discarded()) throw FormatError("metadata", "metadata is not valid JSON");
  if (meta.contains("spatial_dims")) {
    const auto& sd = meta["spatial_dims"];
    if (!sd.is_array() || sd.size() != 3 || !sd[0].is_number_unsigned() ||
        !sd[1].is_number_unsigned() || !sd[2].is_number_unsigned())
      throw FormatError("spatial_dims", "spatial_dims must be [B, H, W] non-negative integers");
    tensor.spatial = SpatialDims{sd[0].get<std::size_t>(), sd[1].get<std::size_t>(),
                                 sd[2].get<std::size_t>()};
  }
  if (meta.contains("stochastic")) {
    if (!meta["stochastic"].is_boolean())
      throw FormatError("stochastic", "stochastic must be a boolean");
    tensor.stochastic = meta["stochastic"].get<bool>();
  }
  return tensor;
}

// Pulls the value following "'key':" out of an NPY header dict literal.
inline std::string npy_header_value(const std::string& header, const std::string& key) {
  const std::string quoted = "'" + key + "'";
  const std::size_t at = header.find(quoted);
  if (at == std::string::npos) throw FormatError(key, "NPY header missing field " + key);
  std::size_t pos = header.find(':', at + quoted.size());
  if (pos == std::string::npos) throw FormatError(key, "malformed NPY header near " + key);
  ++pos;
  while (pos < header.size() && header[pos] == ' ') ++pos;
  std::size_t end = pos;
  if (pos < header.size() && header[pos] == '\'') {
    end = header.find('\'', pos + 1);
    if (end == std::string::npos) throw FormatError(key, "unterminated string in NPY header");
    return header.substr(pos + 1, end - pos - 1);
  }
  if (pos < header.size() && header[pos] == '(') {
    end = header.find(')', pos);
    if (end == std::string::npos) throw FormatError(key, "unterminated tuple in NPY header");
    return header.substr(pos, end - pos + 1);
  }
  while (end < header.size() && header[end] != ',' && header[end] != '}') ++end;
  return header.substr(pos, end - pos);
}

inline TensorFile read_npy(ByteReader reader) {
  reader.pos = 6;  // past magic
  const std::uint8_t major = reader.u8("version");
  const std::uint8_t minor = reader.u8("version");
  if (major != 1 || minor != 0)
    throw FormatError("version", "unsupported NPY version " + std::to_string(major) + "." +
                                     std::to_string(minor));
  const std::uint16_t header_len = reader.u16("header");
  reader.need(header_len, "header");
  const std::string header(reinterpret_cast<const char*>(reader.data + reader.pos), header_len);
  reader.pos += header_len;

  const std::string descr = npy_header_value(header, "descr");
  TensorFile tensor;
  if (descr == "<f4")
    tensor.dtype = DType::f32;
  else if (descr == "<f8")
    tensor.dtype = DType::f64;
  else
    throw FormatError("descr", "unsupported descr '" + descr + "' (need <f4 or <f8)");

  const std::string order = npy_header_value(header, "fortran_order");
  if (order == "True")
    throw FormatError("fortran_order", "Fortran-order payloads are not supported");
  if (order != "False") throw FormatError("fortran_order", "malformed fortran_order value");

  std::string shape = npy_header_value(header, "shape");
  if (shape.size() < 2 || shape.front() != '(' || shape.back() != ')')
    throw FormatError("shape", "malformed shape tuple");
  shape = shape.substr(1, shape.size() - 2);
  std::size_t pos = 0;
  while (pos < shape.size()) {
    while (pos < shape.size() && (shape[pos] == ' ' || shape[pos] == ',')) ++pos;
    if (pos >= shape.size()) break;
    std::size_t digits = 0;
    while (pos + digits < shape.size() && shape[pos + digits] >= '0' &&
           shape[pos + digits] <= '9')
      ++digits;
    if (digits == 0) throw FormatError("shape", "malformed shape tuple");
    tensor.dims.push_back(std::stoull(shape.substr(pos, digits)));
    pos += digits;
  }
  if (tensor.dims.empty()) throw FormatError("shape", "zero-dimensional tensors not supported");

  tensor.values = parse_payload(reader, tensor.element_count(), tensor.dtype);
  if (reader.remaining() != 0) throw FormatError("payload", "unexpected bytes after payload");
  return tensor;
}

}  // namespace detail

/// Reads a BTWT or NPY tensor, sniffing the format from the magic bytes.
inline TensorFile read_tensor(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("path", "cannot open " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  if (in.bad()) throw FormatError("path", "failed reading " + path.string());

  detail::ByteReader reader{bytes.data(), bytes.size()};
  static constexpr unsigned char npy_magic[6] = {0x93, 'N', 'U', 'M', 'P', 'Y'};
  if (bytes.size() >= 4 && std::memcmp(bytes.data(), "BTWT", 4) == 0)
    return detail::read_btwt(reader);
  if (bytes.size() >= 6 && std::memcmp(bytes.data(), npy_magic, 6) == 0)
    return detail::read_npy(reader);
  throw FormatError("magic", "unrecognized magic bytes in " + path.string());
}

/// Writes a tensor; the format follows the extension (".npy" selects NPY,
/// anything else BTWT). Output bytes are a pure function of the input.
inline void write_tensor(const std::filesystem::path& path, const TensorFile& tensor) {
  if (tensor.dims.empty()) throw FormatError("ndim", "ndim must be >= 1");
  if (tensor.element_count() != tensor.values.size())
    throw FormatError("dims", "dims describe " + std::to_string(tensor.element_count()) +
                                  " elements but payload has " +
                                  std::to_string(tensor.values.size()));
  for (const double v : tensor.values)
    if (!std::isfinite(v)) throw FormatError("payload", "payload contains non-finite values");

  std::vector<unsigned char> bytes;
  if (path.extension() == ".npy") {
    std::string shape = "(";
    for (const std::size_t d : tensor.dims) shape += std::to_string(d) + ", ";
    shape.pop_back();
    if (tensor.dims.size() > 1) shape.pop_back();
    shape += ")";
    std::string header = std::string("{'descr': '") +
                         (tensor.dtype == DType::f32 ? "<f4" : "<f8") +
                         "', 'fortran_order': False, 'shape': " + shape + ", }";
    const std::size_t unpadded = 10 + header.size() + 1;
    header.append((64 - unpadded % 64) % 64, ' ');
    header.push_back('\n');

    bytes = {0x93, 'N', 'U', 'M', 'P', 'Y', 1, 0};
    detail::append_u16(bytes, static_cast<std::uint16_t>(header.size()));
    bytes.insert(bytes.end(), header.begin(), header.end());
    detail::append_payload(bytes, tensor.values, tensor.dtype);
  } else {
    bytes = {'B', 'T', 'W', 'T'};
    detail::append_u16(bytes, 1);
    bytes.push_back(static_cast<unsigned char>(tensor.dtype));
    bytes.push_back(static_cast<unsigned char>(tensor.dims.size()));
    for (const std::size_t d : tensor.dims) detail::append_u64(bytes, d);
    detail::append_payload(bytes, tensor.values, tensor.dtype);
    if (tensor.spatial || tensor.stochastic) {
      nlohmann::json meta;
      if (tensor.spatial)
        meta["spatial_dims"] = {tensor.spatial->batch, tensor.spatial->height,
                                tensor.spatial->width};
      if (tensor.stochastic) meta["stochastic"] = *tensor.stochastic;
      const std::string dumped = meta.dump();
      detail::append_u32(bytes, static_cast<std::uint32_t>(dumped.size()));
      bytes.insert(bytes.end(), dumped.begin(), dumped.end());
    }
  }

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("path", "cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  out.flush();
  if (!out) throw FormatError("path", "failed writing " + path.string());
}

/// Interprets a loaded tensor as an attention batch. Dims must be (S, F, F);
/// sites come from the spatial metadata when present, otherwise (1, s, s)
/// for square S or (1, 1, S). Without a stored stochastic flag the batch is
/// validated to stamp one.
inline AttnMapBatch to_attention(const TensorFile& tensor) {
  if (tensor.dims.size() != 3 || tensor.dims[1] != tensor.dims[2] || tensor.dims[1] < 2)
    throw FormatError("dims", "attention tensors need dims (S, F, F) with F >= 2");
  const std::size_t sites = tensor.dims[0];
  SpatialDims spatial{1, 1, sites};
  if (tensor.spatial) {
    spatial = *tensor.spatial;
    if (spatial.sites() != sites)
      throw FormatError("spatial_dims", "spatial_dims describe " +
                                            std::to_string(spatial.sites()) + " sites, dims " +
                                            std::to_string(sites));
  } else {
    const auto side = static_cast<std::size_t>(std::llround(std::sqrt(
        static_cast<double>(sites))));
    if (side * side == sites && side > 0) spatial = SpatialDims{1, side, side};
  }
  AttnMapBatch batch(tensor.values, spatial, tensor.dims[1],
                     tensor.stochastic.value_or(false));
  if (!tensor.stochastic) validate(batch);
  return batch;
}

inline TensorFile from_attention(const AttnMapBatch& batch, DType dtype = DType::f64) {
  TensorFile tensor;
  tensor.values.assign(batch.values().begin(), batch.values().end());
  tensor.dims = {batch.sites(), batch.frames(), batch.frames()};
  tensor.dtype = dtype;
  tensor.spatial = batch.spatial();
  tensor.stochastic = batch.stochastic();
  return tensor;
}

/// Interprets a loaded tensor as a grayscale video with dims (F, H, W).
inline FrameStack to_video(const TensorFile& tensor) {
  if (tensor.dims.size() != 3) throw FormatError("dims", "video tensors need dims (F, H, W)");
  if (tensor.dims[0] < 2) throw FormatError("dims", "video tensors need at least 2 frames");
  return FrameStack{tensor.values, tensor.dims[0], tensor.dims[1], tensor.dims[2]};
}

inline TensorFile from_video(const FrameStack& video, DType dtype = DType::f64) {
  TensorFile tensor;
  tensor.values = video.data;
  tensor.dims = {video.frames, video.height, video.width};
  tensor.dtype = dtype;
  return tensor;
}

}  // namespace btw
