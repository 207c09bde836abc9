#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace halo {

enum class DType { f16, f32 };

// Dense row-major float tensor. Storage is always 32-bit; f16 payloads are
// widened on read.
struct Tensor {
  std::vector<std::int64_t> shape;
  std::vector<float> data;

  Tensor() = default;
  Tensor(std::vector<std::int64_t> shape_, std::vector<float> data_);

  std::int64_t numel() const;
};

using TensorMap = std::map<std::string, Tensor>;

inline constexpr char kBundleMagic[8] = {'H', 'A', 'L', 'O', 'T', 'N', 'S', 'R'};

// Bundle layout: 8-byte magic, little-endian u64 header length, UTF-8 JSON
// header {name: {dtype, shape, offset}}, then payloads. Offsets are relative
// to the first byte after the header.
void write_bundle(const std::filesystem::path& path, const TensorMap& tensors,
                  DType dtype = DType::f32);
std::string encode_bundle(const TensorMap& tensors, DType dtype = DType::f32);

TensorMap read_bundle(const std::filesystem::path& path);
TensorMap decode_bundle(const std::string& bytes, const std::string& origin);

// IEEE 754 binary16 conversion, round-to-nearest-even.
std::uint16_t float_to_half(float f);
float half_to_float(std::uint16_t h);

}  // namespace halo
