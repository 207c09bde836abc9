#include "halo/tensor_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "halo/error.hpp"

static_assert(std::endian::native == std::endian::little,
              "bundle payloads are read in place as little-endian");

namespace halo {

Tensor::Tensor(std::vector<std::int64_t> shape_, std::vector<float> data_)
    : shape(std::move(shape_)), data(std::move(data_)) {
  if (static_cast<std::int64_t>(data.size()) != numel()) {
    throw ModelError("tensor data size does not match its shape");
  }
}

std::int64_t Tensor::numel() const {
  std::int64_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::uint16_t float_to_half(float f) {
  const auto x = std::bit_cast<std::uint32_t>(f);
  const std::uint32_t sign = (x >> 16) & 0x8000u;
  const std::uint32_t exp = (x >> 23) & 0xffu;
  std::uint32_t mant = x & 0x7fffffu;

  if (exp == 0xffu) {  // inf / nan
    return static_cast<std::uint16_t>(sign | 0x7c00u | (mant ? 0x200u : 0u));
  }
  const int e = static_cast<int>(exp) - 127 + 15;
  if (e >= 0x1f) {
    return static_cast<std::uint16_t>(sign | 0x7c00u);
  }
  if (e <= 0) {
    if (e < -10) return static_cast<std::uint16_t>(sign);
    mant |= 0x800000u;
    const int shift = 14 - e;
    std::uint32_t half = mant >> shift;
    const std::uint32_t rem = mant & ((1u << shift) - 1u);
    const std::uint32_t mid = 1u << (shift - 1);
    if (rem > mid || (rem == mid && (half & 1u))) ++half;
    return static_cast<std::uint16_t>(sign | half);
  }
  std::uint32_t half = (static_cast<std::uint32_t>(e) << 10) | (mant >> 13);
  const std::uint32_t rem = mant & 0x1fffu;
  if (rem > 0x1000u || (rem == 0x1000u && (half & 1u))) ++half;  // may carry into exp
  return static_cast<std::uint16_t>(sign | half);
}

float half_to_float(std::uint16_t h) {
  const std::uint32_t sign = (static_cast<std::uint32_t>(h) & 0x8000u) << 16;
  std::uint32_t exp = (h >> 10) & 0x1fu;
  std::uint32_t mant = h & 0x3ffu;
  std::uint32_t bits;
  if (exp == 0) {
    if (mant == 0) {
      bits = sign;
    } else {
      int e = -1;
      do {
        ++e;
        mant <<= 1;
      } while ((mant & 0x400u) == 0);
      mant &= 0x3ffu;
      bits = sign | (static_cast<std::uint32_t>(127 - 15 - e) << 23) | (mant << 13);
    }
  } else if (exp == 0x1f) {
    bits = sign | 0x7f800000u | (mant << 13);
  } else {
    bits = sign | ((exp + 127 - 15) << 23) | (mant << 13);
  }
  return std::bit_cast<float>(bits);
}

std::string encode_bundle(const TensorMap& tensors, DType dtype) {
  const std::size_t elem = dtype == DType::f16 ? 2 : 4;
  nlohmann::json header = nlohmann::json::object();
  std::uint64_t offset = 0;
  for (const auto& [name, t] : tensors) {
    header[name] = {{"dtype", dtype == DType::f16 ? "f16" : "f32"},
                    {"shape", t.shape},
                    {"offset", offset}};
    offset += static_cast<std::uint64_t>(t.numel()) * elem;
    offset = (offset + 7) & ~std::uint64_t{7};
  }
  std::string header_text = header.dump();
  header_text.append((8 - header_text.size() % 8) % 8, ' ');

  std::string out;
  out.reserve(16 + header_text.size() + offset);
  out.append(kBundleMagic, sizeof(kBundleMagic));
  const std::uint64_t header_len = header_text.size();
  out.append(reinterpret_cast<const char*>(&header_len), sizeof(header_len));
  out += header_text;
  const std::size_t data_start = out.size();
  out.resize(data_start + offset, '\0');
  for (const auto& [name, t] : tensors) {
    char* dst = out.data() + data_start + header[name]["offset"].get<std::uint64_t>();
    if (dtype == DType::f32) {
      std::memcpy(dst, t.data.data(), t.data.size() * sizeof(float));
    } else {
      for (std::size_t i = 0; i < t.data.size(); ++i) {
        const std::uint16_t h = float_to_half(t.data[i]);
        std::memcpy(dst + 2 * i, &h, 2);
      }
    }
  }
  return out;
}

void write_bundle(const std::filesystem::path& path, const TensorMap& tensors,
                  DType dtype) {
  const std::string bytes = encode_bundle(tensors, dtype);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ModelError("cannot write tensor bundle: " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw ModelError("failed writing tensor bundle: " + path.string());
}

TensorMap decode_bundle(const std::string& bytes, const std::string& origin) {
  if (bytes.size() < 16 || std::memcmp(bytes.data(), kBundleMagic, 8) != 0) {
    throw ModelError(origin + ": not a tensor bundle (bad magic)");
  }
  std::uint64_t header_len = 0;
  std::memcpy(&header_len, bytes.data() + 8, 8);
  if (header_len > bytes.size() - 16) {
    throw ModelError(origin + ": header length exceeds file size");
  }
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.begin() + 16,
                                   bytes.begin() + 16 + static_cast<std::ptrdiff_t>(header_len));
  } catch (const nlohmann::json::exception& e) {
    throw ModelError(origin + ": cannot parse bundle header: " + e.what());
  }
  if (!header.is_object()) throw ModelError(origin + ": bundle header must be an object");

  const std::size_t data_start = 16 + header_len;
  const std::size_t data_size = bytes.size() - data_start;
  TensorMap tensors;
  for (const auto& [name, entry] : header.items()) {
    try {
      const std::string dtype = entry.at("dtype").get<std::string>();
      std::size_t elem;
      if (dtype == "f32") {
        elem = 4;
      } else if (dtype == "f16") {
        elem = 2;
      } else {
        throw ModelError("tensor '" + name + "': unsupported dtype '" + dtype + "'");
      }
      auto shape = entry.at("shape").get<std::vector<std::int64_t>>();
      std::uint64_t numel = 1;
      for (auto d : shape) {
        if (d < 0) throw ModelError("tensor '" + name + "': negative dimension");
        numel *= static_cast<std::uint64_t>(d);
      }
      const auto offset = entry.at("offset").get<std::uint64_t>();
      if (offset > data_size || numel * elem > data_size - offset) {
        throw ModelError("tensor '" + name + "': payload out of file bounds");
      }
      std::vector<float> data(numel);
      const char* src = bytes.data() + data_start + offset;
      if (elem == 4) {
        std::memcpy(data.data(), src, numel * 4);
      } else {
        for (std::uint64_t i = 0; i < numel; ++i) {
          std::uint16_t h;
          std::memcpy(&h, src + 2 * i, 2);
          data[i] = half_to_float(h);
        }
      }
      tensors.emplace(name, Tensor(std::move(shape), std::move(data)));
    } catch (const nlohmann::json::exception& e) {
      throw ModelError(origin + ": malformed header entry for tensor '" + name +
                       "': " + e.what());
    } catch (const ModelError& e) {
      throw ModelError(origin + ": " + e.what());
    }
  }
  return tensors;
}

TensorMap read_bundle(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ModelError("cannot open tensor bundle: " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return decode_bundle(ss.str(), path.string());
}

}  // namespace halo
