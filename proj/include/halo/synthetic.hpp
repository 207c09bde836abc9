#pragma once

#include <cstdint>
#include <filesystem>

#include "halo/config.hpp"
#include "halo/tensor_io.hpp"

namespace halo {

// Desk-scale configuration: byte vocabulary, a few layers.
ModelConfig tiny_config(int n_layers = 4, int hidden_size = 64, int n_heads = 4,
                        int vocab_size = 256, int ffn_hidden = 128, int max_seq_len = 512);

// Gaussian weights with fan-in scaling; norm scales are 1 + N(0, 0.1^2).
TensorMap random_weights(const ModelConfig& config, std::uint64_t seed);

// Replaces the unembedding with orthonormal rows (modified Gram-Schmidt).
// Requires vocab_size <= hidden_size.
void orthonormalize_unembedding(TensorMap& tensors, const ModelConfig& config);

// Writes config.json and weights.halo into dir (created if needed).
void save_model(const std::filesystem::path& dir, const ModelConfig& config,
                const TensorMap& tensors, DType dtype = DType::f32);

}  // namespace halo
