#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "halo/config.hpp"
#include "halo/tensor_io.hpp"

namespace halo {

// Views into one decoder block. Projection matrices are [out x in], row-major.
struct LayerWeights {
  std::span<const float> attention_norm;  // [hidden]
  std::span<const float> wq;              // [hidden x hidden]
  std::span<const float> wk;
  std::span<const float> wv;
  std::span<const float> wo;
  std::span<const float> ffn_norm;        // [hidden]
  std::span<const float> w_gate;          // [ffn x hidden]
  std::span<const float> w_up;            // [ffn x hidden]
  std::span<const float> w_down;          // [hidden x ffn]
};

// Immutable set of decoder weights, validated against a ModelConfig.
//
// Tensor names follow the original LLaMA release:
//   tok_embeddings                    [vocab x hidden]
//   layers.{i}.attention_norm         [hidden]
//   layers.{i}.attention.w{q,k,v,o}   [hidden x hidden]
//   layers.{i}.ffn_norm               [hidden]
//   layers.{i}.feed_forward.w1        [ffn x hidden]   (gate)
//   layers.{i}.feed_forward.w3        [ffn x hidden]   (up)
//   layers.{i}.feed_forward.w2        [hidden x ffn]   (down)
//   norm                              [hidden]
//   output                            [vocab x hidden] (unembedding U)
class WeightStore {
 public:
  // Throws ModelError naming the offending tensor on a missing tensor, a
  // shape mismatch or a non-finite value.
  WeightStore(const ModelConfig& config, TensorMap tensors);

  // The views alias map nodes, which survive a move but not a copy.
  WeightStore(const WeightStore&) = delete;
  WeightStore& operator=(const WeightStore&) = delete;
  WeightStore(WeightStore&&) noexcept = default;
  WeightStore& operator=(WeightStore&&) noexcept = default;

  const ModelConfig& config() const { return config_; }
  const TensorMap& tensors() const { return tensors_; }

  std::span<const float> embeddings() const { return embeddings_; }
  std::span<const float> final_norm() const { return final_norm_; }
  std::span<const float> unembedding() const { return unembedding_; }
  std::span<const float> unembedding_row(int token) const;
  const LayerWeights& layer(int i) const { return layers_.at(static_cast<std::size_t>(i)); }

  // Expected (name, shape) pairs for a config, in canonical order.
  static std::vector<std::pair<std::string, std::vector<std::int64_t>>>
  expected_tensors(const ModelConfig& config);

 private:
  ModelConfig config_;
  TensorMap tensors_;
  std::span<const float> embeddings_;
  std::span<const float> final_norm_;
  std::span<const float> unembedding_;
  std::vector<LayerWeights> layers_;
};

std::string layer_tensor_name(int layer, const std::string& suffix);

}  // namespace halo
