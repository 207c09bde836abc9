#pragma once

#include <compare>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <span>
#include <vector>

#include "halo/config.hpp"
#include "halo/tokenizer.hpp"
#include "halo/weights.hpp"

namespace halo {

struct LayerPosition {
  int layer = 0;
  int position = 0;
  auto operator<=>(const LayerPosition&) const = default;
};

using CaptureSet = std::set<LayerPosition>;

// Residual-stream output of one decoder block at one position.
struct HiddenState {
  std::vector<float> values;
  int layer = 0;
  int position = 0;
};

class ActivationTrace {
 public:
  void insert(HiddenState state);
  const HiddenState& at(int layer, int position) const;
  bool contains(int layer, int position) const;
  std::size_t size() const { return states_.size(); }
  const std::map<LayerPosition, HiddenState>& states() const { return states_; }

 private:
  std::map<LayerPosition, HiddenState> states_;
};

// Largest finite binary16 magnitude; the additive mask for blocked edges.
inline constexpr float kBlockMaskValue = -65504.0f;

// Severs attention from one query position to a set of earlier key
// positions in every head of every layer >= layer_threshold.
struct AttentionBlockSpec {
  int layer_threshold = 0;
  int query_position = 0;
  std::vector<int> key_positions;
  float mask_value = kBlockMaskValue;
};

// Offset alpha * vector added to the final-normalized hidden state of the
// last position, immediately before unembedding.
struct SteeringSpec {
  std::vector<float> vector;
  float alpha = 100.0f;
};

enum class LogitsMode { all, last, none };

struct ForwardOptions {
  CaptureSet capture;
  std::optional<AttentionBlockSpec> block;
  std::optional<SteeringSpec> steering;
  LogitsMode logits = LogitsMode::all;
  bool capture_attention = false;
};

// Per-layer attention map, indexed [head][query][key]. Entries with
// key > query are zero.
struct AttentionMap {
  int layer = 0;
  int n_heads = 0;
  int seq_len = 0;
  std::vector<float> scores;   // scaled q.k before the block mask
  std::vector<float> weights;  // post-softmax, block mask included

  std::size_t index(int head, int query, int key) const {
    return (static_cast<std::size_t>(head) * seq_len + query) * seq_len + key;
  }
  float score(int head, int query, int key) const { return scores[index(head, query, key)]; }
  float weight(int head, int query, int key) const { return weights[index(head, query, key)]; }
};

struct ForwardResult {
  int logit_rows = 0;
  int vocab_size = 0;
  std::vector<float> logits;  // [logit_rows x vocab_size]
  ActivationTrace trace;
  std::vector<AttentionMap> attention;

  std::span<const float> logits_row(int row) const {
    return std::span<const float>(logits).subspan(
        static_cast<std::size_t>(row) * vocab_size, static_cast<std::size_t>(vocab_size));
  }
};

// Deterministic LLaMA-family decoder: RMSNorm pre-normalisation, rotary
// query/key embeddings (adjacent-pair convention), SiLU-gated feed-forward,
// no biases. All arithmetic is float32 with a fixed reduction order, so
// repeated calls are bitwise identical. Instances are immutable; forward and
// generate may run concurrently from several threads.
class Model {
 public:
  explicit Model(WeightStore weights);

  static Model load(const std::filesystem::path& config_path,
                    const std::filesystem::path& weights_path);
  // Directory holding config.json and weights.halo.
  static Model load_dir(const std::filesystem::path& dir);

  const ModelConfig& config() const { return weights_.config(); }
  const WeightStore& weights() const { return weights_; }

  ForwardResult forward(std::span<const TokenId> tokens,
                        const ForwardOptions& options = {}) const;

  // Greedy decoding with a KV cache; ties go to the lowest token id. Returns
  // only the newly generated tokens. Generation stops early after emitting
  // stop_token (which is not included in the result).
  TokenSequence generate(std::span<const TokenId> prompt, int max_new_tokens,
                         const std::optional<SteeringSpec>& steering = std::nullopt,
                         std::optional<TokenId> stop_token = std::nullopt) const;

 private:
  struct KVCache;

  void run(std::span<const TokenId> tokens, int start, KVCache& cache,
           const ForwardOptions& options, ForwardResult& result) const;
  void validate_tokens(std::span<const TokenId> tokens) const;
  void validate_steering(const SteeringSpec& spec) const;

  WeightStore weights_;
  std::vector<float> rope_cos_;  // [max_seq_len x head_dim/2]
  std::vector<float> rope_sin_;
};

inline constexpr const char* kModelConfigFile = "config.json";
inline constexpr const char* kModelWeightsFile = "weights.halo";

TokenId argmax_lowest(std::span<const float> logits);

// A model paired with the tokenizer that feeds it. Both are shared and
// immutable.
struct Engine {
  std::shared_ptr<const Model> model;
  std::shared_ptr<const Tokenizer> tokenizer;

  const ModelConfig& config() const { return model->config(); }
};

// Loads a model directory and an optional tokenizer file, checking that the
// tokenizer ids fit the model vocabulary.
Engine load_engine(const std::filesystem::path& model_dir,
                   const std::optional<std::filesystem::path>& tokenizer_path);

}  // namespace halo
