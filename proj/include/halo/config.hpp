#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

namespace halo {

// Hyper-parameters of a LLaMA-family decoder.
struct ModelConfig {
  int n_layers = 0;
  int hidden_size = 0;
  int n_heads = 0;
  int head_dim = 0;
  int vocab_size = 0;
  int ffn_hidden = 0;
  double rope_theta = 10000.0;
  double norm_epsilon = 1e-5;
  int max_seq_len = 0;

  // Throws ModelError when an invariant does not hold.
  void validate() const;

  bool operator==(const ModelConfig&) const = default;
};

nlohmann::json to_json(const ModelConfig& config);

// Requires exactly the ModelConfig fields; unknown or missing keys are errors.
ModelConfig config_from_json(const nlohmann::json& j);

ModelConfig load_config(const std::filesystem::path& path);
void save_config(const ModelConfig& config, const std::filesystem::path& path);

}  // namespace halo
