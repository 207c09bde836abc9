#include "halo/config.hpp"

#include <cmath>
#include <fstream>
#include <set>

#include "halo/error.hpp"

namespace halo {

namespace {

const std::set<std::string> kConfigKeys = {
    "n_layers",   "hidden_size", "n_heads",      "head_dim",   "vocab_size",
    "ffn_hidden", "rope_theta",  "norm_epsilon", "max_seq_len"};

int count_field(const nlohmann::json& j, const char* key) {
  const auto& v = j.at(key);
  if (!v.is_number_integer()) {
    throw ModelError(std::string("model config field '") + key +
                     "' must be an integer");
  }
  return v.get<int>();
}

double real_field(const nlohmann::json& j, const char* key) {
  const auto& v = j.at(key);
  if (!v.is_number()) {
    throw ModelError(std::string("model config field '") + key +
                     "' must be a number");
  }
  return v.get<double>();
}

}  // namespace

void ModelConfig::validate() const {
  auto positive = [](int v, const char* name) {
    if (v < 1) {
      throw ModelError(std::string("model config: ") + name + " must be >= 1");
    }
  };
  positive(n_layers, "n_layers");
  positive(hidden_size, "hidden_size");
  positive(n_heads, "n_heads");
  positive(head_dim, "head_dim");
  positive(vocab_size, "vocab_size");
  positive(ffn_hidden, "ffn_hidden");
  positive(max_seq_len, "max_seq_len");
  if (hidden_size != n_heads * head_dim) {
    throw ModelError("model config: hidden_size must equal n_heads * head_dim");
  }
  if (head_dim % 2 != 0) {
    throw ModelError("model config: head_dim must be even for rotary embeddings");
  }
  if (!(norm_epsilon > 0.0) || !std::isfinite(norm_epsilon)) {
    throw ModelError("model config: norm_epsilon must be > 0");
  }
  if (!(rope_theta > 0.0) || !std::isfinite(rope_theta)) {
    throw ModelError("model config: rope_theta must be > 0");
  }
}

nlohmann::json to_json(const ModelConfig& c) {
  return {{"n_layers", c.n_layers},
          {"hidden_size", c.hidden_size},
          {"n_heads", c.n_heads},
          {"head_dim", c.head_dim},
          {"vocab_size", c.vocab_size},
          {"ffn_hidden", c.ffn_hidden},
          {"rope_theta", c.rope_theta},
          {"norm_epsilon", c.norm_epsilon},
          {"max_seq_len", c.max_seq_len}};
}

ModelConfig config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) {
    throw ModelError("model config must be a JSON object");
  }
  for (const auto& [key, _] : j.items()) {
    if (!kConfigKeys.contains(key)) {
      throw ModelError("model config: unknown field '" + key + "'");
    }
  }
  for (const auto& key : kConfigKeys) {
    if (!j.contains(key)) {
      throw ModelError("model config: missing field '" + key + "'");
    }
  }
  ModelConfig c;
  c.n_layers = count_field(j, "n_layers");
  c.hidden_size = count_field(j, "hidden_size");
  c.n_heads = count_field(j, "n_heads");
  c.head_dim = count_field(j, "head_dim");
  c.vocab_size = count_field(j, "vocab_size");
  c.ffn_hidden = count_field(j, "ffn_hidden");
  c.rope_theta = real_field(j, "rope_theta");
  c.norm_epsilon = real_field(j, "norm_epsilon");
  c.max_seq_len = count_field(j, "max_seq_len");
  c.validate();
  return c;
}

ModelConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw ModelError("cannot open model config: " + path.string());
  }
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ModelError("cannot parse model config " + path.string() + ": " +
                     e.what());
  }
  return config_from_json(j);
}

void save_config(const ModelConfig& config, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) {
    throw ModelError("cannot write model config: " + path.string());
  }
  out << to_json(config).dump(2) << '\n';
}

}  // namespace halo
