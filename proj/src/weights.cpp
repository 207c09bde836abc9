#include "halo/weights.hpp"

#include <cmath>
#include <sstream>

#include "halo/error.hpp"

namespace halo {

namespace {

std::string shape_str(const std::vector<std::int64_t>& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ", ";
    os << shape[i];
  }
  os << ']';
  return os.str();
}

}  // namespace

std::string layer_tensor_name(int layer, const std::string& suffix) {
  return "layers." + std::to_string(layer) + "." + suffix;
}

std::vector<std::pair<std::string, std::vector<std::int64_t>>>
WeightStore::expected_tensors(const ModelConfig& c) {
  const std::int64_t h = c.hidden_size;
  const std::int64_t f = c.ffn_hidden;
  const std::int64_t v = c.vocab_size;
  std::vector<std::pair<std::string, std::vector<std::int64_t>>> out;
  out.push_back({"tok_embeddings", {v, h}});
  for (int i = 0; i < c.n_layers; ++i) {
    out.push_back({layer_tensor_name(i, "attention_norm"), {h}});
    out.push_back({layer_tensor_name(i, "attention.wq"), {h, h}});
    out.push_back({layer_tensor_name(i, "attention.wk"), {h, h}});
    out.push_back({layer_tensor_name(i, "attention.wv"), {h, h}});
    out.push_back({layer_tensor_name(i, "attention.wo"), {h, h}});
    out.push_back({layer_tensor_name(i, "ffn_norm"), {h}});
    out.push_back({layer_tensor_name(i, "feed_forward.w1"), {f, h}});
    out.push_back({layer_tensor_name(i, "feed_forward.w3"), {f, h}});
    out.push_back({layer_tensor_name(i, "feed_forward.w2"), {h, f}});
  }
  out.push_back({"norm", {h}});
  out.push_back({"output", {v, h}});
  return out;
}

WeightStore::WeightStore(const ModelConfig& config, TensorMap tensors)
    : config_(config), tensors_(std::move(tensors)) {
  config_.validate();
  for (const auto& [name, shape] : expected_tensors(config_)) {
    auto it = tensors_.find(name);
    if (it == tensors_.end()) {
      throw ModelError("missing tensor '" + name + "'");
    }
    if (it->second.shape != shape) {
      throw ModelError("tensor '" + name + "' has shape " +
                       shape_str(it->second.shape) + ", expected " + shape_str(shape));
    }
    const auto& data = it->second.data;
    for (std::size_t i = 0; i < data.size(); ++i) {
      if (!std::isfinite(data[i])) {
        throw ModelError("tensor '" + name + "' has a non-finite value at flat index " +
                         std::to_string(i));
      }
    }
  }

  auto view = [this](const std::string& name) -> std::span<const float> {
    return tensors_.at(name).data;
  };
  embeddings_ = view("tok_embeddings");
  final_norm_ = view("norm");
  unembedding_ = view("output");
  layers_.reserve(static_cast<std::size_t>(config_.n_layers));
  for (int i = 0; i < config_.n_layers; ++i) {
    LayerWeights lw;
    lw.attention_norm = view(layer_tensor_name(i, "attention_norm"));
    lw.wq = view(layer_tensor_name(i, "attention.wq"));
    lw.wk = view(layer_tensor_name(i, "attention.wk"));
    lw.wv = view(layer_tensor_name(i, "attention.wv"));
    lw.wo = view(layer_tensor_name(i, "attention.wo"));
    lw.ffn_norm = view(layer_tensor_name(i, "ffn_norm"));
    lw.w_gate = view(layer_tensor_name(i, "feed_forward.w1"));
    lw.w_up = view(layer_tensor_name(i, "feed_forward.w3"));
    lw.w_down = view(layer_tensor_name(i, "feed_forward.w2"));
    layers_.push_back(lw);
  }
}

std::span<const float> WeightStore::unembedding_row(int token) const {
  if (token < 0 || token >= config_.vocab_size) {
    throw ModelError("token id out of range: " + std::to_string(token));
  }
  const auto h = static_cast<std::size_t>(config_.hidden_size);
  return unembedding_.subspan(static_cast<std::size_t>(token) * h, h);
}

}  // namespace halo
