#include "halo/synthetic.hpp"

#include <cmath>

#include "halo/error.hpp"
#include "halo/model.hpp"
#include "halo/rng.hpp"
#include "halo/weights.hpp"

namespace halo {

ModelConfig tiny_config(int n_layers, int hidden_size, int n_heads, int vocab_size,
                        int ffn_hidden, int max_seq_len) {
  ModelConfig c;
  c.n_layers = n_layers;
  c.hidden_size = hidden_size;
  c.n_heads = n_heads;
  c.head_dim = n_heads > 0 ? hidden_size / n_heads : 0;
  c.vocab_size = vocab_size;
  c.ffn_hidden = ffn_hidden;
  c.rope_theta = 10000.0;
  c.norm_epsilon = 1e-5;
  c.max_seq_len = max_seq_len;
  c.validate();
  return c;
}

TensorMap random_weights(const ModelConfig& config, std::uint64_t seed) {
  config.validate();
  Rng rng(seed);
  TensorMap out;
  for (const auto& [name, shape] : WeightStore::expected_tensors(config)) {
    std::int64_t numel = 1;
    for (auto d : shape) numel *= d;
    std::vector<float> data(static_cast<std::size_t>(numel));
    if (shape.size() == 1) {
      for (auto& v : data) v = static_cast<float>(1.0 + 0.1 * rng.normal());
    } else {
      const double sd = name == "tok_embeddings" ? 1.0 : 1.0 / std::sqrt(static_cast<double>(shape[1]));
      for (auto& v : data) v = static_cast<float>(sd * rng.normal());
    }
    out.emplace(name, Tensor(shape, std::move(data)));
  }
  return out;
}

void orthonormalize_unembedding(TensorMap& tensors, const ModelConfig& config) {
  if (config.vocab_size > config.hidden_size) {
    throw UsageError("orthonormal unembedding needs vocab_size <= hidden_size");
  }
  auto& u = tensors.at("output").data;
  const std::size_t V = static_cast<std::size_t>(config.vocab_size);
  const std::size_t H = static_cast<std::size_t>(config.hidden_size);
  std::vector<double> rows(u.begin(), u.end());
  for (std::size_t r = 0; r < V; ++r) {
    double* row = &rows[r * H];
    for (std::size_t p = 0; p < r; ++p) {
      const double* prev = &rows[p * H];
      double proj = 0.0;
      for (std::size_t e = 0; e < H; ++e) proj += row[e] * prev[e];
      for (std::size_t e = 0; e < H; ++e) row[e] -= proj * prev[e];
    }
    double norm = 0.0;
    for (std::size_t e = 0; e < H; ++e) norm += row[e] * row[e];
    norm = std::sqrt(norm);
    if (norm < 1e-12) throw ModelError("unembedding rows are linearly dependent");
    for (std::size_t e = 0; e < H; ++e) row[e] /= norm;
  }
  for (std::size_t i = 0; i < u.size(); ++i) u[i] = static_cast<float>(rows[i]);
}

void save_model(const std::filesystem::path& dir, const ModelConfig& config,
                const TensorMap& tensors, DType dtype) {
  std::filesystem::create_directories(dir);
  save_config(config, dir / kModelConfigFile);
  write_bundle(dir / kModelWeightsFile, tensors, dtype);
}

}  // namespace halo
