#include "halo/model.hpp"

#include <algorithm>
#include <cmath>

#include "halo/error.hpp"

namespace halo {

namespace {

// Eight independent partial sums combined in a fixed tree, so the result
// depends only on the inputs and never on scheduling.
float dot(const float* a, const float* b, std::size_t n) {
  float acc[8] = {0, 0, 0, 0, 0, 0, 0, 0};
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    for (std::size_t j = 0; j < 8; ++j) acc[j] += a[i + j] * b[i + j];
  }
  float s = ((acc[0] + acc[1]) + (acc[2] + acc[3])) + ((acc[4] + acc[5]) + (acc[6] + acc[7]));
  for (; i < n; ++i) s += a[i] * b[i];
  return s;
}

// y[rows x out] = x[rows x in] * w^T with w stored [out x in].
void matmul(const float* x, std::size_t rows, std::size_t in, std::span<const float> w,
            std::size_t out, float* y) {
  for (std::size_t o = 0; o < out; ++o) {
    const float* wrow = w.data() + o * in;
    for (std::size_t r = 0; r < rows; ++r) y[r * out + o] = dot(x + r * in, wrow, in);
  }
}

void rmsnorm(const float* x, std::span<const float> w, std::size_t n, float eps, float* y) {
  float ss = 0.0f;
  for (std::size_t i = 0; i < n; ++i) ss += x[i] * x[i];
  const float inv = 1.0f / std::sqrt(ss / static_cast<float>(n) + eps);
  for (std::size_t i = 0; i < n; ++i) y[i] = x[i] * inv * w[i];
}

float silu(float v) { return v / (1.0f + std::exp(-v)); }

}  // namespace

void ActivationTrace::insert(HiddenState state) {
  LayerPosition key{state.layer, state.position};
  states_.insert_or_assign(key, std::move(state));
}

const HiddenState& ActivationTrace::at(int layer, int position) const {
  auto it = states_.find({layer, position});
  if (it == states_.end()) {
    throw UsageError("no captured hidden state at layer " + std::to_string(layer) +
                     ", position " + std::to_string(position));
  }
  return it->second;
}

bool ActivationTrace::contains(int layer, int position) const {
  return states_.contains({layer, position});
}

TokenId argmax_lowest(std::span<const float> logits) {
  TokenId best = 0;
  for (std::size_t i = 1; i < logits.size(); ++i) {
    if (logits[i] > logits[static_cast<std::size_t>(best)]) best = static_cast<TokenId>(i);
  }
  return best;
}

struct Model::KVCache {
  std::size_t hidden;
  std::vector<std::vector<float>> k;  // per layer [capacity x hidden], post-rotary
  std::vector<std::vector<float>> v;

  KVCache(int layers, int capacity, int hidden_size)
      : hidden(static_cast<std::size_t>(hidden_size)),
        k(static_cast<std::size_t>(layers),
          std::vector<float>(static_cast<std::size_t>(capacity) * hidden)),
        v(k) {}
};

Model::Model(WeightStore weights) : weights_(std::move(weights)) {
  const auto& c = config();
  const std::size_t half = static_cast<std::size_t>(c.head_dim) / 2;
  rope_cos_.resize(static_cast<std::size_t>(c.max_seq_len) * half);
  rope_sin_.resize(rope_cos_.size());
  for (std::size_t p = 0; p < static_cast<std::size_t>(c.max_seq_len); ++p) {
    for (std::size_t j = 0; j < half; ++j) {
      const double freq =
          std::pow(c.rope_theta, -2.0 * static_cast<double>(j) / static_cast<double>(c.head_dim));
      const double angle = static_cast<double>(p) * freq;
      rope_cos_[p * half + j] = static_cast<float>(std::cos(angle));
      rope_sin_[p * half + j] = static_cast<float>(std::sin(angle));
    }
  }
}

Model Model::load(const std::filesystem::path& config_path,
                  const std::filesystem::path& weights_path) {
  if (!std::filesystem::exists(config_path)) {
    throw ModelError("model config not found: " + config_path.string());
  }
  if (!std::filesystem::exists(weights_path)) {
    throw ModelError("weights file not found: " + weights_path.string());
  }
  ModelConfig config = load_config(config_path);
  try {
    return Model(WeightStore(config, read_bundle(weights_path)));
  } catch (const ModelError& e) {
    throw ModelError(weights_path.string() + ": " + e.what());
  }
}

Model Model::load_dir(const std::filesystem::path& dir) {
  return load(dir / kModelConfigFile, dir / kModelWeightsFile);
}

void Model::validate_tokens(std::span<const TokenId> tokens) const {
  if (tokens.empty()) throw UsageError("token sequence is empty");
  if (tokens.size() > static_cast<std::size_t>(config().max_seq_len)) {
    throw DataError("sequence length " + std::to_string(tokens.size()) +
                    " exceeds max_seq_len " + std::to_string(config().max_seq_len));
  }
  for (TokenId t : tokens) {
    if (t < 0 || t >= config().vocab_size) {
      throw DataError("token id " + std::to_string(t) + " outside vocabulary of size " +
                      std::to_string(config().vocab_size));
    }
  }
}

void Model::validate_steering(const SteeringSpec& spec) const {
  if (spec.vector.size() != static_cast<std::size_t>(config().hidden_size)) {
    throw UsageError("steering vector length " + std::to_string(spec.vector.size()) +
                     " does not match hidden_size " + std::to_string(config().hidden_size));
  }
  if (!std::isfinite(spec.alpha)) throw UsageError("steering alpha must be finite");
  for (float v : spec.vector) {
    if (!std::isfinite(v)) throw UsageError("steering vector has a non-finite entry");
  }
}

ForwardResult Model::forward(std::span<const TokenId> tokens,
                             const ForwardOptions& options) const {
  validate_tokens(tokens);
  const auto& c = config();
  const int d = static_cast<int>(tokens.size());
  for (const auto& lp : options.capture) {
    if (lp.layer < 0 || lp.layer >= c.n_layers) {
      throw UsageError("capture layer out of range: " + std::to_string(lp.layer));
    }
    if (lp.position < 0 || lp.position >= d) {
      throw UsageError("capture position out of range: " + std::to_string(lp.position));
    }
  }
  if (options.block) {
    const auto& b = *options.block;
    if (b.layer_threshold < 0 || b.layer_threshold > c.n_layers) {
      throw UsageError("block layer_threshold must lie in [0, n_layers]");
    }
    if (b.query_position < 0 || b.query_position >= d) {
      throw UsageError("block query position out of range: " + std::to_string(b.query_position));
    }
    for (int n : b.key_positions) {
      if (n < 0 || n >= b.query_position) {
        throw UsageError("blocked key position " + std::to_string(n) +
                         " is not strictly before the query position");
      }
    }
    if (!(b.mask_value < 0.0f) || !std::isfinite(b.mask_value)) {
      throw UsageError("block mask value must be finite and negative");
    }
  }
  if (options.steering) validate_steering(*options.steering);

  KVCache cache(c.n_layers, d, c.hidden_size);
  ForwardResult result;
  run(tokens, 0, cache, options, result);
  return result;
}

void Model::run(std::span<const TokenId> tokens, int start, KVCache& cache,
                const ForwardOptions& options, ForwardResult& result) const {
  const auto& c = config();
  const std::size_t H = static_cast<std::size_t>(c.hidden_size);
  const std::size_t F = static_cast<std::size_t>(c.ffn_hidden);
  const std::size_t n_heads = static_cast<std::size_t>(c.n_heads);
  const std::size_t hd = static_cast<std::size_t>(c.head_dim);
  const std::size_t half = hd / 2;
  const std::size_t n = tokens.size();
  const std::size_t total = static_cast<std::size_t>(start) + n;
  const float eps = static_cast<float>(c.norm_epsilon);
  const float scale = 1.0f / std::sqrt(static_cast<float>(hd));

  std::vector<float> x(n * H), xn(n * H), q(n * H), k(n * H), v(n * H), att(n * H), tmp(n * H);
  std::vector<float> gate(n * F), up(n * F);
  std::vector<float> probs(total);
  std::vector<char> blocked_key(total, 0);

  const auto emb = weights_.embeddings();
  for (std::size_t i = 0; i < n; ++i) {
    std::copy_n(emb.data() + static_cast<std::size_t>(tokens[i]) * H, H, x.data() + i * H);
  }

  const bool capture_attention = options.capture_attention && start == 0;
  if (capture_attention) {
    result.attention.assign(static_cast<std::size_t>(c.n_layers), AttentionMap{});
  }
  if (options.block) {
    for (int key : options.block->key_positions) blocked_key[static_cast<std::size_t>(key)] = 1;
  }

  for (int l = 0; l < c.n_layers; ++l) {
    const LayerWeights& lw = weights_.layer(l);
    auto& kc = cache.k[static_cast<std::size_t>(l)];
    auto& vc = cache.v[static_cast<std::size_t>(l)];

    for (std::size_t i = 0; i < n; ++i) rmsnorm(&x[i * H], lw.attention_norm, H, eps, &xn[i * H]);
    matmul(xn.data(), n, H, lw.wq, H, q.data());
    matmul(xn.data(), n, H, lw.wk, H, k.data());
    matmul(xn.data(), n, H, lw.wv, H, v.data());

    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t pos = static_cast<std::size_t>(start) + i;
      const float* cs = &rope_cos_[pos * half];
      const float* sn = &rope_sin_[pos * half];
      for (std::size_t h = 0; h < n_heads; ++h) {
        float* qh = &q[i * H + h * hd];
        float* kh = &k[i * H + h * hd];
        for (std::size_t j = 0; j < half; ++j) {
          const float q0 = qh[2 * j], q1 = qh[2 * j + 1];
          qh[2 * j] = q0 * cs[j] - q1 * sn[j];
          qh[2 * j + 1] = q0 * sn[j] + q1 * cs[j];
          const float k0 = kh[2 * j], k1 = kh[2 * j + 1];
          kh[2 * j] = k0 * cs[j] - k1 * sn[j];
          kh[2 * j + 1] = k0 * sn[j] + k1 * cs[j];
        }
      }
      std::copy_n(&k[i * H], H, &kc[pos * H]);
      std::copy_n(&v[i * H], H, &vc[pos * H]);
    }

    AttentionMap* amap = nullptr;
    if (capture_attention) {
      amap = &result.attention[static_cast<std::size_t>(l)];
      amap->layer = l;
      amap->n_heads = c.n_heads;
      amap->seq_len = static_cast<int>(n);
      amap->scores.assign(n_heads * n * n, 0.0f);
      amap->weights.assign(n_heads * n * n, 0.0f);
    }
    const bool block_layer = options.block && l >= options.block->layer_threshold;

    for (std::size_t h = 0; h < n_heads; ++h) {
      for (std::size_t i = 0; i < n; ++i) {
        const std::size_t pos = static_cast<std::size_t>(start) + i;
        const float* qh = &q[i * H + h * hd];
        const bool block_row =
            block_layer && static_cast<int>(pos) == options.block->query_position;
        float max_score = -INFINITY;
        for (std::size_t j = 0; j <= pos; ++j) {
          float s = dot(qh, &kc[j * H + h * hd], hd) * scale;
          if (amap) amap->scores[amap->index(static_cast<int>(h), static_cast<int>(i), static_cast<int>(j))] = s;
          if (block_row && blocked_key[j]) s += options.block->mask_value;
          probs[j] = s;
          max_score = std::max(max_score, s);
        }
        float sum = 0.0f;
        for (std::size_t j = 0; j <= pos; ++j) {
          probs[j] = std::exp(probs[j] - max_score);
          sum += probs[j];
        }
        const float inv = 1.0f / sum;
        float* out = &att[i * H + h * hd];
        std::fill_n(out, hd, 0.0f);
        for (std::size_t j = 0; j <= pos; ++j) {
          const float p = probs[j] * inv;
          if (amap) amap->weights[amap->index(static_cast<int>(h), static_cast<int>(i), static_cast<int>(j))] = p;
          const float* vh = &vc[j * H + h * hd];
          for (std::size_t e = 0; e < hd; ++e) out[e] += p * vh[e];
        }
      }
    }

    matmul(att.data(), n, H, lw.wo, H, tmp.data());
    for (std::size_t i = 0; i < n * H; ++i) x[i] += tmp[i];

    for (std::size_t i = 0; i < n; ++i) rmsnorm(&x[i * H], lw.ffn_norm, H, eps, &xn[i * H]);
    matmul(xn.data(), n, H, lw.w_gate, F, gate.data());
    matmul(xn.data(), n, H, lw.w_up, F, up.data());
    for (std::size_t i = 0; i < n * F; ++i) gate[i] = silu(gate[i]) * up[i];
    matmul(gate.data(), n, F, lw.w_down, H, tmp.data());
    for (std::size_t i = 0; i < n * H; ++i) x[i] += tmp[i];

    for (std::size_t i = 0; i < n; ++i) {
      const int pos = start + static_cast<int>(i);
      if (options.capture.contains({l, pos})) {
        result.trace.insert(HiddenState{std::vector<float>(x.begin() + static_cast<std::ptrdiff_t>(i * H),
                                                           x.begin() + static_cast<std::ptrdiff_t>((i + 1) * H)),
                                        l, pos});
      }
    }
  }

  std::size_t first_row = 0;
  switch (options.logits) {
    case LogitsMode::none:
      first_row = n;
      break;
    case LogitsMode::last:
      first_row = n - 1;
      break;
    case LogitsMode::all:
      first_row = 0;
      break;
  }
  const std::size_t V = static_cast<std::size_t>(c.vocab_size);
  result.vocab_size = c.vocab_size;
  result.logit_rows = static_cast<int>(n - first_row);
  result.logits.assign((n - first_row) * V, 0.0f);
  std::vector<float> hn(H);
  for (std::size_t i = first_row; i < n; ++i) {
    rmsnorm(&x[i * H], weights_.final_norm(), H, eps, hn.data());
    if (options.steering && i == n - 1) {
      const auto& s = *options.steering;
      for (std::size_t e = 0; e < H; ++e) hn[e] += s.alpha * s.vector[e];
    }
    matmul(hn.data(), 1, H, weights_.unembedding(), V, &result.logits[(i - first_row) * V]);
  }
}

TokenSequence Model::generate(std::span<const TokenId> prompt, int max_new_tokens,
                              const std::optional<SteeringSpec>& steering,
                              std::optional<TokenId> stop_token) const {
  validate_tokens(prompt);
  if (max_new_tokens < 1) throw UsageError("max_new_tokens must be >= 1");
  const auto& c = config();
  const std::size_t final_len = prompt.size() + static_cast<std::size_t>(max_new_tokens);
  if (final_len > static_cast<std::size_t>(c.max_seq_len)) {
    throw DataError("context window overflow: prompt of " + std::to_string(prompt.size()) +
                    " tokens plus " + std::to_string(max_new_tokens) +
                    " new tokens exceeds max_seq_len " + std::to_string(c.max_seq_len));
  }
  if (steering) validate_steering(*steering);

  ForwardOptions options;
  options.logits = LogitsMode::last;
  options.steering = steering;

  KVCache cache(c.n_layers, static_cast<int>(final_len), c.hidden_size);
  TokenSequence generated;
  ForwardResult step;
  run(prompt, 0, cache, options, step);
  int pos = static_cast<int>(prompt.size());
  for (int t = 0; t < max_new_tokens; ++t) {
    const TokenId next = argmax_lowest(step.logits_row(0));
    if (stop_token && next == *stop_token) break;
    generated.push_back(next);
    if (t + 1 == max_new_tokens) break;
    const TokenId feed[1] = {next};
    step = ForwardResult{};
    run(feed, pos, cache, options, step);
    ++pos;
  }
  return generated;
}

}  // namespace halo

namespace halo {

Engine load_engine(const std::filesystem::path& model_dir,
                   const std::optional<std::filesystem::path>& tokenizer_path) {
  Engine engine;
  engine.model = std::make_shared<const Model>(Model::load_dir(model_dir));
  engine.tokenizer = load_tokenizer(tokenizer_path);
  if (engine.tokenizer->vocab_size() > static_cast<std::size_t>(engine.config().vocab_size)) {
    throw ModelError("tokenizer vocabulary (" + std::to_string(engine.tokenizer->vocab_size()) +
                     " ids) exceeds model vocab_size " +
                     std::to_string(engine.config().vocab_size));
  }
  return engine;
}

}  // namespace halo
