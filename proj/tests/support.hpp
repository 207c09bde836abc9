#pragma once

#include <algorithm>
#include <complex>
#include <cmath>
#include <filesystem>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "halo/model.hpp"
#include "halo/rng.hpp"
#include "halo/synthetic.hpp"
#include "halo/weights.hpp"

namespace halo::test {

class TempDir {
 public:
  explicit TempDir(const std::string& tag = "halo") {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            (tag + "-" + std::to_string(rd()) + "-" + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline Model make_model(const ModelConfig& config, std::uint64_t seed, bool orthonormal = false) {
  auto tensors = random_weights(config, seed);
  if (orthonormal) orthonormalize_unembedding(tensors, config);
  return Model(WeightStore(config, std::move(tensors)));
}

// The desk-scale model used throughout: 4 layers, hidden 64, vocab 256.
inline const Model& tiny_model() {
  static const Model model = make_model(tiny_config(), 20240601);
  return model;
}

inline TokenSequence random_tokens(Rng& rng, std::size_t n, int vocab = 256) {
  TokenSequence t(n);
  for (auto& x : t) x = static_cast<TokenId>(rng.uniform_below(static_cast<std::uint64_t>(vocab)));
  return t;
}

// Straightforward double-precision decoder written independently of the
// library kernels. Blocked edges are removed from the softmax outright
// instead of being masked, which is the limit the additive mask approaches.
struct ReferenceOutput {
  std::vector<std::vector<std::vector<double>>> hidden;  // [layer][pos][H]
  std::vector<std::vector<double>> logits;               // [pos][V]
};

inline ReferenceOutput reference_forward(const WeightStore& w, const TokenSequence& tokens,
                                         const std::optional<AttentionBlockSpec>& block = {},
                                         const std::vector<double>* steer = nullptr,
                                         double alpha = 0.0) {
  const auto& c = w.config();
  const std::size_t H = c.hidden_size, F = c.ffn_hidden, V = c.vocab_size, n = tokens.size();
  const std::size_t nh = c.n_heads, hd = c.head_dim;
  using Vec = std::vector<double>;

  auto rms = [&](const Vec& x, std::span<const float> g) {
    double ss = 0;
    for (double v : x) ss += v * v;
    const double inv = 1.0 / std::sqrt(ss / static_cast<double>(x.size()) + c.norm_epsilon);
    Vec y(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] * inv * g[i];
    return y;
  };
  auto apply = [](std::span<const float> m, std::size_t out, std::size_t in, const Vec& x) {
    Vec y(out, 0.0);
    for (std::size_t o = 0; o < out; ++o) {
      for (std::size_t i = 0; i < in; ++i) y[o] += static_cast<double>(m[o * in + i]) * x[i];
    }
    return y;
  };
  auto rotate = [&](Vec& v, std::size_t pos) {
    for (std::size_t h = 0; h < nh; ++h) {
      for (std::size_t j = 0; j < hd / 2; ++j) {
        const double freq = std::pow(c.rope_theta, -2.0 * static_cast<double>(j) / hd);
        std::complex<double> z(v[h * hd + 2 * j], v[h * hd + 2 * j + 1]);
        z *= std::polar(1.0, static_cast<double>(pos) * freq);
        v[h * hd + 2 * j] = z.real();
        v[h * hd + 2 * j + 1] = z.imag();
      }
    }
  };

  std::vector<Vec> x(n, Vec(H));
  for (std::size_t p = 0; p < n; ++p) {
    for (std::size_t i = 0; i < H; ++i) x[p][i] = w.embeddings()[tokens[p] * H + i];
  }
  ReferenceOutput out;
  for (int l = 0; l < c.n_layers; ++l) {
    const auto& lw = w.layer(l);
    std::vector<Vec> q(n), k(n), v(n);
    for (std::size_t p = 0; p < n; ++p) {
      const Vec xn = rms(x[p], lw.attention_norm);
      q[p] = apply(lw.wq, H, H, xn);
      k[p] = apply(lw.wk, H, H, xn);
      v[p] = apply(lw.wv, H, H, xn);
      rotate(q[p], p);
      rotate(k[p], p);
    }
    std::vector<Vec> attn(n, Vec(H, 0.0));
    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t h = 0; h < nh; ++h) {
        std::vector<double> s;
        std::vector<std::size_t> keys;
        for (std::size_t j = 0; j <= p; ++j) {
          if (block && l >= block->layer_threshold && static_cast<int>(p) == block->query_position &&
              std::find(block->key_positions.begin(), block->key_positions.end(),
                        static_cast<int>(j)) != block->key_positions.end()) {
            continue;
          }
          double d = 0;
          for (std::size_t e = 0; e < hd; ++e) d += q[p][h * hd + e] * k[j][h * hd + e];
          s.push_back(d / std::sqrt(static_cast<double>(hd)));
          keys.push_back(j);
        }
        const double m = *std::max_element(s.begin(), s.end());
        double z = 0;
        for (double& e : s) z += (e = std::exp(e - m));
        for (std::size_t t = 0; t < keys.size(); ++t) {
          for (std::size_t e = 0; e < hd; ++e) attn[p][h * hd + e] += s[t] / z * v[keys[t]][h * hd + e];
        }
      }
    }
    for (std::size_t p = 0; p < n; ++p) {
      const Vec o = apply(lw.wo, H, H, attn[p]);
      for (std::size_t i = 0; i < H; ++i) x[p][i] += o[i];
      const Vec xn = rms(x[p], lw.ffn_norm);
      const Vec g = apply(lw.w_gate, F, H, xn);
      const Vec u = apply(lw.w_up, F, H, xn);
      Vec act(F);
      for (std::size_t i = 0; i < F; ++i) act[i] = g[i] / (1.0 + std::exp(-g[i])) * u[i];
      const Vec down = apply(lw.w_down, H, F, act);
      for (std::size_t i = 0; i < H; ++i) x[p][i] += down[i];
    }
    out.hidden.push_back(x);
  }
  for (std::size_t p = 0; p < n; ++p) {
    Vec hn = rms(x[p], w.final_norm());
    if (steer && p + 1 == n) {
      for (std::size_t i = 0; i < H; ++i) hn[i] += alpha * (*steer)[i];
    }
    out.logits.push_back(apply(w.unembedding(), V, H, hn));
  }
  return out;
}

}  // namespace halo::test
