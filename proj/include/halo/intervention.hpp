#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "halo/model.hpp"
#include "halo/probe.hpp"

namespace halo {

struct EffectSizeRecord {
  std::string sample_id;
  int layer_threshold = 0;
  double e_halluc = 0.0;    // ||s2 - s2_blocked||
  double e_corr = 0.0;      // ||s3 - s3_blocked||
  double difference = 0.0;  // e_corr - e_halluc
};

// Blocks the last token of a branch from attending to its question segment
// (question_start..question_end) in every layer >= layer_threshold.
AttentionBlockSpec question_block(const BranchInput& branch, int layer_threshold);

double l2_distance(std::span<const float> a, std::span<const float> b);

EffectSizeRecord effect_size(const Model& model, const ProbeInputs& inputs, int layer_threshold);

struct SweepPoint {
  int layer_threshold = 0;
  double mean_diff = 0.0;
  double ci_halfwidth = 0.0;  // 1.96 * sd / sqrt(n)
  std::size_t n = 0;
};

struct SweepResult {
  std::vector<SweepPoint> points;
  std::vector<EffectSizeRecord> records;  // sample-major, thresholds in order
};

inline constexpr int kDefaultSweepThresholds[] = {0, 5, 10, 15, 20, 25, 30};

// Thresholds must be strictly increasing and lie in [0, n_layers].
SweepResult layer_sweep(const Model& model, std::span<const ProbeInputs> inputs,
                        std::span<const int> thresholds, int threads = 1);

struct SteeredGeneration {
  TokenSequence original_tokens;
  TokenSequence adjusted_tokens;
  std::string original;
  std::string adjusted;
};

SteeredGeneration steer_generate(const Engine& engine, std::string_view prompt,
                                 std::span<const double> direction, float alpha = 100.0f,
                                 int max_new_tokens = 32,
                                 std::optional<TokenId> stop_token = std::nullopt);

}  // namespace halo
