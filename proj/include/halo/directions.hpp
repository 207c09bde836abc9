#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "halo/probe.hpp"
#include "halo/tokenizer.hpp"
#include "halo/weights.hpp"

namespace halo {

enum class TransitionKind { correct, hallucinated };

std::string_view to_string(TransitionKind kind);

// correct: v = s1 - s3; hallucinated: v = s1 - s2 (componentwise, float).
struct TransitionVector {
  std::string sample_id;
  TransitionKind kind = TransitionKind::correct;
  std::vector<float> v;
};

// Two vectors per triple, hallucinated first.
std::vector<TransitionVector> transition_vectors(std::span<const HiddenTriple> triples);

struct PrincipalComponent {
  std::vector<double> direction;  // unit norm
  double explained_variance = 0.0;
  int iterations = 0;
};

// First principal component of the mean-centred vectors (sample covariance,
// n - 1 denominator). Sign is fixed so the mean scalar projection of the
// uncentred input vectors onto the direction is non-negative.
PrincipalComponent pca_first_component(const std::vector<std::vector<double>>& vectors);
PrincipalComponent pca_first_component(std::span<const std::vector<float>> vectors);

struct DirectionPair {
  std::vector<double> d_corr;
  std::vector<double> d_halluc;
  double explained_variance_corr = 0.0;
  double explained_variance_halluc = 0.0;
  std::size_t n_samples = 0;
};

DirectionPair fit_directions(std::span<const TransitionVector> vectors);

// Sum of v[i] * d[i] accumulated left to right in double, rounded to float.
float scalar_projection(std::span<const float> v, std::span<const double> d);

struct VocabEntry {
  TokenId token_id = 0;
  std::string token;
  double score = 0.0;
};

// Top-k rows of U . direction, descending by score, ties to the lower id.
std::vector<VocabEntry> vocab_project(std::span<const double> direction,
                                      const WeightStore& weights, int k,
                                      const Tokenizer* tokenizer = nullptr);

struct ProjectionRecord {
  std::string sample_id;
  float p_h = 0.0f;  // v_halluc . d_halluc
  float p_c = 0.0f;  // v_corr . d_corr
};

// One record per sample id, in order of first appearance. Every sample must
// contribute both kinds.
std::vector<ProjectionRecord> project_samples(std::span<const TransitionVector> vectors,
                                              const DirectionPair& pair);

inline constexpr const char* kSignConvention = "mean_projection_nonneg";

// Bundle bytes (f32 tensors d_corr, d_halluc) and sidecar JSON text.
std::string encode_directions(const DirectionPair& pair);
std::string directions_sidecar(const DirectionPair& pair);

// Writes the direction bundle and its sidecar, which sits next to it with
// the extension replaced by ".json".
void save_directions(const std::filesystem::path& path, const DirectionPair& pair);
DirectionPair load_directions(const std::filesystem::path& path);
std::filesystem::path directions_sidecar_path(const std::filesystem::path& path);

}  // namespace halo
