#include "halo/intervention.hpp"

#include <cmath>
#include <numeric>

#include "halo/error.hpp"
#include "halo/parallel.hpp"

namespace halo {

namespace {

std::vector<float> final_state(const Model& model, const BranchInput& branch,
                               const std::optional<AttentionBlockSpec>& block) {
  const int last_layer = model.config().n_layers - 1;
  ForwardOptions opts;
  opts.logits = LogitsMode::none;
  opts.capture = {{last_layer, branch.last_position()}};
  opts.block = block;
  auto result = model.forward(branch.tokens, opts);
  return result.trace.at(last_layer, branch.last_position()).values;
}

void check_threshold(const Model& model, int threshold) {
  if (threshold < 0 || threshold > model.config().n_layers) {
    throw UsageError("layer threshold " + std::to_string(threshold) + " outside [0, " +
                     std::to_string(model.config().n_layers) + "]");
  }
}

struct Unblocked {
  std::vector<float> s2;
  std::vector<float> s3;
};

EffectSizeRecord blocked_effect(const Model& model, const ProbeInputs& inputs,
                                const Unblocked& base, int threshold) {
  EffectSizeRecord r;
  r.sample_id = inputs.sample_id;
  r.layer_threshold = threshold;
  const auto s2b = final_state(model, inputs.hallucinated, question_block(inputs.hallucinated, threshold));
  const auto s3b = final_state(model, inputs.correct, question_block(inputs.correct, threshold));
  r.e_halluc = l2_distance(base.s2, s2b);
  r.e_corr = l2_distance(base.s3, s3b);
  r.difference = r.e_corr - r.e_halluc;
  return r;
}

// Ids beyond the tokenizer (possible when the model vocabulary is larger)
// are rendered as <id:N> instead of failing the whole generation.
std::string decode_lenient(const Tokenizer& tokenizer, const TokenSequence& ids) {
  std::string out;
  TokenSequence run;
  for (TokenId id : ids) {
    if (static_cast<std::size_t>(id) < tokenizer.vocab_size()) {
      run.push_back(id);
      continue;
    }
    out += tokenizer.decode(run);
    run.clear();
    out += "<id:" + std::to_string(id) + ">";
  }
  return out + tokenizer.decode(run);
}

}  // namespace

AttentionBlockSpec question_block(const BranchInput& branch, int layer_threshold) {
  AttentionBlockSpec spec;
  spec.layer_threshold = layer_threshold;
  spec.query_position = branch.last_position();
  spec.key_positions.resize(static_cast<std::size_t>(branch.question_end - branch.question_start + 1));
  std::iota(spec.key_positions.begin(), spec.key_positions.end(), branch.question_start);
  return spec;
}

double l2_distance(std::span<const float> a, std::span<const float> b) {
  if (a.size() != b.size()) throw UsageError("l2 distance of vectors with different lengths");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
    s += d * d;
  }
  return std::sqrt(s);
}

EffectSizeRecord effect_size(const Model& model, const ProbeInputs& inputs, int layer_threshold) {
  check_threshold(model, layer_threshold);
  Unblocked base{final_state(model, inputs.hallucinated, std::nullopt),
                 final_state(model, inputs.correct, std::nullopt)};
  return blocked_effect(model, inputs, base, layer_threshold);
}

SweepResult layer_sweep(const Model& model, std::span<const ProbeInputs> inputs,
                        std::span<const int> thresholds, int threads) {
  if (inputs.empty()) throw DataError("layer sweep: empty sample set");
  if (thresholds.empty()) throw UsageError("layer sweep: no thresholds given");
  for (std::size_t i = 0; i < thresholds.size(); ++i) {
    check_threshold(model, thresholds[i]);
    if (i > 0 && thresholds[i] <= thresholds[i - 1]) {
      throw UsageError("layer sweep thresholds must be strictly increasing");
    }
  }

  const std::size_t nt = thresholds.size();
  std::vector<EffectSizeRecord> records(inputs.size() * nt);
  parallel_for(inputs.size(), threads, [&](std::size_t s) {
    Unblocked base{final_state(model, inputs[s].hallucinated, std::nullopt),
                   final_state(model, inputs[s].correct, std::nullopt)};
    for (std::size_t t = 0; t < nt; ++t) {
      records[s * nt + t] = blocked_effect(model, inputs[s], base, thresholds[t]);
    }
  });

  SweepResult out;
  const double n = static_cast<double>(inputs.size());
  for (std::size_t t = 0; t < nt; ++t) {
    double mean = 0.0;
    for (std::size_t s = 0; s < inputs.size(); ++s) mean += records[s * nt + t].difference;
    mean /= n;
    double half = 0.0;
    if (inputs.size() > 1) {
      double ss = 0.0;
      for (std::size_t s = 0; s < inputs.size(); ++s) {
        const double d = records[s * nt + t].difference - mean;
        ss += d * d;
      }
      half = 1.96 * std::sqrt(ss / (n - 1.0)) / std::sqrt(n);
    }
    out.points.push_back({thresholds[t], mean, half, inputs.size()});
  }
  out.records = std::move(records);
  return out;
}

SteeredGeneration steer_generate(const Engine& engine, std::string_view prompt,
                                 std::span<const double> direction, float alpha,
                                 int max_new_tokens, std::optional<TokenId> stop_token) {
  if (direction.size() != static_cast<std::size_t>(engine.config().hidden_size)) {
    throw UsageError("steering direction length does not match hidden_size");
  }
  const TokenSequence tokens = engine.tokenizer->encode(prompt);
  SteeringSpec spec;
  spec.vector.assign(direction.begin(), direction.end());
  spec.alpha = alpha;

  SteeredGeneration g;
  g.original_tokens = engine.model->generate(tokens, max_new_tokens, std::nullopt, stop_token);
  g.adjusted_tokens = engine.model->generate(tokens, max_new_tokens, spec, stop_token);
  g.original = decode_lenient(*engine.tokenizer, g.original_tokens);
  g.adjusted = decode_lenient(*engine.tokenizer, g.adjusted_tokens);
  return g;
}

}  // namespace halo
