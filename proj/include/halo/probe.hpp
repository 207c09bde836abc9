#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "halo/model.hpp"
#include "halo/tokenizer.hpp"

namespace halo {

struct QASample {
  std::string id;
  std::string question;
  std::string correct_answer;
  std::string hallucinated_answer;
  std::optional<std::string> knowledge;
  std::optional<bool> adversarial;

  // Throws DataError when question or either answer is empty.
  void validate() const;
};

enum class PromptKind { none, pro, anti };

inline constexpr std::string_view kEncouragingPrompt =
    "You excel in answering the following question with expertise";
inline constexpr std::string_view kDiscouragingPrompt =
    "You have limited expertise in answering the following question";

// pro: encouraging text on the correct branch, discouraging on the
// hallucinated one. anti: the reverse. none: no prompt line at all.
struct PromptStrategy {
  PromptKind kind = PromptKind::none;
  std::string encouraging{kEncouragingPrompt};
  std::string discouraging{kDiscouragingPrompt};
};

PromptKind parse_prompt_kind(std::string_view name);
std::string_view to_string(PromptKind kind);

// Where s1 is read: the last token of the "Answer:" cue (default), or the
// last token of the question text itself.
enum class AnchorPoint { answer_cue, question_end };

AnchorPoint parse_anchor(std::string_view name);
std::string_view to_string(AnchorPoint anchor);

struct ProbeOptions {
  PromptStrategy strategy;
  bool include_knowledge = false;
  AnchorPoint anchor = AnchorPoint::answer_cue;
};

// One tokenised branch laid out as
//   [{knowledge}\n][{prompt}\n]Question: {question}\nAnswer: {answer}
// question_start is the first token of "Question:", question_end the s1
// anchor. Both index into tokens.
struct BranchInput {
  std::string text;
  TokenSequence tokens;
  int question_start = 0;
  int question_end = 0;

  int last_position() const { return static_cast<int>(tokens.size()) - 1; }
};

struct ProbeInputs {
  std::string sample_id;
  BranchInput hallucinated;
  BranchInput correct;
  // True when both branches carry identical tokens through question_end
  // (always the case for PromptKind::none).
  bool shared_prefix = false;

  int question_end_index() const { return hallucinated.question_end; }
};

// The question part of the template, ending with the "Answer:" cue; used
// as the generation prompt for steering.
std::string question_prompt(const QASample& sample, bool include_knowledge);

ProbeInputs build_inputs(const QASample& sample, const ProbeOptions& options,
                         const Tokenizer& tokenizer);

// s1 and s2 come from the hallucinated branch, s3 from the correct branch,
// all from the last layer.
struct HiddenTriple {
  std::string sample_id;
  HiddenState s1;
  HiddenState s2;
  HiddenState s3;
};

HiddenTriple extract_triple(const Model& model, const ProbeInputs& inputs);

struct AwarenessRecord {
  std::string sample_id;
  double cos_halluc = 0.0;
  double cos_corr = 0.0;
  double awareness = 0.0;  // cos_halluc - cos_corr
};

// Cosine in double precision. A zero-norm argument throws ModelError.
double cosine_similarity(std::span<const float> a, std::span<const float> b);

AwarenessRecord awareness(const HiddenTriple& triple);

struct SkipReport {
  std::string sample_id;
  std::string reason;
  std::size_t length = 0;
};

struct ProbeRun {
  std::vector<AwarenessRecord> records;
  std::vector<HiddenTriple> triples;
  std::vector<SkipReport> skipped;
};

// Samples whose branches exceed max_seq_len are skipped and reported. If all
// samples are skipped, throws DataError.
ProbeRun run_probe(const Engine& engine, std::span<const QASample> samples,
                   const ProbeOptions& options, int threads = 1);

}  // namespace halo
