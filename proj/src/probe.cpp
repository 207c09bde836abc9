#include "halo/probe.hpp"

#include <algorithm>
#include <cmath>

#include "halo/error.hpp"
#include "halo/parallel.hpp"

namespace halo {

namespace {

bool is_prefix(const TokenSequence& prefix, const TokenSequence& full) {
  return prefix.size() <= full.size() && std::equal(prefix.begin(), prefix.end(), full.begin());
}

BranchInput build_branch(const QASample& sample, const std::string& prompt,
                         const std::string& answer, const ProbeOptions& options,
                         const Tokenizer& tokenizer, const char* branch) {
  std::string preface;
  if (options.include_knowledge) preface += *sample.knowledge + "\n";
  if (!prompt.empty()) preface += prompt + "\n";
  const std::string question = "Question: " + sample.question;
  const std::string cue = "\nAnswer:";
  const std::string anchor_text =
      preface + question + (options.anchor == AnchorPoint::answer_cue ? cue : "");

  BranchInput b;
  b.text = preface + question + cue + " " + answer;
  b.tokens = tokenizer.encode(b.text);

  const TokenSequence preface_tokens = tokenizer.encode(preface);
  const TokenSequence anchor_tokens = tokenizer.encode(anchor_text);
  if (!is_prefix(preface_tokens, b.tokens) || !is_prefix(anchor_tokens, b.tokens)) {
    throw DataError("sample '" + sample.id + "': tokenization of the " + branch +
                    " branch is not prefix-stable at the segment boundaries");
  }
  if (anchor_tokens.size() <= preface_tokens.size() || anchor_tokens.size() >= b.tokens.size()) {
    throw DataError("sample '" + sample.id + "': empty question or answer segment in the " +
                    branch + " branch");
  }
  b.question_start = static_cast<int>(preface_tokens.size());
  b.question_end = static_cast<int>(anchor_tokens.size()) - 1;
  return b;
}

}  // namespace

void QASample::validate() const {
  if (question.empty()) throw DataError("sample '" + id + "': empty question");
  if (correct_answer.empty()) throw DataError("sample '" + id + "': empty correct answer");
  if (hallucinated_answer.empty()) {
    throw DataError("sample '" + id + "': empty hallucinated answer");
  }
}

PromptKind parse_prompt_kind(std::string_view name) {
  if (name == "none") return PromptKind::none;
  if (name == "pro") return PromptKind::pro;
  if (name == "anti") return PromptKind::anti;
  throw UsageError("unknown prompt strategy '" + std::string(name) + "' (expected none, pro, anti)");
}

std::string_view to_string(PromptKind kind) {
  switch (kind) {
    case PromptKind::none:
      return "none";
    case PromptKind::pro:
      return "pro";
    case PromptKind::anti:
      return "anti";
  }
  return "none";
}

AnchorPoint parse_anchor(std::string_view name) {
  if (name == "answer_cue") return AnchorPoint::answer_cue;
  if (name == "question_end") return AnchorPoint::question_end;
  throw UsageError("unknown s1 anchor '" + std::string(name) +
                   "' (expected answer_cue, question_end)");
}

std::string_view to_string(AnchorPoint anchor) {
  return anchor == AnchorPoint::answer_cue ? "answer_cue" : "question_end";
}

std::string question_prompt(const QASample& sample, bool include_knowledge) {
  std::string text;
  if (include_knowledge) {
    if (!sample.knowledge || sample.knowledge->empty()) {
      throw DataError("sample '" + sample.id + "': knowledge requested but absent");
    }
    text += *sample.knowledge + "\n";
  }
  return text + "Question: " + sample.question + "\nAnswer:";
}

ProbeInputs build_inputs(const QASample& sample, const ProbeOptions& options,
                         const Tokenizer& tokenizer) {
  sample.validate();
  if (options.include_knowledge && (!sample.knowledge || sample.knowledge->empty())) {
    throw DataError("sample '" + sample.id + "': knowledge requested but absent");
  }
  std::string correct_prompt, halluc_prompt;
  switch (options.strategy.kind) {
    case PromptKind::none:
      break;
    case PromptKind::pro:
      correct_prompt = options.strategy.encouraging;
      halluc_prompt = options.strategy.discouraging;
      break;
    case PromptKind::anti:
      correct_prompt = options.strategy.discouraging;
      halluc_prompt = options.strategy.encouraging;
      break;
  }

  ProbeInputs in;
  in.sample_id = sample.id;
  in.hallucinated = build_branch(sample, halluc_prompt, sample.hallucinated_answer, options,
                                 tokenizer, "hallucinated");
  in.correct =
      build_branch(sample, correct_prompt, sample.correct_answer, options, tokenizer, "correct");

  const auto& h = in.hallucinated;
  const auto& c = in.correct;
  in.shared_prefix = h.question_end == c.question_end && h.question_start == c.question_start &&
                     std::equal(h.tokens.begin(), h.tokens.begin() + h.question_end + 1,
                                c.tokens.begin());
  if (options.strategy.kind == PromptKind::none && !in.shared_prefix) {
    throw DataError("sample '" + sample.id +
                    "': branches disagree on the shared question prefix");
  }
  return in;
}

double cosine_similarity(std::span<const float> a, std::span<const float> b) {
  if (a.size() != b.size()) throw UsageError("cosine similarity of vectors with different lengths");
  double ab = 0.0, aa = 0.0, bb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double x = a[i], y = b[i];
    ab += x * y;
    aa += x * x;
    bb += y * y;
  }
  if (aa == 0.0 || bb == 0.0) {
    throw ModelError("degenerate hidden state: zero-norm vector in cosine similarity");
  }
  return ab / (std::sqrt(aa) * std::sqrt(bb));
}

HiddenTriple extract_triple(const Model& model, const ProbeInputs& inputs) {
  const int last_layer = model.config().n_layers - 1;

  ForwardOptions halluc_opts;
  halluc_opts.logits = LogitsMode::none;
  halluc_opts.capture = {{last_layer, inputs.hallucinated.question_end},
                         {last_layer, inputs.hallucinated.last_position()}};
  const auto halluc = model.forward(inputs.hallucinated.tokens, halluc_opts);

  ForwardOptions correct_opts;
  correct_opts.logits = LogitsMode::none;
  correct_opts.capture = {{last_layer, inputs.correct.last_position()}};
  if (inputs.shared_prefix) correct_opts.capture.insert({last_layer, inputs.correct.question_end});
  const auto correct = model.forward(inputs.correct.tokens, correct_opts);

  HiddenTriple t;
  t.sample_id = inputs.sample_id;
  t.s1 = halluc.trace.at(last_layer, inputs.hallucinated.question_end);
  t.s2 = halluc.trace.at(last_layer, inputs.hallucinated.last_position());
  t.s3 = correct.trace.at(last_layer, inputs.correct.last_position());
  if (inputs.shared_prefix &&
      correct.trace.at(last_layer, inputs.correct.question_end).values != t.s1.values) {
    throw ModelError("sample '" + inputs.sample_id +
                     "': s1 differs between branches despite an identical prefix");
  }
  return t;
}

AwarenessRecord awareness(const HiddenTriple& triple) {
  AwarenessRecord r;
  r.sample_id = triple.sample_id;
  r.cos_halluc = cosine_similarity(triple.s1.values, triple.s2.values);
  r.cos_corr = cosine_similarity(triple.s1.values, triple.s3.values);
  r.awareness = r.cos_halluc - r.cos_corr;
  return r;
}

ProbeRun run_probe(const Engine& engine, std::span<const QASample> samples,
                   const ProbeOptions& options, int threads) {
  if (samples.empty()) throw DataError("probe: no samples given");
  const auto max_len = static_cast<std::size_t>(engine.config().max_seq_len);

  struct Slot {
    std::optional<HiddenTriple> triple;
    std::optional<AwarenessRecord> record;
    std::optional<SkipReport> skip;
  };
  std::vector<Slot> slots(samples.size());
  parallel_for(samples.size(), threads, [&](std::size_t i) {
    const ProbeInputs inputs = build_inputs(samples[i], options, *engine.tokenizer);
    const std::size_t len =
        std::max(inputs.hallucinated.tokens.size(), inputs.correct.tokens.size());
    if (len > max_len) {
      slots[i].skip = SkipReport{samples[i].id,
                                 "input length " + std::to_string(len) + " exceeds max_seq_len " +
                                     std::to_string(max_len),
                                 len};
      return;
    }
    slots[i].triple = extract_triple(*engine.model, inputs);
    slots[i].record = awareness(*slots[i].triple);
  });

  ProbeRun run;
  for (auto& s : slots) {
    if (s.skip) {
      run.skipped.push_back(std::move(*s.skip));
    } else {
      run.triples.push_back(std::move(*s.triple));
      run.records.push_back(std::move(*s.record));
    }
  }
  if (run.records.empty()) {
    throw DataError("probe: all " + std::to_string(samples.size()) +
                    " samples were skipped (inputs exceed max_seq_len)");
  }
  return run;
}

}  // namespace halo
