#include <doctest.h>

#include "halo/error.hpp"
#include "halo/probe.hpp"
#include "support.hpp"

using namespace halo;

namespace {

QASample sample(const std::string& id = "s1") {
  return {id, "What is the capital of France?", "Paris", "Lyon", "Paris is in France.", true};
}

Engine tiny_engine() {
  Engine e;
  e.model = std::shared_ptr<const Model>(&test::tiny_model(), [](const Model*) {});
  e.tokenizer = load_tokenizer(std::nullopt);
  return e;
}

}  // namespace

TEST_SUITE("probe") {

TEST_CASE("branch layout and segment indices") {
  ByteTokenizer tok;
  const auto in = build_inputs(sample(), {}, tok);
  CHECK(in.hallucinated.text == "Question: What is the capital of France?\nAnswer: Lyon");
  CHECK(in.correct.text == "Question: What is the capital of France?\nAnswer: Paris");
  CHECK(in.shared_prefix);
  CHECK(in.hallucinated.question_start == 0);
  // The anchor is the ':' of "Answer:".
  const std::string prefix = "Question: What is the capital of France?\nAnswer:";
  CHECK(in.question_end_index() == static_cast<int>(prefix.size()) - 1);

  ProbeOptions q;
  q.anchor = AnchorPoint::question_end;
  const auto in2 = build_inputs(sample(), q, tok);
  CHECK(in2.question_end_index() ==
        static_cast<int>(std::string("Question: What is the capital of France?").size()) - 1);
}

TEST_CASE("knowledge and prompt prefixes shift the question segment") {
  ByteTokenizer tok;
  ProbeOptions o;
  o.include_knowledge = true;
  o.strategy.kind = PromptKind::pro;
  const auto in = build_inputs(sample(), o, tok);
  const std::string k = "Paris is in France.\n";
  CHECK(in.correct.text.rfind(k + std::string(kEncouragingPrompt) + "\nQuestion:", 0) == 0);
  CHECK(in.hallucinated.text.rfind(k + std::string(kDiscouragingPrompt) + "\nQuestion:", 0) == 0);
  CHECK(in.correct.question_start == static_cast<int>(k.size() + kEncouragingPrompt.size() + 1));
  CHECK(in.hallucinated.question_start ==
        static_cast<int>(k.size() + kDiscouragingPrompt.size() + 1));
  CHECK_FALSE(in.shared_prefix);

  o.strategy.kind = PromptKind::anti;
  const auto anti = build_inputs(sample(), o, tok);
  CHECK(anti.correct.text.find(kDiscouragingPrompt) != std::string::npos);
  CHECK(anti.hallucinated.text.find(kEncouragingPrompt) != std::string::npos);
}

TEST_CASE("invalid samples are rejected") {
  ByteTokenizer tok;
  auto s = sample();
  s.correct_answer.clear();
  CHECK_THROWS_AS(build_inputs(s, {}, tok), DataError);
  auto k = sample();
  k.knowledge.reset();
  ProbeOptions o;
  o.include_knowledge = true;
  CHECK_THROWS_WITH_AS(build_inputs(k, o, tok), doctest::Contains("knowledge"), DataError);
}

TEST_CASE("s1 is bitwise identical across branches") {
  const Model& m = test::tiny_model();
  ByteTokenizer tok;
  const auto in = build_inputs(sample(), {}, tok);
  ForwardOptions o;
  o.logits = LogitsMode::none;
  o.capture = {{3, in.question_end_index()}};
  const auto a = m.forward(in.hallucinated.tokens, o);
  const auto b = m.forward(in.correct.tokens, o);
  CHECK(a.trace.at(3, in.question_end_index()).values ==
        b.trace.at(3, in.question_end_index()).values);
  const auto t = extract_triple(m, in);
  CHECK(t.s1.values == a.trace.at(3, in.question_end_index()).values);
  CHECK(t.s2.position == in.hallucinated.last_position());
  CHECK(t.s3.position == in.correct.last_position());
}

TEST_CASE("cosine similarity and awareness algebra") {
  const float a[] = {1, 0, 0}, b[] = {0, 1, 0}, c[] = {2, 0, 0}, z[] = {0, 0, 0};
  CHECK(cosine_similarity(a, b) == 0.0);
  CHECK(cosine_similarity(a, c) == 1.0);
  CHECK_THROWS_AS(cosine_similarity(a, z), ModelError);

  HiddenTriple t{"x", {{1, 2, 3}, 3, 0}, {{3, 1, 2}, 3, 1}, {{-1, 4, 0.5f}, 3, 2}};
  const auto r = awareness(t);
  CHECK(r.awareness == r.cos_halluc - r.cos_corr);
  std::swap(t.s2, t.s3);
  CHECK(awareness(t).awareness == -r.awareness);
  t.s3 = t.s2;
  CHECK(awareness(t).awareness == 0.0);
}

TEST_CASE("run_probe skips inputs longer than the context window") {
  const auto e = tiny_engine();
  std::vector<QASample> samples = {sample("short"), sample("long")};
  samples[1].question = std::string(600, 'x') + "?";
  const auto run = run_probe(e, samples, {});
  REQUIRE(run.records.size() == 1);
  CHECK(run.records[0].sample_id == "short");
  REQUIRE(run.skipped.size() == 1);
  CHECK(run.skipped[0].sample_id == "long");
  CHECK(run.skipped[0].length > 512);
  CHECK_THROWS_AS(run_probe(e, std::span(samples).subspan(1), {}), DataError);
}

TEST_CASE("run_probe is independent of the thread count") {
  const auto e = tiny_engine();
  std::vector<QASample> samples;
  for (int i = 0; i < 9; ++i) {
    auto s = sample("s" + std::to_string(i));
    s.question += std::string(static_cast<std::size_t>(i), '!');
    samples.push_back(s);
  }
  const auto a = run_probe(e, samples, {}, 1);
  const auto b = run_probe(e, samples, {}, 4);
  REQUIRE(a.records.size() == b.records.size());
  for (std::size_t i = 0; i < a.records.size(); ++i) {
    CHECK(a.records[i].sample_id == b.records[i].sample_id);
    CHECK(a.records[i].awareness == b.records[i].awareness);
  }
}

}  // TEST_SUITE
