#include <doctest.h>

#include "halo/error.hpp"
#include "halo/intervention.hpp"
#include "support.hpp"

using namespace halo;

namespace {

ProbeInputs inputs(const std::string& q, const std::string& id = "s") {
  ByteTokenizer tok;
  return build_inputs({id, q, "Paris", "Rome", std::nullopt, std::nullopt}, {}, tok);
}

}  // namespace

TEST_SUITE("intervention") {

TEST_CASE("question block covers the question segment from the last token") {
  const auto in = inputs("Where?");
  const auto b = question_block(in.correct, 2);
  CHECK(b.layer_threshold == 2);
  CHECK(b.query_position == in.correct.last_position());
  CHECK(b.key_positions.front() == in.correct.question_start);
  CHECK(b.key_positions.back() == in.correct.question_end);
}

TEST_CASE("threshold n_layers is a no-op and threshold 0 has an effect") {
  const Model& m = test::tiny_model();
  const auto in = inputs("What is the capital of France?");
  const auto none = effect_size(m, in, 4);
  CHECK(none.e_halluc == 0.0);
  CHECK(none.e_corr == 0.0);
  const auto all = effect_size(m, in, 0);
  CHECK(all.e_halluc > 0.0);
  CHECK(all.e_corr > 0.0);
  CHECK(all.difference == all.e_corr - all.e_halluc);
  CHECK_THROWS_AS(effect_size(m, in, 5), UsageError);
  CHECK_THROWS_AS(effect_size(m, in, -1), UsageError);
}

TEST_CASE("layer sweep aggregates per threshold") {
  const Model& m = test::tiny_model();
  std::vector<ProbeInputs> in = {inputs("Who?", "a"), inputs("When was it?", "b"),
                                 inputs("Why not?", "c")};
  const int th[] = {0, 2, 4};
  const auto r = layer_sweep(m, in, th, 2);
  REQUIRE(r.points.size() == 3);
  REQUIRE(r.records.size() == 9);
  double mean = 0;
  for (int s = 0; s < 3; ++s) mean += r.records[static_cast<std::size_t>(s * 3)].difference;
  CHECK(r.points[0].mean_diff == doctest::Approx(mean / 3).epsilon(1e-12));
  CHECK(r.points[2].mean_diff == 0.0);
  CHECK(r.points[2].ci_halfwidth == 0.0);
  CHECK(r.points[0].n == 3);
  const auto single = effect_size(m, in[1], 2);
  CHECK(r.records[4].difference == single.difference);

  const int bad[] = {2, 2};
  CHECK_THROWS_AS(layer_sweep(m, in, bad), UsageError);
  CHECK_THROWS_AS(layer_sweep(m, std::span<const ProbeInputs>(), th), DataError);
}

TEST_CASE("steering logit shift is alpha times U d") {
  const Model& m = test::tiny_model();
  Rng rng(5);
  const auto tokens = test::random_tokens(rng, 9);
  std::vector<float> d(64);
  for (auto& x : d) x = static_cast<float>(rng.normal() / 8.0);
  ForwardOptions plain;
  plain.logits = LogitsMode::last;
  ForwardOptions steered = plain;
  steered.steering = SteeringSpec{d, 3.0f};
  const auto a = m.forward(tokens, plain);
  const auto b = m.forward(tokens, steered);
  for (int t = 0; t < 256; ++t) {
    const auto row = m.weights().unembedding_row(t);
    double ud = 0;
    for (int i = 0; i < 64; ++i) ud += double(row[i]) * d[i];
    CHECK(b.logits_row(0)[t] - a.logits_row(0)[t] == doctest::Approx(3.0 * ud).epsilon(1e-4));
  }
}

TEST_CASE("steer_generate with alpha 0 reproduces greedy output") {
  Engine e;
  e.model = std::shared_ptr<const Model>(&test::tiny_model(), [](const Model*) {});
  e.tokenizer = load_tokenizer(std::nullopt);
  std::vector<double> d(64, 0.125);
  const auto g = steer_generate(e, "Question: Who?\nAnswer:", d, 0.0f, 6);
  CHECK(g.original_tokens == g.adjusted_tokens);
  CHECK(g.original == g.adjusted);
  CHECK(g.original_tokens.size() == 6);
  CHECK_THROWS_AS(steer_generate(e, "x", std::vector<double>(3), 1.0f, 2), UsageError);
}

}  // TEST_SUITE
