#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <thread>

#include "halo/error.hpp"
#include "halo/model.hpp"
#include "support.hpp"

using namespace halo;

namespace {

double max_abs_diff(std::span<const float> a, const std::vector<double>& b) {
  double m = 0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

double max_abs(const std::vector<double>& v) {
  double m = 0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

}  // namespace

TEST_SUITE("model") {

TEST_CASE("forward matches the double-precision reference decoder") {
  const Model& m = test::tiny_model();
  Rng rng(1);
  const auto tokens = test::random_tokens(rng, 19);
  ForwardOptions o;
  for (int l = 0; l < 4; ++l) o.capture.insert({l, 18});
  const auto r = m.forward(tokens, o);
  const auto ref = test::reference_forward(m.weights(), tokens);
  for (int p = 0; p < 19; ++p) {
    const auto& want = ref.logits[static_cast<std::size_t>(p)];
    CHECK(max_abs_diff(r.logits_row(p), want) <= 1e-4 * std::max(1.0, max_abs(want)));
  }
  for (int l = 0; l < 4; ++l) {
    const auto& want = ref.hidden[static_cast<std::size_t>(l)][18];
    CHECK(max_abs_diff(r.trace.at(l, 18).values, want) <= 1e-4 * std::max(1.0, max_abs(want)));
  }
}

TEST_CASE("blocked forward matches the reference with the edges removed") {
  const Model& m = test::tiny_model();
  Rng rng(2);
  const auto tokens = test::random_tokens(rng, 16);
  AttentionBlockSpec block{2, 15, {3, 4, 5, 6, 7}};
  ForwardOptions o;
  o.block = block;
  o.logits = LogitsMode::last;
  o.capture = {{3, 15}};
  const auto r = m.forward(tokens, o);
  const auto ref = test::reference_forward(m.weights(), tokens, block);
  const auto& want = ref.hidden[3][15];
  CHECK(max_abs_diff(r.trace.at(3, 15).values, want) <= 1e-4 * std::max(1.0, max_abs(want)));
}

TEST_CASE("forward is bitwise deterministic and threads agree") {
  const Model& m = test::tiny_model();
  Rng rng(3);
  const auto tokens = test::random_tokens(rng, 30);
  const auto a = m.forward(tokens);
  std::vector<ForwardResult> results(4);
  std::vector<std::jthread> pool;
  for (auto& r : results) pool.emplace_back([&] { r = m.forward(tokens); });
  pool.clear();
  for (const auto& r : results) CHECK(r.logits == a.logits);
}

TEST_CASE("logits modes select rows") {
  const Model& m = test::tiny_model();
  const TokenSequence tokens = {1, 2, 3, 4};
  ForwardOptions o;
  const auto all = m.forward(tokens, o);
  CHECK(all.logit_rows == 4);
  o.logits = LogitsMode::last;
  const auto last = m.forward(tokens, o);
  CHECK(last.logit_rows == 1);
  CHECK(std::ranges::equal(last.logits_row(0), all.logits_row(3)));
  o.logits = LogitsMode::none;
  CHECK(m.forward(tokens, o).logits.empty());
}

TEST_CASE("generation with the KV cache equals greedy recomputation") {
  const Model& m = test::tiny_model();
  Rng rng(4);
  for (int trial = 0; trial < 3; ++trial) {
    auto seq = test::random_tokens(rng, 5 + 3 * trial);
    const auto gen = m.generate(seq, 12);
    REQUIRE(gen.size() == 12);
    for (TokenId expected : gen) {
      ForwardOptions o;
      o.logits = LogitsMode::last;
      const auto r = m.forward(seq, o);
      const TokenId next = argmax_lowest(r.logits_row(0));
      CHECK(next == expected);
      seq.push_back(next);
    }
  }
}

TEST_CASE("stop token ends generation early") {
  const Model& m = test::tiny_model();
  const TokenSequence prompt = {10, 20, 30};
  const auto gen = m.generate(prompt, 8);
  const auto stopped = m.generate(prompt, 8, std::nullopt, gen[2]);
  const auto first = std::find(gen.begin(), gen.end(), gen[2]);
  CHECK(stopped == TokenSequence(gen.begin(), first));
}

TEST_CASE("argmax ties go to the lowest id") {
  const float logits[] = {0.5f, 2.0f, -1.0f, 2.0f};
  CHECK(argmax_lowest(logits) == 1);
}

TEST_CASE("attention maps are causal and normalised") {
  const Model& m = test::tiny_model();
  ForwardOptions o;
  o.capture_attention = true;
  o.logits = LogitsMode::none;
  const TokenSequence tokens = {5, 6, 7, 8, 9, 10};
  const auto r = m.forward(tokens, o);
  REQUIRE(r.attention.size() == 4);
  for (const auto& map : r.attention) {
    for (int h = 0; h < map.n_heads; ++h) {
      for (int q = 0; q < 6; ++q) {
        double s = 0;
        for (int k = 0; k < 6; ++k) {
          if (k > q) CHECK(map.weight(h, q, k) == 0.0f);
          s += map.weight(h, q, k);
        }
        CHECK(s == doctest::Approx(1.0).epsilon(1e-5));
      }
    }
  }
}

TEST_CASE("input validation") {
  const Model& m = test::tiny_model();
  CHECK_THROWS_AS(m.forward(TokenSequence{}), UsageError);
  CHECK_THROWS_AS(m.forward(TokenSequence{1, 300}), DataError);
  CHECK_THROWS_AS(m.forward(TokenSequence(513, 1)), DataError);
  ForwardOptions o;
  o.capture = {{4, 0}};
  CHECK_THROWS_AS(m.forward(TokenSequence{1, 2}, o), UsageError);
  ForwardOptions b;
  b.block = AttentionBlockSpec{0, 1, {1}};
  CHECK_THROWS_AS(m.forward(TokenSequence{1, 2}, b), UsageError);
  CHECK_THROWS_WITH_AS(m.generate(TokenSequence(500, 1), 13), doctest::Contains("context window"),
                       DataError);
  ForwardOptions s;
  s.steering = SteeringSpec{std::vector<float>(10, 0.0f), 1.0f};
  CHECK_THROWS_AS(m.forward(TokenSequence{1}, s), UsageError);
}

TEST_CASE("captured hidden states are the raw residual stream") {
  // The last-layer capture, passed through the final norm and unembedding by
  // hand, must reproduce the logits.
  const Model& m = test::tiny_model();
  const TokenSequence tokens = {72, 105, 33};
  ForwardOptions o;
  o.capture = {{3, 2}};
  o.logits = LogitsMode::last;
  const auto r = m.forward(tokens, o);
  const auto& x = r.trace.at(3, 2).values;
  double ss = 0;
  for (float v : x) ss += double(v) * v;
  const double inv = 1.0 / std::sqrt(ss / 64 + 1e-5);
  const auto g = m.weights().final_norm();
  for (int t = 0; t < 256; t += 17) {
    const auto row = m.weights().unembedding_row(t);
    double logit = 0;
    for (int i = 0; i < 64; ++i) logit += row[i] * x[i] * inv * g[i];
    CHECK(r.logits_row(0)[t] == doctest::Approx(logit).epsilon(1e-4));
  }
}

}  // TEST_SUITE
