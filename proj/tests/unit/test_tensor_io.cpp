#include <doctest.h>

#include <cstring>
#include <limits>

#include "halo/config.hpp"
#include "halo/error.hpp"
#include "halo/synthetic.hpp"
#include "halo/tensor_io.hpp"
#include "halo/weights.hpp"
#include "support.hpp"

using namespace halo;

TEST_SUITE("tensor_io") {

TEST_CASE("half conversion of known bit patterns") {
  CHECK(float_to_half(1.0f) == 0x3C00);
  CHECK(float_to_half(-2.0f) == 0xC000);
  CHECK(float_to_half(65504.0f) == 0x7BFF);
  CHECK(float_to_half(0x1.0p-24f) == 0x0001);   // smallest subnormal
  CHECK(float_to_half(0x1.0p-14f) == 0x0400);   // smallest normal
  CHECK(float_to_half(1.0f + 0x1.0p-11f) == 0x3C00);        // tie, even stays
  CHECK(float_to_half(1.0f + 3 * 0x1.0p-11f) == 0x3C02);    // tie, rounds to even
  CHECK(float_to_half(70000.0f) == 0x7C00);                 // overflow to inf
  CHECK(half_to_float(0x3555) == 0.333251953125f);
  CHECK(std::isnan(half_to_float(float_to_half(std::numeric_limits<float>::quiet_NaN()))));
}

TEST_CASE("every finite half survives a round trip through float") {
  for (std::uint32_t h = 0; h < 0x10000; ++h) {
    const auto bits = static_cast<std::uint16_t>(h);
    if ((bits & 0x7C00) == 0x7C00) continue;  // inf / nan
    REQUIRE(float_to_half(half_to_float(bits)) == bits);
  }
}

TEST_CASE("f32 bundle round trip is bitwise") {
  TensorMap t;
  t.emplace("a", Tensor({2, 3}, {1.5f, -2.25f, 3e-8f, 0.0f, -0.0f, 1e30f}));
  t.emplace("b.c", Tensor({1}, {42.0f}));
  const auto bytes = encode_bundle(t);
  CHECK(std::memcmp(bytes.data(), kBundleMagic, 8) == 0);
  const auto back = decode_bundle(bytes, "mem");
  REQUIRE(back.size() == 2);
  CHECK(back.at("a").shape == std::vector<std::int64_t>{2, 3});
  CHECK(std::memcmp(back.at("a").data.data(), t.at("a").data.data(), 6 * 4) == 0);
  CHECK(back.at("b.c").data[0] == 42.0f);
}

TEST_CASE("f16 bundle stores rounded values") {
  TensorMap t;
  t.emplace("x", Tensor({3}, {1.0f, 0.1f, -3.0f}));
  const auto back = decode_bundle(encode_bundle(t, DType::f16), "mem");
  CHECK(back.at("x").data[0] == 1.0f);
  CHECK(back.at("x").data[1] == half_to_float(float_to_half(0.1f)));
  CHECK(back.at("x").data[2] == -3.0f);
}

TEST_CASE("malformed bundles are rejected with a reason") {
  CHECK_THROWS_AS(decode_bundle("not a bundle at all", "mem"), ModelError);
  TensorMap t;
  t.emplace("weights", Tensor({4}, {1, 2, 3, 4}));
  auto bytes = encode_bundle(t);
  auto truncated = bytes.substr(0, bytes.size() - 4);
  try {
    decode_bundle(truncated, "mem");
    FAIL("expected an error");
  } catch (const ModelError& e) {
    CHECK(std::string(e.what()).find("weights") != std::string::npos);
  }
  auto bad = bytes;
  const auto pos = bad.find("\"f32\"");
  REQUIRE(pos != std::string::npos);
  bad.replace(pos, 5, "\"i32\"");
  CHECK_THROWS_WITH_AS(decode_bundle(bad, "mem"), doctest::Contains("unsupported dtype"), ModelError);
}

TEST_CASE("model config JSON round trip and validation") {
  const auto c = tiny_config();
  CHECK(config_from_json(to_json(c)) == c);
  auto j = to_json(c);
  j["extra"] = 1;
  CHECK_THROWS_AS(config_from_json(j), ModelError);
  auto bad = c;
  bad.head_dim = 15;
  CHECK_THROWS_AS(bad.validate(), ModelError);
}

TEST_CASE("weight store names missing and non-finite tensors") {
  const auto c = tiny_config(2, 16, 2, 32, 32, 64);
  auto tensors = random_weights(c, 1);
  {
    auto missing = tensors;
    missing.erase(layer_tensor_name(1, "feed_forward.w2"));
    CHECK_THROWS_WITH_AS(WeightStore(c, std::move(missing)),
                         doctest::Contains("layers.1.feed_forward.w2"), ModelError);
  }
  {
    auto nan = tensors;
    nan.at("norm").data[3] = std::numeric_limits<float>::quiet_NaN();
    CHECK_THROWS_WITH_AS(WeightStore(c, std::move(nan)), doctest::Contains("norm"), ModelError);
  }
  {
    auto shape = tensors;
    shape.at("output").shape = {16, 32};
    CHECK_THROWS_WITH_AS(WeightStore(c, std::move(shape)), doctest::Contains("output"), ModelError);
  }
}

TEST_CASE("model directory round trip and missing weights") {
  test::TempDir dir;
  const auto c = tiny_config(2, 16, 2, 32, 32, 64);
  save_model(dir.path(), c, random_weights(c, 5));
  const Model m = Model::load_dir(dir.path());
  CHECK(m.config() == c);
  std::filesystem::remove(dir / kModelWeightsFile);
  CHECK_THROWS_WITH_AS(Model::load_dir(dir.path()), doctest::Contains("weights.halo"), ModelError);
}

TEST_CASE("random weights are reproducible from the seed") {
  const auto c = tiny_config(1, 8, 2, 16, 8, 16);
  const auto a = random_weights(c, 9), b = random_weights(c, 9), d = random_weights(c, 10);
  CHECK(a.at("output").data == b.at("output").data);
  CHECK(a.at("output").data != d.at("output").data);
}

}  // TEST_SUITE
