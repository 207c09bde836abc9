#include <doctest.h>

#include <fstream>
#include <sstream>

#include "halo/error.hpp"
#include "halo/experiment.hpp"
#include "halo/report.hpp"
#include "support.hpp"

using namespace halo;
using nlohmann::json;

TEST_SUITE("experiment") {

TEST_CASE("config round-trips through JSON") {
  ExperimentConfig c;
  c.model = "m";
  c.tokenizer = "tok.json";
  c.dataset = "d.jsonl";
  c.category = "adversarial";
  c.sample_n = 12;
  c.seed = 99;
  c.strategy = "anti";
  c.knowledge = true;
  c.alpha = 2.5;
  c.thresholds = std::vector<int>{0, 2, 4};
  c.out = "o";
  c.k = 3;
  c.directions = "dirs.halo";
  c.steer_direction = "hallucinated";
  c.prompt = "hi";
  c.max_new_tokens = 5;
  c.stop_token = 2;
  c.threads = 4;
  const json j = to_json(c);
  CHECK(j["sample-n"] == 12);
  CHECK(j["max-new-tokens"] == 5);
  CHECK(experiment_from_json(j) == c);
  CHECK(experiment_from_json(json::parse(j.dump())) == c);
  CHECK(experiment_from_json(to_json(ExperimentConfig{})) == ExperimentConfig{});
}

TEST_CASE("config rejects unknown keys and wrong types") {
  CHECK_THROWS_AS(experiment_from_json(json{{"modle", "x"}}), UsageError);
  CHECK_THROWS_AS(experiment_from_json(json{{"seed", "x"}}), UsageError);
  CHECK_THROWS_AS(experiment_from_json(json{{"thresholds", {1, "2"}}}), UsageError);
  CHECK_THROWS_AS(experiment_from_json(json::array()), UsageError);
  const auto partial = experiment_from_json(json{{"alpha", 7}});
  CHECK(partial.alpha == 7.0);
  CHECK(partial.k == 10);
}

TEST_CASE("load_experiment reads a file") {
  test::TempDir dir;
  {
    std::ofstream f(dir / "c.json");
    f << R"({"model": "m", "sample-n": 3})";
  }
  const auto c = load_experiment(dir / "c.json");
  CHECK(c.model == "m");
  CHECK(c.sample_n == 3u);
  CHECK_THROWS_AS(load_experiment(dir / "nope.json"), UsageError);
}

TEST_CASE("real formatting round-trips") {
  for (double v : {0.1, -1.0 / 3.0, 1e-300, 6.02214076e23, 0.0}) {
    CHECK(std::stod(report::format_real(v)) == v);
  }
  CHECK(report::format_real(std::nan("")) == "nan");
  CHECK(report::csv_escape("plain") == "plain");
  CHECK(report::csv_escape("a,\"b\"") == "\"a,\"\"b\"\"\"");
}

TEST_CASE("CSV report schemas") {
  const std::vector<AwarenessRecord> aw = {{"s,1", 0.5, 0.25, 0.25}, {"s2", 0.1, 0.2, -0.1}};
  const auto csv = report::awareness_csv(aw, "pro", true);
  CHECK(csv.rfind("sample_id,cos_halluc,cos_corr,awareness,strategy,knowledge_included\n"
                  "\"s,1\",0.5,0.25,0.25,pro,true\n",
                  0) == 0);

  const std::vector<ProjectionRecord> pr = {{"s2", 1.5f, -0.5f}};
  CHECK(report::projection_csv(pr, aw) == "sample_id,p_h,p_c,awareness\ns2,1.5,-0.5,-0.10000000000000001\n");
  const std::vector<ProjectionRecord> orphan = {{"zz", 1.0f, 1.0f}};
  CHECK_THROWS_AS(report::projection_csv(orphan, aw), DataError);

  const std::vector<VocabEntry> c = {{7, "a", 2.0}}, h = {{9, "b", 1.0}};
  CHECK(report::top_tokens_csv(c, h) ==
        "direction,rank,token_id,token,score\ncorrect,1,7,a,2\nhallucinated,1,9,b,1\n");

  const std::vector<SweepPoint> sw = {{5, 0.5, 0.25, 20}};
  CHECK(report::sweep_csv(sw) == "layer_threshold,mean_diff,ci_halfwidth,n\n5,0.5,0.25,20\n");
  const std::vector<EffectSizeRecord> es = {{"x", 5, 1.0, 3.0, 2.0}};
  CHECK(report::effect_sizes_csv(es) ==
        "sample_id,layer_threshold,e_halluc,e_corr,difference\nx,5,1,3,2\n");
}

TEST_CASE("JSON report schemas") {
  const std::vector<double> v = {0.1, 0.2, 0.3, 0.4};
  const auto t = report::ttest_json("awareness_score", stats::one_tailed_ttest_greater(v));
  for (const char* key : {"statistic", "value", "t", "p", "df", "stars"}) CHECK(t.contains(key));
  CHECK(t["stars"] == "**");

  const std::vector<double> x = {1, 2, 3, 4, 5}, y = {1.1, 1.9, 3.2, 3.9, 5.1};
  const auto r = report::regression_json("p_h", "awareness_score", stats::ols_simple(x, y));
  REQUIRE(r["coefficients"].size() == 2);
  CHECK(r["coefficients"][0]["name"] == "awareness_score");
  CHECK(r["coefficients"][1]["name"] == "const");
  CHECK(r["observations"] == 5);
  CHECK(r["f_df"] == json::array({1, 3}));
  for (const char* key : {"r_squared", "adjusted_r_squared", "residual_std_error", "f_statistic", "f_p"}) {
    CHECK(r[key].is_number());
  }

  const std::vector<SkipReport> sk = {{"a", "too long", 900}};
  const auto s = report::skipped_json(sk);
  CHECK(s["count"] == 1);
  CHECK(s["skipped"][0]["length"] == 900);

  const std::vector<report::SteeringLine> lines = {{"p", "q", "o", "a\xff", "t"}};
  const auto jl = report::steering_jsonl(lines);
  CHECK(jl.back() == '\n');
  const auto parsed = json::parse(jl);
  CHECK(parsed["adjusted"] == "a\xEF\xBF\xBD");
  CHECK(report::dump(json{{"x", std::nan("")}}).find("null") != std::string::npos);
}

TEST_CASE("atomic_write replaces the file and leaves no temporary") {
  test::TempDir dir;
  const auto p = dir / "out.txt";
  report::atomic_write(p, "first");
  report::atomic_write(p, "second");
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  CHECK(ss.str() == "second");
  CHECK_FALSE(std::filesystem::exists(dir / "out.txt.tmp"));
  CHECK_THROWS_AS(report::atomic_write(dir / "no" / "such" / "dir.txt", "x"), DataError);
}

TEST_CASE("exit codes by error class") {
  CHECK(exit_code_for(UsageError("u")) == 1);
  CHECK(exit_code_for(DataError("d")) == 2);
  CHECK(exit_code_for(ModelError("m")) == 3);
  CHECK(exit_code_for(std::runtime_error("x")) == 3);
}

TEST_CASE("selfcheck passes") {
  std::ostringstream out;
  CHECK(cmd_selfcheck(out));
  CHECK(out.str().find("FAIL") == std::string::npos);
}

}  // TEST_SUITE
