#include "halo/experiment.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include "halo/datasets.hpp"
#include "halo/directions.hpp"
#include "halo/error.hpp"
#include "halo/intervention.hpp"
#include "halo/model.hpp"
#include "halo/parallel.hpp"
#include "halo/probe.hpp"
#include "halo/report.hpp"
#include "halo/selfcheck.hpp"
#include "halo/stats.hpp"

namespace halo {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

const std::set<std::string> kKeys = {
    "model",  "tokenizer",       "dataset", "format",     "category",       "sample-n",
    "seed",   "incorrect-column", "strategy", "knowledge", "anchor",         "alpha",
    "thresholds", "out",         "k",       "directions", "steer-direction", "prompt",
    "max-new-tokens", "stop-token", "threads"};

template <typename T>
json opt(const std::optional<T>& v) {
  if (v) return *v;
  return nullptr;
}

template <typename T>
void read_key(const json& j, const char* key, T& dst) {
  auto it = j.find(key);
  if (it == j.end()) return;
  try {
    if constexpr (std::is_same_v<T, std::string>) {
      if (!it->is_string()) throw UsageError("");
    } else if constexpr (std::is_same_v<T, bool>) {
      if (!it->is_boolean()) throw UsageError("");
    } else if constexpr (std::is_integral_v<T>) {
      if (!it->is_number_integer()) throw UsageError("");
      if constexpr (std::is_unsigned_v<T>) {
        if (!it->is_number_unsigned()) throw UsageError("");
      }
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!it->is_number()) throw UsageError("");
    }
    dst = it->get<T>();
  } catch (const std::exception&) {
    throw UsageError(std::string("config key '") + key + "' has the wrong type");
  }
}

template <typename T>
void read_optional(const json& j, const char* key, std::optional<T>& dst) {
  auto it = j.find(key);
  if (it == j.end()) return;
  if (it->is_null()) {
    dst.reset();
    return;
  }
  T v{};
  read_key(j, key, v);
  dst = std::move(v);
}

struct Prepared {
  fs::path out;
  ProbeOptions probe;
};

Prepared prepare(const ExperimentConfig& c) {
  if (c.out.empty()) throw UsageError("an output directory is required (--out)");
  if (c.threads < 1) throw UsageError("--threads must be >= 1");
  Prepared p;
  p.probe.strategy.kind = parse_prompt_kind(c.strategy);
  p.probe.include_knowledge = c.knowledge;
  p.probe.anchor = parse_anchor(c.anchor);
  p.out = c.out;
  return p;
}

Engine open_engine(const ExperimentConfig& c) {
  if (c.model.empty()) throw UsageError("a model directory is required (--model)");
  if (!fs::is_directory(c.model)) throw ModelError("model directory not found: " + c.model);
  std::optional<fs::path> tok;
  if (c.tokenizer) tok = *c.tokenizer;
  return load_engine(c.model, tok);
}

std::vector<QASample> open_dataset(const ExperimentConfig& c, std::ostream& log) {
  if (c.dataset.empty()) throw UsageError("a dataset file is required (--dataset)");
  DatasetSpec spec;
  spec.path = c.dataset;
  spec.format = parse_dataset_format(c.format);
  if (c.category) spec.category_filter = parse_category(*c.category);
  if (c.sample_n) spec.sample_n = static_cast<std::size_t>(*c.sample_n);
  spec.seed = c.seed;
  spec.incorrect_column = c.incorrect_column;
  auto loaded = load_dataset(spec);
  for (const auto& r : loaded.rejected) {
    log << "dataset: rejected line " << r.line << ": " << r.reason << '\n';
  }
  if (loaded.samples.empty()) throw DataError("dataset has no usable samples: " + c.dataset);
  log << "dataset: " << loaded.samples.size() << " samples";
  if (!loaded.rejected.empty()) log << " (" << loaded.rejected.size() << " rejected)";
  log << '\n';
  return std::move(loaded.samples);
}

void begin_output(const Prepared& p) {
  std::error_code ec;
  fs::create_directories(p.out, ec);
  if (ec || !fs::is_directory(p.out)) {
    throw UsageError("cannot create output directory: " + p.out.string());
  }
}

void write(const Prepared& p, const char* name, std::string_view contents) {
  report::atomic_write(p.out / name, contents);
}

void finish(const Prepared& p, const ExperimentConfig& c) {
  write(p, "config.json", report::dump(to_json(c)));
}

std::vector<double> awareness_values(const ProbeRun& run) {
  std::vector<double> v;
  v.reserve(run.records.size());
  for (const auto& r : run.records) v.push_back(r.awareness);
  return v;
}

}  // namespace

json to_json(const ExperimentConfig& c) {
  return {{"model", c.model},
          {"tokenizer", opt(c.tokenizer)},
          {"dataset", c.dataset},
          {"format", c.format},
          {"category", opt(c.category)},
          {"sample-n", opt(c.sample_n)},
          {"seed", c.seed},
          {"incorrect-column", c.incorrect_column},
          {"strategy", c.strategy},
          {"knowledge", c.knowledge},
          {"anchor", c.anchor},
          {"alpha", c.alpha},
          {"thresholds", opt(c.thresholds)},
          {"out", c.out},
          {"k", c.k},
          {"directions", opt(c.directions)},
          {"steer-direction", c.steer_direction},
          {"prompt", opt(c.prompt)},
          {"max-new-tokens", c.max_new_tokens},
          {"stop-token", opt(c.stop_token)},
          {"threads", c.threads}};
}

ExperimentConfig experiment_from_json(const json& j) {
  if (!j.is_object()) throw UsageError("experiment config must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (!kKeys.count(key)) throw UsageError("unknown config key '" + key + "'");
  }
  ExperimentConfig c;
  read_key(j, "model", c.model);
  read_optional(j, "tokenizer", c.tokenizer);
  read_key(j, "dataset", c.dataset);
  read_key(j, "format", c.format);
  read_optional(j, "category", c.category);
  read_optional(j, "sample-n", c.sample_n);
  read_key(j, "seed", c.seed);
  read_key(j, "incorrect-column", c.incorrect_column);
  read_key(j, "strategy", c.strategy);
  read_key(j, "knowledge", c.knowledge);
  read_key(j, "anchor", c.anchor);
  read_key(j, "alpha", c.alpha);
  if (auto it = j.find("thresholds"); it != j.end() && !it->is_null()) {
    if (!it->is_array()) throw UsageError("config key 'thresholds' must be an array of integers");
    std::vector<int> t;
    for (const auto& v : *it) {
      if (!v.is_number_integer()) {
        throw UsageError("config key 'thresholds' must be an array of integers");
      }
      t.push_back(v.get<int>());
    }
    c.thresholds = std::move(t);
  }
  read_key(j, "out", c.out);
  read_key(j, "k", c.k);
  read_optional(j, "directions", c.directions);
  read_key(j, "steer-direction", c.steer_direction);
  read_optional(j, "prompt", c.prompt);
  read_key(j, "max-new-tokens", c.max_new_tokens);
  read_optional(j, "stop-token", c.stop_token);
  read_key(j, "threads", c.threads);
  return c;
}

ExperimentConfig load_experiment(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open config file: " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw UsageError("cannot parse config file " + path.string() + ": " + e.what());
  }
  return experiment_from_json(j);
}

void cmd_probe(const ExperimentConfig& c, std::ostream& log) {
  const Prepared p = prepare(c);
  const Engine engine = open_engine(c);
  const auto samples = open_dataset(c, log);
  const ProbeRun run = run_probe(engine, samples, p.probe, c.threads);

  const auto values = awareness_values(run);
  const auto test = stats::one_tailed_ttest_greater(values);
  json tj = report::ttest_json("awareness_score", test);
  tj["n"] = test.n;
  if (values.size() >= 8) {
    const auto screen = stats::normality_screen(values);
    tj["normality"] = {{"skewness", screen.skewness},
                       {"excess_kurtosis", screen.excess_kurtosis},
                       {"pass", screen.pass}};
  } else {
    tj["normality"] = nullptr;
  }
  log << "probe: " << run.records.size() << " scored, " << run.skipped.size()
      << " skipped, mean awareness " << report::format_real(test.mean) << ", t "
      << report::format_real(test.t_statistic) << ", p " << report::format_real(test.p_value)
      << '\n';

  begin_output(p);
  write(p, "awareness.csv", report::awareness_csv(run.records, c.strategy, c.knowledge));
  write(p, "ttest.json", report::dump(tj));
  write(p, "skipped.json", report::dump(report::skipped_json(run.skipped)));
  finish(p, c);
}

void cmd_directions(const ExperimentConfig& c, std::ostream& log) {
  const Prepared p = prepare(c);
  if (c.k < 1) throw UsageError("--k must be >= 1");
  const Engine engine = open_engine(c);
  if (c.k > engine.config().vocab_size) throw UsageError("--k exceeds the vocabulary size");
  const auto samples = open_dataset(c, log);
  const ProbeRun run = run_probe(engine, samples, p.probe, c.threads);

  const auto vectors = transition_vectors(run.triples);
  const DirectionPair pair = fit_directions(vectors);
  const auto& weights = engine.model->weights();
  const auto top_corr = vocab_project(pair.d_corr, weights, c.k, engine.tokenizer.get());
  const auto top_halluc = vocab_project(pair.d_halluc, weights, c.k, engine.tokenizer.get());
  const auto projections = project_samples(vectors, pair);

  json reg;
  if (projections.size() >= 3) {
    std::vector<double> x = awareness_values(run), y;
    for (const auto& pr : projections) y.push_back(pr.p_h);
    reg = report::regression_json("p_h", "awareness_score", stats::ols_simple(x, y));
  } else {
    reg = {{"dependent", "p_h"}, {"skipped", "regression needs at least three samples"}};
    log << "directions: fewer than three samples, regression skipped\n";
  }
  log << "directions: fitted on " << pair.n_samples << " samples, explained variance corr "
      << report::format_real(pair.explained_variance_corr) << ", halluc "
      << report::format_real(pair.explained_variance_halluc) << '\n';

  begin_output(p);
  write(p, "directions.halo", encode_directions(pair));
  write(p, "directions.json", directions_sidecar(pair));
  write(p, "top_tokens.csv", report::top_tokens_csv(top_corr, top_halluc));
  write(p, "projections.csv", report::projection_csv(projections, run.records));
  write(p, "regression.json", report::dump(reg));
  write(p, "skipped.json", report::dump(report::skipped_json(run.skipped)));
  finish(p, c);
}

void cmd_sweep(const ExperimentConfig& c, std::ostream& log) {
  const Prepared p = prepare(c);
  const Engine engine = open_engine(c);
  const int n_layers = engine.config().n_layers;

  std::vector<int> thresholds;
  if (c.thresholds) {
    thresholds = *c.thresholds;
  } else {
    for (int t : kDefaultSweepThresholds) {
      if (t <= n_layers) thresholds.push_back(t);
    }
    if (thresholds.size() < std::size(kDefaultSweepThresholds)) {
      log << "sweep: model has " << n_layers
          << " layers; default thresholds above that were dropped\n";
    }
  }

  const auto samples = open_dataset(c, log);
  const auto max_len = static_cast<std::size_t>(engine.config().max_seq_len);
  std::vector<ProbeInputs> inputs;
  std::vector<SkipReport> skipped;
  for (const auto& s : samples) {
    auto in = build_inputs(s, p.probe, *engine.tokenizer);
    const std::size_t len = std::max(in.hallucinated.tokens.size(), in.correct.tokens.size());
    if (len > max_len) {
      skipped.push_back({s.id,
                         "input length " + std::to_string(len) + " exceeds max_seq_len " +
                             std::to_string(max_len),
                         len});
      continue;
    }
    inputs.push_back(std::move(in));
  }
  if (inputs.empty()) throw DataError("sweep: every sample exceeds max_seq_len");
  const auto result = layer_sweep(*engine.model, inputs, thresholds, c.threads);
  log << "sweep: " << inputs.size() << " samples x " << thresholds.size() << " thresholds\n";

  begin_output(p);
  write(p, "sweep.csv", report::sweep_csv(result.points));
  write(p, "effect_sizes.csv", report::effect_sizes_csv(result.records));
  write(p, "skipped.json", report::dump(report::skipped_json(skipped)));
  finish(p, c);
}

void cmd_steer(const ExperimentConfig& c, std::ostream& log) {
  const Prepared p = prepare(c);
  if (!c.directions) throw UsageError("a direction file is required (--directions)");
  if (c.max_new_tokens < 1) throw UsageError("--max-new-tokens must be >= 1");
  if (c.steer_direction != "correct" && c.steer_direction != "hallucinated") {
    throw UsageError("--steer-direction must be correct or hallucinated");
  }
  const Engine engine = open_engine(c);
  const DirectionPair pair = load_directions(*c.directions);
  const auto& direction = c.steer_direction == "correct" ? pair.d_corr : pair.d_halluc;
  if (direction.size() != static_cast<std::size_t>(engine.config().hidden_size)) {
    throw DataError("direction length " + std::to_string(direction.size()) +
                    " does not match the model hidden size");
  }
  std::optional<TokenId> stop;
  if (c.stop_token) stop = *c.stop_token;

  std::vector<report::SteeringLine> lines;
  std::vector<std::string> prompts;
  if (c.prompt) {
    if (!c.dataset.empty()) log << "steer: --prompt given, dataset ignored\n";
    lines.push_back({"prompt", *c.prompt, "", "", ""});
    prompts.push_back(*c.prompt);
  } else if (!c.dataset.empty()) {
    for (const auto& s : open_dataset(c, log)) {
      lines.push_back({s.id, s.question, "", "", s.correct_answer});
      prompts.push_back(question_prompt(s, c.knowledge));
    }
  } else {
    throw UsageError("steer needs --prompt or --dataset");
  }

  const auto limit = static_cast<std::size_t>(engine.config().max_seq_len);
  std::vector<std::optional<SkipReport>> skip(prompts.size());
  parallel_for(prompts.size(), c.threads, [&](std::size_t i) {
    const std::size_t len = engine.tokenizer->encode(prompts[i]).size();
    if (len + static_cast<std::size_t>(c.max_new_tokens) > limit) {
      skip[i] = SkipReport{lines[i].id,
                           "prompt length " + std::to_string(len) + " plus " +
                               std::to_string(c.max_new_tokens) +
                               " new tokens exceeds max_seq_len " + std::to_string(limit),
                           len};
      return;
    }
    const auto g = steer_generate(engine, prompts[i], direction, static_cast<float>(c.alpha),
                                  c.max_new_tokens, stop);
    lines[i].original = g.original;
    lines[i].adjusted = g.adjusted;
  });

  std::vector<report::SteeringLine> kept;
  std::vector<SkipReport> skipped;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (skip[i]) {
      skipped.push_back(std::move(*skip[i]));
    } else {
      kept.push_back(std::move(lines[i]));
    }
  }
  if (kept.empty()) throw DataError("steer: every prompt exceeds the context window");
  log << "steer: " << kept.size() << " generations, alpha " << report::format_real(c.alpha)
      << '\n';

  begin_output(p);
  write(p, "steering.jsonl", report::steering_jsonl(kept));
  write(p, "skipped.json", report::dump(report::skipped_json(skipped)));
  finish(p, c);
}

bool cmd_selfcheck(std::ostream& out) {
  bool ok = true;
  for (const auto& r : run_selfcheck()) {
    out << (r.passed ? "PASS " : "FAIL ") << r.name << ": " << r.detail << '\n';
    ok = ok && r.passed;
  }
  return ok;
}

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const UsageError*>(&e)) return 1;
  if (dynamic_cast<const DataError*>(&e)) return 2;
  return 3;
}

}  // namespace halo
