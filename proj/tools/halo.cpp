// halo: command-line driver for the probe, directions, sweep and steer
// experiments.

#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "halo/error.hpp"
#include "halo/experiment.hpp"

namespace {

struct Flags {
  std::optional<std::string> config;
  std::optional<std::string> model, tokenizer, dataset, format, category, incorrect_column;
  std::optional<std::uint64_t> sample_n, seed;
  std::optional<std::string> strategy, anchor, out, directions, steer_direction, prompt;
  std::optional<bool> knowledge;
  std::optional<double> alpha;
  std::optional<std::vector<int>> thresholds;
  std::optional<int> k, max_new_tokens, stop_token, threads;
};

void add_flags(CLI::App* cmd, Flags& f) {
  cmd->add_option("--config", f.config, "JSON experiment config; flags override its fields");
  cmd->add_option("--model", f.model, "Model directory (config.json + weights.halo)");
  cmd->add_option("--tokenizer", f.tokenizer, "Vocabulary JSON (default: byte tokenizer)");
  cmd->add_option("--dataset", f.dataset, "Dataset file");
  cmd->add_option("--format", f.format, "truthfulqa_csv | halueval_jsonl | generic_jsonl");
  cmd->add_option("--category", f.category, "adversarial | non_adversarial");
  cmd->add_option("--sample-n", f.sample_n, "Seeded subsample size");
  cmd->add_option("--seed", f.seed, "Seed for every random choice");
  cmd->add_option("--incorrect-column", f.incorrect_column,
                  "TruthfulQA column with incorrect answers");
  cmd->add_option("--strategy", f.strategy, "none | pro | anti");
  cmd->add_option("--knowledge", f.knowledge, "Prepend reference knowledge (true/false)")
      ->expected(0, 1)
      ->default_str("true");
  cmd->add_option("--anchor", f.anchor, "answer_cue | question_end");
  cmd->add_option("--alpha", f.alpha, "Steering strength");
  cmd->add_option("--thresholds", f.thresholds, "Layer thresholds for the sweep")
      ->delimiter(',');
  cmd->add_option("--out", f.out, "Output directory");
  cmd->add_option("--k", f.k, "Tokens listed per direction");
  cmd->add_option("--directions", f.directions, "Direction bundle for steering");
  cmd->add_option("--steer-direction", f.steer_direction, "correct | hallucinated");
  cmd->add_option("--prompt", f.prompt, "Single steering prompt");
  cmd->add_option("--max-new-tokens", f.max_new_tokens, "Tokens generated per prompt");
  cmd->add_option("--stop-token", f.stop_token, "Token id that ends generation");
  cmd->add_option("--threads", f.threads, "Worker threads");
}

template <typename T, typename U>
void apply(const std::optional<T>& flag, U& field) {
  if (flag) field = *flag;
}

halo::ExperimentConfig resolve(const Flags& f) {
  halo::ExperimentConfig c;
  if (f.config) c = halo::load_experiment(*f.config);
  apply(f.model, c.model);
  apply(f.tokenizer, c.tokenizer);
  apply(f.dataset, c.dataset);
  apply(f.format, c.format);
  apply(f.category, c.category);
  apply(f.sample_n, c.sample_n);
  apply(f.seed, c.seed);
  apply(f.incorrect_column, c.incorrect_column);
  apply(f.strategy, c.strategy);
  apply(f.knowledge, c.knowledge);
  apply(f.anchor, c.anchor);
  apply(f.alpha, c.alpha);
  apply(f.thresholds, c.thresholds);
  apply(f.out, c.out);
  apply(f.k, c.k);
  apply(f.directions, c.directions);
  apply(f.steer_direction, c.steer_direction);
  apply(f.prompt, c.prompt);
  apply(f.max_new_tokens, c.max_new_tokens);
  apply(f.stop_token, c.stop_token);
  apply(f.threads, c.threads);
  return c;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hallucination-awareness experiments on LLaMA-family models"};
  app.set_version_flag("--version", std::string("halo ") + HALO_VERSION);
  app.require_subcommand(1);

  Flags flags;
  auto* probe = app.add_subcommand("probe", "Awareness scores and one-tailed t-test");
  auto* directions = app.add_subcommand("directions", "Fit correct/hallucinated directions");
  auto* sweep = app.add_subcommand("sweep", "Attention-blocking layer sweep");
  auto* steer = app.add_subcommand("steer", "Greedy generation with and without steering");
  auto* selfcheck = app.add_subcommand("selfcheck", "Run the internal oracle checks");
  for (auto* cmd : {probe, directions, sweep, steer}) add_flags(cmd, flags);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (selfcheck->parsed()) return halo::cmd_selfcheck(std::cout) ? 0 : 3;
    const halo::ExperimentConfig config = resolve(flags);
    if (probe->parsed()) halo::cmd_probe(config, std::cerr);
    if (directions->parsed()) halo::cmd_directions(config, std::cerr);
    if (sweep->parsed()) halo::cmd_sweep(config, std::cerr);
    if (steer->parsed()) halo::cmd_steer(config, std::cerr);
  } catch (const std::exception& e) {
    std::cerr << "halo: error: " << e.what() << '\n';
    return halo::exit_code_for(e);
  }
  return 0;
}
