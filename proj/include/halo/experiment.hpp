#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

namespace halo {

// Everything a command needs. The JSON form uses the long flag names as
// keys ("sample-n", "max-new-tokens", ...); absent optionals are null.
struct ExperimentConfig {
  std::string model;
  std::optional<std::string> tokenizer;
  std::string dataset;
  std::string format = "generic_jsonl";
  std::optional<std::string> category;
  std::optional<std::uint64_t> sample_n;
  std::uint64_t seed = 0;
  std::string incorrect_column = "Incorrect Answers";
  std::string strategy = "none";
  bool knowledge = false;
  std::string anchor = "answer_cue";
  double alpha = 100.0;
  std::optional<std::vector<int>> thresholds;
  std::string out;
  int k = 10;
  std::optional<std::string> directions;
  std::string steer_direction = "correct";
  std::optional<std::string> prompt;
  int max_new_tokens = 32;
  std::optional<int> stop_token;
  int threads = 1;

  bool operator==(const ExperimentConfig&) const = default;
};

nlohmann::json to_json(const ExperimentConfig& config);
// Unknown keys and wrongly typed values throw UsageError. Missing keys keep
// their defaults.
ExperimentConfig experiment_from_json(const nlohmann::json& j);
ExperimentConfig load_experiment(const std::filesystem::path& path);

// Each command validates the config, reads its inputs, and writes its
// outputs (plus the effective config.json) into config.out. Progress notes
// go to `log`. Errors are thrown as halo::Error subclasses.
void cmd_probe(const ExperimentConfig& config, std::ostream& log);
void cmd_directions(const ExperimentConfig& config, std::ostream& log);
void cmd_sweep(const ExperimentConfig& config, std::ostream& log);
void cmd_steer(const ExperimentConfig& config, std::ostream& log);

// Runs the internal oracle checks, printing one line per check. Returns
// true when all pass.
bool cmd_selfcheck(std::ostream& out);

// Exit code for an exception escaping a command: 1 usage, 2 data, 3 model.
int exit_code_for(const std::exception& e);

}  // namespace halo
