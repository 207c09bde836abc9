#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "halo/probe.hpp"

namespace halo {

enum class DatasetFormat { truthfulqa_csv, halueval_jsonl, generic_jsonl };
enum class Category { adversarial, non_adversarial };

DatasetFormat parse_dataset_format(std::string_view name);
std::string_view to_string(DatasetFormat format);
Category parse_category(std::string_view name);
std::string_view to_string(Category category);

struct DatasetSpec {
  std::filesystem::path path;
  DatasetFormat format = DatasetFormat::generic_jsonl;
  std::optional<Category> category_filter;
  std::optional<std::size_t> sample_n;
  std::uint64_t seed = 0;
  // TruthfulQA column holding the "; "-separated incorrect answers; the
  // first entry becomes the hallucinated answer.
  std::string incorrect_column = "Incorrect Answers";
};

struct RejectedRow {
  std::size_t line = 0;
  std::string reason;
};

struct LoadedDataset {
  std::vector<QASample> samples;
  std::vector<RejectedRow> rejected;  // rows failing QASample::validate
};

// File order, then category filter, then seeded subsample. Malformed input
// throws DataError naming the line.
LoadedDataset load_dataset(const DatasetSpec& spec);

// Same, from in-memory bytes; `origin` is used in error messages.
LoadedDataset parse_dataset(std::string_view bytes, const DatasetSpec& spec,
                            std::string_view origin = "<memory>");

// Indices chosen by a partial Fisher-Yates shuffle of [0, n) driven by
// Rng(seed), in selection order. k == n returns the identity.
std::vector<std::size_t> subsample_indices(std::size_t n, std::size_t k, std::uint64_t seed);

// RFC 4180 records; each row remembers the line on which it started.
struct CsvRow {
  std::size_t line = 0;
  std::vector<std::string> fields;
};

std::vector<CsvRow> parse_csv(std::string_view text, std::string_view origin = "<memory>");

}  // namespace halo
