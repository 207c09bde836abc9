#include "halo/datasets.hpp"

#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include <json.hpp>

#include "halo/error.hpp"
#include "halo/rng.hpp"

namespace halo {

namespace {

using nlohmann::json;

[[noreturn]] void fail_at(std::string_view origin, std::size_t line, const std::string& what) {
  throw DataError(std::string(origin) + ":" + std::to_string(line) + ": " + what);
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open dataset file: " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string_view strip_bom(std::string_view s) {
  if (s.size() >= 3 && s.substr(0, 3) == "\xEF\xBB\xBF") s.remove_prefix(3);
  return s;
}

struct Row {
  std::size_t line = 0;
  QASample sample;
};

// Calls fn(line_number, object) for every non-blank line.
template <typename Fn>
void for_each_json_line(std::string_view text, std::string_view origin, Fn fn) {
  std::size_t line = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t nl = text.find('\n', pos);
    std::string_view raw = text.substr(pos, nl == std::string_view::npos ? text.npos : nl - pos);
    ++line;
    if (!raw.empty() && raw.back() == '\r') raw.remove_suffix(1);
    if (raw.find_first_not_of(" \t") != std::string_view::npos) {
      json obj;
      try {
        obj = json::parse(raw);
      } catch (const json::parse_error& e) {
        fail_at(origin, line, std::string("invalid JSON: ") + e.what());
      }
      if (!obj.is_object()) fail_at(origin, line, "expected a JSON object");
      fn(line, obj);
    }
    if (nl == std::string_view::npos) break;
    pos = nl + 1;
  }
}

std::string string_field(const json& obj, const char* key, std::string_view origin,
                         std::size_t line) {
  auto it = obj.find(key);
  if (it == obj.end()) fail_at(origin, line, std::string("missing key '") + key + "'");
  if (!it->is_string()) fail_at(origin, line, std::string("key '") + key + "' is not a string");
  return it->get<std::string>();
}

std::vector<Row> parse_generic(std::string_view text, std::string_view origin) {
  std::vector<Row> rows;
  for_each_json_line(text, origin, [&](std::size_t line, const json& obj) {
    Row r{line, {}};
    r.sample.id = string_field(obj, "id", origin, line);
    r.sample.question = string_field(obj, "question", origin, line);
    r.sample.correct_answer = string_field(obj, "correct_answer", origin, line);
    r.sample.hallucinated_answer = string_field(obj, "hallucinated_answer", origin, line);
    if (auto it = obj.find("knowledge"); it != obj.end() && !it->is_null()) {
      if (!it->is_string()) fail_at(origin, line, "key 'knowledge' is not a string");
      r.sample.knowledge = it->get<std::string>();
    }
    if (auto it = obj.find("adversarial"); it != obj.end() && !it->is_null()) {
      if (!it->is_boolean()) fail_at(origin, line, "key 'adversarial' is not a boolean");
      r.sample.adversarial = it->get<bool>();
    }
    rows.push_back(std::move(r));
  });
  return rows;
}

std::vector<Row> parse_halueval(std::string_view text, std::string_view origin) {
  std::vector<Row> rows;
  for_each_json_line(text, origin, [&](std::size_t line, const json& obj) {
    Row r{line, {}};
    r.sample.id = "halueval-" + std::to_string(line);
    r.sample.knowledge = string_field(obj, "knowledge", origin, line);
    r.sample.question = string_field(obj, "question", origin, line);
    r.sample.correct_answer = string_field(obj, "right_answer", origin, line);
    r.sample.hallucinated_answer = string_field(obj, "hallucinated_answer", origin, line);
    rows.push_back(std::move(r));
  });
  return rows;
}

std::vector<Row> parse_truthfulqa(std::string_view text, std::string_view origin,
                                  const std::string& incorrect_column) {
  const auto records = parse_csv(text, origin);
  if (records.empty()) fail_at(origin, 1, "missing CSV header");
  const auto& header = records.front().fields;
  std::map<std::string, std::size_t> col;
  for (std::size_t i = 0; i < header.size(); ++i) col.emplace(header[i], i);
  auto need = [&](const std::string& name) {
    auto it = col.find(name);
    if (it == col.end()) fail_at(origin, records.front().line, "missing column '" + name + "'");
    return it->second;
  };
  const std::size_t c_type = need("Type");
  const std::size_t c_question = need("Question");
  const std::size_t c_best = need("Best Answer");
  const std::size_t c_incorrect = need(incorrect_column);

  std::vector<Row> rows;
  for (std::size_t r = 1; r < records.size(); ++r) {
    const auto& rec = records[r];
    if (rec.fields.size() == 1 && rec.fields[0].empty()) continue;  // blank line
    if (rec.fields.size() != header.size()) {
      fail_at(origin, rec.line, "expected " + std::to_string(header.size()) + " fields, found " +
                                    std::to_string(rec.fields.size()));
    }
    Row row{rec.line, {}};
    row.sample.id = "truthfulqa-" + std::to_string(r);
    row.sample.question = rec.fields[c_question];
    row.sample.correct_answer = rec.fields[c_best];
    const std::string& incorrect = rec.fields[c_incorrect];
    row.sample.hallucinated_answer = incorrect.substr(0, incorrect.find(';'));
    const std::string& type = rec.fields[c_type];
    if (type == "Adversarial") {
      row.sample.adversarial = true;
    } else if (type == "Non-Adversarial") {
      row.sample.adversarial = false;
    } else {
      fail_at(origin, rec.line, "unknown Type '" + type + "'");
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace

DatasetFormat parse_dataset_format(std::string_view name) {
  if (name == "truthfulqa_csv") return DatasetFormat::truthfulqa_csv;
  if (name == "halueval_jsonl") return DatasetFormat::halueval_jsonl;
  if (name == "generic_jsonl") return DatasetFormat::generic_jsonl;
  throw UsageError("unknown dataset format '" + std::string(name) +
                   "' (expected truthfulqa_csv, halueval_jsonl or generic_jsonl)");
}

std::string_view to_string(DatasetFormat format) {
  switch (format) {
    case DatasetFormat::truthfulqa_csv: return "truthfulqa_csv";
    case DatasetFormat::halueval_jsonl: return "halueval_jsonl";
    case DatasetFormat::generic_jsonl: return "generic_jsonl";
  }
  return "generic_jsonl";
}

Category parse_category(std::string_view name) {
  if (name == "adversarial") return Category::adversarial;
  if (name == "non_adversarial") return Category::non_adversarial;
  throw UsageError("unknown category '" + std::string(name) +
                   "' (expected adversarial or non_adversarial)");
}

std::string_view to_string(Category category) {
  return category == Category::adversarial ? "adversarial" : "non_adversarial";
}

std::vector<CsvRow> parse_csv(std::string_view text, std::string_view origin) {
  text = strip_bom(text);
  std::vector<CsvRow> rows;
  if (text.empty()) return rows;

  std::size_t line = 1;
  CsvRow row{line, {}};
  std::string field;
  bool quoted = false;
  bool field_was_quoted = false;
  std::size_t quote_line = 0;

  auto end_field = [&] {
    row.fields.push_back(std::move(field));
    field.clear();
    field_was_quoted = false;
  };
  auto end_row = [&] {
    end_field();
    rows.push_back(std::move(row));
    row = CsvRow{line, {}};
  };

  for (std::size_t i = 0; i < text.size(); ++i) {
    const char ch = text[i];
    if (quoted) {
      if (ch == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        if (ch == '\n') ++line;
        field.push_back(ch);
      }
      continue;
    }
    switch (ch) {
      case '"':
        if (!field.empty() || field_was_quoted) fail_at(origin, line, "stray quote inside field");
        quoted = true;
        field_was_quoted = true;
        quote_line = line;
        break;
      case ',':
        end_field();
        break;
      case '\r':
        if (i + 1 < text.size() && text[i + 1] == '\n') break;
        fail_at(origin, line, "bare carriage return");
      case '\n':
        ++line;
        end_row();
        row.line = line;
        break;
      default:
        if (field_was_quoted) fail_at(origin, line, "text after closing quote");
        field.push_back(ch);
    }
  }
  if (quoted) fail_at(origin, quote_line, "unterminated quoted field");
  if (!field.empty() || field_was_quoted || !row.fields.empty()) end_row();
  return rows;
}

std::vector<std::size_t> subsample_indices(std::size_t n, std::size_t k, std::uint64_t seed) {
  if (k > n) {
    throw DataError("sample_n " + std::to_string(k) + " exceeds dataset size " + std::to_string(n));
  }
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  if (k == n) return idx;
  Rng rng(seed);
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.uniform_below(n - i));
    std::swap(idx[i], idx[j]);
  }
  idx.resize(k);
  return idx;
}

LoadedDataset parse_dataset(std::string_view bytes, const DatasetSpec& spec,
                            std::string_view origin) {
  bytes = strip_bom(bytes);
  std::vector<Row> rows;
  switch (spec.format) {
    case DatasetFormat::truthfulqa_csv:
      rows = parse_truthfulqa(bytes, origin, spec.incorrect_column);
      break;
    case DatasetFormat::halueval_jsonl:
      if (spec.category_filter) {
        throw UsageError("category filter is not available for halueval_jsonl (no category field)");
      }
      rows = parse_halueval(bytes, origin);
      break;
    case DatasetFormat::generic_jsonl:
      rows = parse_generic(bytes, origin);
      break;
  }

  LoadedDataset out;
  std::vector<QASample> kept;
  std::set<std::string> ids;
  for (auto& row : rows) {
    try {
      row.sample.validate();
    } catch (const DataError& e) {
      out.rejected.push_back({row.line, e.what()});
      continue;
    }
    if (!ids.insert(row.sample.id).second) {
      fail_at(origin, row.line, "duplicate sample id '" + row.sample.id + "'");
    }
    if (spec.category_filter) {
      if (!row.sample.adversarial) continue;
      const bool want_adv = *spec.category_filter == Category::adversarial;
      if (*row.sample.adversarial != want_adv) continue;
    }
    kept.push_back(std::move(row.sample));
  }

  const std::size_t k = spec.sample_n.value_or(kept.size());
  for (std::size_t i : subsample_indices(kept.size(), k, spec.seed)) {
    out.samples.push_back(std::move(kept[i]));
  }
  return out;
}

LoadedDataset load_dataset(const DatasetSpec& spec) {
  const std::string bytes = read_file(spec.path);
  return parse_dataset(bytes, spec, spec.path.string());
}

}  // namespace halo
