#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "halo/directions.hpp"
#include "halo/intervention.hpp"
#include "halo/probe.hpp"
#include "halo/stats.hpp"

namespace halo::report {

// Shortest-enough decimal: printf "%.17g" so values round-trip exactly.
std::string format_real(double v);
std::string csv_escape(std::string_view field);

// Writes to a sibling temporary file, then renames over `path`.
void atomic_write(const std::filesystem::path& path, std::string_view contents);

std::string awareness_csv(std::span<const AwarenessRecord> records, std::string_view strategy,
                          bool knowledge_included);
std::string projection_csv(std::span<const ProjectionRecord> projections,
                           std::span<const AwarenessRecord> awareness);
std::string top_tokens_csv(std::span<const VocabEntry> corr, std::span<const VocabEntry> halluc);
std::string sweep_csv(std::span<const SweepPoint> points);
std::string effect_sizes_csv(std::span<const EffectSizeRecord> records);

// {statistic, value, t, p, df, stars}
nlohmann::json ttest_json(std::string_view statistic, const stats::TTestResult& r);
// Coefficient rows plus R², adjusted R², F, residual standard error, n.
nlohmann::json regression_json(std::string_view dependent, std::string_view regressor,
                               const stats::RegressionResult& r);
nlohmann::json skipped_json(std::span<const SkipReport> skipped);

struct SteeringLine {
  std::string id;
  std::string question;
  std::string original;
  std::string adjusted;
  std::string true_answer;
};

std::string steering_jsonl(std::span<const SteeringLine> lines);

// JSON text with a trailing newline; non-finite numbers become null.
std::string dump(const nlohmann::json& j);

}  // namespace halo::report
