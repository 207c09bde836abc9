#include "halo/report.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>

#include "halo/error.hpp"

namespace halo::report {

using nlohmann::json;

namespace {

json finite_or_null(double v) {
  if (std::isfinite(v)) return v;
  return nullptr;
}

}  // namespace

std::string format_real(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string csv_escape(std::string_view field) {
  if (field.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(field);
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

void atomic_write(const std::filesystem::path& path, std::string_view contents) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write " + tmp.string());
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    out.flush();
    if (!out) throw DataError("write failed: " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw DataError("cannot move output into place: " + path.string());
  }
}

std::string awareness_csv(std::span<const AwarenessRecord> records, std::string_view strategy,
                          bool knowledge_included) {
  std::string out = "sample_id,cos_halluc,cos_corr,awareness,strategy,knowledge_included\n";
  for (const auto& r : records) {
    out += csv_escape(r.sample_id) + ',' + format_real(r.cos_halluc) + ',' +
           format_real(r.cos_corr) + ',' + format_real(r.awareness) + ',' +
           std::string(strategy) + ',' + (knowledge_included ? "true" : "false") + '\n';
  }
  return out;
}

std::string projection_csv(std::span<const ProjectionRecord> projections,
                           std::span<const AwarenessRecord> awareness) {
  std::map<std::string_view, double> score;
  for (const auto& a : awareness) score.emplace(a.sample_id, a.awareness);
  std::string out = "sample_id,p_h,p_c,awareness\n";
  for (const auto& p : projections) {
    auto it = score.find(p.sample_id);
    if (it == score.end()) throw DataError("no awareness score for sample '" + p.sample_id + "'");
    out += csv_escape(p.sample_id) + ',' + format_real(p.p_h) + ',' + format_real(p.p_c) + ',' +
           format_real(it->second) + '\n';
  }
  return out;
}

std::string top_tokens_csv(std::span<const VocabEntry> corr, std::span<const VocabEntry> halluc) {
  std::string out = "direction,rank,token_id,token,score\n";
  auto emit = [&](std::string_view name, std::span<const VocabEntry> entries) {
    for (std::size_t i = 0; i < entries.size(); ++i) {
      const auto& e = entries[i];
      out += std::string(name) + ',' + std::to_string(i + 1) + ',' + std::to_string(e.token_id) +
             ',' + csv_escape(e.token) + ',' + format_real(e.score) + '\n';
    }
  };
  emit("correct", corr);
  emit("hallucinated", halluc);
  return out;
}

std::string sweep_csv(std::span<const SweepPoint> points) {
  std::string out = "layer_threshold,mean_diff,ci_halfwidth,n\n";
  for (const auto& p : points) {
    out += std::to_string(p.layer_threshold) + ',' + format_real(p.mean_diff) + ',' +
           format_real(p.ci_halfwidth) + ',' + std::to_string(p.n) + '\n';
  }
  return out;
}

std::string effect_sizes_csv(std::span<const EffectSizeRecord> records) {
  std::string out = "sample_id,layer_threshold,e_halluc,e_corr,difference\n";
  for (const auto& r : records) {
    out += csv_escape(r.sample_id) + ',' + std::to_string(r.layer_threshold) + ',' +
           format_real(r.e_halluc) + ',' + format_real(r.e_corr) + ',' +
           format_real(r.difference) + '\n';
  }
  return out;
}

json ttest_json(std::string_view statistic, const stats::TTestResult& r) {
  return {{"statistic", statistic},
          {"value", finite_or_null(r.mean)},
          {"t", finite_or_null(r.t_statistic)},
          {"p", finite_or_null(r.p_value)},
          {"df", r.df},
          {"stars", stats::significance_stars(r.p_value)}};
}

json regression_json(std::string_view dependent, std::string_view regressor,
                     const stats::RegressionResult& r) {
  auto coef = [](std::string_view name, double b, double se, double t, double p) {
    return json{{"name", name},
                {"coef", finite_or_null(b)},
                {"se", finite_or_null(se)},
                {"t", finite_or_null(t)},
                {"p", finite_or_null(p)},
                {"stars", stats::significance_stars(p)}};
  };
  return {{"dependent", dependent},
          {"coefficients",
           json::array({coef(regressor, r.slope, r.slope_se, r.slope_t, r.slope_p),
                        coef("const", r.intercept, r.intercept_se, r.intercept_t, r.intercept_p)})},
          {"observations", r.n},
          {"r_squared", finite_or_null(r.r_squared)},
          {"adjusted_r_squared", finite_or_null(r.adjusted_r_squared)},
          {"residual_std_error", finite_or_null(r.residual_se)},
          {"residual_df", r.df},
          {"f_statistic", finite_or_null(r.f_statistic)},
          {"f_df", json::array({1, r.df})},
          {"f_p", finite_or_null(r.f_p)}};
}

json skipped_json(std::span<const SkipReport> skipped) {
  json arr = json::array();
  for (const auto& s : skipped) {
    arr.push_back({{"sample_id", s.sample_id}, {"reason", s.reason}, {"length", s.length}});
  }
  return {{"skipped", arr}, {"count", skipped.size()}};
}

std::string steering_jsonl(std::span<const SteeringLine> lines) {
  std::string out;
  for (const auto& l : lines) {
    json j = {{"id", l.id},
              {"question", l.question},
              {"original", l.original},
              {"adjusted", l.adjusted},
              {"true_answer", l.true_answer}};
    out += j.dump(-1, ' ', false, json::error_handler_t::replace) + '\n';
  }
  return out;
}

std::string dump(const json& j) {
  return j.dump(2, ' ', false, json::error_handler_t::replace) + '\n';
}

}  // namespace halo::report
