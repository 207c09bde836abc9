#include "halo/selfcheck.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>

#include "halo/error.hpp"
#include "halo/intervention.hpp"
#include "halo/linalg.hpp"
#include "halo/model.hpp"
#include "halo/rng.hpp"
#include "halo/stats.hpp"
#include "halo/synthetic.hpp"

namespace halo {

namespace {

std::string fmt(const char* f, double a, double b = 0.0) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a, b);
  return buf;
}

CheckResult check_pca() {
  CheckResult r{"pca", true, ""};
  Rng rng(0x5E1FC4ECull);
  double worst_cos = 1.0, worst_rel = 0.0;
  for (int trial = 0; trial < 25; ++trial) {
    const std::size_t n = 3 + rng.uniform_below(60);
    const std::size_t h = 2 + rng.uniform_below(24);
    linalg::RowSet rows(n, std::vector<double>(h));
    for (auto& row : rows) {
      for (std::size_t j = 0; j < h; ++j) row[j] = rng.normal() * (1.0 + 3.0 * (j == 0));
    }
    const auto top = linalg::covariance_top_eigenpair(rows);
    const auto eig = linalg::jacobi_eigen(linalg::sample_covariance(rows), h);
    double dot = 0.0;
    for (std::size_t i = 0; i < h; ++i) dot += top.vector[i] * eig.vectors[i * h];
    worst_cos = std::min(worst_cos, std::abs(dot));
    worst_rel = std::max(worst_rel, std::abs(top.value - eig.values[0]) / eig.values[0]);
  }
  r.passed = worst_cos >= 1.0 - 1e-6 && worst_rel <= 1e-6;
  r.detail = fmt("min |cos| %.12f, max relative eigenvalue error %.3g", worst_cos, worst_rel);
  return r;
}

CheckResult check_student_t() {
  CheckResult r{"student_t", true, ""};
  double worst = 0.0;
  for (int df : {1, 2, 3, 4, 5, 7, 10, 30}) {
    for (double t = -3.0; t <= 3.0; t += 0.125) {
      const double oracle =
          t >= 0 ? 0.5 * (1.0 - student_t_central_closed_form(t, df))
                 : 1.0 - 0.5 * (1.0 - student_t_central_closed_form(-t, df));
      const double got = stats::student_t_sf(t, df);
      worst = std::max(worst, std::abs(got - oracle) / oracle);
    }
  }
  r.passed = worst <= 1e-10;
  r.detail = fmt("max relative error %.3g over df 1..30, |t| <= 3", worst);
  return r;
}

CheckResult check_blocking() {
  CheckResult r{"blocking", true, ""};
  const auto config = tiny_config();
  Model model(WeightStore(config, random_weights(config, 7)));
  Rng rng(11);
  TokenSequence tokens(24);
  for (auto& t : tokens) t = static_cast<TokenId>(rng.uniform_below(256));

  BranchInput branch;
  branch.tokens = tokens;
  branch.question_start = 2;
  branch.question_end = 15;

  auto last_state = [&](const std::optional<AttentionBlockSpec>& block) {
    ForwardOptions o;
    o.logits = LogitsMode::none;
    o.capture = {{config.n_layers - 1, branch.last_position()}};
    o.block = block;
    return model.forward(tokens, o).trace.at(config.n_layers - 1, branch.last_position()).values;
  };
  const auto base = last_state(std::nullopt);
  const double null_effect = l2_distance(base, last_state(question_block(branch, config.n_layers)));
  const double full_effect = l2_distance(base, last_state(question_block(branch, 0)));

  ForwardOptions o;
  o.logits = LogitsMode::none;
  o.capture_attention = true;
  o.block = question_block(branch, 1);
  const auto res = model.forward(tokens, o);
  double max_blocked = 0.0;
  for (const auto& map : res.attention) {
    if (map.layer < 1) continue;
    for (int h = 0; h < map.n_heads; ++h) {
      for (int k = branch.question_start; k <= branch.question_end; ++k) {
        max_blocked = std::max<double>(max_blocked, map.weight(h, branch.last_position(), k));
      }
    }
  }
  r.passed = null_effect == 0.0 && full_effect > 0.0 && max_blocked <= 1e-10;
  r.detail = fmt("effect at threshold n_layers %.3g, at 0 %.6g", null_effect, full_effect) +
             fmt(", max blocked weight %.3g", max_blocked);
  return r;
}

template <typename Fn>
CheckResult guarded(const char* name, Fn fn) {
  try {
    return fn();
  } catch (const std::exception& e) {
    return {name, false, std::string("threw: ") + e.what()};
  }
}

}  // namespace

double student_t_central_closed_form(double t, int df) {
  if (df < 1) throw UsageError("closed-form t CDF needs df >= 1");
  const double theta = std::atan(t / std::sqrt(static_cast<double>(df)));
  const double s = std::sin(theta), c = std::cos(theta), c2 = c * c;
  if (df % 2 == 1) {
    if (df == 1) return 2.0 * theta / std::numbers::pi;
    double term = c, sum = c;
    for (int k = 3; k <= df - 2; k += 2) {
      term *= c2 * (k - 1) / k;
      sum += term;
    }
    return 2.0 / std::numbers::pi * (theta + s * sum);
  }
  double term = 1.0, sum = 1.0;
  for (int k = 2; k <= df - 2; k += 2) {
    term *= c2 * (k - 1) / k;
    sum += term;
  }
  return s * sum;
}

std::vector<CheckResult> run_selfcheck() {
  return {guarded("pca", check_pca), guarded("student_t", check_student_t),
          guarded("blocking", check_blocking)};
}

}  // namespace halo
