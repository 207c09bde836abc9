#pragma once

#include <string>
#include <vector>

namespace halo {

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

// Internal oracle comparisons run by `halo selfcheck`:
//   pca        power iteration against the Jacobi eigensolver
//   student_t  incomplete-beta tail against closed-form integer-df sums
//   blocking   threshold = n_layers leaves hidden states untouched and
//              blocked edges receive no attention weight
std::vector<CheckResult> run_selfcheck();

// P(|T| < t) for integer df by the finite trigonometric series.
double student_t_central_closed_form(double t, int df);

}  // namespace halo
