#pragma once

#include <cstddef>
#include <vector>

namespace halo::linalg {

// Rows of equal length, double precision.
using RowSet = std::vector<std::vector<double>>;

struct PowerIterationOptions {
  double tolerance = 1e-10;  // L2 distance between successive unit iterates
  int max_iterations = 10000;
};

struct TopEigenpair {
  std::vector<double> vector;  // unit norm, sign as produced by the iteration
  double value = 0.0;
  int iterations = 0;
  bool converged = false;
};

// Leading eigenpair of the sample covariance (n - 1 denominator) of the
// mean-centred rows, by power iteration. The covariance is applied
// implicitly as X^T (X v) / (n - 1). Throws DataError for fewer than two
// rows, ragged rows or zero covariance.
TopEigenpair covariance_top_eigenpair(const RowSet& rows,
                                      const PowerIterationOptions& options = {});

// Sample covariance matrix of mean-centred rows, row-major [h x h].
std::vector<double> sample_covariance(const RowSet& rows);

struct SymmetricEigen {
  std::vector<double> values;   // descending
  std::vector<double> vectors;  // column j (row-major [n x n]) pairs with values[j]
};

// Cyclic Jacobi rotations on a dense symmetric matrix, row-major [n x n].
SymmetricEigen jacobi_eigen(std::vector<double> matrix, std::size_t n);

}  // namespace halo::linalg
