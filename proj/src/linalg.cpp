#include "halo/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "halo/error.hpp"
#include "halo/rng.hpp"

namespace halo::linalg {

namespace {

struct Centered {
  std::size_t n = 0;
  std::size_t h = 0;
  std::vector<double> data;  // [n x h]
};

Centered center(const RowSet& rows) {
  if (rows.size() < 2) throw DataError("PCA needs at least two vectors");
  Centered c;
  c.n = rows.size();
  c.h = rows.front().size();
  if (c.h == 0) throw DataError("PCA input vectors are empty");
  std::vector<double> mean(c.h, 0.0);
  for (const auto& r : rows) {
    if (r.size() != c.h) throw DataError("PCA input vectors have different lengths");
    for (std::size_t j = 0; j < c.h; ++j) mean[j] += r[j];
  }
  for (auto& m : mean) m /= static_cast<double>(c.n);
  c.data.resize(c.n * c.h);
  bool any_nonzero = false;
  for (std::size_t i = 0; i < c.n; ++i) {
    for (std::size_t j = 0; j < c.h; ++j) {
      const double v = rows[i][j] - mean[j];
      c.data[i * c.h + j] = v;
      any_nonzero = any_nonzero || v != 0.0;
    }
  }
  if (!any_nonzero) throw DataError("degenerate data: all vectors are identical (zero covariance)");
  return c;
}

// w = X^T (X v) / (n - 1)
void apply_covariance(const Centered& c, const std::vector<double>& v, std::vector<double>& w,
                      std::vector<double>& scratch) {
  scratch.assign(c.n, 0.0);
  for (std::size_t i = 0; i < c.n; ++i) {
    const double* row = &c.data[i * c.h];
    double s = 0.0;
    for (std::size_t j = 0; j < c.h; ++j) s += row[j] * v[j];
    scratch[i] = s;
  }
  w.assign(c.h, 0.0);
  for (std::size_t i = 0; i < c.n; ++i) {
    const double* row = &c.data[i * c.h];
    for (std::size_t j = 0; j < c.h; ++j) w[j] += row[j] * scratch[i];
  }
  const double denom = static_cast<double>(c.n - 1);
  for (auto& x : w) x /= denom;
}

double norm2(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

}  // namespace

TopEigenpair covariance_top_eigenpair(const RowSet& rows, const PowerIterationOptions& options) {
  const Centered c = center(rows);
  std::vector<double> v(c.h), w, scratch;

  for (std::uint64_t attempt = 0; attempt < 4; ++attempt) {
    Rng rng(0x243F6A8885A308D3ull + attempt);
    for (auto& x : v) x = rng.normal();
    double nv = norm2(v);
    for (auto& x : v) x /= nv;

    TopEigenpair out;
    bool collapsed = false;
    for (int it = 1; it <= options.max_iterations; ++it) {
      apply_covariance(c, v, w, scratch);
      const double nw = norm2(w);
      if (nw == 0.0) {
        collapsed = true;
        break;
      }
      double diff = 0.0;
      for (std::size_t j = 0; j < c.h; ++j) {
        const double next = w[j] / nw;
        diff += (next - v[j]) * (next - v[j]);
        v[j] = next;
      }
      out.iterations = it;
      if (std::sqrt(diff) < options.tolerance) {
        out.converged = true;
        break;
      }
    }
    if (collapsed) continue;  // start vector was in the null space

    apply_covariance(c, v, w, scratch);
    out.value = std::inner_product(v.begin(), v.end(), w.begin(), 0.0);
    out.vector = v;
    return out;
  }
  throw DataError("power iteration failed to leave the covariance null space");
}

std::vector<double> sample_covariance(const RowSet& rows) {
  const Centered c = center(rows);
  std::vector<double> cov(c.h * c.h, 0.0);
  for (std::size_t a = 0; a < c.h; ++a) {
    for (std::size_t b = a; b < c.h; ++b) {
      double s = 0.0;
      for (std::size_t i = 0; i < c.n; ++i) s += c.data[i * c.h + a] * c.data[i * c.h + b];
      s /= static_cast<double>(c.n - 1);
      cov[a * c.h + b] = s;
      cov[b * c.h + a] = s;
    }
  }
  return cov;
}

SymmetricEigen jacobi_eigen(std::vector<double> a, std::size_t n) {
  if (a.size() != n * n) throw UsageError("jacobi_eigen: matrix size mismatch");
  std::vector<double> vec(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) vec[i * n + i] = 1.0;

  auto off_norm = [&] {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        if (i != j) s += a[i * n + j] * a[i * n + j];
    return std::sqrt(s);
  };
  double scale = 0.0;
  for (double x : a) scale = std::max(scale, std::abs(x));

  for (int sweep = 0; sweep < 100 && off_norm() > 1e-15 * std::max(scale, 1e-300); ++sweep) {
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a[p * n + q];
        if (apq == 0.0) continue;
        const double theta = (a[q * n + q] - a[p * n + p]) / (2.0 * apq);
        const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double cs = 1.0 / std::sqrt(t * t + 1.0);
        const double sn = t * cs;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a[k * n + p], akq = a[k * n + q];
          a[k * n + p] = cs * akp - sn * akq;
          a[k * n + q] = sn * akp + cs * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a[p * n + k], aqk = a[q * n + k];
          a[p * n + k] = cs * apk - sn * aqk;
          a[q * n + k] = sn * apk + cs * aqk;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double vkp = vec[k * n + p], vkq = vec[k * n + q];
          vec[k * n + p] = cs * vkp - sn * vkq;
          vec[k * n + q] = sn * vkp + cs * vkq;
        }
      }
    }
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t x, std::size_t y) { return a[x * n + x] > a[y * n + y]; });
  SymmetricEigen out;
  out.values.resize(n);
  out.vectors.resize(n * n);
  for (std::size_t j = 0; j < n; ++j) {
    out.values[j] = a[order[j] * n + order[j]];
    for (std::size_t k = 0; k < n; ++k) out.vectors[k * n + j] = vec[k * n + order[j]];
  }
  return out;
}

}  // namespace halo::linalg
