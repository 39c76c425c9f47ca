#include "justgen/kernels.hpp"

#include <algorithm>
#include <atomic>

#include "justgen/errors.hpp"

namespace justgen::kernels {

namespace {
std::atomic<bool> g_parallel{true};

void gemm_rows(const Matrix& a, bool trans_a, const Matrix& b, bool trans_b, Matrix& c, int r0, int r1) {
  const int k = trans_a ? a.rows : a.cols;
  // Serial inner loops; identical evaluation order for every output element
  // regardless of how rows are distributed over threads.
  for (int i = r0; i < r1; ++i) {
    double* crow = &c.data[static_cast<size_t>(i) * c.cols];
    for (int j = 0; j < c.cols; ++j) {
      double acc = 0.0;
      for (int t = 0; t < k; ++t) {
        const double av = trans_a ? a.at(t, i) : a.at(i, t);
        const double bv = trans_b ? b.at(j, t) : b.at(t, j);
        acc += av * bv;
      }
      crow[j] = acc;
    }
  }
}
}  // namespace

void set_parallel(bool enabled) { g_parallel.store(enabled); }

bool parallel_enabled() {
#ifdef JUSTGEN_OPENMP
  return g_parallel.load();
#else
  return false;
#endif
}

void gemm_serial(const Matrix& a, bool trans_a, const Matrix& b, bool trans_b, Matrix& c) {
  const int m = trans_a ? a.cols : a.rows;
  const int k = trans_a ? a.rows : a.cols;
  const int kb = trans_b ? b.cols : b.rows;
  const int n = trans_b ? b.rows : b.cols;
  if (k != kb) fail(ErrorKind::DimensionMismatch, "gemm: inner dimensions disagree");
  if (c.rows != m || c.cols != n) c = Matrix(m, n);
  gemm_rows(a, trans_a, b, trans_b, c, 0, m);
}

void gemm(const Matrix& a, bool trans_a, const Matrix& b, bool trans_b, Matrix& c) {
  const int m = trans_a ? a.cols : a.rows;
  const int k = trans_a ? a.rows : a.cols;
  const int kb = trans_b ? b.cols : b.rows;
  const int n = trans_b ? b.rows : b.cols;
  if (k != kb) fail(ErrorKind::DimensionMismatch, "gemm: inner dimensions disagree");
  if (c.rows != m || c.cols != n) c = Matrix(m, n);
#ifdef JUSTGEN_OPENMP
  if (parallel_enabled() && static_cast<long>(m) * n * k > 16384) {
#pragma omp parallel for schedule(static)
    for (int i = 0; i < m; ++i) gemm_rows(a, trans_a, b, trans_b, c, i, i + 1);
    return;
  }
#endif
  gemm_rows(a, trans_a, b, trans_b, c, 0, m);
}

Matrix matmul(const Matrix& a, bool trans_a, const Matrix& b, bool trans_b) {
  Matrix c;
  gemm(a, trans_a, b, trans_b, c);
  return c;
}

void score_rows_serial(const float* rows, size_t count, int dim, const double* query, double* scores) {
  for (size_t i = 0; i < count; ++i) {
    const float* r = rows + i * static_cast<size_t>(dim);
    double acc = 0.0;
    for (int d = 0; d < dim; ++d) acc += static_cast<double>(r[d]) * query[d];
    scores[i] = acc;
  }
}

void score_rows(const float* rows, size_t count, int dim, const double* query, double* scores) {
#ifdef JUSTGEN_OPENMP
  if (parallel_enabled() && count * static_cast<size_t>(dim) > 16384) {
#pragma omp parallel for schedule(static)
    for (long i = 0; i < static_cast<long>(count); ++i)
      score_rows_serial(rows + i * static_cast<size_t>(dim), 1, dim, query, scores + i);
    return;
  }
#endif
  score_rows_serial(rows, count, dim, query, scores);
}

std::vector<size_t> top_k(const std::vector<double>& scores, size_t k,
                          const std::function<bool(size_t, size_t)>& tie_before) {
  k = std::min(k, scores.size());
  std::vector<size_t> idx(scores.size());
  for (size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  auto better = [&](size_t a, size_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return tie_before ? tie_before(a, b) : a < b;
  };
  std::partial_sort(idx.begin(), idx.begin() + static_cast<long>(k), idx.end(), better);
  idx.resize(k);
  return idx;
}

void parallel_for(size_t n, const std::function<void(size_t)>& body) {
#ifdef JUSTGEN_OPENMP
  if (parallel_enabled() && n > 1) {
#pragma omp parallel for schedule(dynamic)
    for (long i = 0; i < static_cast<long>(n); ++i) body(static_cast<size_t>(i));
    return;
  }
#endif
  for (size_t i = 0; i < n; ++i) body(i);
}

}  // namespace justgen::kernels
