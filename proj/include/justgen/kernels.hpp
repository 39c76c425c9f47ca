#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "justgen/matrix.hpp"

namespace justgen::kernels {

// Dense kernels with OpenMP-parallel and serial reference implementations.
// Parallel variants split work across independent output rows only; each
// element is produced by one thread with the same serial inner loop, so the
// parallel results are bitwise identical to the reference ones (asserted in
// the unit tests, timed against each other in the bench_kernels tool).

// Process-wide switch; the parallel entry points fall back to the serial
// implementations when disabled or when built without OpenMP.
void set_parallel(bool enabled);
bool parallel_enabled();

// C = op_a(A) * op_b(B), shapes checked.  trans_a/trans_b transpose the
// logical operand without materializing it.
void gemm_serial(const Matrix& a, bool trans_a, const Matrix& b, bool trans_b, Matrix& c);
void gemm(const Matrix& a, bool trans_a, const Matrix& b, bool trans_b, Matrix& c);
Matrix matmul(const Matrix& a, bool trans_a, const Matrix& b, bool trans_b);

// scores[i] = dot(rows[i], query); rows is a flat row-major [count, dim]
// f32 buffer, accumulation in double.
void score_rows_serial(const float* rows, size_t count, int dim, const double* query, double* scores);
void score_rows(const float* rows, size_t count, int dim, const double* query, double* scores);

// Indices of the top-k scores, ordered by (score desc, tie_key asc).
// tie_key supplies a total order for equal scores.
std::vector<size_t> top_k(const std::vector<double>& scores, size_t k,
                          const std::function<bool(size_t, size_t)>& tie_before);

// Ordered parallel-for: body(i) must be independent across i; results are
// written to per-index slots by the caller, so scheduling cannot change them.
void parallel_for(size_t n, const std::function<void(size_t)>& body);

}  // namespace justgen::kernels
