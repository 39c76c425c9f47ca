#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace justgen {

class Rng;

// Dense row-major matrix of doubles.  All in-memory math runs in double so
// analytic gradients can be checked against 64-bit finite differences;
// on-disk tensor formats narrow to little-endian f32.
struct Matrix {
  int rows = 0;
  int cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(int r, int c) : rows(r), cols(c), data(static_cast<size_t>(r) * static_cast<size_t>(c), 0.0) {}

  double& at(int r, int c) { return data[static_cast<size_t>(r) * cols + c]; }
  double at(int r, int c) const { return data[static_cast<size_t>(r) * cols + c]; }
  size_t size() const { return data.size(); }
  bool same_shape(const Matrix& o) const { return rows == o.rows && cols == o.cols; }

  static Matrix zeros(int r, int c) { return Matrix(r, c); }
  static Matrix full(int r, int c, double v);
  static Matrix randn(int r, int c, double stddev, Rng& rng);
  static Matrix row_vector(const std::vector<double>& v);
};

bool bitwise_equal(const Matrix& a, const Matrix& b);

// f32 narrowing/widening for the on-disk formats.
std::vector<float> to_f32(const std::vector<double>& v);
std::vector<double> from_f32(const std::vector<float>& v);

// Raw little-endian f32 file I/O (the host is little-endian; asserted once
// at startup of the serializers).
void write_f32_file(const std::string& path, const std::vector<float>& v);
std::vector<float> read_f32_file(const std::string& path);

}  // namespace justgen
