#include "justgen/matrix.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "justgen/errors.hpp"
#include "justgen/rng.hpp"

namespace justgen {

static_assert(std::endian::native == std::endian::little, "on-disk tensor formats assume a little-endian host");

Matrix Matrix::full(int r, int c, double v) {
  Matrix m(r, c);
  for (double& x : m.data) x = v;
  return m;
}

Matrix Matrix::randn(int r, int c, double stddev, Rng& rng) {
  Matrix m(r, c);
  for (double& x : m.data) x = stddev * rng.normal();
  return m;
}

Matrix Matrix::row_vector(const std::vector<double>& v) {
  Matrix m(1, static_cast<int>(v.size()));
  m.data = v;
  return m;
}

bool bitwise_equal(const Matrix& a, const Matrix& b) {
  if (!a.same_shape(b)) return false;
  return std::memcmp(a.data.data(), b.data.data(), a.data.size() * sizeof(double)) == 0;
}

std::vector<float> to_f32(const std::vector<double>& v) {
  std::vector<float> out(v.size());
  for (size_t i = 0; i < v.size(); ++i) out[i] = static_cast<float>(v[i]);
  return out;
}

std::vector<double> from_f32(const std::vector<float>& v) {
  std::vector<double> out(v.size());
  for (size_t i = 0; i < v.size(); ++i) out[i] = static_cast<double>(v[i]);
  return out;
}

void write_f32_file(const std::string& path, const std::vector<float>& v) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::IoError, "cannot open for writing: " + path);
  out.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(float)));
  if (!out) fail(ErrorKind::IoError, "short write: " + path);
}

std::vector<float> read_f32_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary | std::ios::ate);
  if (!in) fail(ErrorKind::IoError, "cannot open for reading: " + path);
  const std::streamsize bytes = in.tellg();
  if (bytes % sizeof(float) != 0) fail(ErrorKind::MalformedInput, "f32 file size not a multiple of 4: " + path);
  std::vector<float> v(static_cast<size_t>(bytes) / sizeof(float));
  in.seekg(0);
  in.read(reinterpret_cast<char*>(v.data()), bytes);
  if (!in) fail(ErrorKind::IoError, "short read: " + path);
  return v;
}

}  // namespace justgen
