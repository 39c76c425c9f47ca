// Times the OpenMP kernels against their serial reference implementations
// and verifies the results agree bitwise while at it.
#include <chrono>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "justgen/kernels.hpp"
#include "justgen/matrix.hpp"
#include "justgen/rng.hpp"

using justgen::Matrix;
using justgen::Rng;
namespace kernels = justgen::kernels;

namespace {

double time_ms(const std::function<void()>& fn, int repeats) {
  // One untimed warm-up run, then the best of `repeats`.
  fn();
  double best = 1e300;
  for (int r = 0; r < repeats; ++r) {
    const auto t0 = std::chrono::steady_clock::now();
    fn();
    const auto t1 = std::chrono::steady_clock::now();
    best = std::min(best, std::chrono::duration<double, std::milli>(t1 - t0).count());
  }
  return best;
}

void report(const std::string& name, double serial_ms, double parallel_ms, bool identical) {
  std::printf("%-28s %10.3f ms %10.3f ms %8.2fx   %s\n", name.c_str(), serial_ms, parallel_ms,
              serial_ms / parallel_ms, identical ? "bitwise-equal" : "MISMATCH");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Benchmark the parallel kernels against the serial references"};
  int size = 256;
  int repeats = 5;
  app.add_option("--size", size, "Square matrix dimension for the GEMM cases");
  app.add_option("--repeats", repeats, "Timing repeats (best-of)");
  CLI11_PARSE(app, argc, argv);

  Rng rng(99);
  const auto randn = [&](int r, int c) {
    Matrix m(r, c);
    for (double& v : m.data) v = rng.normal();
    return m;
  };

  std::printf("%-28s %13s %13s %9s\n", "kernel", "serial", "parallel", "speedup");

  {
    const Matrix a = randn(size, size), b = randn(size, size);
    Matrix c_serial(size, size), c_parallel(size, size);
    const double ts = time_ms([&] { kernels::gemm_serial(a, false, b, false, c_serial); }, repeats);
    kernels::set_parallel(true);
    const double tp = time_ms([&] { kernels::gemm(a, false, b, false, c_parallel); }, repeats);
    report("gemm " + std::to_string(size) + "^3", ts, tp, bitwise_equal(c_serial, c_parallel));
  }
  {
    const Matrix a = randn(size, size), b = randn(size, size);
    Matrix c_serial(size, size), c_parallel(size, size);
    const double ts = time_ms([&] { kernels::gemm_serial(a, true, b, true, c_serial); }, repeats);
    kernels::set_parallel(true);
    const double tp = time_ms([&] { kernels::gemm(a, true, b, true, c_parallel); }, repeats);
    report("gemm transposed", ts, tp, bitwise_equal(c_serial, c_parallel));
  }
  {
    const size_t count = 200000;
    const int dim = 128;
    std::vector<float> rows(count * dim);
    for (float& v : rows) v = static_cast<float>(rng.normal());
    std::vector<double> query(dim);
    for (double& v : query) v = rng.normal();
    std::vector<double> s_serial(count), s_parallel(count);
    const double ts =
        time_ms([&] { kernels::score_rows_serial(rows.data(), count, dim, query.data(), s_serial.data()); }, repeats);
    kernels::set_parallel(true);
    const double tp =
        time_ms([&] { kernels::score_rows(rows.data(), count, dim, query.data(), s_parallel.data()); }, repeats);
    bool same = true;
    for (size_t i = 0; i < count; ++i)
      if (s_serial[i] != s_parallel[i]) same = false;
    report("score_rows 200k x 128", ts, tp, same);
  }
  return 0;
}
