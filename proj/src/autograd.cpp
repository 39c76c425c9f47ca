#include "justgen/autograd.hpp"

#include <cmath>

#include "justgen/errors.hpp"
#include "justgen/kernels.hpp"

namespace justgen::ad {

namespace {
constexpr double kRmsEps = 1e-6;
constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;

enum class Op : unsigned char {
  Leaf,
  Add,
  AddBias,
  Sub,
  Mul,
  Scale,
  Neg,
  Log,
  Exp,
  Gelu,
  MatMul,
  SliceRows,
  SliceCols,
  ConcatRows,
  ConcatCols,
  SoftmaxRows,
  LogSoftmaxRows,
  RmsNorm,
  MeanAll,
  SumAll,
  MeanRows,
  Embed,
  PickEntries,
  StopGrad,
};
}  // namespace

struct Tape::Node {
  Op op = Op::Leaf;
  int a = -1, b = -1;
  Matrix value;
  const Matrix* external = nullptr;  // leaf value owned by the caller
  Matrix grad;
  bool has_grad = false;
  bool needed = false;
  int param_id = -1;
  bool ta = false, tb = false;
  double scalar_aux = 0.0;
  int i0 = 0, i1 = 0;
  std::vector<int> ids;       // embed/pick ids or concat parents
  std::vector<double> auxd;   // rmsnorm row scales

  const Matrix& val() const { return external ? *external : value; }
};

void GradVec::ensure(int param_id, int rows, int cols) {
  if (param_id >= static_cast<int>(g.size())) g.resize(static_cast<size_t>(param_id) + 1);
  Matrix& m = g[static_cast<size_t>(param_id)];
  if (m.rows != rows || m.cols != cols) m = Matrix(rows, cols);
}

void GradVec::add(int param_id, const Matrix& grad) {
  ensure(param_id, grad.rows, grad.cols);
  Matrix& m = g[static_cast<size_t>(param_id)];
  for (size_t i = 0; i < grad.data.size(); ++i) m.data[i] += grad.data[i];
}

void GradVec::accumulate(const GradVec& other, double scale) {
  if (other.g.size() > g.size()) g.resize(other.g.size());
  for (size_t p = 0; p < other.g.size(); ++p) {
    const Matrix& src = other.g[p];
    if (src.data.empty()) continue;
    Matrix& dst = g[p];
    if (dst.rows != src.rows || dst.cols != src.cols) dst = Matrix(src.rows, src.cols);
    for (size_t i = 0; i < src.data.size(); ++i) dst.data[i] += scale * src.data[i];
  }
}

double GradVec::max_abs(int param_id) const {
  if (param_id < 0 || param_id >= static_cast<int>(g.size())) return 0.0;
  double m = 0.0;
  for (double v : g[static_cast<size_t>(param_id)].data) m = std::max(m, std::fabs(v));
  return m;
}

Tape::Tape() { nodes_.reserve(512); }
Tape::~Tape() = default;

size_t Tape::node_count() const { return nodes_.size(); }

Var Tape::push(Node n) {
  nodes_.push_back(std::move(n));
  return Var{static_cast<int>(nodes_.size()) - 1};
}

const Matrix& Tape::val(Var v) const {
  if (!v.valid() || v.id >= static_cast<int>(nodes_.size())) fail(ErrorKind::Internal, "invalid tape handle");
  return nodes_[static_cast<size_t>(v.id)].val();
}

double Tape::scalar(Var v) const {
  const Matrix& m = val(v);
  if (m.rows != 1 || m.cols != 1) fail(ErrorKind::Internal, "expected a 1x1 node");
  return m.data[0];
}

Matrix& Tape::grad_of(int id) {
  Node& n = nodes_[static_cast<size_t>(id)];
  if (!n.has_grad) {
    const Matrix& v = n.val();
    n.grad = Matrix(v.rows, v.cols);
    n.has_grad = true;
  }
  return n.grad;
}

Var Tape::constant(Matrix value) {
  Node n;
  n.op = Op::Leaf;
  n.value = std::move(value);
  return push(std::move(n));
}

Var Tape::constant_view(const Matrix* value) {
  Node n;
  n.op = Op::Leaf;
  n.external = value;
  return push(std::move(n));
}

Var Tape::param(int param_id, const Matrix* value) {
  Node n;
  n.op = Op::Leaf;
  n.external = value;
  n.param_id = param_id;
  return push(std::move(n));
}

Var Tape::scalar_const(double v) {
  Matrix m(1, 1);
  m.data[0] = v;
  return constant(std::move(m));
}

Var Tape::add(Var a, Var b) {
  const Matrix& av = val(a);
  const Matrix& bv = val(b);
  if (!av.same_shape(bv)) fail(ErrorKind::DimensionMismatch, "add: shape mismatch");
  Node n;
  n.op = Op::Add;
  n.a = a.id;
  n.b = b.id;
  n.value = av;
  for (size_t i = 0; i < n.value.data.size(); ++i) n.value.data[i] += bv.data[i];
  return push(std::move(n));
}

Var Tape::add_bias(Var a, Var b) {
  const Matrix& av = val(a);
  const Matrix& bv = val(b);
  if (bv.rows != 1 || bv.cols != av.cols) fail(ErrorKind::DimensionMismatch, "add_bias: shape mismatch");
  Node n;
  n.op = Op::AddBias;
  n.a = a.id;
  n.b = b.id;
  n.value = av;
  for (int i = 0; i < av.rows; ++i)
    for (int j = 0; j < av.cols; ++j) n.value.at(i, j) += bv.at(0, j);
  return push(std::move(n));
}

Var Tape::sub(Var a, Var b) {
  const Matrix& av = val(a);
  const Matrix& bv = val(b);
  if (!av.same_shape(bv)) fail(ErrorKind::DimensionMismatch, "sub: shape mismatch");
  Node n;
  n.op = Op::Sub;
  n.a = a.id;
  n.b = b.id;
  n.value = av;
  for (size_t i = 0; i < n.value.data.size(); ++i) n.value.data[i] -= bv.data[i];
  return push(std::move(n));
}

Var Tape::mul(Var a, Var b) {
  const Matrix& av = val(a);
  const Matrix& bv = val(b);
  if (!av.same_shape(bv)) fail(ErrorKind::DimensionMismatch, "mul: shape mismatch");
  Node n;
  n.op = Op::Mul;
  n.a = a.id;
  n.b = b.id;
  n.value = av;
  for (size_t i = 0; i < n.value.data.size(); ++i) n.value.data[i] *= bv.data[i];
  return push(std::move(n));
}

Var Tape::scale(Var a, double c) {
  Node n;
  n.op = Op::Scale;
  n.a = a.id;
  n.scalar_aux = c;
  n.value = val(a);
  for (double& v : n.value.data) v *= c;
  return push(std::move(n));
}

Var Tape::neg(Var a) { return scale(a, -1.0); }

Var Tape::log_elem(Var a) {
  Node n;
  n.op = Op::Log;
  n.a = a.id;
  n.value = val(a);
  for (double& v : n.value.data) v = std::log(v);
  return push(std::move(n));
}

Var Tape::exp_elem(Var a) {
  Node n;
  n.op = Op::Exp;
  n.a = a.id;
  n.value = val(a);
  for (double& v : n.value.data) v = std::exp(v);
  return push(std::move(n));
}

Var Tape::gelu(Var a) {
  Node n;
  n.op = Op::Gelu;
  n.a = a.id;
  n.value = val(a);
  for (double& v : n.value.data) v = v * 0.5 * (1.0 + std::erf(v * kInvSqrt2));
  return push(std::move(n));
}

Var Tape::matmul(Var a, bool trans_a, Var b, bool trans_b) {
  Node n;
  n.op = Op::MatMul;
  n.a = a.id;
  n.b = b.id;
  n.ta = trans_a;
  n.tb = trans_b;
  kernels::gemm(val(a), trans_a, val(b), trans_b, n.value);
  return push(std::move(n));
}

Var Tape::slice_rows(Var a, int r0, int r1) {
  const Matrix& av = val(a);
  if (r0 < 0 || r1 > av.rows || r0 >= r1) fail(ErrorKind::DimensionMismatch, "slice_rows: bad range");
  Node n;
  n.op = Op::SliceRows;
  n.a = a.id;
  n.i0 = r0;
  n.i1 = r1;
  n.value = Matrix(r1 - r0, av.cols);
  for (int i = r0; i < r1; ++i)
    for (int j = 0; j < av.cols; ++j) n.value.at(i - r0, j) = av.at(i, j);
  return push(std::move(n));
}

Var Tape::slice_cols(Var a, int c0, int c1) {
  const Matrix& av = val(a);
  if (c0 < 0 || c1 > av.cols || c0 >= c1) fail(ErrorKind::DimensionMismatch, "slice_cols: bad range");
  Node n;
  n.op = Op::SliceCols;
  n.a = a.id;
  n.i0 = c0;
  n.i1 = c1;
  n.value = Matrix(av.rows, c1 - c0);
  for (int i = 0; i < av.rows; ++i)
    for (int j = c0; j < c1; ++j) n.value.at(i, j - c0) = av.at(i, j);
  return push(std::move(n));
}

Var Tape::concat_rows(const std::vector<Var>& parts) {
  if (parts.empty()) fail(ErrorKind::Internal, "concat_rows: no parts");
  int rows = 0;
  const int cols = val(parts[0]).cols;
  for (Var p : parts) {
    if (val(p).cols != cols) fail(ErrorKind::DimensionMismatch, "concat_rows: column mismatch");
    rows += val(p).rows;
  }
  Node n;
  n.op = Op::ConcatRows;
  n.value = Matrix(rows, cols);
  int r = 0;
  for (Var p : parts) {
    n.ids.push_back(p.id);
    const Matrix& pv = val(p);
    for (int i = 0; i < pv.rows; ++i)
      for (int j = 0; j < cols; ++j) n.value.at(r + i, j) = pv.at(i, j);
    r += pv.rows;
  }
  return push(std::move(n));
}

Var Tape::concat_cols(const std::vector<Var>& parts) {
  if (parts.empty()) fail(ErrorKind::Internal, "concat_cols: no parts");
  int cols = 0;
  const int rows = val(parts[0]).rows;
  for (Var p : parts) {
    if (val(p).rows != rows) fail(ErrorKind::DimensionMismatch, "concat_cols: row mismatch");
    cols += val(p).cols;
  }
  Node n;
  n.op = Op::ConcatCols;
  n.value = Matrix(rows, cols);
  int c = 0;
  for (Var p : parts) {
    n.ids.push_back(p.id);
    const Matrix& pv = val(p);
    for (int i = 0; i < rows; ++i)
      for (int j = 0; j < pv.cols; ++j) n.value.at(i, c + j) = pv.at(i, j);
    c += pv.cols;
  }
  return push(std::move(n));
}

Var Tape::softmax_rows(Var a) {
  Node n;
  n.op = Op::SoftmaxRows;
  n.a = a.id;
  n.value = val(a);
  for (int i = 0; i < n.value.rows; ++i) {
    double* row = &n.value.data[static_cast<size_t>(i) * n.value.cols];
    double mx = row[0];
    for (int j = 1; j < n.value.cols; ++j) mx = std::max(mx, row[j]);
    double sum = 0.0;
    for (int j = 0; j < n.value.cols; ++j) {
      row[j] = std::exp(row[j] - mx);
      sum += row[j];
    }
    for (int j = 0; j < n.value.cols; ++j) row[j] /= sum;
  }
  return push(std::move(n));
}

Var Tape::log_softmax_rows(Var a) {
  Node n;
  n.op = Op::LogSoftmaxRows;
  n.a = a.id;
  n.value = val(a);
  for (int i = 0; i < n.value.rows; ++i) {
    double* row = &n.value.data[static_cast<size_t>(i) * n.value.cols];
    double mx = row[0];
    for (int j = 1; j < n.value.cols; ++j) mx = std::max(mx, row[j]);
    double sum = 0.0;
    for (int j = 0; j < n.value.cols; ++j) sum += std::exp(row[j] - mx);
    const double lse = mx + std::log(sum);
    for (int j = 0; j < n.value.cols; ++j) row[j] -= lse;
  }
  return push(std::move(n));
}

Var Tape::rmsnorm(Var a, Var gain) {
  const Matrix& av = val(a);
  const Matrix& gv = val(gain);
  if (gv.rows != 1 || gv.cols != av.cols) fail(ErrorKind::DimensionMismatch, "rmsnorm: gain shape mismatch");
  Node n;
  n.op = Op::RmsNorm;
  n.a = a.id;
  n.b = gain.id;
  n.value = Matrix(av.rows, av.cols);
  n.auxd.resize(static_cast<size_t>(av.rows));
  for (int i = 0; i < av.rows; ++i) {
    double ms = 0.0;
    for (int j = 0; j < av.cols; ++j) ms += av.at(i, j) * av.at(i, j);
    ms = ms / av.cols + kRmsEps;
    const double r = 1.0 / std::sqrt(ms);
    n.auxd[static_cast<size_t>(i)] = r;
    for (int j = 0; j < av.cols; ++j) n.value.at(i, j) = av.at(i, j) * r * gv.at(0, j);
  }
  return push(std::move(n));
}

Var Tape::mean_all(Var a) {
  const Matrix& av = val(a);
  Node n;
  n.op = Op::MeanAll;
  n.a = a.id;
  n.value = Matrix(1, 1);
  double s = 0.0;
  for (double v : av.data) s += v;
  n.value.data[0] = s / static_cast<double>(av.data.size());
  return push(std::move(n));
}

Var Tape::sum_all(Var a) {
  const Matrix& av = val(a);
  Node n;
  n.op = Op::SumAll;
  n.a = a.id;
  n.value = Matrix(1, 1);
  double s = 0.0;
  for (double v : av.data) s += v;
  n.value.data[0] = s;
  return push(std::move(n));
}

Var Tape::mean_rows(Var a) {
  const Matrix& av = val(a);
  Node n;
  n.op = Op::MeanRows;
  n.a = a.id;
  n.value = Matrix(1, av.cols);
  for (int j = 0; j < av.cols; ++j) {
    double s = 0.0;
    for (int i = 0; i < av.rows; ++i) s += av.at(i, j);
    n.value.at(0, j) = s / av.rows;
  }
  return push(std::move(n));
}

Var Tape::embed(Var table, const std::vector<int>& ids) {
  const Matrix& tv = val(table);
  Node n;
  n.op = Op::Embed;
  n.a = table.id;
  n.ids = ids;
  n.value = Matrix(static_cast<int>(ids.size()), tv.cols);
  for (size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || ids[i] >= tv.rows) fail(ErrorKind::UnknownToken, "embed: id out of range");
    for (int j = 0; j < tv.cols; ++j) n.value.at(static_cast<int>(i), j) = tv.at(ids[i], j);
  }
  return push(std::move(n));
}

Var Tape::pick_entries(Var a, const std::vector<int>& cols) {
  const Matrix& av = val(a);
  if (static_cast<int>(cols.size()) != av.rows) fail(ErrorKind::DimensionMismatch, "pick_entries: one column per row");
  Node n;
  n.op = Op::PickEntries;
  n.a = a.id;
  n.ids = cols;
  n.value = Matrix(av.rows, 1);
  for (int i = 0; i < av.rows; ++i) {
    if (cols[static_cast<size_t>(i)] < 0 || cols[static_cast<size_t>(i)] >= av.cols)
      fail(ErrorKind::DimensionMismatch, "pick_entries: column out of range");
    n.value.at(i, 0) = av.at(i, cols[static_cast<size_t>(i)]);
  }
  return push(std::move(n));
}

Var Tape::stop_grad(Var a) {
  Node n;
  n.op = Op::StopGrad;
  n.a = a.id;
  n.value = val(a);
  return push(std::move(n));
}

void Tape::backward(Var loss, GradVec& sink) {
  const Matrix& lv = val(loss);
  if (lv.rows != 1 || lv.cols != 1) fail(ErrorKind::Internal, "backward: loss must be 1x1");

  // Mark the subgraph that can influence the loss; StopGrad cuts the walk.
  std::vector<int> stack{loss.id};
  nodes_[static_cast<size_t>(loss.id)].needed = true;
  while (!stack.empty()) {
    const int id = stack.back();
    stack.pop_back();
    const Node& n = nodes_[static_cast<size_t>(id)];
    if (n.op == Op::StopGrad) continue;
    auto visit = [&](int p) {
      if (p >= 0 && !nodes_[static_cast<size_t>(p)].needed) {
        nodes_[static_cast<size_t>(p)].needed = true;
        stack.push_back(p);
      }
    };
    visit(n.a);
    visit(n.b);
    if (n.op == Op::ConcatRows || n.op == Op::ConcatCols)
      for (int p : n.ids) visit(p);
  }

  grad_of(loss.id).data[0] = 1.0;

  for (int id = loss.id; id >= 0; --id) {
    Node& n = nodes_[static_cast<size_t>(id)];
    if (!n.needed || !n.has_grad) continue;
    const Matrix& g = n.grad;
    switch (n.op) {
      case Op::Leaf:
        if (n.param_id >= 0) sink.add(n.param_id, g);
        break;
      case Op::StopGrad:
        break;
      case Op::Add: {
        Matrix& ga = grad_of(n.a);
        Matrix& gb = grad_of(n.b);
        for (size_t i = 0; i < g.data.size(); ++i) {
          ga.data[i] += g.data[i];
          gb.data[i] += g.data[i];
        }
        break;
      }
      case Op::AddBias: {
        Matrix& ga = grad_of(n.a);
        Matrix& gb = grad_of(n.b);
        for (size_t i = 0; i < g.data.size(); ++i) ga.data[i] += g.data[i];
        for (int i = 0; i < g.rows; ++i)
          for (int j = 0; j < g.cols; ++j) gb.at(0, j) += g.at(i, j);
        break;
      }
      case Op::Sub: {
        Matrix& ga = grad_of(n.a);
        Matrix& gb = grad_of(n.b);
        for (size_t i = 0; i < g.data.size(); ++i) {
          ga.data[i] += g.data[i];
          gb.data[i] -= g.data[i];
        }
        break;
      }
      case Op::Mul: {
        const Matrix& av = nodes_[static_cast<size_t>(n.a)].val();
        const Matrix& bv = nodes_[static_cast<size_t>(n.b)].val();
        Matrix& ga = grad_of(n.a);
        Matrix& gb = grad_of(n.b);
        for (size_t i = 0; i < g.data.size(); ++i) {
          ga.data[i] += g.data[i] * bv.data[i];
          gb.data[i] += g.data[i] * av.data[i];
        }
        break;
      }
      case Op::Scale: {
        Matrix& ga = grad_of(n.a);
        for (size_t i = 0; i < g.data.size(); ++i) ga.data[i] += n.scalar_aux * g.data[i];
        break;
      }
      case Op::Log: {
        const Matrix& av = nodes_[static_cast<size_t>(n.a)].val();
        Matrix& ga = grad_of(n.a);
        for (size_t i = 0; i < g.data.size(); ++i) ga.data[i] += g.data[i] / av.data[i];
        break;
      }
      case Op::Exp: {
        Matrix& ga = grad_of(n.a);
        for (size_t i = 0; i < g.data.size(); ++i) ga.data[i] += g.data[i] * n.value.data[i];
        break;
      }
      case Op::Gelu: {
        const Matrix& av = nodes_[static_cast<size_t>(n.a)].val();
        Matrix& ga = grad_of(n.a);
        for (size_t i = 0; i < g.data.size(); ++i) {
          const double x = av.data[i];
          const double phi_cdf = 0.5 * (1.0 + std::erf(x * kInvSqrt2));
          const double phi_pdf = kInvSqrt2Pi * std::exp(-0.5 * x * x);
          ga.data[i] += g.data[i] * (phi_cdf + x * phi_pdf);
        }
        break;
      }
      case Op::MatMul: {
        const Matrix& av = nodes_[static_cast<size_t>(n.a)].val();
        const Matrix& bv = nodes_[static_cast<size_t>(n.b)].val();
        Matrix ga_inc, gb_inc;
        if (!n.ta && !n.tb) {
          kernels::gemm(g, false, bv, true, ga_inc);
          kernels::gemm(av, true, g, false, gb_inc);
        } else if (n.ta && !n.tb) {
          kernels::gemm(bv, false, g, true, ga_inc);
          kernels::gemm(av, false, g, false, gb_inc);
        } else if (!n.ta && n.tb) {
          kernels::gemm(g, false, bv, false, ga_inc);
          kernels::gemm(g, true, av, false, gb_inc);
        } else {
          kernels::gemm(bv, true, g, true, ga_inc);
          kernels::gemm(g, true, av, true, gb_inc);
        }
        Matrix& ga = grad_of(n.a);
        Matrix& gb = grad_of(n.b);
        for (size_t i = 0; i < ga.data.size(); ++i) ga.data[i] += ga_inc.data[i];
        for (size_t i = 0; i < gb.data.size(); ++i) gb.data[i] += gb_inc.data[i];
        break;
      }
      case Op::SliceRows: {
        Matrix& ga = grad_of(n.a);
        for (int i = n.i0; i < n.i1; ++i)
          for (int j = 0; j < g.cols; ++j) ga.at(i, j) += g.at(i - n.i0, j);
        break;
      }
      case Op::SliceCols: {
        Matrix& ga = grad_of(n.a);
        for (int i = 0; i < g.rows; ++i)
          for (int j = n.i0; j < n.i1; ++j) ga.at(i, j) += g.at(i, j - n.i0);
        break;
      }
      case Op::ConcatRows: {
        int r = 0;
        for (int pid : n.ids) {
          Matrix& gp = grad_of(pid);
          for (int i = 0; i < gp.rows; ++i)
            for (int j = 0; j < gp.cols; ++j) gp.at(i, j) += g.at(r + i, j);
          r += gp.rows;
        }
        break;
      }
      case Op::ConcatCols: {
        int c = 0;
        for (int pid : n.ids) {
          Matrix& gp = grad_of(pid);
          for (int i = 0; i < gp.rows; ++i)
            for (int j = 0; j < gp.cols; ++j) gp.at(i, j) += g.at(i, c + j);
          c += gp.cols;
        }
        break;
      }
      case Op::SoftmaxRows: {
        // dx = p * (g - sum(g * p)) per row.
        Matrix& ga = grad_of(n.a);
        for (int i = 0; i < g.rows; ++i) {
          double dot = 0.0;
          for (int j = 0; j < g.cols; ++j) dot += g.at(i, j) * n.value.at(i, j);
          for (int j = 0; j < g.cols; ++j) ga.at(i, j) += n.value.at(i, j) * (g.at(i, j) - dot);
        }
        break;
      }
      case Op::LogSoftmaxRows: {
        // dx = g - softmax * sum(g) per row.
        Matrix& ga = grad_of(n.a);
        for (int i = 0; i < g.rows; ++i) {
          double gsum = 0.0;
          for (int j = 0; j < g.cols; ++j) gsum += g.at(i, j);
          for (int j = 0; j < g.cols; ++j) ga.at(i, j) += g.at(i, j) - std::exp(n.value.at(i, j)) * gsum;
        }
        break;
      }
      case Op::RmsNorm: {
        // y = x * r * gain with r = 1/sqrt(mean(x^2)+eps):
        //   dgain_j = sum_i x_ij r_i g_ij
        //   dx_ij   = r_i gain_j g_ij - x_ij (r_i^3 / n) sum_k gain_k g_ik x_ik
        const Matrix& xv = nodes_[static_cast<size_t>(n.a)].val();
        const Matrix& gainv = nodes_[static_cast<size_t>(n.b)].val();
        Matrix& gx = grad_of(n.a);
        Matrix& ggain = grad_of(n.b);
        const int cols = xv.cols;
        for (int i = 0; i < xv.rows; ++i) {
          const double r = n.auxd[static_cast<size_t>(i)];
          double inner = 0.0;
          for (int j = 0; j < cols; ++j) inner += gainv.at(0, j) * g.at(i, j) * xv.at(i, j);
          const double c = r * r * r * inner / cols;
          for (int j = 0; j < cols; ++j) {
            gx.at(i, j) += r * gainv.at(0, j) * g.at(i, j) - xv.at(i, j) * c;
            ggain.at(0, j) += xv.at(i, j) * r * g.at(i, j);
          }
        }
        break;
      }
      case Op::MeanAll: {
        const Matrix& av = nodes_[static_cast<size_t>(n.a)].val();
        Matrix& ga = grad_of(n.a);
        const double s = g.data[0] / static_cast<double>(av.data.size());
        for (double& v : ga.data) v += s;
        break;
      }
      case Op::SumAll: {
        Matrix& ga = grad_of(n.a);
        const double s = g.data[0];
        for (double& v : ga.data) v += s;
        break;
      }
      case Op::MeanRows: {
        Matrix& ga = grad_of(n.a);
        for (int i = 0; i < ga.rows; ++i)
          for (int j = 0; j < ga.cols; ++j) ga.at(i, j) += g.at(0, j) / ga.rows;
        break;
      }
      case Op::Embed: {
        Matrix& ga = grad_of(n.a);
        for (size_t i = 0; i < n.ids.size(); ++i)
          for (int j = 0; j < g.cols; ++j) ga.at(n.ids[i], j) += g.at(static_cast<int>(i), j);
        break;
      }
      case Op::PickEntries: {
        Matrix& ga = grad_of(n.a);
        for (int i = 0; i < g.rows; ++i) ga.at(i, n.ids[static_cast<size_t>(i)]) += g.at(i, 0);
        break;
      }
    }
    // Free intermediate gradient storage as soon as it has been consumed.
    if (n.op != Op::Leaf) {
      n.grad = Matrix();
      n.has_grad = false;
    }
  }
}

}  // namespace justgen::ad
