#include "tensor.hpp"

#include <cblas.h>

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>

#include "error.hpp"

// Keep OpenBLAS single-threaded for run-to-run determinism (and because the
// matrices here are too small for threading to pay off). Weak so that a
// reference BLAS without this entry point still links.
extern "C" void openblas_set_num_threads(int) __attribute__((weak));

namespace place {

namespace {
struct BlasSetup {
  BlasSetup() {
    if (openblas_set_num_threads) openblas_set_num_threads(1);
  }
} blas_setup;

void check_shape(bool ok, const char* what) {
  if (!ok) fail(ErrorKind::InvalidArgument, std::string("shape mismatch in ") + what);
}
}  // namespace

Tensor::Tensor(int r, int c, double fill)
    : rows(r), cols(c), data(static_cast<std::size_t>(r) * c, fill) {
  if (r < 0 || c < 0) fail(ErrorKind::InvalidArgument, "negative tensor shape");
}

Tensor Tensor::scalar(double v) {
  Tensor t(1, 1);
  t.data[0] = v;
  return t;
}

Tensor Tensor::uniform(int r, int c, double scale, rng::Engine& eng) {
  Tensor t(r, c);
  for (auto& x : t.data) x = rng::uniform_real(eng, -scale, scale);
  return t;
}

bool Tensor::all_finite() const {
  for (double x : data)
    if (!std::isfinite(x)) return false;
  return true;
}

double Tensor::item() const {
  if (rows != 1 || cols != 1)
    fail(ErrorKind::InvalidArgument, "item() on a non-scalar tensor");
  return data[0];
}

void gemm(bool trans_a, bool trans_b, const Tensor& a, const Tensor& b,
          Tensor& c, bool accumulate) {
  int m = trans_a ? a.cols : a.rows;
  int k = trans_a ? a.rows : a.cols;
  int kb = trans_b ? b.cols : b.rows;
  int n = trans_b ? b.rows : b.cols;
  check_shape(k == kb, "gemm inner dimension");
  if (c.rows != m || c.cols != n) {
    check_shape(!accumulate, "gemm output");
    c = Tensor(m, n);
  }
  if (m == 0 || n == 0) return;
  if (k == 0) {
    if (!accumulate) std::fill(c.data.begin(), c.data.end(), 0.0);
    return;
  }
  cblas_dgemm(CblasRowMajor, trans_a ? CblasTrans : CblasNoTrans,
              trans_b ? CblasTrans : CblasNoTrans, m, n, k, 1.0, a.data.data(),
              a.cols, b.data.data(), b.cols, accumulate ? 1.0 : 0.0,
              c.data.data(), c.cols);
}

Tape::Id Tape::push(Node n) {
  nodes_.push_back(std::move(n));
  return static_cast<Id>(nodes_.size()) - 1;
}

Tape::Node& Tape::node(Id id) {
  if (id < 0 || id >= static_cast<Id>(nodes_.size()))
    fail(ErrorKind::Internal, "tape node id out of range");
  return nodes_[static_cast<std::size_t>(id)];
}

const Tape::Node& Tape::node(Id id) const {
  return const_cast<Tape*>(this)->node(id);
}

const Tensor& Tape::value(Id id) const { return node(id).value; }

const Tensor& Tape::grad(Id id) const { return node(id).grad; }

Tensor& Tape::grad_buf(Id id) {
  Node& n = node(id);
  if (n.grad.rows != n.value.rows || n.grad.cols != n.value.cols)
    n.grad = Tensor::zeros(n.value.rows, n.value.cols);
  return n.grad;
}

Tape::Id Tape::leaf(Tensor value, bool requires_grad) {
  Node n;
  n.op = Op::Leaf;
  n.needs_grad = requires_grad;
  n.value = std::move(value);
  return push(std::move(n));
}

Tape::Id Tape::matmul(Id a, Id b) {
  const Tensor& va = value(a);
  const Tensor& vb = value(b);
  Node n;
  n.op = Op::MatMul;
  n.inputs = {a, b};
  n.needs_grad = node(a).needs_grad || node(b).needs_grad;
  gemm(false, false, va, vb, n.value);
  return push(std::move(n));
}

Tape::Id Tape::add(Id a, Id b) {
  const Tensor& va = value(a);
  const Tensor& vb = value(b);
  check_shape(va.same_shape(vb), "add");
  Node n;
  n.op = Op::Add;
  n.inputs = {a, b};
  n.needs_grad = node(a).needs_grad || node(b).needs_grad;
  n.value = va;
  for (std::size_t i = 0; i < n.value.size(); ++i) n.value.data[i] += vb.data[i];
  return push(std::move(n));
}

Tape::Id Tape::affine(Id a, double scale, double shift) {
  Node n;
  n.op = Op::Affine;
  n.inputs = {a};
  n.needs_grad = node(a).needs_grad;
  n.s0 = scale;
  n.s1 = shift;
  n.value = value(a);
  for (auto& x : n.value.data) x = scale * x + shift;
  return push(std::move(n));
}

Tape::Id Tape::add_rowvec(Id a, Id bias) {
  const Tensor& va = value(a);
  const Tensor& vb = value(bias);
  check_shape(vb.rows == 1 && vb.cols == va.cols, "add_rowvec");
  Node n;
  n.op = Op::AddRowVec;
  n.inputs = {a, bias};
  n.needs_grad = node(a).needs_grad || node(bias).needs_grad;
  n.value = va;
  for (int r = 0; r < va.rows; ++r) {
    double* out = n.value.row(r);
    for (int c = 0; c < va.cols; ++c) out[c] += vb.data[static_cast<std::size_t>(c)];
  }
  return push(std::move(n));
}

Tape::Id Tape::relu(Id a) {
  Node n;
  n.op = Op::Relu;
  n.inputs = {a};
  n.needs_grad = node(a).needs_grad;
  n.value = value(a);
  for (auto& x : n.value.data) x = x > 0.0 ? x : 0.0;
  return push(std::move(n));
}

Tape::Id Tape::sigmoid(Id a) {
  Node n;
  n.op = Op::Sigmoid;
  n.inputs = {a};
  n.needs_grad = node(a).needs_grad;
  n.value = value(a);
  for (auto& x : n.value.data) {
    if (x >= 0.0) {
      x = 1.0 / (1.0 + std::exp(-x));
    } else {
      double e = std::exp(x);
      x = e / (1.0 + e);
    }
  }
  return push(std::move(n));
}

Tape::Id Tape::log(Id a) {
  Node n;
  n.op = Op::Log;
  n.inputs = {a};
  n.needs_grad = node(a).needs_grad;
  n.value = value(a);
  for (auto& x : n.value.data) {
    if (x <= 0.0) fail(ErrorKind::Numeric, "log of non-positive value");
    x = std::log(x);
  }
  return push(std::move(n));
}

Tape::Id Tape::clamp(Id a, double lo, double hi) {
  if (!(lo < hi)) fail(ErrorKind::InvalidArgument, "clamp bounds out of order");
  Node n;
  n.op = Op::Clamp;
  n.inputs = {a};
  n.needs_grad = node(a).needs_grad;
  n.s0 = lo;
  n.s1 = hi;
  n.value = value(a);
  for (auto& x : n.value.data) x = std::min(hi, std::max(lo, x));
  return push(std::move(n));
}

Tape::Id Tape::row_gather(Id a, std::vector<int> rows) {
  const Tensor& va = value(a);
  Node n;
  n.op = Op::RowGather;
  n.inputs = {a};
  n.needs_grad = node(a).needs_grad;
  n.value = Tensor(static_cast<int>(rows.size()), va.cols);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    int r = rows[i];
    if (r < 0 || r >= va.rows)
      fail(ErrorKind::InvalidArgument, "row_gather index out of range");
    std::copy_n(va.row(r), va.cols, n.value.row(static_cast<int>(i)));
  }
  n.rows = std::move(rows);
  return push(std::move(n));
}

Tape::Id Tape::concat_rows(const std::vector<Id>& parts) {
  if (parts.empty()) fail(ErrorKind::InvalidArgument, "concat_rows of nothing");
  int cols = value(parts[0]).cols;
  int rows = 0;
  bool needs = false;
  for (Id p : parts) {
    check_shape(value(p).cols == cols, "concat_rows");
    rows += value(p).rows;
    needs = needs || node(p).needs_grad;
  }
  Node n;
  n.op = Op::ConcatRows;
  n.inputs = parts;
  n.needs_grad = needs;
  n.value = Tensor(rows, cols);
  int at = 0;
  for (Id p : parts) {
    const Tensor& v = value(p);
    std::copy(v.data.begin(), v.data.end(), n.value.row(at));
    at += v.rows;
  }
  return push(std::move(n));
}

Tape::Id Tape::slice_rows(Id a, int begin, int end) {
  const Tensor& va = value(a);
  if (begin < 0 || end > va.rows || begin > end)
    fail(ErrorKind::InvalidArgument, "slice_rows range out of bounds");
  Node n;
  n.op = Op::SliceRows;
  n.inputs = {a};
  n.needs_grad = node(a).needs_grad;
  n.i0 = begin;
  n.i1 = end;
  n.value = Tensor(end - begin, va.cols);
  std::copy_n(va.row(begin), n.value.size(), n.value.data.data());
  return push(std::move(n));
}

Tape::Id Tape::segment_mean(Id a, const SegmentSpec* spec) {
  const Tensor& va = value(a);
  Node n;
  n.op = Op::SegmentMean;
  n.inputs = {a};
  n.needs_grad = node(a).needs_grad;
  n.spec = spec;
  n.value = Tensor(static_cast<int>(spec->dst.size()), va.cols);
  for (std::size_t i = 0; i < spec->dst.size(); ++i) {
    int lo = spec->src_offsets[i];
    int hi = spec->src_offsets[i + 1];
    if (hi <= lo) fail(ErrorKind::Internal, "empty segment in segment_mean");
    double* out = n.value.row(static_cast<int>(i));
    for (int s = lo; s < hi; ++s) {
      const double* in = va.row(spec->src[static_cast<std::size_t>(s)]);
      for (int c = 0; c < va.cols; ++c) out[c] += in[c];
    }
    double inv = 1.0 / (hi - lo);
    for (int c = 0; c < va.cols; ++c) out[c] *= inv;
  }
  return push(std::move(n));
}

Tape::Id Tape::scatter_add_rows(Id base, Id compact, const SegmentSpec* spec) {
  const Tensor& vb = value(base);
  const Tensor& vc = value(compact);
  check_shape(vc.cols == vb.cols, "scatter_add_rows");
  check_shape(vc.rows == static_cast<int>(spec->dst.size()), "scatter_add_rows dst");
  Node n;
  n.op = Op::ScatterAddRows;
  n.inputs = {base, compact};
  n.needs_grad = node(base).needs_grad || node(compact).needs_grad;
  n.spec = spec;
  n.value = vb;
  for (std::size_t i = 0; i < spec->dst.size(); ++i) {
    int r = spec->dst[i];
    if (r < 0 || r >= vb.rows)
      fail(ErrorKind::InvalidArgument, "scatter_add_rows index out of range");
    double* out = n.value.row(r);
    const double* in = vc.row(static_cast<int>(i));
    for (int c = 0; c < vb.cols; ++c) out[c] += in[c];
  }
  return push(std::move(n));
}

Tape::Id Tape::mean_rows(Id a, std::vector<int> rows) {
  const Tensor& va = value(a);
  if (rows.empty()) fail(ErrorKind::InvalidArgument, "mean_rows over no rows");
  Node n;
  n.op = Op::MeanRows;
  n.inputs = {a};
  n.needs_grad = node(a).needs_grad;
  n.value = Tensor(1, va.cols);
  for (int r : rows) {
    if (r < 0 || r >= va.rows)
      fail(ErrorKind::InvalidArgument, "mean_rows index out of range");
    const double* in = va.row(r);
    for (int c = 0; c < va.cols; ++c) n.value.data[static_cast<std::size_t>(c)] += in[c];
  }
  double inv = 1.0 / static_cast<double>(rows.size());
  for (auto& x : n.value.data) x *= inv;
  n.rows = std::move(rows);
  return push(std::move(n));
}

Tape::Id Tape::rows_dot(Id a, Id b) {
  const Tensor& va = value(a);
  const Tensor& vb = value(b);
  check_shape(vb.rows == 1 && vb.cols == va.cols, "rows_dot");
  Node n;
  n.op = Op::RowsDot;
  n.inputs = {a, b};
  n.needs_grad = node(a).needs_grad || node(b).needs_grad;
  n.value = Tensor(va.rows, 1);
  for (int r = 0; r < va.rows; ++r) {
    const double* in = va.row(r);
    double acc = 0.0;
    for (int c = 0; c < va.cols; ++c) acc += in[c] * vb.data[static_cast<std::size_t>(c)];
    n.value.data[static_cast<std::size_t>(r)] = acc;
  }
  return push(std::move(n));
}

Tape::Id Tape::sum(Id a) {
  Node n;
  n.op = Op::Sum;
  n.inputs = {a};
  n.needs_grad = node(a).needs_grad;
  double acc = 0.0;
  for (double x : value(a).data) acc += x;
  n.value = Tensor::scalar(acc);
  return push(std::move(n));
}

void Tape::backward(Id loss) {
  Node& top = node(loss);
  if (top.value.rows != 1 || top.value.cols != 1)
    fail(ErrorKind::InvalidArgument, "backward target must be scalar");
  if (!top.needs_grad)
    fail(ErrorKind::InvalidArgument, "backward on detached loss");

  for (auto& n : nodes_) n.grad = Tensor();
  grad_buf(loss).data[0] = 1.0;

  for (Id id = loss; id >= 0; --id) {
    Node& n = node(id);
    if (!n.needs_grad || n.grad.size() == 0) continue;
    const Tensor& gz = n.grad;
    auto wants = [&](int slot) { return node(n.inputs[static_cast<std::size_t>(slot)]).needs_grad; };

    switch (n.op) {
      case Op::Leaf:
        break;
      case Op::MatMul: {
        Id a = n.inputs[0], b = n.inputs[1];
        if (wants(0)) gemm(false, true, gz, value(b), grad_buf(a), true);
        if (wants(1)) gemm(true, false, value(a), gz, grad_buf(b), true);
        break;
      }
      case Op::Add:
        for (int slot = 0; slot < 2; ++slot)
          if (wants(slot)) {
            Tensor& g = grad_buf(n.inputs[static_cast<std::size_t>(slot)]);
            for (std::size_t i = 0; i < g.size(); ++i) g.data[i] += gz.data[i];
          }
        break;
      case Op::Affine:
        if (wants(0)) {
          Tensor& g = grad_buf(n.inputs[0]);
          for (std::size_t i = 0; i < g.size(); ++i) g.data[i] += n.s0 * gz.data[i];
        }
        break;
      case Op::AddRowVec: {
        if (wants(0)) {
          Tensor& g = grad_buf(n.inputs[0]);
          for (std::size_t i = 0; i < g.size(); ++i) g.data[i] += gz.data[i];
        }
        if (wants(1)) {
          Tensor& g = grad_buf(n.inputs[1]);
          for (int r = 0; r < gz.rows; ++r) {
            const double* in = gz.row(r);
            for (int c = 0; c < gz.cols; ++c) g.data[static_cast<std::size_t>(c)] += in[c];
          }
        }
        break;
      }
      case Op::Relu:
        if (wants(0)) {
          Tensor& g = grad_buf(n.inputs[0]);
          const Tensor& x = value(n.inputs[0]);
          for (std::size_t i = 0; i < g.size(); ++i)
            if (x.data[i] > 0.0) g.data[i] += gz.data[i];
        }
        break;
      case Op::Sigmoid:
        if (wants(0)) {
          Tensor& g = grad_buf(n.inputs[0]);
          for (std::size_t i = 0; i < g.size(); ++i) {
            double s = n.value.data[i];
            g.data[i] += gz.data[i] * s * (1.0 - s);
          }
        }
        break;
      case Op::Log:
        if (wants(0)) {
          Tensor& g = grad_buf(n.inputs[0]);
          const Tensor& x = value(n.inputs[0]);
          for (std::size_t i = 0; i < g.size(); ++i) g.data[i] += gz.data[i] / x.data[i];
        }
        break;
      case Op::Clamp:
        if (wants(0)) {
          Tensor& g = grad_buf(n.inputs[0]);
          const Tensor& x = value(n.inputs[0]);
          for (std::size_t i = 0; i < g.size(); ++i)
            if (x.data[i] > n.s0 && x.data[i] < n.s1) g.data[i] += gz.data[i];
        }
        break;
      case Op::RowGather:
        if (wants(0)) {
          Tensor& g = grad_buf(n.inputs[0]);
          for (std::size_t i = 0; i < n.rows.size(); ++i) {
            double* out = g.row(n.rows[i]);
            const double* in = gz.row(static_cast<int>(i));
            for (int c = 0; c < gz.cols; ++c) out[c] += in[c];
          }
        }
        break;
      case Op::ConcatRows: {
        int at = 0;
        for (std::size_t slot = 0; slot < n.inputs.size(); ++slot) {
          const Tensor& v = value(n.inputs[slot]);
          if (node(n.inputs[slot]).needs_grad) {
            Tensor& g = grad_buf(n.inputs[slot]);
            for (std::size_t i = 0; i < g.size(); ++i)
              g.data[i] += gz.data[static_cast<std::size_t>(at) * gz.cols + i];
          }
          at += v.rows;
        }
        break;
      }
      case Op::SliceRows:
        if (wants(0)) {
          Tensor& g = grad_buf(n.inputs[0]);
          for (std::size_t i = 0; i < gz.size(); ++i)
            g.data[static_cast<std::size_t>(n.i0) * gz.cols + i] += gz.data[i];
        }
        break;
      case Op::SegmentMean:
        if (wants(0)) {
          Tensor& g = grad_buf(n.inputs[0]);
          for (std::size_t i = 0; i < n.spec->dst.size(); ++i) {
            int lo = n.spec->src_offsets[i];
            int hi = n.spec->src_offsets[i + 1];
            double inv = 1.0 / (hi - lo);
            const double* in = gz.row(static_cast<int>(i));
            for (int s = lo; s < hi; ++s) {
              double* out = g.row(n.spec->src[static_cast<std::size_t>(s)]);
              for (int c = 0; c < gz.cols; ++c) out[c] += inv * in[c];
            }
          }
        }
        break;
      case Op::ScatterAddRows: {
        if (wants(0)) {
          Tensor& g = grad_buf(n.inputs[0]);
          for (std::size_t i = 0; i < g.size(); ++i) g.data[i] += gz.data[i];
        }
        if (wants(1)) {
          Tensor& g = grad_buf(n.inputs[1]);
          for (std::size_t i = 0; i < n.spec->dst.size(); ++i) {
            const double* in = gz.row(n.spec->dst[i]);
            double* out = g.row(static_cast<int>(i));
            for (int c = 0; c < g.cols; ++c) out[c] += in[c];
          }
        }
        break;
      }
      case Op::MeanRows:
        if (wants(0)) {
          Tensor& g = grad_buf(n.inputs[0]);
          double inv = 1.0 / static_cast<double>(n.rows.size());
          for (int r : n.rows) {
            double* out = g.row(r);
            for (int c = 0; c < gz.cols; ++c) out[c] += inv * gz.data[static_cast<std::size_t>(c)];
          }
        }
        break;
      case Op::RowsDot: {
        Id a = n.inputs[0], b = n.inputs[1];
        const Tensor& va = value(a);
        const Tensor& vb = value(b);
        if (wants(0)) {
          Tensor& g = grad_buf(a);
          for (int r = 0; r < va.rows; ++r) {
            double w = gz.data[static_cast<std::size_t>(r)];
            double* out = g.row(r);
            for (int c = 0; c < va.cols; ++c) out[c] += w * vb.data[static_cast<std::size_t>(c)];
          }
        }
        if (wants(1)) {
          Tensor& g = grad_buf(b);
          for (int r = 0; r < va.rows; ++r) {
            double w = gz.data[static_cast<std::size_t>(r)];
            const double* in = va.row(r);
            for (int c = 0; c < va.cols; ++c) g.data[static_cast<std::size_t>(c)] += w * in[c];
          }
        }
        break;
      }
      case Op::Sum:
        if (wants(0)) {
          Tensor& g = grad_buf(n.inputs[0]);
          double w = gz.data[0];
          for (auto& x : g.data) x += w;
        }
        break;
    }
  }
}

AdamState::AdamState(int rows, int cols)
    : m_(rows, cols), v_(rows, cols), t_(static_cast<std::size_t>(rows), 0) {}

namespace {
bool row_finite(const Tensor& t, int r) {
  const double* p = t.row(r);
  for (int c = 0; c < t.cols; ++c)
    if (!std::isfinite(p[c])) return false;
  return true;
}
}  // namespace

int AdamState::step(Tensor& param, const Tensor& grad, std::span<const int> rows,
                    double lr, const AdamConfig& cfg) {
  if (!param.same_shape(grad) || !param.same_shape(m_))
    fail(ErrorKind::InvalidArgument, "adam step shape mismatch");
  int skipped = 0;
  for (int r : rows) {
    if (r < 0 || r >= param.rows)
      fail(ErrorKind::InvalidArgument, "adam step row out of range");
    if (!row_finite(grad, r)) {
      ++skipped;
      continue;
    }
    std::int64_t t = ++t_[static_cast<std::size_t>(r)];
    double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t));
    double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t));
    double* p = param.row(r);
    const double* g = grad.row(r);
    double* m = m_.row(r);
    double* v = v_.row(r);
    for (int c = 0; c < param.cols; ++c) {
      m[c] = cfg.beta1 * m[c] + (1.0 - cfg.beta1) * g[c];
      v[c] = cfg.beta2 * v[c] + (1.0 - cfg.beta2) * g[c] * g[c];
      double mhat = m[c] / bc1;
      double vhat = v[c] / bc2;
      p[c] -= lr * mhat / (std::sqrt(vhat) + cfg.eps);
    }
  }
  return skipped;
}

int AdamState::step_all(Tensor& param, const Tensor& grad, double lr,
                        const AdamConfig& cfg) {
  std::vector<int> rows(static_cast<std::size_t>(param.rows));
  for (int r = 0; r < param.rows; ++r) rows[static_cast<std::size_t>(r)] = r;
  return step(param, grad, rows, lr, cfg);
}

int sgd_step(Tensor& param, const Tensor& grad, std::span<const int> rows,
             double lr) {
  if (!param.same_shape(grad))
    fail(ErrorKind::InvalidArgument, "sgd step shape mismatch");
  int skipped = 0;
  for (int r : rows) {
    if (r < 0 || r >= param.rows)
      fail(ErrorKind::InvalidArgument, "sgd step row out of range");
    if (!row_finite(grad, r)) {
      ++skipped;
      continue;
    }
    double* p = param.row(r);
    const double* g = grad.row(r);
    for (int c = 0; c < param.cols; ++c) p[c] -= lr * g[c];
  }
  return skipped;
}

int sgd_step_all(Tensor& param, const Tensor& grad, double lr) {
  std::vector<int> rows(static_cast<std::size_t>(param.rows));
  for (int r = 0; r < param.rows; ++r) rows[static_cast<std::size_t>(r)] = r;
  return sgd_step(param, grad, rows, lr);
}

}  // namespace place
