#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "rng.hpp"

namespace place {

// Dense row-major matrix of 64-bit floats. A 1xN tensor doubles as a row
// vector, 1x1 as a scalar.
struct Tensor {
  int rows = 0;
  int cols = 0;
  std::vector<double> data;

  Tensor() = default;
  Tensor(int r, int c, double fill = 0.0);

  static Tensor zeros(int r, int c) { return Tensor(r, c, 0.0); }
  static Tensor scalar(double v);
  // Entries drawn uniform in [-scale, scale].
  static Tensor uniform(int r, int c, double scale, rng::Engine& eng);

  double& at(int r, int c) { return data[static_cast<std::size_t>(r) * cols + c]; }
  double at(int r, int c) const { return data[static_cast<std::size_t>(r) * cols + c]; }
  double* row(int r) { return data.data() + static_cast<std::size_t>(r) * cols; }
  const double* row(int r) const { return data.data() + static_cast<std::size_t>(r) * cols; }
  std::size_t size() const { return data.size(); }
  bool same_shape(const Tensor& o) const { return rows == o.rows && cols == o.cols; }
  bool all_finite() const;
  double item() const;  // value of a 1x1 tensor

  bool operator==(const Tensor& other) const = default;
};

// C = op(A) * op(B), accumulating into C when accumulate is set. BLAS-backed.
void gemm(bool trans_a, bool trans_b, const Tensor& a, const Tensor& b,
          Tensor& c, bool accumulate = false);

// Row-aggregation plan: output row i is the mean of input rows
// src[src_offsets[i] .. src_offsets[i+1]), and dst[i] names the row of the
// full matrix the aggregate belongs to (used by scatter_add_rows). Segments
// are nonempty; rows without incoming edges are simply absent.
struct SegmentSpec {
  std::vector<int> dst;
  std::vector<int> src_offsets;  // size dst.size() + 1
  std::vector<int> src;

  bool empty() const { return dst.empty(); }
};

// Reverse-mode tape. Operations record nodes eagerly; backward() walks the
// recording order in reverse. SegmentSpec buffers passed by pointer must
// outlive the tape.
class Tape {
 public:
  using Id = int;

  Id leaf(Tensor value, bool requires_grad);
  Id constant(Tensor value) { return leaf(std::move(value), false); }

  Id matmul(Id a, Id b);
  Id add(Id a, Id b);
  Id affine(Id a, double scale, double shift);
  Id scalar_mul(Id a, double s) { return affine(a, s, 0.0); }
  Id add_rowvec(Id a, Id bias);  // bias is 1 x cols
  Id relu(Id a);
  Id sigmoid(Id a);
  Id log(Id a);  // natural log; fails on non-positive input
  Id clamp(Id a, double lo, double hi);
  Id row_gather(Id a, std::vector<int> rows);
  Id concat_rows(const std::vector<Id>& parts);
  Id slice_rows(Id a, int begin, int end);
  Id segment_mean(Id a, const SegmentSpec* spec);
  Id scatter_add_rows(Id base, Id compact, const SegmentSpec* spec);
  Id mean_rows(Id a, std::vector<int> rows);  // 1 x cols
  Id rows_dot(Id a, Id b);  // b is 1 x cols; out[i] = <a_i, b>, shape rows x 1
  Id sum(Id a);             // 1 x 1

  const Tensor& value(Id id) const;
  // Gradient of the last backward() target w.r.t. this node. Zero-shaped
  // tensor for nodes outside the differentiated subgraph.
  const Tensor& grad(Id id) const;

  void backward(Id loss);

  std::size_t node_count() const { return nodes_.size(); }

 private:
  enum class Op {
    Leaf, MatMul, Add, Affine, AddRowVec, Relu, Sigmoid, Log, Clamp,
    RowGather, ConcatRows, SliceRows, SegmentMean, ScatterAddRows,
    MeanRows, RowsDot, Sum,
  };

  struct Node {
    Op op;
    bool needs_grad = false;
    std::vector<Id> inputs;
    Tensor value;
    Tensor grad;  // empty until backward touches it
    double s0 = 0.0, s1 = 0.0;
    std::vector<int> rows;
    const SegmentSpec* spec = nullptr;
    int i0 = 0, i1 = 0;
  };

  Id push(Node n);
  Node& node(Id id);
  const Node& node(Id id) const;
  Tensor& grad_buf(Id id);  // allocates a zero gradient on first use

  std::vector<Node> nodes_;
};

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Adam with per-row step counters, so token rows that are updated only when
// their attribute participates in a query still get correct bias correction.
class AdamState {
 public:
  AdamState() = default;
  AdamState(int rows, int cols);

  // Updates only the given rows. Returns the number of rows skipped because
  // their gradient was non-finite.
  int step(Tensor& param, const Tensor& grad, std::span<const int> rows,
           double lr, const AdamConfig& cfg = {});
  int step_all(Tensor& param, const Tensor& grad, double lr,
               const AdamConfig& cfg = {});

 private:
  Tensor m_, v_;
  std::vector<std::int64_t> t_;
};

// Plain gradient descent on the given rows; same skip rule as AdamState.
int sgd_step(Tensor& param, const Tensor& grad, std::span<const int> rows,
             double lr);
int sgd_step_all(Tensor& param, const Tensor& grad, double lr);

}  // namespace place
