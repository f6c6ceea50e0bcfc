#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "ehrgmtl/error.hpp"

namespace ehrgmtl {

using Shape = std::vector<int>;
using EdgeList = std::vector<std::pair<int, int>>;

int64_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

// Dense row-major tensor of doubles. Ranks 0 (scalar), 1 and 2 are used.
struct Tensor {
  Shape shape;
  std::vector<double> values;
  std::vector<double> grad;  // same length as values once backward ran
  bool requires_grad = false;
  std::string name;  // label used in checkpoints and diagnostics

  int64_t numel() const { return static_cast<int64_t>(values.size()); }
  int rows() const;
  int cols() const;
  double scalar() const;  // requires numel() == 1

  void ensure_grad();  // allocate zeros if absent
  void zero_grad();
};

using TensorPtr = std::shared_ptr<Tensor>;

TensorPtr make_tensor(Shape shape, std::vector<double> values,
                      bool requires_grad = false);
TensorPtr make_zeros(Shape shape, bool requires_grad = false);
TensorPtr make_scalar(double value, bool requires_grad = false);

// Numerically stable logistic function, clamped to the open interval (0,1)
// so finite logits of any magnitude give a usable probability.
double sigmoid_value(double z);

// Records executed ops in forward order; one reverse sweep fills in the
// gradient of every requires_grad tensor reachable from the loss. A tape is
// single-owner and must not be shared across threads; distinct tapes may run
// concurrently.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // y = W x + b for rank-1 x, or row-wise Y = X W^T + b for rank-2 x.
  TensorPtr matmul_add(const TensorPtr& x, const TensorPtr& w,
                       const TensorPtr& b);
  // Same without the bias term.
  TensorPtr matmul(const TensorPtr& x, const TensorPtr& w);

  TensorPtr relu(const TensorPtr& x);
  TensorPtr sigmoid(const TensorPtr& x);

  // Elementwise -[y log s(z) + (1-y) log(1-s(z))] in log-sum-exp form.
  // Labels are plain constants, one per element of logits.
  TensorPtr bce_with_logits(const TensorPtr& logits,
                            const std::vector<double>& labels);

  TensorPtr add(const TensorPtr& a, const TensorPtr& b);
  TensorPtr mul(const TensorPtr& a, const TensorPtr& b);
  TensorPtr scale(const TensorPtr& x, double c);
  TensorPtr sum_all(const TensorPtr& x);
  TensorPtr mean_all(const TensorPtr& x);

  // out[v] = h[v] + sum of h[u] over undirected edges (u,v).
  TensorPtr aggregate_neighbors(const TensorPtr& h, const EdgeList& edges);

  // Symmetric-normalized propagation with self loops:
  // out = D^-1/2 (A + I) D^-1/2 h, D the degree matrix of A + I.
  TensorPtr propagate_normalized(const TensorPtr& h, const EdgeList& edges);

  // Per-group row means: out is [n_groups x d], group_ids one entry per row
  // of h. Every group must own at least one row.
  TensorPtr mean_rows_by_group(const TensorPtr& h,
                               const std::vector<int>& group_ids,
                               int n_groups);

  void backward(const TensorPtr& loss);

  size_t size() const { return steps_.size(); }

 private:
  void record(std::function<void()> back) { steps_.push_back(std::move(back)); }

  std::vector<std::function<void()>> steps_;
};

}  // namespace ehrgmtl
