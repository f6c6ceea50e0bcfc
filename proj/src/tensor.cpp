#include "ehrgmtl/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace ehrgmtl {

int64_t shape_numel(const Shape& shape) {
  int64_t n = 1;
  for (int d : shape) n *= d;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::string s = "[";
  for (size_t i = 0; i < shape.size(); ++i) {
    if (i) s += "x";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

int Tensor::rows() const {
  if (shape.size() != 2)
    throw DimensionError("rows(): tensor is not rank-2, shape " + shape_str(shape));
  return shape[0];
}

int Tensor::cols() const {
  if (shape.size() != 2)
    throw DimensionError("cols(): tensor is not rank-2, shape " + shape_str(shape));
  return shape[1];
}

double Tensor::scalar() const {
  if (numel() != 1)
    throw ContractError("scalar(): tensor has shape " + shape_str(shape));
  return values[0];
}

void Tensor::ensure_grad() {
  if (grad.size() != values.size()) grad.assign(values.size(), 0.0);
}

void Tensor::zero_grad() { grad.assign(values.size(), 0.0); }

TensorPtr make_tensor(Shape shape, std::vector<double> values,
                      bool requires_grad) {
  if (shape_numel(shape) != static_cast<int64_t>(values.size()))
    throw DimensionError("make_tensor: shape " + shape_str(shape) + " holds " +
                         std::to_string(shape_numel(shape)) +
                         " elements, got " + std::to_string(values.size()));
  auto t = std::make_shared<Tensor>();
  t->shape = std::move(shape);
  t->values = std::move(values);
  t->requires_grad = requires_grad;
  return t;
}

TensorPtr make_zeros(Shape shape, bool requires_grad) {
  std::vector<double> v(static_cast<size_t>(shape_numel(shape)), 0.0);
  return make_tensor(std::move(shape), std::move(v), requires_grad);
}

TensorPtr make_scalar(double value, bool requires_grad) {
  return make_tensor({}, {value}, requires_grad);
}

double sigmoid_value(double z) {
  double s;
  if (z >= 0.0) {
    s = 1.0 / (1.0 + std::exp(-z));
  } else {
    double e = std::exp(z);
    s = e / (1.0 + e);
  }
  constexpr double lo = std::numeric_limits<double>::min();
  constexpr double hi = 1.0 - std::numeric_limits<double>::epsilon() / 2.0;
  return std::clamp(s, lo, hi);
}

namespace {

TensorPtr output_like(Shape shape, std::vector<double> values, bool requires) {
  auto t = make_tensor(std::move(shape), std::move(values), requires);
  return t;
}

// True when the consumer never produced a gradient, i.e. this op is not on
// any path to the loss.
bool no_upstream(const TensorPtr& out) { return out->grad.empty(); }

void check_edges(const EdgeList& edges, int n_rows, const char* op) {
  for (const auto& [u, v] : edges) {
    if (u < 0 || v < 0 || u >= n_rows || v >= n_rows)
      throw ContractError(std::string(op) + ": edge (" + std::to_string(u) +
                          "," + std::to_string(v) + ") out of range for " +
                          std::to_string(n_rows) + " rows");
  }
}

}  // namespace

TensorPtr Tape::matmul_add(const TensorPtr& x, const TensorPtr& w,
                           const TensorPtr& b) {
  if (w->shape.size() != 2)
    throw DimensionError("matmul_add: weight must be rank-2, got " +
                         shape_str(w->shape));
  const int n = w->shape[0];
  const int m = w->shape[1];
  if (b && (b->shape.size() != 1 || b->shape[0] != n))
    throw DimensionError("matmul_add: bias shape " + shape_str(b->shape) +
                         " incompatible with weight shape " + shape_str(w->shape));

  int r;
  if (x->shape.size() == 1) {
    if (x->shape[0] != m)
      throw DimensionError("matmul_add: input shape " + shape_str(x->shape) +
                           " incompatible with weight shape " + shape_str(w->shape));
    r = 1;
  } else if (x->shape.size() == 2) {
    if (x->shape[1] != m)
      throw DimensionError("matmul_add: input shape " + shape_str(x->shape) +
                           " incompatible with weight shape " + shape_str(w->shape));
    r = x->shape[0];
  } else {
    throw DimensionError("matmul_add: input must be rank-1 or rank-2, got " +
                         shape_str(x->shape));
  }

  std::vector<double> out(static_cast<size_t>(r) * n);
  const double* xv = x->values.data();
  const double* wv = w->values.data();
  for (int i = 0; i < r; ++i) {
    const double* xrow = xv + static_cast<size_t>(i) * m;
    double* orow = out.data() + static_cast<size_t>(i) * n;
    for (int j = 0; j < n; ++j) {
      const double* wrow = wv + static_cast<size_t>(j) * m;
      double acc = b ? b->values[j] : 0.0;
      for (int k = 0; k < m; ++k) acc += wrow[k] * xrow[k];
      orow[j] = acc;
    }
  }

  Shape out_shape = (x->shape.size() == 1) ? Shape{n} : Shape{r, n};
  bool req = x->requires_grad || w->requires_grad || (b && b->requires_grad);
  auto y = output_like(std::move(out_shape), std::move(out), req);
  if (!req) return y;

  record([x, w, b, y, r, n, m]() {
    if (no_upstream(y)) return;
    const double* gy = y->grad.data();
    const double* xv = x->values.data();
    const double* wv = w->values.data();
    if (x->requires_grad) {
      x->ensure_grad();
      double* gx = x->grad.data();
      for (int i = 0; i < r; ++i) {
        const double* gyrow = gy + static_cast<size_t>(i) * n;
        double* gxrow = gx + static_cast<size_t>(i) * m;
        for (int j = 0; j < n; ++j) {
          const double g = gyrow[j];
          const double* wrow = wv + static_cast<size_t>(j) * m;
          for (int k = 0; k < m; ++k) gxrow[k] += g * wrow[k];
        }
      }
    }
    if (w->requires_grad) {
      w->ensure_grad();
      double* gw = w->grad.data();
      for (int i = 0; i < r; ++i) {
        const double* gyrow = gy + static_cast<size_t>(i) * n;
        const double* xrow = xv + static_cast<size_t>(i) * m;
        for (int j = 0; j < n; ++j) {
          const double g = gyrow[j];
          double* gwrow = gw + static_cast<size_t>(j) * m;
          for (int k = 0; k < m; ++k) gwrow[k] += g * xrow[k];
        }
      }
    }
    if (b && b->requires_grad) {
      b->ensure_grad();
      double* gb = b->grad.data();
      for (int i = 0; i < r; ++i) {
        const double* gyrow = gy + static_cast<size_t>(i) * n;
        for (int j = 0; j < n; ++j) gb[j] += gyrow[j];
      }
    }
  });
  return y;
}

TensorPtr Tape::matmul(const TensorPtr& x, const TensorPtr& w) {
  return matmul_add(x, w, nullptr);
}

TensorPtr Tape::relu(const TensorPtr& x) {
  std::vector<double> out(x->values.size());
  for (size_t i = 0; i < out.size(); ++i)
    out[i] = x->values[i] > 0.0 ? x->values[i] : 0.0;
  auto y = output_like(x->shape, std::move(out), x->requires_grad);
  if (!y->requires_grad) return y;
  record([x, y]() {
    if (no_upstream(y)) return;
    x->ensure_grad();
    for (size_t i = 0; i < x->grad.size(); ++i)
      if (x->values[i] > 0.0) x->grad[i] += y->grad[i];
  });
  return y;
}

TensorPtr Tape::sigmoid(const TensorPtr& x) {
  std::vector<double> out(x->values.size());
  for (size_t i = 0; i < out.size(); ++i) out[i] = sigmoid_value(x->values[i]);
  auto y = output_like(x->shape, std::move(out), x->requires_grad);
  if (!y->requires_grad) return y;
  record([x, y]() {
    if (no_upstream(y)) return;
    x->ensure_grad();
    for (size_t i = 0; i < x->grad.size(); ++i) {
      const double s = y->values[i];
      x->grad[i] += s * (1.0 - s) * y->grad[i];
    }
  });
  return y;
}

TensorPtr Tape::bce_with_logits(const TensorPtr& logits,
                                const std::vector<double>& labels) {
  if (labels.size() != logits->values.size())
    throw DimensionError("bce_with_logits: " + std::to_string(labels.size()) +
                         " labels for logits shape " + shape_str(logits->shape));
  for (double y : labels)
    if (y != 0.0 && y != 1.0)
      throw ContractError("bce_with_logits: label must be 0 or 1, got " +
                          std::to_string(y));

  std::vector<double> out(logits->values.size());
  for (size_t i = 0; i < out.size(); ++i) {
    const double z = logits->values[i];
    out[i] = std::max(z, 0.0) - z * labels[i] + std::log1p(std::exp(-std::abs(z)));
  }
  auto y = output_like(logits->shape, std::move(out), logits->requires_grad);
  if (!y->requires_grad) return y;
  auto lab = labels;
  record([logits, y, lab = std::move(lab)]() {
    if (no_upstream(y)) return;
    logits->ensure_grad();
    for (size_t i = 0; i < logits->grad.size(); ++i)
      logits->grad[i] +=
          (sigmoid_value(logits->values[i]) - lab[i]) * y->grad[i];
  });
  return y;
}

TensorPtr Tape::add(const TensorPtr& a, const TensorPtr& b) {
  if (a->shape != b->shape)
    throw DimensionError("add: shape " + shape_str(a->shape) + " vs " +
                         shape_str(b->shape));
  std::vector<double> out(a->values.size());
  for (size_t i = 0; i < out.size(); ++i) out[i] = a->values[i] + b->values[i];
  bool req = a->requires_grad || b->requires_grad;
  auto y = output_like(a->shape, std::move(out), req);
  if (!req) return y;
  record([a, b, y]() {
    if (no_upstream(y)) return;
    if (a->requires_grad) {
      a->ensure_grad();
      for (size_t i = 0; i < a->grad.size(); ++i) a->grad[i] += y->grad[i];
    }
    if (b->requires_grad) {
      b->ensure_grad();
      for (size_t i = 0; i < b->grad.size(); ++i) b->grad[i] += y->grad[i];
    }
  });
  return y;
}

TensorPtr Tape::mul(const TensorPtr& a, const TensorPtr& b) {
  if (a->shape != b->shape)
    throw DimensionError("mul: shape " + shape_str(a->shape) + " vs " +
                         shape_str(b->shape));
  std::vector<double> out(a->values.size());
  for (size_t i = 0; i < out.size(); ++i) out[i] = a->values[i] * b->values[i];
  bool req = a->requires_grad || b->requires_grad;
  auto y = output_like(a->shape, std::move(out), req);
  if (!req) return y;
  record([a, b, y]() {
    if (no_upstream(y)) return;
    if (a->requires_grad) {
      a->ensure_grad();
      for (size_t i = 0; i < a->grad.size(); ++i)
        a->grad[i] += b->values[i] * y->grad[i];
    }
    if (b->requires_grad) {
      b->ensure_grad();
      for (size_t i = 0; i < b->grad.size(); ++i)
        b->grad[i] += a->values[i] * y->grad[i];
    }
  });
  return y;
}

TensorPtr Tape::scale(const TensorPtr& x, double c) {
  std::vector<double> out(x->values.size());
  for (size_t i = 0; i < out.size(); ++i) out[i] = c * x->values[i];
  auto y = output_like(x->shape, std::move(out), x->requires_grad);
  if (!y->requires_grad) return y;
  record([x, y, c]() {
    if (no_upstream(y)) return;
    x->ensure_grad();
    for (size_t i = 0; i < x->grad.size(); ++i) x->grad[i] += c * y->grad[i];
  });
  return y;
}

TensorPtr Tape::sum_all(const TensorPtr& x) {
  double acc = 0.0;
  for (double v : x->values) acc += v;
  auto y = output_like({}, {acc}, x->requires_grad);
  if (!y->requires_grad) return y;
  record([x, y]() {
    if (no_upstream(y)) return;
    x->ensure_grad();
    const double g = y->grad[0];
    for (size_t i = 0; i < x->grad.size(); ++i) x->grad[i] += g;
  });
  return y;
}

TensorPtr Tape::mean_all(const TensorPtr& x) {
  if (x->numel() == 0) throw ContractError("mean_all: empty tensor");
  double acc = 0.0;
  for (double v : x->values) acc += v;
  const double inv = 1.0 / static_cast<double>(x->numel());
  auto y = output_like({}, {acc * inv}, x->requires_grad);
  if (!y->requires_grad) return y;
  record([x, y, inv]() {
    if (no_upstream(y)) return;
    x->ensure_grad();
    const double g = y->grad[0] * inv;
    for (size_t i = 0; i < x->grad.size(); ++i) x->grad[i] += g;
  });
  return y;
}

TensorPtr Tape::aggregate_neighbors(const TensorPtr& h, const EdgeList& edges) {
  const int n = h->rows();
  const int d = h->cols();
  check_edges(edges, n, "aggregate_neighbors");

  std::vector<double> out = h->values;
  for (const auto& [u, v] : edges) {
    double* ru = out.data() + static_cast<size_t>(u) * d;
    double* rv = out.data() + static_cast<size_t>(v) * d;
    const double* hu = h->values.data() + static_cast<size_t>(u) * d;
    const double* hv = h->values.data() + static_cast<size_t>(v) * d;
    for (int k = 0; k < d; ++k) {
      ru[k] += hv[k];
      rv[k] += hu[k];
    }
  }
  auto y = output_like(h->shape, std::move(out), h->requires_grad);
  if (!y->requires_grad) return y;
  auto es = edges;
  record([h, y, es = std::move(es), d]() {
    if (no_upstream(y)) return;
    h->ensure_grad();
    for (size_t i = 0; i < h->grad.size(); ++i) h->grad[i] += y->grad[i];
    for (const auto& [u, v] : es) {
      double* gu = h->grad.data() + static_cast<size_t>(u) * d;
      double* gv = h->grad.data() + static_cast<size_t>(v) * d;
      const double* yu = y->grad.data() + static_cast<size_t>(u) * d;
      const double* yv = y->grad.data() + static_cast<size_t>(v) * d;
      for (int k = 0; k < d; ++k) {
        gu[k] += yv[k];
        gv[k] += yu[k];
      }
    }
  });
  return y;
}

namespace {

// out += D^-1/2 (A+I) D^-1/2 applied to in; the operator is symmetric, so
// forward and backward use the same kernel.
void apply_normalized(const std::vector<double>& in, std::vector<double>& out,
                      const EdgeList& edges, const std::vector<double>& inv_sqrt_deg,
                      int n, int d) {
  for (int v = 0; v < n; ++v) {
    const double self = inv_sqrt_deg[v] * inv_sqrt_deg[v];
    const double* rin = in.data() + static_cast<size_t>(v) * d;
    double* rout = out.data() + static_cast<size_t>(v) * d;
    for (int k = 0; k < d; ++k) rout[k] += self * rin[k];
  }
  for (const auto& [u, v] : edges) {
    const double f = inv_sqrt_deg[u] * inv_sqrt_deg[v];
    const double* ru = in.data() + static_cast<size_t>(u) * d;
    const double* rv = in.data() + static_cast<size_t>(v) * d;
    double* ou = out.data() + static_cast<size_t>(u) * d;
    double* ov = out.data() + static_cast<size_t>(v) * d;
    for (int k = 0; k < d; ++k) {
      ou[k] += f * rv[k];
      ov[k] += f * ru[k];
    }
  }
}

}  // namespace

TensorPtr Tape::propagate_normalized(const TensorPtr& h, const EdgeList& edges) {
  const int n = h->rows();
  const int d = h->cols();
  check_edges(edges, n, "propagate_normalized");

  std::vector<double> deg(static_cast<size_t>(n), 1.0);  // self loops
  for (const auto& [u, v] : edges) {
    deg[u] += 1.0;
    deg[v] += 1.0;
  }
  std::vector<double> inv_sqrt_deg(static_cast<size_t>(n));
  for (int v = 0; v < n; ++v) inv_sqrt_deg[v] = 1.0 / std::sqrt(deg[v]);

  std::vector<double> out(h->values.size(), 0.0);
  apply_normalized(h->values, out, edges, inv_sqrt_deg, n, d);
  auto y = output_like(h->shape, std::move(out), h->requires_grad);
  if (!y->requires_grad) return y;
  auto es = edges;
  record([h, y, es = std::move(es), isd = std::move(inv_sqrt_deg), n, d]() {
    if (no_upstream(y)) return;
    h->ensure_grad();
    apply_normalized(y->grad, h->grad, es, isd, n, d);
  });
  return y;
}

TensorPtr Tape::mean_rows_by_group(const TensorPtr& h,
                                   const std::vector<int>& group_ids,
                                   int n_groups) {
  const int n = h->rows();
  const int d = h->cols();
  if (static_cast<int>(group_ids.size()) != n)
    throw ContractError("mean_rows_by_group: " +
                        std::to_string(group_ids.size()) + " group ids for " +
                        std::to_string(n) + " rows");
  std::vector<double> count(static_cast<size_t>(n_groups), 0.0);
  for (int g : group_ids) {
    if (g < 0 || g >= n_groups)
      throw ContractError("mean_rows_by_group: group id " + std::to_string(g) +
                          " out of range");
    count[g] += 1.0;
  }
  for (int g = 0; g < n_groups; ++g)
    if (count[g] == 0.0)
      throw ContractError("mean_rows_by_group: group " + std::to_string(g) +
                          " has no rows");

  std::vector<double> out(static_cast<size_t>(n_groups) * d, 0.0);
  for (int v = 0; v < n; ++v) {
    const double* rin = h->values.data() + static_cast<size_t>(v) * d;
    double* rout = out.data() + static_cast<size_t>(group_ids[v]) * d;
    for (int k = 0; k < d; ++k) rout[k] += rin[k];
  }
  for (int g = 0; g < n_groups; ++g) {
    double* rout = out.data() + static_cast<size_t>(g) * d;
    const double inv = 1.0 / count[g];
    for (int k = 0; k < d; ++k) rout[k] *= inv;
  }
  auto y = output_like({n_groups, d}, std::move(out), h->requires_grad);
  if (!y->requires_grad) return y;
  auto gids = group_ids;
  record([h, y, gids = std::move(gids), cnt = std::move(count), d]() {
    if (no_upstream(y)) return;
    h->ensure_grad();
    const int n = h->rows();
    for (int v = 0; v < n; ++v) {
      const int g = gids[v];
      const double inv = 1.0 / cnt[g];
      const double* gy = y->grad.data() + static_cast<size_t>(g) * d;
      double* gh = h->grad.data() + static_cast<size_t>(v) * d;
      for (int k = 0; k < d; ++k) gh[k] += inv * gy[k];
    }
  });
  return y;
}

void Tape::backward(const TensorPtr& loss) {
  if (loss->numel() != 1)
    throw ContractError("backward: loss must be scalar, got shape " +
                        shape_str(loss->shape));
  loss->ensure_grad();
  loss->grad[0] = 1.0;
  for (auto it = steps_.rbegin(); it != steps_.rend(); ++it) (*it)();
}

}  // namespace ehrgmtl
