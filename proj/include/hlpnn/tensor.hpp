#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "hlpnn/rng.hpp"

namespace hlpnn {

// Dense rank-2 tensor of doubles with tape-based reverse-mode autodiff.
// Scalars are 1x1, row vectors 1xN. A Tensor is a cheap handle onto a shared
// node; the node graph is a DAG with children pointing at parents.
class Tensor {
 public:
  struct Node {
    int rows = 0;
    int cols = 0;
    std::vector<double> value;
    std::vector<double> grad;  // sized lazily, same length as value
    bool requires_grad = false;
    std::vector<std::shared_ptr<Node>> parents;
    // Pushes this node's grad into its parents' grads.
    std::function<void(Node&)> backward;

    std::size_t size() const { return value.size(); }
    std::vector<double>& ensure_grad() {
      if (grad.size() != value.size()) grad.assign(value.size(), 0.0);
      return grad;
    }
  };

  Tensor() = default;

  static Tensor zeros(int rows, int cols, bool requires_grad = false);
  static Tensor full(int rows, int cols, double v, bool requires_grad = false);
  static Tensor scalar(double v, bool requires_grad = false);
  static Tensor from_data(int rows, int cols, std::vector<double> data,
                          bool requires_grad = false);
  static Tensor uniform(int rows, int cols, double lo, double hi, Rng& rng,
                        bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  int rows() const { return node_->rows; }
  int cols() const { return node_->cols; }
  std::size_t size() const { return node_->value.size(); }
  bool requires_grad() const { return node_->requires_grad; }

  double& at(int r, int c) { return node_->value[static_cast<std::size_t>(r) * node_->cols + c]; }
  double at(int r, int c) const { return node_->value[static_cast<std::size_t>(r) * node_->cols + c]; }
  double item() const;  // value of a 1x1 tensor

  std::vector<double>& data() { return node_->value; }
  const std::vector<double>& data() const { return node_->value; }

  // Gradient accumulated by backward(); empty until first use.
  std::vector<double>& grad() { return node_->ensure_grad(); }
  const std::vector<double>& grad_view() const { return node_->grad; }
  bool has_grad() const { return node_->grad.size() == node_->value.size(); }
  void zero_grad() { node_->grad.assign(node_->value.size(), 0.0); }

  // Detached copy of the values (no tape edge).
  Tensor detach_copy() const;

  std::shared_ptr<Node> node() const { return node_; }

  static Tensor wrap(std::shared_ptr<Node> n) {
    Tensor t;
    t.node_ = std::move(n);
    return t;
  }

 private:
  std::shared_ptr<Node> node_;
};

// ---- primitive ops ---------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);  // elementwise
Tensor scale(const Tensor& a, double c);
// Broadcast-add a 1xC row vector to every row of a.
Tensor add_rowvec(const Tensor& a, const Tensor& row);
// Multiply every element of a by a trainable 1x1 scalar.
Tensor mul_scalar(const Tensor& a, const Tensor& s);

Tensor relu(const Tensor& a);
Tensor tanh_op(const Tensor& a);
Tensor sigmoid(const Tensor& a);

// axis 0 stacks rows, axis 1 widens columns.
Tensor concat(const std::vector<Tensor>& parts, int axis);
Tensor slice_rows(const Tensor& a, int r0, int r1);
Tensor slice_cols(const Tensor& a, int c0, int c1);
// Sliding windows of `window` consecutive rows, flattened: output is
// (rows-window+1) x (window*cols).
Tensor unfold_rows(const Tensor& a, int window);

Tensor softmax(const Tensor& a, int axis);
Tensor log_softmax_rows(const Tensor& a);
Tensor layer_norm(const Tensor& a, const Tensor& gain, const Tensor& bias,
                  double eps = 1e-6);

// Reduce max along an axis; gradient routes to the first argmax on ties.
// axis 0 -> 1xC, axis 1 -> Rx1.
Tensor max_pool(const Tensor& a, int axis);
Tensor mean_rows(const Tensor& a);  // 1xC mean over rows
Tensor sum_all(const Tensor& a);    // 1x1
Tensor pick(const Tensor& a, int r, int c);  // single element as 1x1

Tensor embedding_lookup(const Tensor& table, const std::vector<int>& ids);
Tensor dropout(const Tensor& a, double p, Rng& rng, bool training);

// ---- tape ------------------------------------------------------------------

// Reverse-mode accumulation from a scalar loss into every reachable node
// with requires_grad. Repeated calls accumulate.
void backward(const Tensor& loss);

}  // namespace hlpnn
