#include "hlpnn/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <unordered_set>

namespace hlpnn {

namespace {

std::string shape_str(int r, int c) {
  return "[" + std::to_string(r) + "x" + std::to_string(c) + "]";
}

std::shared_ptr<Tensor::Node> new_node(int rows, int cols,
                                       std::initializer_list<Tensor> parents) {
  auto n = std::make_shared<Tensor::Node>();
  n->rows = rows;
  n->cols = cols;
  n->value.assign(static_cast<std::size_t>(rows) * cols, 0.0);
  for (const Tensor& p : parents) {
    n->parents.push_back(p.node());
    if (p.requires_grad()) n->requires_grad = true;
  }
  return n;
}

std::shared_ptr<Tensor::Node> new_node(int rows, int cols,
                                       const std::vector<Tensor>& parents) {
  auto n = std::make_shared<Tensor::Node>();
  n->rows = rows;
  n->cols = cols;
  n->value.assign(static_cast<std::size_t>(rows) * cols, 0.0);
  for (const Tensor& p : parents) {
    n->parents.push_back(p.node());
    if (p.requires_grad()) n->requires_grad = true;
  }
  return n;
}

void check_defined(const Tensor& t, const char* op) {
  if (!t.defined()) throw std::invalid_argument(std::string(op) + ": undefined tensor");
}

}  // namespace

// ---- construction ----------------------------------------------------------

Tensor Tensor::zeros(int rows, int cols, bool requires_grad) {
  return full(rows, cols, 0.0, requires_grad);
}

Tensor Tensor::full(int rows, int cols, double v, bool requires_grad) {
  if (rows <= 0 || cols <= 0)
    throw std::invalid_argument("Tensor dimensions must be positive, got " + shape_str(rows, cols));
  auto n = std::make_shared<Node>();
  n->rows = rows;
  n->cols = cols;
  n->value.assign(static_cast<std::size_t>(rows) * cols, v);
  n->requires_grad = requires_grad;
  return wrap(std::move(n));
}

Tensor Tensor::scalar(double v, bool requires_grad) {
  return full(1, 1, v, requires_grad);
}

Tensor Tensor::from_data(int rows, int cols, std::vector<double> data, bool requires_grad) {
  if (rows <= 0 || cols <= 0)
    throw std::invalid_argument("Tensor dimensions must be positive, got " + shape_str(rows, cols));
  if (data.size() != static_cast<std::size_t>(rows) * cols)
    throw std::invalid_argument("Tensor data length " + std::to_string(data.size()) +
                                " does not match shape " + shape_str(rows, cols));
  auto n = std::make_shared<Node>();
  n->rows = rows;
  n->cols = cols;
  n->value = std::move(data);
  n->requires_grad = requires_grad;
  return wrap(std::move(n));
}

Tensor Tensor::uniform(int rows, int cols, double lo, double hi, Rng& rng, bool requires_grad) {
  Tensor t = zeros(rows, cols, requires_grad);
  for (double& v : t.data()) v = rng.uniform(lo, hi);
  return t;
}

double Tensor::item() const {
  if (size() != 1) throw std::invalid_argument("item(): tensor is not 1x1");
  return node_->value[0];
}

Tensor Tensor::detach_copy() const {
  return from_data(rows(), cols(), node_->value, false);
}

// ---- ops -------------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
  check_defined(a, "matmul");
  check_defined(b, "matmul");
  if (a.cols() != b.rows())
    throw std::invalid_argument("matmul: inner dimensions disagree: " +
                                shape_str(a.rows(), a.cols()) + " x " +
                                shape_str(b.rows(), b.cols()));
  const int m = a.rows(), k = a.cols(), n = b.cols();
  auto out = new_node(m, n, {a, b});
  const double* av = a.data().data();
  const double* bv = b.data().data();
  double* ov = out->value.data();
  for (int i = 0; i < m; ++i)
    for (int p = 0; p < k; ++p) {
      const double aip = av[i * k + p];
      if (aip == 0.0) continue;
      const double* brow = bv + static_cast<std::size_t>(p) * n;
      double* orow = ov + static_cast<std::size_t>(i) * n;
      for (int j = 0; j < n; ++j) orow[j] += aip * brow[j];
    }
  if (out->requires_grad) {
    auto an = a.node();
    auto bn = b.node();
    out->backward = [an, bn, m, k, n](Tensor::Node& self) {
      const double* g = self.grad.data();
      if (an->requires_grad) {
        auto& ga = an->ensure_grad();
        const double* bv2 = bn->value.data();
        for (int i = 0; i < m; ++i)
          for (int p = 0; p < k; ++p) {
            double acc = 0.0;
            for (int j = 0; j < n; ++j) acc += g[i * n + j] * bv2[p * n + j];
            ga[i * k + p] += acc;
          }
      }
      if (bn->requires_grad) {
        auto& gb = bn->ensure_grad();
        const double* av2 = an->value.data();
        for (int i = 0; i < m; ++i)
          for (int p = 0; p < k; ++p) {
            const double aip = av2[i * k + p];
            if (aip == 0.0) continue;
            for (int j = 0; j < n; ++j) gb[p * n + j] += aip * g[i * n + j];
          }
      }
    };
  }
  return Tensor::wrap(out);
}

Tensor transpose(const Tensor& a) {
  check_defined(a, "transpose");
  const int r = a.rows(), c = a.cols();
  auto out = new_node(c, r, {a});
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j) out->value[j * r + i] = a.at(i, j);
  if (out->requires_grad) {
    auto an = a.node();
    out->backward = [an, r, c](Tensor::Node& self) {
      auto& ga = an->ensure_grad();
      for (int i = 0; i < r; ++i)
        for (int j = 0; j < c; ++j) ga[i * c + j] += self.grad[j * r + i];
    };
  }
  return Tensor::wrap(out);
}

namespace {

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw std::invalid_argument(std::string(op) + ": shape mismatch " +
                                shape_str(a.rows(), a.cols()) + " vs " +
                                shape_str(b.rows(), b.cols()));
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  check_defined(a, "add");
  check_defined(b, "add");
  check_same_shape(a, b, "add");
  auto out = new_node(a.rows(), a.cols(), {a, b});
  for (std::size_t i = 0; i < out->size(); ++i) out->value[i] = a.data()[i] + b.data()[i];
  if (out->requires_grad) {
    auto an = a.node();
    auto bn = b.node();
    out->backward = [an, bn](Tensor::Node& self) {
      if (an->requires_grad) {
        auto& g = an->ensure_grad();
        for (std::size_t i = 0; i < self.size(); ++i) g[i] += self.grad[i];
      }
      if (bn->requires_grad) {
        auto& g = bn->ensure_grad();
        for (std::size_t i = 0; i < self.size(); ++i) g[i] += self.grad[i];
      }
    };
  }
  return Tensor::wrap(out);
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return add(a, scale(b, -1.0));
}

Tensor mul(const Tensor& a, const Tensor& b) {
  check_defined(a, "mul");
  check_defined(b, "mul");
  check_same_shape(a, b, "mul");
  auto out = new_node(a.rows(), a.cols(), {a, b});
  for (std::size_t i = 0; i < out->size(); ++i) out->value[i] = a.data()[i] * b.data()[i];
  if (out->requires_grad) {
    auto an = a.node();
    auto bn = b.node();
    out->backward = [an, bn](Tensor::Node& self) {
      if (an->requires_grad) {
        auto& g = an->ensure_grad();
        for (std::size_t i = 0; i < self.size(); ++i) g[i] += self.grad[i] * bn->value[i];
      }
      if (bn->requires_grad) {
        auto& g = bn->ensure_grad();
        for (std::size_t i = 0; i < self.size(); ++i) g[i] += self.grad[i] * an->value[i];
      }
    };
  }
  return Tensor::wrap(out);
}

Tensor scale(const Tensor& a, double c) {
  check_defined(a, "scale");
  auto out = new_node(a.rows(), a.cols(), {a});
  for (std::size_t i = 0; i < out->size(); ++i) out->value[i] = a.data()[i] * c;
  if (out->requires_grad) {
    auto an = a.node();
    out->backward = [an, c](Tensor::Node& self) {
      auto& g = an->ensure_grad();
      for (std::size_t i = 0; i < self.size(); ++i) g[i] += self.grad[i] * c;
    };
  }
  return Tensor::wrap(out);
}

Tensor add_rowvec(const Tensor& a, const Tensor& row) {
  check_defined(a, "add_rowvec");
  check_defined(row, "add_rowvec");
  if (row.rows() != 1 || row.cols() != a.cols())
    throw std::invalid_argument("add_rowvec: expected 1x" + std::to_string(a.cols()) +
                                " row, got " + shape_str(row.rows(), row.cols()));
  auto out = new_node(a.rows(), a.cols(), {a, row});
  const int r = a.rows(), c = a.cols();
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j) out->value[i * c + j] = a.at(i, j) + row.data()[j];
  if (out->requires_grad) {
    auto an = a.node();
    auto rn = row.node();
    out->backward = [an, rn, r, c](Tensor::Node& self) {
      if (an->requires_grad) {
        auto& g = an->ensure_grad();
        for (std::size_t i = 0; i < self.size(); ++i) g[i] += self.grad[i];
      }
      if (rn->requires_grad) {
        auto& g = rn->ensure_grad();
        for (int i = 0; i < r; ++i)
          for (int j = 0; j < c; ++j) g[j] += self.grad[i * c + j];
      }
    };
  }
  return Tensor::wrap(out);
}

Tensor mul_scalar(const Tensor& a, const Tensor& s) {
  check_defined(a, "mul_scalar");
  check_defined(s, "mul_scalar");
  if (s.size() != 1) throw std::invalid_argument("mul_scalar: scalar operand is not 1x1");
  auto out = new_node(a.rows(), a.cols(), {a, s});
  const double sv = s.data()[0];
  for (std::size_t i = 0; i < out->size(); ++i) out->value[i] = a.data()[i] * sv;
  if (out->requires_grad) {
    auto an = a.node();
    auto sn = s.node();
    out->backward = [an, sn](Tensor::Node& self) {
      if (an->requires_grad) {
        auto& g = an->ensure_grad();
        const double sv2 = sn->value[0];
        for (std::size_t i = 0; i < self.size(); ++i) g[i] += self.grad[i] * sv2;
      }
      if (sn->requires_grad) {
        auto& g = sn->ensure_grad();
        double acc = 0.0;
        for (std::size_t i = 0; i < self.size(); ++i) acc += self.grad[i] * an->value[i];
        g[0] += acc;
      }
    };
  }
  return Tensor::wrap(out);
}

namespace {

template <typename Fwd, typename Dydx>
Tensor unary_op(const Tensor& a, const char* name, Fwd fwd, Dydx dydx) {
  check_defined(a, name);
  auto out = new_node(a.rows(), a.cols(), {a});
  for (std::size_t i = 0; i < out->size(); ++i) out->value[i] = fwd(a.data()[i]);
  if (out->requires_grad) {
    auto an = a.node();
    out->backward = [an, dydx](Tensor::Node& self) {
      auto& g = an->ensure_grad();
      for (std::size_t i = 0; i < self.size(); ++i)
        g[i] += self.grad[i] * dydx(an->value[i], self.value[i]);
    };
  }
  return Tensor::wrap(out);
}

}  // namespace

Tensor relu(const Tensor& a) {
  return unary_op(a, "relu",
                  [](double x) { return x > 0.0 ? x : 0.0; },
                  [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Tensor tanh_op(const Tensor& a) {
  return unary_op(a, "tanh",
                  [](double x) { return std::tanh(x); },
                  [](double, double y) { return 1.0 - y * y; });
}

Tensor sigmoid(const Tensor& a) {
  return unary_op(a, "sigmoid",
                  [](double x) { return 1.0 / (1.0 + std::exp(-x)); },
                  [](double, double y) { return y * (1.0 - y); });
}

Tensor concat(const std::vector<Tensor>& parts, int axis) {
  if (parts.empty()) throw std::invalid_argument("concat: no inputs");
  if (axis != 0 && axis != 1) throw std::invalid_argument("concat: axis out of range");
  for (const Tensor& p : parts) check_defined(p, "concat");
  int rows, cols;
  if (axis == 0) {
    cols = parts[0].cols();
    rows = 0;
    for (const Tensor& p : parts) {
      if (p.cols() != cols)
        throw std::invalid_argument("concat axis 0: column mismatch " +
                                    std::to_string(p.cols()) + " vs " + std::to_string(cols));
      rows += p.rows();
    }
  } else {
    rows = parts[0].rows();
    cols = 0;
    for (const Tensor& p : parts) {
      if (p.rows() != rows)
        throw std::invalid_argument("concat axis 1: row mismatch " +
                                    std::to_string(p.rows()) + " vs " + std::to_string(rows));
      cols += p.cols();
    }
  }
  auto out = new_node(rows, cols, parts);
  if (axis == 0) {
    std::size_t off = 0;
    for (const Tensor& p : parts) {
      std::copy(p.data().begin(), p.data().end(), out->value.begin() + off);
      off += p.size();
    }
  } else {
    int coff = 0;
    for (const Tensor& p : parts) {
      for (int i = 0; i < rows; ++i)
        for (int j = 0; j < p.cols(); ++j)
          out->value[static_cast<std::size_t>(i) * cols + coff + j] = p.at(i, j);
      coff += p.cols();
    }
  }
  if (out->requires_grad) {
    std::vector<std::shared_ptr<Tensor::Node>> pn;
    pn.reserve(parts.size());
    for (const Tensor& p : parts) pn.push_back(p.node());
    out->backward = [pn, axis, rows, cols](Tensor::Node& self) {
      if (axis == 0) {
        std::size_t off = 0;
        for (auto& p : pn) {
          if (p->requires_grad) {
            auto& g = p->ensure_grad();
            for (std::size_t i = 0; i < p->size(); ++i) g[i] += self.grad[off + i];
          }
          off += p->size();
        }
      } else {
        int coff = 0;
        for (auto& p : pn) {
          if (p->requires_grad) {
            auto& g = p->ensure_grad();
            for (int i = 0; i < rows; ++i)
              for (int j = 0; j < p->cols; ++j)
                g[static_cast<std::size_t>(i) * p->cols + j] +=
                    self.grad[static_cast<std::size_t>(i) * cols + coff + j];
          }
          coff += p->cols;
        }
      }
    };
  }
  return Tensor::wrap(out);
}

Tensor slice_rows(const Tensor& a, int r0, int r1) {
  check_defined(a, "slice_rows");
  if (r0 < 0 || r1 > a.rows() || r0 >= r1)
    throw std::invalid_argument("slice_rows: bad range [" + std::to_string(r0) + "," +
                                std::to_string(r1) + ") for " + std::to_string(a.rows()) + " rows");
  const int c = a.cols();
  auto out = new_node(r1 - r0, c, {a});
  std::copy(a.data().begin() + static_cast<std::size_t>(r0) * c,
            a.data().begin() + static_cast<std::size_t>(r1) * c, out->value.begin());
  if (out->requires_grad) {
    auto an = a.node();
    out->backward = [an, r0, c](Tensor::Node& self) {
      auto& g = an->ensure_grad();
      for (std::size_t i = 0; i < self.size(); ++i)
        g[static_cast<std::size_t>(r0) * c + i] += self.grad[i];
    };
  }
  return Tensor::wrap(out);
}

Tensor slice_cols(const Tensor& a, int c0, int c1) {
  check_defined(a, "slice_cols");
  if (c0 < 0 || c1 > a.cols() || c0 >= c1)
    throw std::invalid_argument("slice_cols: bad range [" + std::to_string(c0) + "," +
                                std::to_string(c1) + ") for " + std::to_string(a.cols()) + " cols");
  const int r = a.rows(), c = a.cols(), w = c1 - c0;
  auto out = new_node(r, w, {a});
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < w; ++j) out->value[i * w + j] = a.at(i, c0 + j);
  if (out->requires_grad) {
    auto an = a.node();
    out->backward = [an, r, c, c0, w](Tensor::Node& self) {
      auto& g = an->ensure_grad();
      for (int i = 0; i < r; ++i)
        for (int j = 0; j < w; ++j) g[static_cast<std::size_t>(i) * c + c0 + j] += self.grad[i * w + j];
    };
  }
  return Tensor::wrap(out);
}

Tensor unfold_rows(const Tensor& a, int window) {
  check_defined(a, "unfold_rows");
  if (window < 1 || window > a.rows())
    throw std::invalid_argument("unfold_rows: window " + std::to_string(window) +
                                " out of range for " + std::to_string(a.rows()) + " rows");
  const int r = a.rows(), c = a.cols();
  const int outr = r - window + 1, outc = window * c;
  auto out = new_node(outr, outc, {a});
  for (int i = 0; i < outr; ++i)
    for (int w = 0; w < window; ++w)
      for (int j = 0; j < c; ++j)
        out->value[static_cast<std::size_t>(i) * outc + w * c + j] = a.at(i + w, j);
  if (out->requires_grad) {
    auto an = a.node();
    out->backward = [an, outr, outc, window, c](Tensor::Node& self) {
      auto& g = an->ensure_grad();
      for (int i = 0; i < outr; ++i)
        for (int w = 0; w < window; ++w)
          for (int j = 0; j < c; ++j)
            g[static_cast<std::size_t>(i + w) * c + j] +=
                self.grad[static_cast<std::size_t>(i) * outc + w * c + j];
    };
  }
  return Tensor::wrap(out);
}

namespace {

void softmax_line(const double* x, double* y, int n, int stride) {
  double mx = x[0];
  for (int i = 1; i < n; ++i) mx = std::max(mx, x[i * stride]);
  double sum = 0.0;
  for (int i = 0; i < n; ++i) {
    y[i * stride] = std::exp(x[i * stride] - mx);
    sum += y[i * stride];
  }
  for (int i = 0; i < n; ++i) y[i * stride] /= sum;
}

}  // namespace

Tensor softmax(const Tensor& a, int axis) {
  check_defined(a, "softmax");
  if (axis != 0 && axis != 1) throw std::invalid_argument("softmax: axis out of range");
  for (double v : a.data())
    if (std::isnan(v)) throw std::domain_error("softmax: NaN input");
  const int r = a.rows(), c = a.cols();
  auto out = new_node(r, c, {a});
  if (axis == 1) {
    for (int i = 0; i < r; ++i) softmax_line(a.data().data() + i * c, out->value.data() + i * c, c, 1);
  } else {
    for (int j = 0; j < c; ++j) softmax_line(a.data().data() + j, out->value.data() + j, r, c);
  }
  if (out->requires_grad) {
    auto an = a.node();
    out->backward = [an, axis, r, c](Tensor::Node& self) {
      auto& g = an->ensure_grad();
      auto bp_line = [](const double* y, const double* gy, double* gx, int n, int stride) {
        double dot = 0.0;
        for (int i = 0; i < n; ++i) dot += y[i * stride] * gy[i * stride];
        for (int i = 0; i < n; ++i) gx[i * stride] += y[i * stride] * (gy[i * stride] - dot);
      };
      if (axis == 1) {
        for (int i = 0; i < r; ++i)
          bp_line(self.value.data() + i * c, self.grad.data() + i * c, g.data() + i * c, c, 1);
      } else {
        for (int j = 0; j < c; ++j)
          bp_line(self.value.data() + j, self.grad.data() + j, g.data() + j, r, c);
      }
    };
  }
  return Tensor::wrap(out);
}

Tensor log_softmax_rows(const Tensor& a) {
  check_defined(a, "log_softmax");
  const int r = a.rows(), c = a.cols();
  auto out = new_node(r, c, {a});
  for (int i = 0; i < r; ++i) {
    const double* x = a.data().data() + i * c;
    double mx = x[0];
    for (int j = 1; j < c; ++j) mx = std::max(mx, x[j]);
    double sum = 0.0;
    for (int j = 0; j < c; ++j) sum += std::exp(x[j] - mx);
    const double lse = mx + std::log(sum);
    for (int j = 0; j < c; ++j) out->value[i * c + j] = x[j] - lse;
  }
  if (out->requires_grad) {
    auto an = a.node();
    out->backward = [an, r, c](Tensor::Node& self) {
      auto& g = an->ensure_grad();
      for (int i = 0; i < r; ++i) {
        double gsum = 0.0;
        for (int j = 0; j < c; ++j) gsum += self.grad[i * c + j];
        for (int j = 0; j < c; ++j)
          g[i * c + j] += self.grad[i * c + j] - std::exp(self.value[i * c + j]) * gsum;
      }
    };
  }
  return Tensor::wrap(out);
}

Tensor layer_norm(const Tensor& a, const Tensor& gain, const Tensor& bias, double eps) {
  check_defined(a, "layer_norm");
  check_defined(gain, "layer_norm");
  check_defined(bias, "layer_norm");
  const int r = a.rows(), c = a.cols();
  if (gain.rows() != 1 || gain.cols() != c || bias.rows() != 1 || bias.cols() != c)
    throw std::invalid_argument("layer_norm: gain/bias must be 1x" + std::to_string(c));
  auto out = new_node(r, c, {a, gain, bias});
  // Keep normalized rows for backward.
  auto xhat = std::make_shared<std::vector<double>>(static_cast<std::size_t>(r) * c);
  auto inv_std = std::make_shared<std::vector<double>>(r);
  for (int i = 0; i < r; ++i) {
    const double* x = a.data().data() + i * c;
    double mean = 0.0;
    for (int j = 0; j < c; ++j) mean += x[j];
    mean /= c;
    double var = 0.0;
    for (int j = 0; j < c; ++j) var += (x[j] - mean) * (x[j] - mean);
    var /= c;
    const double is = 1.0 / std::sqrt(var + eps);
    (*inv_std)[i] = is;
    for (int j = 0; j < c; ++j) {
      const double xh = (x[j] - mean) * is;
      (*xhat)[i * c + j] = xh;
      out->value[i * c + j] = gain.data()[j] * xh + bias.data()[j];
    }
  }
  if (out->requires_grad) {
    auto an = a.node();
    auto gn = gain.node();
    auto bn = bias.node();
    out->backward = [an, gn, bn, xhat, inv_std, r, c](Tensor::Node& self) {
      for (int i = 0; i < r; ++i) {
        const double* gy = self.grad.data() + i * c;
        const double* xh = xhat->data() + i * c;
        if (gn->requires_grad) {
          auto& gg = gn->ensure_grad();
          for (int j = 0; j < c; ++j) gg[j] += gy[j] * xh[j];
        }
        if (bn->requires_grad) {
          auto& gb = bn->ensure_grad();
          for (int j = 0; j < c; ++j) gb[j] += gy[j];
        }
        if (an->requires_grad) {
          auto& ga = an->ensure_grad();
          double m1 = 0.0, m2 = 0.0;
          for (int j = 0; j < c; ++j) {
            const double dxh = gy[j] * gn->value[j];
            m1 += dxh;
            m2 += dxh * xh[j];
          }
          m1 /= c;
          m2 /= c;
          for (int j = 0; j < c; ++j) {
            const double dxh = gy[j] * gn->value[j];
            ga[i * c + j] += (*inv_std)[i] * (dxh - m1 - xh[j] * m2);
          }
        }
      }
    };
  }
  return Tensor::wrap(out);
}

Tensor max_pool(const Tensor& a, int axis) {
  check_defined(a, "max_pool");
  if (axis != 0 && axis != 1) throw std::invalid_argument("max_pool: axis out of range");
  const int r = a.rows(), c = a.cols();
  const int outr = axis == 0 ? 1 : r;
  const int outc = axis == 0 ? c : 1;
  auto out = new_node(outr, outc, {a});
  auto argmax = std::make_shared<std::vector<int>>(static_cast<std::size_t>(outr) * outc, 0);
  auto reduce = [&](int n, int stride, const double* x, double* y, int* arg) {
    int best = 0;
    for (int i = 1; i < n; ++i)
      if (x[i * stride] > x[best * stride]) best = i;  // first argmax on ties
    *y = x[best * stride];
    *arg = best;
  };
  if (axis == 0) {
    for (int j = 0; j < c; ++j)
      reduce(r, c, a.data().data() + j, out->value.data() + j, argmax->data() + j);
  } else {
    for (int i = 0; i < r; ++i)
      reduce(c, 1, a.data().data() + i * c, out->value.data() + i, argmax->data() + i);
  }
  if (out->requires_grad) {
    auto an = a.node();
    out->backward = [an, argmax, axis, r, c](Tensor::Node& self) {
      auto& g = an->ensure_grad();
      if (axis == 0) {
        for (int j = 0; j < c; ++j) g[static_cast<std::size_t>((*argmax)[j]) * c + j] += self.grad[j];
      } else {
        for (int i = 0; i < r; ++i) g[static_cast<std::size_t>(i) * c + (*argmax)[i]] += self.grad[i];
      }
    };
  }
  return Tensor::wrap(out);
}

Tensor mean_rows(const Tensor& a) {
  check_defined(a, "mean_rows");
  const int r = a.rows(), c = a.cols();
  auto out = new_node(1, c, {a});
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j) out->value[j] += a.at(i, j);
  for (int j = 0; j < c; ++j) out->value[j] /= r;
  if (out->requires_grad) {
    auto an = a.node();
    out->backward = [an, r, c](Tensor::Node& self) {
      auto& g = an->ensure_grad();
      for (int i = 0; i < r; ++i)
        for (int j = 0; j < c; ++j) g[static_cast<std::size_t>(i) * c + j] += self.grad[j] / r;
    };
  }
  return Tensor::wrap(out);
}

Tensor sum_all(const Tensor& a) {
  check_defined(a, "sum_all");
  auto out = new_node(1, 1, {a});
  double acc = 0.0;
  for (double v : a.data()) acc += v;
  out->value[0] = acc;
  if (out->requires_grad) {
    auto an = a.node();
    out->backward = [an](Tensor::Node& self) {
      auto& g = an->ensure_grad();
      for (double& gv : g) gv += self.grad[0];
    };
  }
  return Tensor::wrap(out);
}

Tensor pick(const Tensor& a, int r, int c) {
  check_defined(a, "pick");
  if (r < 0 || r >= a.rows() || c < 0 || c >= a.cols())
    throw std::out_of_range("pick: index (" + std::to_string(r) + "," + std::to_string(c) +
                            ") out of range for " + shape_str(a.rows(), a.cols()));
  auto out = new_node(1, 1, {a});
  out->value[0] = a.at(r, c);
  if (out->requires_grad) {
    auto an = a.node();
    const std::size_t idx = static_cast<std::size_t>(r) * a.cols() + c;
    out->backward = [an, idx](Tensor::Node& self) {
      an->ensure_grad()[idx] += self.grad[0];
    };
  }
  return Tensor::wrap(out);
}

Tensor embedding_lookup(const Tensor& table, const std::vector<int>& ids) {
  check_defined(table, "embedding_lookup");
  if (ids.empty()) throw std::invalid_argument("embedding_lookup: empty id list");
  const int c = table.cols();
  for (int id : ids)
    if (id < 0 || id >= table.rows())
      throw std::out_of_range("embedding_lookup: id " + std::to_string(id) +
                              " out of range for table with " + std::to_string(table.rows()) + " rows");
  auto out = new_node(static_cast<int>(ids.size()), c, {table});
  for (std::size_t i = 0; i < ids.size(); ++i)
    std::copy(table.data().begin() + static_cast<std::size_t>(ids[i]) * c,
              table.data().begin() + static_cast<std::size_t>(ids[i] + 1) * c,
              out->value.begin() + i * c);
  if (out->requires_grad) {
    auto tn = table.node();
    auto ids_copy = std::make_shared<std::vector<int>>(ids);
    out->backward = [tn, ids_copy, c](Tensor::Node& self) {
      auto& g = tn->ensure_grad();
      for (std::size_t i = 0; i < ids_copy->size(); ++i)
        for (int j = 0; j < c; ++j)
          g[static_cast<std::size_t>((*ids_copy)[i]) * c + j] += self.grad[i * c + j];
    };
  }
  return Tensor::wrap(out);
}

Tensor dropout(const Tensor& a, double p, Rng& rng, bool training) {
  check_defined(a, "dropout");
  if (p < 0.0 || p >= 1.0)
    throw std::invalid_argument("dropout: rate must be in [0,1), got " + std::to_string(p));
  if (!training || p == 0.0) return a;
  const double keep = 1.0 - p;
  auto mask = std::make_shared<std::vector<double>>(a.size());
  for (double& m : *mask) m = rng.bernoulli(keep) ? 1.0 / keep : 0.0;
  auto out = new_node(a.rows(), a.cols(), {a});
  for (std::size_t i = 0; i < out->size(); ++i) out->value[i] = a.data()[i] * (*mask)[i];
  if (out->requires_grad) {
    auto an = a.node();
    out->backward = [an, mask](Tensor::Node& self) {
      auto& g = an->ensure_grad();
      for (std::size_t i = 0; i < self.size(); ++i) g[i] += self.grad[i] * (*mask)[i];
    };
  }
  return Tensor::wrap(out);
}

void backward(const Tensor& loss) {
  if (!loss.defined()) throw std::invalid_argument("backward: undefined tensor");
  if (loss.size() != 1) throw std::invalid_argument("backward: loss must be a scalar (1x1)");
  // Iterative post-order topological sort.
  std::vector<Tensor::Node*> order;
  std::unordered_set<Tensor::Node*> visited;
  struct Frame {
    Tensor::Node* node;
    std::size_t next_parent;
  };
  std::vector<Frame> stack;
  stack.push_back({loss.node().get(), 0});
  visited.insert(loss.node().get());
  while (!stack.empty()) {
    Frame& f = stack.back();
    if (f.next_parent < f.node->parents.size()) {
      Tensor::Node* p = f.node->parents[f.next_parent++].get();
      if (p->requires_grad && !visited.count(p)) {
        visited.insert(p);
        stack.push_back({p, 0});
      }
    } else {
      order.push_back(f.node);
      stack.pop_back();
    }
  }
  // Interior nodes are reset each pass; leaves (parameters) accumulate
  // across repeated calls.
  for (Tensor::Node* n : order)
    if (n->backward) n->grad.assign(n->value.size(), 0.0);
  loss.node()->ensure_grad()[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Tensor::Node* n = *it;
    if (n->backward && n->grad.size() == n->value.size()) n->backward(*n);
  }
}

}  // namespace hlpnn
