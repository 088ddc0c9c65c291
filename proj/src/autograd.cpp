#include "pathnet/autograd.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <string>
#include <unordered_set>

#include "pathnet/error.hpp"

namespace pathnet {

namespace {

std::atomic<std::uint64_t> g_next_id{1};
thread_local bool t_grad_enabled = true;

using NodePtr = std::shared_ptr<detail::Node>;

std::string shape_str(const Matrix& m) {
  return "(" + std::to_string(m.rows()) + "x" + std::to_string(m.cols()) + ")";
}

[[noreturn]] void shape_fail(const char* op, const Matrix& a, const Matrix& b) {
  throw ShapeError(std::string(op) + ": incompatible shapes " + shape_str(a) + " and " +
                   shape_str(b));
}

NodePtr new_node(Matrix value) {
  auto n = std::make_shared<detail::Node>();
  n->value = std::move(value);
  n->id = g_next_id.fetch_add(1, std::memory_order_relaxed);
  return n;
}

// Builds an op result; the graph edge is recorded only when some parent
// needs a gradient and recording is enabled.
Tensor make_result(Matrix value, std::vector<NodePtr> parents,
                   std::function<void(detail::Node&)> backward_fn) {
  auto n = new_node(std::move(value));
  const bool needs = t_grad_enabled && std::any_of(parents.begin(), parents.end(),
                                                   [](const NodePtr& p) { return p->requires_grad; });
  if (needs) {
    n->requires_grad = true;
    n->parents = std::move(parents);
    n->backward = std::move(backward_fn);
  }
  return Tensor(std::move(n));
}

void push(const NodePtr& parent, const Matrix& g) {
  if (parent->requires_grad) parent->accumulate(g);
}

template <typename Expr>
void push_expr(const NodePtr& parent, const Expr& g) {
  if (!parent->requires_grad) return;
  if (parent->grad.size() == 0) {
    parent->grad = g;
  } else {
    parent->grad += g;
  }
}

}  // namespace

void detail::Node::accumulate(const Matrix& g) {
  if (grad.size() == 0) {
    grad = g;
  } else {
    grad += g;
  }
}

Tensor Tensor::constant(Matrix value) { return Tensor(new_node(std::move(value))); }

Tensor Tensor::parameter(Matrix value) {
  auto n = new_node(std::move(value));
  n->requires_grad = true;
  return Tensor(std::move(n));
}

Tensor Tensor::zeros(Eigen::Index rows, Eigen::Index cols) {
  return constant(Matrix::Zero(rows, cols));
}

Tensor Tensor::row_vector(std::span<const double> values) {
  Matrix m(1, static_cast<Eigen::Index>(values.size()));
  for (std::size_t i = 0; i < values.size(); ++i) m(0, static_cast<Eigen::Index>(i)) = values[i];
  return constant(std::move(m));
}

Tensor Tensor::scalar(double v) {
  Matrix m(1, 1);
  m(0, 0) = v;
  return constant(std::move(m));
}

double Tensor::item() const {
  if (size() != 1) throw ShapeError("item: tensor of shape " + shape_str(value()) + " is not scalar");
  return node_->value(0, 0);
}

Matrix Tensor::grad() const {
  if (node_->grad.size() == 0) return Matrix::Zero(rows(), cols());
  return node_->grad;
}

Matrix& Tensor::mutable_grad() {
  if (node_->grad.size() == 0) node_->grad = Matrix::Zero(rows(), cols());
  return node_->grad;
}

NoGradGuard::NoGradGuard() : previous_(t_grad_enabled) { t_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { t_grad_enabled = previous_; }

bool grad_enabled() { return t_grad_enabled; }

void backward(const Tensor& output, double seed) {
  if (output.size() != 1)
    throw ShapeError("backward: output of shape " + shape_str(output.value()) + " is not scalar");
  const auto& root = output.node();
  if (!root->requires_grad) return;

  std::vector<detail::Node*> order;
  std::vector<detail::Node*> stack{root.get()};
  std::unordered_set<detail::Node*> visited;
  auto mark = [&](detail::Node* n) { return visited.insert(n).second; };
  mark(root.get());
  while (!stack.empty()) {
    detail::Node* n = stack.back();
    stack.pop_back();
    order.push_back(n);
    for (const auto& p : n->parents) {
      if (p->requires_grad && mark(p.get())) stack.push_back(p.get());
    }
  }
  std::sort(order.begin(), order.end(),
            [](const detail::Node* a, const detail::Node* b) { return a->id > b->id; });

  Matrix g(1, 1);
  g(0, 0) = seed;
  root->accumulate(g);
  for (detail::Node* n : order) {
    if (!n->backward || n->grad.size() == 0) continue;
    n->backward(*n);
    n->grad.resize(0, 0);  // interior gradients are consumed
  }
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.cols() != b.rows()) shape_fail("matmul", a.value(), b.value());
  Matrix v = a.value() * b.value();
  return make_result(std::move(v), {a.node(), b.node()}, [](detail::Node& self) {
    const auto& pa = self.parents[0];
    const auto& pb = self.parents[1];
    if (pa->requires_grad) push_expr(pa, self.grad * pb->value.transpose());
    if (pb->requires_grad) push_expr(pb, pa->value.transpose() * self.grad);
  });
}

Tensor transpose(const Tensor& a) {
  Matrix v = a.value().transpose();
  return make_result(std::move(v), {a.node()}, [](detail::Node& self) {
    push_expr(self.parents[0], self.grad.transpose());
  });
}

Tensor concat_cols(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw ShapeError("concat_cols: no inputs");
  const Eigen::Index r = parts.front().rows();
  Eigen::Index c = 0;
  for (const auto& p : parts) {
    if (p.rows() != r) shape_fail("concat_cols", parts.front().value(), p.value());
    c += p.cols();
  }
  Matrix v(r, c);
  std::vector<NodePtr> parents;
  std::vector<Eigen::Index> widths;
  Eigen::Index off = 0;
  for (const auto& p : parts) {
    v.middleCols(off, p.cols()) = p.value();
    off += p.cols();
    parents.push_back(p.node());
    widths.push_back(p.cols());
  }
  return make_result(std::move(v), std::move(parents), [widths](detail::Node& self) {
    Eigen::Index o = 0;
    for (std::size_t i = 0; i < widths.size(); ++i) {
      push_expr(self.parents[i], self.grad.middleCols(o, widths[i]));
      o += widths[i];
    }
  });
}

Tensor concat_rows(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw ShapeError("concat_rows: no inputs");
  const Eigen::Index c = parts.front().cols();
  Eigen::Index r = 0;
  for (const auto& p : parts) {
    if (p.cols() != c) shape_fail("concat_rows", parts.front().value(), p.value());
    r += p.rows();
  }
  Matrix v(r, c);
  std::vector<NodePtr> parents;
  std::vector<Eigen::Index> heights;
  Eigen::Index off = 0;
  for (const auto& p : parts) {
    v.middleRows(off, p.rows()) = p.value();
    off += p.rows();
    parents.push_back(p.node());
    heights.push_back(p.rows());
  }
  return make_result(std::move(v), std::move(parents), [heights](detail::Node& self) {
    Eigen::Index o = 0;
    for (std::size_t i = 0; i < heights.size(); ++i) {
      push_expr(self.parents[i], self.grad.middleRows(o, heights[i]));
      o += heights[i];
    }
  });
}

Tensor add(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) shape_fail("add", a.value(), b.value());
  Matrix v = a.value() + b.value();
  return make_result(std::move(v), {a.node(), b.node()}, [](detail::Node& self) {
    push(self.parents[0], self.grad);
    push(self.parents[1], self.grad);
  });
}

Tensor add_row(const Tensor& a, const Tensor& r) {
  if (r.rows() != 1 || r.cols() != a.cols()) shape_fail("add_row", a.value(), r.value());
  Matrix v = a.value().rowwise() + r.value().row(0);
  return make_result(std::move(v), {a.node(), r.node()}, [](detail::Node& self) {
    push(self.parents[0], self.grad);
    push_expr(self.parents[1], self.grad.colwise().sum());
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) shape_fail("sub", a.value(), b.value());
  Matrix v = a.value() - b.value();
  return make_result(std::move(v), {a.node(), b.node()}, [](detail::Node& self) {
    push(self.parents[0], self.grad);
    push_expr(self.parents[1], -self.grad);
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) shape_fail("mul", a.value(), b.value());
  Matrix v = a.value().cwiseProduct(b.value());
  return make_result(std::move(v), {a.node(), b.node()}, [](detail::Node& self) {
    const auto& pa = self.parents[0];
    const auto& pb = self.parents[1];
    if (pa->requires_grad) push_expr(pa, self.grad.cwiseProduct(pb->value));
    if (pb->requires_grad) push_expr(pb, self.grad.cwiseProduct(pa->value));
  });
}

Tensor scale(const Tensor& a, double s) {
  Matrix v = a.value() * s;
  return make_result(std::move(v), {a.node()}, [s](detail::Node& self) {
    push_expr(self.parents[0], self.grad * s);
  });
}

Tensor tanh(const Tensor& a) {
  Matrix v = a.value().array().tanh().matrix();
  return make_result(std::move(v), {a.node()}, [](detail::Node& self) {
    push_expr(self.parents[0],
              (self.grad.array() * (1.0 - self.value.array().square())).matrix());
  });
}

Tensor sigmoid(const Tensor& a) {
  Matrix v = (1.0 / (1.0 + (-a.value().array()).exp())).matrix();
  return make_result(std::move(v), {a.node()}, [](detail::Node& self) {
    const auto y = self.value.array();
    push_expr(self.parents[0], (self.grad.array() * y * (1.0 - y)).matrix());
  });
}

Tensor row_softmax(const Tensor& a) {
  Matrix v = a.value();
  for (Eigen::Index i = 0; i < v.rows(); ++i) {
    const double m = v.row(i).maxCoeff();
    v.row(i) = (v.row(i).array() - m).exp().matrix();
    v.row(i) /= v.row(i).sum();
  }
  return make_result(std::move(v), {a.node()}, [](detail::Node& self) {
    Matrix g(self.value.rows(), self.value.cols());
    for (Eigen::Index i = 0; i < g.rows(); ++i) {
      const double inner = self.grad.row(i).dot(self.value.row(i));
      g.row(i) = (self.value.row(i).array() * (self.grad.row(i).array() - inner)).matrix();
    }
    push(self.parents[0], g);
  });
}

Tensor col_softmax(const Tensor& a) {
  Matrix v = a.value();
  for (Eigen::Index j = 0; j < v.cols(); ++j) {
    const double m = v.col(j).maxCoeff();
    v.col(j) = (v.col(j).array() - m).exp().matrix();
    v.col(j) /= v.col(j).sum();
  }
  return make_result(std::move(v), {a.node()}, [](detail::Node& self) {
    Matrix g(self.value.rows(), self.value.cols());
    for (Eigen::Index j = 0; j < g.cols(); ++j) {
      const double inner = self.grad.col(j).dot(self.value.col(j));
      g.col(j) = (self.value.col(j).array() * (self.grad.col(j).array() - inner)).matrix();
    }
    push(self.parents[0], g);
  });
}

Tensor mean_rows(const Tensor& a) {
  if (a.rows() == 0) throw ShapeError("mean_rows: empty input");
  Matrix v = a.value().colwise().mean();
  const Eigen::Index n = a.rows();
  return make_result(std::move(v), {a.node()}, [n](detail::Node& self) {
    Matrix g = self.grad.replicate(n, 1) / static_cast<double>(n);
    push(self.parents[0], g);
  });
}

Tensor sum(const Tensor& a) {
  Matrix v(1, 1);
  v(0, 0) = a.value().sum();
  const Eigen::Index r = a.rows();
  const Eigen::Index c = a.cols();
  return make_result(std::move(v), {a.node()}, [r, c](detail::Node& self) {
    push(self.parents[0], Matrix::Constant(r, c, self.grad(0, 0)));
  });
}

Tensor dot(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) shape_fail("dot", a.value(), b.value());
  Matrix v(1, 1);
  v(0, 0) = a.value().cwiseProduct(b.value()).sum();
  return make_result(std::move(v), {a.node(), b.node()}, [](detail::Node& self) {
    const double g = self.grad(0, 0);
    const auto& pa = self.parents[0];
    const auto& pb = self.parents[1];
    if (pa->requires_grad) push_expr(pa, pb->value * g);
    if (pb->requires_grad) push_expr(pb, pa->value * g);
  });
}

Tensor slice_rows(const Tensor& a, Eigen::Index begin, Eigen::Index count) {
  if (begin < 0 || count < 0 || begin + count > a.rows())
    throw ShapeError("slice_rows: rows [" + std::to_string(begin) + ", " +
                     std::to_string(begin + count) + ") out of range for " + shape_str(a.value()));
  Matrix v = a.value().middleRows(begin, count);
  const Eigen::Index r = a.rows();
  return make_result(std::move(v), {a.node()}, [begin, count, r](detail::Node& self) {
    auto& p = self.parents[0];
    if (p->grad.size() == 0) p->grad = Matrix::Zero(r, self.value.cols());
    p->grad.middleRows(begin, count) += self.grad;
  });
}

Tensor row(const Tensor& a, Eigen::Index i) { return slice_rows(a, i, 1); }

Tensor slice_cols(const Tensor& a, Eigen::Index begin, Eigen::Index count) {
  if (begin < 0 || count < 0 || begin + count > a.cols())
    throw ShapeError("slice_cols: cols [" + std::to_string(begin) + ", " +
                     std::to_string(begin + count) + ") out of range for " + shape_str(a.value()));
  Matrix v = a.value().middleCols(begin, count);
  const Eigen::Index c = a.cols();
  return make_result(std::move(v), {a.node()}, [begin, count, c](detail::Node& self) {
    auto& p = self.parents[0];
    if (p->grad.size() == 0) p->grad = Matrix::Zero(self.value.rows(), c);
    p->grad.middleCols(begin, count) += self.grad;
  });
}

Tensor gather(const Tensor& a, const std::vector<Eigen::Index>& indices) {
  if (a.rows() != 1) throw ShapeError("gather: expected a row vector, got " + shape_str(a.value()));
  Matrix v(1, static_cast<Eigen::Index>(indices.size()));
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] < 0 || indices[i] >= a.cols())
      throw ShapeError("gather: index " + std::to_string(indices[i]) + " out of range for " +
                       shape_str(a.value()));
    v(0, static_cast<Eigen::Index>(i)) = a.value()(0, indices[i]);
  }
  const Eigen::Index c = a.cols();
  return make_result(std::move(v), {a.node()}, [indices, c](detail::Node& self) {
    auto& p = self.parents[0];
    if (p->grad.size() == 0) p->grad = Matrix::Zero(1, c);
    for (std::size_t i = 0; i < indices.size(); ++i)
      p->grad(0, indices[i]) += self.grad(0, static_cast<Eigen::Index>(i));
  });
}

Tensor logsumexp(const Tensor& a) {
  if (a.size() == 0) throw ShapeError("logsumexp: empty input");
  const double m = a.value().maxCoeff();
  const double s = (a.value().array() - m).exp().sum();
  Matrix v(1, 1);
  v(0, 0) = m + std::log(s);
  return make_result(std::move(v), {a.node()}, [](detail::Node& self) {
    const auto& p = self.parents[0];
    const double lse = self.value(0, 0);
    push_expr(p, ((p->value.array() - lse).exp() * self.grad(0, 0)).matrix());
  });
}

Tensor dropout(const Tensor& x, double p, bool training, std::mt19937_64& rng) {
  if (!(p >= 0.0 && p < 1.0)) throw Error("dropout", "dropout probability must lie in [0, 1)");
  if (!training || p == 0.0) return x;
  Matrix mask(x.rows(), x.cols());
  const double keep_scale = 1.0 / (1.0 - p);
  for (Eigen::Index i = 0; i < mask.size(); ++i) {
    const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    mask.data()[i] = u < p ? 0.0 : keep_scale;
  }
  Matrix v = x.value().cwiseProduct(mask);
  return make_result(std::move(v), {x.node()}, [mask = std::move(mask)](detail::Node& self) {
    push_expr(self.parents[0], self.grad.cwiseProduct(mask));
  });
}

}  // namespace pathnet
