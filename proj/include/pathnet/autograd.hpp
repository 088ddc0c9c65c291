#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace pathnet {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

namespace detail {

struct Node {
  Matrix value;
  Matrix grad;  // empty until something flows into it
  bool requires_grad = false;
  std::uint64_t id = 0;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward;  // pushes this->grad into parents

  void accumulate(const Matrix& g);
};

}  // namespace detail

/// Handle to a node of a reverse-mode differentiation graph. Every value is
/// a row-major matrix; vectors are 1 x n rows. Copies share the node.
///
/// Nodes are numbered on creation and parents are always created before
/// their children, so sorting reachable nodes by descending id is a valid
/// reverse topological order. A graph must stay on the thread that built it.
class Tensor {
 public:
  Tensor() = default;

  static Tensor constant(Matrix value);
  /// Leaf that accumulates gradients across backward() calls.
  static Tensor parameter(Matrix value);
  static Tensor zeros(Eigen::Index rows, Eigen::Index cols);
  static Tensor row_vector(std::span<const double> values);
  static Tensor scalar(double v);

  bool defined() const { return node_ != nullptr; }
  Eigen::Index rows() const { return node_->value.rows(); }
  Eigen::Index cols() const { return node_->value.cols(); }
  std::array<Eigen::Index, 2> shape() const { return {rows(), cols()}; }
  Eigen::Index size() const { return node_->value.size(); }
  bool requires_grad() const { return node_->requires_grad; }
  std::uint64_t id() const { return node_->id; }

  const Matrix& value() const { return node_->value; }
  /// Mutable value access, meant for parameters (optimizer, checkpoints,
  /// finite differences).
  Matrix& mutable_value() { return node_->value; }
  double item() const;

  /// Gradient, or zeros of the value's shape when nothing reached the node.
  Matrix grad() const;
  bool has_grad() const { return node_->grad.size() > 0; }
  Matrix& mutable_grad();
  void zero_grad() { node_->grad.resize(0, 0); }

  bool same_node(const Tensor& other) const { return node_ == other.node_; }

  // Internal: used by op implementations.
  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}
  const std::shared_ptr<detail::Node>& node() const { return node_; }

 private:
  std::shared_ptr<detail::Node> node_;
};

/// Disables graph recording on this thread while alive.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

bool grad_enabled();

/// Reverse sweep from a 1x1 output. Leaf gradients accumulate (+=);
/// `seed` scales the output gradient (used for minibatch averaging).
void backward(const Tensor& output, double seed = 1.0);

// Forward ops. Shape mismatches throw ShapeError naming the op and shapes.
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);
/// Side-by-side concatenation; all parts share the row count.
Tensor concat_cols(const std::vector<Tensor>& parts);
/// Stacks parts vertically; all parts share the column count.
Tensor concat_rows(const std::vector<Tensor>& parts);
Tensor add(const Tensor& a, const Tensor& b);
/// a (n x m) plus a 1 x m row broadcast over every row.
Tensor add_row(const Tensor& a, const Tensor& row);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double s);
Tensor tanh(const Tensor& a);
Tensor sigmoid(const Tensor& a);
/// Softmax over each row (max-subtracted).
Tensor row_softmax(const Tensor& a);
/// Softmax over each column.
Tensor col_softmax(const Tensor& a);
/// Average of the rows: n x m -> 1 x m.
Tensor mean_rows(const Tensor& a);
Tensor sum(const Tensor& a);
/// Dot product of two equally shaped tensors, as 1 x 1.
Tensor dot(const Tensor& a, const Tensor& b);
Tensor slice_rows(const Tensor& a, Eigen::Index begin, Eigen::Index count);
Tensor row(const Tensor& a, Eigen::Index i);
Tensor slice_cols(const Tensor& a, Eigen::Index begin, Eigen::Index count);
/// Picks entries of a 1 x n row: result is 1 x indices.size().
Tensor gather(const Tensor& a, const std::vector<Eigen::Index>& indices);
/// log(sum(exp(a))) over all entries, as 1 x 1.
Tensor logsumexp(const Tensor& a);

/// Inverted dropout: in training, zeroes each entry with probability p and
/// scales survivors by 1/(1-p). Identity when not training or p == 0.
Tensor dropout(const Tensor& x, double p, bool training, std::mt19937_64& rng);

}  // namespace pathnet
