#pragma once

// Dense float64 tensors with reverse-mode automatic differentiation.
//
// Operations are recorded on a define-by-run tape (Graph) that is active on
// the calling thread. Any op whose inputs include a tensor with
// requires_grad appends a node holding the inputs it needs for backward; the
// backward pass replays nodes in strict reverse append order. Without an
// active graph, ops compute values only.

#include <cstddef>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace aeig::ad {

using Shape = std::vector<std::size_t>;

std::size_t numel(const Shape& shape);
std::string to_string(const Shape& shape);

class Graph;

struct TensorImpl {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;  // sized like data iff requires_grad
  bool requires_grad = false;
  std::optional<std::size_t> node_id;
  Graph* graph = nullptr;
};

class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape);
  static Tensor full(Shape shape, double value);
  static Tensor from(Shape shape, std::vector<double> values);
  static Tensor scalar(double value);
  // Leaf with a gradient buffer.
  static Tensor parameter(Shape shape, std::vector<double> values);

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t size() const;
  std::size_t extent(std::size_t axis) const;

  std::span<const double> data() const;
  std::span<double> mutable_data();
  std::span<const double> grad() const;
  std::span<double> mutable_grad();
  double item() const;
  double at(std::size_t i) const { return data()[i]; }

  bool requires_grad() const;
  void set_requires_grad(bool on);
  void zero_grad();
  std::optional<std::size_t> node_id() const;

  // Copy of the values with no graph attachment.
  Tensor detach() const;

  const std::shared_ptr<TensorImpl>& impl() const { return impl_; }

 private:
  explicit Tensor(std::shared_ptr<TensorImpl> impl) : impl_(std::move(impl)) {}
  std::shared_ptr<TensorImpl> impl_;

  friend Tensor make_result(Shape, std::vector<double>, const std::vector<Tensor>&);
};

enum class OpKind {
  add, sub, mul, tanh, exp, square, affine, matmul, add_bias, mean_square, sum,
  reshape, conv, maxpool, upsample, pad, crop, image_gradient, slice
};

const char* op_name(OpKind kind);

struct Node {
  OpKind kind;
  std::vector<std::shared_ptr<TensorImpl>> inputs;  // saved activations
  std::shared_ptr<TensorImpl> output;
  std::function<void()> backward;
};

class Graph {
 public:
  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  std::size_t size() const { return nodes_.size(); }
  const Node& node(std::size_t id) const { return nodes_.at(id); }

  std::size_t record(Node node);
  void backward(const Tensor& loss);

  // Graph receiving ops on this thread, or nullptr.
  static Graph* active();

 private:
  friend class GraphScope;
  friend class NoGradScope;
  std::vector<Node> nodes_;
};

// Makes `graph` the active tape on this thread for the scope's lifetime.
class GraphScope {
 public:
  explicit GraphScope(Graph& graph);
  ~GraphScope();
  GraphScope(const GraphScope&) = delete;
  GraphScope& operator=(const GraphScope&) = delete;

 private:
  Graph* previous_;
};

// Suspends recording on this thread for the scope's lifetime.
class NoGradScope {
 public:
  NoGradScope();
  ~NoGradScope();
  NoGradScope(const NoGradScope&) = delete;
  NoGradScope& operator=(const NoGradScope&) = delete;

 private:
  Graph* previous_;
};

// Allocates the output of an op. The result requires grad when a graph is
// active and any input requires grad; the caller then registers a backward
// closure with `attach`.
Tensor make_result(Shape shape, std::vector<double> values, const std::vector<Tensor>& inputs);
void attach(const Tensor& out, OpKind kind, const std::vector<Tensor>& inputs,
            std::function<void()> backward);

// Accumulates d(loss)/d(leaf) into every requires_grad leaf reachable from
// `loss`. Repeated calls accumulate. A loss without a recorded node is a no-op.
void backward(const Tensor& loss);

enum class Elementwise { add, sub, mul, tanh, exp, square };

// Binary ops accept equal shapes or a single-element operand on either side.
Tensor elementwise(Elementwise op, const Tensor& a, const Tensor& b = Tensor());

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor tanh(const Tensor& a);
Tensor exp(const Tensor& a);
Tensor square(const Tensor& a);

// alpha * a + beta with constant coefficients.
Tensor affine(const Tensor& a, double alpha, double beta = 0.0);

Tensor matmul(const Tensor& a, const Tensor& b);
// a[..., n] + bias[n]
Tensor add_bias(const Tensor& a, const Tensor& bias);
Tensor reduce_mean_square(const Tensor& a);
Tensor sum(const Tensor& a);
Tensor reshape(const Tensor& a, Shape shape);
// Rows [begin, end) along axis 0.
Tensor slice_batch(const Tensor& a, std::size_t begin, std::size_t end);

// Throws NumericalError naming `what` if any value is NaN or infinite.
void check_finite(const Tensor& t, const std::string& what);

}  // namespace aeig::ad
