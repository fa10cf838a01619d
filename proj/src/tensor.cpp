#include "aeig/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <Eigen/Core>

#include "aeig/errors.hpp"

namespace aeig::ad {

namespace {

thread_local Graph* g_active = nullptr;

bool all_finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

void require(bool cond, const std::string& msg) {
  if (!cond) throw ShapeError(msg);
}

}  // namespace

std::size_t numel(const Shape& shape) {
  std::size_t n = 1;
  for (auto e : shape) n *= e;
  return n;
}

std::string to_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << ']';
  return os.str();
}

const char* op_name(OpKind kind) {
  switch (kind) {
    case OpKind::add: return "add";
    case OpKind::sub: return "sub";
    case OpKind::mul: return "mul";
    case OpKind::tanh: return "tanh";
    case OpKind::exp: return "exp";
    case OpKind::square: return "square";
    case OpKind::affine: return "affine";
    case OpKind::matmul: return "matmul";
    case OpKind::add_bias: return "add_bias";
    case OpKind::mean_square: return "mean_square";
    case OpKind::sum: return "sum";
    case OpKind::reshape: return "reshape";
    case OpKind::conv: return "conv";
    case OpKind::maxpool: return "maxpool";
    case OpKind::upsample: return "upsample";
    case OpKind::pad: return "pad";
    case OpKind::crop: return "crop";
    case OpKind::image_gradient: return "image_gradient";
    case OpKind::slice: return "slice";
  }
  return "?";
}

// ---------------------------------------------------------------------------
// Tensor

Tensor Tensor::zeros(Shape shape) { return full(std::move(shape), 0.0); }

Tensor Tensor::full(Shape shape, double value) {
  auto n = numel(shape);
  return from(std::move(shape), std::vector<double>(n, value));
}

Tensor Tensor::from(Shape shape, std::vector<double> values) {
  for (auto e : shape) require(e > 0, "tensor extents must be positive: " + to_string(shape));
  require(numel(shape) == values.size(),
          "tensor data length " + std::to_string(values.size()) + " does not match shape " +
              to_string(shape));
  auto impl = std::make_shared<TensorImpl>();
  impl->shape = std::move(shape);
  impl->data = std::move(values);
  return Tensor(std::move(impl));
}

Tensor Tensor::scalar(double value) { return from({1}, {value}); }

Tensor Tensor::parameter(Shape shape, std::vector<double> values) {
  Tensor t = from(std::move(shape), std::move(values));
  t.set_requires_grad(true);
  return t;
}

const Shape& Tensor::shape() const { return impl_->shape; }
std::size_t Tensor::size() const { return impl_->data.size(); }
std::size_t Tensor::extent(std::size_t axis) const { return impl_->shape.at(axis); }
std::span<const double> Tensor::data() const { return impl_->data; }
std::span<double> Tensor::mutable_data() { return impl_->data; }
std::span<const double> Tensor::grad() const { return impl_->grad; }
std::span<double> Tensor::mutable_grad() { return impl_->grad; }

double Tensor::item() const {
  if (size() != 1) throw ContractError("item() on tensor of shape " + to_string(shape()));
  return impl_->data[0];
}

bool Tensor::requires_grad() const { return impl_->requires_grad; }

void Tensor::set_requires_grad(bool on) {
  impl_->requires_grad = on;
  if (on)
    impl_->grad.assign(impl_->data.size(), 0.0);
  else
    impl_->grad.clear();
}

void Tensor::zero_grad() { std::fill(impl_->grad.begin(), impl_->grad.end(), 0.0); }

std::optional<std::size_t> Tensor::node_id() const { return impl_->node_id; }

Tensor Tensor::detach() const { return from(impl_->shape, impl_->data); }

// ---------------------------------------------------------------------------
// Graph

std::size_t Graph::record(Node node) {
  nodes_.push_back(std::move(node));
  return nodes_.size() - 1;
}

Graph* Graph::active() { return g_active; }

void Graph::backward(const Tensor& loss) {
  if (loss.size() != 1)
    throw ContractError("backward requires a scalar loss, got shape " + to_string(loss.shape()));
  if (!loss.requires_grad()) return;
  auto& out = *loss.impl();
  if (!out.node_id) {
    // Leaf loss: d(loss)/d(loss) = 1.
    out.grad[0] += 1.0;
    return;
  }
  if (out.graph != this) throw ContractError("loss was recorded on a different graph");
  const std::size_t last = *out.node_id;
  for (std::size_t i = 0; i <= last; ++i) {
    auto& g = nodes_[i].output->grad;
    std::fill(g.begin(), g.end(), 0.0);
  }
  out.grad[0] = 1.0;
  for (std::size_t i = last + 1; i-- > 0;) nodes_[i].backward();
}

GraphScope::GraphScope(Graph& graph) : previous_(g_active) { g_active = &graph; }
GraphScope::~GraphScope() { g_active = previous_; }

NoGradScope::NoGradScope() : previous_(g_active) { g_active = nullptr; }
NoGradScope::~NoGradScope() { g_active = previous_; }

Tensor make_result(Shape shape, std::vector<double> values, const std::vector<Tensor>& inputs) {
  Tensor out = Tensor::from(std::move(shape), std::move(values));
#ifdef AEIG_DEBUG_CHECKS
  bool inputs_finite = true;
  for (const auto& in : inputs) inputs_finite = inputs_finite && all_finite(in.data());
  if (inputs_finite && !all_finite(out.data()))
    throw NumericalError("non-finite value produced from finite inputs");
#endif
  if (Graph::active()) {
    for (const auto& in : inputs) {
      if (in.defined() && in.requires_grad()) {
        out.set_requires_grad(true);
        break;
      }
    }
  }
  return out;
}

void attach(const Tensor& out, OpKind kind, const std::vector<Tensor>& inputs,
            std::function<void()> backward_fn) {
  if (!out.requires_grad()) return;
  Graph* g = Graph::active();
  Node node{kind, {}, out.impl(), std::move(backward_fn)};
  for (const auto& in : inputs)
    if (in.defined()) node.inputs.push_back(in.impl());
  out.impl()->node_id = g->record(std::move(node));
  out.impl()->graph = g;
}

void backward(const Tensor& loss) {
  if (loss.size() != 1)
    throw ContractError("backward requires a scalar loss, got shape " + to_string(loss.shape()));
  if (!loss.requires_grad()) return;
  Graph* g = loss.impl()->graph;
  if (g == nullptr) {
    loss.impl()->grad[0] += 1.0;
    return;
  }
  g->backward(loss);
}

void check_finite(const Tensor& t, const std::string& what) {
  if (!all_finite(t.data())) throw NumericalError("non-finite value in " + what);
}

// ---------------------------------------------------------------------------
// Elementwise

namespace {

struct Broadcast {
  bool a_scalar = false;
  bool b_scalar = false;
  Shape shape;
};

Broadcast broadcast(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() == b.shape()) return {false, false, a.shape()};
  if (b.size() == 1) return {false, true, a.shape()};
  if (a.size() == 1) return {true, false, b.shape()};
  throw ShapeError(std::string(op) + ": shapes " + to_string(a.shape()) + " and " +
                   to_string(b.shape()) + " are not broadcastable");
}

// Adds `g` into `dst`, summing when dst is a broadcast scalar.
void accumulate(TensorImpl& dst, bool scalar, std::size_t i, double g) {
  if (scalar)
    dst.grad[0] += g;
  else
    dst.grad[i] += g;
}

Tensor binary(Elementwise op, const Tensor& a, const Tensor& b) {
  const char* name = op == Elementwise::add ? "add" : op == Elementwise::sub ? "sub" : "mul";
  auto bc = broadcast(a, b, name);
  const std::size_t n = numel(bc.shape);
  const auto ad = a.data();
  const auto bd = b.data();
  std::vector<double> v(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double x = ad[bc.a_scalar ? 0 : i];
    const double y = bd[bc.b_scalar ? 0 : i];
    v[i] = op == Elementwise::add ? x + y : op == Elementwise::sub ? x - y : x * y;
  }
  Tensor out = make_result(bc.shape, std::move(v), {a, b});
  auto pa = a.impl(), pb = b.impl();
  auto po = out.impl().get();
  OpKind kind = op == Elementwise::add ? OpKind::add
                : op == Elementwise::sub ? OpKind::sub
                                         : OpKind::mul;
  attach(out, kind, {a, b}, [pa, pb, po, bc, op, n] {
    const auto& g = po->grad;
    for (std::size_t i = 0; i < n; ++i) {
      const double x = pa->data[bc.a_scalar ? 0 : i];
      const double y = pb->data[bc.b_scalar ? 0 : i];
      double ga = g[i], gb = g[i];
      if (op == Elementwise::sub) gb = -g[i];
      if (op == Elementwise::mul) {
        ga = g[i] * y;
        gb = g[i] * x;
      }
      if (pa->requires_grad) accumulate(*pa, bc.a_scalar, i, ga);
      if (pb->requires_grad) accumulate(*pb, bc.b_scalar, i, gb);
    }
  });
  return out;
}

Tensor unary(Elementwise op, const Tensor& a) {
  const auto ad = a.data();
  std::vector<double> v(ad.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    switch (op) {
      case Elementwise::tanh: v[i] = std::tanh(ad[i]); break;
      case Elementwise::exp: v[i] = std::exp(ad[i]); break;
      default: v[i] = ad[i] * ad[i]; break;
    }
  }
  Tensor out = make_result(a.shape(), std::move(v), {a});
  auto pa = a.impl();
  auto po = out.impl().get();
  OpKind kind = op == Elementwise::tanh ? OpKind::tanh
                : op == Elementwise::exp ? OpKind::exp
                                         : OpKind::square;
  attach(out, kind, {a}, [pa, po, op] {
    if (!pa->requires_grad) return;
    const auto& g = po->grad;
    for (std::size_t i = 0; i < g.size(); ++i) {
      double d;
      switch (op) {
        case Elementwise::tanh: d = 1.0 - po->data[i] * po->data[i]; break;
        case Elementwise::exp: d = po->data[i]; break;
        default: d = 2.0 * pa->data[i]; break;
      }
      pa->grad[i] += g[i] * d;
    }
  });
  return out;
}

}  // namespace

Tensor elementwise(Elementwise op, const Tensor& a, const Tensor& b) {
  switch (op) {
    case Elementwise::add:
    case Elementwise::sub:
    case Elementwise::mul:
      if (!b.defined()) throw ContractError("binary elementwise op needs two operands");
      return binary(op, a, b);
    default:
      return unary(op, a);
  }
}

Tensor add(const Tensor& a, const Tensor& b) { return elementwise(Elementwise::add, a, b); }
Tensor sub(const Tensor& a, const Tensor& b) { return elementwise(Elementwise::sub, a, b); }
Tensor mul(const Tensor& a, const Tensor& b) { return elementwise(Elementwise::mul, a, b); }
Tensor tanh(const Tensor& a) { return elementwise(Elementwise::tanh, a); }
Tensor exp(const Tensor& a) { return elementwise(Elementwise::exp, a); }
Tensor square(const Tensor& a) { return elementwise(Elementwise::square, a); }

Tensor affine(const Tensor& a, double alpha, double beta) {
  const auto ad = a.data();
  std::vector<double> v(ad.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = alpha * ad[i] + beta;
  Tensor out = make_result(a.shape(), std::move(v), {a});
  auto pa = a.impl();
  auto po = out.impl().get();
  attach(out, OpKind::affine, {a}, [pa, po, alpha] {
    if (!pa->requires_grad) return;
    for (std::size_t i = 0; i < po->grad.size(); ++i) pa->grad[i] += alpha * po->grad[i];
  });
  return out;
}

// ---------------------------------------------------------------------------
// Linear algebra and reductions

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.extent(1) != b.extent(0))
    throw ShapeError("matmul: incompatible shapes " + to_string(a.shape()) + " x " +
                     to_string(b.shape()));
  const std::size_t m = a.extent(0), k = a.extent(1), n = b.extent(1);
  using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  using Map = Eigen::Map<RowMat>;
  using CMap = Eigen::Map<const RowMat>;
  const auto M = static_cast<Eigen::Index>(m), K = static_cast<Eigen::Index>(k),
             N = static_cast<Eigen::Index>(n);
  std::vector<double> v(m * n);
  // Row by row, so each output row is independent of how many rows share the batch.
  const CMap A(a.data().data(), M, K), B(b.data().data(), K, N);
  Map C(v.data(), M, N);
  for (Eigen::Index i = 0; i < M; ++i) C.row(i).noalias() = A.row(i) * B;
  Tensor out = make_result({m, n}, std::move(v), {a, b});
  auto pa = a.impl(), pb = b.impl();
  auto po = out.impl().get();
  attach(out, OpKind::matmul, {a, b}, [pa, pb, po, M, K, N] {
    const CMap g(po->grad.data(), M, N);
    if (pa->requires_grad)  // dA = dC * B^T
      Map(pa->grad.data(), M, K).noalias() += g * CMap(pb->data.data(), K, N).transpose();
    if (pb->requires_grad)  // dB = A^T * dC
      Map(pb->grad.data(), K, N).noalias() += CMap(pa->data.data(), M, K).transpose() * g;
  });
  return out;
}

Tensor add_bias(const Tensor& a, const Tensor& bias) {
  const std::size_t n = bias.size();
  if (a.rank() == 0 || a.shape().back() != n)
    throw ShapeError("add_bias: bias of length " + std::to_string(n) +
                     " does not match trailing extent of " + to_string(a.shape()));
  const auto ad = a.data();
  const auto bd = bias.data();
  std::vector<double> v(ad.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = ad[i] + bd[i % n];
  Tensor out = make_result(a.shape(), std::move(v), {a, bias});
  auto pa = a.impl(), pb = bias.impl();
  auto po = out.impl().get();
  attach(out, OpKind::add_bias, {a, bias}, [pa, pb, po, n] {
    const auto& g = po->grad;
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (pa->requires_grad) pa->grad[i] += g[i];
      if (pb->requires_grad) pb->grad[i % n] += g[i];
    }
  });
  return out;
}

Tensor reduce_mean_square(const Tensor& a) {
  if (!a.defined() || a.size() == 0) throw DomainError("reduce_mean_square of an empty tensor");
  const auto ad = a.data();
  double s = 0.0;
  for (double x : ad) s += x * x;
  const double count = static_cast<double>(ad.size());
  Tensor out = make_result({1}, {s / count}, {a});
  auto pa = a.impl();
  auto po = out.impl().get();
  attach(out, OpKind::mean_square, {a}, [pa, po, count] {
    if (!pa->requires_grad) return;
    const double g = po->grad[0] * 2.0 / count;
    for (std::size_t i = 0; i < pa->data.size(); ++i) pa->grad[i] += g * pa->data[i];
  });
  return out;
}

Tensor sum(const Tensor& a) {
  double s = 0.0;
  for (double x : a.data()) s += x;
  Tensor out = make_result({1}, {s}, {a});
  auto pa = a.impl();
  auto po = out.impl().get();
  attach(out, OpKind::sum, {a}, [pa, po] {
    if (!pa->requires_grad) return;
    for (auto& g : pa->grad) g += po->grad[0];
  });
  return out;
}

Tensor reshape(const Tensor& a, Shape shape) {
  if (numel(shape) != a.size())
    throw ShapeError("reshape: cannot view " + to_string(a.shape()) + " as " + to_string(shape));
  Tensor out = make_result(std::move(shape), std::vector<double>(a.data().begin(), a.data().end()), {a});
  auto pa = a.impl();
  auto po = out.impl().get();
  attach(out, OpKind::reshape, {a}, [pa, po] {
    if (!pa->requires_grad) return;
    for (std::size_t i = 0; i < po->grad.size(); ++i) pa->grad[i] += po->grad[i];
  });
  return out;
}

Tensor slice_batch(const Tensor& a, std::size_t begin, std::size_t end) {
  if (a.rank() == 0 || begin >= end || end > a.extent(0))
    throw ShapeError("slice_batch: rows [" + std::to_string(begin) + "," + std::to_string(end) +
                     ") out of range for " + to_string(a.shape()));
  const std::size_t row = a.size() / a.extent(0);
  Shape shape = a.shape();
  shape[0] = end - begin;
  std::vector<double> v(a.data().begin() + begin * row, a.data().begin() + end * row);
  Tensor out = make_result(std::move(shape), std::move(v), {a});
  auto pa = a.impl();
  auto po = out.impl().get();
  const std::size_t offset = begin * row;
  attach(out, OpKind::slice, {a}, [pa, po, offset] {
    if (!pa->requires_grad) return;
    for (std::size_t i = 0; i < po->grad.size(); ++i) pa->grad[offset + i] += po->grad[i];
  });
  return out;
}

}  // namespace aeig::ad
