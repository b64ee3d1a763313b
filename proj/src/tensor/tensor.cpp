#include "ara/tensor.hpp"

#include <algorithm>
#include <sstream>
#include <unordered_set>

namespace ara {

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

float* TensorImpl::grad_buffer() {
  if (grad.empty()) grad.assign(data.size(), 0.0f);
  return grad.data();
}

Tensor Tensor::zeros(const Shape& shape) { return full(shape, 0.0f); }

Tensor Tensor::full(const Shape& shape, float value) {
  return from_data(shape, std::vector<float>(shape_numel(shape), value));
}

Tensor Tensor::from_data(const Shape& shape, std::vector<float> values) {
  if (values.size() != shape_numel(shape)) {
    throw ShapeError("from_data: shape " + shape_str(shape) + " needs " +
                     std::to_string(shape_numel(shape)) + " values, got " +
                     std::to_string(values.size()));
  }
  auto impl = std::make_shared<TensorImpl>();
  impl->shape = shape;
  impl->data = std::move(values);
  return Tensor(std::move(impl));
}

Tensor Tensor::scalar(float value) { return from_data({}, {value}); }

const Shape& Tensor::shape() const {
  if (!impl_) throw std::logic_error("use of undefined tensor");
  return impl_->shape;
}

std::size_t Tensor::dim(std::size_t axis) const {
  const auto& s = shape();
  if (axis >= s.size()) {
    throw ShapeError("dim: axis " + std::to_string(axis) + " out of range for " + shape_str(s));
  }
  return s[axis];
}

std::size_t Tensor::numel() const { return impl_ ? impl_->data.size() : 0; }

std::span<const float> Tensor::data() const {
  if (!impl_) throw std::logic_error("use of undefined tensor");
  return impl_->data;
}

std::span<float> Tensor::mutable_data() {
  if (!impl_) throw std::logic_error("use of undefined tensor");
  if (impl_->node || impl_->released) throw GraphError("mutable_data: tensor is a graph output");
  return impl_->data;
}

float Tensor::item() const {
  if (numel() != 1) throw ShapeError("item: tensor " + shape_str(shape()) + " is not a scalar");
  return impl_->data[0];
}

bool Tensor::requires_grad() const { return impl_ && impl_->requires_grad; }

Tensor& Tensor::set_requires_grad(bool flag) {
  if (!impl_) throw std::logic_error("use of undefined tensor");
  if (impl_->node && !flag) throw GraphError("set_requires_grad(false) on a graph output; use detach()");
  impl_->requires_grad = flag;
  return *this;
}

bool Tensor::is_leaf() const { return impl_ && !impl_->node && !impl_->released; }

bool Tensor::has_grad() const { return impl_ && !impl_->grad.empty(); }

std::span<const float> Tensor::grad() const {
  if (!has_grad()) throw GraphError("grad: tensor has no gradient");
  return impl_->grad;
}

Tensor Tensor::grad_tensor() const {
  auto g = grad();
  return from_data(shape(), std::vector<float>(g.begin(), g.end()));
}

void Tensor::zero_grad() {
  if (impl_) impl_->grad.clear();
}

void Tensor::backward() const {
  if (!impl_) throw GraphError("backward: undefined tensor");
  if (impl_->data.size() != 1) {
    throw GraphError("backward: loss must be a scalar, got shape " + shape_str(impl_->shape));
  }
  if (impl_->released) throw GraphError("backward: graph already released by a previous backward()");
  if (!impl_->requires_grad) throw GraphError("backward: loss does not require grad");
  if (!impl_->node) {
    // A bare leaf: d(x)/dx = 1.
    impl_->grad_buffer()[0] += 1.0f;
    return;
  }

  // Iterative post-order DFS gives a topological order (parents first).
  std::vector<TensorImpl*> order;
  std::unordered_set<TensorImpl*> seen;
  std::vector<std::pair<TensorImpl*, std::size_t>> stack{{impl_.get(), 0}};
  seen.insert(impl_.get());
  while (!stack.empty()) {
    auto& [cur, next] = stack.back();
    if (cur->node && next < cur->node->parents.size()) {
      TensorImpl* p = cur->node->parents[next++].get();
      if (p->requires_grad && seen.insert(p).second) stack.emplace_back(p, 0);
      continue;
    }
    order.push_back(cur);
    stack.pop_back();
  }

  impl_->grad.assign(1, 1.0f);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    TensorImpl* t = *it;
    if (!t->node) continue;
    for (auto& p : t->node->parents) {
      if (p->requires_grad) p->grad_buffer();
    }
    if (!t->grad.empty()) t->node->backward(*t);
  }

  // Release the graph; interior gradients are not retained.
  for (TensorImpl* t : order) {
    if (t->node) {
      t->node.reset();
      t->released = true;
      if (t != impl_.get()) t->grad.clear();
    }
  }
}

Tensor Tensor::detach() const {
  auto impl = std::make_shared<TensorImpl>();
  impl->shape = shape();
  impl->data = impl_->data;
  return Tensor(std::move(impl));
}

Tensor Tensor::clone() const {
  Tensor t = detach();
  t.impl_->requires_grad = impl_->requires_grad && is_leaf();
  return t;
}

namespace detail {

Tensor make_result(const char* op, Shape shape, std::vector<float> data,
                   std::vector<Tensor> parents,
                   std::function<void(const TensorImpl& out)> backward) {
  auto impl = std::make_shared<TensorImpl>();
  impl->shape = std::move(shape);
  impl->data = std::move(data);
  bool any = std::any_of(parents.begin(), parents.end(),
                         [](const Tensor& p) { return p.requires_grad(); });
  if (any && backward) {
    auto node = std::make_shared<GraphNode>();
    node->op = op;
    node->parents.reserve(parents.size());
    for (auto& p : parents) node->parents.push_back(p.impl());
    node->backward = std::move(backward);
    impl->node = std::move(node);
    impl->requires_grad = true;
  }
  return Tensor(std::move(impl));
}

void require_same_shape(const char* op, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                     shape_str(b.shape()));
  }
}

}  // namespace detail

}  // namespace ara
