#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace ara {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

/// Raised for any violated shape precondition. The message names the
/// offending operation and dimension.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when backward() cannot run (non-scalar loss, released graph).
class GraphError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

struct TensorImpl;

// One recorded operation. The closure reads the output's grad and
// accumulates into the parents' grad buffers.
struct GraphNode {
  const char* op = "";
  std::vector<std::shared_ptr<TensorImpl>> parents;
  std::function<void(const TensorImpl& out)> backward;
};

struct TensorImpl {
  Shape shape;
  std::vector<float> data;
  std::vector<float> grad;  // empty until first accumulation
  bool requires_grad = false;
  std::shared_ptr<GraphNode> node;  // null for leaves
  bool released = false;            // graph output whose graph was freed

  float* grad_buffer();  // allocates zeros on first use
};

/// Dense float32 tensor with reverse-mode autodiff.
///
/// Copies are shallow: two Tensor values may share one impl, exactly like a
/// handle. Use clone() for a deep copy and detach() to cut the graph.
///
/// Gradients accumulate into leaves across backward() calls until
/// zero_grad(). A graph is released after its backward pass, so calling
/// backward() twice on the same loss throws GraphError.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(const Shape& shape);
  static Tensor full(const Shape& shape, float value);
  static Tensor from_data(const Shape& shape, std::vector<float> values);
  static Tensor scalar(float value);

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t numel() const;

  std::span<const float> data() const;
  /// Mutable access; only legal on tensors that are not graph outputs.
  std::span<float> mutable_data();
  float item() const;
  float at(std::size_t flat_index) const { return data()[flat_index]; }

  bool requires_grad() const;
  Tensor& set_requires_grad(bool flag);
  bool is_leaf() const;
  bool has_grad() const;
  std::span<const float> grad() const;
  Tensor grad_tensor() const;
  void zero_grad();

  void backward() const;

  Tensor detach() const;
  Tensor clone() const;

  const std::shared_ptr<TensorImpl>& impl() const { return impl_; }
  explicit Tensor(std::shared_ptr<TensorImpl> impl) : impl_(std::move(impl)) {}

 private:
  std::shared_ptr<TensorImpl> impl_;
};

namespace detail {

// Creates an op output. Records a node only when some parent requires grad.
Tensor make_result(const char* op, Shape shape, std::vector<float> data,
                   std::vector<Tensor> parents,
                   std::function<void(const TensorImpl& out)> backward);

void require_same_shape(const char* op, const Tensor& a, const Tensor& b);

}  // namespace detail

}  // namespace ara
