#pragma once

// Dense row-major tensor of doubles with reverse-mode differentiation.
//
// A Tensor is a cheap handle onto a shared graph node. Values never change
// after construction except through `mutable_values()` on leaf tensors (the
// optimizer path); gradients accumulate in place until `zero_grad()`.

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace ntrr {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);
std::string shape_string(const Shape& shape);

class Tensor;

namespace detail {
struct Node;
}

/// Handed to an op's backward function. Gives access to the output gradient
/// and lazily allocated, zero-initialised gradient buffers of the inputs.
class BackwardContext {
 public:
  explicit BackwardContext(detail::Node& node) : node_(node) {}

  std::span<const double> out_grad() const;
  std::span<const double> out_values() const;
  const Tensor& input(std::size_t i) const;
  /// Empty span when input `i` does not require a gradient.
  std::span<double> input_grad(std::size_t i);
  bool wants_grad(std::size_t i) const;

 private:
  detail::Node& node_;
};

using BackwardFn = std::function<void(BackwardContext&)>;

class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor from(Shape shape, std::vector<double> values, bool requires_grad = false);
  static Tensor matrix(std::initializer_list<std::initializer_list<double>> rows, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);

  bool defined() const noexcept { return node_ != nullptr; }
  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t size() const;
  std::size_t dim(std::size_t axis) const;
  /// Shorthands for rank-2 tensors.
  std::size_t rows() const { return dim(0); }
  std::size_t cols() const { return dim(1); }

  std::span<const double> values() const;
  /// Leaf tensors only; used by optimizers and initialisers.
  std::span<double> mutable_values();
  double item() const;
  double at(std::size_t i) const { return values()[i]; }
  double at(std::size_t r, std::size_t c) const { return values()[r * cols() + c]; }

  bool requires_grad() const;
  bool is_leaf() const;
  bool has_grad() const;
  /// Gradient buffer; zeros of the tensor's size if nothing accumulated yet.
  std::span<const double> grad() const;
  std::span<double> mutable_grad();
  void zero_grad();

  /// Copy of the values with no history and no gradient.
  Tensor detach() const;

  /// Reverse-mode sweep from a scalar. Leaf gradients accumulate across calls.
  void backward() const;

  /// Same underlying node.
  bool same_as(const Tensor& other) const noexcept { return node_ == other.node_; }

  /// Builds an op result. `backward` may be empty for non-differentiable ops.
  static Tensor make_op(Shape shape, std::vector<double> values, std::vector<Tensor> inputs, BackwardFn backward);

 private:
  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}
  std::shared_ptr<detail::Node> node_;
  friend class BackwardContext;
};

/// When enabled, every op output is scanned for NaN and +Inf (-Inf marks
/// masked attention scores and is allowed). Off by default; on in debug builds.
void set_debug_checks(bool enabled);
bool debug_checks();

}  // namespace ntrr
